//! Run configuration.
//!
//! One JSON document describes a study. Units: lengths in m, forces in N,
//! moments in N·m, masses in kg, accelerations in m/s², moduli in Pa. Unknown
//! keys are rejected at every level, and every section is checked before any
//! computation starts.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use pkm_forge_core::dynamics::{DynamicSpec, InertiaModel};
use pkm_forge_core::grid::GridSpec;
use pkm_forge_core::kinematics::{GeometryParams, KinematicSpec};
use pkm_forge_core::optimize::{presets, GeometryStudy, GoalProblem, Schedule, SearchOptions};
use pkm_forge_core::stiffness::{CrossSection, OrthoglideStiffness, StiffnessSpec};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Governs multistart sampling; replaces `optimize.schedule.seed`.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinematic: Option<KinematicSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stiffness: Option<StiffnessSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Evaluation grid. Nodes are spaced `proportions / resolution` apart and
/// cover `bounds` (default: the box the legs can reach) with a margin. The
/// node lattice does not depend on `resolution` beyond refinement, so a run
/// at `2·N0` contains every node of the run at `N0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub proportions: [f64; 3],
    pub resolution: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<[[f64; 3]; 2]>,
}

impl GridSection {
    pub fn spec(&self, geometry: &GeometryParams) -> Result<GridSpec, CliError> {
        let (lo, hi) = match self.bounds {
            Some([lo, hi]) => (lo, hi),
            None => geometry.workspace_bounds(),
        };
        GridSpec::covering(self.proportions, self.resolution, lo, hi).map_err(CliError::config)
    }
}

/// Elastic model of the three legs plus the deflection criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StiffnessSection {
    /// Axial stiffness of each actuator [N/m].
    pub actuator_stiffness: f64,
    pub foot_section: CrossSection,
    pub foot_length: f64,
    pub parallelogram_section: CrossSection,
    /// Per-leg direction the parallelogram width lies along.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width_references: Option<[[f64; 3]; 3]>,
    /// Offset from the leg junction to the tool tip [m].
    #[serde(default)]
    pub tool_offset: [f64; 3],
    pub criterion: StiffnessSpec,
}

impl StiffnessSection {
    pub fn model(&self, geometry: &GeometryParams) -> Result<OrthoglideStiffness, CliError> {
        let mut m = OrthoglideStiffness::new(
            geometry.clone(),
            self.actuator_stiffness,
            self.foot_section,
            self.foot_length,
            self.parallelogram_section,
        )
        .map_err(CliError::config)?;
        if let Some(refs) = self.width_references {
            m = m.with_width_references(refs).map_err(CliError::config)?;
        }
        m.with_tool_offset(self.tool_offset).map_err(CliError::config)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsSection {
    pub inertia: InertiaModel,
    pub criterion: DynamicSpec,
}

/// Either a named analytic preset or the leg-length study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryStudy>,
    /// Defaults to the coarse-to-fine schedule for the leg-length study and
    /// to the solver's default tolerances for presets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<Schedule>,
    /// Weight lattice density for `pareto`: each weight is a multiple of
    /// `1 / pareto_divisions`.
    #[serde(default = "default_pareto_divisions")]
    pub pareto_divisions: usize,
}

fn default_pareto_divisions() -> usize {
    10
}

pub enum StudyKind<'a> {
    Preset(&'a str, GoalProblem),
    Geometry(&'a GeometryStudy),
}

impl OptimizeSection {
    pub fn schedule(&self) -> Schedule {
        self.schedule.clone().unwrap_or_else(|| match self.geometry {
            Some(_) => Schedule::default(),
            None => Schedule { search: SearchOptions::default(), ..Schedule::default() },
        })
    }

    pub fn study(&self) -> Result<StudyKind<'_>, CliError> {
        match (&self.preset, &self.geometry) {
            (Some(name), None) => presets::by_name(name).map(|p| StudyKind::Preset(name, p)).ok_or_else(|| {
                CliError::Config(format!("unknown preset `{name}`; known: {}", presets::NAMES.join(", ")))
            }),
            (None, Some(study)) => Ok(StudyKind::Geometry(study)),
            _ => Err(CliError::Config("optimize needs exactly one of `preset` and `geometry`".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: default_directory(), formats: default_formats() }
    }
}

impl OutputSection {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub resolution: Option<u32>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(CliError::config)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_overrides(mut self, o: &Overrides) -> Result<Self, CliError> {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(r) = o.resolution {
            match self.grid.as_mut() {
                Some(g) => g.resolution = r,
                None => return Err(CliError::Config("--resolution given but the config has no grid".into())),
            }
        }
        if let Some(d) = &o.out {
            self.output.directory = d.clone();
        }
        if let Some(opt) = self.optimize.as_mut() {
            let mut schedule = opt.schedule();
            schedule.seed = self.seed;
            opt.schedule = Some(schedule);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if let Some(k) = &self.kinematic {
            if !(k.k_max.is_finite() && k.k_max >= 1.0) {
                return Err(CliError::Config(format!("kinematic.k_max must be finite and >= 1, got {}", k.k_max)));
            }
            if let Some([lo, hi]) = k.sigma_range {
                if !(lo >= 0.0 && lo <= hi) {
                    return Err(CliError::Config(format!("kinematic.sigma_range must be ordered, got [{lo}, {hi}]")));
                }
            }
        }
        if let (Some(grid), Some(g)) = (&self.grid, &self.geometry) {
            grid.spec(g)?;
        }
        if let (Some(s), Some(g)) = (&self.stiffness, &self.geometry) {
            s.model(g)?;
        }
        if let Some(opt) = &self.optimize {
            if let StudyKind::Geometry(study) = opt.study()? {
                study.validate().map_err(CliError::config)?;
            }
            if opt.pareto_divisions == 0 {
                return Err(CliError::Config("optimize.pareto_divisions must be positive".into()));
            }
        }
        if self.output.formats.is_empty() {
            return Err(CliError::Config("output.formats lists no format".into()));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<&GeometryParams, CliError> {
        self.geometry.as_ref().ok_or_else(|| CliError::Config("config has no `geometry` section".into()))
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let grid = self.grid.as_ref().ok_or_else(|| CliError::Config("config has no `grid` section".into()))?;
        grid.spec(self.geometry()?)
    }

    pub fn optimize(&self) -> Result<&OptimizeSection, CliError> {
        self.optimize.as_ref().ok_or_else(|| CliError::Config("config has no `optimize` section".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"schema_version": 1, "optimize": {"preset": "symmetric-pair"}}"#;

    #[test]
    fn minimal_preset_config_parses() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert!(matches!(c.optimize().unwrap().study().unwrap(), StudyKind::Preset("symmetric-pair", _)));
        assert_eq!(c.output, OutputSection::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = r#"{"schema_version": 1, "optimise": {}}"#;
        assert!(matches!(RunConfig::parse(bad), Err(CliError::Config(_))));
        let nested = r#"{"schema_version": 1, "optimize": {"preset": "front-pair", "shedule": {}}}"#;
        assert!(RunConfig::parse(nested).is_err());
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        assert!(RunConfig::parse(r#"{"schema_version": 7}"#).is_err());
    }

    #[test]
    fn preset_and_geometry_are_exclusive() {
        let both = r#"{"schema_version": 1, "optimize": {"preset": "front-pair",
            "geometry": {"target": [1, 1, 1], "sigma_range": [0.5, 2]}}}"#;
        assert!(RunConfig::parse(both).is_err());
        assert!(RunConfig::parse(r#"{"schema_version": 1, "optimize": {"preset": "nope"}}"#).is_err());
    }

    #[test]
    fn seed_override_reaches_the_schedule() {
        let c = RunConfig::parse(MINIMAL)
            .unwrap()
            .with_overrides(&Overrides { seed: Some(9), ..Overrides::default() })
            .unwrap();
        let schedule = c.optimize().unwrap().schedule();
        assert_eq!(schedule.seed, 9);
        assert_eq!(schedule.search, SearchOptions::default());
    }

    #[test]
    fn round_trip_through_json() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        let echoed = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::parse(&echoed).unwrap(), c);
    }
}
