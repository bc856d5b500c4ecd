use std::time::Instant;

use log::{info, warn};
use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use pkm_forge_core::dynamics::{acceleration_at, gie_norm_at};
use pkm_forge_core::grid::{largest_cuboid, CuboidResult, FeasibilityMask, GridSpec};
use pkm_forge_core::kinematics::sample_at;
use pkm_forge_core::optimize::{
    design_geometry, goal_attain, latin_hypercube, pareto_sweep, weight_simplex, AttainmentResult, GeometryDesign,
    OptimizeError, ParetoSet, SearchStatus,
};
use pkm_forge_core::stiffness::{deflection, manipulator_stiffness};

use crate::config::{RunConfig, StudyKind};
use crate::error::CliError;
use crate::output::{float, Artifacts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Condition number of the Jacobian and transmission-factor range.
    Kinematic,
    /// Translational tool deflection under the configured wrench.
    Stiffness,
    /// Spectral norm of the generalized inertia.
    Gie,
    /// Acceleration capability under the actuator force limits.
    Acceleration,
}

impl Criterion {
    pub const ALL: [Criterion; 4] =
        [Criterion::Kinematic, Criterion::Stiffness, Criterion::Gie, Criterion::Acceleration];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Kinematic => "kinematic",
            Criterion::Stiffness => "stiffness",
            Criterion::Gie => "gie",
            Criterion::Acceleration => "acceleration",
        }
    }

    /// Whether the config carries the section this criterion reads.
    pub fn configured(self, cfg: &RunConfig) -> bool {
        match self {
            Criterion::Kinematic => cfg.kinematic.is_some(),
            Criterion::Stiffness => cfg.stiffness.is_some(),
            Criterion::Gie | Criterion::Acceleration => cfg.dynamics.is_some(),
        }
    }
}

/// Per-node measure and verdict. Unreachable or failed nodes hold `NaN` and
/// are infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionMap {
    pub criterion: Criterion,
    pub grid: GridSpec,
    pub values: Vec<f64>,
    pub mask: FeasibilityMask,
}

fn sweep<T: Send>(grid: &GridSpec, f: impl Fn(&Vector3<f64>) -> T + Sync) -> Vec<T> {
    let nodes: Vec<[usize; 3]> = grid.indices().collect();
    nodes.par_iter().map(|idx| f(&grid.node_position(*idx))).collect()
}

fn missing(section: &str) -> CliError {
    CliError::Config(format!("config has no `{section}` section"))
}

pub fn criterion_map(cfg: &RunConfig, criterion: Criterion) -> Result<CriterionMap, CliError> {
    let geometry = cfg.geometry()?;
    let grid = cfg.grid_spec()?;
    let samples: Vec<Option<(f64, bool)>> = match criterion {
        Criterion::Kinematic => {
            let spec = cfg.kinematic.ok_or_else(|| missing("kinematic"))?;
            sweep(&grid, |p| sample_at(p, geometry).map(|s| (s.cond, spec.accepts(&s))))
        }
        Criterion::Stiffness => {
            let section = cfg.stiffness.as_ref().ok_or_else(|| missing("stiffness"))?;
            let model = section.model(geometry)?;
            let spec = section.criterion;
            let f = spec.force();
            sweep(&grid, |p| {
                let k = manipulator_stiffness(&model, p).ok()?;
                let t = deflection(&k, &f).ok()?;
                Some((t.fixed_rows::<3>(0).norm(), spec.accepts(&t)))
            })
        }
        Criterion::Gie => {
            let d = cfg.dynamics.as_ref().ok_or_else(|| missing("dynamics"))?;
            let bound = d.criterion.gie_bound();
            sweep(&grid, |p| gie_norm_at(&d.inertia, geometry, p).map(|n| (n, n <= bound)))
        }
        Criterion::Acceleration => {
            let d = cfg.dynamics.as_ref().ok_or_else(|| missing("dynamics"))?;
            let a_min = d.criterion.min_acceleration();
            sweep(&grid, |p| acceleration_at(&d.inertia, geometry, &d.criterion, p).map(|a| (a, a >= a_min)))
        }
    };
    let values: Vec<f64> = samples.iter().map(|s| s.map_or(f64::NAN, |v| v.0)).collect();
    let bits: Vec<bool> = samples.iter().map(|s| s.is_some_and(|v| v.1)).collect();
    let mask = FeasibilityMask::from_bools(grid.dims(), &bits);
    info!("{}: {} of {} nodes feasible", criterion.name(), mask.count_true(), mask.len());
    Ok(CriterionMap { criterion, grid, values, mask })
}

impl CriterionMap {
    pub fn cuboid(&self) -> Result<CuboidResult, CliError> {
        largest_cuboid(&self.mask, &self.grid).map_err(CliError::numeric)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("x,y,z,value,feasible\n");
        for (n, idx) in self.grid.indices().enumerate() {
            let p = self.grid.node_position(idx);
            out += &format!(
                "{},{},{},{},{}\n",
                float(p.x),
                float(p.y),
                float(p.z),
                float(self.values[n]),
                u8::from(self.mask.get_linear(n))
            );
        }
        out
    }
}

pub fn grid_eval(cfg: &RunConfig, criterion: Criterion, out: &mut Artifacts) -> Result<CriterionMap, CliError> {
    let map = criterion_map(cfg, criterion)?;
    let mut mask = Vec::new();
    map.mask.write_binary(&mut mask).map_err(CliError::numeric)?;
    out.bytes(format!("{}_mask.bin", criterion.name()), mask);
    out.csv(format!("{}_map.csv", criterion.name()), map.csv());
    Ok(map)
}

pub fn cuboid(cfg: &RunConfig, criterion: Criterion, out: &mut Artifacts) -> Result<CuboidResult, CliError> {
    let r = criterion_map(cfg, criterion)?.cuboid()?;
    if r.found {
        println!(
            "{}: mu = {}, nodes {:?}..{:?}, box {:?}..{:?}",
            criterion.name(),
            r.mu,
            r.index_min,
            r.index_max,
            r.cart_min,
            r.cart_max
        );
    } else {
        println!("{}: no feasible node", criterion.name());
    }
    out.json(format!("{}_cuboid.json", criterion.name()), &r)?;
    Ok(r)
}

/// Stiffness map columns: `x,y,z,k_trans_min,deflection_norm`.
pub fn stiffness_map(cfg: &RunConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let geometry = cfg.geometry()?;
    let grid = cfg.grid_spec()?;
    let section = cfg.stiffness.as_ref().ok_or_else(|| missing("stiffness"))?;
    let model = section.model(geometry)?;
    let f = section.criterion.force();
    let rows = sweep(&grid, |p| {
        let k = manipulator_stiffness(&model, p).ok()?;
        let t = deflection(&k, &f).ok()?;
        Some((k.min_translational_stiffness()?, t.fixed_rows::<3>(0).norm()))
    });
    let mut csv = String::from("x,y,z,k_trans_min,deflection_norm\n");
    for (idx, row) in grid.indices().zip(&rows) {
        let p = grid.node_position(idx);
        let (k, d) = row.unwrap_or((f64::NAN, f64::NAN));
        csv += &format!("{},{},{},{},{}\n", float(p.x), float(p.y), float(p.z), float(k), float(d));
    }
    out.csv("stiffness_map.csv".into(), csv);
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum OptimizeOutcome {
    Preset { name: String, result: AttainmentResult },
    Geometry { design: Box<GeometryDesign> },
}

impl OptimizeOutcome {
    fn attainment(&self) -> &AttainmentResult {
        match self {
            OptimizeOutcome::Preset { result, .. } => result,
            OptimizeOutcome::Geometry { design } => &design.search,
        }
    }
}

fn attainment_word(lambda: f64) -> &'static str {
    if lambda < 0.0 {
        "over-attained (all goals beaten)"
    } else if lambda > 0.0 {
        "under-attained (some goal missed)"
    } else {
        "exactly attained"
    }
}

fn summarize(r: &AttainmentResult) -> String {
    let mut s = format!(
        "lambda* = {}: {}\npi* = {:?}\nobjectives = {:?}\nconstraints = {:?}\nevaluations = {} ({} distinct)\n",
        r.lambda_star,
        attainment_word(r.lambda_star),
        r.pi_star,
        r.objective_values,
        r.constraint_values,
        r.evaluations,
        r.unique_evaluations
    );
    if r.status == SearchStatus::BudgetExhausted {
        s += "warning: evaluation budget exhausted before convergence\n";
    }
    s
}

fn solve(cfg: &RunConfig) -> Result<OptimizeOutcome, (CliError, Option<Box<AttainmentResult>>)> {
    let opt = cfg.optimize().map_err(|e| (e, None))?;
    let schedule = &opt.schedule();
    let to_cli = |e: OptimizeError| match e {
        OptimizeError::Infeasible { best } => {
            (CliError::Infeasible(format!("no feasible design; least violation {}", best.violation)), Some(best))
        }
        OptimizeError::InvalidProblem(m) => (CliError::Config(m), None),
    };
    match opt.study().map_err(|e| (e, None))? {
        StudyKind::Preset(name, problem) => {
            let starts = latin_hypercube(problem.bounds(), schedule.starts.max(1), schedule.seed);
            let result = goal_attain(&problem, &starts, &schedule.search).map_err(to_cli)?;
            Ok(OptimizeOutcome::Preset { name: name.to_string(), result })
        }
        StudyKind::Geometry(study) => {
            let design = design_geometry(study, schedule).map_err(to_cli)?;
            Ok(OptimizeOutcome::Geometry { design: Box::new(design) })
        }
    }
}

pub fn optimize(cfg: &RunConfig, out: &mut Artifacts) -> Result<OptimizeOutcome, CliError> {
    match solve(cfg) {
        Ok(outcome) => {
            let r = outcome.attainment();
            if r.status == SearchStatus::BudgetExhausted {
                warn!("evaluation budget exhausted before convergence");
            }
            let mut text = summarize(r);
            if let OptimizeOutcome::Geometry { design } = &outcome {
                text += &format!(
                    "leg lengths = {:?}\nfine grid N0 = {}: mu = {}, margin = {}\n",
                    design.leg_lengths, design.fine_resolution, design.fine_cuboid.mu, design.fine_margin
                );
            }
            print!("{text}");
            out.json("attainment.json".into(), &outcome)?;
            out.text("summary.txt".into(), text);
            Ok(outcome)
        }
        Err((e, best)) => {
            if let Some(best) = best {
                let text = format!("INFEASIBLE\n{}", summarize(&best));
                print!("{text}");
                out.json("attainment.json".into(), &best)?;
                out.text("summary.txt".into(), text);
            }
            Err(e)
        }
    }
}

pub fn pareto(cfg: &RunConfig, out: &mut Artifacts) -> Result<ParetoSet, CliError> {
    let opt = cfg.optimize()?;
    let schedule = &opt.schedule();
    let problem = match opt.study()? {
        StudyKind::Preset(_, p) => p,
        StudyKind::Geometry(study) => study.problem(schedule.coarse_resolution).map_err(CliError::config)?,
    };
    let weights = weight_simplex(problem.objectives().len(), opt.pareto_divisions);
    let starts = latin_hypercube(problem.bounds(), schedule.starts.max(1), schedule.seed);
    let set = pareto_sweep(&problem, &weights, &starts, &schedule.search);
    if !set.failures.is_empty() {
        warn!("{} of {} weight vectors failed", set.failures.len(), weights.len());
    }
    println!("{} non-dominated points from {} weight vectors", set.points.len(), weights.len());
    out.csv("pareto.csv".into(), pareto_csv(&set, problem.objectives().len(), problem.design_dim()));
    out.json("pareto.json".into(), &set)?;
    Ok(set)
}

/// Columns `w1..wm, pi1..pin, f1..fm, lambda`.
pub fn pareto_csv(set: &ParetoSet, m: usize, n: usize) -> String {
    let mut header: Vec<String> = (1..=m).map(|i| format!("w{i}")).collect();
    header.extend((1..=n).map(|i| format!("pi{i}")));
    header.extend((1..=m).map(|i| format!("f{i}")));
    header.push("lambda".into());
    let mut out = header.join(",") + "\n";
    for p in &set.points {
        let row: Vec<String> =
            p.weights.iter().chain(&p.pi).chain(&p.objectives).chain([&p.lambda]).map(|v| float(*v)).collect();
        out += &(row.join(",") + "\n");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub criterion: Criterion,
    pub feasible_nodes: usize,
    pub cuboid: CuboidResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub config: RunConfig,
    pub criteria: Vec<CriterionReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize: Option<OptimizeOutcome>,
    pub seconds: f64,
}

/// Cuboids for every configured criterion and, when an `optimize` section
/// is present, its result.
pub fn report(cfg: &RunConfig, out: &mut Artifacts) -> Result<RunReport, CliError> {
    let t0 = Instant::now();
    let mut criteria = Vec::new();
    if cfg.geometry.is_some() && cfg.grid.is_some() {
        for c in Criterion::ALL.into_iter().filter(|c| c.configured(cfg)) {
            let map = criterion_map(cfg, c)?;
            let cuboid = map.cuboid()?;
            println!("{:>12}: {} feasible nodes, mu = {}", c.name(), map.mask.count_true(), cuboid.mu);
            criteria.push(CriterionReport { criterion: c, feasible_nodes: map.mask.count_true(), cuboid });
        }
    }
    let optimize = match &cfg.optimize {
        Some(_) => Some(solve(cfg).map_err(|(e, _)| e)?),
        None => None,
    };
    if let Some(o) = &optimize {
        print!("{}", summarize(o.attainment()));
    }
    let report = RunReport {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        criteria,
        optimize,
        seconds: t0.elapsed().as_secs_f64(),
    };
    out.json_always("report.json".into(), &report)?;
    Ok(report)
}
