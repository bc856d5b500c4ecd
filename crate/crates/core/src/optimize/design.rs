//! Workspace-size constraints and the leg-length synthesis study.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{
    goal_attain, latin_hypercube, AttainmentResult, Constraint, GoalProblem, Objective, OptimizeError, SearchOptions,
};
use crate::grid::{evaluate_mask, largest_cuboid, CuboidResult, GridSpec};
use crate::kinematics::{inverse_kinematics, kinematic_predicate, GeometryParams, JointLimit, KinematicSpec, TcpPose};

/// How far the largest cuboid overshoots the target, measured along the
/// first axis: `μ·a − a·max_i(target_i / proportion_i)`.
///
/// Non-negative exactly when a cuboid of the grid's proportions and edge
/// `μ` contains a box of size `target`.
pub fn cuboid_margin(result: &CuboidResult, spec: &GridSpec, target: &[f64; 3]) -> f64 {
    let prop = spec.proportions();
    let need = (0..3).map(|i| target[i] / prop[i]).fold(0.0, f64::max);
    prop[0] * (result.mu - need)
}

/// Workspace constraint value for design `pi`: builds the node predicate,
/// sweeps `spec` and measures the largest cuboid against `target`. A design
/// the factory rejects, or any grid failure, yields `−∞`.
pub fn workspace_constraint<F, P>(pi: &[f64], factory: F, spec: &GridSpec, target: &[f64; 3]) -> f64
where
    F: Fn(&[f64]) -> Option<P>,
    P: Fn(&Vector3<f64>) -> bool + Send + Sync,
{
    let Some(predicate) = factory(pi) else {
        return f64::NEG_INFINITY;
    };
    let mask = evaluate_mask(spec, predicate);
    match largest_cuboid(&mask, spec) {
        Ok(r) => cuboid_margin(&r, spec, target),
        Err(e) => {
            log::debug!("workspace constraint failed for {pi:?}: {e}");
            f64::NEG_INFINITY
        }
    }
}

fn default_length_scale() -> [f64; 2] {
    [0.5, 3.0]
}

/// Leg-length synthesis for a box-shaped target workspace under a velocity
/// transmission requirement.
///
/// The design vector is `(L_x, L_y, L_z)`. Each length is an objective with
/// goal 0 and, unless overridden, a weight equal to the target extent along
/// its axis, so `λ` is the largest leg length relative to the workspace
/// dimension it serves. The single constraint requires the largest cuboid
/// of the target's proportions on which both transmission factors stay in
/// `sigma_range` to contain the target. Lengths are searched within
/// `length_scale` times the largest target extent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryStudy {
    pub target: [f64; 3],
    pub sigma_range: [f64; 2],
    #[serde(default)]
    pub weights: Option<[f64; 3]>,
    #[serde(default = "default_length_scale")]
    pub length_scale: [f64; 2],
}

impl GeometryStudy {
    pub fn new(target: [f64; 3], sigma_range: [f64; 2]) -> Result<Self, OptimizeError> {
        let s = Self { target, sigma_range, weights: None, length_scale: default_length_scale() };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), OptimizeError> {
        let bad = |m: String| Err(OptimizeError::InvalidProblem(m));
        if self.target.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad(format!("target extents must be positive: {:?}", self.target));
        }
        let [lo, hi] = self.sigma_range;
        if !(lo > 0.0 && lo < hi) {
            return bad(format!("transmission range must satisfy 0 < lo < hi: {:?}", self.sigma_range));
        }
        let [a, b] = self.length_scale;
        if !(a > 0.0 && a < b && b.is_finite()) {
            return bad(format!("length scale must satisfy 0 < lo < hi: {:?}", self.length_scale));
        }
        if let Some(w) = self.weights {
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.iter().all(|v| *v == 0.0) {
                return bad(format!("invalid weights {w:?}"));
            }
        }
        Ok(())
    }

    pub fn length_bounds(&self) -> [f64; 2] {
        let m = self.target.iter().copied().fold(0.0, f64::max);
        [self.length_scale[0] * m, self.length_scale[1] * m]
    }

    pub fn kinematic_spec(&self) -> KinematicSpec {
        KinematicSpec { k_max: f64::INFINITY, sigma_range: Some(self.sigma_range) }
    }

    /// Grid of the target's proportions covering everything the legs can
    /// reach.
    pub fn grid_for(&self, geometry: &GeometryParams, resolution: u32) -> Option<GridSpec> {
        let (lo, hi) = geometry.workspace_bounds();
        GridSpec::covering(self.target, resolution, lo, hi).ok()
    }

    /// Largest admissible cuboid for the given leg lengths.
    pub fn cuboid(&self, lengths: &[f64], resolution: u32) -> Option<(GeometryParams, GridSpec, CuboidResult)> {
        let geometry = GeometryParams::with_leg_lengths([lengths[0], lengths[1], lengths[2]]).ok()?;
        let spec = self.grid_for(&geometry, resolution)?;
        let mask = evaluate_mask(&spec, kinematic_predicate(geometry.clone(), self.kinematic_spec()));
        let r = largest_cuboid(&mask, &spec).ok()?;
        Some((geometry, spec, r))
    }

    pub fn margin(&self, lengths: &[f64], resolution: u32) -> f64 {
        let Ok(geometry) = GeometryParams::with_leg_lengths([lengths[0], lengths[1], lengths[2]]) else {
            return f64::NEG_INFINITY;
        };
        let Some(spec) = self.grid_for(&geometry, resolution) else {
            return f64::NEG_INFINITY;
        };
        let ks = self.kinematic_spec();
        workspace_constraint(lengths, |_| Some(kinematic_predicate(geometry.clone(), ks)), &spec, &self.target)
    }

    pub fn problem(&self, resolution: u32) -> Result<GoalProblem, OptimizeError> {
        self.validate()?;
        if resolution == 0 {
            return Err(OptimizeError::InvalidProblem("resolution must be positive".into()));
        }
        let weights = self.weights.unwrap_or(self.target);
        let objectives = (0..3)
            .map(|i| Objective::new(format!("L_{}", crate::kinematics::AXES[i]), 0.0, weights[i], move |pi| pi[i]))
            .collect();
        let study = self.clone();
        let constraint = Constraint::new("workspace", 0.0, move |pi| study.margin(pi, resolution));
        GoalProblem::new(vec![self.length_bounds(); 3], objectives, vec![constraint])
    }
}

/// Goal-attainment problem for leg-length synthesis at grid resolution
/// `resolution`, with default weights.
pub fn orthoglide_geometry_problem(
    target: [f64; 3],
    sigma_range: [f64; 2],
    resolution: u32,
) -> Result<GoalProblem, OptimizeError> {
    GeometryStudy::new(target, sigma_range)?.problem(resolution)
}

/// Search on a coarse grid, then re-measure the winner on a fine one.
///
/// Coarse and fine covering grids share their nodes, so a design that meets
/// the workspace target on the coarse grid meets it on the fine grid too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Schedule {
    pub coarse_resolution: u32,
    pub fine_resolution: u32,
    pub starts: usize,
    pub seed: u64,
    pub search: SearchOptions,
}

impl Default for Schedule {
    fn default() -> Self {
        Self {
            coarse_resolution: 16,
            fine_resolution: 64,
            starts: 4,
            seed: 0,
            search: SearchOptions { tol: 1e-4, ..SearchOptions::default() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryDesign {
    pub leg_lengths: [f64; 3],
    pub search: AttainmentResult,
    pub fine_resolution: u32,
    pub fine_margin: f64,
    pub fine_cuboid: CuboidResult,
    pub fine_grid: GridSpec,
    /// Actuator travel needed to sweep the fine cuboid.
    pub joint_limits: [JointLimit; 3],
}

/// Runs the study under `schedule`.
pub fn design_geometry(study: &GeometryStudy, schedule: &Schedule) -> Result<GeometryDesign, OptimizeError> {
    let problem = study.problem(schedule.coarse_resolution)?;
    let starts = latin_hypercube(problem.bounds(), schedule.starts.max(1), schedule.seed);
    let search = goal_attain(&problem, &starts, &schedule.search)?;
    let l = &search.pi_star;
    let (geometry, grid, cuboid) = study
        .cuboid(l, schedule.fine_resolution)
        .ok_or_else(|| OptimizeError::InvalidProblem(format!("fine grid could not be built for {l:?}")))?;
    let fine_margin = cuboid_margin(&cuboid, &grid, &study.target);
    let joint_limits = travel_over_cuboid(&geometry, &grid, &cuboid);
    Ok(GeometryDesign {
        leg_lengths: [l[0], l[1], l[2]],
        fine_resolution: schedule.fine_resolution,
        fine_margin,
        fine_cuboid: cuboid,
        fine_grid: grid,
        joint_limits,
        search,
    })
}

/// Range of each actuator coordinate over the nodes of a cuboid.
pub fn travel_over_cuboid(geometry: &GeometryParams, spec: &GridSpec, cuboid: &CuboidResult) -> [JointLimit; 3] {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    if cuboid.found {
        let (a, b) = (cuboid.index_min, cuboid.index_max);
        for i in a[0]..=b[0] {
            for j in a[1]..=b[1] {
                for k in a[2]..=b[2] {
                    if let Ok(rho) = inverse_kinematics(&TcpPose(spec.node_position([i, j, k])), geometry) {
                        for d in 0..3 {
                            lo[d] = lo[d].min(rho.0[d]);
                            hi[d] = hi[d].max(rho.0[d]);
                        }
                    }
                }
            }
        }
    }
    std::array::from_fn(|d| if lo[d] < hi[d] { JointLimit::new(lo[d], hi[d]) } else { JointLimit::unbounded() })
}
