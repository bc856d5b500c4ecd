//! Inertia and acceleration capability of the translational manipulator.
//!
//! With joint-space inertia `D` and Jacobian `J` (joint rates to tool
//! velocity), the inertia felt at the tool is `G = J⁻ᵀ D J⁻¹`, and actuator
//! forces bounded by `|τ_j| ≤ τmax_j` produce tool accelerations filling the
//! parallelepiped `{J D⁻¹ τ}`. Velocity-dependent terms are ignored.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{kinematic_sample, GeometryParams, TcpPose};
use crate::linalg::{sym3_eigenvalues, sym3_max_eigenvalue};

/// Smallest singular value of `J` treated as invertible.
pub const MIN_SIGMA: f64 = 1e-10;

/// Direction count for the sampled cross-check of the acceleration bound.
pub const SAMPLE_DIRECTIONS: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid dynamic model: {0}")]
    InvalidModel(String),
    #[error("Jacobian is singular")]
    SingularJacobian,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInertia {
    joint_masses: [f64; 3],
    tcp_mass: f64,
}

/// Lumped masses: the moving mass carried by each actuator and the mass
/// travelling with the tool point [kg].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInertia")]
pub struct InertiaModel {
    joint_masses: [f64; 3],
    tcp_mass: f64,
}

impl TryFrom<RawInertia> for InertiaModel {
    type Error = DynamicsError;

    fn try_from(r: RawInertia) -> Result<Self, Self::Error> {
        Self::new(r.joint_masses, r.tcp_mass)
    }
}

impl InertiaModel {
    pub fn new(joint_masses: [f64; 3], tcp_mass: f64) -> Result<Self, DynamicsError> {
        if joint_masses.iter().chain([&tcp_mass]).any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(DynamicsError::InvalidModel(format!(
                "masses must be positive: joints {joint_masses:?}, tool {tcp_mass}"
            )));
        }
        Ok(Self { joint_masses, tcp_mass })
    }

    pub fn joint_masses(&self) -> [f64; 3] {
        self.joint_masses
    }

    pub fn tcp_mass(&self) -> f64 {
        self.tcp_mass
    }

    /// Joint-space inertia `diag(joint_masses) + tcp_mass·JᵀJ`.
    pub fn joint_inertia(&self, j: &Matrix3<f64>) -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::from(self.joint_masses)) + j.transpose() * j * self.tcp_mass
    }
}

/// How the acceleration requirement is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccelerationBound {
    /// `a_min` must be reachable in every direction (inscribed ball).
    #[default]
    Guaranteed,
    /// Some admissible force vector must reach `a_min` (farthest vertex).
    Attainable,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDynamicSpec {
    gie_bound: f64,
    min_acceleration: f64,
    torque_limits: [f64; 3],
    #[serde(default)]
    acceleration_bound: AccelerationBound,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDynamicSpec")]
pub struct DynamicSpec {
    gie_bound: f64,
    min_acceleration: f64,
    torque_limits: [f64; 3],
    acceleration_bound: AccelerationBound,
}

impl TryFrom<RawDynamicSpec> for DynamicSpec {
    type Error = DynamicsError;

    fn try_from(r: RawDynamicSpec) -> Result<Self, Self::Error> {
        Self::new(r.gie_bound, r.min_acceleration, r.torque_limits)
            .map(|s| s.with_acceleration_bound(r.acceleration_bound))
    }
}

impl DynamicSpec {
    /// `gie_bound` [kg] may be infinite; `min_acceleration` [m/s²] may be
    /// zero; actuator force limits [N] must be positive.
    pub fn new(gie_bound: f64, min_acceleration: f64, torque_limits: [f64; 3]) -> Result<Self, DynamicsError> {
        if !(gie_bound > 0.0) {
            return Err(DynamicsError::InvalidModel(format!("inertia bound must be positive, got {gie_bound}")));
        }
        if !(min_acceleration >= 0.0) {
            return Err(DynamicsError::InvalidModel(format!(
                "acceleration bound must be non-negative, got {min_acceleration}"
            )));
        }
        if torque_limits.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(DynamicsError::InvalidModel(format!("force limits must be positive: {torque_limits:?}")));
        }
        Ok(Self { gie_bound, min_acceleration, torque_limits, acceleration_bound: AccelerationBound::default() })
    }

    pub fn with_acceleration_bound(mut self, bound: AccelerationBound) -> Self {
        self.acceleration_bound = bound;
        self
    }

    pub fn with_gie_bound(self, gie_bound: f64) -> Result<Self, DynamicsError> {
        Self::new(gie_bound, self.min_acceleration, self.torque_limits)
            .map(|s| s.with_acceleration_bound(self.acceleration_bound))
    }

    pub fn with_min_acceleration(self, a_min: f64) -> Result<Self, DynamicsError> {
        Self::new(self.gie_bound, a_min, self.torque_limits).map(|s| s.with_acceleration_bound(self.acceleration_bound))
    }

    pub fn gie_bound(&self) -> f64 {
        self.gie_bound
    }

    pub fn min_acceleration(&self) -> f64 {
        self.min_acceleration
    }

    pub fn torque_limits(&self) -> [f64; 3] {
        self.torque_limits
    }

    pub fn acceleration_bound(&self) -> AccelerationBound {
        self.acceleration_bound
    }
}

fn sigma_min(j: &Matrix3<f64>) -> f64 {
    sym3_eigenvalues(&(j.transpose() * j))[0].max(0.0).sqrt()
}

fn check_jacobian(j: &Matrix3<f64>) -> Result<Matrix3<f64>, DynamicsError> {
    if !(sigma_min(j) > MIN_SIGMA) {
        return Err(DynamicsError::SingularJacobian);
    }
    j.try_inverse().ok_or(DynamicsError::SingularJacobian)
}

/// Tool-space inertia `J⁻ᵀ D J⁻¹`.
pub fn generalized_inertia(j: &Matrix3<f64>, d: &Matrix3<f64>) -> Result<Matrix3<f64>, DynamicsError> {
    let j_inv = check_jacobian(j)?;
    let g = j_inv.transpose() * d * j_inv;
    Ok((g + g.transpose()) * 0.5)
}

/// Spectral norm of a symmetric 3×3 matrix.
pub fn spectral_norm(g: &Matrix3<f64>) -> f64 {
    let ev = sym3_eigenvalues(g);
    ev[0].abs().max(ev[2].abs())
}

fn force_to_acceleration(j: &Matrix3<f64>, d: &Matrix3<f64>) -> Result<Matrix3<f64>, DynamicsError> {
    check_jacobian(j)?;
    let d_inv = d.try_inverse().ok_or_else(|| DynamicsError::InvalidModel("joint inertia is singular".into()))?;
    Ok(j * d_inv)
}

fn support(m: &Matrix3<f64>, tau: &[f64; 3], v: &Vector3<f64>) -> f64 {
    (0..3).map(|c| tau[c] * v.dot(&m.column(c)).abs()).sum()
}

/// Radius of the largest origin-centred ball inside `{J D⁻¹ τ : |τ_j| ≤ τmax_j}`.
///
/// The set is a parallelepiped, so its facets have normals `m_a × m_b` for
/// pairs of columns of `J D⁻¹`, and the radius is the smallest support value
/// over those normals.
pub fn min_achievable_acceleration(j: &Matrix3<f64>, d: &Matrix3<f64>, tau: &[f64; 3]) -> Result<f64, DynamicsError> {
    let m = force_to_acceleration(j, d)?;
    let mut best = f64::INFINITY;
    for (a, b) in [(0, 1), (1, 2), (2, 0)] {
        let n = m.column(a).cross(&m.column(b));
        let norm = n.norm();
        if !(norm > 0.0) {
            return Err(DynamicsError::SingularJacobian);
        }
        best = best.min(support(&m, tau, &(n / norm)));
    }
    Ok(best)
}

/// Evenly spread unit vectors on the sphere (golden-angle spiral).
pub fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            Vector3::new(r * t.cos(), r * t.sin(), z)
        })
        .collect()
}

/// Smallest support value over a fixed direction sample. Never below
/// [`min_achievable_acceleration`].
pub fn sampled_min_acceleration(
    j: &Matrix3<f64>,
    d: &Matrix3<f64>,
    tau: &[f64; 3],
    directions: &[Vector3<f64>],
) -> Result<f64, DynamicsError> {
    let m = force_to_acceleration(j, d)?;
    Ok(directions.iter().map(|v| support(&m, tau, v)).fold(f64::INFINITY, f64::min))
}

/// Largest acceleration magnitude reachable with admissible forces.
pub fn max_attainable_acceleration(j: &Matrix3<f64>, d: &Matrix3<f64>, tau: &[f64; 3]) -> Result<f64, DynamicsError> {
    let m = force_to_acceleration(j, d)?;
    let mut best = 0.0f64;
    for signs in 0..8u8 {
        let t = Vector3::from_fn(|c, _| if signs >> c & 1 == 1 { tau[c] } else { -tau[c] });
        best = best.max((m * t).norm());
    }
    Ok(best)
}

/// Acceleration capability under the reading selected in `spec`.
pub fn acceleration_capability(j: &Matrix3<f64>, d: &Matrix3<f64>, spec: &DynamicSpec) -> Result<f64, DynamicsError> {
    match spec.acceleration_bound {
        AccelerationBound::Guaranteed => min_achievable_acceleration(j, d, &spec.torque_limits),
        AccelerationBound::Attainable => max_attainable_acceleration(j, d, &spec.torque_limits),
    }
}

fn pose_matrices(model: &InertiaModel, g: &GeometryParams, p: &Vector3<f64>) -> Option<(Matrix3<f64>, Matrix3<f64>)> {
    let s = kinematic_sample(&TcpPose(*p), g).ok()?;
    Some((s.jacobian, model.joint_inertia(&s.jacobian)))
}

/// `‖G‖₂` at a node, `None` where unreachable or singular.
pub fn gie_norm_at(model: &InertiaModel, g: &GeometryParams, p: &Vector3<f64>) -> Option<f64> {
    let (j, d) = pose_matrices(model, g, p)?;
    generalized_inertia(&j, &d).ok().map(|gm| sym3_max_eigenvalue(&gm))
}

/// Acceleration capability at a node, `None` where unreachable or singular.
pub fn acceleration_at(model: &InertiaModel, g: &GeometryParams, spec: &DynamicSpec, p: &Vector3<f64>) -> Option<f64> {
    let (j, d) = pose_matrices(model, g, p)?;
    acceleration_capability(&j, &d, spec).ok()
}

pub fn gie_predicate(
    g: GeometryParams,
    model: InertiaModel,
    spec: DynamicSpec,
) -> impl Fn(&Vector3<f64>) -> bool + Send + Sync {
    move |p| gie_norm_at(&model, &g, p).is_some_and(|n| n <= spec.gie_bound)
}

pub fn acceleration_predicate(
    g: GeometryParams,
    model: InertiaModel,
    spec: DynamicSpec,
) -> impl Fn(&Vector3<f64>) -> bool + Send + Sync {
    move |p| acceleration_at(&model, &g, &spec, p).is_some_and(|a| a >= spec.min_acceleration)
}
