//! Orthoglide-class translational manipulator: three orthogonal prismatic
//! actuators, each driving a leg of constant length to the tool point.
//!
//! Leg `i` ties the carriage position `rho_i` on axis `i` to the tool point
//! `p` through `(p_i - rho_i)^2 + p_j^2 + p_k^2 = L_i^2` with `(i, j, k)`
//! cyclic. Differentiating those constraints gives `A · dp = drho` where `A`
//! has a unit diagonal and off-diagonal entries `p_j / (p_i - rho_i)`, so the
//! joint-to-tool Jacobian is `A^-1`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::linalg::sym3_max_eigenvalue;

pub const AXES: [&str; 3] = ["x", "y", "z"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InfeasibleReason {
    OutOfReach,
    JointLimit,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("pose infeasible for leg {}: {reason:?}", AXES[*leg])]
    Infeasible { leg: usize, reason: InfeasibleReason },
    #[error("singular configuration")]
    Singular,
    #[error("forward kinematics did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

/// Closed interval for a prismatic joint variable [m]. Infinite bounds mean
/// the axis is unrestricted; they serialize as `null`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimit {
    #[serde(serialize_with = "ser_bound", deserialize_with = "de_lower")]
    pub lower: f64,
    #[serde(serialize_with = "ser_bound", deserialize_with = "de_upper")]
    pub upper: f64,
}

fn ser_bound<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_some(v)
    } else {
        s.serialize_none()
    }
}

fn de_lower<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
}

fn de_upper<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
}

impl JointLimit {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn unbounded() -> Self {
        Self { lower: f64::NEG_INFINITY, upper: f64::INFINITY }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lower && v <= self.upper
    }
}

/// Which of the two carriage positions solves a leg constraint:
/// `rho_i = p_i + sign * sqrt(L_i^2 - p_j^2 - p_k^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum AssemblySign {
    Negative,
    Positive,
}

impl AssemblySign {
    pub fn value(self) -> f64 {
        match self {
            AssemblySign::Negative => -1.0,
            AssemblySign::Positive => 1.0,
        }
    }
}

impl TryFrom<i8> for AssemblySign {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(AssemblySign::Negative),
            1 => Ok(AssemblySign::Positive),
            _ => Err(format!("assembly sign must be -1 or +1, got {v}")),
        }
    }
}

impl From<AssemblySign> for i8 {
    fn from(s: AssemblySign) -> i8 {
        match s {
            AssemblySign::Negative => -1,
            AssemblySign::Positive => 1,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry {
    leg_lengths: [f64; 3],
    #[serde(default = "unbounded_limits")]
    joint_limits: [JointLimit; 3],
    #[serde(default = "default_signs")]
    assembly_signs: [AssemblySign; 3],
}

fn unbounded_limits() -> [JointLimit; 3] {
    [JointLimit::unbounded(); 3]
}

fn default_signs() -> [AssemblySign; 3] {
    [AssemblySign::Negative; 3]
}

/// Geometric design parameters: leg lengths [m], joint limits and IK branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry")]
pub struct GeometryParams {
    leg_lengths: [f64; 3],
    joint_limits: [JointLimit; 3],
    assembly_signs: [AssemblySign; 3],
}

impl TryFrom<RawGeometry> for GeometryParams {
    type Error = KinematicsError;

    fn try_from(raw: RawGeometry) -> Result<Self, Self::Error> {
        GeometryParams::new(raw.leg_lengths, raw.joint_limits, raw.assembly_signs)
    }
}

impl GeometryParams {
    pub fn new(
        leg_lengths: [f64; 3],
        joint_limits: [JointLimit; 3],
        assembly_signs: [AssemblySign; 3],
    ) -> Result<Self, KinematicsError> {
        for (i, l) in leg_lengths.iter().enumerate() {
            if !(l.is_finite() && *l > 0.0) {
                return Err(KinematicsError::InvalidGeometry(format!(
                    "leg length L_{} must be positive and finite, got {l}",
                    AXES[i]
                )));
            }
        }
        for (i, lim) in joint_limits.iter().enumerate() {
            if lim.lower.is_nan() || lim.upper.is_nan() || lim.lower >= lim.upper {
                return Err(KinematicsError::InvalidGeometry(format!(
                    "joint limit for axis {} is degenerate: [{}, {}]",
                    AXES[i], lim.lower, lim.upper
                )));
            }
        }
        Ok(Self { leg_lengths, joint_limits, assembly_signs })
    }

    /// Unrestricted joints on the default branch (all signs negative).
    pub fn with_leg_lengths(leg_lengths: [f64; 3]) -> Result<Self, KinematicsError> {
        Self::new(leg_lengths, unbounded_limits(), default_signs())
    }

    pub fn symmetric(leg_length: f64) -> Result<Self, KinematicsError> {
        Self::with_leg_lengths([leg_length; 3])
    }

    pub fn leg_lengths(&self) -> [f64; 3] {
        self.leg_lengths
    }

    pub fn joint_limits(&self) -> [JointLimit; 3] {
        self.joint_limits
    }

    pub fn assembly_signs(&self) -> [AssemblySign; 3] {
        self.assembly_signs
    }

    /// Axis-aligned box that contains every reachable tool position.
    ///
    /// Legs `j` and `k` bound `|p_i|` by `min(L_j, L_k)`; the joint limits of
    /// leg `i` bound `p_i` to `[lower - L_i, upper + L_i]`.
    pub fn workspace_bounds(&self) -> ([f64; 3], [f64; 3]) {
        let l = self.leg_lengths;
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for i in 0..3 {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let r = l[j].min(l[k]);
            lo[i] = (-r).max(self.joint_limits[i].lower - l[i]);
            hi[i] = r.min(self.joint_limits[i].upper + l[i]);
        }
        (lo, hi)
    }
}

/// Tool-centre-point position [m].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcpPose(pub Vector3<f64>);

impl TcpPose {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }
}

/// Prismatic joint positions [m].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointVector(pub Vector3<f64>);

impl JointVector {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }
}

/// Thresholds below/above which a configuration is declared singular.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularityGuard {
    pub min_denominator: f64,
    pub max_condition: f64,
}

impl Default for SingularityGuard {
    fn default() -> Self {
        Self { min_denominator: 1e-12, max_condition: 1e12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FkOptions {
    pub max_iterations: usize,
    pub guard: SingularityGuard,
}

impl Default for FkOptions {
    fn default() -> Self {
        Self { max_iterations: 100, guard: SingularityGuard::default() }
    }
}

/// Jacobian and velocity transmission factors at one pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicSample {
    pub jacobian: Matrix3<f64>,
    pub cond: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

pub fn inverse_kinematics(p: &TcpPose, g: &GeometryParams) -> Result<JointVector, KinematicsError> {
    let p = p.0;
    let mut rho = Vector3::zeros();
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let radicand = g.leg_lengths[i].powi(2) - p[j].powi(2) - p[k].powi(2);
        if !(radicand >= 0.0) {
            return Err(KinematicsError::Infeasible { leg: i, reason: InfeasibleReason::OutOfReach });
        }
        rho[i] = p[i] + g.assembly_signs[i].value() * radicand.sqrt();
        if !g.joint_limits[i].contains(rho[i]) {
            return Err(KinematicsError::Infeasible { leg: i, reason: InfeasibleReason::JointLimit });
        }
    }
    Ok(JointVector(rho))
}

fn leg_residuals(p: &Vector3<f64>, rho: &Vector3<f64>, l: &[f64; 3]) -> Vector3<f64> {
    Vector3::from_fn(|i, _| {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        (p[i] - rho[i]).powi(2) + p[j].powi(2) + p[k].powi(2) - l[i].powi(2)
    })
}

/// Half the derivative of the leg residuals with respect to `p`.
fn constraint_jacobian(p: &Vector3<f64>, rho: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| if i == j { p[i] - rho[i] } else { p[j] })
}

/// 2-norm condition number of a 3×3 matrix; infinite when singular.
fn cond3(m: &Matrix3<f64>) -> (f64, Option<Matrix3<f64>>) {
    match m.try_inverse() {
        Some(inv) if inv.iter().all(|v| v.is_finite()) => {
            let n = sym3_max_eigenvalue(&(m.transpose() * m)).sqrt();
            let ninv = sym3_max_eigenvalue(&(inv.transpose() * inv)).sqrt();
            (n * ninv, Some(inv))
        }
        _ => (f64::INFINITY, None),
    }
}

pub fn forward_kinematics(rho: &JointVector, g: &GeometryParams, p_init: &TcpPose) -> Result<TcpPose, KinematicsError> {
    forward_kinematics_with(rho, g, p_init, &FkOptions::default())
}

/// Damped Newton iteration on the three leg constraints, seeded at `p_init`.
/// Converges to the assembly mode nearest the seed.
pub fn forward_kinematics_with(
    rho: &JointVector,
    g: &GeometryParams,
    p_init: &TcpPose,
    opts: &FkOptions,
) -> Result<TcpPose, KinematicsError> {
    let rho = rho.0;
    let l = g.leg_lengths;
    let scale = Vector3::new(l[0] * l[0], l[1] * l[1], l[2] * l[2]);
    let scaled_norm = |r: &Vector3<f64>| r.component_div(&scale).amax();
    let mut p = p_init.0;
    if !p.iter().all(|v| v.is_finite()) {
        return Err(KinematicsError::NoConvergence { iterations: 0 });
    }
    let mut r = leg_residuals(&p, &rho, &l);
    let mut iterations = 0;
    loop {
        let m = constraint_jacobian(&p, &rho);
        let (cond, inv) = cond3(&m);
        if cond > opts.guard.max_condition {
            return Err(KinematicsError::Singular);
        }
        let res = scaled_norm(&r);
        if res <= 1e-15 || iterations >= opts.max_iterations {
            break;
        }
        iterations += 1;
        let step = -(inv.expect("finite condition implies inverse") * r) / 2.0;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial = p + step * t;
            let rt = leg_residuals(&trial, &rho, &l);
            if scaled_norm(&rt) < res {
                p = trial;
                r = rt;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted || step.norm() * t <= 1e-16 * (1.0 + p.norm()) {
            break;
        }
    }
    if scaled_norm(&r) <= 1e-9 {
        Ok(TcpPose(p))
    } else {
        Err(KinematicsError::NoConvergence { iterations })
    }
}

/// Inner matrix with unit diagonal and `p_j / (p_i - rho_i)` off the diagonal.
fn inner_matrix(
    p: &Vector3<f64>,
    rho: &Vector3<f64>,
    guard: &SingularityGuard,
) -> Result<Matrix3<f64>, KinematicsError> {
    let mut a = Matrix3::identity();
    for i in 0..3 {
        let den = p[i] - rho[i];
        if !(den.abs() >= guard.min_denominator) {
            return Err(KinematicsError::Singular);
        }
        for j in 0..3 {
            if i != j {
                a[(i, j)] = p[j] / den;
            }
        }
    }
    Ok(a)
}

pub fn jacobian(p: &TcpPose, rho: &JointVector) -> Result<Matrix3<f64>, KinematicsError> {
    jacobian_with(p, rho, &SingularityGuard::default())
}

/// Joint-to-tool velocity Jacobian `J_rho`, the inverse of the inner matrix.
pub fn jacobian_with(
    p: &TcpPose,
    rho: &JointVector,
    guard: &SingularityGuard,
) -> Result<Matrix3<f64>, KinematicsError> {
    let a = inner_matrix(&p.0, &rho.0, guard)?;
    match cond3(&a) {
        (c, Some(inv)) if c <= guard.max_condition => Ok(inv),
        _ => Err(KinematicsError::Singular),
    }
}

pub fn kinematic_sample(p: &TcpPose, g: &GeometryParams) -> Result<KinematicSample, KinematicsError> {
    let rho = inverse_kinematics(p, g)?;
    let a = inner_matrix(&p.0, &rho.0, &SingularityGuard::default())?;
    let jac = jacobian(p, &rho)?;
    Ok(sample_from_parts(jac, &a))
}

fn sample_from_parts(jac: Matrix3<f64>, inner: &Matrix3<f64>) -> KinematicSample {
    // Both extremes come from largest eigenvalues, which the closed form
    // resolves to full relative precision: sigma_min(J) = 1 / sigma_max(J^-1).
    let sigma_max = sym3_max_eigenvalue(&(jac.transpose() * jac)).sqrt();
    let sigma_min = 1.0 / sym3_max_eigenvalue(&(inner.transpose() * inner)).sqrt();
    let sigma_min = sigma_min.min(sigma_max);
    let cond = if sigma_min > 0.0 { sigma_max / sigma_min } else { f64::INFINITY };
    KinematicSample { jacobian: jac, cond, sigma_min, sigma_max }
}

/// Per-node kinematic measure for grid sweeps: `None` when the node is
/// unreachable or singular.
pub fn sample_at(p: &Vector3<f64>, g: &GeometryParams) -> Option<KinematicSample> {
    kinematic_sample(&TcpPose(*p), g).ok()
}

/// Reachability-conjoined kinematic criterion: `cond(J) <= k_max` and, when
/// given, velocity transmission factors inside `[sigma_lo, sigma_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicSpec {
    pub k_max: f64,
    #[serde(default)]
    pub sigma_range: Option<[f64; 2]>,
}

impl KinematicSpec {
    pub fn accepts(&self, s: &KinematicSample) -> bool {
        if !(s.cond <= self.k_max) {
            return false;
        }
        match self.sigma_range {
            Some([lo, hi]) => s.sigma_min >= lo && s.sigma_max <= hi,
            None => true,
        }
    }
}

pub fn kinematic_predicate(g: GeometryParams, spec: KinematicSpec) -> impl Fn(&Vector3<f64>) -> bool + Send + Sync {
    move |p| sample_at(p, &g).is_some_and(|s| spec.accepts(&s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> GeometryParams {
        GeometryParams::symmetric(1.0).unwrap()
    }

    #[test]
    fn ik_identity_case() {
        let rho = inverse_kinematics(&TcpPose::new(0.0, 0.0, 0.0), &unit()).unwrap();
        assert_eq!(rho, JointVector::new(-1.0, -1.0, -1.0));
    }

    #[test]
    fn ik_positive_branch() {
        let g = GeometryParams::new(
            [1.0; 3],
            unbounded_limits(),
            [AssemblySign::Positive, AssemblySign::Negative, AssemblySign::Negative],
        )
        .unwrap();
        let p = TcpPose::new(0.0, 0.6, 0.0);
        let rho = inverse_kinematics(&p, &g).unwrap();
        assert!((rho.0.x - 0.8).abs() < 1e-15);
        let r = leg_residuals(&p.0, &rho.0, &g.leg_lengths);
        assert!(r.amax() < 1e-15);
    }

    #[test]
    fn ik_out_of_reach() {
        let err = inverse_kinematics(&TcpPose::new(0.0, 1.1, 0.0), &unit()).unwrap_err();
        assert_eq!(err, KinematicsError::Infeasible { leg: 0, reason: InfeasibleReason::OutOfReach });
    }

    #[test]
    fn ik_joint_limit() {
        let g = GeometryParams::new(
            [1.0; 3],
            [JointLimit::new(-0.9, 0.0), JointLimit::unbounded(), JointLimit::unbounded()],
            default_signs(),
        )
        .unwrap();
        let err = inverse_kinematics(&TcpPose::new(0.0, 0.0, 0.0), &g).unwrap_err();
        assert_eq!(err, KinematicsError::Infeasible { leg: 0, reason: InfeasibleReason::JointLimit });
    }

    #[test]
    fn invalid_geometry_rejected() {
        assert!(GeometryParams::symmetric(0.0).is_err());
        assert!(GeometryParams::with_leg_lengths([1.0, -1.0, 1.0]).is_err());
        let bad = [JointLimit::new(1.0, 1.0), JointLimit::unbounded(), JointLimit::unbounded()];
        assert!(GeometryParams::new([1.0; 3], bad, default_signs()).is_err());
    }

    #[test]
    fn fk_identity_case() {
        let p = forward_kinematics(&JointVector::new(-1.0, -1.0, -1.0), &unit(), &TcpPose::new(0.1, 0.1, 0.1)).unwrap();
        assert!(p.0.norm() < 1e-12, "{p:?}");
    }

    #[test]
    fn fk_flags_leg_singularity() {
        // p_x - rho_x = 0 zeroes the first column of the constraint Jacobian.
        let p = TcpPose::new(0.0, 0.6, 0.8);
        let rho = JointVector::new(0.0, 0.0, 0.0);
        let r = forward_kinematics(&rho, &unit(), &p);
        assert!(matches!(r, Err(KinematicsError::Singular) | Err(KinematicsError::NoConvergence { .. })));
    }

    #[test]
    fn fk_rejects_non_finite_seed() {
        let r = forward_kinematics(&JointVector::new(-1.0, -1.0, -1.0), &unit(), &TcpPose::new(f64::NAN, 0.0, 0.0));
        assert!(matches!(r, Err(KinematicsError::NoConvergence { .. })));
    }

    #[test]
    fn jacobian_identity_at_origin() {
        let j = jacobian(&TcpPose::new(0.0, 0.0, 0.0), &JointVector::new(-0.3, 2.0, -5.0)).unwrap();
        assert_eq!(j, Matrix3::identity());
    }

    #[test]
    fn jacobian_zero_denominator() {
        let r = jacobian(&TcpPose::new(0.2, 0.1, 0.0), &JointVector::new(0.2, -1.0, -1.0));
        assert_eq!(r, Err(KinematicsError::Singular));
    }

    #[test]
    fn sample_at_origin_is_isotropic() {
        let s = kinematic_sample(&TcpPose::new(0.0, 0.0, 0.0), &unit()).unwrap();
        assert_eq!(s.jacobian, Matrix3::identity());
        assert!((s.cond - 1.0).abs() < 1e-12);
        assert!((s.sigma_min - 1.0).abs() < 1e-12 && (s.sigma_max - 1.0).abs() < 1e-12);
    }

    #[test]
    fn workspace_bounds_respect_limits() {
        let g = GeometryParams::new(
            [1.0, 2.0, 3.0],
            [JointLimit::new(-1.5, -0.5), JointLimit::unbounded(), JointLimit::unbounded()],
            default_signs(),
        )
        .unwrap();
        let (lo, hi) = g.workspace_bounds();
        assert_eq!(lo, [-2.0, -1.0, -1.0]);
        assert_eq!(hi, [0.5, 1.0, 1.0]);
    }

    #[test]
    fn geometry_json_round_trip_with_unbounded_limits() {
        let g = GeometryParams::new(
            [0.3, 0.3, 0.25],
            [JointLimit::new(-0.4, -0.1), JointLimit::unbounded(), JointLimit::new(-0.4, 0.0)],
            [AssemblySign::Negative, AssemblySign::Positive, AssemblySign::Negative],
        )
        .unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.contains("null"));
        let back: GeometryParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<GeometryParams>(r#"{"leg_lengths":[1,1,-1]}"#).is_err());
        assert!(serde_json::from_str::<GeometryParams>(r#"{"leg_lengths":[1,1,1],"assembly_signs":[0,1,1]}"#).is_err());
    }
}
