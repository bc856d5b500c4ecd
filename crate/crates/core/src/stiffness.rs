//! Lumped-spring elastostatics.
//!
//! Each kinematic chain is a rigid serial linkage with 6-DOF virtual springs
//! inserted at its compliant links. Eliminating the virtual and passive joint
//! coordinates from the equilibrium equations leaves the chain's Cartesian
//! stiffness as the upper-left 6×6 block of the inverse of
//!
//! ```text
//! [ J_θ K_θ⁻¹ J_θᵀ   J_q ]
//! [ J_qᵀ              0  ]
//! ```
//!
//! Parallel chains add. All 6-vectors are ordered translation first, then
//! rotation; wrenches are (force, moment).

use nalgebra::{DMatrix, Matrix3, Matrix6, SymmetricEigen, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{inverse_kinematics, GeometryParams, KinematicsError, TcpPose};
use crate::linalg::{condition_number, skew};

/// Condition number above which a block system or stiffness matrix is
/// treated as singular.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StiffnessError {
    #[error("invalid stiffness model: {0}")]
    InvalidModel(String),
    #[error("chain block system is singular (condition {condition:e})")]
    SingularSystem { condition: f64 },
    #[error("stiffness matrix is singular (condition {condition:e})")]
    SingularStiffness { condition: f64 },
    #[error("no chains to aggregate")]
    EmptyInput,
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

fn invalid(msg: impl Into<String>) -> StiffnessError {
    StiffnessError::InvalidModel(msg.into())
}

fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.norm().max(f64::MIN_POSITIVE);
    (m - m.transpose()).norm() / scale
}

/// One kinematic chain: virtual/active joint Jacobian `J_θ` (6×nθ), passive
/// joint Jacobian `J_q` (6×nq) and the joint spring matrix `K_θ` (nθ×nθ).
#[derive(Debug, Clone, PartialEq)]
pub struct ChainModel {
    j_theta: DMatrix<f64>,
    j_q: DMatrix<f64>,
    k_theta: DMatrix<f64>,
}

impl ChainModel {
    pub fn new(j_theta: DMatrix<f64>, j_q: DMatrix<f64>, k_theta: DMatrix<f64>) -> Result<Self, StiffnessError> {
        if j_theta.nrows() != 6 || j_q.nrows() != 6 {
            return Err(invalid("joint Jacobians must have 6 rows"));
        }
        let n_theta = j_theta.ncols();
        if n_theta == 0 {
            return Err(invalid("chain needs at least one elastic joint"));
        }
        if j_q.ncols() >= 6 {
            return Err(invalid(format!("{} passive joints leave no stiffness", j_q.ncols())));
        }
        if k_theta.shape() != (n_theta, n_theta) {
            return Err(invalid(format!("K_theta is {:?}, expected {n_theta}x{n_theta}", k_theta.shape())));
        }
        let all_finite = j_theta.iter().chain(j_q.iter()).chain(k_theta.iter()).all(|v| v.is_finite());
        if !all_finite {
            return Err(invalid("non-finite entry in chain model"));
        }
        if relative_asymmetry(&k_theta) > 1e-10 {
            return Err(invalid("K_theta is not symmetric"));
        }
        if k_theta.clone().cholesky().is_none() {
            return Err(invalid("K_theta is not positive definite"));
        }
        Ok(Self { j_theta, j_q, k_theta })
    }

    pub fn j_theta(&self) -> &DMatrix<f64> {
        &self.j_theta
    }

    pub fn j_q(&self) -> &DMatrix<f64> {
        &self.j_q
    }

    pub fn k_theta(&self) -> &DMatrix<f64> {
        &self.k_theta
    }

    /// Joint-space compliance mapped to the end point, `J_θ K_θ⁻¹ J_θᵀ`.
    pub fn compliance(&self) -> Matrix6<f64> {
        let chol = self.k_theta.clone().cholesky().expect("checked at construction");
        let c = &self.j_theta * chol.solve(&self.j_theta.transpose());
        let c = Matrix6::from_iterator(c.iter().copied());
        (c + c.transpose()) * 0.5
    }

    /// Same chain with every spring stiffened by `factor`.
    pub fn with_scaled_springs(&self, factor: f64) -> Result<Self, StiffnessError> {
        Self::new(self.j_theta.clone(), self.j_q.clone(), &self.k_theta * factor)
    }
}

/// 6×6 Cartesian stiffness mapping a small twist to the restoring wrench.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianStiffness(Matrix6<f64>);

impl CartesianStiffness {
    /// Accepts `k` if it is symmetric to 1e-8 relative and positive
    /// semidefinite to `-1e-8·‖k‖`. The stored matrix is symmetrized.
    pub fn new(k: Matrix6<f64>) -> Result<Self, StiffnessError> {
        if !k.iter().all(|v| v.is_finite()) {
            return Err(invalid("non-finite stiffness entry"));
        }
        let norm = k.norm();
        if (k - k.transpose()).norm() > 1e-8 * norm {
            return Err(invalid("stiffness matrix is not symmetric"));
        }
        let k = (k + k.transpose()) * 0.5;
        if SymmetricEigen::new(k).eigenvalues.min() < -1e-8 * norm {
            return Err(invalid("stiffness matrix is not positive semidefinite"));
        }
        Ok(Self(k))
    }

    pub fn matrix(&self) -> &Matrix6<f64> {
        &self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 6] {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        [ev[0], ev[1], ev[2], ev[3], ev[4], ev[5]]
    }

    /// Stiffness expressed at a point displaced by `offset` from the current
    /// reference point, with the body rigidly attached.
    pub fn transported(&self, offset: &Vector3<f64>) -> Self {
        let mut a_inv = Matrix6::identity();
        a_inv.fixed_view_mut::<3, 3>(0, 3).copy_from(&skew(offset));
        let k = a_inv.transpose() * self.0 * a_inv;
        Self((k + k.transpose()) * 0.5)
    }

    /// Smallest translational stiffness when rotations are free to follow
    /// the load: the inverse of the largest eigenvalue of the translational
    /// compliance block. `None` if the matrix is singular.
    pub fn min_translational_stiffness(&self) -> Option<f64> {
        let c = self.0.try_inverse()?;
        let ctt: Matrix3<f64> = c.fixed_view::<3, 3>(0, 0).into_owned();
        let lmax = crate::linalg::sym3_max_eigenvalue(&((ctt + ctt.transpose()) * 0.5));
        (lmax > 0.0 && lmax.is_finite()).then(|| 1.0 / lmax)
    }
}

pub fn chain_cartesian_stiffness(chain: &ChainModel) -> Result<CartesianStiffness, StiffnessError> {
    let nq = chain.j_q.ncols();
    if nq == 0 && chain.j_theta.ncols() == 6 {
        return square_chain_stiffness(chain);
    }
    let c = chain.compliance();
    // Passive coordinates carry arbitrary units; rescaling their columns only
    // rescales the lower-right part of the inverse, so it is used to balance
    // the block system before judging its conditioning.
    let c_norm = c.norm();
    let n = 6 + nq;
    let mut block = DMatrix::zeros(n, n);
    block.view_mut((0, 0), (6, 6)).copy_from(&c);
    for j in 0..nq {
        let col = chain.j_q.column(j);
        let cn = col.norm();
        if cn == 0.0 {
            return Err(StiffnessError::SingularSystem { condition: f64::INFINITY });
        }
        let scaled = col * (c_norm / cn);
        block.view_mut((0, 6 + j), (6, 1)).copy_from(&scaled);
        block.view_mut((6 + j, 0), (1, 6)).copy_from(&scaled.transpose());
    }
    let condition = condition_number(&block);
    if !(condition <= MAX_CONDITION) {
        return Err(StiffnessError::SingularSystem { condition });
    }
    let inv = block.lu().try_inverse().ok_or(StiffnessError::SingularSystem { condition: f64::INFINITY })?;
    let k = Matrix6::from_fn(|i, j| 0.5 * (inv[(i, j)] + inv[(j, i)]));
    Ok(CartesianStiffness(k))
}

/// Six springs and no passive joint: `K = J⁻ᵀ K_θ J⁻¹` without forming the
/// compliance.
fn square_chain_stiffness(chain: &ChainModel) -> Result<CartesianStiffness, StiffnessError> {
    let condition = condition_number(&chain.j_theta);
    if !(condition <= MAX_CONDITION) {
        return Err(StiffnessError::SingularSystem { condition });
    }
    let j_inv =
        chain.j_theta.clone().lu().try_inverse().ok_or(StiffnessError::SingularSystem { condition: f64::INFINITY })?;
    let k = j_inv.transpose() * &chain.k_theta * j_inv;
    Ok(CartesianStiffness(Matrix6::from_fn(|i, j| 0.5 * (k[(i, j)] + k[(j, i)]))))
}

pub fn aggregate_stiffness(chains: &[CartesianStiffness]) -> Result<CartesianStiffness, StiffnessError> {
    let (first, rest) = chains.split_first().ok_or(StiffnessError::EmptyInput)?;
    Ok(CartesianStiffness(rest.iter().fold(first.0, |acc, k| acc + k.0)))
}

/// Solves `K·δt = f` for the twist `δt`.
pub fn deflection(k: &CartesianStiffness, f: &Vector6<f64>) -> Result<Vector6<f64>, StiffnessError> {
    let ev = SymmetricEigen::new(k.0).eigenvalues;
    let (lo, hi) = (ev.min(), ev.abs().max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(StiffnessError::SingularStiffness { condition });
    }
    k.0.cholesky()
        .map(|ch| ch.solve(f))
        .or_else(|| k.0.lu().solve(f))
        .ok_or(StiffnessError::SingularStiffness { condition: f64::INFINITY })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSection {
    width: f64,
    height: f64,
    elastic_modulus: f64,
    shear_modulus: f64,
}

/// Rectangular link section. `width` is measured along the local y axis and
/// `height` along local z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSection")]
pub struct CrossSection {
    width: f64,
    height: f64,
    elastic_modulus: f64,
    shear_modulus: f64,
}

impl TryFrom<RawSection> for CrossSection {
    type Error = StiffnessError;

    fn try_from(r: RawSection) -> Result<Self, Self::Error> {
        Self::new(r.width, r.height, r.elastic_modulus, r.shear_modulus)
    }
}

impl CrossSection {
    pub fn new(width: f64, height: f64, elastic_modulus: f64, shear_modulus: f64) -> Result<Self, StiffnessError> {
        for (name, v) in [
            ("width", width),
            ("height", height),
            ("elastic modulus", elastic_modulus),
            ("shear modulus", shear_modulus),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("section {name} must be positive, got {v}")));
            }
        }
        Ok(Self { width, height, elastic_modulus, shear_modulus })
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn elastic_modulus(&self) -> f64 {
        self.elastic_modulus
    }

    pub fn shear_modulus(&self) -> f64 {
        self.shear_modulus
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Free-end stiffness of a clamped Euler–Bernoulli beam along local x, in
/// local coordinates.
pub fn beam_spring(section: &CrossSection, length: f64) -> Result<Matrix6<f64>, StiffnessError> {
    if !(length.is_finite() && length > 0.0) {
        return Err(invalid(format!("beam length must be positive, got {length}")));
    }
    let (b, h, e, g, l) = (section.width, section.height, section.elastic_modulus, section.shear_modulus, length);
    let area = b * h;
    let i_y = b * h.powi(3) / 12.0;
    let i_z = h * b.powi(3) / 12.0;
    let j_t = b * h * b.min(h).powi(2) / 3.0;
    let mut k = Matrix6::zeros();
    k[(0, 0)] = e * area / l;
    k[(1, 1)] = 12.0 * e * i_z / l.powi(3);
    k[(2, 2)] = 12.0 * e * i_y / l.powi(3);
    k[(3, 3)] = g * j_t / l;
    k[(4, 4)] = 4.0 * e * i_y / l;
    k[(5, 5)] = 4.0 * e * i_z / l;
    k[(1, 5)] = -6.0 * e * i_z / l.powi(2);
    k[(5, 1)] = k[(1, 5)];
    k[(2, 4)] = 6.0 * e * i_y / l.powi(2);
    k[(4, 2)] = k[(2, 4)];
    Ok(k)
}

/// Reshapes the section at constant area: `b → μ·b`, `h → h/μ`.
pub fn scale_cross_section(section: &CrossSection, mu: f64) -> Result<CrossSection, StiffnessError> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(invalid(format!("scaling factor must be positive, got {mu}")));
    }
    CrossSection::new(section.width * mu, section.height / mu, section.elastic_modulus, section.shear_modulus)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStiffnessSpec {
    force: [f64; 6],
    epsilon_max: f64,
    #[serde(default)]
    rotation_limit: Option<f64>,
}

/// Deflection criterion: the translational deflection under `force` must not
/// exceed `epsilon_max` [m]; optionally the rotation must stay within
/// `rotation_limit` [rad].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawStiffnessSpec")]
pub struct StiffnessSpec {
    force: [f64; 6],
    epsilon_max: f64,
    rotation_limit: Option<f64>,
}

impl TryFrom<RawStiffnessSpec> for StiffnessSpec {
    type Error = StiffnessError;

    fn try_from(r: RawStiffnessSpec) -> Result<Self, Self::Error> {
        Self::new(r.force, r.epsilon_max, r.rotation_limit)
    }
}

impl StiffnessSpec {
    /// `epsilon_max` may be zero (nothing deflects that little under a load)
    /// or infinite (reachability only).
    pub fn new(force: [f64; 6], epsilon_max: f64, rotation_limit: Option<f64>) -> Result<Self, StiffnessError> {
        if !force.iter().all(|v| v.is_finite()) {
            return Err(invalid("force must be finite"));
        }
        if !(epsilon_max >= 0.0) {
            return Err(invalid(format!("deflection limit must be non-negative, got {epsilon_max}")));
        }
        if let Some(r) = rotation_limit {
            if !(r >= 0.0) {
                return Err(invalid(format!("rotation limit must be non-negative, got {r}")));
            }
        }
        Ok(Self { force, epsilon_max, rotation_limit })
    }

    pub fn force(&self) -> Vector6<f64> {
        Vector6::from_column_slice(&self.force)
    }

    pub fn epsilon_max(&self) -> f64 {
        self.epsilon_max
    }

    pub fn rotation_limit(&self) -> Option<f64> {
        self.rotation_limit
    }

    pub fn with_epsilon_max(&self, epsilon_max: f64) -> Result<Self, StiffnessError> {
        Self::new(self.force, epsilon_max, self.rotation_limit)
    }

    pub fn accepts(&self, twist: &Vector6<f64>) -> bool {
        let trans = twist.fixed_rows::<3>(0).norm();
        let rot = twist.fixed_rows::<3>(3).norm();
        trans <= self.epsilon_max && self.rotation_limit.is_none_or(|r| rot <= r)
    }
}

/// Produces the chains of a manipulator at a given tool position.
pub trait ChainBuilder: Send + Sync {
    fn chains(&self, p: &Vector3<f64>) -> Result<Vec<ChainModel>, StiffnessError>;

    /// Offset from the chain reference point to the point whose deflection
    /// is assessed.
    fn tool_offset(&self) -> Vector3<f64> {
        Vector3::zeros()
    }
}

/// Aggregated stiffness at the tool point.
pub fn manipulator_stiffness<B: ChainBuilder + ?Sized>(
    builder: &B,
    p: &Vector3<f64>,
) -> Result<CartesianStiffness, StiffnessError> {
    let ks = builder.chains(p)?.iter().map(chain_cartesian_stiffness).collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate_stiffness(&ks)?.transported(&builder.tool_offset()))
}

/// Tool-point twist under the wrench `f` applied at the tool point.
pub fn tool_deflection<B: ChainBuilder + ?Sized>(
    builder: &B,
    f: &Vector6<f64>,
    p: &Vector3<f64>,
) -> Result<Vector6<f64>, StiffnessError> {
    deflection(&manipulator_stiffness(builder, p)?, f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StiffnessSample {
    pub min_translational_stiffness: f64,
    pub translational_deflection: f64,
    pub rotational_deflection: f64,
}

pub fn stiffness_sample<B: ChainBuilder + ?Sized>(
    builder: &B,
    f: &Vector6<f64>,
    p: &Vector3<f64>,
) -> Result<StiffnessSample, StiffnessError> {
    let k = manipulator_stiffness(builder, p)?;
    let twist = deflection(&k, f)?;
    Ok(StiffnessSample {
        min_translational_stiffness: k
            .min_translational_stiffness()
            .ok_or(StiffnessError::SingularStiffness { condition: f64::INFINITY })?,
        translational_deflection: twist.fixed_rows::<3>(0).norm(),
        rotational_deflection: twist.fixed_rows::<3>(3).norm(),
    })
}

/// Node predicate: reachable, and the deflection satisfies `spec`. Any
/// internal failure counts as infeasible.
pub fn stiffness_predicate<B: ChainBuilder>(
    builder: B,
    spec: StiffnessSpec,
) -> impl Fn(&Vector3<f64>) -> bool + Send + Sync {
    let f = spec.force();
    move |p| tool_deflection(&builder, &f, p).is_ok_and(|t| spec.accepts(&t))
}

fn rotation6(r: &Matrix3<f64>) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(r);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(r);
    m
}

/// Twist at a point `r` away, for a rigid body with twist `t` at the origin.
fn transport(r: &Vector3<f64>) -> Matrix6<f64> {
    let mut m = Matrix6::identity();
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(r)));
    m
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOrthoglide {
    geometry: GeometryParams,
    actuator_stiffness: f64,
    foot_section: CrossSection,
    foot_length: f64,
    parallelogram_section: CrossSection,
    #[serde(default = "default_width_references")]
    width_references: [[f64; 3]; 3],
    #[serde(default)]
    tool_offset: [f64; 3],
}

fn default_width_references() -> [[f64; 3]; 3] {
    [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
}

/// Elastic model of the three-leg orthogonal manipulator.
///
/// Leg `i` is an actuator spring along axis `i`, a foot link clamped to the
/// carriage (local x along axis `i`, local y along axis `i+1`), and the
/// parallelogram as one equivalent beam from carriage to tool point. The
/// beam's local y axis is `width_references[i]` projected normal to the leg,
/// so the parallelogram section width lies along it. The two passive swing
/// joints let the tool point translate freely normal to the leg.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawOrthoglide")]
pub struct OrthoglideStiffness {
    geometry: GeometryParams,
    actuator_stiffness: f64,
    foot_section: CrossSection,
    foot_length: f64,
    parallelogram_section: CrossSection,
    width_references: [[f64; 3]; 3],
    tool_offset: [f64; 3],
}

impl TryFrom<RawOrthoglide> for OrthoglideStiffness {
    type Error = StiffnessError;

    fn try_from(r: RawOrthoglide) -> Result<Self, Self::Error> {
        Self::new(r.geometry, r.actuator_stiffness, r.foot_section, r.foot_length, r.parallelogram_section)?
            .with_width_references(r.width_references)?
            .with_tool_offset(r.tool_offset)
    }
}

impl OrthoglideStiffness {
    pub fn new(
        geometry: GeometryParams,
        actuator_stiffness: f64,
        foot_section: CrossSection,
        foot_length: f64,
        parallelogram_section: CrossSection,
    ) -> Result<Self, StiffnessError> {
        if !(actuator_stiffness.is_finite() && actuator_stiffness > 0.0) {
            return Err(invalid(format!("actuator stiffness must be positive, got {actuator_stiffness}")));
        }
        if !(foot_length.is_finite() && foot_length > 0.0) {
            return Err(invalid(format!("foot length must be positive, got {foot_length}")));
        }
        Ok(Self {
            geometry,
            actuator_stiffness,
            foot_section,
            foot_length,
            parallelogram_section,
            width_references: default_width_references(),
            tool_offset: [0.0; 3],
        })
    }

    pub fn with_width_references(mut self, refs: [[f64; 3]; 3]) -> Result<Self, StiffnessError> {
        if refs.iter().flatten().any(|v| !v.is_finite()) || refs.iter().any(|r| Vector3::from(*r).norm() == 0.0) {
            return Err(invalid("width references must be finite non-zero vectors"));
        }
        self.width_references = refs;
        Ok(self)
    }

    pub fn with_tool_offset(mut self, offset: [f64; 3]) -> Result<Self, StiffnessError> {
        if offset.iter().any(|v| !v.is_finite()) {
            return Err(invalid("tool offset must be finite"));
        }
        self.tool_offset = offset;
        Ok(self)
    }

    pub fn with_geometry(mut self, geometry: GeometryParams) -> Self {
        self.geometry = geometry;
        self
    }

    pub fn with_parallelogram_section(mut self, section: CrossSection) -> Self {
        self.parallelogram_section = section;
        self
    }

    pub fn geometry(&self) -> &GeometryParams {
        &self.geometry
    }

    pub fn parallelogram_section(&self) -> &CrossSection {
        &self.parallelogram_section
    }

    fn leg(&self, i: usize, p: &Vector3<f64>, rho: f64) -> Result<ChainModel, StiffnessError> {
        let axis = Vector3::ith(i, 1.0);
        let leg_length = self.geometry.leg_lengths()[i];
        let r = p - axis * rho;
        let u = r / r.norm();
        let reference = Vector3::from(self.width_references[i]);
        let v = reference - u * reference.dot(&u);
        if v.norm() < 1e-9 * reference.norm() {
            return Err(invalid(format!("width reference of leg {i} is parallel to the leg")));
        }
        let v = v.normalize();
        let w = u.cross(&v);
        let leg_frame = Matrix3::from_columns(&[u, v, w]);
        let foot_frame = Matrix3::from_columns(&[axis, Vector3::ith((i + 1) % 3, 1.0), Vector3::ith((i + 2) % 3, 1.0)]);

        let mut j_theta = DMatrix::zeros(6, 13);
        j_theta.view_mut((0, 0), (3, 1)).copy_from(&axis);
        j_theta.view_mut((0, 1), (6, 6)).copy_from(&(transport(&r) * rotation6(&foot_frame)));
        j_theta.view_mut((0, 7), (6, 6)).copy_from(&rotation6(&leg_frame));

        let mut k_theta = DMatrix::zeros(13, 13);
        k_theta[(0, 0)] = self.actuator_stiffness;
        k_theta.view_mut((1, 1), (6, 6)).copy_from(&beam_spring(&self.foot_section, self.foot_length)?);
        k_theta.view_mut((7, 7), (6, 6)).copy_from(&beam_spring(&self.parallelogram_section, leg_length)?);

        let mut j_q = DMatrix::zeros(6, 2);
        j_q.view_mut((0, 0), (3, 1)).copy_from(&v);
        j_q.view_mut((0, 1), (3, 1)).copy_from(&w);
        ChainModel::new(j_theta, j_q, k_theta)
    }
}

impl ChainBuilder for OrthoglideStiffness {
    fn chains(&self, p: &Vector3<f64>) -> Result<Vec<ChainModel>, StiffnessError> {
        let rho = inverse_kinematics(&TcpPose(*p), &self.geometry)?.0;
        (0..3).map(|i| self.leg(i, p, rho[i])).collect()
    }

    fn tool_offset(&self) -> Vector3<f64> {
        Vector3::from(self.tool_offset)
    }
}

/// Translational tool deflection at pose `p` under `f` as the parallelogram
/// section is reshaped by each factor in `mus`.
pub fn section_scaling_sweep(
    model: &OrthoglideStiffness,
    p: &Vector3<f64>,
    f: &Vector6<f64>,
    mus: &[f64],
) -> Result<Vec<(f64, f64)>, StiffnessError> {
    let base = *model.parallelogram_section();
    mus.iter()
        .map(|&mu| {
            let m = model.clone().with_parallelogram_section(scale_cross_section(&base, mu)?);
            let t = tool_deflection(&m, f, p)?;
            Ok((mu, t.fixed_rows::<3>(0).norm()))
        })
        .collect()
}
