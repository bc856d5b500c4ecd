//! Design optimization for translational parallel manipulators.
//!
//! Every performance criterion (kinematic conditioning, elastic deflection,
//! inertia, achievable acceleration) is turned into the same quantity: the
//! size of the largest cuboid of prescribed proportions inside which the
//! criterion holds. Those sizes then feed a goal-attainment optimizer over the
//! design parameters.

// Negated comparisons are used on purpose: `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod grid;
pub mod kinematics;
pub mod linalg;
pub mod optimize;
pub mod stiffness;
