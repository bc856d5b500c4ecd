//! Small analytic problems with known solutions, used to check the solver
//! end to end.

use super::{GoalProblem, Objective};

fn build(bounds: [f64; 2], objectives: Vec<Objective>) -> GoalProblem {
    GoalProblem::new(vec![bounds], objectives, vec![]).expect("preset is well formed")
}

/// `(x−1)²` and `(x+1)²` on `[−2, 2]`, goals 0, unit weights.
/// Optimum `x* = 0`, `λ* = 1`.
pub fn symmetric_pair() -> GoalProblem {
    build(
        [-2.0, 2.0],
        vec![
            Objective::new("f1", 0.0, 1.0, |x| (x[0] - 1.0).powi(2)),
            Objective::new("f2", 0.0, 1.0, |x| (x[0] + 1.0).powi(2)),
        ],
    )
}

/// `x²` with goal 1 on `[−2, 2]`. Optimum `x* = 0`, `λ* = −1`.
pub fn over_attainment() -> GoalProblem {
    build([-2.0, 2.0], vec![Objective::new("f1", 1.0, 1.0, |x| x[0] * x[0])])
}

/// `x` and `−x` on `[−1, 1]`, goals 0. Optimum `x* = 0`, `λ* = 0`.
pub fn opposed_linear() -> GoalProblem {
    build([-1.0, 1.0], vec![Objective::new("f1", 0.0, 1.0, |x| x[0]), Objective::new("f2", 0.0, 1.0, |x| -x[0])])
}

/// `x²` and `(x−1)²` on `[0, 1]`, goals 0. Every `x` in the interval is
/// Pareto optimal and the front is `√f₁ + √f₂ = 1`.
pub fn front_pair() -> GoalProblem {
    build(
        [0.0, 1.0],
        vec![Objective::new("f1", 0.0, 1.0, |x| x[0] * x[0]), Objective::new("f2", 0.0, 1.0, |x| (x[0] - 1.0).powi(2))],
    )
}

/// Looks a preset up by its command-line name.
pub fn by_name(name: &str) -> Option<GoalProblem> {
    match name {
        "symmetric-pair" => Some(symmetric_pair()),
        "over-attainment" => Some(over_attainment()),
        "opposed-linear" => Some(opposed_linear()),
        "front-pair" => Some(front_pair()),
        _ => None,
    }
}

pub const NAMES: [&str; 4] = ["symmetric-pair", "over-attainment", "opposed-linear", "front-pair"];
