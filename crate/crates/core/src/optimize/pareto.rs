use serde::{Deserialize, Serialize};

use super::{goal_attain, GoalProblem, OptimizeError, SearchOptions};

/// Dominance tolerance used by [`pareto_sweep`].
pub const DOMINANCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub weights: Vec<f64>,
    pub pi: Vec<f64>,
    pub objectives: Vec<f64>,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub weights: Vec<f64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParetoSet {
    pub points: Vec<ParetoPoint>,
    pub failures: Vec<SweepFailure>,
}

/// `a` dominates `b`: no worse anywhere and strictly better somewhere, with
/// differences below `tol` ignored.
pub fn dominates(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| *x <= y + tol) && a.iter().zip(b).any(|(x, y)| *x < y - tol)
}

/// Drops every point dominated by another one. Survivors keep their input
/// order.
pub fn pareto_filter(points: Vec<ParetoPoint>, tol: f64) -> Vec<ParetoPoint> {
    let keep: Vec<bool> =
        points.iter().map(|p| !points.iter().any(|q| dominates(&q.objectives, &p.objectives, tol))).collect();
    points.into_iter().zip(keep).filter_map(|(p, k)| k.then_some(p)).collect()
}

/// Solves the problem once per weight vector and keeps the non-dominated
/// results. A failing weight vector is recorded and the sweep continues.
pub fn pareto_sweep(
    problem: &GoalProblem,
    weight_vectors: &[Vec<f64>],
    starts: &[Vec<f64>],
    options: &SearchOptions,
) -> ParetoSet {
    let mut raw = Vec::new();
    let mut failures = Vec::new();
    for w in weight_vectors {
        let outcome = problem.with_weights(w).and_then(|p| goal_attain(&p, starts, options));
        match outcome {
            Ok(r) => raw.push(ParetoPoint {
                weights: w.clone(),
                pi: r.pi_star,
                objectives: r.objective_values,
                lambda: r.lambda_star,
            }),
            Err(e) => {
                let message = match &e {
                    OptimizeError::Infeasible { best } => format!("{e} at {:?}", best.pi_star),
                    _ => e.to_string(),
                };
                log::warn!("weights {w:?}: {message}");
                failures.push(SweepFailure { weights: w.clone(), message });
            }
        }
    }
    ParetoSet { points: pareto_filter(raw, DOMINANCE_TOL), failures }
}

/// `n` evenly spaced weight pairs `(k/(n−1), 1 − k/(n−1))`.
pub fn weight_pairs(n: usize) -> Vec<Vec<f64>> {
    match n {
        0 => vec![],
        1 => vec![vec![0.5, 0.5]],
        _ => (0..n)
            .map(|k| {
                let t = k as f64 / (n - 1) as f64;
                vec![t, 1.0 - t]
            })
            .collect(),
    }
}

/// Every weight vector of `m` components that are multiples of
/// `1/divisions` and sum to one, in lexicographic order of the multiples.
/// For `m = 2` this is [`weight_pairs`]`(divisions + 1)` up to rounding.
pub fn weight_simplex(m: usize, divisions: usize) -> Vec<Vec<f64>> {
    fn fill(m: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() + 1 == m {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            fill(m, left - k, prefix, out);
            prefix.pop();
        }
    }
    if m == 0 || divisions == 0 {
        return if m == 0 { vec![] } else { vec![vec![1.0 / m as f64; m]] };
    }
    let mut lattice = Vec::new();
    fill(m, divisions, &mut Vec::with_capacity(m), &mut lattice);
    lattice.into_iter().map(|v| v.into_iter().map(|k| k as f64 / divisions as f64).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::presets;

    #[test]
    fn simplex_lattice_counts_and_sums() {
        let w = weight_simplex(3, 4);
        assert_eq!(w.len(), 15);
        assert!(w.iter().all(|v| (v.iter().sum::<f64>() - 1.0).abs() < 1e-15));
        assert_eq!(weight_simplex(2, 4), weight_pairs(5));
    }

    fn pt(objectives: Vec<f64>) -> ParetoPoint {
        ParetoPoint { weights: vec![], pi: vec![], objectives, lambda: 0.0 }
    }

    #[test]
    fn filter_removes_injected_dominated_point() {
        let pts = vec![pt(vec![0.0, 1.0]), pt(vec![0.5, 0.5]), pt(vec![0.6, 0.6]), pt(vec![1.0, 0.0])];
        let kept = pareto_filter(pts, DOMINANCE_TOL);
        assert_eq!(kept.len(), 3);
        assert!(kept.iter().all(|p| p.objectives != vec![0.6, 0.6]));
    }

    #[test]
    fn single_weight_gives_singleton() {
        let s = pareto_sweep(&presets::front_pair(), &[vec![0.5, 0.5]], &[vec![0.9]], &SearchOptions::default());
        assert_eq!(s.points.len(), 1);
        assert!((s.points[0].pi[0] - 0.5).abs() < 1e-4);
    }

    #[test]
    fn front_pair_lies_on_analytic_front() {
        let s =
            pareto_sweep(&presets::front_pair(), &weight_pairs(11), &[vec![0.3], vec![0.8]], &SearchOptions::default());
        assert!(s.failures.is_empty(), "{:?}", s.failures);
        assert!(!s.points.is_empty());
        for p in &s.points {
            let sum = p.objectives[0].sqrt() + p.objectives[1].sqrt();
            assert!((sum - 1.0).abs() < 1e-3, "{p:?}");
            assert!((0.0..=1.0).contains(&p.pi[0]));
        }
    }
}
