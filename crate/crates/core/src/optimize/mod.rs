//! Goal-attainment design optimization.
//!
//! For a design `π` the attainment factor is
//! `λ(π) = max_{i: w_i > 0} (f_i(π) − f_i⁰) / w_i`, the smallest `λ` with
//! `f_i(π) − w_i·λ ≤ f_i⁰` for every weighted objective. Constraints
//! `h_k(π) ≥ h_k⁰`, together with the goals of zero-weight objectives, enter
//! through an exact penalty `ρ·V(π)` on their summed violation `V`. The
//! merit `λ + ρ·V` is minimized by a bounded pattern search, restarted with
//! escalating `ρ` until the incumbent is feasible, from several starts.

mod design;
mod pareto;
pub mod presets;

pub use design::*;
pub use pareto::*;

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lattice spacing used to quantize design vectors before evaluation.
pub const DESIGN_QUANTUM: f64 = 1e-9;

pub type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone)]
pub enum OptimizeError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("no start reached a feasible design (best violation {:e})", best.violation)]
    Infeasible { best: Box<AttainmentResult> },
}

#[derive(Clone)]
pub struct Objective {
    pub name: String,
    pub eval: Evaluator,
    pub goal: f64,
    pub weight: f64,
}

impl Objective {
    pub fn new(
        name: impl Into<String>,
        goal: f64,
        weight: f64,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), eval: Arc::new(eval), goal, weight }
    }
}

/// Requirement `eval(π) ≥ bound`.
#[derive(Clone)]
pub struct Constraint {
    pub name: String,
    pub eval: Evaluator,
    pub bound: f64,
}

impl Constraint {
    pub fn new(name: impl Into<String>, bound: f64, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), eval: Arc::new(eval), bound }
    }
}

#[derive(Clone)]
pub struct GoalProblem {
    bounds: Vec<[f64; 2]>,
    objectives: Vec<Objective>,
    constraints: Vec<Constraint>,
}

impl std::fmt::Debug for GoalProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GoalProblem")
            .field("bounds", &self.bounds)
            .field("objectives", &self.objectives.iter().map(|o| (&o.name, o.goal, o.weight)).collect::<Vec<_>>())
            .field("constraints", &self.constraints.iter().map(|c| (&c.name, c.bound)).collect::<Vec<_>>())
            .finish()
    }
}

impl GoalProblem {
    pub fn new(
        bounds: Vec<[f64; 2]>,
        objectives: Vec<Objective>,
        constraints: Vec<Constraint>,
    ) -> Result<Self, OptimizeError> {
        let bad = |m: String| Err(OptimizeError::InvalidProblem(m));
        if bounds.is_empty() {
            return bad("design vector must have at least one parameter".into());
        }
        for (i, [lo, hi]) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("bounds of parameter {i} are degenerate: [{lo}, {hi}]"));
            }
        }
        if objectives.is_empty() {
            return bad("at least one objective is required".into());
        }
        if objectives.iter().any(|o| !(o.weight >= 0.0 && o.weight.is_finite()) || !o.goal.is_finite()) {
            return bad("objective weights must be finite and non-negative, goals finite".into());
        }
        if objectives.iter().all(|o| o.weight == 0.0) {
            return bad("weights must not all be zero".into());
        }
        if constraints.iter().any(|c| !c.bound.is_finite()) {
            return bad("constraint bounds must be finite".into());
        }
        Ok(Self { bounds, objectives, constraints })
    }

    pub fn design_dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[[f64; 2]] {
        &self.bounds
    }

    pub fn objectives(&self) -> &[Objective] {
        &self.objectives
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn weights(&self) -> Vec<f64> {
        self.objectives.iter().map(|o| o.weight).collect()
    }

    /// Same problem with the objective weights replaced.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self, OptimizeError> {
        if weights.len() != self.objectives.len() {
            return Err(OptimizeError::InvalidProblem(format!(
                "{} weights for {} objectives",
                weights.len(),
                self.objectives.len()
            )));
        }
        let objectives =
            self.objectives.iter().zip(weights).map(|(o, &w)| Objective { weight: w, ..o.clone() }).collect();
        Self::new(self.bounds.clone(), objectives, self.constraints.clone())
    }

    pub fn contains(&self, pi: &[f64]) -> bool {
        pi.len() == self.bounds.len() && pi.iter().zip(&self.bounds).all(|(x, [lo, hi])| lo <= x && x <= hi)
    }

    /// Attainment factor for the given objective values.
    pub fn attainment(&self, f: &[f64]) -> f64 {
        self.objectives
            .iter()
            .zip(f)
            .filter(|(o, _)| o.weight > 0.0)
            .map(|(o, v)| if v.is_nan() { f64::INFINITY } else { (v - o.goal) / o.weight })
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Summed violation of constraints and zero-weight goals.
    pub fn violation(&self, f: &[f64], h: &[f64]) -> f64 {
        let goals = self.objectives.iter().zip(f).filter(|(o, _)| o.weight == 0.0).map(|(o, v)| shortfall(o.goal, *v));
        let cons = self.constraints.iter().zip(h).map(|(c, v)| shortfall(*v, c.bound));
        goals.chain(cons).sum()
    }

    fn secondary(&self, f: &[f64]) -> f64 {
        self.objectives.iter().zip(f).filter(|(o, _)| o.weight > 0.0).map(|(o, v)| (v - o.goal) / o.weight).sum()
    }

    fn evaluate(&self, pi: &[f64]) -> Evaluation {
        Evaluation {
            objectives: self.objectives.iter().map(|o| (o.eval)(pi)).collect(),
            constraints: self.constraints.iter().map(|c| (c.eval)(pi)).collect(),
        }
    }
}

/// `max(0, lhs − rhs)` for a requirement `lhs ≤ rhs`, infinite on NaN.
fn shortfall(rhs: f64, lhs: f64) -> f64 {
    let d = lhs - rhs;
    if d.is_nan() {
        f64::INFINITY
    } else {
        d.max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Evaluation {
    objectives: Vec<f64>,
    constraints: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Converged,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttainmentResult {
    pub pi_star: Vec<f64>,
    pub lambda_star: f64,
    pub feasible: bool,
    pub violation: f64,
    /// Merit queries across all starts, cache hits included.
    pub evaluations: usize,
    /// Distinct designs actually evaluated.
    pub unique_evaluations: usize,
    pub objective_values: Vec<f64>,
    pub constraint_values: Vec<f64>,
    pub status: SearchStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchOptions {
    /// Merit queries allowed per start.
    pub budget: usize,
    /// Relative step length at which a search stops, and the feasibility
    /// tolerance on the constraint violation.
    pub tol: f64,
    /// First poll step as a fraction of each parameter range.
    pub initial_step: f64,
    /// Penalty weights tried in turn until the incumbent is feasible.
    pub penalties: Vec<f64>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self { budget: 2000, tol: 1e-6, initial_step: 0.25, penalties: vec![10.0, 1e3, 1e5] }
    }
}

impl SearchOptions {
    fn validate(&self) -> Result<(), OptimizeError> {
        let ok = self.budget > 0
            && self.tol > 0.0
            && self.initial_step > 0.0
            && self.initial_step <= 1.0
            && !self.penalties.is_empty()
            && self.penalties.iter().all(|p| *p > 0.0 && p.is_finite());
        if ok {
            Ok(())
        } else {
            Err(OptimizeError::InvalidProblem(format!("invalid search options {self:?}")))
        }
    }
}

struct Cache {
    map: Mutex<HashMap<Vec<i64>, Arc<Evaluation>>>,
    misses: AtomicUsize,
}

impl Cache {
    fn new() -> Self {
        Self { map: Mutex::new(HashMap::new()), misses: AtomicUsize::new(0) }
    }

    fn get(&self, problem: &GoalProblem, pi: &[f64]) -> Arc<Evaluation> {
        let key: Vec<i64> = pi.iter().map(|x| (x / DESIGN_QUANTUM).round() as i64).collect();
        if let Some(e) = self.map.lock().expect("cache lock").get(&key) {
            return e.clone();
        }
        let e = Arc::new(problem.evaluate(pi));
        self.misses.fetch_add(1, Ordering::Relaxed);
        self.map.lock().expect("cache lock").entry(key).or_insert(e).clone()
    }
}

#[derive(Debug, Clone, Copy)]
struct Score {
    lambda: f64,
    violation: f64,
    secondary: f64,
}

impl Score {
    fn merit(&self, rho: f64) -> f64 {
        if self.violation == 0.0 {
            self.lambda
        } else {
            self.lambda + rho * self.violation
        }
    }

    /// Strict improvement in merit, ties broken by the summed normalized
    /// objectives.
    fn improves_on(&self, other: &Score, rho: f64) -> bool {
        let (a, b) = (self.merit(rho), other.merit(rho));
        a < b || (a == b && self.secondary < other.secondary)
    }
}

struct Search<'a> {
    problem: &'a GoalProblem,
    cache: &'a Cache,
    options: &'a SearchOptions,
    lattice: Vec<[f64; 2]>,
    directions: Vec<Vec<f64>>,
    queries: usize,
}

impl<'a> Search<'a> {
    fn new(problem: &'a GoalProblem, cache: &'a Cache, options: &'a SearchOptions) -> Self {
        let lattice = problem
            .bounds
            .iter()
            .map(|[lo, hi]| {
                let a = (lo / DESIGN_QUANTUM).ceil() * DESIGN_QUANTUM;
                let b = (hi / DESIGN_QUANTUM).floor() * DESIGN_QUANTUM;
                if a <= b {
                    [a, b]
                } else {
                    [*lo, *hi]
                }
            })
            .collect();
        Self { problem, cache, options, lattice, directions: poll_directions(problem.design_dim()), queries: 0 }
    }

    fn snap(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.lattice)
            .map(|(v, [lo, hi])| ((v / DESIGN_QUANTUM).round() * DESIGN_QUANTUM).clamp(*lo, *hi))
            .collect()
    }

    fn score(&mut self, x: &[f64]) -> (Score, Arc<Evaluation>) {
        self.queries += 1;
        let e = self.cache.get(self.problem, x);
        let s = Score {
            lambda: self.problem.attainment(&e.objectives),
            violation: self.problem.violation(&e.objectives, &e.constraints),
            secondary: self.problem.secondary(&e.objectives),
        };
        (s, e)
    }

    fn exhausted(&self) -> bool {
        self.queries >= self.options.budget
    }

    /// Opportunistic poll with step halving on failure.
    fn pattern_search(&mut self, mut x: Vec<f64>, rho: f64) -> (Vec<f64>, SearchStatus) {
        let ranges: Vec<f64> = self.problem.bounds.iter().map(|[lo, hi]| hi - lo).collect();
        let mut step: Vec<f64> = ranges.iter().map(|r| r * self.options.initial_step).collect();
        let (mut fx, _) = self.score(&x);
        loop {
            if step.iter().zip(&ranges).all(|(s, r)| s / r < self.options.tol) {
                return (x, SearchStatus::Converged);
            }
            let mut moved = false;
            for d in 0..self.directions.len() {
                if self.exhausted() {
                    return (x, SearchStatus::BudgetExhausted);
                }
                let trial: Vec<f64> =
                    x.iter().zip(&self.directions[d]).zip(&step).map(|((xi, di), si)| xi + di * si).collect();
                let y = self.snap(&trial);
                if y == x {
                    continue;
                }
                let (fy, _) = self.score(&y);
                if fy.improves_on(&fx, rho) {
                    x = y;
                    fx = fy;
                    moved = true;
                    break;
                }
            }
            if !moved {
                step.iter_mut().for_each(|s| *s *= 0.5);
            }
        }
    }

    fn run(&mut self, start: &[f64]) -> (Vec<f64>, SearchStatus) {
        let mut x = self.snap(start);
        let mut status = SearchStatus::Converged;
        for &rho in &self.options.penalties {
            let (next, st) = self.pattern_search(x, rho);
            x = next;
            status = st;
            let (s, _) = self.score(&x);
            if s.violation <= self.options.tol || st == SearchStatus::BudgetExhausted {
                break;
            }
        }
        (x, status)
    }
}

/// Poll set: every non-zero vector in `{-1, 0, 1}ⁿ` for small `n`, ordered
/// by support size; otherwise the signed coordinate axes and the two
/// all-ones diagonals.
fn poll_directions(n: usize) -> Vec<Vec<f64>> {
    if n <= 4 {
        let mut dirs: Vec<Vec<f64>> = (0..3usize.pow(n as u32))
            .map(|mut c| {
                (0..n)
                    .map(|_| {
                        let d = (c % 3) as f64 - 1.0;
                        c /= 3;
                        d
                    })
                    .collect::<Vec<f64>>()
            })
            .filter(|d| d.iter().any(|v| *v != 0.0))
            .collect();
        dirs.sort_by_key(|d| d.iter().filter(|v| **v != 0.0).count());
        dirs
    } else {
        let mut dirs = Vec::with_capacity(2 * n + 2);
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut d = vec![0.0; n];
                d[i] = s;
                dirs.push(d);
            }
        }
        dirs.push(vec![1.0; n]);
        dirs.push(vec![-1.0; n]);
        dirs
    }
}

fn better_result(a: &AttainmentResult, b: &AttainmentResult) -> bool {
    match (a.feasible, b.feasible) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => a.lambda_star < b.lambda_star,
        (false, false) => a.violation < b.violation,
    }
}

/// Minimizes the attainment factor from each start and returns the best
/// design found.
///
/// Starts outside the bounds are ignored. Fails with
/// [`OptimizeError::Infeasible`] when no start ends within `options.tol` of
/// feasibility; the error carries the least-violating result.
pub fn goal_attain(
    problem: &GoalProblem,
    starts: &[Vec<f64>],
    options: &SearchOptions,
) -> Result<AttainmentResult, OptimizeError> {
    options.validate()?;
    let starts: Vec<&Vec<f64>> = starts.iter().filter(|s| problem.contains(s)).collect();
    if starts.is_empty() {
        return Err(OptimizeError::InvalidProblem("no start lies inside the bounds".into()));
    }
    let cache = Cache::new();
    let runs: Vec<(Vec<f64>, SearchStatus, usize)> = starts
        .par_iter()
        .map(|s| {
            let mut search = Search::new(problem, &cache, options);
            let (x, status) = search.run(s);
            (x, status, search.queries)
        })
        .collect();
    let total: usize = runs.iter().map(|r| r.2).sum();
    let mut best: Option<AttainmentResult> = None;
    for (x, status, _) in runs {
        let e = cache.get(problem, &x);
        let violation = problem.violation(&e.objectives, &e.constraints);
        let r = AttainmentResult {
            lambda_star: problem.attainment(&e.objectives),
            feasible: violation <= options.tol,
            violation,
            pi_star: x,
            evaluations: 0,
            unique_evaluations: 0,
            objective_values: e.objectives.clone(),
            constraint_values: e.constraints.clone(),
            status,
        };
        if best.as_ref().is_none_or(|b| better_result(&r, b)) {
            best = Some(r);
        }
    }
    let mut best = best.expect("at least one start");
    best.evaluations = total;
    best.unique_evaluations = cache.misses.load(Ordering::Relaxed);
    if best.feasible {
        Ok(best)
    } else {
        Err(OptimizeError::Infeasible { best: Box::new(best) })
    }
}

/// `n` Latin-hypercube samples inside `bounds`, reproducible from `seed`.
pub fn latin_hypercube(bounds: &[[f64; 2]], n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut columns: Vec<Vec<f64>> = bounds
        .iter()
        .map(|[lo, hi]| {
            let mut strata: Vec<usize> = (0..n).collect();
            strata.shuffle(&mut rng);
            strata.into_iter().map(|k| lo + (hi - lo) * (k as f64 + rng.random::<f64>()) / n as f64).collect()
        })
        .collect();
    (0..n).map(|i| columns.iter_mut().map(|c| c[i]).collect()).collect()
}
