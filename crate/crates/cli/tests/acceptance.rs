//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a failure status if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Matrix3, Matrix6, SymmetricEigen, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pkm_forge::commands::{criterion_map, Criterion, CriterionMap};
use pkm_forge::RunConfig;
use pkm_forge_core::grid::{brute_force_cuboid, largest_cuboid, FeasibilityMask, GridSpec};
use pkm_forge_core::kinematics::{forward_kinematics, inverse_kinematics, kinematic_sample, GeometryParams, TcpPose};
use pkm_forge_core::optimize::{
    design_geometry, goal_attain, latin_hypercube, pareto_sweep, presets, weight_pairs, GeometryStudy, Schedule,
    SearchOptions,
};
use pkm_forge_core::stiffness::{chain_cartesian_stiffness, scale_cross_section, section_scaling_sweep, ChainModel};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn default_config() -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/orthoglide.json");
    RunConfig::load(&path).expect("default config loads")
}

fn cuboid_masks_match_exhaustive_search() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t0 = Instant::now();
    let mut largest = 0;
    for case in 0..200 {
        let dims = if case < 10 { [12; 3] } else { std::array::from_fn(|_| rng.random_range(2..=12)) };
        let density = rng.random_range(0.1..=0.9);
        let mut mask = FeasibilityMask::from_fn(dims, |_| rng.random_bool(density));
        if case % 2 == 1 {
            let edge = rng.random_range(1..=*dims.iter().min().unwrap());
            let corner: [usize; 3] = std::array::from_fn(|a| rng.random_range(0..=dims[a] - edge));
            for i in 0..edge {
                for j in 0..edge {
                    for k in 0..edge {
                        mask.set([corner[0] + i, corner[1] + j, corner[2] + k], true);
                    }
                }
            }
        }
        let spec = GridSpec::new([0.0; 3], [1.0; 3], 12, dims).map_err(|e| e.to_string())?;
        let dp = largest_cuboid(&mask, &spec).map_err(|e| e.to_string())?.node_edge;
        let exhaustive = brute_force_cuboid(&mask).map_err(|e| e.to_string())?;
        check(dp == exhaustive, format!("mask {case} {dims:?} density {density:.2}: {dp} vs {exhaustive}"))?;
        largest = largest.max(dp);
    }
    let elapsed = t0.elapsed();
    check(elapsed < Duration::from_secs(10), format!("took {elapsed:?}"))?;
    Ok(format!("200 masks agree (100 with a planted cube), largest edge {largest}, {:.2} s", elapsed.as_secs_f64()))
}

fn isotropic_home_pose() -> Outcome {
    let g = GeometryParams::symmetric(1.0).map_err(|e| e.to_string())?;
    let s = kinematic_sample(&TcpPose::new(0.0, 0.0, 0.0), &g).map_err(|e| e.to_string())?;
    check(s.jacobian == Matrix3::identity(), format!("J = {}", s.jacobian))?;
    check((s.cond - 1.0).abs() <= 1e-12, format!("cond = {}", s.cond))?;
    Ok(format!("J = I exactly, |cond - 1| = {:e}", (s.cond - 1.0).abs()))
}

fn jacobian_matches_finite_differences() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut poses = 0;
    let mut tries = 0;
    while poses < 100 {
        tries += 1;
        check(tries < 100_000, "could not draw enough well-conditioned poses")?;
        let g = GeometryParams::with_leg_lengths(std::array::from_fn(|_| rng.random_range(0.8..1.5)))
            .map_err(|e| e.to_string())?;
        let p = TcpPose(Vector3::from_fn(|_, _| rng.random_range(-0.6..0.6)));
        let Ok(s) = kinematic_sample(&p, &g) else { continue };
        if s.sigma_min <= 0.1 {
            continue;
        }
        let rho = inverse_kinematics(&p, &g).map_err(|e| e.to_string())?;
        let mut fd = Matrix3::zeros();
        for i in 0..3 {
            let mut plus = rho;
            let mut minus = rho;
            plus.0[i] += h;
            minus.0[i] -= h;
            let fp = forward_kinematics(&plus, &g, &p).map_err(|e| e.to_string())?;
            let fm = forward_kinematics(&minus, &g, &p).map_err(|e| e.to_string())?;
            fd.set_column(i, &((fp.0 - fm.0) / (2.0 * h)));
        }
        let rel = (s.jacobian - fd).norm() / s.jacobian.norm();
        check(rel <= 1e-6, format!("pose {:?}: relative error {rel:e}", p.0))?;
        worst = worst.max(rel);
        poses += 1;
    }
    Ok(format!("100 poses, worst relative error {worst:.2e}"))
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

fn random_chain(rng: &mut ChaCha8Rng, n_theta: usize, n_q: usize) -> Result<ChainModel, String> {
    let b = random_matrix(rng, n_theta, n_theta);
    let k = &b * b.transpose() + DMatrix::identity(n_theta, n_theta) * n_theta as f64;
    ChainModel::new(random_matrix(rng, 6, n_theta), random_matrix(rng, 6, n_q), k).map_err(|e| e.to_string())
}

fn stiffness_model_checks() -> Outcome {
    for k in [1.0, 3.5e4, 2e6, 7.25e7] {
        let chain = ChainModel::new(DMatrix::identity(6, 6), DMatrix::zeros(6, 0), DMatrix::identity(6, 6) * k)
            .map_err(|e| e.to_string())?;
        let got = *chain_cartesian_stiffness(&chain).map_err(|e| e.to_string())?.matrix();
        check(got == Matrix6::identity() * k, format!("k = {k}: K = {got}"))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_leak: f64 = 0.0;
    for _ in 0..50 {
        let n_theta = rng.random_range(6..=13);
        let chain = random_chain(&mut rng, n_theta, 1)?;
        let k = *chain_cartesian_stiffness(&chain).map_err(|e| e.to_string())?.matrix();
        let e = chain.j_q().column(0).normalize();
        let e = Vector6::from_column_slice(e.as_slice());
        let leak = (e.transpose() * k * e)[0].abs() / k.norm();
        check(leak <= 1e-8, format!("passive direction carries {leak:e} of the stiffness"))?;
        worst_leak = worst_leak.max(leak);
    }

    let mut worst_oracle: f64 = 0.0;
    for _ in 0..50 {
        let n_q = rng.random_range(1..=3);
        let chain = random_chain(&mut rng, 12, n_q)?;
        let k = *chain_cartesian_stiffness(&chain).map_err(|e| e.to_string())?.matrix();
        let c = DMatrix::from_column_slice(6, 6, chain.compliance().as_slice());
        let eig = SymmetricEigen::new(chain.j_q() * chain.j_q().transpose());
        let free: Vec<_> = (0..6)
            .filter(|&i| eig.eigenvalues[i] < 1e-10 * (1.0 + chain.j_q().norm_squared()))
            .map(|i| eig.eigenvectors.column(i).into_owned())
            .collect();
        let p = DMatrix::from_columns(&free);
        let reduced = (p.transpose() * &c * &p).try_inverse().ok_or("reduced compliance is singular")?;
        let oracle = &p * reduced * p.transpose();
        let err = (DMatrix::from_column_slice(6, 6, k.as_slice()) - &oracle).norm() / oracle.norm();
        check(err <= 1e-8, format!("projection oracle disagrees by {err:e}"))?;
        worst_oracle = worst_oracle.max(err);
    }
    Ok(format!(
        "K = kI exactly; passive leak <= {worst_leak:.1e}; oracle error <= {worst_oracle:.1e} over 50 + 50 chains"
    ))
}

fn nested_edges(map: &CriterionMap, levels: &[f64], accept: impl Fn(f64, f64) -> bool) -> Result<Vec<usize>, String> {
    let mut edges = Vec::new();
    let mut previous: Option<FeasibilityMask> = None;
    for &t in levels {
        let bits: Vec<bool> = map.values.iter().map(|v| !v.is_nan() && accept(*v, t)).collect();
        let mask = FeasibilityMask::from_bools(map.grid.dims(), &bits);
        if let Some(prev) = &previous {
            check(prev.is_subset_of(&mask), format!("{}: masks not nested at {t}", map.criterion.name()))?;
        }
        edges.push(largest_cuboid(&mask, &map.grid).map_err(|e| e.to_string())?.node_edge);
        previous = Some(mask);
    }
    check(edges.windows(2).all(|w| w[0] <= w[1]), format!("{}: edges {edges:?} decrease", map.criterion.name()))?;
    Ok(edges)
}

fn nested_cuboid_monotonicity() -> Outcome {
    let cfg = default_config();
    let n0 = cfg.grid.as_ref().map(|g| g.resolution);
    check(n0 == Some(32), format!("default config resolution is {n0:?}"))?;
    let t0 = Instant::now();
    let mut report = Vec::new();
    let families: [(Criterion, [f64; 5]); 4] = [
        (Criterion::Kinematic, [1.25, 1.5, 2.0, 3.0, 5.0]),
        (Criterion::Stiffness, [1.6e-4, 2.0e-4, 2.5e-4, 3.0e-4, 5.0e-4]),
        (Criterion::Gie, [3.0, 3.5, 4.0, 4.5, 6.0]),
        (Criterion::Acceleration, [84.0, 80.0, 75.0, 70.0, 50.0]),
    ];
    for (criterion, levels) in families {
        let map = criterion_map(&cfg, criterion).map_err(|e| e.to_string())?;
        let edges = match criterion {
            Criterion::Acceleration => nested_edges(&map, &levels, |v, t| v >= t)?,
            _ => nested_edges(&map, &levels, |v, t| v <= t)?,
        };
        check(edges.last() > edges.first(), format!("{}: edges {edges:?} never grow", criterion.name()))?;
        report.push(format!("{} {edges:?}", criterion.name()));
    }
    let elapsed = t0.elapsed();
    check(elapsed < Duration::from_secs(60), format!("took {elapsed:?}"))?;
    Ok(format!("{}; {:.1} s", report.join(", "), elapsed.as_secs_f64()))
}

fn goal_attainment_suite() -> Outcome {
    let options = SearchOptions::default();
    let sym = presets::symmetric_pair();
    let r = goal_attain(&sym, &latin_hypercube(sym.bounds(), 4, 0), &options).map_err(|e| e.to_string())?;
    check(
        (r.lambda_star - 1.0).abs() <= 1e-4 && r.pi_star[0].abs() <= 1e-4,
        format!("symmetric pair: lambda {} at {:?}", r.lambda_star, r.pi_star),
    )?;
    let over = presets::over_attainment();
    let o = goal_attain(&over, &latin_hypercube(over.bounds(), 4, 0), &options).map_err(|e| e.to_string())?;
    check((o.lambda_star + 1.0).abs() <= 1e-4, format!("over-attainment: lambda {}", o.lambda_star))?;

    let front = presets::front_pair();
    let weights = weight_pairs(11);
    let set = pareto_sweep(&front, &weights, &latin_hypercube(front.bounds(), 4, 0), &options);
    check(set.failures.is_empty(), format!("sweep failures: {:?}", set.failures))?;
    check(set.points.len() == weights.len(), format!("only {} front points", set.points.len()))?;
    let mut worst: f64 = 0.0;
    for p in &set.points {
        let gap = (p.objectives[0].sqrt() + p.objectives[1].sqrt() - 1.0).abs();
        check(gap <= 1e-3, format!("point {:?} is {gap:e} off the front", p.objectives))?;
        worst = worst.max(gap);
    }
    Ok(format!("lambda {:.6} and {:.6}; 11-weight front within {worst:.1e}", r.lambda_star, o.lambda_star))
}

fn leg_length_synthesis() -> Outcome {
    let t0 = Instant::now();
    let schedule = Schedule::default();
    let flat = GeometryStudy::new([1.0, 1.0, 0.8], [0.5, 2.0]).map_err(|e| e.to_string())?;
    let l = design_geometry(&flat, &schedule).map_err(|e| e.to_string())?.leg_lengths;
    check((l[0] - l[1]).abs() <= 0.02 * l[0], format!("1x1x0.8: Lx, Ly differ: {l:?}"))?;
    check(l[2] < l[0], format!("1x1x0.8: Lz is not the shortest: {l:?}"))?;
    let cube = GeometryStudy::new([1.0, 1.0, 1.0], [0.5, 2.0]).map_err(|e| e.to_string())?;
    let c = design_geometry(&cube, &schedule).map_err(|e| e.to_string())?.leg_lengths;
    let (lo, hi) = c.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    check(hi - lo <= 0.02 * hi, format!("1x1x1: lengths spread {c:?}"))?;
    let elapsed = t0.elapsed();
    check(elapsed < Duration::from_secs(15 * 60), format!("took {elapsed:?}"))?;
    Ok(format!("1x1x0.8 -> {l:.4?}; 1x1x1 -> {c:.4?}; {:.0} s", elapsed.as_secs_f64()))
}

fn section_aspect_sweep() -> Outcome {
    let cfg = default_config();
    let section = cfg.stiffness.as_ref().ok_or("default config has no stiffness section")?;
    let model = section.model(cfg.geometry.as_ref().ok_or("no geometry")?).map_err(|e| e.to_string())?;
    let mus: Vec<f64> = (5..=30).map(|k| k as f64 / 10.0).collect();
    let base = section.parallelogram_section;
    for &mu in &mus {
        let s = scale_cross_section(&base, mu).map_err(|e| e.to_string())?;
        check((s.area() - base.area()).abs() <= 1e-12 * base.area(), format!("area changes at mu = {mu}"))?;
    }
    let force = Vector6::new(100.0, 100.0, 0.0, 0.0, 0.0, 0.0);
    let curve = section_scaling_sweep(&model, &Vector3::zeros(), &force, &mus).map_err(|e| e.to_string())?;
    let (best_mu, best) = curve.iter().copied().fold((f64::NAN, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    let (first, last) = (curve[0].1, curve[curve.len() - 1].1);
    check(best < first && best < last, format!("no interior minimum: {curve:?}"))?;
    Ok(format!("minimum {:.4e} m at mu = {best_mu:.1}; endpoints {first:.4e} / {last:.4e} m", best))
}

fn main() -> ExitCode {
    let criteria: [Check; 8] = [
        ("1 cuboid recurrence vs exhaustive search", cuboid_masks_match_exhaustive_search),
        ("2 isotropic home pose", isotropic_home_pose),
        ("3 Jacobian vs finite differences", jacobian_matches_finite_differences),
        ("4 chain stiffness model", stiffness_model_checks),
        ("5 nested cuboid monotonicity", nested_cuboid_monotonicity),
        ("6 goal attainment analytic suite", goal_attainment_suite),
        ("7 leg-length synthesis", leg_length_synthesis),
        ("8 section aspect sweep", section_aspect_sweep),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t0.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} ({secs:.1} s): {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL criterion {name} ({secs:.1} s): {reason}");
            }
        }
    }
    println!("acceptance: {} of 8 criteria passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
