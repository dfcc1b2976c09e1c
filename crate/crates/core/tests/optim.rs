mod common;

use common::*;
use microtop::fem::{PeriodicScalarField, ScalarField};
use microtop::homog::CoefficientMode;
use microtop::optim::{optimize, project_admissible, OptimConfig, OptimResult, Termination};
use microtop::state::{Caps, LoadCase, RegWeights};
use microtop::Error;
use rand::Rng;

fn weighted_dist(x: &[f64], v: &[f64], mass: &[f64]) -> f64 {
    x.iter()
        .zip(v)
        .zip(mass)
        .map(|((a, b), w)| w * (a - b).powi(2))
        .sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn projection_satisfies_the_kkt_conditions() {
    let mut r = rng(21);
    for trial in 0..40 {
        let n = r.gen_range(5..60);
        let (lo, hi) = if trial % 2 == 0 {
            (0.0, 1.0)
        } else {
            (1.0, 2.0)
        };
        let v = random_values(&mut r, n, lo - 1.0, hi + 1.0);
        let mass = random_values(&mut r, n, 0.1, 1.0);
        let total: f64 = mass.iter().sum();
        let cap = total * r.gen_range(lo + 0.05..hi);
        let x = project_admissible(&v, &mass, lo, hi, cap).unwrap();
        assert!(x.iter().all(|&xi| (lo..=hi).contains(&xi)));
        let used = dot(&x, &mass);
        assert!(used <= cap, "trial {trial}: {used} > {cap}");
        // x = clamp(v − c) for one multiplier c ≥ 0.
        let free: Vec<usize> = (0..n).filter(|&i| x[i] > lo && x[i] < hi).collect();
        let c = free.first().map_or(0.0, |&i| v[i] - x[i]);
        assert!(c >= -1e-12);
        for i in 0..n {
            let expect = (v[i] - c).clamp(lo, hi);
            assert!((x[i] - expect).abs() < 1e-9, "trial {trial}, entry {i}");
        }
        if c > 1e-9 {
            assert!(
                cap - used <= 1e-9 * total,
                "slack {} with c = {c}",
                cap - used
            );
        }
        // No random feasible point is closer.
        let d = weighted_dist(&x, &v, &mass);
        for _ in 0..50 {
            let y: Vec<f64> = x
                .iter()
                .map(|xi| (xi + r.gen_range(-0.1..0.1)).clamp(lo, hi))
                .collect();
            if dot(&y, &mass) <= cap {
                assert!(weighted_dist(&y, &v, &mass) >= d - 1e-12);
            }
        }
    }
}

#[test]
fn feasible_points_are_only_clamped() {
    let v = [0.2, -0.5, 0.7, 1.4];
    let mass = [1.0; 4];
    assert_eq!(
        project_admissible(&v, &mass, 0.0, 1.0, 3.0).unwrap(),
        [0.2, 0.0, 0.7, 1.0]
    );
    assert!(matches!(
        project_admissible(&v, &mass, 1.0, 2.0, 3.0),
        Err(Error::Config(_))
    ));
    assert!(matches!(
        project_admissible(&v, &mass, 1.0, 1.0, 9.0),
        Err(Error::Contract(_))
    ));
}

fn config(caps: Caps, max_iters: usize, mode: CoefficientMode) -> OptimConfig {
    OptimConfig {
        caps,
        weights: RegWeights::default(),
        step0: 1.0,
        armijo_c: 1e-4,
        shrink: 0.5,
        grow: 2.0,
        max_step: 64.0,
        max_iters,
        max_shrinks: 30,
        tol_stationarity: 1e-10,
        h1_precondition: Some(1.0),
        mode,
        cell_n: 8,
    }
}

const CAPS: Caps = Caps {
    volume: 0.8,
    micro: 1.5,
};

fn small_run() -> OptimResult {
    let mode = CoefficientMode::Table { n_levels: 9 };
    let red = reduced(cantilever(16, 8, 2.0), 8, mode, CAPS);
    let phi0 = ScalarField::constant(red.problem.mesh.grid, 0.4);
    let m0 = PeriodicScalarField::constant(red.cell.grid, 1.45);
    optimize(&red, &phi0, &m0, &config(CAPS, 12, mode)).unwrap()
}

#[test]
fn short_cantilever_run_descends_within_the_constraints() {
    let a = small_run();
    let h = &a.history;
    assert!(h.records.len() >= 2 && h.records.len() <= 13);
    assert!(h.records.iter().enumerate().all(|(k, r)| r.iter == k));
    assert!(h.is_monotone());
    let first = h.records[0].objective;
    let last = h.records.last().unwrap().objective;
    println!("objective {first} -> {last}, {:?}", h.termination);
    assert!(last < 0.9 * first);
    assert!(h
        .records
        .iter()
        .all(|r| r.volume_phi <= CAPS.volume + 1e-10 && r.volume_m <= CAPS.micro + 1e-10));
    assert!(a.phi.within(0.0, 1.0, 0.0) && a.m.within(1.0, 2.0, 0.0));
    assert!(!h.nondefault_weights);
    // Same input, same bits.
    let b = small_run();
    assert_eq!(a.history, b.history);
    assert_eq!(a.phi, b.phi);
    assert_eq!(a.m, b.m);
}

#[test]
fn unloaded_uniform_design_is_already_stationary() {
    let mode = CoefficientMode::Table { n_levels: 5 };
    let mut problem = cantilever(8, 4, 2.0);
    problem.loads = LoadCase::zero();
    let red = reduced(problem, 8, mode, CAPS);
    let phi0 = ScalarField::constant(red.problem.mesh.grid, 0.3);
    let m0 = PeriodicScalarField::constant(red.cell.grid, 1.2);
    let res = optimize(&red, &phi0, &m0, &config(CAPS, 10, mode)).unwrap();
    assert_eq!(res.history.termination, Some(Termination::Converged));
    assert_eq!(res.history.records.len(), 1);
    assert_eq!(res.phi, phi0);
}

#[test]
fn bad_setups_are_rejected_before_iterating() {
    let mode = CoefficientMode::Table { n_levels: 5 };
    let red = reduced(cantilever(8, 4, 2.0), 8, mode, CAPS);
    let phi0 = ScalarField::constant(red.problem.mesh.grid, 0.4);
    let m0 = PeriodicScalarField::constant(red.cell.grid, 1.45);
    let wide = Caps {
        volume: 2.5,
        micro: 1.5,
    };
    assert!(matches!(
        optimize(&red, &phi0, &m0, &config(wide, 5, mode)),
        Err(Error::Config(_))
    ));
    let mut bad_step = config(CAPS, 5, mode);
    bad_step.shrink = 1.0;
    assert!(matches!(
        optimize(&red, &phi0, &m0, &bad_step),
        Err(Error::Config(_))
    ));
    let heavy = ScalarField::constant(red.problem.mesh.grid, 0.6);
    assert!(matches!(
        optimize(&red, &heavy, &m0, &config(CAPS, 5, mode)),
        Err(Error::Contract(_))
    ));
}
