mod common;

use common::*;
use microtop::fem::{CellMesh, PeriodicScalarField};
use microtop::homog::{CStarTable, CellProblem, Level, MicroSamples};
use microtop::tensor::{spectral_bounds, Tensor4Sym};

const S: f64 = 0.8;

/// Element-wise constant grade depending on one coordinate only.
fn laminate(n: usize, along_x: bool, grade: impl Fn(usize) -> f64) -> CellProblem {
    let mesh = CellMesh::new(n).unwrap();
    let g = mesh.grid;
    let micro = MicroSamples::from_fn(g, |e, _| {
        let (i, j) = g.element_ij(e);
        grade(if along_x { i } else { j })
    });
    CellProblem::from_samples(mesh, material(), micro)
}

fn solve(p: &CellProblem, s: f64) -> Tensor4Sym {
    Level::solve(p, s).unwrap().cstar
}

/// Closed-form laminate for `C(y) = k(y) C₁` layered normal to the first axis.
fn laminate_formula(ks: &[f64]) -> [[f64; 3]; 3] {
    let c1 = material().c1.voigt;
    let (p, lam, mu) = (c1[0][0], c1[0][1], c1[2][2]);
    let n = ks.len() as f64;
    let arith = ks.iter().sum::<f64>() / n;
    let harm = n / ks.iter().map(|k| 1.0 / k).sum::<f64>();
    let c11 = p * harm;
    let c12 = lam * harm;
    let c22 = p * arith - lam * lam / p * arith + lam * lam / p * harm;
    [[c11, c12, 0.0], [c12, c22, 0.0], [0.0, 0.0, mu * harm]]
}

#[test]
fn layered_cells_match_the_laminate_formula() {
    let grades = [1.0, 1.9, 1.3, 2.0, 1.0, 1.6, 1.1, 1.45];
    let delta = 1e-3;
    let ks: Vec<f64> = grades.iter().map(|m| S * m + (1.0 - S) * delta).collect();
    let expect = laminate_formula(&ks);
    let c = solve(&laminate(8, true, |i| grades[i]), S).voigt;
    let scale = expect[0][0];
    for a in 0..3 {
        for b in 0..3 {
            assert!(
                (c[a][b] - expect[a][b]).abs() < 1e-10 * scale,
                "({a},{b}): {} vs {}",
                c[a][b],
                expect[a][b]
            );
        }
    }
}

#[test]
fn rotating_the_layers_swaps_the_axes() {
    let grade = |i: usize| if i < 3 { 2.0 } else { 1.0 };
    let x = solve(&laminate(8, true, grade), S).voigt;
    let y = solve(&laminate(8, false, grade), S).voigt;
    assert!((x[0][0] - y[1][1]).abs() < 1e-12);
    assert!((x[1][1] - y[0][0]).abs() < 1e-12);
    assert!((x[0][1] - y[0][1]).abs() < 1e-12);
    assert!((x[2][2] - y[2][2]).abs() < 1e-12);
}

#[test]
fn homogenized_tensor_is_bounded_by_the_means() {
    let mesh = CellMesh::new(16).unwrap();
    let m = checkerboard(&mesh);
    let p = CellProblem::new(mesh, material(), &m).unwrap();
    for s in [0.0, 0.3, 1.0] {
        let c = solve(&p, s);
        assert!(c.is_symmetric(1e-12));
        let (lo, _) = spectral_bounds(&c).unwrap();
        assert!(lo > 0.0);
        // Voigt bound: the arithmetic mean of C(s, m) dominates C*.
        let mut mean = Tensor4Sym::ZERO;
        let n = p.micro.values.len() as f64;
        for &v in &p.micro.values {
            mean.add_scaled(1.0 / n, &p.material.coefficient(s, v));
        }
        let (gap, _) = spectral_bounds(&(mean - c)).unwrap();
        assert!(gap > -1e-12, "s = {s}: {gap}");
    }
}

#[test]
fn shifting_the_cell_leaves_the_tensor_unchanged() {
    let mesh = CellMesh::new(16).unwrap();
    let m = smooth_micro(&mesh);
    let n = mesh.grid.nx;
    let shifted = PeriodicScalarField {
        grid: m.grid,
        values: (0..m.len())
            .map(|k| {
                let (i, j) = m.grid.node_ij(k);
                m.values[m.grid.node((i + 5) % n, (j + 3) % n)]
            })
            .collect(),
    };
    let a = solve(&CellProblem::new(mesh.clone(), material(), &m).unwrap(), S);
    let b = solve(&CellProblem::new(mesh, material(), &shifted).unwrap(), S);
    assert!(a.max_abs_diff(&b) < 1e-10 * a.max_abs());
}

#[test]
fn table_reproduces_levels_and_converges_between_them() {
    let mesh = CellMesh::new(8).unwrap();
    let m = smooth_micro(&mesh);
    let p = CellProblem::new(mesh, material(), &m).unwrap();
    let probes = [0.13, 0.37, 0.71, 0.94];
    let exact: Vec<Tensor4Sym> = probes.iter().map(|&s| solve(&p, s)).collect();
    let mut errs = vec![];
    for n in [5, 9, 17] {
        let table = CStarTable::build(p.clone(), n).unwrap();
        assert_eq!(table.n_levels(), n);
        for level in &table.levels {
            assert_eq!(table.cstar(level.s), level.cstar);
        }
        let err = probes
            .iter()
            .zip(&exact)
            .map(|(&s, c)| table.cstar(s).max_abs_diff(c))
            .fold(0.0, f64::max);
        errs.push(err);
    }
    println!("interpolation errors {errs:?}");
    assert!(errs[1] < errs[0] && errs[2] < errs[1]);
    assert!(errs[2] < 1e-4 * exact[0].max_abs());
}
