#![allow(dead_code)]

use microtop::eps::DoubleWell;
use microtop::fem::{CellMesh, EdgeTag, MacroMesh, PeriodicScalarField, ScalarField, Side};
use microtop::homog::CoefficientMode;
use microtop::optim::ReducedProblem;
use microtop::sharp::{Domain, SharpDesign, SharpProblem, VariationField, VelocityKind};
use microtop::state::{Caps, LoadCase, MacroProblem, RegWeights, VectorLoad};
use microtop::tensor::Material;
use rand::{Rng, SeedableRng};

pub fn material() -> Material {
    Material::isotropic(1.0, 0.3, 1e-3).unwrap()
}

/// Unit checkerboard on the cell: 2 in two opposite quadrants, 1 elsewhere,
/// with a linear ramp across one element at every switch.
pub fn checkerboard(mesh: &CellMesh) -> PeriodicScalarField {
    PeriodicScalarField::on_cell(mesh, |y| {
        let a = (y[0] < 0.5) == (y[1] < 0.5);
        if a {
            2.0
        } else {
            1.0
        }
    })
}

pub fn smooth_micro(mesh: &CellMesh) -> PeriodicScalarField {
    use std::f64::consts::PI;
    PeriodicScalarField::on_cell(mesh, |y| {
        1.5 + 0.3 * (2.0 * PI * y[0]).sin() * (2.0 * PI * y[1]).cos()
            + 0.1 * (2.0 * PI * y[1]).sin()
    })
}

/// Rectangle `[0, lx] × [0, 1]` clamped on the left, loaded on the right.
pub fn cantilever(nx: usize, ny: usize, lx: f64) -> MacroProblem {
    let mut mesh = MacroMesh::new(nx, ny, lx, 1.0).unwrap();
    mesh.tag_side(Side::Left, EdgeTag::Dirichlet);
    mesh.tag_range(Side::Right, 0.375, 0.625, EdgeTag::Neumann);
    let loads = LoadCase {
        f: VectorLoad::Zero,
        g: VectorLoad::Constant { value: [0.0, -1.0] },
    };
    MacroProblem::new(mesh, loads).unwrap()
}

pub fn reduced(
    problem: MacroProblem,
    cell_n: usize,
    mode: CoefficientMode,
    caps: Caps,
) -> ReducedProblem {
    ReducedProblem {
        problem,
        cell: CellMesh::new(cell_n).unwrap(),
        material: material(),
        caps,
        weights: RegWeights::default(),
        mode,
    }
}

pub fn rng(seed: u64) -> rand::rngs::StdRng {
    rand::rngs::StdRng::seed_from_u64(seed)
}

pub fn random_values(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Smooth random phase field with values in [0.2, 0.8].
pub fn smooth_phi(grid: microtop::fem::StructuredGrid, rng: &mut impl Rng) -> ScalarField {
    let a: f64 = rng.gen_range(0.5..2.0);
    let b: f64 = rng.gen_range(0.5..2.0);
    let c: f64 = rng.gen_range(0.0..6.0);
    ScalarField::from_fn(grid, |x| {
        0.5 + 0.3 * (a * x[0] + c).sin() * (b * x[1]).cos()
    })
}

/// Error ratio on the finest pair of a halving sequence.
pub fn last_ratio(errors: &[f64]) -> f64 {
    let n = errors.len();
    errors[n - 2] / errors[n - 1]
}

// Sharp fixtures.

pub const C_H: f64 = std::f64::consts::SQRT_2 / 6.0;

pub fn sharp(problem: MacroProblem, cell_n: usize) -> SharpProblem {
    SharpProblem {
        problem,
        cell: CellMesh::new(cell_n).unwrap(),
        material: material(),
        well: DoubleWell::default(),
    }
}

pub fn design(
    sp: &SharpProblem,
    phi: impl Fn([f64; 2]) -> f64,
    m: impl Fn([f64; 2]) -> f64,
) -> SharpDesign {
    SharpDesign::new(
        ScalarField::on_macro(&sp.problem.mesh, phi),
        ScalarField::on_cell(&sp.cell, m),
    )
    .unwrap()
}

pub fn disk(c: [f64; 2], r: f64) -> impl Fn([f64; 2]) -> f64 {
    move |x| r - ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt()
}

pub fn hole(c: [f64; 2], r: f64) -> impl Fn([f64; 2]) -> f64 {
    move |x| ((x[0] - c[0]).powi(2) + (x[1] - c[1]).powi(2)).sqrt() - r
}

/// Quadrant pattern with its lines off the grid nodes.
pub fn checker(y: [f64; 2]) -> f64 {
    use std::f64::consts::PI;
    (2.0 * PI * (y[0] - 0.1)).cos() * (2.0 * PI * (y[1] - 0.2)).cos()
}

pub fn laminate(y: [f64; 2]) -> f64 {
    0.2 - (y[0] - 0.5).abs()
}

pub fn no_caps() -> Caps {
    Caps {
        volume: f64::INFINITY,
        micro: f64::INFINITY,
    }
}

pub fn omega(kind: VelocityKind) -> VariationField {
    VariationField::on_omega(kind)
}

pub fn cell(kind: VelocityKind) -> VariationField {
    VariationField::on_cell(kind)
}

pub fn zero_omega() -> VariationField {
    VariationField::zero(Domain::Omega)
}

pub fn zero_cell() -> VariationField {
    VariationField::zero(Domain::Cell)
}

pub fn checker_problem(n: usize) -> (SharpProblem, SharpDesign) {
    let sp = sharp(cantilever(8, 8, 1.0), n);
    let d = design(&sp, |_| 1.0, checker);
    (sp, d)
}

pub fn cantilever_fixture() -> (SharpProblem, SharpDesign, VariationField, VariationField) {
    let sp = sharp(cantilever(32, 16, 2.0), 16);
    let d = design(&sp, hole([1.0, 0.5], 0.25), |y| 0.2 - (y[0] - 0.5).abs());
    let phi = omega(VelocityKind::Radial {
        center: [1.0, 0.5],
        radius: 0.45,
        amp: 1.0,
    });
    let psi = cell(VelocityKind::PeriodicSine { amp: [0.05, 0.03] });
    (sp, d, phi, psi)
}
