mod common;

use common::*;
use microtop::fem::assembly::{assemble_laplacian, assemble_mass, lumped_mass};
use microtop::fem::integrate::{h1_seminorm_sq, integral};
use microtop::fem::{
    assemble_elasticity, solve_spd, CellMesh, Constraint, MacroMesh, ScalarField, SolveOptions,
    StructuredGrid, VectorField,
};
use microtop::tensor::{make_isotropic, spectral_bounds, Material, SymMatrix2, Tensor4Sym};
use microtop::Error;
use rand::Rng;

const E: f64 = 1.0;
const NU: f64 = 0.3;

fn lame() -> (f64, f64) {
    (
        E * NU / ((1.0 + NU) * (1.0 - 2.0 * NU)),
        E / (2.0 * (1.0 + NU)),
    )
}

// Tensors.

#[test]
fn isotropic_energy_is_lame_form() {
    let c = make_isotropic(E, NU).unwrap();
    let (lambda, mu) = lame();
    let mut r = rng(1);
    for _ in 0..20 {
        let v = random_values(&mut r, 3, -1.0, 1.0);
        let e = SymMatrix2::new(v[0], v[1], v[2]);
        let expect = lambda * e.trace().powi(2) + 2.0 * mu * e.norm_sq();
        assert!((c.energy(&e, &e) - expect).abs() < 1e-14, "{e:?}");
        // Engineering Voigt quadratic form agrees with the tensor form.
        let g = e.engineering();
        assert!((c.quad_form(&g, &g) - expect).abs() < 1e-14);
    }
}

#[test]
fn isotropic_spectrum_is_bulk_and_shear() {
    let (lambda, mu) = lame();
    let (lo, hi) = spectral_bounds(&make_isotropic(E, NU).unwrap()).unwrap();
    assert!((lo - 2.0 * mu).abs() < 1e-14);
    assert!((hi - 2.0 * (lambda + mu)).abs() < 1e-14);
}

#[test]
fn stress_is_major_symmetric() {
    let c = material().coefficient(0.7, 1.3);
    let mut r = rng(2);
    for _ in 0..10 {
        let a = random_values(&mut r, 3, -1.0, 1.0);
        let b = random_values(&mut r, 3, -1.0, 1.0);
        let e = SymMatrix2::new(a[0], a[1], a[2]);
        let f = SymMatrix2::new(b[0], b[1], b[2]);
        assert!((c.apply(&e).dot(&f) - c.apply(&f).dot(&e)).abs() < 1e-15);
        assert!((c.energy(&e, &f) - c.apply(&e).dot(&f)).abs() < 1e-15);
    }
    assert_eq!(c.component(0, 1, 0, 1), c.component(1, 0, 1, 0));
    assert_eq!(c.component(0, 0, 1, 1), c.component(1, 1, 0, 0));
}

#[test]
fn bad_inputs_are_rejected() {
    assert!(matches!(
        make_isotropic(-1.0, 0.3),
        Err(Error::Parameter(_))
    ));
    assert!(matches!(make_isotropic(1.0, 0.5), Err(Error::Parameter(_))));
    assert!(matches!(
        Material::isotropic(1.0, 0.3, 0.0),
        Err(Error::Parameter(_))
    ));
    let skew = [[1.0, 0.2, 0.0], [0.1, 1.0, 0.0], [0.0, 0.0, 1.0]];
    assert!(Tensor4Sym::from_voigt(skew).is_err());
    let indefinite = Tensor4Sym::from_voigt([[1.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    let c1 = make_isotropic(E, NU).unwrap();
    assert!(Material::new(c1, indefinite.unwrap()).is_err());
}

#[test]
fn coefficient_is_bilinear_in_phase_and_grade() {
    let mat = material();
    let (phi, m, psi, mu) = (0.35, 1.4, -0.7, 0.9);
    let d = mat.coefficient_variation(phi, m, psi, mu);
    for t in [1e-1, 1e-3] {
        let diff = mat.coefficient(phi + t * psi, m + t * mu) - mat.coefficient(phi, m);
        // The only nonlinear term is t² ψ μ C₁.
        let rest = diff - t * d - (t * t * psi * mu) * mat.c1;
        assert!(rest.max_abs() < 1e-15, "t = {t}: {}", rest.max_abs());
    }
    let (lo, hi) = mat.admissible_bounds().unwrap();
    for (p, q) in [(0.0, 1.0), (1.0, 2.0), (0.5, 1.5), (1.0, 1.0)] {
        let (a, b) = spectral_bounds(&mat.coefficient(p, q)).unwrap();
        assert!(a >= lo * (1.0 - 1e-14) && b <= hi * (1.0 + 1e-14));
    }
}

// Grids and quadrature.

#[test]
fn periodic_grids_wrap_and_open_grids_do_not() {
    let p = StructuredGrid::new(4, 3, 1.0, 1.0, true);
    assert_eq!(p.num_nodes(), 12);
    assert_eq!(p.node(4, 0), p.node(0, 0));
    assert_eq!(p.node(4, 3), p.node(0, 0));
    assert_eq!(p.node(2, 1), 6);
    let o = StructuredGrid::new(4, 3, 2.0, 1.0, false);
    assert_eq!(o.num_nodes(), 20);
    assert_eq!(o.node(4, 3), 19);
    assert_eq!(o.node_coords(o.node(4, 3)), [2.0, 1.0]);
    for e in 0..o.num_elements() {
        let nodes = o.element_nodes(e);
        let origin = o.element_origin(e);
        assert_eq!(o.node_coords(nodes[0]), origin);
    }
}

#[test]
fn quadrature_is_exact_for_bilinear_integrands() {
    let g = StructuredGrid::new(5, 7, 2.0, 3.0, false);
    let f = ScalarField::from_fn(g, |x| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[0] * x[1]);
    // ∫∫ over [0,2]×[0,3].
    let exact = 6.0 + 2.0 * 6.0 - 9.0 + 0.5 * 2.0 * 4.5;
    assert!((integral(&f) - exact).abs() < 1e-12);
    // ∇(xy) = (y, x); ∫ y² + x² = 2·9 + 8/3·3.
    let xy = ScalarField::from_fn(g, |x| x[0] * x[1]);
    assert!((h1_seminorm_sq(&xy) - (18.0 + 8.0)).abs() < 1e-12);
    let total: f64 = lumped_mass(&g).iter().sum();
    assert!((total - 6.0).abs() < 1e-13);
    let ones = vec![1.0; g.num_nodes()];
    let m = assemble_mass(&g, |_, _| 1.0);
    assert!((m.bilinear(&ones, &ones) - 6.0).abs() < 1e-13);
}

#[test]
fn fields_interpolate_bilinear_data_exactly() {
    let g = StructuredGrid::new(3, 4, 1.5, 1.0, false);
    let f = |x: [f64; 2]| 0.3 - x[0] + 2.0 * x[1] + x[0] * x[1];
    let s = ScalarField::from_fn(g, f);
    let mut r = rng(3);
    for _ in 0..20 {
        let x = [r.gen_range(0.0..1.5), r.gen_range(0.0..1.0)];
        assert!((s.eval(x) - f(x)).abs() < 1e-14);
        let grad = s.grad_at(x);
        assert!((grad[0] - (-1.0 + x[1])).abs() < 1e-13);
        assert!((grad[1] - (2.0 + x[0])).abs() < 1e-13);
    }
}

// Assembly and solves.

#[test]
fn stiffness_annihilates_rigid_motions_and_balances_affine_fields() {
    let g = StructuredGrid::new(6, 5, 1.2, 1.0, false);
    let c = material().coefficient(1.0, 1.3);
    let k = assemble_elasticity(&g, |_, _| c).unwrap();
    assert!(k.is_exactly_symmetric());
    let rigid = [
        VectorField::from_fn(g, |_| [1.0, 0.0]),
        VectorField::from_fn(g, |_| [0.0, 1.0]),
        VectorField::from_fn(g, |x| [-x[1], x[0]]),
    ];
    for u in &rigid {
        let ku = k.apply(&u.to_interleaved());
        assert!(ku.iter().all(|v| v.abs() < 1e-13));
    }
    // Homogeneous strain gives zero interior forces (patch test).
    let u = VectorField::from_fn(g, |x| [0.3 * x[0] + 0.1 * x[1], -0.2 * x[0] + 0.5 * x[1]]);
    let ku = k.apply(&u.to_interleaved());
    for j in 1..g.ny {
        for i in 1..g.nx {
            let n = g.node(i, j);
            assert!(ku[2 * n].abs() < 1e-13 && ku[2 * n + 1].abs() < 1e-13);
        }
    }
}

#[test]
fn poisson_solve_converges_at_second_order() {
    use std::f64::consts::PI;
    let exact = |x: [f64; 2]| (PI * x[0]).sin() * (PI * x[1]).sin();
    let mut errs = vec![];
    for n in [8, 16, 32] {
        let g = StructuredGrid::new(n, n, 1.0, 1.0, false);
        let a = assemble_laplacian(&g, |_, _| 1.0);
        let m = assemble_mass(&g, |_, _| 1.0);
        let f = ScalarField::from_fn(g, |x| 2.0 * PI * PI * exact(x));
        let rhs = m.apply(&f.values);
        let boundary: Vec<usize> = (0..g.num_nodes())
            .filter(|&k| {
                let (i, j) = g.node_ij(k);
                i == 0 || j == 0 || i == n || j == n
            })
            .collect();
        let (u, report) = solve_spd(
            &a,
            &rhs,
            Constraint::DirichletEliminated(&boundary),
            SolveOptions::with_tol(1e-12),
            None,
        )
        .unwrap();
        assert!(report.residual <= 1e-12);
        assert!(boundary.iter().all(|&b| u[b] == 0.0));
        let err = (0..g.num_nodes())
            .map(|k| (u[k] - exact(g.node_coords(k))).abs())
            .fold(0.0, f64::max);
        errs.push(err);
    }
    println!("nodal errors {errs:?}");
    let ratio = last_ratio(&errs);
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
}

#[test]
fn periodic_solve_returns_the_mean_zero_solution() {
    use std::f64::consts::PI;
    let mesh = CellMesh::new(16).unwrap();
    let g = mesh.grid;
    let a = assemble_laplacian(&g, |_, _| 1.0);
    let f = ScalarField::from_fn(g, |y| (2.0 * PI * y[0]).cos() + 3.0);
    // The constant part is projected out of the right-hand side.
    let rhs = assemble_mass(&g, |_, _| 1.0).apply(&f.values);
    let (u, _) = solve_spd(
        &a,
        &rhs,
        Constraint::MeanZero { components: 1 },
        SolveOptions::with_tol(1e-12),
        None,
    )
    .unwrap();
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    assert!(mean.abs() < 1e-13);
    let amp = 1.0 / (4.0 * PI * PI);
    let err = (0..g.num_nodes())
        .map(|k| (u[k] - amp * (2.0 * PI * g.node_coords(k)[0]).cos()).abs())
        .fold(0.0, f64::max);
    // Q1 eigenvalue error is about (kh)²/12, 1.3% here.
    assert!(err < 0.02 * amp, "error {err}");
}

#[test]
fn solver_reports_non_convergence() {
    let g = StructuredGrid::new(16, 16, 1.0, 1.0, false);
    let a = assemble_laplacian(&g, |_, _| 1.0);
    let rhs = vec![1.0; g.num_nodes()];
    let fixed = [0usize];
    let opts = SolveOptions {
        max_iter: Some(2),
        ..SolveOptions::with_tol(1e-12)
    };
    let err = solve_spd(
        &a,
        &rhs,
        Constraint::DirichletEliminated(&fixed),
        opts,
        None,
    );
    assert!(matches!(err, Err(Error::Solver { iterations: 2, .. })));
}

#[test]
fn meshes_validate_their_boundary_tags() {
    assert!(MacroMesh::new(0, 4, 1.0, 1.0).is_err());
    assert!(MacroMesh::new(4, 4, -1.0, 1.0).is_err());
    assert!(CellMesh::new(1).is_err());
    let p = cantilever(8, 4, 2.0);
    // Left edge: 5 nodes, both components.
    assert_eq!(p.dirichlet_dofs().len(), 10);
    // The band [0.375, 0.625] touches the two middle edges of four.
    assert_eq!(p.mesh.edges_with(microtop::fem::EdgeTag::Neumann).len(), 2);
}
