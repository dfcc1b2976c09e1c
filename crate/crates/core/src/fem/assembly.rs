//! Element loops for elasticity and scalar operators, load vectors.
//!
//! Element matrices are computed in parallel and scattered in element order.
//! Only the upper triangle of each element matrix is evaluated; the lower
//! triangle is mirrored, so the assembled operator is bitwise symmetric.

use rayon::prelude::*;

use super::grid::{ShapeEval, StructuredGrid};
use super::mesh::{EdgeTag, MacroMesh};
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};
use crate::tensor::Tensor4Sym;

/// Coefficient data at one Gauss point.
#[derive(Debug, Clone, Copy)]
pub struct QuadCoefficient {
    pub d: Tensor4Sym,
    /// Linear map applied to every shape gradient (pullback problems);
    /// `None` is the identity.
    pub grad_map: Option<[[f64; 2]; 2]>,
    /// Extra factor on the quadrature weight (a Jacobian determinant).
    pub weight_factor: f64,
}

impl QuadCoefficient {
    pub fn plain(d: Tensor4Sym) -> Self {
        Self {
            d,
            grad_map: None,
            weight_factor: 1.0,
        }
    }
}

/// Everything a load integrand may need at one Gauss point.
#[derive(Debug, Clone, Copy)]
pub struct QuadContext {
    pub e: usize,
    pub q: usize,
    pub x: [f64; 2],
    pub weight: f64,
    pub n: [f64; 4],
    pub grad: [[f64; 2]; 4],
}

/// Engineering strain of the vector shape function `N_a e_i`.
#[inline]
pub fn shape_strain(g: [f64; 2], i: usize) -> [f64; 3] {
    if i == 0 {
        [g[0], 0.0, g[1]]
    } else {
        [0.0, g[1], g[0]]
    }
}

#[inline]
pub fn map_grad(m: &[[f64; 2]; 2], g: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * g[0] + m[0][1] * g[1],
        m[1][0] * g[0] + m[1][1] * g[1],
    ]
}

fn check_definite(d: &Tensor4Sym, e: usize, q: usize) -> Result<()> {
    let v = &d.voigt;
    let m1 = v[0][0];
    let m2 = v[0][0] * v[1][1] - v[0][1] * v[1][0];
    let m3 = v[0][0] * (v[1][1] * v[2][2] - v[1][2] * v[2][1])
        - v[0][1] * (v[1][0] * v[2][2] - v[1][2] * v[2][0])
        + v[0][2] * (v[1][0] * v[2][1] - v[1][1] * v[2][0]);
    if !(m1 > 0.0 && m2 > 0.0 && m3 > 0.0) || !d.is_symmetric(1e-10) {
        return Err(Error::Assembly(format!(
            "coefficient at element {e}, Gauss point {q} is not positive definite: {:?}",
            d.voigt
        )));
    }
    Ok(())
}

fn element_elasticity(
    shapes: &[ShapeEval; 4],
    weight: f64,
    e: usize,
    coef: &(impl Fn(usize, usize) -> QuadCoefficient + Sync),
) -> Result<[[f64; 8]; 8]> {
    let mut k = [[0.0; 8]; 8];
    for (q, s) in shapes.iter().enumerate() {
        let c = coef(e, q);
        check_definite(&c.d, e, q)?;
        let w = weight * c.weight_factor;
        let mut b = [[0.0; 3]; 8];
        for a in 0..4 {
            let g = match &c.grad_map {
                Some(m) => map_grad(m, s.grad[a]),
                None => s.grad[a],
            };
            b[2 * a] = shape_strain(g, 0);
            b[2 * a + 1] = shape_strain(g, 1);
        }
        for r in 0..8 {
            let mut db = [0.0; 3];
            for p in 0..3 {
                db[p] = c.d.voigt[p][0] * b[r][0]
                    + c.d.voigt[p][1] * b[r][1]
                    + c.d.voigt[p][2] * b[r][2];
            }
            for col in r..8 {
                k[r][col] += w * (db[0] * b[col][0] + db[1] * b[col][1] + db[2] * b[col][2]);
            }
        }
    }
    for r in 0..8 {
        for col in 0..r {
            k[r][col] = k[col][r];
        }
    }
    Ok(k)
}

/// Stiffness `∫ D B u · B v` with a general per-Gauss-point coefficient.
pub fn assemble_elasticity_general(
    grid: &StructuredGrid,
    coef: impl Fn(usize, usize) -> QuadCoefficient + Sync,
) -> Result<CsrMatrix> {
    let shapes = [0, 1, 2, 3].map(|q| grid.shape_at_quad(q));
    let weight = grid.quad_weight();
    let elems: Vec<[[f64; 8]; 8]> = (0..grid.num_elements())
        .into_par_iter()
        .map(|e| element_elasticity(&shapes, weight, e, &coef))
        .collect::<Result<_>>()?;
    let mut a = CsrMatrix::grid_pattern(grid, 2);
    for (e, k) in elems.iter().enumerate() {
        let nodes = grid.element_nodes(e);
        for r in 0..8 {
            let gr = 2 * nodes[r / 2] + r % 2;
            for c in 0..8 {
                a.add(gr, 2 * nodes[c / 2] + c % 2, k[r][c]);
            }
        }
    }
    Ok(a)
}

/// Stiffness `∫ C(x) e(u) · e(v)` with `C` given per element and Gauss point.
pub fn assemble_elasticity(
    grid: &StructuredGrid,
    coef: impl Fn(usize, usize) -> Tensor4Sym + Sync,
) -> Result<CsrMatrix> {
    assemble_elasticity_general(grid, |e, q| QuadCoefficient::plain(coef(e, q)))
}

/// Element load vectors from a per-Gauss-point integrand returning the
/// weighted contribution for each local node, scattered in element order.
pub fn assemble_vector<const B: usize>(
    grid: &StructuredGrid,
    integrand: impl Fn(&QuadContext) -> [[f64; B]; 4] + Sync,
) -> Vec<f64> {
    let shapes = [0, 1, 2, 3].map(|q| grid.shape_at_quad(q));
    let weight = grid.quad_weight();
    let elems: Vec<[[f64; B]; 4]> = (0..grid.num_elements())
        .into_par_iter()
        .map(|e| {
            let mut out = [[0.0; B]; 4];
            for (q, s) in shapes.iter().enumerate() {
                let ctx = QuadContext {
                    e,
                    q,
                    x: grid.quad_point(e, q),
                    weight,
                    n: s.n,
                    grad: s.grad,
                };
                let c = integrand(&ctx);
                for a in 0..4 {
                    for i in 0..B {
                        out[a][i] += c[a][i];
                    }
                }
            }
            out
        })
        .collect();
    let mut v = vec![0.0; B * grid.num_nodes()];
    for (e, c) in elems.iter().enumerate() {
        for (a, &node) in grid.element_nodes(e).iter().enumerate() {
            for i in 0..B {
                v[B * node + i] += c[a][i];
            }
        }
    }
    v
}

/// Sum over Gauss points of a scalar integrand, in element order.
pub fn integrate_quad(
    grid: &StructuredGrid,
    integrand: impl Fn(&QuadContext) -> f64 + Sync,
) -> f64 {
    let shapes = [0, 1, 2, 3].map(|q| grid.shape_at_quad(q));
    let weight = grid.quad_weight();
    let per_elem: Vec<f64> = (0..grid.num_elements())
        .into_par_iter()
        .map(|e| {
            shapes
                .iter()
                .enumerate()
                .map(|(q, s)| {
                    integrand(&QuadContext {
                        e,
                        q,
                        x: grid.quad_point(e, q),
                        weight,
                        n: s.n,
                        grad: s.grad,
                    })
                })
                .sum()
        })
        .collect();
    per_elem.iter().sum()
}

/// Body load `∫ f · v` with `f` evaluated per Gauss point.
pub fn assemble_body_load(
    grid: &StructuredGrid,
    f: impl Fn(&QuadContext) -> [f64; 2] + Sync,
) -> Vec<f64> {
    assemble_vector::<2>(grid, |ctx| {
        let fv = f(ctx);
        let w = ctx.weight;
        ctx.n.map(|n| [w * n * fv[0], w * n * fv[1]])
    })
}

/// Traction load `∫_{Γ_N} g · v` with 2-point Gauss on every Neumann edge.
pub fn assemble_traction(mesh: &MacroMesh, g: impl Fn([f64; 2]) -> [f64; 2]) -> Vec<f64> {
    let grid = &mesh.grid;
    let mut v = vec![0.0; 2 * grid.num_nodes()];
    for edge in mesh.edges_with(EdgeTag::Neumann) {
        let [a, b] = mesh.edge_nodes(edge);
        let pa = grid.node_coords(a);
        let pb = grid.node_coords(b);
        let len = mesh.edge_length(edge);
        for &t in &super::grid::GAUSS_1D {
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let gv = g(x);
            let w = 0.5 * len;
            for (node, n) in [(a, 1.0 - t), (b, t)] {
                v[2 * node] += w * n * gv[0];
                v[2 * node + 1] += w * n * gv[1];
            }
        }
    }
    v
}

/// Scalar stiffness `∫ κ ∇u · ∇v`.
pub fn assemble_laplacian(
    grid: &StructuredGrid,
    kappa: impl Fn(usize, usize) -> f64 + Sync,
) -> CsrMatrix {
    assemble_scalar(
        grid,
        |s, a, b| s.grad[a][0] * s.grad[b][0] + s.grad[a][1] * s.grad[b][1],
        kappa,
    )
}

/// Consistent scalar mass `∫ ρ u v`.
pub fn assemble_mass(grid: &StructuredGrid, rho: impl Fn(usize, usize) -> f64 + Sync) -> CsrMatrix {
    assemble_scalar(grid, |s, a, b| s.n[a] * s.n[b], rho)
}

fn assemble_scalar(
    grid: &StructuredGrid,
    form: impl Fn(&ShapeEval, usize, usize) -> f64 + Sync,
    coef: impl Fn(usize, usize) -> f64 + Sync,
) -> CsrMatrix {
    let shapes = [0, 1, 2, 3].map(|q| grid.shape_at_quad(q));
    let weight = grid.quad_weight();
    let elems: Vec<[[f64; 4]; 4]> = (0..grid.num_elements())
        .into_par_iter()
        .map(|e| {
            let mut k = [[0.0; 4]; 4];
            for (q, s) in shapes.iter().enumerate() {
                let w = weight * coef(e, q);
                for a in 0..4 {
                    for b in a..4 {
                        k[a][b] += w * form(s, a, b);
                    }
                }
            }
            for a in 0..4 {
                for b in 0..a {
                    k[a][b] = k[b][a];
                }
            }
            k
        })
        .collect();
    let mut m = CsrMatrix::grid_pattern(grid, 1);
    for (e, k) in elems.iter().enumerate() {
        let nodes = grid.element_nodes(e);
        for a in 0..4 {
            for b in 0..4 {
                m.add(nodes[a], nodes[b], k[a][b]);
            }
        }
    }
    m
}

/// Row-sum lumped mass `∫ N_a`.
pub fn lumped_mass(grid: &StructuredGrid) -> Vec<f64> {
    assemble_vector::<1>(grid, |ctx| ctx.n.map(|n| [ctx.weight * n]))
}
