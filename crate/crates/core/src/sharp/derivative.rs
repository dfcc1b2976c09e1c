//! Shape derivatives of the sharp cost in the direction of a pair of
//! velocity fields `(Φ, Ψ)`, and the stationarity residual.
//!
//! Every formula is the exact `t`-derivative of the pulled-back discrete
//! problem in [`super::design`], evaluated with the same quadrature, so
//! difference quotients of transported states converge to it at first order.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::{boundary_tangent, MicroState, SharpDesign, SharpProblem, SharpState};
use super::interface::InterfacePolyline;
use super::variation::{Grad, VariationField};
use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_vector, integrate_quad, map_grad, shape_strain};
use crate::fem::grid::GAUSS_1D;
use crate::fem::{
    assemble_elasticity, solve_spd, Constraint, DisplacementField, EdgeTag, StructuredGrid,
    VectorField,
};
use crate::homog::cell::voigt_apply;
use crate::tensor::Tensor4Sym;

fn mul(a: &Grad, b: &Grad) -> Grad {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn transpose(a: &Grad) -> Grad {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

/// Engineering strain of `sym(H)`.
fn eng_sym(h: &Grad) -> [f64; 3] {
    [h[0][0], h[1][1], h[0][1] + h[1][0]]
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn apply(g: &Grad, v: [f64; 2]) -> [f64; 2] {
    [
        g[0][0] * v[0] + g[0][1] * v[1],
        g[1][0] * v[0] + g[1][1] * v[1],
    ]
}

fn tangential_stretch_rate(g: &Grad, tau: [f64; 2]) -> f64 {
    let gt = apply(g, tau);
    tau[0] * gt[0] + tau[1] * gt[1]
}

/// First variation of the cell problem along `Ψ`.
#[derive(Debug, Clone)]
pub struct MicroVariation {
    /// `z_a = d/dt (w_a(t)∘S_t)`.
    pub z: [VectorField; 3],
    /// `C̃* = d/dt C*(1, m∘S_t⁻¹)`.
    pub ctilde: Tensor4Sym,
}

/// Solves `∫ C e(z_a)·e(v) = ∫ C ε_a·sym(∇v∇Ψ) + ∫ C sym(∇w_a∇Ψ)·e(v)
/// − ∫ C ε_a·e(v) div Ψ` with `ε_a = e(w_a) + ê_a`, zero mean.
pub fn solve_z(micro: &MicroState, psi: &VariationField) -> Result<[VectorField; 3]> {
    let grid = *micro.cell.grid();
    if psi.is_zero() {
        return Ok([
            VectorField::zeros(grid),
            VectorField::zeros(grid),
            VectorField::zeros(grid),
        ]);
    }
    let coefs = micro.cell.coefficients(1.0);
    let k = assemble_elasticity(&grid, |e, q| coefs[4 * e + q].d)?;
    let cs = &micro.correctors;
    let out: Vec<VectorField> = (0..3)
        .into_par_iter()
        .map(|a| {
            let rhs = assemble_vector::<2>(&grid, |ctx| {
                let kq = 4 * ctx.e + ctx.q;
                let d = &coefs[kq].d;
                let sig = voigt_apply(d, &cs.strains[kq][a]);
                let gpsi = psi.grad(ctx.x);
                let gpsi_t = transpose(&gpsi);
                let div = gpsi[0][0] + gpsi[1][1];
                let tau = voigt_apply(d, &eng_sym(&mul(&cs.w[a].grad_quad(ctx.e, ctx.q), &gpsi)));
                let mut r = [[0.0; 2]; 4];
                for b in 0..4 {
                    let g = ctx.grad[b];
                    let gc = map_grad(&gpsi_t, g);
                    for i in 0..2 {
                        let ev = shape_strain(g, i);
                        let evc = shape_strain(gc, i);
                        r[b][i] = ctx.weight
                            * (dot3(&sig, &evc) + dot3(&tau, &ev) - div * dot3(&sig, &ev));
                    }
                }
                r
            });
            let (x, _) = solve_spd(
                &k,
                &rhs,
                Constraint::MeanZero { components: 2 },
                micro.cell.opts,
                None,
            )?;
            Ok(VectorField::from_interleaved(grid, &x))
        })
        .collect::<Result<_>>()?;
    Ok(out.try_into().expect("three fields"))
}

/// `C̃*_ab = ∫ C X_a·ε_b + C ε_a·X_b + C ε_a·ε_b div Ψ`, where
/// `X_a = e(z_a) − sym(∇w_a∇Ψ)`.
pub fn c_tilde(micro: &MicroState, psi: &VariationField, z: &[VectorField; 3]) -> Tensor4Sym {
    let grid = *micro.cell.grid();
    let cs = &micro.correctors;
    let coefs = micro.cell.coefficients(1.0);
    let wq = grid.quad_weight();
    let per_quad: Vec<[[f64; 3]; 3]> = (0..4 * grid.num_elements())
        .into_par_iter()
        .map(|k| {
            let (e, q) = (k / 4, k % 4);
            let d = &coefs[k].d;
            let gpsi = psi.grad(grid.quad_point(e, q));
            let div = gpsi[0][0] + gpsi[1][1];
            let x: [[f64; 3]; 3] = std::array::from_fn(|a| {
                let ez = z[a].strain_quad(e, q).engineering();
                let c = eng_sym(&mul(&cs.w[a].grad_quad(e, q), &gpsi));
                [ez[0] - c[0], ez[1] - c[1], ez[2] - c[2]]
            });
            let eps = &cs.strains[k];
            let mut r = [[0.0; 3]; 3];
            for a in 0..3 {
                let sa = voigt_apply(d, &eps[a]);
                let xa = voigt_apply(d, &x[a]);
                for b in a..3 {
                    r[a][b] =
                        wq * (dot3(&xa, &eps[b]) + dot3(&sa, &x[b]) + div * dot3(&sa, &eps[b]));
                }
            }
            r
        })
        .collect();
    let mut v = [[0.0; 3]; 3];
    for r in &per_quad {
        for a in 0..3 {
            for b in a..3 {
                v[a][b] += r[a][b];
            }
        }
    }
    for a in 0..3 {
        for b in 0..a {
            v[a][b] = v[b][a];
        }
    }
    Tensor4Sym { voigt: v }
}

pub fn micro_variation(micro: &MicroState, psi: &VariationField) -> Result<MicroVariation> {
    let z = solve_z(micro, psi)?;
    let ctilde = c_tilde(micro, psi, &z);
    Ok(MicroVariation { z, ctilde })
}

/// The terms of `J'_S(φ, m)[Φ, Ψ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeDerivative {
    /// `−∫ φ C̃* e(u)·e(u)`.
    pub ctilde: f64,
    /// `2∫ C* e(u)·(∇u∇Φ)`.
    pub convection: f64,
    /// `−∫ C* e(u)·e(u) div Φ`.
    pub dilation: f64,
    /// `2∫ φ (∇f Φ)·u + 2∫ φ f·u div Φ`.
    pub body: f64,
    /// `2∫_{Γ_N} (∇g Φ)·u + 2∫_{Γ_N} g·u (τ·∇Φ τ)`.
    pub traction: f64,
    /// `c_H ∫ div_Γ Φ` over the macro interface.
    pub perimeter_phi: f64,
    /// `c_H ∫ div_Γ Ψ` over the cell interface.
    pub perimeter_m: f64,
    pub total: f64,
}

fn state_tensor(state: &SharpState, sp: &SharpProblem, k: usize) -> Tensor4Sym {
    if state.phi_samples[k] == 1.0 {
        state.micro.cstar
    } else {
        sp.material.c2
    }
}

/// Neumann-edge Gauss points with weights and unit tangents.
fn traction_points(sp: &SharpProblem) -> Vec<([f64; 2], f64, [f64; 2])> {
    let mesh = &sp.problem.mesh;
    let grid = &mesh.grid;
    let mut out = Vec::new();
    for edge in mesh.edges_with(EdgeTag::Neumann) {
        let [a, b] = mesh.edge_nodes(edge);
        let pa = grid.node_coords(a);
        let pb = grid.node_coords(b);
        let w = 0.5 * mesh.edge_length(edge);
        for &t in &GAUSS_1D {
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            out.push((x, w, boundary_tangent(mesh.lx(), mesh.ly(), x)));
        }
    }
    out
}

/// `d/dt J_S(φ∘T_t⁻¹, m∘S_t⁻¹)` at `t = 0` for the state of `design`.
pub fn shape_derivative(
    sp: &SharpProblem,
    design: &SharpDesign,
    state: &SharpState,
    phi: &VariationField,
    psi: &VariationField,
) -> Result<ShapeDerivative> {
    if state.t != 0.0 {
        return Err(Error::Contract(
            "shape derivative needs the untransported state".into(),
        ));
    }
    let mv = micro_variation(&state.micro, psi)?;
    let grid = sp.problem.mesh.grid;
    let loads = &sp.problem.loads;
    let u = &state.u;
    let terms: Vec<[f64; 4]> = (0..4 * grid.num_elements())
        .into_par_iter()
        .map(|k| {
            let (e, q) = (k / 4, k % 4);
            let x = grid.quad_point(e, q);
            let p = state.phi_samples[k];
            let d = state_tensor(state, sp, k);
            let eu = u.strain_quad(e, q).engineering();
            let gphi = phi.grad(x);
            let div = gphi[0][0] + gphi[1][1];
            let conv = eng_sym(&mul(&u.grad_quad(e, q), &gphi));
            let body = if p == 0.0 || loads.f.is_zero() {
                0.0
            } else {
                let uq = u.eval_local(e, StructuredGrid::quad_ref(q));
                let f = loads.f.eval(x);
                let gf = apply(&loads.f.grad(x), phi.eval(x));
                2.0 * p * ((gf[0] + div * f[0]) * uq[0] + (gf[1] + div * f[1]) * uq[1])
            };
            [
                -p * mv.ctilde.quad_form(&eu, &eu),
                2.0 * d.quad_form(&eu, &conv),
                -d.quad_form(&eu, &eu) * div,
                body,
            ]
        })
        .collect();
    let wq = grid.quad_weight();
    let sum = |i: usize| wq * terms.iter().map(|t| t[i]).sum::<f64>();

    let traction = if loads.g.is_zero() {
        0.0
    } else {
        traction_points(sp)
            .iter()
            .map(|&(x, w, tau)| {
                let uq = u.eval(x);
                let g = loads.g.eval(x);
                let gphi = phi.grad(x);
                let dg = apply(&loads.g.grad(x), phi.eval(x));
                let s = tangential_stretch_rate(&gphi, tau);
                2.0 * w * ((dg[0] + s * g[0]) * uq[0] + (dg[1] + s * g[1]) * uq[1])
            })
            .sum()
    };
    let c_h = sp.well.c_h();
    let perimeter_phi = c_h * perimeter_variation(&design.phi_interface(), phi);
    let perimeter_m = c_h * perimeter_variation(&design.m_interface(), psi);
    let (ctilde, convection, dilation, body) = (sum(0), sum(1), sum(2), sum(3));
    let total = ctilde + convection + dilation + body + traction + perimeter_phi + perimeter_m;
    Ok(ShapeDerivative {
        ctilde,
        convection,
        dilation,
        body,
        traction,
        perimeter_phi,
        perimeter_m,
        total,
    })
}

/// `∫ (div V − ν·∇V ν) ds` over a polyline. On a straight segment the
/// integrand is `τ·∂_s V`, so each segment contributes `τ·(V(b) − V(a))`
/// exactly; this is also the exact rate of the transported polyline length.
pub fn perimeter_variation(poly: &InterfacePolyline, field: &VariationField) -> f64 {
    poly.segments
        .iter()
        .map(|s| {
            let t = s.tangent();
            let (va, vb) = (field.eval(s.a), field.eval(s.b));
            t[0] * (vb[0] - va[0]) + t[1] * (vb[1] - va[1])
        })
        .sum()
}

/// `u' = d/dt (u(t)∘T_t)`: solves `K u' = F' − K'u` with `u' = 0` on Γ_D,
/// where `K'` and `F'` are the derivatives of the pulled-back stiffness and
/// load.
pub fn transported_sensitivity(
    sp: &SharpProblem,
    state: &SharpState,
    phi: &VariationField,
    psi: &VariationField,
) -> Result<DisplacementField> {
    let mv = micro_variation(&state.micro, psi)?;
    let grid = sp.problem.mesh.grid;
    let loads = &sp.problem.loads;
    let u = &state.u;
    let k = assemble_elasticity(&grid, |e, q| state_tensor(state, sp, 4 * e + q))?;
    let mut rhs = assemble_vector::<2>(&grid, |ctx| {
        let kq = 4 * ctx.e + ctx.q;
        let p = state.phi_samples[kq];
        let d = state_tensor(state, sp, kq);
        let eu = u.strain_quad(ctx.e, ctx.q).engineering();
        let gphi = phi.grad(ctx.x);
        let gphi_t = transpose(&gphi);
        let div = gphi[0][0] + gphi[1][1];
        let conv = eng_sym(&mul(&u.grad_quad(ctx.e, ctx.q), &gphi));
        let fprime = if p == 0.0 || loads.f.is_zero() {
            [0.0; 2]
        } else {
            let f = loads.f.eval(ctx.x);
            let gf = apply(&loads.f.grad(ctx.x), phi.eval(ctx.x));
            [p * (gf[0] + div * f[0]), p * (gf[1] + div * f[1])]
        };
        let mut r = [[0.0; 2]; 4];
        for b in 0..4 {
            let g = ctx.grad[b];
            let gc = map_grad(&gphi_t, g);
            for i in 0..2 {
                let ez = shape_strain(g, i);
                let ezc = shape_strain(gc, i);
                let kprime = p * mv.ctilde.quad_form(&eu, &ez)
                    - d.quad_form(&conv, &ez)
                    - d.quad_form(&eu, &ezc)
                    + div * d.quad_form(&eu, &ez);
                r[b][i] = ctx.weight * (ctx.n[b] * fprime[i] - kprime);
            }
        }
        r
    });
    if !loads.g.is_zero() {
        let mesh = &sp.problem.mesh;
        let gr = &mesh.grid;
        for edge in mesh.edges_with(EdgeTag::Neumann) {
            let [a, b] = mesh.edge_nodes(edge);
            let pa = gr.node_coords(a);
            let pb = gr.node_coords(b);
            let w = 0.5 * mesh.edge_length(edge);
            for &t in &GAUSS_1D {
                let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                let tau = boundary_tangent(mesh.lx(), mesh.ly(), x);
                let g = loads.g.eval(x);
                let dg = apply(&loads.g.grad(x), phi.eval(x));
                let s = tangential_stretch_rate(&phi.grad(x), tau);
                for (node, n) in [(a, 1.0 - t), (b, t)] {
                    rhs[2 * node] += w * n * (dg[0] + s * g[0]);
                    rhs[2 * node + 1] += w * n * (dg[1] + s * g[1]);
                }
            }
        }
    }
    Ok(sp.problem.solve_system(&k, &rhs)?.0)
}

/// `(∫_Ω φ div Φ, ∫_Y m div Ψ)`: the rates of the two volume constraints.
pub fn volume_rates(
    design: &SharpDesign,
    phi: &VariationField,
    psi: &VariationField,
) -> (f64, f64) {
    let samples = design.phi_samples();
    let m = design.m_samples();
    let a = integrate_quad(&design.phi_level.grid, |ctx| {
        ctx.weight * samples[4 * ctx.e + ctx.q] * phi.div(ctx.x)
    });
    let b = integrate_quad(&design.m_level.grid, |ctx| {
        ctx.weight * m.at(ctx.e, ctx.q) * psi.div(ctx.x)
    });
    (a, b)
}

/// One direction of the stationarity test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmtoRow {
    pub derivative: f64,
    pub phi_rate: f64,
    pub m_rate: f64,
}

/// `J'_S[Φ, Ψ] + λ ∫_Ω φ div Φ + μ ∫_Y m div Ψ`.
pub fn smto_residual(row: &SmtoRow, lambda: f64, mu: f64) -> f64 {
    row.derivative + lambda * row.phi_rate + mu * row.m_rate
}

/// Multipliers minimizing the residuals over a set of directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierFit {
    pub lambda: f64,
    pub mu: f64,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Least-squares `(λ, μ)` by SVD; a direction set that does not move a
/// volume leaves the corresponding multiplier at zero (minimum norm).
pub fn fit_multipliers(rows: &[SmtoRow]) -> Result<MultiplierFit> {
    if rows.is_empty() {
        return Err(Error::Config(
            "multiplier fit needs at least one direction".into(),
        ));
    }
    let a = DMatrix::from_fn(rows.len(), 2, |i, j| {
        if j == 0 {
            rows[i].phi_rate
        } else {
            rows[i].m_rate
        }
    });
    let b = DVector::from_iterator(rows.len(), rows.iter().map(|r| -r.derivative));
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let x = a
        .svd(true, true)
        .solve(&b, 1e-12 * scale)
        .map_err(|e| Error::Contract(format!("multiplier fit failed: {e}")))?;
    let (lambda, mu) = (x[0], x[1]);
    let residuals: Vec<f64> = rows.iter().map(|r| smto_residual(r, lambda, mu)).collect();
    let max_residual = residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    Ok(MultiplierFit {
        lambda,
        mu,
        residuals,
        max_residual,
    })
}

/// Directional derivative and volume rates for each `(Φ, Ψ)` pair.
pub fn smto_rows(
    sp: &SharpProblem,
    design: &SharpDesign,
    state: &SharpState,
    directions: &[(VariationField, VariationField)],
) -> Result<Vec<SmtoRow>> {
    directions
        .iter()
        .map(|(phi, psi)| {
            let d = shape_derivative(sp, design, state, phi, psi)?;
            let (phi_rate, m_rate) = volume_rates(design, phi, psi);
            Ok(SmtoRow {
                derivative: d.total,
                phi_rate,
                m_rate,
            })
        })
        .collect()
}
