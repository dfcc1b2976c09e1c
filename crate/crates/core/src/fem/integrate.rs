//! Quadrature of nodal fields.

use super::field::ScalarField;

/// `∫ |∇u_h|²` of the Q1 interpolant (2×2 Gauss, exact for Q1).
pub fn h1_seminorm_sq(field: &ScalarField) -> f64 {
    let g = &field.grid;
    let w = g.quad_weight();
    let mut s = 0.0;
    for e in 0..g.num_elements() {
        for q in 0..4 {
            let d = field.grad_quad(e, q);
            s += w * (d[0] * d[0] + d[1] * d[1]);
        }
    }
    s
}

/// `∫ u_h`.
pub fn integral(field: &ScalarField) -> f64 {
    let g = &field.grid;
    let w = g.quad_weight();
    let mut s = 0.0;
    for e in 0..g.num_elements() {
        for q in 0..4 {
            s += w * field.eval_quad(e, q);
        }
    }
    s
}

/// `⨍ u_h`.
pub fn mean(field: &ScalarField) -> f64 {
    integral(field) / field.grid.area()
}

/// `∫ F(u_h)` for a pointwise function `F` (2×2 Gauss).
pub fn integral_of(field: &ScalarField, f: impl Fn(f64) -> f64) -> f64 {
    let g = &field.grid;
    let w = g.quad_weight();
    let mut s = 0.0;
    for e in 0..g.num_elements() {
        for q in 0..4 {
            s += w * f(field.eval_quad(e, q));
        }
    }
    s
}
