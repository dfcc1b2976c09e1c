//! Flow maps `∂_t T_t = Φ(T_t)`, `T_0 = Id`, integrated with RK4 together
//! with the variational equation `∂_t ∇T_t = ∇Φ(T_t) ∇T_t`.

use super::variation::{Grad, VariationField};

/// RK4 substeps for time `t`.
pub fn substeps(t: f64) -> usize {
    8usize.max((64.0 * t.abs()).ceil() as usize)
}

/// Position and deformation gradient `∇T_t` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowPoint {
    pub x: [f64; 2],
    pub f: Grad,
}

impl FlowPoint {
    pub fn det(&self) -> f64 {
        self.f[0][0] * self.f[1][1] - self.f[0][1] * self.f[1][0]
    }

    pub fn inverse(&self) -> Grad {
        let d = self.det();
        [
            [self.f[1][1] / d, -self.f[0][1] / d],
            [-self.f[1][0] / d, self.f[0][0] / d],
        ]
    }

    /// Stretch `|∇T_t τ|` of a unit tangent.
    pub fn stretch(&self, tau: [f64; 2]) -> f64 {
        let v = [
            self.f[0][0] * tau[0] + self.f[0][1] * tau[1],
            self.f[1][0] * tau[0] + self.f[1][1] * tau[1],
        ];
        (v[0] * v[0] + v[1] * v[1]).sqrt()
    }
}

fn mat_mul(a: &Grad, b: &Grad) -> Grad {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn rhs(field: &VariationField, x: [f64; 2], f: &Grad) -> ([f64; 2], Grad) {
    (field.eval(x), mat_mul(&field.grad(x), f))
}

fn shift(p: &FlowPoint, k: &([f64; 2], Grad), h: f64) -> FlowPoint {
    let mut q = *p;
    for i in 0..2 {
        q.x[i] += h * k.0[i];
        for j in 0..2 {
            q.f[i][j] += h * k.1[i][j];
        }
    }
    q
}

/// `T_t(x)` and `∇T_t(x)`.
pub fn flow_point(field: &VariationField, x: [f64; 2], t: f64) -> FlowPoint {
    let mut p = FlowPoint {
        x,
        f: [[1.0, 0.0], [0.0, 1.0]],
    };
    if field.is_zero() || t == 0.0 {
        return p;
    }
    let n = substeps(t);
    let h = t / n as f64;
    for _ in 0..n {
        let k1 = rhs(field, p.x, &p.f);
        let p2 = shift(&p, &k1, 0.5 * h);
        let k2 = rhs(field, p2.x, &p2.f);
        let p3 = shift(&p, &k2, 0.5 * h);
        let k3 = rhs(field, p3.x, &p3.f);
        let p4 = shift(&p, &k3, h);
        let k4 = rhs(field, p4.x, &p4.f);
        for i in 0..2 {
            p.x[i] += h / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]);
            for j in 0..2 {
                p.f[i][j] +=
                    h / 6.0 * (k1.1[i][j] + 2.0 * k2.1[i][j] + 2.0 * k3.1[i][j] + k4.1[i][j]);
            }
        }
    }
    p
}

/// `T_t` applied to a batch of points.
pub fn flow(points: &[[f64; 2]], field: &VariationField, t: f64) -> Vec<[f64; 2]> {
    points.iter().map(|&x| flow_point(field, x, t).x).collect()
}
