//! Closed-form velocity fields for shape variations, with analytic gradients.
//!
//! Fields are autonomous (`Φ(t, x) = Φ(x)`). Compact bumps use the profile
//! `(1 − r²/R²)⁴`, which is `C³` across `r = R`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::interface::Domain;
use crate::fem::{EdgeTag, MacroMesh, Side};

/// Gradients use `G[i][j] = ∂_j V_i`.
pub type Grad = [[f64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VelocityKind {
    Zero,
    /// Rigid translation.
    Constant {
        value: [f64; 2],
    },
    /// `A (x − x₀)`.
    Linear {
        a: Grad,
        origin: [f64; 2],
    },
    /// `amp · (x − c) (1 − |x − c|²/R²)⁴`, a compact expansion.
    Radial {
        center: [f64; 2],
        radius: f64,
        amp: f64,
    },
    /// `∇⊥` of the compact stream function `amp R² (1 − |x − c|²/R²)⁴`,
    /// divergence free.
    Swirl {
        center: [f64; 2],
        radius: f64,
        amp: f64,
    },
    /// `amp · sin(πx₁/l₁) sin(πx₂/l₂)` on `[0, l₁] × [0, l₂]`; vanishes on
    /// the whole boundary.
    SineBump {
        amp: [f64; 2],
        size: [f64; 2],
    },
    /// Divergence-free periodic swirl on the unit cell,
    /// `amp · (π sin²(πy₁) sin(2πy₂), −π sin(2πy₁) sin²(πy₂))`.
    PeriodicSwirl {
        amp: f64,
    },
    /// Periodic expansion on the unit cell,
    /// `(a₁ sin(2πy₁)(1 + ½cos 2πy₂), a₂ sin(2πy₂)(1 + ½cos 2πy₁))`.
    PeriodicSine {
        amp: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VariationField {
    pub kind: VelocityKind,
    pub domain: Domain,
}

fn bump(x: [f64; 2], c: [f64; 2], r: f64) -> Option<([f64; 2], f64)> {
    let d = [x[0] - c[0], x[1] - c[1]];
    let s = (d[0] * d[0] + d[1] * d[1]) / (r * r);
    (s < 1.0).then_some((d, 1.0 - s))
}

impl VariationField {
    pub fn new(kind: VelocityKind, domain: Domain) -> Self {
        Self { kind, domain }
    }

    pub fn on_omega(kind: VelocityKind) -> Self {
        Self::new(kind, Domain::Omega)
    }

    pub fn on_cell(kind: VelocityKind) -> Self {
        Self::new(kind, Domain::Cell)
    }

    pub fn zero(domain: Domain) -> Self {
        Self::new(VelocityKind::Zero, domain)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, VelocityKind::Zero)
    }

    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        match self.kind {
            VelocityKind::Zero => [0.0; 2],
            VelocityKind::Constant { value } => value,
            VelocityKind::Linear { a, origin } => {
                let d = [x[0] - origin[0], x[1] - origin[1]];
                [
                    a[0][0] * d[0] + a[0][1] * d[1],
                    a[1][0] * d[0] + a[1][1] * d[1],
                ]
            }
            VelocityKind::Radial {
                center,
                radius,
                amp,
            } => match bump(x, center, radius) {
                Some((d, q)) => {
                    let b = amp * q.powi(4);
                    [b * d[0], b * d[1]]
                }
                None => [0.0; 2],
            },
            VelocityKind::Swirl {
                center,
                radius,
                amp,
            } => match bump(x, center, radius) {
                Some((d, q)) => {
                    let b = -8.0 * amp * q.powi(3);
                    [b * d[1], -b * d[0]]
                }
                None => [0.0; 2],
            },
            VelocityKind::SineBump { amp, size } => {
                let s = (PI * x[0] / size[0]).sin() * (PI * x[1] / size[1]).sin();
                [amp[0] * s, amp[1] * s]
            }
            VelocityKind::PeriodicSwirl { amp } => {
                let (s1, s2) = ((PI * x[0]).sin(), (PI * x[1]).sin());
                [
                    amp * PI * s1 * s1 * (2.0 * PI * x[1]).sin(),
                    -amp * PI * (2.0 * PI * x[0]).sin() * s2 * s2,
                ]
            }
            VelocityKind::PeriodicSine { amp } => {
                let (t1, t2) = (2.0 * PI * x[0], 2.0 * PI * x[1]);
                [
                    amp[0] * t1.sin() * (1.0 + 0.5 * t2.cos()),
                    amp[1] * t2.sin() * (1.0 + 0.5 * t1.cos()),
                ]
            }
        }
    }

    pub fn grad(&self, x: [f64; 2]) -> Grad {
        match self.kind {
            VelocityKind::Zero | VelocityKind::Constant { .. } => [[0.0; 2]; 2],
            VelocityKind::Linear { a, .. } => a,
            VelocityKind::Radial {
                center,
                radius,
                amp,
            } => match bump(x, center, radius) {
                Some((d, q)) => {
                    let b = amp * q.powi(4);
                    let db = -8.0 * amp * q.powi(3) / (radius * radius);
                    let mut g = [[0.0; 2]; 2];
                    for i in 0..2 {
                        for j in 0..2 {
                            g[i][j] = if i == j { b } else { 0.0 } + db * d[i] * d[j];
                        }
                    }
                    g
                }
                None => [[0.0; 2]; 2],
            },
            VelocityKind::Swirl {
                center,
                radius,
                amp,
            } => match bump(x, center, radius) {
                Some((d, q)) => {
                    // V = b (d₂, −d₁) with b = −8 amp q³, ∂_j b = 48 amp q² d_j / R².
                    let b = -8.0 * amp * q.powi(3);
                    let db = [
                        48.0 * amp * q * q * d[0] / (radius * radius),
                        48.0 * amp * q * q * d[1] / (radius * radius),
                    ];
                    [
                        [db[0] * d[1], db[1] * d[1] + b],
                        [-db[0] * d[0] - b, -db[1] * d[0]],
                    ]
                }
                None => [[0.0; 2]; 2],
            },
            VelocityKind::SineBump { amp, size } => {
                let (k1, k2) = (PI / size[0], PI / size[1]);
                let (s1, c1) = (k1 * x[0]).sin_cos();
                let (s2, c2) = (k2 * x[1]).sin_cos();
                let d = [k1 * c1 * s2, k2 * s1 * c2];
                [
                    [amp[0] * d[0], amp[0] * d[1]],
                    [amp[1] * d[0], amp[1] * d[1]],
                ]
            }
            VelocityKind::PeriodicSwirl { amp } => {
                let (s1, c1) = (PI * x[0]).sin_cos();
                let (s2, c2) = (PI * x[1]).sin_cos();
                let (t1, t2) = ((2.0 * PI * x[0]).sin(), (2.0 * PI * x[1]).sin());
                let (u1, u2) = ((2.0 * PI * x[0]).cos(), (2.0 * PI * x[1]).cos());
                [
                    [
                        amp * PI * PI * 2.0 * s1 * c1 * t2,
                        amp * PI * s1 * s1 * 2.0 * PI * u2,
                    ],
                    [
                        -amp * PI * 2.0 * PI * u1 * s2 * s2,
                        -amp * PI * PI * t1 * 2.0 * s2 * c2,
                    ],
                ]
            }
            VelocityKind::PeriodicSine { amp } => {
                let (t1, t2) = (2.0 * PI * x[0], 2.0 * PI * x[1]);
                let k = 2.0 * PI;
                [
                    [
                        amp[0] * k * t1.cos() * (1.0 + 0.5 * t2.cos()),
                        -amp[0] * t1.sin() * 0.5 * k * t2.sin(),
                    ],
                    [
                        -amp[1] * t2.sin() * 0.5 * k * t1.sin(),
                        amp[1] * k * t2.cos() * (1.0 + 0.5 * t1.cos()),
                    ],
                ]
            }
        }
    }

    pub fn div(&self, x: [f64; 2]) -> f64 {
        let g = self.grad(x);
        g[0][0] + g[1][1]
    }

    /// `τ·∇V τ = div V − ν·∇V ν` for the unit tangent `τ ⊥ ν`.
    pub fn tangential_div(&self, x: [f64; 2], nu: [f64; 2]) -> f64 {
        let g = self.grad(x);
        let gn = [
            g[0][0] * nu[0] + g[0][1] * nu[1],
            g[1][0] * nu[0] + g[1][1] * nu[1],
        ];
        g[0][0] + g[1][1] - (nu[0] * gn[0] + nu[1] * gn[1])
    }
}

/// One sampled admissibility condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub condition: String,
    pub passed: bool,
    pub how: String,
}

/// Which admissibility conditions a field passed, and how they were checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub checks: Vec<Check>,
}

impl Certificate {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn passed(&self, condition: &str) -> bool {
        self.checks
            .iter()
            .any(|c| c.condition == condition && c.passed)
    }

    fn push(&mut self, condition: &str, passed: bool, how: impl Into<String>) {
        self.checks.push(Check {
            condition: condition.into(),
            passed,
            how: how.into(),
        });
    }
}

const SAMPLES: usize = 64;
const CERT_TOL: f64 = 1e-12;

/// Largest `|∇V|` on a sample lattice; bounded means Lipschitz.
fn lipschitz_bound(field: &VariationField, size: [f64; 2]) -> f64 {
    let mut l: f64 = 0.0;
    for i in 0..=SAMPLES {
        for j in 0..=SAMPLES {
            let x = [
                size[0] * i as f64 / SAMPLES as f64,
                size[1] * j as f64 / SAMPLES as f64,
            ];
            let g = field.grad(x);
            l = l.max(
                (g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2)).sqrt(),
            );
        }
    }
    l
}

/// Boundary sample points of a rectangle with their outer normals.
fn boundary_samples(size: [f64; 2]) -> Vec<([f64; 2], [f64; 2])> {
    let mut out = Vec::new();
    for k in 0..=SAMPLES {
        let s = k as f64 / SAMPLES as f64;
        out.push(([s * size[0], 0.0], [0.0, -1.0]));
        out.push(([s * size[0], size[1]], [0.0, 1.0]));
        out.push(([0.0, s * size[1]], [-1.0, 0.0]));
        out.push(([size[0], s * size[1]], [1.0, 0.0]));
    }
    out
}

/// Samples the conditions for a variation of `φ` on the tagged mesh.
pub fn certify_phi(field: &VariationField, mesh: &MacroMesh) -> Certificate {
    let mut c = Certificate { checks: Vec::new() };
    let size = [mesh.lx(), mesh.ly()];
    c.push(
        "Phi0",
        field.domain == Domain::Omega,
        "closed form, smooth by construction",
    );
    let lip = lipschitz_bound(field, size);
    c.push(
        "Phi1",
        lip.is_finite(),
        format!("max |∇Φ| = {lip:.3e} on a {SAMPLES}² lattice"),
    );
    let worst = boundary_samples(size)
        .iter()
        .map(|(x, n)| {
            let v = field.eval(*x);
            (v[0] * n[0] + v[1] * n[1]).abs()
        })
        .fold(0.0, f64::max);
    c.push(
        "Phi2",
        worst <= CERT_TOL,
        format!(
            "max |Φ·ν| = {worst:.1e} at {} boundary points",
            4 * (SAMPLES + 1)
        ),
    );

    let mut worst_d: f64 = 0.0;
    let mut worst_n: f64 = 0.0;
    for side in Side::ALL {
        let t = side.tangent();
        for k in 0..mesh.edges_on(side) {
            let edge = crate::fem::BoundaryEdge { side, index: k };
            let [a, b] = mesh.edge_nodes(edge);
            let (pa, pb) = (mesh.grid.node_coords(a), mesh.grid.node_coords(b));
            match mesh.tag(side, k) {
                EdgeTag::Dirichlet => {
                    for s in 0..=4 {
                        let s = s as f64 / 4.0;
                        let v =
                            field.eval([pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]);
                        worst_d = worst_d.max(v[0].abs().max(v[1].abs()));
                    }
                }
                EdgeTag::Neumann => {
                    // Endpoints of Γ_N: an endpoint is relative boundary when
                    // the neighbouring edge on the same side is not Neumann.
                    let prev = k == 0 || mesh.tag(side, k - 1) != EdgeTag::Neumann;
                    let next =
                        k + 1 == mesh.edges_on(side) || mesh.tag(side, k + 1) != EdgeTag::Neumann;
                    for (is_end, p) in [(prev, pa), (next, pb)] {
                        if is_end {
                            let v = field.eval(p);
                            worst_n = worst_n.max((v[0] * t[0] + v[1] * t[1]).abs());
                        }
                    }
                }
                EdgeTag::Free => {}
            }
        }
    }
    c.push(
        "Phi3",
        worst_d <= CERT_TOL,
        format!("max |Φ| = {worst_d:.1e} sampled on Γ_D"),
    );
    c.push(
        "Phi4",
        worst_n <= CERT_TOL,
        format!("max |Φ·n_ΓN| = {worst_n:.1e} at the endpoints of Γ_N"),
    );
    c
}

/// Samples the conditions for a variation of `m` on the unit cell. Beyond
/// the stated conditions, the field and its gradient are required to match
/// across the periodic seam.
pub fn certify_m(field: &VariationField) -> Certificate {
    let mut c = Certificate { checks: Vec::new() };
    let mut seam: f64 = 0.0;
    for k in 0..=SAMPLES {
        let s = k as f64 / SAMPLES as f64;
        for (p, q) in [([0.0, s], [1.0, s]), ([s, 0.0], [s, 1.0])] {
            let (a, b) = (field.eval(p), field.eval(q));
            let (ga, gb) = (field.grad(p), field.grad(q));
            seam = seam.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
            for i in 0..2 {
                for j in 0..2 {
                    seam = seam.max((ga[i][j] - gb[i][j]).abs());
                }
            }
        }
    }
    c.push(
        "Psi0",
        field.domain == Domain::Cell && seam <= 1e-10,
        format!("closed form; value and gradient mismatch across the seam {seam:.1e}"),
    );
    let lip = lipschitz_bound(field, [1.0, 1.0]);
    c.push(
        "Psi1",
        lip.is_finite(),
        format!("max |∇Ψ| = {lip:.3e} on a {SAMPLES}² lattice"),
    );
    let worst = boundary_samples([1.0, 1.0])
        .iter()
        .map(|(x, n)| {
            let v = field.eval(*x);
            (v[0] * n[0] + v[1] * n[1]).abs()
        })
        .fold(0.0, f64::max);
    c.push(
        "Psi2",
        worst <= CERT_TOL,
        format!(
            "max |Ψ·ν_Y| = {worst:.1e} at {} points of ∂Y",
            4 * (SAMPLES + 1)
        ),
    );
    c
}
