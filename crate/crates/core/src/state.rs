//! Macroscopic equilibrium with the homogenized tensor, compliance and cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_body_load, assemble_elasticity, assemble_traction};
use crate::fem::integrate::{h1_seminorm_sq, integral};
use crate::fem::sparse::{dot, CsrMatrix};
use crate::fem::{
    solve_spd, Constraint, DisplacementField, MacroMesh, PeriodicScalarField, ScalarField,
    SolveOptions, SolveReport,
};
use crate::homog::Coefficients;
use crate::tensor::Tensor4Sym;

/// Closed-form vector field used for body forces and tractions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VectorLoad {
    Zero,
    Constant {
        value: [f64; 2],
    },
    /// `b + A x`.
    Affine {
        b: [f64; 2],
        a: [[f64; 2]; 2],
    },
    /// `value` inside the closed box `[lo, hi]`, zero outside.
    Band {
        lo: [f64; 2],
        hi: [f64; 2],
        value: [f64; 2],
    },
    /// `amplitude · exp(−|x − center|² / width²)`.
    Gaussian {
        center: [f64; 2],
        width: f64,
        amplitude: [f64; 2],
    },
    Sum {
        terms: Vec<VectorLoad>,
    },
}

impl Default for VectorLoad {
    fn default() -> Self {
        VectorLoad::Zero
    }
}

impl VectorLoad {
    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        match self {
            VectorLoad::Zero => [0.0; 2],
            VectorLoad::Constant { value } => *value,
            VectorLoad::Affine { b, a } => [
                b[0] + a[0][0] * x[0] + a[0][1] * x[1],
                b[1] + a[1][0] * x[0] + a[1][1] * x[1],
            ],
            VectorLoad::Band { lo, hi, value } => {
                let inside = x[0] >= lo[0] && x[0] <= hi[0] && x[1] >= lo[1] && x[1] <= hi[1];
                if inside {
                    *value
                } else {
                    [0.0; 2]
                }
            }
            VectorLoad::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let r2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
                let k = (-r2 / (width * width)).exp();
                [k * amplitude[0], k * amplitude[1]]
            }
            VectorLoad::Sum { terms } => terms.iter().fold([0.0; 2], |acc, t| {
                let v = t.eval(x);
                [acc[0] + v[0], acc[1] + v[1]]
            }),
        }
    }

    /// `G[i][j] = ∂_j f_i` (zero inside bands; the jump is not represented).
    pub fn grad(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        match self {
            VectorLoad::Zero | VectorLoad::Constant { .. } | VectorLoad::Band { .. } => {
                [[0.0; 2]; 2]
            }
            VectorLoad::Affine { a, .. } => *a,
            VectorLoad::Gaussian {
                center,
                width,
                amplitude,
            } => {
                let d = [x[0] - center[0], x[1] - center[1]];
                let w2 = width * width;
                let k = (-(d[0] * d[0] + d[1] * d[1]) / w2).exp();
                let mut g = [[0.0; 2]; 2];
                for i in 0..2 {
                    for j in 0..2 {
                        g[i][j] = -2.0 * d[j] / w2 * k * amplitude[i];
                    }
                }
                g
            }
            VectorLoad::Sum { terms } => terms.iter().fold([[0.0; 2]; 2], |mut acc, t| {
                let g = t.grad(x);
                for i in 0..2 {
                    for j in 0..2 {
                        acc[i][j] += g[i][j];
                    }
                }
                acc
            }),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            VectorLoad::Zero => true,
            VectorLoad::Constant { value } | VectorLoad::Band { value, .. } => *value == [0.0; 2],
            VectorLoad::Affine { b, a } => *b == [0.0; 2] && *a == [[0.0; 2]; 2],
            VectorLoad::Gaussian { amplitude, .. } => *amplitude == [0.0; 2],
            VectorLoad::Sum { terms } => terms.iter().all(VectorLoad::is_zero),
        }
    }

    pub fn scaled(&self, k: f64) -> VectorLoad {
        let s = |v: &[f64; 2]| [k * v[0], k * v[1]];
        match self {
            VectorLoad::Zero => VectorLoad::Zero,
            VectorLoad::Constant { value } => VectorLoad::Constant { value: s(value) },
            VectorLoad::Affine { b, a } => VectorLoad::Affine {
                b: s(b),
                a: [s(&a[0]), s(&a[1])],
            },
            VectorLoad::Band { lo, hi, value } => VectorLoad::Band {
                lo: *lo,
                hi: *hi,
                value: s(value),
            },
            VectorLoad::Gaussian {
                center,
                width,
                amplitude,
            } => VectorLoad::Gaussian {
                center: *center,
                width: *width,
                amplitude: s(amplitude),
            },
            VectorLoad::Sum { terms } => VectorLoad::Sum {
                terms: terms.iter().map(|t| t.scaled(k)).collect(),
            },
        }
    }
}

/// Body force density per unit φ and traction on Γ_N.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadCase {
    #[serde(default)]
    pub f: VectorLoad,
    #[serde(default)]
    pub g: VectorLoad,
}

impl LoadCase {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.f.is_zero() && self.g.is_zero()
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            f: self.f.scaled(k),
            g: self.g.scaled(k),
        }
    }
}

/// Equilibrium displacement with its compliance and energy.
#[derive(Debug, Clone)]
pub struct StateSolution {
    pub u: DisplacementField,
    pub compliance: f64,
    /// Minimum of `½∫C* e(u)·e(u) − ∫φ f·u − ∫ g·u`.
    pub energy: f64,
    pub report: SolveReport,
}

/// The macroscopic boundary value problem on a tagged mesh.
#[derive(Debug, Clone)]
pub struct MacroProblem {
    pub mesh: MacroMesh,
    pub loads: LoadCase,
    pub opts: SolveOptions,
    dirichlet_dofs: Vec<usize>,
}

impl MacroProblem {
    pub fn new(mesh: MacroMesh, loads: LoadCase) -> Result<Self> {
        mesh.validate()?;
        let dirichlet_dofs = mesh
            .dirichlet_nodes()
            .into_iter()
            .flat_map(|n| [2 * n, 2 * n + 1])
            .collect();
        Ok(Self {
            mesh,
            loads,
            opts: SolveOptions::with_tol(1e-11),
            dirichlet_dofs,
        })
    }

    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet_dofs
    }

    pub fn with_loads(&self, loads: LoadCase) -> Self {
        Self {
            loads,
            ..self.clone()
        }
    }

    /// `F(v) = ∫ φ f·v + ∫_{Γ_N} g·v`.
    pub fn load_vector(&self, phi: &ScalarField) -> Vec<f64> {
        let grid = &self.mesh.grid;
        let mut v = if self.loads.f.is_zero() {
            vec![0.0; 2 * grid.num_nodes()]
        } else {
            assemble_body_load(grid, |ctx| {
                let p = phi.eval_quad(ctx.e, ctx.q);
                let f = self.loads.f.eval(ctx.x);
                [p * f[0], p * f[1]]
            })
        };
        if !self.loads.g.is_zero() {
            let t = assemble_traction(&self.mesh, |x| self.loads.g.eval(x));
            v.iter_mut().zip(&t).for_each(|(a, b)| *a += b);
        }
        v
    }

    /// Stiffness with `C*(φ(x_q))` at the Gauss points.
    pub fn stiffness(&self, phi: &ScalarField, coeffs: &Coefficients) -> Result<CsrMatrix> {
        coeffs.check_covers(phi)?;
        assemble_elasticity(&self.mesh.grid, |e, q| coeffs.cstar(phi.eval_quad(e, q)))
    }

    /// Solves `K u = rhs` with `u = 0` on Γ_D.
    pub fn solve_system(
        &self,
        k: &CsrMatrix,
        rhs: &[f64],
    ) -> Result<(DisplacementField, SolveReport)> {
        let (x, rep) = solve_spd(
            k,
            rhs,
            Constraint::DirichletEliminated(&self.dirichlet_dofs),
            self.opts,
            None,
        )?;
        Ok((DisplacementField::from_interleaved(self.mesh.grid, &x), rep))
    }

    /// Equilibrium for an arbitrary per-Gauss-point tensor.
    pub fn solve_with(
        &self,
        phi: &ScalarField,
        coef: impl Fn(usize, usize) -> Tensor4Sym + Sync,
    ) -> Result<StateSolution> {
        let k = assemble_elasticity(&self.mesh.grid, coef)?;
        self.finish(phi, &k)
    }

    pub fn solve_state(&self, phi: &ScalarField, coeffs: &Coefficients) -> Result<StateSolution> {
        check_phase(phi)?;
        let k = self.stiffness(phi, coeffs)?;
        self.finish(phi, &k)
    }

    fn finish(&self, phi: &ScalarField, k: &CsrMatrix) -> Result<StateSolution> {
        let rhs = self.load_vector(phi);
        let (u, report) = self.solve_system(k, &rhs)?;
        let x = u.to_interleaved();
        let compliance = dot(&rhs, &x);
        let energy = 0.5 * k.bilinear(&x, &x) - compliance;
        Ok(StateSolution {
            u,
            compliance,
            energy,
            report,
        })
    }

    /// `∫ φ f·u + ∫_{Γ_N} g·u`.
    pub fn compliance(&self, phi: &ScalarField, u: &DisplacementField) -> f64 {
        dot(&self.load_vector(phi), &u.to_interleaved())
    }

    /// `½∫C* e(v)·e(v) − ∫φ f·v − ∫ g·v` for any displacement.
    pub fn energy(
        &self,
        phi: &ScalarField,
        coeffs: &Coefficients,
        v: &DisplacementField,
    ) -> Result<f64> {
        let k = self.stiffness(phi, coeffs)?;
        let x = v.to_interleaved();
        Ok(0.5 * k.bilinear(&x, &x) - self.compliance(phi, v))
    }
}

fn check_phase(phi: &ScalarField) -> Result<()> {
    if !phi.within(0.0, 1.0, 1e-12) {
        return Err(Error::Contract(format!(
            "φ must lie in [0, 1], found [{}, {}]",
            phi.min(),
            phi.max()
        )));
    }
    Ok(())
}

/// Volume caps `∫_Ω φ ≤ V` and `∫_Y m ≤ W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Caps {
    pub volume: f64,
    pub micro: f64,
}

/// Weights of `½∫|∇φ|²` and `½∫_Y|∇m|²`; the unweighted functional has both
/// equal to ½.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegWeights {
    pub phi: f64,
    pub m: f64,
}

impl Default for RegWeights {
    fn default() -> Self {
        Self { phi: 0.5, m: 0.5 }
    }
}

impl RegWeights {
    pub fn is_default(&self) -> bool {
        *self == Self::default()
    }
}

/// Relative slack on volume integrals.
pub const VOLUME_TOL: f64 = 1e-10;

/// Whether `(φ, m)` lies in the admissible set.
pub fn is_admissible(phi: &ScalarField, m: &PeriodicScalarField, caps: &Caps) -> bool {
    let area = phi.grid.area();
    phi.within(0.0, 1.0, 1e-12)
        && m.within(1.0, 2.0, 1e-12)
        && integral(phi) <= caps.volume + VOLUME_TOL * area
        && integral(m) <= caps.micro + VOLUME_TOL * m.grid.area()
}

/// Breakdown of the homogenized cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostTerms {
    pub compliance: f64,
    pub reg_phi: f64,
    pub reg_m: f64,
    pub total: f64,
}

/// `compliance + w_m ∫_Y|∇m|² + w_φ ∫_Ω|∇φ|²`, or `+∞` outside the
/// admissible set.
pub fn eval_j(
    phi: &ScalarField,
    m: &PeriodicScalarField,
    compliance: f64,
    caps: &Caps,
    weights: &RegWeights,
) -> CostTerms {
    let reg_phi = weights.phi * h1_seminorm_sq(phi);
    let reg_m = weights.m * h1_seminorm_sq(m);
    let total = if is_admissible(phi, m, caps) {
        compliance + reg_phi + reg_m
    } else {
        f64::INFINITY
    };
    CostTerms {
        compliance,
        reg_phi,
        reg_m,
        total,
    }
}
