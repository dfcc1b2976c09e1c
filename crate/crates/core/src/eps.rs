//! Finite-ε functionals and numerical Γ-convergence sweeps.
//!
//! At scale ε the coefficient is `C(φ(x), m(x/ε))`. Only exact tilings are
//! admitted (each side of Ω a whole number of ε-cells), so cell averages such
//! as `⨍_Ω F(x/ε)` coincide with `∫_Y F` up to quadrature.
//!
//! The Modica–Mortola terms use the normalization
//! `(ε/2)∫|∇φ|² + (1/ε)∫H(φ)`, whose 1D optimal transition energy is
//! `c_H = ∫₀¹√(2H)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::integrate::{h1_seminorm_sq, integral_of};
use crate::fem::{CellMesh, MacroMesh, PeriodicScalarField, ScalarField, StructuredGrid};
use crate::homog::{CStarTable, CellProblem, Coefficients};
use crate::state::{
    eval_j, is_admissible, Caps, CostTerms, MacroProblem, RegWeights, StateSolution,
};
use crate::tensor::Material;

/// `H(t) = scale · t²(1−t)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoubleWell {
    pub scale: f64,
}

impl Default for DoubleWell {
    fn default() -> Self {
        Self { scale: 1.0 }
    }
}

impl DoubleWell {
    pub fn new(scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Parameter(format!(
                "double-well scale must be positive, got {scale}"
            )));
        }
        Ok(Self { scale })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let a = t * (1.0 - t);
        self.scale * a * a
    }

    pub fn deriv(&self, t: f64) -> f64 {
        2.0 * self.scale * t * (1.0 - t) * (1.0 - 2.0 * t)
    }

    pub fn second(&self, t: f64) -> f64 {
        2.0 * self.scale * (1.0 - 6.0 * t + 6.0 * t * t)
    }

    /// `∫₀¹ √(2H)` by composite Gauss–Legendre quadrature.
    pub fn c_h(&self) -> f64 {
        const X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
        const W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let n = 64;
        let h = 1.0 / n as f64;
        let mut s = 0.0;
        for k in 0..n {
            let mid = (k as f64 + 0.5) * h;
            for (x, w) in X.iter().zip(W) {
                s += 0.5 * h * w * (2.0 * self.eval(mid + 0.5 * h * x)).sqrt();
            }
        }
        s
    }

    /// Optimal transition profile: solves `p' = √(2H(p))`, `p(0) = ½`.
    pub fn profile(&self, t: f64) -> f64 {
        1.0 / (1.0 + (-(2.0 * self.scale).sqrt() * t).exp())
    }
}

/// `(ε/2)∫|∇f|² + (1/ε)∫H(f)` of a nodal field (2×2 Gauss).
pub fn mm_energy(field: &ScalarField, eps: f64, dw: &DoubleWell) -> f64 {
    0.5 * eps * h1_seminorm_sq(field) + integral_of(field, |t| dw.eval(t)) / eps
}

/// Minimizes the discrete 1D Modica–Mortola energy on `[0, length]` with
/// `p(0) = 0`, `p(length) = 1` over P1 elements, using the same two-point
/// Gauss rule as the 2D evaluation. Returns nodal values.
pub fn optimal_profile_1d(eps: f64, dw: &DoubleWell, length: f64, n: usize) -> Result<Vec<f64>> {
    if n < 4 || !(eps > 0.0) || !(length > 0.0) {
        return Err(Error::Parameter(format!(
            "bad 1D profile setup eps={eps}, length={length}, n={n}"
        )));
    }
    let h = length / n as f64;
    let mut p: Vec<f64> = (0..=n)
        .map(|i| dw.profile((i as f64 * h - 0.5 * length) / eps))
        .collect();
    p[0] = 0.0;
    p[n] = 1.0;
    let g = 0.5 / 3f64.sqrt();
    let gauss = [0.5 - g, 0.5 + g];

    let energy = |p: &[f64]| -> f64 {
        (0..n)
            .map(|e| {
                let d = p[e + 1] - p[e];
                let well: f64 = gauss.iter().map(|&s| dw.eval(p[e] + s * d)).sum();
                0.5 * eps * d * d / h + 0.5 * h * well / eps
            })
            .sum()
    };

    let mut e_cur = energy(&p);
    for _ in 0..100 {
        // Gradient and tridiagonal Hessian over the interior nodes.
        let mut grad = vec![0.0; n + 1];
        let mut diag = vec![0.0; n + 1];
        let mut off = vec![0.0; n + 1];
        for e in 0..n {
            let d = p[e + 1] - p[e];
            let k = eps / h;
            grad[e] -= k * d;
            grad[e + 1] += k * d;
            diag[e] += k;
            diag[e + 1] += k;
            off[e] -= k;
            for &s in &gauss {
                let t = p[e] + s * d;
                let (w1, w2) = (0.5 * h * dw.deriv(t) / eps, 0.5 * h * dw.second(t) / eps);
                let (na, nb) = (1.0 - s, s);
                grad[e] += w1 * na;
                grad[e + 1] += w1 * nb;
                diag[e] += w2 * na * na;
                diag[e + 1] += w2 * nb * nb;
                off[e] += w2 * na * nb;
            }
        }
        let gnorm = grad[1..n].iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-13 {
            break;
        }
        let mut shift = 0.0;
        let dir = loop {
            if let Some(d) = thomas(&diag[1..n], &off[1..n - 1], &grad[1..n], shift) {
                break d;
            }
            shift = if shift == 0.0 { 1e-8 } else { shift * 10.0 };
            if shift > 1e8 {
                return Err(Error::Solver {
                    iterations: 0,
                    residual: gnorm,
                    target: 1e-13,
                });
            }
        };
        let mut tau = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut trial = p.clone();
            for i in 1..n {
                trial[i] -= tau * dir[i - 1];
            }
            let e_trial = energy(&trial);
            if e_trial <= e_cur {
                p = trial;
                e_cur = e_trial;
                accepted = true;
                break;
            }
            tau *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(p)
}

/// Solves the symmetric tridiagonal system `(T + shift·I) x = b`; `None` if a
/// pivot is not positive.
fn thomas(diag: &[f64], off: &[f64], b: &[f64], shift: f64) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0] + shift;
    if !(piv > 0.0) {
        return None;
    }
    c[0] = if n > 1 { off[0] / piv } else { 0.0 };
    d[0] = b[0] / piv;
    for i in 1..n {
        piv = diag[i] + shift - off[i - 1] * c[i - 1];
        if !(piv > 0.0) {
            return None;
        }
        if i < n - 1 {
            c[i] = off[i] / piv;
        }
        d[i] = (b[i] - off[i - 1] * d[i - 1]) / piv;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Some(d)
}

/// Scale ε and the refined-mesh resolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsConfig {
    pub eps: f64,
    /// Macro elements per ε-cell along each axis.
    pub elements_per_cell: usize,
}

/// Minimum macro elements per ε-cell.
pub const MIN_ELEMENTS_PER_CELL: usize = 8;

impl EpsConfig {
    /// Number of ε-cells along each side of `mesh`.
    pub fn cells(&self, mesh: &MacroMesh) -> Result<(usize, usize)> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::Config(format!(
                "ε must be positive, got {}",
                self.eps
            )));
        }
        let count = |len: f64| -> Result<usize> {
            let k = (len / self.eps).round();
            if k < 1.0 || (k * self.eps - len).abs() > 1e-9 * len {
                return Err(Error::Config(format!(
                    "ε = {} does not tile a side of length {len}",
                    self.eps
                )));
            }
            Ok(k as usize)
        };
        Ok((count(mesh.lx())?, count(mesh.ly())?))
    }

    pub fn validate(&self, mesh: &MacroMesh, cell_n: usize) -> Result<(usize, usize)> {
        let cells = self.cells(mesh)?;
        if self.elements_per_cell < MIN_ELEMENTS_PER_CELL.max(cell_n) {
            return Err(Error::Config(format!(
                "{} elements per ε-cell under-resolve m (need ≥ {} and ≥ the cell mesh size {cell_n})",
                self.elements_per_cell, MIN_ELEMENTS_PER_CELL
            )));
        }
        Ok(cells)
    }
}

/// `(ε/2)∫|∇φ|² + (1/ε)∫H(φ) + (ε/2)⨍|∇m|²(x/ε) + (1/ε)⨍H(m(x/ε) − 1)`
/// added to the compliance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpTerms {
    pub compliance: f64,
    pub phi_grad: f64,
    pub phi_well: f64,
    pub m_grad: f64,
    pub m_well: f64,
    pub total: f64,
}

/// The oscillatory problem at one ε on the refined macro mesh.
#[derive(Debug, Clone)]
pub struct EpsProblem {
    pub cfg: EpsConfig,
    pub material: Material,
    /// Same domain, tags and loads as the base problem, refined.
    pub fine: MacroProblem,
}

/// Result of [`EpsProblem::solve_state`]; `phi` is resampled on the fine grid.
#[derive(Debug, Clone)]
pub struct EpsSolution {
    pub phi: ScalarField,
    pub state: StateSolution,
}

impl EpsProblem {
    pub fn new(
        base: &MacroProblem,
        material: Material,
        cfg: EpsConfig,
        cell_n: usize,
    ) -> Result<Self> {
        let (cx, cy) = cfg.validate(&base.mesh, cell_n)?;
        let k = cfg.elements_per_cell;
        let mesh = base.mesh.remeshed(cx * k, cy * k)?;
        let mut fine = MacroProblem::new(mesh, base.loads.clone())?;
        fine.opts = base.opts;
        Ok(Self {
            cfg,
            material,
            fine,
        })
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.fine.mesh.grid
    }

    fn cell_point(&self, e: usize, q: usize) -> [f64; 2] {
        let x = self.grid().quad_point(e, q);
        [x[0] / self.cfg.eps, x[1] / self.cfg.eps]
    }

    /// Minimizer of `E_ε` with coefficient `C(φ(x), m(x/ε))`.
    pub fn solve_state(&self, phi: &ScalarField, m: &PeriodicScalarField) -> Result<EpsSolution> {
        if !phi.within(0.0, 1.0, 1e-12) || !m.within(1.0, 2.0, 1e-12) {
            return Err(Error::Contract(
                "ε-state needs φ ∈ [0, 1] and m ∈ [1, 2]".into(),
            ));
        }
        if !m.grid.periodic {
            return Err(Error::Contract(
                "m must live on the periodic cell grid".into(),
            ));
        }
        let phi_f = phi.resample(*self.grid());
        let state = self.fine.solve_with(&phi_f, |e, q| {
            self.material
                .coefficient(phi_f.eval_quad(e, q), m.eval(self.cell_point(e, q)))
        })?;
        Ok(EpsSolution { phi: phi_f, state })
    }

    /// `⨍_Ω F(m(x/ε), ∇_y m(x/ε))` by fine-mesh quadrature.
    pub fn cell_average(
        &self,
        m: &PeriodicScalarField,
        f: impl Fn(f64, [f64; 2]) -> f64 + Sync,
    ) -> f64 {
        let g = self.grid();
        let w = g.quad_weight();
        let s: f64 = (0..g.num_elements())
            .into_par_iter()
            .map(|e| {
                (0..4)
                    .map(|q| {
                        let y = self.cell_point(e, q);
                        w * f(m.eval(y), m.grad_at(y))
                    })
                    .sum::<f64>()
            })
            .sum();
        s / g.area()
    }

    /// `⨍_Ω |∇_y m(x/ε)|²`; equals `∫_Y |∇m|²` on exact tilings.
    pub fn oscillation(&self, m: &PeriodicScalarField) -> f64 {
        self.cell_average(m, |_, g| g[0] * g[0] + g[1] * g[1])
    }

    /// `compliance + w_m ⨍|∇m(x/ε)|² + w_φ ∫|∇φ|²`, `+∞` outside the
    /// admissible set.
    pub fn eval_j(
        &self,
        phi: &ScalarField,
        m: &PeriodicScalarField,
        compliance: f64,
        caps: &Caps,
        weights: &RegWeights,
    ) -> CostTerms {
        let reg_phi = weights.phi * h1_seminorm_sq(phi);
        let reg_m = weights.m * self.oscillation(m);
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

    /// Compliance plus the Modica–Mortola terms of both phases.
    pub fn eval_js(
        &self,
        phi: &ScalarField,
        m: &PeriodicScalarField,
        compliance: f64,
        dw: &DoubleWell,
        caps: &Caps,
    ) -> SharpTerms {
        let eps = self.cfg.eps;
        let phi_grad = 0.5 * eps * h1_seminorm_sq(phi);
        let phi_well = integral_of(phi, |t| dw.eval(t)) / eps;
        let m_grad = 0.5 * eps * self.oscillation(m);
        let m_well = self.cell_average(m, |v, _| dw.eval(v - 1.0)) / eps;
        let sum = compliance + phi_grad + phi_well + m_grad + m_well;
        let total = if is_admissible(phi, m, caps) {
            sum
        } else {
            f64::INFINITY
        };
        SharpTerms {
            compliance,
            phi_grad,
            phi_well,
            m_grad,
            m_well,
            total,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Energy,
    Cost,
    Mm,
}

/// What a sweep is run on.
#[derive(Debug, Clone)]
pub enum SweepInstance {
    /// Oscillatory problem against the homogenized one, both solved on the
    /// same refined mesh at each ε. With `elements_per_cell` equal to the
    /// cell mesh size the discrete problems share their ε → 0 limit, so the
    /// gap isolates the ε-dependence.
    Homogenization {
        problem: MacroProblem,
        material: Material,
        phi: ScalarField,
        m: PeriodicScalarField,
        n_levels: usize,
        elements_per_cell: usize,
        caps: Caps,
        weights: RegWeights,
    },
    /// Smoothed indicator of a disk in the unit square against `c_H · 2πr`.
    Disk {
        center: [f64; 2],
        radius: f64,
        grid_n: usize,
        well: DoubleWell,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub value: f64,
    pub reference: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub rows: Vec<SweepRow>,
    pub gaps_nonincreasing: bool,
}

impl SweepReport {
    fn new(kind: SweepKind, rows: Vec<SweepRow>) -> Self {
        let gaps_nonincreasing = rows.windows(2).all(|w| w[1].gap <= w[0].gap);
        Self {
            kind,
            rows,
            gaps_nonincreasing,
        }
    }

    /// Successive gap ratios `gap(ε_k) / gap(ε_{k+1})`.
    pub fn gap_ratios(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| w[0].gap / w[1].gap).collect()
    }
}

/// Values at each ε next to the ε → 0 reference. `eps_list` must be
/// strictly decreasing.
pub fn gamma_sweep(
    kind: SweepKind,
    instance: &SweepInstance,
    eps_list: &[f64],
) -> Result<SweepReport> {
    if eps_list.is_empty() || eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Config(
            "ε list must be nonempty and strictly decreasing".into(),
        ));
    }
    match (kind, instance) {
        (
            SweepKind::Mm,
            SweepInstance::Disk {
                center,
                radius,
                grid_n,
                well,
            },
        ) => {
            let grid = StructuredGrid::new(*grid_n, *grid_n, 1.0, 1.0, false);
            let reference = well.c_h() * 2.0 * std::f64::consts::PI * radius;
            let rows = eps_list
                .par_iter()
                .map(|&eps| {
                    let phi = disk_profile(grid, *center, *radius, eps, well);
                    let value = mm_energy(&phi, eps, well);
                    SweepRow {
                        eps,
                        value,
                        reference,
                        gap: (value - reference).abs(),
                    }
                })
                .collect();
            Ok(SweepReport::new(kind, rows))
        }
        (
            SweepKind::Energy | SweepKind::Cost,
            SweepInstance::Homogenization {
                problem,
                material,
                phi,
                m,
                n_levels,
                elements_per_cell,
                caps,
                weights,
            },
        ) => {
            let cell_n = m.grid.nx;
            let problems: Vec<EpsProblem> = eps_list
                .iter()
                .map(|&eps| {
                    EpsProblem::new(
                        problem,
                        *material,
                        EpsConfig {
                            eps,
                            elements_per_cell: *elements_per_cell,
                        },
                        cell_n,
                    )
                })
                .collect::<Result<_>>()?;
            let cell = CellProblem::new(CellMesh::new(cell_n)?, *material, m)?;
            let coeffs = Coefficients::Table(CStarTable::build(cell, *n_levels)?);
            let rows = problems
                .par_iter()
                .map(|p| {
                    let sol = p.solve_state(phi, m)?;
                    let hom = p.fine.solve_state(&sol.phi, &coeffs)?;
                    let (value, reference) = match kind {
                        SweepKind::Energy => (sol.state.energy, hom.energy),
                        _ => (
                            p.eval_j(phi, m, sol.state.compliance, caps, weights).total,
                            eval_j(phi, m, hom.compliance, caps, weights).total,
                        ),
                    };
                    Ok(SweepRow {
                        eps: p.cfg.eps,
                        value,
                        reference,
                        gap: (value - reference).abs(),
                    })
                })
                .collect::<Result<_>>()?;
            Ok(SweepReport::new(kind, rows))
        }
        _ => Err(Error::Config(format!(
            "sweep kind {kind:?} does not match the instance"
        ))),
    }
}

/// `p((r − |x − c|)/ε)` with the optimal profile of `well`.
pub fn disk_profile(
    grid: StructuredGrid,
    center: [f64; 2],
    radius: f64,
    eps: f64,
    well: &DoubleWell,
) -> ScalarField {
    ScalarField::from_fn(grid, |x| {
        let d = ((x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2)).sqrt();
        well.profile((radius - d) / eps)
    })
}
