//! Projected-gradient descent on `(φ, m)` with an Armijo line search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_laplacian, lumped_mass};
use crate::fem::integrate::integral;
use crate::fem::{solve_spd, CellMesh, Constraint, PeriodicScalarField, ScalarField, SolveOptions};
use crate::gradient::{assemble_gradient, stationarity_measure, GradientPair};
use crate::homog::{CellProblem, CoefficientMode, Coefficients};
use crate::state::{
    eval_j, is_admissible, Caps, CostTerms, MacroProblem, RegWeights, StateSolution,
};
use crate::tensor::Material;

/// Euclidean projection (in the lumped-mass inner product) onto
/// `{lo ≤ x ≤ hi, Σ mass·x ≤ cap}`.
///
/// Feasible inputs are only clamped. Otherwise the shift `c` in
/// `clamp(x − c)` is found by bisection; the returned point uses the right
/// end of the final bracket, so it never exceeds the cap.
pub fn project_admissible(
    values: &[f64],
    mass: &[f64],
    lo: f64,
    hi: f64,
    cap: f64,
) -> Result<Vec<f64>> {
    if !(lo < hi) {
        return Err(Error::Contract(format!("empty box [{lo}, {hi}]")));
    }
    let total: f64 = mass.iter().sum();
    if cap < lo * total * (1.0 - 1e-14) {
        return Err(Error::Config(format!(
            "cap {cap} is below the minimum {}",
            lo * total
        )));
    }
    let clamped = |c: f64| -> Vec<f64> { values.iter().map(|v| (v - c).clamp(lo, hi)).collect() };
    let mass_of = |x: &[f64]| x.iter().zip(mass).map(|(a, b)| a * b).sum::<f64>();
    let x0 = clamped(0.0);
    if mass_of(&x0) <= cap {
        return Ok(x0);
    }
    let mut a = 0.0;
    let mut b = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - lo;
    let target = 1e-12 * total;
    for _ in 0..200 {
        let c = 0.5 * (a + b);
        if mass_of(&clamped(c)) > cap {
            a = c;
        } else {
            b = c;
        }
        if b - a <= f64::EPSILON * b.abs().max(1.0) {
            break;
        }
        if cap - mass_of(&clamped(b)) <= target {
            break;
        }
    }
    Ok(clamped(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub caps: Caps,
    pub weights: RegWeights,
    pub step0: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    /// Factor applied to the step after an accepted iteration.
    pub grow: f64,
    pub max_step: f64,
    pub max_iters: usize,
    pub max_shrinks: usize,
    pub tol_stationarity: f64,
    /// `Some(η)`: precondition the step with `(M + ηK)⁻¹`.
    pub h1_precondition: Option<f64>,
    pub mode: CoefficientMode,
    pub cell_n: usize,
}

impl OptimConfig {
    pub fn validate(&self, problem: &MacroProblem) -> Result<()> {
        let area = problem.mesh.area();
        if !(self.caps.volume > 0.0 && self.caps.volume < area) {
            return Err(Error::Config(format!(
                "volume cap must lie in (0, {area}), got {}",
                self.caps.volume
            )));
        }
        if !(self.caps.micro > 1.0 && self.caps.micro < 2.0) {
            return Err(Error::Config(format!(
                "micro cap must lie in (1, 2), got {}",
                self.caps.micro
            )));
        }
        if !(self.step0 > 0.0)
            || !(self.armijo_c > 0.0 && self.armijo_c < 1.0)
            || !(self.shrink > 0.0 && self.shrink < 1.0)
        {
            return Err(Error::Config(
                "line search needs step0 > 0, armijo_c ∈ (0,1), shrink ∈ (0,1)".into(),
            ));
        }
        if self.grow < 1.0 || self.max_step < self.step0 {
            return Err(Error::Config(
                "line search needs grow ≥ 1 and max_step ≥ step0".into(),
            ));
        }
        if let Some(eta) = self.h1_precondition {
            if !(eta > 0.0) {
                return Err(Error::Config(format!(
                    "H1 preconditioning weight must be positive, got {eta}"
                )));
            }
        }
        Ok(())
    }
}

/// Builds coefficients and evaluates the reduced objective.
#[derive(Debug, Clone)]
pub struct ReducedProblem {
    pub problem: MacroProblem,
    pub cell: CellMesh,
    pub material: Material,
    pub caps: Caps,
    pub weights: RegWeights,
    pub mode: CoefficientMode,
}

/// Objective, state and coefficients at one design.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub phi: ScalarField,
    pub m: PeriodicScalarField,
    pub coeffs: Coefficients,
    pub state: StateSolution,
    pub cost: CostTerms,
}

impl ReducedProblem {
    pub fn coefficients(&self, phi: &ScalarField, m: &PeriodicScalarField) -> Result<Coefficients> {
        self.mode
            .build(CellProblem::new(self.cell, self.material, m)?, phi)
    }

    /// Reuses `coeffs` when they are still valid for `(φ, m)`.
    pub fn evaluate_with(
        &self,
        phi: &ScalarField,
        m: &PeriodicScalarField,
        reuse: Option<&Evaluation>,
    ) -> Result<Evaluation> {
        let coeffs = match reuse {
            Some(ev) if ev.m == *m && ev.coeffs.check_covers(phi).is_ok() => ev.coeffs.clone(),
            _ => self.coefficients(phi, m)?,
        };
        let state = self.problem.solve_state(phi, &coeffs)?;
        let cost = eval_j(phi, m, state.compliance, &self.caps, &self.weights);
        Ok(Evaluation {
            phi: phi.clone(),
            m: m.clone(),
            coeffs,
            state,
            cost,
        })
    }

    pub fn evaluate(&self, phi: &ScalarField, m: &PeriodicScalarField) -> Result<Evaluation> {
        self.evaluate_with(phi, m, None)
    }

    pub fn gradient(&self, ev: &Evaluation) -> Result<GradientPair> {
        assemble_gradient(
            &self.problem,
            &ev.phi,
            &ev.m,
            &ev.coeffs,
            &ev.state,
            &self.weights,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    pub objective: f64,
    pub compliance: f64,
    pub reg_phi: f64,
    pub reg_m: f64,
    /// Step length accepted in this iteration (0 on the final record).
    pub step: f64,
    pub stationarity: f64,
    pub volume_phi: f64,
    pub volume_m: f64,
    pub probes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimHistory {
    pub records: Vec<IterRecord>,
    pub termination: Option<Termination>,
    /// Set when the regularizer weights differ from ½.
    pub nondefault_weights: bool,
}

impl OptimHistory {
    /// Whether the objective never increased between recorded iterates.
    pub fn is_monotone(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[1].objective <= w[0].objective)
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub phi: ScalarField,
    pub m: PeriodicScalarField,
    pub state: StateSolution,
    pub history: OptimHistory,
}

/// Step `(φ', m') = P(φ + τ d_φ, m + τ d_m)`.
pub fn step(
    phi: &ScalarField,
    m: &PeriodicScalarField,
    d_phi: &[f64],
    d_m: &[f64],
    tau: f64,
    caps: &Caps,
) -> Result<(ScalarField, PeriodicScalarField)> {
    let mp = lumped_mass(&phi.grid);
    let mm = lumped_mass(&m.grid);
    let sp: Vec<f64> = phi
        .values
        .iter()
        .zip(d_phi)
        .map(|(x, d)| x + tau * d)
        .collect();
    let sm: Vec<f64> = m.values.iter().zip(d_m).map(|(x, d)| x + tau * d).collect();
    Ok((
        ScalarField {
            grid: phi.grid,
            values: project_admissible(&sp, &mp, 0.0, 1.0, caps.volume)?,
        },
        ScalarField {
            grid: m.grid,
            values: project_admissible(&sm, &mm, 1.0, 2.0, caps.micro)?,
        },
    ))
}

/// Descent direction: minus the lumped-`L²` gradient, or the `H¹`-type
/// preconditioned version `−(M + ηK)⁻¹ (b + reg)`.
fn descent_direction(grad: &GradientPair, h1: Option<f64>) -> Result<(Vec<f64>, Vec<f64>)> {
    let neg = |v: Vec<f64>| v.into_iter().map(|x| -x).collect::<Vec<f64>>();
    match h1 {
        None => Ok((neg(grad.full_phi()), neg(grad.full_m()))),
        Some(eta) => {
            let solve =
                |grid: &crate::fem::StructuredGrid, b: &[f64], r: &[f64]| -> Result<Vec<f64>> {
                    let mut a = assemble_laplacian(grid, |_, _| eta);
                    let mass = lumped_mass(grid);
                    for (i, m) in mass.iter().enumerate() {
                        a.add(i, i, *m);
                    }
                    let rhs: Vec<f64> = b.iter().zip(r).map(|(x, y)| -(x + y)).collect();
                    Ok(solve_spd(
                        &a,
                        &rhs,
                        Constraint::DirichletEliminated(&[]),
                        SolveOptions::with_tol(1e-12),
                        None,
                    )?
                    .0)
                };
            Ok((
                solve(&grad.phi_grid, &grad.b_phi, &grad.reg_phi)?,
                solve(&grad.m_grid, &grad.b_m, &grad.reg_m)?,
            ))
        }
    }
}

/// Runs projected gradient descent from an admissible `(φ₀, m₀)`.
pub fn optimize(
    reduced: &ReducedProblem,
    phi0: &ScalarField,
    m0: &PeriodicScalarField,
    config: &OptimConfig,
) -> Result<OptimResult> {
    config.validate(&reduced.problem)?;
    if !is_admissible(phi0, m0, &config.caps) {
        return Err(Error::Contract("initial design is not admissible".into()));
    }
    let mut history = OptimHistory {
        nondefault_weights: !config.weights.is_default(),
        ..Default::default()
    };
    if history.nondefault_weights {
        log::warn!(
            "running with non-default regularizer weights {:?}",
            config.weights
        );
    }
    let mut ev = reduced.evaluate(phi0, m0)?;
    let mut tau = config.step0;
    let mut termination = Termination::MaxIterations;
    for iter in 0..=config.max_iters {
        let grad = reduced.gradient(&ev)?;
        let stat = stationarity_measure(&ev.phi, &ev.m, &grad, &config.caps);
        let mut record = IterRecord {
            iter,
            objective: ev.cost.total,
            compliance: ev.cost.compliance,
            reg_phi: ev.cost.reg_phi,
            reg_m: ev.cost.reg_m,
            step: 0.0,
            stationarity: stat,
            volume_phi: integral(&ev.phi),
            volume_m: integral(&ev.m),
            probes: 0,
        };
        log::debug!(
            "iter {iter}: G = {:.10e}, stationarity = {stat:.3e}",
            ev.cost.total
        );
        if stat <= config.tol_stationarity {
            history.records.push(record);
            termination = Termination::Converged;
            break;
        }
        if iter == config.max_iters {
            history.records.push(record);
            break;
        }
        let (d_phi, d_m) = descent_direction(&grad, config.h1_precondition)?;
        let mut accepted = None;
        for probe in 1..=config.max_shrinks {
            let (phi_t, m_t) = step(&ev.phi, &ev.m, &d_phi, &d_m, tau, &config.caps)?;
            let dp: Vec<f64> = phi_t
                .values
                .iter()
                .zip(&ev.phi.values)
                .map(|(a, b)| a - b)
                .collect();
            let dm: Vec<f64> = m_t
                .values
                .iter()
                .zip(&ev.m.values)
                .map(|(a, b)| a - b)
                .collect();
            let slope = grad.directional(&dp, &dm);
            record.probes = probe;
            if slope >= 0.0 {
                tau *= config.shrink;
                continue;
            }
            let trial = reduced.evaluate_with(&phi_t, &m_t, Some(&ev))?;
            if trial.cost.total <= ev.cost.total + config.armijo_c * slope {
                accepted = Some(trial);
                break;
            }
            tau *= config.shrink;
        }
        match accepted {
            Some(trial) => {
                record.step = tau;
                history.records.push(record);
                ev = trial;
                tau = (tau * config.grow).min(config.max_step);
            }
            None => {
                history.records.push(record);
                termination = Termination::LineSearchFailure;
                break;
            }
        }
    }
    history.termination = Some(termination);
    Ok(OptimResult {
        phi: ev.phi,
        m: ev.m,
        state: ev.state,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_basics() {
        let mass = vec![0.25; 4];
        let x = vec![0.2, 0.4, 0.6, 0.8];
        assert_eq!(project_admissible(&x, &mass, 0.0, 1.0, 1.0).unwrap(), x);
        let ones = vec![1.0; 4];
        let p = project_admissible(&ones, &mass, 0.0, 1.0, 0.5).unwrap();
        assert!(p.iter().all(|v| (v - 0.5).abs() < 1e-12));
        let s: f64 = p.iter().map(|v| 0.25 * v).sum();
        assert!(s <= 0.5);
        assert!(matches!(
            project_admissible(&ones, &mass, 1.0, 2.0, 0.5),
            Err(Error::Config(_))
        ));
    }
}
