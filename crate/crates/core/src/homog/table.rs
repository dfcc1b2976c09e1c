//! Homogenized coefficients as a function of the phase level.
//!
//! `C(φ, m)(x, y)` depends on `x` only through the scalar `φ(x)`, so `C*` is
//! a function of one variable. [`CStarTable`] samples it at uniform levels
//! together with the exact derivative `∂_φ C*` (which needs no extra solves)
//! and interpolates each Voigt entry with a cubic Hermite spline. Where an
//! entry's samples are monotone the node slopes are limited (Fritsch–Carlson)
//! so the interpolant stays monotone. [`ExactCoefficients`] instead solves
//! the cell problems at every distinct φ value it is asked for.

use rayon::prelude::*;

use super::cell::{CellProblem, CorrectorSet};
use crate::error::{Error, Result};
use crate::fem::ScalarField;
use crate::tensor::Tensor4Sym;

/// Correctors and coefficients at one φ-level.
#[derive(Debug, Clone)]
pub struct Level {
    pub s: f64,
    pub correctors: CorrectorSet,
    pub cstar: Tensor4Sym,
    /// `∂_φ C*(s)`, i.e. `C̄*` with `ψ = 1`, `μ = 0`.
    pub dcstar: Tensor4Sym,
}

impl Level {
    pub fn solve(problem: &CellProblem, s: f64) -> Result<Self> {
        let correctors = problem.correctors(s)?;
        let cstar = problem.homogenized(s, &correctors)?;
        let dcstar = problem.integrate_pairs(&correctors, |e, q| {
            problem
                .material
                .coefficient_variation(s, problem.micro.at(e, q), 1.0, 0.0)
        });
        Ok(Self {
            s,
            correctors,
            cstar,
            dcstar,
        })
    }
}

#[derive(Debug, Clone)]
pub struct CStarTable {
    pub problem: CellProblem,
    pub levels: Vec<Level>,
    /// Node slopes after limiting, per level.
    slopes: Vec<Tensor4Sym>,
}

impl CStarTable {
    pub fn build(problem: CellProblem, n_levels: usize) -> Result<Self> {
        if n_levels < 2 {
            return Err(Error::Config(format!(
                "a table needs at least 2 levels, got {n_levels}"
            )));
        }
        let h = 1.0 / (n_levels - 1) as f64;
        let levels: Vec<Level> = (0..n_levels)
            .into_par_iter()
            .map(|k| Level::solve(&problem, if k == n_levels - 1 { 1.0 } else { k as f64 * h }))
            .collect::<Result<_>>()?;
        let slopes = limited_slopes(&levels, h);
        Ok(Self {
            problem,
            levels,
            slopes,
        })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    fn spacing(&self) -> f64 {
        1.0 / (self.levels.len() - 1) as f64
    }

    fn interval(&self, s: f64) -> (usize, f64) {
        let h = self.spacing();
        let s = s.clamp(0.0, 1.0);
        let k = ((s / h).floor() as usize).min(self.levels.len() - 2);
        (k, (s - self.levels[k].s) / h)
    }

    /// `C*(s)` and its derivative; the derivative is that of the interpolant.
    pub fn eval(&self, s: f64) -> (Tensor4Sym, Tensor4Sym) {
        let h = self.spacing();
        let (k, t) = self.interval(s);
        let (y0, y1) = (&self.levels[k].cstar, &self.levels[k + 1].cstar);
        let (d0, d1) = (&self.slopes[k], &self.slopes[k + 1]);
        let t2 = t * t;
        let t3 = t2 * t;
        let (h00, h10, h01, h11) = (
            2.0 * t3 - 3.0 * t2 + 1.0,
            t3 - 2.0 * t2 + t,
            -2.0 * t3 + 3.0 * t2,
            t3 - t2,
        );
        let (g00, g10, g01, g11) = (
            (6.0 * t2 - 6.0 * t) / h,
            3.0 * t2 - 4.0 * t + 1.0,
            (6.0 * t - 6.0 * t2) / h,
            3.0 * t2 - 2.0 * t,
        );
        let mut c = [[0.0; 3]; 3];
        let mut dc = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                let (p0, p1, m0, m1) = (
                    y0.voigt[a][b],
                    y1.voigt[a][b],
                    d0.voigt[a][b],
                    d1.voigt[a][b],
                );
                c[a][b] = h00 * p0 + h10 * h * m0 + h01 * p1 + h11 * h * m1;
                dc[a][b] = g00 * p0 + g10 * m0 + g01 * p1 + g11 * m1;
            }
        }
        (Tensor4Sym { voigt: c }, Tensor4Sym { voigt: dc })
    }

    pub fn cstar(&self, s: f64) -> Tensor4Sym {
        self.eval(s).0
    }

    /// Level whose correctors are used for `s` in `y`-resolved integrands.
    pub fn nearest_level(&self, s: f64) -> usize {
        ((s.clamp(0.0, 1.0) / self.spacing()).round() as usize).min(self.levels.len() - 1)
    }
}

fn limited_slopes(levels: &[Level], h: f64) -> Vec<Tensor4Sym> {
    let n = levels.len();
    let mut slopes: Vec<Tensor4Sym> = levels.iter().map(|l| l.dcstar).collect();
    for a in 0..3 {
        for b in 0..3 {
            let y: Vec<f64> = levels.iter().map(|l| l.cstar.voigt[a][b]).collect();
            let up = y.windows(2).all(|w| w[1] >= w[0]);
            let down = y.windows(2).all(|w| w[1] <= w[0]);
            if !(up || down) {
                continue;
            }
            for k in 0..n - 1 {
                let delta = (y[k + 1] - y[k]) / h;
                if delta == 0.0 {
                    slopes[k].voigt[a][b] = 0.0;
                    slopes[k + 1].voigt[a][b] = 0.0;
                    continue;
                }
                let mut al = slopes[k].voigt[a][b] / delta;
                let mut be = slopes[k + 1].voigt[a][b] / delta;
                al = al.max(0.0);
                be = be.max(0.0);
                let r = al * al + be * be;
                if r > 9.0 {
                    let tau = 3.0 / r.sqrt();
                    al *= tau;
                    be *= tau;
                }
                slopes[k].voigt[a][b] = al * delta;
                slopes[k + 1].voigt[a][b] = be * delta;
            }
        }
    }
    slopes
}

/// Cell solutions at each distinct φ value of a macro field.
#[derive(Debug, Clone)]
pub struct ExactCoefficients {
    pub problem: CellProblem,
    /// Sorted by `s`, no duplicates.
    pub levels: Vec<Level>,
}

impl ExactCoefficients {
    pub fn build(problem: CellProblem, values: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut s: Vec<f64> = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        s.sort_by(|a, b| a.total_cmp(b));
        s.dedup_by(|a, b| a.to_bits() == b.to_bits());
        let levels = s
            .par_iter()
            .map(|&v| Level::solve(&problem, v))
            .collect::<Result<_>>()?;
        Ok(Self { problem, levels })
    }

    /// Levels for every Gauss-point value of `phi`.
    pub fn for_phi(problem: CellProblem, phi: &ScalarField) -> Result<Self> {
        Self::build(problem, phi_quad_values(phi))
    }

    pub fn index_of(&self, s: f64) -> Option<usize> {
        let s = s.clamp(0.0, 1.0);
        self.levels.binary_search_by(|l| l.s.total_cmp(&s)).ok()
    }

    pub fn covers(&self, phi: &ScalarField) -> bool {
        phi_quad_values(phi).all(|v| self.index_of(v).is_some())
    }
}

fn phi_quad_values(phi: &ScalarField) -> impl Iterator<Item = f64> + '_ {
    (0..phi.grid.num_elements()).flat_map(move |e| (0..4).map(move |q| phi.eval_quad(e, q)))
}

/// How `C*(φ(x))` is obtained at macro Gauss points.
#[derive(Debug, Clone)]
pub enum Coefficients {
    Table(CStarTable),
    Exact(ExactCoefficients),
}

impl Coefficients {
    pub fn problem(&self) -> &CellProblem {
        match self {
            Coefficients::Table(t) => &t.problem,
            Coefficients::Exact(x) => &x.problem,
        }
    }

    /// `C*(s)` and `∂_φ C*(s)`.
    pub fn eval(&self, s: f64) -> (Tensor4Sym, Tensor4Sym) {
        match self {
            Coefficients::Table(t) => t.eval(s),
            Coefficients::Exact(x) => {
                let l = &x.levels[self.level_index(s)];
                (l.cstar, l.dcstar)
            }
        }
    }

    pub fn cstar(&self, s: f64) -> Tensor4Sym {
        self.eval(s).0
    }

    /// Level used for `y`-resolved integrands at `φ = s`.
    pub fn level_index(&self, s: f64) -> usize {
        match self {
            Coefficients::Table(t) => t.nearest_level(s),
            Coefficients::Exact(x) => x
                .index_of(s)
                .unwrap_or_else(|| panic!("no cell solution for phase level {s}")),
        }
    }

    pub fn levels(&self) -> &[Level] {
        match self {
            Coefficients::Table(t) => &t.levels,
            Coefficients::Exact(x) => &x.levels,
        }
    }

    /// Checks that every Gauss-point value of `phi` can be served.
    pub fn check_covers(&self, phi: &ScalarField) -> Result<()> {
        match self {
            Coefficients::Table(_) => Ok(()),
            Coefficients::Exact(x) if x.covers(phi) => Ok(()),
            Coefficients::Exact(_) => Err(Error::Contract(
                "exact coefficients were not built for this phase field".into(),
            )),
        }
    }
}

/// Selects table or exact evaluation when coefficients are (re)built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientMode {
    Table { n_levels: usize },
    Exact,
}

impl CoefficientMode {
    pub fn build(self, problem: CellProblem, phi: &ScalarField) -> Result<Coefficients> {
        Ok(match self {
            CoefficientMode::Table { n_levels } => {
                Coefficients::Table(CStarTable::build(problem, n_levels)?)
            }
            CoefficientMode::Exact => {
                Coefficients::Exact(ExactCoefficients::for_phi(problem, phi)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{CellMesh, PeriodicScalarField};
    use crate::tensor::Material;

    #[test]
    fn constant_micro_table_is_exact_everywhere() {
        let mesh = CellMesh::new(4).unwrap();
        let mat = Material::isotropic(1.0, 0.3, 1e-3).unwrap();
        let m = PeriodicScalarField::constant(mesh.grid, 1.3);
        let t = CStarTable::build(CellProblem::new(mesh, mat, &m).unwrap(), 5).unwrap();
        for s in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let (c, d) = t.eval(s);
            assert!(c.max_abs_diff(&mat.coefficient(s, 1.3)) < 1e-14);
            assert!(d.max_abs_diff(&(mat.c1.scale(1.3) - mat.c2)) < 1e-13);
        }
    }
}
