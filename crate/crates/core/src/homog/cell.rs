//! Cell correctors and the homogenized tensor.
//!
//! For a unit strain `ê_a` (engineering vectors `(1,0,0)`, `(0,1,0)`,
//! `(0,0,1)`) the corrector `w_a` is the zero-mean periodic minimizer of
//! `½∫_Y C (e(w) + ê_a)·(e(w) + ê_a)`, and
//!
//! ```text
//! C*_ab = ∫_Y C (e(w_a) + ê_a)·(e(w_b) + ê_b)
//! ```
//!
//! The general entry point accepts a pulled-back coefficient (a gradient map
//! and a Jacobian per Gauss point), which is what the transported cell
//! problems of the sharp-interface module need.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::assembly::{
    assemble_elasticity_general, assemble_vector, map_grad, shape_strain, QuadCoefficient,
};
use crate::fem::{
    solve_spd, CellMesh, Constraint, PeriodicScalarField, SolveOptions, StructuredGrid, VectorField,
};
use crate::tensor::{Material, Tensor4Sym};

/// Engineering unit strains.
pub const UNIT_STRAINS: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Microstructure values at the Gauss points of the cell grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroSamples {
    pub grid: StructuredGrid,
    /// Indexed by `4·e + q`.
    pub values: Vec<f64>,
}

impl MicroSamples {
    /// Q1 interpolation of a nodal field.
    pub fn from_field(m: &PeriodicScalarField) -> Self {
        let g = m.grid;
        if m.values
            .iter()
            .all(|v| v.to_bits() == m.values[0].to_bits())
        {
            // keep constants bitwise constant so they short-circuit the solve
            return Self {
                grid: g,
                values: vec![m.values[0]; 4 * g.num_elements()],
            };
        }
        let values = (0..g.num_elements())
            .flat_map(|e| (0..4).map(move |q| (e, q)))
            .map(|(e, q)| m.eval_quad(e, q))
            .collect();
        Self { grid: g, values }
    }

    pub fn from_fn(grid: StructuredGrid, f: impl Fn(usize, usize) -> f64) -> Self {
        let values = (0..grid.num_elements())
            .flat_map(|e| (0..4).map(move |q| (e, q)))
            .map(|(e, q)| f(e, q))
            .collect();
        Self { grid, values }
    }

    pub fn at(&self, e: usize, q: usize) -> f64 {
        self.values[4 * e + q]
    }

    pub fn is_constant(&self) -> bool {
        self.values
            .iter()
            .all(|&v| v.to_bits() == self.values[0].to_bits())
    }

    /// Fingerprint used to tie corrector sets to the data they were solved for.
    pub fn key(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.grid.nx.hash(&mut h);
        for v in &self.values {
            v.to_bits().hash(&mut h);
        }
        h.finish()
    }
}

/// The three correctors at one φ-level, with the corrected strains
/// `e(w_a) + ê_a` cached per Gauss point.
#[derive(Debug, Clone)]
pub struct CorrectorSet {
    pub s: f64,
    pub m_key: u64,
    pub w: [VectorField; 3],
    /// `strains[4·e + q][a]` is the engineering vector of `e(w_a) + ê_a`.
    pub strains: Vec<[[f64; 3]; 3]>,
}

/// Solution of the three cell problems for a general coefficient.
#[derive(Debug, Clone)]
pub struct GeneralCorrectors {
    pub w: [VectorField; 3],
    /// Corrected strains `ẽ(w_a) + ê_a` with the mapped gradient.
    pub strains: Vec<[[f64; 3]; 3]>,
    pub cstar: Tensor4Sym,
    /// `C*` from the reduced formula `∫ C (ẽ(w_a) + ê_a)·ê_b J`.
    pub cstar_reduced: Tensor4Sym,
}

/// Engineering strain of a vector field at a Gauss point with a gradient map.
pub fn mapped_strain(w: &VectorField, e: usize, q: usize, map: Option<&[[f64; 2]; 2]>) -> [f64; 3] {
    let s = w.grid.shape_at_quad(q);
    let nodes = w.grid.element_nodes(e);
    let mut out = [0.0; 3];
    for a in 0..4 {
        let g = match map {
            Some(m) => map_grad(m, s.grad[a]),
            None => s.grad[a],
        };
        let u = w.values[nodes[a]];
        for i in 0..2 {
            let b = shape_strain(g, i);
            for p in 0..3 {
                out[p] += u[i] * b[p];
            }
        }
    }
    out
}

/// Right-hand side `−∫ J σ · ẽ(v)` for a per-Gauss-point stress `σ` given as
/// an engineering-paired stress vector (so that `σ·B v` is the virtual work).
pub fn stress_rhs(
    grid: &StructuredGrid,
    coefs: &[QuadCoefficient],
    stress: impl Fn(usize, usize) -> [f64; 3] + Sync,
) -> Vec<f64> {
    assemble_vector::<2>(grid, |ctx| {
        let c = &coefs[4 * ctx.e + ctx.q];
        let sig = stress(ctx.e, ctx.q);
        let w = ctx.weight * c.weight_factor;
        let mut out = [[0.0; 2]; 4];
        for a in 0..4 {
            let g = match &c.grad_map {
                Some(m) => map_grad(m, ctx.grad[a]),
                None => ctx.grad[a],
            };
            for i in 0..2 {
                let b = shape_strain(g, i);
                out[a][i] = -w * (sig[0] * b[0] + sig[1] * b[1] + sig[2] * b[2]);
            }
        }
        out
    })
}

pub(crate) fn voigt_apply(d: &Tensor4Sym, v: &[f64; 3]) -> [f64; 3] {
    let mut s = [0.0; 3];
    for p in 0..3 {
        s[p] = d.voigt[p][0] * v[0] + d.voigt[p][1] * v[1] + d.voigt[p][2] * v[2];
    }
    s
}

/// Solves the zero-mean periodic system `∫ C ẽ(w)·ẽ(v) J = rhs(v)`.
pub fn solve_cell_system(
    grid: &StructuredGrid,
    coefs: &[QuadCoefficient],
    rhs: &[f64],
    opts: SolveOptions,
) -> Result<VectorField> {
    let a = assemble_elasticity_general(grid, |e, q| coefs[4 * e + q])?;
    let (x, _) = solve_spd(&a, rhs, Constraint::MeanZero { components: 2 }, opts, None)?;
    Ok(VectorField::from_interleaved(*grid, &x))
}

/// Correctors and homogenized tensor for a general (possibly pulled-back)
/// coefficient. A constant coefficient without gradient map has zero
/// correctors and is short-circuited.
pub fn solve_general(
    grid: &StructuredGrid,
    coefs: &[QuadCoefficient],
    opts: SolveOptions,
) -> Result<GeneralCorrectors> {
    let trivial = coefs
        .iter()
        .all(|c| c.grad_map.is_none() && c.weight_factor == 1.0 && c.d == coefs[0].d);
    let w: Vec<VectorField> = if trivial {
        vec![VectorField::zeros(*grid); 3]
    } else {
        let a = assemble_elasticity_general(grid, |e, q| coefs[4 * e + q])?;
        (0..3)
            .into_par_iter()
            .map(|k| {
                let rhs = stress_rhs(grid, coefs, |e, q| {
                    voigt_apply(&coefs[4 * e + q].d, &UNIT_STRAINS[k])
                });
                let (x, _) =
                    solve_spd(&a, &rhs, Constraint::MeanZero { components: 2 }, opts, None)?;
                Ok(VectorField::from_interleaved(*grid, &x))
            })
            .collect::<Result<_>>()?
    };
    let w: [VectorField; 3] = w.try_into().expect("three correctors");
    let nq = 4 * grid.num_elements();
    let strains: Vec<[[f64; 3]; 3]> = (0..nq)
        .into_par_iter()
        .map(|k| {
            let (e, q) = (k / 4, k % 4);
            let map = coefs[k].grad_map.as_ref();
            let mut out = [[0.0; 3]; 3];
            for a in 0..3 {
                let s = mapped_strain(&w[a], e, q, map);
                for p in 0..3 {
                    out[a][p] = s[p] + UNIT_STRAINS[a][p];
                }
            }
            out
        })
        .collect();
    let wq = grid.quad_weight();
    let mut full = [[0.0; 3]; 3];
    let mut reduced = [[0.0; 3]; 3];
    for (k, st) in strains.iter().enumerate() {
        let c = &coefs[k];
        let w = wq * c.weight_factor;
        for a in 0..3 {
            let sa = voigt_apply(&c.d, &st[a]);
            for b in 0..3 {
                reduced[a][b] += w
                    * (sa[0] * UNIT_STRAINS[b][0]
                        + sa[1] * UNIT_STRAINS[b][1]
                        + sa[2] * UNIT_STRAINS[b][2]);
                if b >= a {
                    full[a][b] += w * (sa[0] * st[b][0] + sa[1] * st[b][1] + sa[2] * st[b][2]);
                }
            }
        }
    }
    for a in 0..3 {
        for b in 0..a {
            full[a][b] = full[b][a];
        }
    }
    Ok(GeneralCorrectors {
        w,
        strains,
        cstar: Tensor4Sym { voigt: full },
        cstar_reduced: Tensor4Sym { voigt: reduced },
    })
}

/// The cell problem for a fixed microstructure.
#[derive(Debug, Clone)]
pub struct CellProblem {
    pub mesh: CellMesh,
    pub material: Material,
    pub micro: MicroSamples,
    pub opts: SolveOptions,
    /// Whether to assert the corrector energy bound after every solve.
    pub check_bounds: bool,
}

impl CellProblem {
    pub fn new(mesh: CellMesh, material: Material, m: &PeriodicScalarField) -> Result<Self> {
        if m.grid != mesh.grid {
            return Err(Error::Contract(
                "microstructure field does not live on the cell mesh".into(),
            ));
        }
        if !m.within(1.0, 2.0, 1e-12) {
            return Err(Error::Contract(format!(
                "m must lie in [1, 2], found [{}, {}]",
                m.min(),
                m.max()
            )));
        }
        Ok(Self::from_samples(
            mesh,
            material,
            MicroSamples::from_field(m),
        ))
    }

    pub fn from_samples(mesh: CellMesh, material: Material, micro: MicroSamples) -> Self {
        Self {
            mesh,
            material,
            micro,
            opts: SolveOptions::with_tol(1e-12),
            check_bounds: true,
        }
    }

    pub fn grid(&self) -> &StructuredGrid {
        &self.mesh.grid
    }

    pub fn coefficients(&self, s: f64) -> Vec<QuadCoefficient> {
        self.micro
            .values
            .iter()
            .map(|&m| QuadCoefficient::plain(self.material.coefficient(s, m)))
            .collect()
    }

    /// Correctors at φ-level `s`.
    pub fn correctors(&self, s: f64) -> Result<CorrectorSet> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::Contract(format!("phase level {s} outside [0, 1]")));
        }
        let coefs = self.coefficients(s);
        let g = solve_general(self.grid(), &coefs, self.opts)?;
        let cs = CorrectorSet {
            s,
            m_key: self.micro.key(),
            w: g.w,
            strains: g.strains,
        };
        if self.check_bounds {
            self.check_energy_bound(&cs)?;
        }
        Ok(cs)
    }

    /// `‖e(w_a) + ê_a‖²_{L²} ≤ (β/α)|Y|`.
    fn check_energy_bound(&self, cs: &CorrectorSet) -> Result<()> {
        let (alpha, beta) = self.material.admissible_bounds()?;
        let w = self.grid().quad_weight();
        for a in 0..3 {
            let n: f64 = cs.strains.iter().map(|st| w * frobenius_sq(&st[a])).sum();
            if n > beta / alpha * (1.0 + 1e-9) {
                return Err(Error::Contract(format!(
                    "corrector energy bound violated: {n} > {}",
                    beta / alpha
                )));
            }
        }
        Ok(())
    }

    fn check(&self, s: f64, cs: &CorrectorSet) -> Result<()> {
        if cs.s != s || cs.m_key != self.micro.key() {
            return Err(Error::Contract(format!("correctors were solved at s = {} for a different microstructure or level than s = {s}", cs.s)));
        }
        Ok(())
    }

    /// `C*` by the symmetric formula (exactly symmetric).
    pub fn homogenized(&self, s: f64, cs: &CorrectorSet) -> Result<Tensor4Sym> {
        self.check(s, cs)?;
        Ok(self.integrate_pairs(cs, |e, q| self.material.coefficient(s, self.micro.at(e, q))))
    }

    /// `C*` by the reduced formula `∫ C (e(w_a) + ê_a)·ê_b`.
    pub fn homogenized_reduced(&self, s: f64, cs: &CorrectorSet) -> Result<Tensor4Sym> {
        self.check(s, cs)?;
        let w = self.grid().quad_weight();
        let mut r = [[0.0; 3]; 3];
        for (k, st) in cs.strains.iter().enumerate() {
            let d = self.material.coefficient(s, self.micro.values[k]);
            for a in 0..3 {
                let sa = voigt_apply(&d, &st[a]);
                for b in 0..3 {
                    r[a][b] += w * sa[b];
                }
            }
        }
        Ok(Tensor4Sym { voigt: r })
    }

    /// `∫ D(y) (e(w_a) + ê_a)·(e(w_b) + ê_b)` for a per-Gauss-point tensor.
    pub fn integrate_pairs(
        &self,
        cs: &CorrectorSet,
        d: impl Fn(usize, usize) -> Tensor4Sym,
    ) -> Tensor4Sym {
        let w = self.grid().quad_weight();
        let mut r = [[0.0; 3]; 3];
        for (k, st) in cs.strains.iter().enumerate() {
            let dk = d(k / 4, k % 4);
            for a in 0..3 {
                let sa = voigt_apply(&dk, &st[a]);
                for b in a..3 {
                    r[a][b] += w * (sa[0] * st[b][0] + sa[1] * st[b][1] + sa[2] * st[b][2]);
                }
            }
        }
        for a in 0..3 {
            for b in 0..a {
                r[a][b] = r[b][a];
            }
        }
        Tensor4Sym { voigt: r }
    }

    /// Derivative `C̄*` of `C*` in the direction `(ψ, μ)` at a point where
    /// `φ = s` and `ψ = psi`.
    pub fn dcstar(
        &self,
        s: f64,
        cs: &CorrectorSet,
        psi: f64,
        mu: &PeriodicScalarField,
    ) -> Result<Tensor4Sym> {
        self.check(s, cs)?;
        let mu_q = MicroSamples::from_field(mu);
        Ok(self.integrate_pairs(cs, |e, q| {
            self.material
                .coefficient_variation(s, self.micro.at(e, q), psi, mu_q.at(e, q))
        }))
    }

    /// Linearized correctors `w̄_a`: `∫ C e(w̄_a)·e(v) = −∫ C̄ (e(w_a) + ê_a)·e(v)`.
    pub fn linearized_correctors(
        &self,
        s: f64,
        cs: &CorrectorSet,
        psi: f64,
        mu: &PeriodicScalarField,
    ) -> Result<[VectorField; 3]> {
        self.check(s, cs)?;
        let mu_q = MicroSamples::from_field(mu);
        let coefs = self.coefficients(s);
        let a = assemble_elasticity_general(self.grid(), |e, q| coefs[4 * e + q])?;
        let out: Vec<VectorField> = (0..3)
            .into_par_iter()
            .map(|k| {
                let rhs = stress_rhs(self.grid(), &coefs, |e, q| {
                    let cbar = self.material.coefficient_variation(
                        s,
                        self.micro.at(e, q),
                        psi,
                        mu_q.at(e, q),
                    );
                    voigt_apply(&cbar, &cs.strains[4 * e + q][k])
                });
                let (x, _) = solve_spd(
                    &a,
                    &rhs,
                    Constraint::MeanZero { components: 2 },
                    self.opts,
                    None,
                )?;
                Ok(VectorField::from_interleaved(*self.grid(), &x))
            })
            .collect::<Result<_>>()?;
        Ok(out.try_into().expect("three fields"))
    }
}

fn frobenius_sq(g: &[f64; 3]) -> f64 {
    g[0] * g[0] + g[1] * g[1] + 0.5 * g[2] * g[2]
}

/// Correctors at level `s` for the nodal microstructure `m`.
pub fn solve_correctors(
    s: f64,
    m: &PeriodicScalarField,
    mesh: &CellMesh,
    material: &Material,
) -> Result<CorrectorSet> {
    CellProblem::new(*mesh, *material, m)?.correctors(s)
}

pub fn homogenized_tensor(
    s: f64,
    m: &PeriodicScalarField,
    mesh: &CellMesh,
    material: &Material,
    cs: &CorrectorSet,
) -> Result<Tensor4Sym> {
    CellProblem::new(*mesh, *material, m)?.homogenized(s, cs)
}
