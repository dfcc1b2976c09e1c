//! Sharp designs and their transported states.
//!
//! Transported configurations `(φ∘T_t⁻¹, m∘S_t⁻¹)` are never rasterized.
//! The state and cell problems are pulled back to the reference
//! configuration instead: gradients are mapped by `(∇T_t)⁻¹`, weights carry
//! `det ∇T_t`, loads are evaluated at `T_t(x)` and tractions carry the edge
//! stretch `|∇T_t τ|`. At `t = 0` this is the plain problem, so the
//! discrete functional is a smooth function of `t` and difference quotients
//! test the shape-derivative formulas without rasterization noise.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{flow_point, FlowPoint};
use super::interface::{extract_interface, Domain, InterfacePolyline};
use super::variation::VariationField;
use crate::eps::DoubleWell;
use crate::error::{Error, Result};
use crate::fem::assembly::{assemble_body_load, assemble_traction};
use crate::fem::sparse::dot;
use crate::fem::{
    assemble_elasticity_general, CellMesh, DisplacementField, QuadCoefficient, ScalarField,
    StructuredGrid,
};
use crate::homog::cell::{solve_general, GeneralCorrectors};
use crate::homog::{CellProblem, CorrectorSet, MicroSamples};
use crate::state::{Caps, MacroProblem, VOLUME_TOL};
use crate::tensor::{Material, Tensor4Sym};

/// A sharp configuration given by level sets: `{φ = 1} = {ℓ_φ ≥ 0}` on the
/// macro grid and `{m = 2} = {ℓ_m ≥ 0}` on the periodic cell grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpDesign {
    pub phi_level: ScalarField,
    pub m_level: ScalarField,
}

impl SharpDesign {
    pub fn new(phi_level: ScalarField, m_level: ScalarField) -> Result<Self> {
        if phi_level.grid.periodic || !m_level.grid.periodic {
            return Err(Error::Contract(
                "φ level set must live on Ω and m level set on the periodic cell".into(),
            ));
        }
        Ok(Self { phi_level, m_level })
    }

    /// Indicator of `{φ = 1}` at the macro Gauss points (`4e + q`).
    pub fn phi_samples(&self) -> Vec<f64> {
        indicator(&self.phi_level, 1.0, 0.0)
    }

    /// `m ∈ {1, 2}` at the cell Gauss points.
    pub fn m_samples(&self) -> MicroSamples {
        let v = indicator(&self.m_level, 2.0, 1.0);
        MicroSamples::from_fn(self.m_level.grid, |e, q| v[4 * e + q])
    }

    pub fn phi_interface(&self) -> InterfacePolyline {
        extract_interface(&self.phi_level, Domain::Omega)
    }

    pub fn m_interface(&self) -> InterfacePolyline {
        extract_interface(&self.m_level, Domain::Cell)
    }

    /// `(∫_Ω φ, ∫_Y m)`.
    pub fn volumes(&self) -> (f64, f64) {
        let wp = self.phi_level.grid.quad_weight();
        let wm = self.m_level.grid.quad_weight();
        (
            wp * self.phi_samples().iter().sum::<f64>(),
            wm * self.m_samples().values.iter().sum::<f64>(),
        )
    }

    pub fn is_admissible(&self, caps: &Caps) -> bool {
        let (v, w) = self.volumes();
        v <= caps.volume + VOLUME_TOL * self.phi_level.grid.area() && w <= caps.micro + VOLUME_TOL
    }
}

fn indicator(level: &ScalarField, on: f64, off: f64) -> Vec<f64> {
    (0..4 * level.grid.num_elements())
        .map(|k| {
            if level.eval_quad(k / 4, k % 4) >= 0.0 {
                on
            } else {
                off
            }
        })
        .collect()
}

/// `compliance + c_H (𝒫({φ=1}; Ω) + 𝒫({m=2}; Y))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SharpCost {
    pub compliance: f64,
    pub perimeter_phi: f64,
    pub perimeter_m: f64,
    pub total: f64,
}

/// Sharp cost from a compliance and the interface lengths; `+∞` when the
/// volume caps are violated.
pub fn eval_js(design: &SharpDesign, compliance: f64, well: &DoubleWell, caps: &Caps) -> SharpCost {
    let perimeter_phi = design.phi_interface().perimeter();
    let perimeter_m = design.m_interface().perimeter();
    let sum = compliance + well.c_h() * (perimeter_phi + perimeter_m);
    let total = if design.is_admissible(caps) {
        sum
    } else {
        f64::INFINITY
    };
    SharpCost {
        compliance,
        perimeter_phi,
        perimeter_m,
        total,
    }
}

/// The sharp problem: macro boundary value problem, cell mesh and material.
#[derive(Debug, Clone)]
pub struct SharpProblem {
    pub problem: MacroProblem,
    pub cell: CellMesh,
    pub material: Material,
    pub well: DoubleWell,
}

/// Cell solution inside `{φ = 1}` on a (possibly transported) microstructure.
#[derive(Debug, Clone)]
pub struct MicroState {
    pub cell: CellProblem,
    /// Correctors in reference coordinates, i.e. `w(t)∘S_t`.
    pub correctors: GeneralCorrectors,
    pub cstar: Tensor4Sym,
}

impl MicroState {
    /// The correctors in the form the reference-configuration formulas use.
    pub fn corrector_set(&self) -> CorrectorSet {
        CorrectorSet {
            s: 1.0,
            m_key: self.cell.micro.key(),
            w: self.correctors.w.clone(),
            strains: self.correctors.strains.clone(),
        }
    }
}

/// State of a transported configuration, in reference coordinates.
#[derive(Debug, Clone)]
pub struct SharpState {
    pub t: f64,
    pub micro: MicroState,
    /// `u(t)∘T_t`.
    pub u: DisplacementField,
    pub compliance: f64,
    pub perimeter_phi: f64,
    pub perimeter_m: f64,
    /// `compliance + c_H (perimeters)`.
    pub js: f64,
    pub phi_samples: Vec<f64>,
}

fn pullback_coefficient(d: Tensor4Sym, p: &FlowPoint) -> QuadCoefficient {
    if p.f == [[1.0, 0.0], [0.0, 1.0]] {
        return QuadCoefficient::plain(d);
    }
    let a = p.inverse();
    QuadCoefficient {
        d,
        grad_map: Some([[a[0][0], a[1][0]], [a[0][1], a[1][1]]]),
        weight_factor: p.det(),
    }
}

fn quad_flows(grid: &StructuredGrid, field: &VariationField, t: f64) -> Vec<FlowPoint> {
    (0..4 * grid.num_elements())
        .into_par_iter()
        .map(|k| flow_point(field, grid.quad_point(k / 4, k % 4), t))
        .collect()
}

impl SharpProblem {
    /// `C*(1, m∘S_t⁻¹)` and the pulled-back correctors.
    pub fn micro_state(
        &self,
        design: &SharpDesign,
        psi: &VariationField,
        t: f64,
    ) -> Result<MicroState> {
        if design.m_level.grid != self.cell.grid {
            return Err(Error::Contract(
                "m level set does not live on the cell mesh".into(),
            ));
        }
        let cell = CellProblem::from_samples(self.cell, self.material, design.m_samples());
        let flows = quad_flows(&self.cell.grid, psi, t);
        let coefs: Vec<QuadCoefficient> = cell
            .coefficients(1.0)
            .into_iter()
            .zip(&flows)
            .map(|(c, p)| pullback_coefficient(c.d, p))
            .collect();
        let correctors = solve_general(&self.cell.grid, &coefs, cell.opts)?;
        let cstar = correctors.cstar;
        Ok(MicroState {
            cell,
            correctors,
            cstar,
        })
    }

    /// Equilibrium and sharp cost of `(φ∘T_t⁻¹, m∘S_t⁻¹)`.
    pub fn transported_state(
        &self,
        design: &SharpDesign,
        phi: &VariationField,
        psi: &VariationField,
        t: f64,
    ) -> Result<SharpState> {
        let grid = self.problem.mesh.grid;
        if design.phi_level.grid != grid {
            return Err(Error::Contract(
                "φ level set does not live on the macro mesh".into(),
            ));
        }
        let micro = self.micro_state(design, psi, t)?;
        let c2 = self.material.c2;
        let samples = design.phi_samples();
        let flows = quad_flows(&grid, phi, t);
        let coefs: Vec<QuadCoefficient> = (0..samples.len())
            .map(|k| {
                pullback_coefficient(if samples[k] == 1.0 { micro.cstar } else { c2 }, &flows[k])
            })
            .collect();
        let k = assemble_elasticity_general(&grid, |e, q| coefs[4 * e + q])?;

        let loads = &self.problem.loads;
        let mut rhs = if loads.f.is_zero() {
            vec![0.0; 2 * grid.num_nodes()]
        } else {
            assemble_body_load(&grid, |ctx| {
                let i = 4 * ctx.e + ctx.q;
                let p = &flows[i];
                let f = loads.f.eval(p.x);
                let w = samples[i] * p.det();
                [w * f[0], w * f[1]]
            })
        };
        if !loads.g.is_zero() {
            let mesh = &self.problem.mesh;
            let tr = assemble_traction(mesh, |x| {
                let p = flow_point(phi, x, t);
                let s = p.stretch(boundary_tangent(mesh.lx(), mesh.ly(), x));
                let g = loads.g.eval(p.x);
                [s * g[0], s * g[1]]
            });
            rhs.iter_mut().zip(&tr).for_each(|(a, b)| *a += b);
        }
        let (u, _) = self.problem.solve_system(&k, &rhs)?;
        let compliance = dot(&rhs, &u.to_interleaved());

        let perimeter_phi = design
            .phi_interface()
            .mapped(|x| flow_point(phi, x, t).x)
            .perimeter();
        let perimeter_m = design
            .m_interface()
            .mapped(|y| flow_point(psi, y, t).x)
            .perimeter();
        let js = compliance + self.well.c_h() * (perimeter_phi + perimeter_m);
        Ok(SharpState {
            t,
            micro,
            u,
            compliance,
            perimeter_phi,
            perimeter_m,
            js,
            phi_samples: samples,
        })
    }

    /// Equilibrium of the untransported design.
    pub fn state(&self, design: &SharpDesign) -> Result<SharpState> {
        let zero_phi = VariationField::zero(Domain::Omega);
        let zero_psi = VariationField::zero(Domain::Cell);
        self.transported_state(design, &zero_phi, &zero_psi, 0.0)
    }
}

/// Unit tangent of the rectangle boundary at a non-corner point.
pub(crate) fn boundary_tangent(lx: f64, ly: f64, x: [f64; 2]) -> [f64; 2] {
    let tol = 1e-12 * lx.max(ly);
    if x[0].abs() <= tol || (x[0] - lx).abs() <= tol {
        [0.0, 1.0]
    } else {
        [1.0, 0.0]
    }
}
