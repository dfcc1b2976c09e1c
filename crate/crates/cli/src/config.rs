//! Run configuration: a flat TOML key set with environment overrides.
//!
//! Every key may be overridden by an environment variable named
//! `MICROTOP_<KEY>` (key upper-cased). The value is parsed as a TOML value,
//! so `MICROTOP_EPS_LIST="[0.5, 0.25]"` and `MICROTOP_NX=48` both work; a
//! value that does not parse is taken as a string.

use std::path::{Path, PathBuf};

use microtop::eps::{DoubleWell, SweepKind};
use microtop::fem::{CellMesh, EdgeTag, MacroMesh, PeriodicScalarField, ScalarField, Side};
use microtop::homog::CoefficientMode;
use microtop::optim::OptimConfig;
use microtop::sharp::{Domain, VariationField, VelocityKind};
use microtop::state::{Caps, LoadCase, MacroProblem, RegWeights, VectorLoad};
use microtop::tensor::Material;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const ENV_PREFIX: &str = "MICROTOP_";

/// A run of boundary edges whose midpoints lie in `[from, to]` along `side`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRange {
    pub side: Side,
    #[serde(default)]
    pub from: f64,
    #[serde(default = "infinite")]
    pub to: f64,
}

fn infinite() -> f64 {
    f64::INFINITY
}

/// Closed-form nodal fields for `φ` (on Ω) and `m` (on the unit cell).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Pattern {
    Constant {
        value: f64,
    },
    /// `high` in two opposite quadrants of the cell, `low` elsewhere.
    Checkerboard {
        low: f64,
        high: f64,
    },
    /// `high` on the band `|y₁ − ½| ≤ width/2`, `low` elsewhere.
    Laminate {
        low: f64,
        high: f64,
        width: f64,
    },
    /// `mean + amp · sin(2πx₁/l₁) cos(2πx₂/l₂)` on the domain `l₁ × l₂`.
    Smooth {
        mean: f64,
        amp: f64,
    },
    /// `inside` on the closed disk, `outside` elsewhere.
    Disk {
        center: [f64; 2],
        radius: f64,
        inside: f64,
        outside: f64,
    },
}

impl Pattern {
    /// Bounds on the values the pattern takes.
    pub fn range(&self) -> (f64, f64) {
        let pair = |a: f64, b: f64| (a.min(b), a.max(b));
        match *self {
            Pattern::Constant { value } => (value, value),
            Pattern::Checkerboard { low, high } | Pattern::Laminate { low, high, .. } => {
                pair(low, high)
            }
            Pattern::Smooth { mean, amp } => (mean - amp.abs(), mean + amp.abs()),
            Pattern::Disk {
                inside, outside, ..
            } => pair(inside, outside),
        }
    }

    pub fn eval(&self, x: [f64; 2], size: [f64; 2]) -> f64 {
        use std::f64::consts::PI;
        match *self {
            Pattern::Constant { value } => value,
            Pattern::Checkerboard { low, high } => {
                if (x[0] / size[0] < 0.5) == (x[1] / size[1] < 0.5) {
                    high
                } else {
                    low
                }
            }
            Pattern::Laminate { low, high, width } => {
                if (x[0] / size[0] - 0.5).abs() <= 0.5 * width {
                    high
                } else {
                    low
                }
            }
            Pattern::Smooth { mean, amp } => {
                mean + amp * (2.0 * PI * x[0] / size[0]).sin() * (2.0 * PI * x[1] / size[1]).cos()
            }
            Pattern::Disk {
                center,
                radius,
                inside,
                outside,
            } => {
                if (x[0] - center[0]).hypot(x[1] - center[1]) <= radius {
                    inside
                } else {
                    outside
                }
            }
        }
    }
}

/// Level sets of sharp designs; the set is `{ℓ ≥ 0}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Full,
    Empty,
    Disk {
        center: [f64; 2],
        radius: f64,
    },
    Hole {
        center: [f64; 2],
        radius: f64,
    },
    /// `|x₁ − center| ≤ width/2`.
    Band {
        center: f64,
        width: f64,
    },
    /// `x · normal ≤ offset`.
    HalfPlane {
        normal: [f64; 2],
        offset: f64,
    },
}

impl Shape {
    pub fn level(&self, x: [f64; 2]) -> f64 {
        match *self {
            Shape::Full => 1.0,
            Shape::Empty => -1.0,
            Shape::Disk { center, radius } => radius - (x[0] - center[0]).hypot(x[1] - center[1]),
            Shape::Hole { center, radius } => (x[0] - center[0]).hypot(x[1] - center[1]) - radius,
            Shape::Band { center, width } => 0.5 * width - (x[0] - center).abs(),
            Shape::HalfPlane { normal, offset } => offset - (x[0] * normal[0] + x[1] * normal[1]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientChoice {
    Table,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // Macro domain, boundary and loads.
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub dirichlet: Vec<EdgeRange>,
    pub neumann: Vec<EdgeRange>,
    pub body_force: VectorLoad,
    pub traction: VectorLoad,

    // Material: isotropic stiff phase and Ersatz contrast.
    pub young: f64,
    pub poisson: f64,
    pub delta: f64,

    // Unit cell and design.
    pub cell_n: usize,
    pub phi: Pattern,
    pub m: Pattern,
    pub volume_cap: f64,
    pub micro_cap: f64,
    pub reg_phi: f64,
    pub reg_m: f64,
    pub coefficients: CoefficientChoice,
    pub n_levels: usize,

    // Macro PCG iteration cap (default: 10·DOFs + 100).
    pub solver_max_iter: Option<usize>,

    // Optimizer.
    pub step0: f64,
    pub armijo_c: f64,
    pub shrink: f64,
    pub grow: f64,
    pub max_step: f64,
    pub max_iters: usize,
    pub max_shrinks: usize,
    pub tol_stationarity: f64,
    pub h1_precondition: Option<f64>,

    // homogenize: number of φ-levels in the output table.
    pub levels: usize,

    // check-grad and sharp-derivative.
    pub fd_steps: Vec<f64>,
    pub directions: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,

    // gamma-sweep.
    pub sweep: SweepKind,
    pub eps_list: Vec<f64>,
    pub elements_per_cell: usize,
    pub well_scale: f64,
    pub disk_center: [f64; 2],
    pub disk_radius: f64,
    pub disk_grid: usize,

    // mm-profile.
    pub profile_eps: f64,
    pub profile_points: usize,

    // sharp-derivative.
    pub phi_level: Shape,
    pub m_level: Shape,
    pub phi_velocity: VelocityKind,
    pub m_velocity: VelocityKind,

    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nx: 32,
            ny: 16,
            lx: 2.0,
            ly: 1.0,
            dirichlet: vec![EdgeRange {
                side: Side::Left,
                from: 0.0,
                to: f64::INFINITY,
            }],
            neumann: vec![EdgeRange {
                side: Side::Right,
                from: 0.375,
                to: 0.625,
            }],
            body_force: VectorLoad::Zero,
            traction: VectorLoad::Constant { value: [0.0, -1.0] },
            young: 1.0,
            poisson: 0.3,
            delta: 1e-3,
            cell_n: 16,
            phi: Pattern::Constant { value: 0.4 },
            m: Pattern::Smooth {
                mean: 1.49,
                amp: 0.3,
            },
            volume_cap: 0.8,
            micro_cap: 1.5,
            reg_phi: 0.5,
            reg_m: 0.5,
            coefficients: CoefficientChoice::Table,
            n_levels: 17,
            solver_max_iter: None,
            step0: 1.0,
            armijo_c: 1e-4,
            shrink: 0.5,
            grow: 2.0,
            max_step: 64.0,
            max_iters: 200,
            max_shrinks: 30,
            tol_stationarity: 1e-4,
            h1_precondition: Some(1.0),
            levels: 11,
            fd_steps: vec![1e-2, 5e-3, 2.5e-3],
            directions: 3,
            ratio_min: 3.0,
            ratio_max: 5.0,
            sweep: SweepKind::Energy,
            eps_list: vec![0.5, 0.25, 0.125],
            elements_per_cell: 16,
            well_scale: 1.0,
            disk_center: [0.5, 0.5],
            disk_radius: 0.25,
            disk_grid: 256,
            profile_eps: 1.0 / 32.0,
            profile_points: 1024,
            phi_level: Shape::Hole {
                center: [1.0, 0.5],
                radius: 0.25,
            },
            m_level: Shape::Band {
                center: 0.5,
                width: 0.4,
            },
            phi_velocity: VelocityKind::Radial {
                center: [1.0, 0.5],
                radius: 0.45,
                amp: 1.0,
            },
            m_velocity: VelocityKind::PeriodicSine { amp: [0.05, 0.03] },
            seed: 0,
            out: PathBuf::from("out"),
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses one override value as a TOML value, falling back to a string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

impl RunConfig {
    /// Reads `path` (or starts from the defaults), applies overrides from
    /// `env` and validates.
    pub fn load(
        path: Option<&Path>,
        env: impl IntoIterator<Item = (String, String)>,
    ) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        let mut overrides: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| {
                k.strip_prefix(ENV_PREFIX)
                    .map(|key| (key.to_ascii_lowercase(), v))
            })
            .collect();
        overrides.sort();
        for (key, raw) in overrides {
            log::info!("override {key} = {raw}");
            table.insert(key, parse_value(&raw));
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.nx == 0 || self.ny == 0 || self.cell_n < 2 {
            return Err(config_err("mesh sizes must be positive and cell_n ≥ 2"));
        }
        if !(self.lx > 0.0 && self.ly > 0.0) {
            return Err(config_err("domain lengths must be positive"));
        }
        let area = self.lx * self.ly;
        if !(self.volume_cap > 0.0 && self.volume_cap < area) {
            return Err(config_err(format!("volume_cap must lie in (0, {area})")));
        }
        if !(self.micro_cap > 1.0 && self.micro_cap < 2.0) {
            return Err(config_err("micro_cap must lie in (1, 2)"));
        }
        let (plo, phi_hi) = self.phi.range();
        if plo < 0.0 || phi_hi > 1.0 {
            return Err(config_err(format!(
                "phi pattern takes values in [{plo}, {phi_hi}], outside [0, 1]"
            )));
        }
        let (mlo, mhi) = self.m.range();
        if mlo < 1.0 || mhi > 2.0 {
            return Err(config_err(format!(
                "m pattern takes values in [{mlo}, {mhi}], outside [1, 2]"
            )));
        }
        if self.n_levels < 2 || self.levels < 2 {
            return Err(config_err("n_levels and levels must be at least 2"));
        }
        if self.fd_steps.len() < 2 || self.fd_steps.iter().any(|t| !(*t > 0.0)) {
            return Err(config_err("fd_steps needs at least two positive steps"));
        }
        if !(self.ratio_min < self.ratio_max) {
            return Err(config_err("ratio_min must be below ratio_max"));
        }
        if !(self.profile_eps > 0.0) || self.profile_points < 4 {
            return Err(config_err(
                "profile_eps must be positive and profile_points ≥ 4",
            ));
        }
        if !(self.disk_radius > 0.0) || self.disk_grid == 0 {
            return Err(config_err("disk_radius and disk_grid must be positive"));
        }
        Ok(())
    }

    pub fn material(&self) -> Result<Material, CliError> {
        Ok(Material::isotropic(self.young, self.poisson, self.delta)?)
    }

    pub fn mesh(&self) -> Result<MacroMesh, CliError> {
        let mut mesh = MacroMesh::new(self.nx, self.ny, self.lx, self.ly)?;
        for r in &self.neumann {
            mesh.tag_range(r.side, r.from, r.to, EdgeTag::Neumann);
        }
        for r in &self.dirichlet {
            mesh.tag_range(r.side, r.from, r.to, EdgeTag::Dirichlet);
        }
        Ok(mesh)
    }

    pub fn problem(&self) -> Result<MacroProblem, CliError> {
        let loads = LoadCase {
            f: self.body_force.clone(),
            g: self.traction.clone(),
        };
        let mut problem = MacroProblem::new(self.mesh()?, loads)?;
        problem.opts.max_iter = self.solver_max_iter;
        Ok(problem)
    }

    pub fn cell_mesh(&self) -> Result<CellMesh, CliError> {
        Ok(CellMesh::new(self.cell_n)?)
    }

    pub fn phi_field(&self, mesh: &MacroMesh) -> ScalarField {
        let size = [self.lx, self.ly];
        ScalarField::on_macro(mesh, |x| self.phi.eval(x, size))
    }

    pub fn m_field(&self, cell: &CellMesh) -> PeriodicScalarField {
        PeriodicScalarField::on_cell(cell, |y| self.m.eval(y, [1.0, 1.0]))
    }

    pub fn caps(&self) -> Caps {
        Caps {
            volume: self.volume_cap,
            micro: self.micro_cap,
        }
    }

    pub fn weights(&self) -> RegWeights {
        RegWeights {
            phi: self.reg_phi,
            m: self.reg_m,
        }
    }

    pub fn mode(&self) -> CoefficientMode {
        match self.coefficients {
            CoefficientChoice::Table => CoefficientMode::Table {
                n_levels: self.n_levels,
            },
            CoefficientChoice::Exact => CoefficientMode::Exact,
        }
    }

    pub fn well(&self) -> Result<DoubleWell, CliError> {
        Ok(DoubleWell::new(self.well_scale)?)
    }

    pub fn optim(&self) -> OptimConfig {
        OptimConfig {
            caps: self.caps(),
            weights: self.weights(),
            step0: self.step0,
            armijo_c: self.armijo_c,
            shrink: self.shrink,
            grow: self.grow,
            max_step: self.max_step,
            max_iters: self.max_iters,
            max_shrinks: self.max_shrinks,
            tol_stationarity: self.tol_stationarity,
            h1_precondition: self.h1_precondition,
            mode: self.mode(),
            cell_n: self.cell_n,
        }
    }

    pub fn phi_variation(&self) -> VariationField {
        VariationField::new(self.phi_velocity, Domain::Omega)
    }

    pub fn m_variation(&self) -> VariationField {
        VariationField::new(self.m_velocity, Domain::Cell)
    }
}
