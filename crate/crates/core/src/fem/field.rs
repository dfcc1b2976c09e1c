//! Nodal fields on structured grids.

use serde::{Deserialize, Serialize};

use super::grid::StructuredGrid;
use super::mesh::{CellMesh, MacroMesh};
use crate::error::{Error, Result};
use crate::tensor::SymMatrix2;

/// Nodal scalar field with Q1 interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    pub grid: StructuredGrid,
    pub values: Vec<f64>,
}

/// Scalar field on the periodic unit cell (the microstructure `m`).
pub type PeriodicScalarField = ScalarField;

impl ScalarField {
    pub fn from_fn(grid: StructuredGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.num_nodes())
            .map(|n| f(grid.node_coords(n)))
            .collect();
        Self { grid, values }
    }

    pub fn constant(grid: StructuredGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.num_nodes()],
        }
    }

    pub fn on_macro(mesh: &MacroMesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self::from_fn(mesh.grid, f)
    }

    pub fn on_cell(mesh: &CellMesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self::from_fn(mesh.grid, f)
    }

    pub fn from_values(grid: StructuredGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.num_nodes() {
            return Err(Error::Contract(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.num_nodes()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Q1 interpolant at element `e`, reference point `r`.
    pub fn eval_local(&self, e: usize, r: [f64; 2]) -> f64 {
        let s = self.grid.shape(r[0], r[1]);
        let nodes = self.grid.element_nodes(e);
        (0..4).map(|a| s.n[a] * self.values[nodes[a]]).sum()
    }

    pub fn eval(&self, x: [f64; 2]) -> f64 {
        let (e, r) = self.grid.locate(x);
        self.eval_local(e, r)
    }

    pub fn eval_quad(&self, e: usize, q: usize) -> f64 {
        self.eval_local(e, StructuredGrid::quad_ref(q))
    }

    pub fn grad_quad(&self, e: usize, q: usize) -> [f64; 2] {
        let s = self.grid.shape_at_quad(q);
        let nodes = self.grid.element_nodes(e);
        let mut g = [0.0; 2];
        for a in 0..4 {
            g[0] += s.grad[a][0] * self.values[nodes[a]];
            g[1] += s.grad[a][1] * self.values[nodes[a]];
        }
        g
    }

    /// Gradient of the Q1 interpolant at a physical point.
    pub fn grad_at(&self, x: [f64; 2]) -> [f64; 2] {
        let (e, r) = self.grid.locate(x);
        let s = self.grid.shape(r[0], r[1]);
        let nodes = self.grid.element_nodes(e);
        let mut g = [0.0; 2];
        for a in 0..4 {
            g[0] += s.grad[a][0] * self.values[nodes[a]];
            g[1] += s.grad[a][1] * self.values[nodes[a]];
        }
        g
    }

    /// Nodal interpolation onto another grid. Exact for nested refinements.
    pub fn resample(&self, grid: StructuredGrid) -> ScalarField {
        ScalarField::from_fn(grid, |x| self.eval(x))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Checks `lo ≤ values ≤ hi` nodally, with absolute slack `tol`.
    pub fn within(&self, lo: f64, hi: f64, tol: f64) -> bool {
        self.values.iter().all(|&v| v >= lo - tol && v <= hi + tol)
    }

    pub fn axpy(&self, k: f64, other: &ScalarField) -> ScalarField {
        debug_assert_eq!(self.grid, other.grid);
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + k * b)
            .collect();
        ScalarField {
            grid: self.grid,
            values,
        }
    }
}

/// Nodal vector field (displacements, correctors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub grid: StructuredGrid,
    pub values: Vec<[f64; 2]>,
}

/// Macroscopic displacement.
pub type DisplacementField = VectorField;

impl VectorField {
    pub fn zeros(grid: StructuredGrid) -> Self {
        Self {
            grid,
            values: vec![[0.0; 2]; grid.num_nodes()],
        }
    }

    pub fn from_fn(grid: StructuredGrid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let values = (0..grid.num_nodes())
            .map(|n| f(grid.node_coords(n)))
            .collect();
        Self { grid, values }
    }

    /// Interleaved `(u₀ˣ, u₀ʸ, u₁ˣ, …)` representation.
    pub fn to_interleaved(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| [v[0], v[1]]).collect()
    }

    pub fn from_interleaved(grid: StructuredGrid, data: &[f64]) -> Self {
        debug_assert_eq!(data.len(), 2 * grid.num_nodes());
        Self {
            grid,
            values: data.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
        }
    }

    pub fn eval_local(&self, e: usize, r: [f64; 2]) -> [f64; 2] {
        let s = self.grid.shape(r[0], r[1]);
        let nodes = self.grid.element_nodes(e);
        let mut u = [0.0; 2];
        for a in 0..4 {
            u[0] += s.n[a] * self.values[nodes[a]][0];
            u[1] += s.n[a] * self.values[nodes[a]][1];
        }
        u
    }

    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        let (e, r) = self.grid.locate(x);
        self.eval_local(e, r)
    }

    /// Full gradient `G[i][j] = ∂_j u_i` at reference point `r` of element `e`.
    pub fn grad_local(&self, e: usize, r: [f64; 2]) -> [[f64; 2]; 2] {
        let s = self.grid.shape(r[0], r[1]);
        let nodes = self.grid.element_nodes(e);
        let mut g = [[0.0; 2]; 2];
        for a in 0..4 {
            let u = self.values[nodes[a]];
            for i in 0..2 {
                for j in 0..2 {
                    g[i][j] += u[i] * s.grad[a][j];
                }
            }
        }
        g
    }

    pub fn grad_quad(&self, e: usize, q: usize) -> [[f64; 2]; 2] {
        self.grad_local(e, StructuredGrid::quad_ref(q))
    }

    pub fn strain_quad(&self, e: usize, q: usize) -> SymMatrix2 {
        SymMatrix2::sym(self.grad_quad(e, q))
    }

    /// Nodal mean per component (equals the integral mean on a periodic grid).
    pub fn nodal_mean(&self) -> [f64; 2] {
        let n = self.values.len() as f64;
        let mut m = [0.0; 2];
        for v in &self.values {
            m[0] += v[0];
            m[1] += v[1];
        }
        [m[0] / n, m[1] / n]
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| [v[0].abs(), v[1].abs()])
            .fold(0.0, f64::max)
    }

    pub fn axpy(&self, k: f64, other: &VectorField) -> VectorField {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| [a[0] + k * b[0], a[1] + k * b[1]])
            .collect();
        VectorField {
            grid: self.grid,
            values,
        }
    }

    /// `L²` and `H¹`-seminorm squared of the Q1 interpolant (2×2 Gauss).
    pub fn norms_sq(&self) -> (f64, f64) {
        let w = self.grid.quad_weight();
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for e in 0..self.grid.num_elements() {
            for q in 0..4 {
                let r = StructuredGrid::quad_ref(q);
                let u = self.eval_local(e, r);
                let g = self.grad_local(e, r);
                l2 += w * (u[0] * u[0] + u[1] * u[1]);
                h1 += w
                    * (g[0][0] * g[0][0]
                        + g[0][1] * g[0][1]
                        + g[1][0] * g[1][0]
                        + g[1][1] * g[1][1]);
            }
        }
        (l2, h1)
    }

    /// Full `H¹` norm.
    pub fn h1_norm(&self) -> f64 {
        let (l2, h1) = self.norms_sq();
        (l2 + h1).sqrt()
    }
}
