//! Macro mesh on Ω with boundary tags, and the periodic unit-cell mesh on Y.

use serde::{Deserialize, Serialize};

use super::grid::StructuredGrid;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn outer_normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }

    /// Unit tangent pointing in the direction of increasing edge index.
    pub fn tangent(self) -> [f64; 2] {
        match self {
            Side::Left | Side::Right => [0.0, 1.0],
            Side::Bottom | Side::Top => [1.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeTag {
    Free,
    Dirichlet,
    Neumann,
}

/// A boundary edge: `side`, index along that side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub side: Side,
    pub index: usize,
}

/// Rectangular macroscopic domain `[0, lx] × [0, ly]` with tagged boundary edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMesh {
    pub grid: StructuredGrid,
    tags: [Vec<EdgeTag>; 4],
}

impl MacroMesh {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || !(lx > 0.0) || !(ly > 0.0) {
            return Err(Error::Config(format!(
                "invalid macro mesh {nx}x{ny} on {lx}x{ly}"
            )));
        }
        let grid = StructuredGrid::new(nx, ny, lx, ly, false);
        let tags = [
            vec![EdgeTag::Free; ny],
            vec![EdgeTag::Free; ny],
            vec![EdgeTag::Free; nx],
            vec![EdgeTag::Free; nx],
        ];
        Ok(Self { grid, tags })
    }

    pub fn lx(&self) -> f64 {
        self.grid.lx()
    }

    pub fn ly(&self) -> f64 {
        self.grid.ly()
    }

    pub fn area(&self) -> f64 {
        self.grid.area()
    }

    fn side_slot(side: Side) -> usize {
        side as usize
    }

    pub fn edges_on(&self, side: Side) -> usize {
        self.tags[Self::side_slot(side)].len()
    }

    pub fn tag(&self, side: Side, index: usize) -> EdgeTag {
        self.tags[Self::side_slot(side)][index]
    }

    /// Tags every edge of `side` whose midpoint coordinate along the side lies
    /// in `[from, to]`.
    pub fn tag_range(&mut self, side: Side, from: f64, to: f64, tag: EdgeTag) {
        let h = match side {
            Side::Left | Side::Right => self.grid.hy,
            Side::Bottom | Side::Top => self.grid.hx,
        };
        for (k, t) in self.tags[Self::side_slot(side)].iter_mut().enumerate() {
            let mid = (k as f64 + 0.5) * h;
            if mid >= from && mid <= to {
                *t = tag;
            }
        }
    }

    pub fn tag_side(&mut self, side: Side, tag: EdgeTag) {
        self.tags[Self::side_slot(side)]
            .iter_mut()
            .for_each(|t| *t = tag);
    }

    /// The two end nodes of a boundary edge, in order of increasing coordinate.
    pub fn edge_nodes(&self, edge: BoundaryEdge) -> [usize; 2] {
        let g = &self.grid;
        let k = edge.index;
        match edge.side {
            Side::Left => [g.node(0, k), g.node(0, k + 1)],
            Side::Right => [g.node(g.nx, k), g.node(g.nx, k + 1)],
            Side::Bottom => [g.node(k, 0), g.node(k + 1, 0)],
            Side::Top => [g.node(k, g.ny), g.node(k + 1, g.ny)],
        }
    }

    pub fn edge_length(&self, edge: BoundaryEdge) -> f64 {
        match edge.side {
            Side::Left | Side::Right => self.grid.hy,
            Side::Bottom | Side::Top => self.grid.hx,
        }
    }

    pub fn edges_with(&self, tag: EdgeTag) -> Vec<BoundaryEdge> {
        let mut out = Vec::new();
        for side in Side::ALL {
            for index in 0..self.edges_on(side) {
                if self.tag(side, index) == tag {
                    out.push(BoundaryEdge { side, index });
                }
            }
        }
        out
    }

    /// Sorted, deduplicated node set of Γ_D.
    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        let mut nodes: Vec<usize> = self
            .edges_with(EdgeTag::Dirichlet)
            .into_iter()
            .flat_map(|e| self.edge_nodes(e))
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Checks that Γ_D is nonempty. Neumann edges touching a Dirichlet node
    /// are accepted with a warning; the shared node stays Dirichlet.
    pub fn validate(&self) -> Result<()> {
        let d = self.dirichlet_nodes();
        if d.is_empty() {
            return Err(Error::Config(
                "Γ_D is empty: the equilibrium problem is ill-posed".into(),
            ));
        }
        let shared = self
            .edges_with(EdgeTag::Neumann)
            .into_iter()
            .flat_map(|e| self.edge_nodes(e))
            .filter(|n| d.binary_search(n).is_ok())
            .count();
        if shared > 0 {
            log::warn!("{shared} Neumann edge endpoint(s) coincide with Dirichlet nodes; treated as Dirichlet");
        }
        Ok(())
    }

    /// Same domain with `nx × ny` elements; each new boundary edge inherits
    /// the tag of the old edge containing its midpoint.
    pub fn remeshed(&self, nx: usize, ny: usize) -> Result<Self> {
        let mut out = MacroMesh::new(nx, ny, self.lx(), self.ly())?;
        for side in Side::ALL {
            let (h_new, h_old) = match side {
                Side::Left | Side::Right => (out.grid.hy, self.grid.hy),
                Side::Bottom | Side::Top => (out.grid.hx, self.grid.hx),
            };
            let n_old = self.edges_on(side);
            for k in 0..out.edges_on(side) {
                let mid = (k as f64 + 0.5) * h_new;
                let old = ((mid / h_old).floor() as usize).min(n_old - 1);
                out.tags[Self::side_slot(side)][k] = self.tag(side, old);
            }
        }
        Ok(out)
    }

    /// Whether a point on ∂Ω lies on a Dirichlet edge (closed).
    pub fn on_dirichlet(&self, x: [f64; 2], tol: f64) -> bool {
        self.edges_with(EdgeTag::Dirichlet).into_iter().any(|e| {
            let [a, b] = self.edge_nodes(e);
            let pa = self.grid.node_coords(a);
            let pb = self.grid.node_coords(b);
            let (lo0, hi0) = (pa[0].min(pb[0]) - tol, pa[0].max(pb[0]) + tol);
            let (lo1, hi1) = (pa[1].min(pb[1]) - tol, pa[1].max(pb[1]) + tol);
            x[0] >= lo0 && x[0] <= hi0 && x[1] >= lo1 && x[1] <= hi1
        })
    }
}

/// Periodic unit cell `Y = [0,1)²` with `n × n` elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMesh {
    pub grid: StructuredGrid,
}

impl CellMesh {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!(
                "cell mesh needs at least 2 elements per side, got {n}"
            )));
        }
        Ok(Self {
            grid: StructuredGrid::new(n, n, 1.0, 1.0, true),
        })
    }

    pub fn n(&self) -> usize {
        self.grid.nx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tagging_and_dirichlet_nodes() {
        let mut m = MacroMesh::new(4, 2, 2.0, 1.0).unwrap();
        assert!(m.validate().is_err());
        m.tag_side(Side::Left, EdgeTag::Dirichlet);
        m.tag_range(Side::Right, 0.4, 0.6, EdgeTag::Neumann);
        assert_eq!(m.dirichlet_nodes(), vec![0, 5, 10]);
        assert_eq!(m.edges_with(EdgeTag::Neumann).len(), 0);
        m.tag_range(Side::Right, 0.0, 0.5, EdgeTag::Neumann);
        assert_eq!(
            m.edges_with(EdgeTag::Neumann),
            vec![BoundaryEdge {
                side: Side::Right,
                index: 0
            }]
        );
        assert_eq!(
            m.edge_nodes(BoundaryEdge {
                side: Side::Right,
                index: 0
            }),
            [4, 9]
        );
        m.validate().unwrap();
        assert!(m.on_dirichlet([0.0, 0.7], 1e-12));
        assert!(!m.on_dirichlet([0.5, 0.0], 1e-12));
    }

    #[test]
    fn cell_mesh_has_n_squared_nodes() {
        let c = CellMesh::new(8).unwrap();
        assert_eq!(c.grid.num_nodes(), 64);
        assert!(CellMesh::new(1).is_err());
    }
}
