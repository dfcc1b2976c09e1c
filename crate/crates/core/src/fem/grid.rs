//! Structured Q1 grids, shape functions and 2×2 Gauss quadrature.

use serde::{Deserialize, Serialize};

/// Gauss abscissae on [0, 1] for the 2-point rule.
pub const GAUSS_1D: [f64; 2] = [0.5 - 0.5 / SQRT3, 0.5 + 0.5 / SQRT3];
const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Local node order of an element: (0,0), (1,0), (1,1), (0,1).
pub const LOCAL_NODES: [(usize, usize); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

/// Rectangular grid of `nx × ny` bilinear elements with spacing `hx × hy`.
///
/// A periodic grid identifies the nodes on `x = nx·hx` with those on `x = 0`
/// (and likewise in y), so it has `nx·ny` independent nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructuredGrid {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub periodic: bool,
}

/// Values and physical gradients of the four shape functions at a point.
#[derive(Debug, Clone, Copy)]
pub struct ShapeEval {
    pub n: [f64; 4],
    pub grad: [[f64; 2]; 4],
}

impl StructuredGrid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, periodic: bool) -> Self {
        assert!(
            nx > 0 && ny > 0,
            "grid needs at least one element per direction"
        );
        Self {
            nx,
            ny,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
            periodic,
        }
    }

    pub fn lx(&self) -> f64 {
        self.hx * self.nx as f64
    }

    pub fn ly(&self) -> f64 {
        self.hy * self.ny as f64
    }

    pub fn area(&self) -> f64 {
        self.lx() * self.ly()
    }

    pub fn nodes_x(&self) -> usize {
        if self.periodic {
            self.nx
        } else {
            self.nx + 1
        }
    }

    pub fn nodes_y(&self) -> usize {
        if self.periodic {
            self.ny
        } else {
            self.ny + 1
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes_x() * self.nodes_y()
    }

    pub fn num_elements(&self) -> usize {
        self.nx * self.ny
    }

    /// Node index of lattice point `(i, j)`; periodic grids wrap.
    pub fn node(&self, i: usize, j: usize) -> usize {
        if self.periodic {
            (j % self.ny) * self.nx + (i % self.nx)
        } else {
            debug_assert!(i <= self.nx && j <= self.ny);
            j * (self.nx + 1) + i
        }
    }

    /// Lattice coordinates of a node (first representative for periodic grids).
    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        let w = self.nodes_x();
        (node % w, node / w)
    }

    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        let (i, j) = self.node_ij(node);
        [i as f64 * self.hx, j as f64 * self.hy]
    }

    pub fn element_ij(&self, e: usize) -> (usize, usize) {
        (e % self.nx, e / self.nx)
    }

    pub fn element_nodes(&self, e: usize) -> [usize; 4] {
        let (i, j) = self.element_ij(e);
        LOCAL_NODES.map(|(a, b)| self.node(i + a, j + b))
    }

    pub fn element_origin(&self, e: usize) -> [f64; 2] {
        let (i, j) = self.element_ij(e);
        [i as f64 * self.hx, j as f64 * self.hy]
    }

    /// Physical quadrature weight of one Gauss point.
    pub fn quad_weight(&self) -> f64 {
        0.25 * self.hx * self.hy
    }

    /// Reference coordinates in [0,1]² of Gauss point `q ∈ 0..4`.
    pub fn quad_ref(q: usize) -> [f64; 2] {
        [GAUSS_1D[q % 2], GAUSS_1D[q / 2]]
    }

    pub fn quad_point(&self, e: usize, q: usize) -> [f64; 2] {
        let o = self.element_origin(e);
        let r = Self::quad_ref(q);
        [o[0] + r[0] * self.hx, o[1] + r[1] * self.hy]
    }

    /// Shape functions at reference coordinates `(xi, eta) ∈ [0,1]²`.
    pub fn shape(&self, xi: f64, eta: f64) -> ShapeEval {
        let mut n = [0.0; 4];
        let mut grad = [[0.0; 2]; 4];
        for (a, &(ia, ja)) in LOCAL_NODES.iter().enumerate() {
            let (sx, dsx) = if ia == 0 { (1.0 - xi, -1.0) } else { (xi, 1.0) };
            let (sy, dsy) = if ja == 0 {
                (1.0 - eta, -1.0)
            } else {
                (eta, 1.0)
            };
            n[a] = sx * sy;
            grad[a] = [dsx * sy / self.hx, sx * dsy / self.hy];
        }
        ShapeEval { n, grad }
    }

    pub fn shape_at_quad(&self, q: usize) -> ShapeEval {
        let r = Self::quad_ref(q);
        self.shape(r[0], r[1])
    }

    /// Element containing `x` and the reference coordinates of `x` in it.
    /// Periodic grids wrap `x`; others clamp to the closure of the domain.
    pub fn locate(&self, x: [f64; 2]) -> (usize, [f64; 2]) {
        let (u, v) = if self.periodic {
            (
                x[0].rem_euclid(self.lx()) / self.hx,
                x[1].rem_euclid(self.ly()) / self.hy,
            )
        } else {
            (
                (x[0] / self.hx).clamp(0.0, self.nx as f64),
                (x[1] / self.hy).clamp(0.0, self.ny as f64),
            )
        };
        let i = (u.floor() as usize).min(self.nx - 1);
        let j = (v.floor() as usize).min(self.ny - 1);
        (j * self.nx + i, [u - i as f64, v - j as f64])
    }
}

/// The four Gauss points of every element, with precomputed shape data.
/// On a uniform grid the shape data is the same for every element.
#[derive(Debug, Clone)]
pub struct QuadratureTable {
    pub shapes: [ShapeEval; 4],
    pub weight: f64,
}

impl QuadratureTable {
    pub fn new(grid: &StructuredGrid) -> Self {
        Self {
            shapes: [0, 1, 2, 3].map(|q| grid.shape_at_quad(q)),
            weight: grid.quad_weight(),
        }
    }
}
