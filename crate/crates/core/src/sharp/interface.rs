//! Interface polylines by marching squares.
//!
//! A sharp set is carried by a nodal level set `ℓ`; the set is `{ℓ ≥ 0}`
//! and its interface is the zero contour of the Q1 interpolant, linearized
//! on every element edge. Segments are oriented with the set on their left,
//! so the left normal is the interior normal.

use serde::{Deserialize, Serialize};

use crate::fem::{ScalarField, StructuredGrid};

/// Which domain an interface lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    /// The macroscopic rectangle; its boundary never counts as interface.
    Omega,
    /// The periodic unit cell.
    Cell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Segment {
    pub fn length(&self) -> f64 {
        ((self.b[0] - self.a[0]).powi(2) + (self.b[1] - self.a[1]).powi(2)).sqrt()
    }

    pub fn tangent(&self) -> [f64; 2] {
        let l = self.length();
        [(self.b[0] - self.a[0]) / l, (self.b[1] - self.a[1]) / l]
    }

    /// Unit normal pointing into the set.
    pub fn normal(&self) -> [f64; 2] {
        let t = self.tangent();
        [-t[1], t[0]]
    }

    pub fn point(&self, s: f64) -> [f64; 2] {
        [
            self.a[0] + s * (self.b[0] - self.a[0]),
            self.a[1] + s * (self.b[1] - self.a[1]),
        ]
    }
}

/// Oriented segments of the zero contour.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfacePolyline {
    pub domain: Domain,
    pub segments: Vec<Segment>,
}

/// Segments shorter than this are dropped (contour through a node).
const MIN_LENGTH: f64 = 1e-14;

impl InterfacePolyline {
    pub fn perimeter(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Moves every vertex by `f` (segments are transported independently).
    pub fn mapped(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let segments = self
            .segments
            .iter()
            .map(|s| Segment {
                a: f(s.a),
                b: f(s.b),
            })
            .collect();
        Self {
            domain: self.domain,
            segments,
        }
    }

    /// `∫ F(x, ν) ds` with 3-point Gauss on every segment.
    pub fn integrate(&self, f: impl Fn([f64; 2], [f64; 2]) -> f64) -> f64 {
        const X: [f64; 3] = [0.112_701_665_379_258_3, 0.5, 0.887_298_334_620_741_7];
        const W: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];
        self.segments
            .iter()
            .map(|s| {
                let n = s.normal();
                s.length()
                    * X.iter()
                        .zip(W)
                        .map(|(&x, w)| w * f(s.point(x), n))
                        .sum::<f64>()
            })
            .sum()
    }

    /// Nodal indicator of the set on `grid`: a node is inside when it lies
    /// on the interior side of its nearest segment (minimum image on the
    /// periodic cell). An empty interface gives `empty` everywhere.
    pub fn rasterize(&self, grid: StructuredGrid, empty: bool) -> ScalarField {
        let (lx, ly) = (grid.lx(), grid.ly());
        let wrap = |d: f64, l: f64| {
            if self.domain == Domain::Cell {
                d - l * (d / l).round()
            } else {
                d
            }
        };
        ScalarField::from_fn(grid, |x| {
            let mut best = (f64::INFINITY, empty);
            for s in &self.segments {
                let (dx, dy) = (s.b[0] - s.a[0], s.b[1] - s.a[1]);
                let ax = [wrap(x[0] - s.a[0], lx), wrap(x[1] - s.a[1], ly)];
                let l2 = dx * dx + dy * dy;
                let t = ((ax[0] * dx + ax[1] * dy) / l2).clamp(0.0, 1.0);
                let r = [ax[0] - t * dx, ax[1] - t * dy];
                let d2 = r[0] * r[0] + r[1] * r[1];
                if d2 < best.0 {
                    // Side from the cross product with the segment direction.
                    best = (d2, dx * ax[1] - dy * ax[0] >= 0.0);
                }
            }
            if best.1 {
                1.0
            } else {
                0.0
            }
        })
    }

    /// Links segments into chains of points (for export). On the periodic
    /// cell chains break at the seam.
    pub fn chains(&self) -> Vec<Vec<[f64; 2]>> {
        let key = |p: [f64; 2]| ((p[0] * 1e9).round() as i64, (p[1] * 1e9).round() as i64);
        let mut by_start = std::collections::HashMap::new();
        let mut ends = std::collections::HashSet::new();
        for (k, s) in self.segments.iter().enumerate() {
            by_start.insert(key(s.a), k);
            ends.insert(key(s.b));
        }
        let mut used = vec![false; self.segments.len()];
        let mut out = Vec::new();
        // Open chains start where no segment ends; closed ones anywhere.
        let starts: Vec<usize> = (0..self.segments.len())
            .filter(|&k| !ends.contains(&key(self.segments[k].a)))
            .chain(0..self.segments.len())
            .collect();
        for k0 in starts {
            if used[k0] {
                continue;
            }
            let mut chain = vec![self.segments[k0].a];
            let mut k = k0;
            loop {
                used[k] = true;
                chain.push(self.segments[k].b);
                match by_start.get(&key(self.segments[k].b)) {
                    Some(&next) if !used[next] => k = next,
                    _ => break,
                }
            }
            out.push(chain);
        }
        out
    }
}

/// Zero contour of a nodal level set; the set is `{ℓ ≥ 0}`.
pub fn extract_interface(level: &ScalarField, domain: Domain) -> InterfacePolyline {
    let g = &level.grid;
    let mut segments = Vec::new();
    for e in 0..g.num_elements() {
        let nodes = g.element_nodes(e);
        let vals = nodes.map(|n| level.values[n]);
        let inside = vals.map(|v| v >= 0.0);
        if inside.iter().all(|&b| b) || inside.iter().all(|&b| !b) {
            continue;
        }
        let corners = element_corners(g, e);
        // Crossings in counterclockwise order, tagged in→out (true) or out→in.
        let mut crossings: Vec<([f64; 2], bool)> = Vec::with_capacity(4);
        for k in 0..4 {
            let l = (k + 1) % 4;
            if inside[k] != inside[l] {
                let t = vals[k] / (vals[k] - vals[l]);
                let p = [
                    corners[k][0] + t * (corners[l][0] - corners[k][0]),
                    corners[k][1] + t * (corners[l][1] - corners[k][1]),
                ];
                crossings.push((p, inside[k]));
            }
        }
        let center_inside = vals.iter().sum::<f64>() >= 0.0;
        let n = crossings.len();
        for k in 0..n {
            let (p, leaving) = crossings[k];
            if !leaving {
                continue;
            }
            // Pair with the next crossing when the center joins the inside
            // corners (or there is no ambiguity), else with the previous one.
            let partner = if n == 2 || center_inside {
                (k + 1) % n
            } else {
                (k + n - 1) % n
            };
            let s = Segment {
                a: p,
                b: crossings[partner].0,
            };
            if s.length() > MIN_LENGTH {
                segments.push(s);
            }
        }
    }
    InterfacePolyline { domain, segments }
}

fn element_corners(g: &StructuredGrid, e: usize) -> [[f64; 2]; 4] {
    let o = g.element_origin(e);
    [
        [o[0], o[1]],
        [o[0] + g.hx, o[1]],
        [o[0] + g.hx, o[1] + g.hy],
        [o[0], o[1] + g.hy],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_inside_corner_orientation() {
        let g = StructuredGrid::new(1, 1, 1.0, 1.0, false);
        let level = ScalarField::from_values(g, vec![1.0, -1.0, -1.0, -1.0]).unwrap();
        let p = extract_interface(&level, Domain::Omega);
        assert_eq!(p.segments.len(), 1);
        let s = p.segments[0];
        let n = s.normal();
        // The normal points toward the inside corner at the origin.
        let m = s.point(0.5);
        assert!(n[0] * (0.0 - m[0]) + n[1] * (0.0 - m[1]) > 0.0);
    }

    #[test]
    fn saddle_is_resolved_by_the_center() {
        let g = StructuredGrid::new(1, 1, 1.0, 1.0, false);
        let joined = ScalarField::from_values(g, vec![1.0, -0.5, -0.5, 1.0]).unwrap();
        let split = ScalarField::from_values(g, vec![0.5, -1.0, -1.0, 0.5]).unwrap();
        for f in [joined, split] {
            let p = extract_interface(&f, Domain::Omega);
            assert_eq!(p.segments.len(), 2);
            // Each segment cuts off one corner; the normal points at it
            // exactly when that corner is inside.
            for s in &p.segments {
                let m = s.point(0.5);
                let n = s.normal();
                let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
                let d = |c: &[f64; 2]| (c[0] - m[0]).powi(2) + (c[1] - m[1]).powi(2);
                let k = (0..4)
                    .min_by(|&a, &b| d(&corners[a]).total_cmp(&d(&corners[b])))
                    .unwrap();
                let c = corners[k];
                let towards = n[0] * (c[0] - m[0]) + n[1] * (c[1] - m[1]) > 0.0;
                assert_eq!(towards, f.values[k] >= 0.0);
            }
        }
    }

    #[test]
    fn chains_link_a_closed_contour() {
        let g = StructuredGrid::new(16, 16, 1.0, 1.0, false);
        let level = ScalarField::from_fn(g, |x| {
            0.3 - ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2)).sqrt()
        });
        let p = extract_interface(&level, Domain::Omega);
        let chains = p.chains();
        assert_eq!(chains.len(), 1);
        let c = &chains[0];
        assert_eq!(c.len(), p.segments.len() + 1);
        assert!((c[0][0] - c[c.len() - 1][0]).abs() < 1e-12);
    }
}
