//! Plane-strain tensor algebra.
//!
//! Symmetric strains and stresses are stored as [`SymMatrix2`]. Fourth-order
//! tensors with major and minor symmetry are stored as a 3×3 matrix in the
//! *engineering* Voigt convention: strain vectors are `(e11, e22, 2·e12)`,
//! stress vectors are `(s11, s22, s12)` and
//!
//! ```text
//! D[a][b] = C_ijkl,   a = (ij), b = (kl) ∈ {11, 22, 12}
//! ```
//!
//! With this map `C E · E == γᵀ D γ` where `γ` is the engineering strain of
//! `E`, i.e. the full-index contraction is reproduced exactly. Spectral
//! quantities are taken on the Mandel matrix `S D S` with `S = diag(1, 1, √2)`,
//! which is the matrix of `C` acting on symmetric matrices with the Frobenius
//! inner product.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric 2×2 matrix (strain or stress).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SymMatrix2 {
    pub e11: f64,
    pub e22: f64,
    pub e12: f64,
}

impl SymMatrix2 {
    pub const ZERO: SymMatrix2 = SymMatrix2 {
        e11: 0.0,
        e22: 0.0,
        e12: 0.0,
    };

    pub const fn new(e11: f64, e22: f64, e12: f64) -> Self {
        Self { e11, e22, e12 }
    }

    /// The unit strains `e_i ⊙ e_j` for `(ij) = 11, 22, 12`.
    pub const fn unit(a: usize) -> Self {
        match a {
            0 => Self::new(1.0, 0.0, 0.0),
            1 => Self::new(0.0, 1.0, 0.0),
            _ => Self::new(0.0, 0.0, 0.5),
        }
    }

    /// Symmetric part of a full 2×2 matrix `m[i][j]`.
    pub fn sym(m: [[f64; 2]; 2]) -> Self {
        Self::new(m[0][0], m[1][1], 0.5 * (m[0][1] + m[1][0]))
    }

    /// Engineering vector `(e11, e22, 2 e12)`.
    pub fn engineering(&self) -> [f64; 3] {
        [self.e11, self.e22, 2.0 * self.e12]
    }

    pub fn from_engineering(v: [f64; 3]) -> Self {
        Self::new(v[0], v[1], 0.5 * v[2])
    }

    /// Stress-like vector `(s11, s22, s12)`.
    pub fn components(&self) -> [f64; 3] {
        [self.e11, self.e22, self.e12]
    }

    /// Frobenius inner product `A · B = Σ A_ij B_ij`.
    pub fn dot(&self, other: &SymMatrix2) -> f64 {
        self.e11 * other.e11 + self.e22 * other.e22 + 2.0 * self.e12 * other.e12
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// Frobenius product with a general (not necessarily symmetric) matrix.
    pub fn dot_full(&self, m: [[f64; 2]; 2]) -> f64 {
        self.e11 * m[0][0] + self.e22 * m[1][1] + self.e12 * (m[0][1] + m[1][0])
    }

    pub fn trace(&self) -> f64 {
        self.e11 + self.e22
    }
}

impl Add for SymMatrix2 {
    type Output = SymMatrix2;
    fn add(self, o: SymMatrix2) -> SymMatrix2 {
        SymMatrix2::new(self.e11 + o.e11, self.e22 + o.e22, self.e12 + o.e12)
    }
}

impl AddAssign for SymMatrix2 {
    fn add_assign(&mut self, o: SymMatrix2) {
        *self = *self + o;
    }
}

impl Sub for SymMatrix2 {
    type Output = SymMatrix2;
    fn sub(self, o: SymMatrix2) -> SymMatrix2 {
        SymMatrix2::new(self.e11 - o.e11, self.e22 - o.e22, self.e12 - o.e12)
    }
}

impl Mul<SymMatrix2> for f64 {
    type Output = SymMatrix2;
    fn mul(self, m: SymMatrix2) -> SymMatrix2 {
        SymMatrix2::new(self * m.e11, self * m.e22, self * m.e12)
    }
}

impl Neg for SymMatrix2 {
    type Output = SymMatrix2;
    fn neg(self) -> SymMatrix2 {
        -1.0 * self
    }
}

/// Fourth-order elasticity tensor with major and minor symmetry, stored in
/// engineering Voigt form (see the module docs).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Tensor4Sym {
    pub voigt: [[f64; 3]; 3],
}

impl Tensor4Sym {
    pub const ZERO: Tensor4Sym = Tensor4Sym {
        voigt: [[0.0; 3]; 3],
    };

    /// Builds a tensor from a Voigt matrix; the input must be symmetric.
    pub fn from_voigt(voigt: [[f64; 3]; 3]) -> Result<Self> {
        let t = Tensor4Sym { voigt };
        if !t.is_symmetric(1e-12) {
            return Err(Error::Contract(format!(
                "Voigt matrix is not symmetric: {voigt:?}"
            )));
        }
        Ok(t)
    }

    /// Tensor acting as the identity on symmetric matrices.
    pub fn identity() -> Self {
        Tensor4Sym {
            voigt: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.5]],
        }
    }

    /// Full-index component `C_ijkl` with `i, j, k, l ∈ {0, 1}`.
    pub fn component(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.voigt[voigt_index(i, j)][voigt_index(k, l)]
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let scale = self.max_abs().max(1.0);
        (0..3).all(|a| (0..3).all(|b| (self.voigt[a][b] - self.voigt[b][a]).abs() <= tol * scale))
    }

    pub fn max_abs(&self) -> f64 {
        self.voigt
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Contraction `C E`.
    pub fn apply(&self, e: &SymMatrix2) -> SymMatrix2 {
        let g = e.engineering();
        let mut s = [0.0; 3];
        for (a, row) in self.voigt.iter().enumerate() {
            s[a] = row[0] * g[0] + row[1] * g[1] + row[2] * g[2];
        }
        SymMatrix2::new(s[0], s[1], s[2])
    }

    /// `C E · F`, symmetric in `E` and `F`.
    pub fn energy(&self, e: &SymMatrix2, f: &SymMatrix2) -> f64 {
        self.quad_form(&e.engineering(), &f.engineering())
    }

    /// `aᵀ D b` on engineering vectors.
    pub fn quad_form(&self, a: &[f64; 3], b: &[f64; 3]) -> f64 {
        let mut s = 0.0;
        for p in 0..3 {
            let mut row = 0.0;
            for q in 0..3 {
                row += self.voigt[p][q] * b[q];
            }
            s += a[p] * row;
        }
        s
    }

    /// Mandel matrix `S D S`, `S = diag(1, 1, √2)`.
    pub fn mandel(&self) -> [[f64; 3]; 3] {
        // weights s_a s_b, with the shear-shear product exactly 2
        const R: f64 = std::f64::consts::SQRT_2;
        const W: [[f64; 3]; 3] = [[1.0, 1.0, R], [1.0, 1.0, R], [R, R, 2.0]];
        let mut m = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] = W[a][b] * self.voigt[a][b];
            }
        }
        m
    }

    pub fn scale(&self, k: f64) -> Tensor4Sym {
        let mut t = *self;
        t.voigt.iter_mut().flatten().for_each(|v| *v *= k);
        t
    }

    /// `self += k * other`.
    pub fn add_scaled(&mut self, k: f64, other: &Tensor4Sym) {
        for a in 0..3 {
            for b in 0..3 {
                self.voigt[a][b] += k * other.voigt[a][b];
            }
        }
    }

    /// Max-entry distance, used for relative comparisons in tests and checks.
    pub fn max_abs_diff(&self, other: &Tensor4Sym) -> f64 {
        (*self - *other).max_abs()
    }
}

impl Add for Tensor4Sym {
    type Output = Tensor4Sym;
    fn add(mut self, o: Tensor4Sym) -> Tensor4Sym {
        self.add_scaled(1.0, &o);
        self
    }
}

impl Sub for Tensor4Sym {
    type Output = Tensor4Sym;
    fn sub(mut self, o: Tensor4Sym) -> Tensor4Sym {
        self.add_scaled(-1.0, &o);
        self
    }
}

impl Mul<Tensor4Sym> for f64 {
    type Output = Tensor4Sym;
    fn mul(self, t: Tensor4Sym) -> Tensor4Sym {
        t.scale(self)
    }
}

fn voigt_index(i: usize, j: usize) -> usize {
    match (i, j) {
        (0, 0) => 0,
        (1, 1) => 1,
        _ => 2,
    }
}

/// Plane-strain isotropic tensor from Young's modulus and Poisson ratio.
pub fn make_isotropic(young: f64, poisson: f64) -> Result<Tensor4Sym> {
    if !(young > 0.0 && young.is_finite()) {
        return Err(Error::Parameter(format!(
            "Young's modulus must be positive, got {young}"
        )));
    }
    if !(poisson > -1.0 && poisson < 0.5) {
        return Err(Error::Parameter(format!(
            "Poisson ratio must lie in (-1, 0.5), got {poisson}"
        )));
    }
    let lambda = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson));
    let mu = young / (2.0 * (1.0 + poisson));
    Ok(Tensor4Sym {
        voigt: [
            [lambda + 2.0 * mu, lambda, 0.0],
            [lambda, lambda + 2.0 * mu, 0.0],
            [0.0, 0.0, mu],
        ],
    })
}

/// Smallest and largest eigenvalue of `C` on symmetric matrices.
pub fn spectral_bounds(c: &Tensor4Sym) -> Result<(f64, f64)> {
    if !c.is_symmetric(1e-12) {
        return Err(Error::Contract(
            "spectral_bounds requires a major-symmetric tensor".into(),
        ));
    }
    let m = c.mandel();
    let mat = Matrix3::from_fn(|a, b| m[a][b]);
    let eig = SymmetricEigen::new(mat);
    let lo = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// The two constituent tensors: the stiff phase `C₁` (graded by `m`) and the
/// Ersatz filler `C₂ = δ C₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub c1: Tensor4Sym,
    pub c2: Tensor4Sym,
}

impl Material {
    pub fn new(c1: Tensor4Sym, c2: Tensor4Sym) -> Result<Self> {
        for (name, c) in [("C1", &c1), ("C2", &c2)] {
            let (alpha, _) = spectral_bounds(c)?;
            if alpha <= 0.0 {
                return Err(Error::Parameter(format!(
                    "{name} is not positive definite (alpha = {alpha})"
                )));
            }
        }
        Ok(Self { c1, c2 })
    }

    /// Isotropic stiff phase with Ersatz contrast `delta`.
    pub fn isotropic(young: f64, poisson: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Parameter(format!(
                "Ersatz contrast must be positive, got {delta}"
            )));
        }
        let c1 = make_isotropic(young, poisson)?;
        Self::new(c1, c1.scale(delta))
    }

    /// `C(φ, m) = φ m C₁ + (1 − φ) C₂`.
    pub fn coefficient(&self, phi: f64, m: f64) -> Tensor4Sym {
        let mut c = self.c2.scale(1.0 - phi);
        c.add_scaled(phi * m, &self.c1);
        c
    }

    /// Coefficient of the linearization: `ψ (m C₁ − C₂) + φ μ C₁`.
    pub fn coefficient_variation(&self, phi: f64, m: f64, psi: f64, mu: f64) -> Tensor4Sym {
        let mut c = self.c2.scale(-psi);
        c.add_scaled(psi * m + phi * mu, &self.c1);
        c
    }

    /// Spectral bounds valid for every `C(φ, m)` with `φ ∈ [0,1]`, `m ∈ [1,2]`.
    ///
    /// `C(φ, m)` is a convex combination of `m C₁` and `C₂`, so its spectrum
    /// lies between the extreme eigenvalues of `C₁`, `2 C₁` and `C₂`.
    pub fn admissible_bounds(&self) -> Result<(f64, f64)> {
        let (a1, b1) = spectral_bounds(&self.c1)?;
        let (a2, b2) = spectral_bounds(&self.c2)?;
        Ok((a1.min(a2), (2.0 * b1).max(b2)))
    }
}
