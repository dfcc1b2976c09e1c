//! Jacobi-preconditioned conjugate gradients with Dirichlet elimination or
//! a periodic zero-mean constraint.

use super::sparse::{dot, norm, CsrMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraint<'a> {
    /// Unknowns at the listed DOFs are fixed to zero and removed from the
    /// system (applied as a mask, which is algebraically the same).
    DirichletEliminated(&'a [usize]),
    /// Periodic problem: the solution of each of `components` interleaved
    /// components has zero nodal mean, and the constant mode is projected
    /// out of the residual in every iteration.
    MeanZero { components: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: None,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            max_iter: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Relative residual `‖b − A x‖ / ‖b‖` of the returned iterate.
    pub residual: f64,
}

fn project(c: &Constraint, v: &mut [f64], mask: &[bool]) {
    match c {
        Constraint::DirichletEliminated(_) => {
            for (x, &fixed) in v.iter_mut().zip(mask) {
                if fixed {
                    *x = 0.0;
                }
            }
        }
        Constraint::MeanZero { components } => {
            let k = *components;
            let n = (v.len() / k) as f64;
            for c in 0..k {
                let mean = v.iter().skip(c).step_by(k).sum::<f64>() / n;
                v.iter_mut().skip(c).step_by(k).for_each(|x| *x -= mean);
            }
        }
    }
}

/// Solves `A x = b` on the constrained subspace.
pub fn solve_spd(
    a: &CsrMatrix,
    rhs: &[f64],
    constraint: Constraint,
    opts: SolveOptions,
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.n;
    if rhs.len() != n {
        return Err(Error::Contract(format!(
            "rhs has length {}, operator is {n}×{n}",
            rhs.len()
        )));
    }
    let mut mask = vec![false; n];
    if let Constraint::DirichletEliminated(fixed) = constraint {
        for &d in fixed {
            mask[d] = true;
        }
    }
    let mut b = rhs.to_vec();
    project(&constraint, &mut b, &mask);
    let bnorm = norm(&b);
    if bnorm == 0.0 {
        return Ok((
            vec![0.0; n],
            SolveReport {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let max_iter = opts.max_iter.unwrap_or(10 * n + 100);

    let mut x = match x0 {
        Some(x0) => {
            let mut x = x0.to_vec();
            project(&constraint, &mut x, &mask);
            x
        }
        None => vec![0.0; n],
    };
    let mut r = b.clone();
    if x0.is_some() {
        let ax = a.apply(&x);
        r.iter_mut().zip(&ax).for_each(|(ri, axi)| *ri -= axi);
        project(&constraint, &mut r, &mask);
    }
    let precondition = |r: &[f64]| -> Vec<f64> {
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
        project(&constraint, &mut z, &mask);
        z
    };
    let mut z = precondition(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = norm(&r) / bnorm;
    let mut it = 0;
    while res > opts.tol && it < max_iter {
        a.mul_vec(&p, &mut ap);
        project(&constraint, &mut ap, &mask);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = norm(&r) / bnorm;
        it += 1;
    }
    project(&constraint, &mut x, &mask);
    // report the true residual, not the recursively updated one
    let mut rt = a.apply(&x);
    rt.iter_mut().zip(&b).for_each(|(ri, bi)| *ri = bi - *ri);
    project(&constraint, &mut rt, &mask);
    let true_res = norm(&rt) / bnorm;
    if res > opts.tol || true_res > 10.0 * opts.tol {
        return Err(Error::Solver {
            iterations: it,
            residual: true_res.max(res),
            target: opts.tol,
        });
    }
    log::trace!("pcg converged in {it} iterations, residual {true_res:.2e}");
    Ok((
        x,
        SolveReport {
            iterations: it,
            residual: true_res,
        },
    ))
}
