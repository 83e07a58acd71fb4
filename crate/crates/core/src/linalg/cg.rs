use super::matrix::{dot, DenseMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERS: usize = 1024;

/// A square linear map applied without forming its matrix.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        debug_assert_eq!(self.rows(), self.cols());
        self.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityOperator(pub usize);

impl LinearOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

#[derive(Debug, Clone)]
pub struct DiagonalOperator(pub Vec<f64>);

impl LinearOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, xi), di) in y.iter_mut().zip(x).zip(&self.0) {
            *yi = di * xi;
        }
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LinearOperator for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    /// Residual norm `||b - A x||` (recursively updated) after each iteration,
    /// starting with `||b||`.
    pub residuals: Vec<f64>,
}

/// Preconditioned conjugate gradients from a zero initial guess.
///
/// Stops once `||b - A x|| <= tol * ||b||`. When the iteration budget runs out
/// the iterate with the smallest residual is returned with `converged = false`.
pub fn cg_solve(
    op: &dyn LinearOperator,
    b: &[f64],
    precond: &dyn LinearOperator,
    tol: f64,
    max_iters: usize,
) -> Result<CgOutcome> {
    let n = op.dim();
    if b.len() != n || precond.dim() != n {
        return Err(Error::invalid(format!(
            "CG dimension mismatch: operator {n}, rhs {}, preconditioner {}",
            b.len(),
            precond.dim()
        )));
    }
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    let mut residuals = vec![bnorm];
    if bnorm == 0.0 {
        return Ok(CgOutcome {
            x,
            iters: 0,
            converged: true,
            residuals,
        });
    }
    let target = tol * bnorm;

    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut best = (bnorm, x.clone());

    for iter in 1..=max_iters {
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        let alpha = rz / pap;
        if !alpha.is_finite() {
            return Err(Error::numeric(format!(
                "CG breakdown at iteration {iter}: p^T A p = {pap:e}"
            )));
        }
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = dot(&r, &r).sqrt();
        if !rnorm.is_finite() {
            return Err(Error::numeric(format!("CG produced NaN at iteration {iter}")));
        }
        residuals.push(rnorm);
        if rnorm < best.0 {
            best = (rnorm, x.clone());
        }
        if rnorm <= target {
            return Ok(CgOutcome {
                x,
                iters: iter,
                converged: true,
                residuals,
            });
        }
        precond.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(CgOutcome {
        x: best.1,
        iters: max_iters,
        converged: false,
        residuals,
    })
}
