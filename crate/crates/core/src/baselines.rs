//! Comparators: the dense kernel matrix, uniform Nyström, and the
//! Eckart–Young optimum of the truncated SVD.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hdf::{relative_error_by, ErrorMode, DENSE_ENTRY_CAP};
use crate::kernels::IsotropicKernel;
use crate::linalg::{dot, sym_eigenvalues, Cholesky, DenseMatrix};

/// `K_ij = k(|x_i - y_j|)`, refusing matrices above [`DENSE_ENTRY_CAP`] entries.
pub fn dense_kernel_matrix(kernel: &IsotropicKernel, x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, m) = (x.rows(), y.rows());
    if x.cols() != y.cols() {
        return Err(Error::invalid("point sets have different dimensions"));
    }
    if n.saturating_mul(m) > DENSE_ENTRY_CAP {
        return Err(Error::SizeCap {
            what: "dense kernel matrix",
            size: n.saturating_mul(m),
            cap: DENSE_ENTRY_CAP,
        });
    }
    let mut k = DenseMatrix::zeros(n, m);
    if m > 0 {
        k.data_mut().par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = kernel.between(x.row(i), y.row(j));
            }
        });
    }
    Ok(k)
}

/// `K ~ C W^{-1} C^T` with `C = K[:, U]`, `W = K[U, U]` for uniformly sampled
/// inducing points `U`.
#[derive(Debug, Clone)]
pub struct NystromFactorization {
    indices: Vec<usize>,
    c: DenseMatrix,
    core: Cholesky,
}

impl NystromFactorization {
    pub fn rank(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// The interpolation matrix `C` (`N x m`).
    pub fn interpolation(&self) -> &DenseMatrix {
        &self.c
    }

    /// Jitter that was added to the core diagonal.
    pub fn jitter(&self) -> f64 {
        self.core.jitter()
    }

    /// `F = C L^{-T}` with `W + jitter I = L L^T`, so that `K ~ F F^T`.
    pub fn lowrank_factor(&self) -> DenseMatrix {
        let (n, m) = self.c.shape();
        let mut f = DenseMatrix::zeros(n, m);
        f.data_mut().par_chunks_mut(m.max(1)).enumerate().for_each(|(i, row)| {
            if m > 0 {
                row.copy_from_slice(self.c.row(i));
                self.core.forward_solve_in_place(row);
            }
        });
        f
    }

    pub fn to_dense(&self) -> Result<DenseMatrix> {
        let f = self.lowrank_factor();
        f.matmul_transb(&f)
    }

    /// `||K - F F^T||_F / ||K||_F` on the points the approximation was built from.
    pub fn relative_error(&self, kernel: &IsotropicKernel, x: &DenseMatrix, mode: ErrorMode) -> Result<f64> {
        if x.rows() != self.c.rows() {
            return Err(Error::invalid(format!(
                "Nyström approximation covers {} points, got {}",
                self.c.rows(),
                x.rows()
            )));
        }
        let f = self.lowrank_factor();
        relative_error_by(|i, j| dot(f.row(i), f.row(j)), kernel, x, x, mode)
    }

    /// `C (W^{-1} (C^T w))`.
    pub fn matvec(&self, w: &[f64]) -> Result<Vec<f64>> {
        let mut t = self.c.matvec_transpose(w)?;
        self.core.solve_in_place(&mut t);
        self.c.matvec(&t)
    }
}

/// Nyström approximation of `K(X, X)` with `m` inducing points drawn uniformly
/// without replacement.
pub fn nystrom(kernel: &IsotropicKernel, x: &DenseMatrix, m: usize, seed: u64) -> Result<NystromFactorization> {
    let n = x.rows();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("Nyström rank must lie in 1..={n}, got {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = sample(&mut rng, n, m).into_vec();
    let inducing = x.select_rows(&indices);
    let c = dense_kernel_matrix(kernel, x, &inducing)?;
    let w = c.select_rows(&indices);
    let core = Cholesky::factor_with_default_jitter(&w)?;
    Ok(NystromFactorization { indices, c, core })
}

/// Singular values of `k` in decreasing order.
pub fn singular_values(k: &DenseMatrix) -> Result<Vec<f64>> {
    let (n, m) = k.shape();
    if n == m && k.asymmetry() == 0.0 {
        let mut s: Vec<f64> = sym_eigenvalues(k)?.into_iter().map(f64::abs).collect();
        s.sort_by(|a, b| b.total_cmp(a));
        return Ok(s);
    }
    let gram = if n >= m { k.transpose_matmul(k)? } else { k.matmul_transb(k)? };
    let mut s: Vec<f64> = sym_eigenvalues(&gram)?
        .into_iter()
        .map(|v| v.max(0.0).sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Optimal rank-`r` relative Frobenius error `sqrt(sum_{i>r} s_i^2) / ||K||_F`.
pub fn svd_optimal_error(k: &DenseMatrix, r: usize) -> Result<f64> {
    Ok(optimal_errors_from_spectrum(&singular_values(k)?, &[r])[0])
}

/// Optimal errors at several ranks from one spectrum.
pub fn optimal_errors_from_spectrum(spectrum: &[f64], ranks: &[usize]) -> Vec<f64> {
    let total: f64 = spectrum.iter().map(|s| s * s).sum();
    ranks
        .iter()
        .map(|&r| {
            if r >= spectrum.len() || total == 0.0 {
                return 0.0;
            }
            let tail: f64 = spectrum[r..].iter().map(|s| s * s).sum();
            (tail / total).sqrt()
        })
        .collect()
}
