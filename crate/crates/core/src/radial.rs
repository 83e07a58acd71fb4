//! Radial factors `R^(k)_{ij} = Z_k r^(k)(|x_i|, |y_j|)` and their
//! compression by QR of both Vandermonde-like sides plus a small SVD (or a
//! symmetric eigendecomposition when both sides coincide).

use crate::error::{Error, Result};
use crate::expansion::CoefficientTensor;
use crate::linalg::{eig_sym, qr_tall, svd_small, DenseMatrix};

/// `Y_{il} = |y_i|^{k + 2l}` for `l < len`, with `0^0 = 1`.
pub fn radial_y(k: usize, len: usize, norms: &[f64]) -> DenseMatrix {
    let mut y = DenseMatrix::zeros(norms.len(), len);
    for (i, &r) in norms.iter().enumerate() {
        let row = y.row_mut(i);
        let r2 = r * r;
        let mut v = r.powi(k as i32);
        for entry in row.iter_mut() {
            *entry = v;
            v *= r2;
        }
    }
    y
}

/// `S_{l,l'} = z_k T'_{k, k+2l, k+2l'}`; symmetric, and `X = Y S`.
pub fn mixing_matrix(tensor: &CoefficientTensor, k: usize, z_k: f64) -> DenseMatrix {
    let mut s = tensor.block(k).clone();
    s.scale(z_k);
    s
}

/// `X_{il} = z_k sum_n |x_i|^n T'_{k,k+2l,n}` and `Y_{il} = |y_i|^{k+2l}`.
pub fn build_radial_matrices(
    tensor: &CoefficientTensor,
    k: usize,
    z_k: f64,
    norms_x: &[f64],
    norms_y: &[f64],
) -> (DenseMatrix, DenseMatrix) {
    let len = tensor.block_len(k);
    let s = mixing_matrix(tensor, k, z_k);
    let mut x = DenseMatrix::zeros(norms_x.len(), len);
    for (i, &r) in norms_x.iter().enumerate() {
        let r2 = r * r;
        let lead = r.powi(k as i32);
        let row = x.row_mut(i);
        for (l, entry) in row.iter_mut().enumerate() {
            // Horner in r^2 over n = k + 2l'.
            let mut acc = 0.0;
            for lp in (0..len).rev() {
                acc = acc * r2 + s[(l, lp)];
            }
            *entry = lead * acc;
        }
    }
    (x, radial_y(k, len, norms_y))
}

/// Compressed order-`k` radial factor: `R ~ Xbar Ybar^T`, or
/// `R ~ Xbar diag(eigvals) Xbar^T` in the symmetric variant.
#[derive(Debug, Clone)]
pub struct RadialFactors {
    pub k: usize,
    pub xbar: DenseMatrix,
    /// `None` in the symmetric variant (`Ybar = Xbar`).
    pub ybar: Option<DenseMatrix>,
    /// Retained singular values (absolute eigenvalues when symmetric).
    pub sigma_kept: Vec<f64>,
    /// Signed retained eigenvalues, symmetric variant only.
    pub eigvals: Option<Vec<f64>>,
}

impl RadialFactors {
    pub fn rank(&self) -> usize {
        self.sigma_kept.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.eigvals.is_some()
    }

    /// Dense `Xbar Ybar^T` (or `Xbar D Xbar^T`).
    pub fn reconstruct(&self) -> Result<DenseMatrix> {
        match (&self.ybar, &self.eigvals) {
            (Some(y), _) => self.xbar.matmul_transb(y),
            (None, Some(d)) => {
                let mut xd = self.xbar.clone();
                for i in 0..xd.rows() {
                    for (v, s) in xd.row_mut(i).iter_mut().zip(d) {
                        *v *= s;
                    }
                }
                xd.matmul_transb(&self.xbar)
            }
            (None, None) => Err(Error::numeric("radial factors missing both Ybar and D")),
        }
    }
}

/// Untruncated decomposition of one radial block; truncation is a cheap
/// second step so callers can pick the threshold after seeing all orders.
#[derive(Debug, Clone)]
pub struct RadialDecomposition {
    k: usize,
    qx: DenseMatrix,
    qy: Option<DenseMatrix>,
    u: DenseMatrix,
    v: Option<DenseMatrix>,
    /// Descending by magnitude; signed in the symmetric variant.
    values: Vec<f64>,
}

fn thin_qr(a: &DenseMatrix, k: usize) -> Result<(DenseMatrix, DenseMatrix)> {
    if a.rows() < a.cols() {
        return Ok((DenseMatrix::identity(a.rows()), a.clone()));
    }
    qr_tall(a).map_err(|e| Error::numeric(format!("QR of radial factor for order {k} failed: {e}")))
}

impl RadialDecomposition {
    pub fn new(k: usize, x: &DenseMatrix, y: &DenseMatrix) -> Result<Self> {
        if x.cols() != y.cols() {
            return Err(Error::invalid("radial factors must have equal column counts"));
        }
        let (qx, rx) = thin_qr(x, k)?;
        let (qy, ry) = thin_qr(y, k)?;
        let svd = svd_small(&rx.matmul_transb(&ry)?)
            .map_err(|e| Error::numeric(format!("SVD for order {k} failed: {e}")))?;
        Ok(Self {
            k,
            qx,
            qy: Some(qy),
            u: svd.u,
            v: Some(svd.v),
            values: svd.s,
        })
    }

    /// Symmetric variant: `R = Q (R_Y S R_Y^T) Q^T`.
    pub fn new_sym(k: usize, y: &DenseMatrix, s: &DenseMatrix) -> Result<Self> {
        if s.rows() != y.cols() || s.cols() != y.cols() {
            return Err(Error::invalid("mixing matrix shape does not match the radial factor"));
        }
        if s.asymmetry() > 1e-10 * s.max_abs().max(f64::MIN_POSITIVE) {
            return Err(Error::numeric(format!("mixing matrix for order {k} is not symmetric")));
        }
        let (q, r) = thin_qr(y, k)?;
        let mut middle = r.matmul(s)?.matmul_transb(&r)?;
        // Symmetrize away roundoff so the eigensolver's check is about structure.
        let n = middle.rows();
        for i in 0..n {
            for j in i + 1..n {
                let avg = 0.5 * (middle[(i, j)] + middle[(j, i)]);
                middle[(i, j)] = avg;
                middle[(j, i)] = avg;
            }
        }
        let eig = eig_sym(&middle)
            .map_err(|e| Error::numeric(format!("eigendecomposition for order {k} failed: {e}")))?;
        Ok(Self {
            k,
            qx: q,
            qy: None,
            u: eig.vectors,
            v: None,
            values: eig.values,
        })
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn is_symmetric(&self) -> bool {
        self.v.is_none()
    }

    /// Largest singular value (largest `|eigenvalue|` when symmetric).
    pub fn leading_value(&self) -> f64 {
        self.values.first().map_or(0.0, |v| v.abs())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Retained rank at threshold `tau`: `#{|value| > tau}`.
    pub fn rank_at(&self, tau: f64) -> usize {
        self.values.iter().take_while(|v| v.abs() > tau).count()
    }

    pub fn truncate(&self, tau: f64) -> Result<RadialFactors> {
        let s = self.rank_at(tau);
        let kept: Vec<f64> = self.values[..s].to_vec();
        let u = self.u.leading_columns(s);
        match &self.v {
            Some(v) => {
                let mut xbar = self.qx.matmul(&u)?;
                let mut ybar = self.qy.as_ref().expect("asymmetric has Q_Y").matmul(&v.leading_columns(s))?;
                let roots: Vec<f64> = kept.iter().map(|v| v.sqrt()).collect();
                scale_columns(&mut xbar, &roots);
                scale_columns(&mut ybar, &roots);
                check_finite(&xbar, self.k)?;
                check_finite(&ybar, self.k)?;
                Ok(RadialFactors {
                    k: self.k,
                    xbar,
                    ybar: Some(ybar),
                    sigma_kept: kept,
                    eigvals: None,
                })
            }
            None => {
                let xbar = self.qx.matmul(&u)?;
                check_finite(&xbar, self.k)?;
                Ok(RadialFactors {
                    k: self.k,
                    xbar,
                    ybar: None,
                    sigma_kept: kept.iter().map(|v| v.abs()).collect(),
                    eigvals: Some(kept),
                })
            }
        }
    }
}

fn scale_columns(m: &mut DenseMatrix, s: &[f64]) {
    for i in 0..m.rows() {
        for (v, f) in m.row_mut(i).iter_mut().zip(s) {
            *v *= f;
        }
    }
}

fn check_finite(m: &DenseMatrix, k: usize) -> Result<()> {
    if m.is_finite() {
        Ok(())
    } else {
        Err(Error::numeric(format!("radial factor for order {k} is not finite")))
    }
}

/// QR both sides, SVD the small product, keep singular values above `tau`.
pub fn compress_radial(k: usize, x: &DenseMatrix, y: &DenseMatrix, tau: f64) -> Result<RadialFactors> {
    RadialDecomposition::new(k, x, y)?.truncate(tau)
}

/// Symmetric variant with mixing matrix `s` (`X = Y s`).
pub fn compress_radial_sym(k: usize, y: &DenseMatrix, s: &DenseMatrix, tau: f64) -> Result<RadialFactors> {
    RadialDecomposition::new_sym(k, y, s)?.truncate(tau)
}
