use super::matrix::{dot, norm2, DenseMatrix};
use crate::error::{Error, Result};

/// Thin Householder QR of a tall matrix: `A = Q R` with `Q` of size `N x m`
/// having orthonormal columns and `R` upper triangular `m x m`.
pub fn qr_tall(a: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    let (n, m) = a.shape();
    if m == 0 || n < m {
        return Err(Error::invalid(format!(
            "qr_tall needs rows >= cols >= 1, got {n}x{m}"
        )));
    }
    if !a.is_finite() {
        return Err(Error::invalid("qr_tall input contains non-finite entries"));
    }

    // Column-major working copy: column c occupies cols[c*n..(c+1)*n].
    let mut cols = a.transpose().into_vec();
    let mut reflectors: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m);
    let mut r = DenseMatrix::zeros(m, m);

    for j in 0..m {
        let x = &cols[j * n + j..(j + 1) * n];
        let xnorm = norm2(x);
        if xnorm == 0.0 {
            reflectors.push((Vec::new(), 0.0));
        } else {
            let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
            let mut v = x.to_vec();
            v[0] -= alpha;
            let vv = dot(&v, &v);
            let beta = if vv > 0.0 { 2.0 / vv } else { 0.0 };
            for c in j..m {
                let col = &mut cols[c * n + j..(c + 1) * n];
                let s = beta * dot(&v, col);
                for (ci, vi) in col.iter_mut().zip(&v) {
                    *ci -= s * vi;
                }
            }
            cols[j * n + j] = alpha;
            reflectors.push((v, beta));
        }
        for i in 0..=j {
            r[(i, j)] = cols[j * n + i];
        }
    }

    // Accumulate the thin Q by applying reflectors to the leading identity columns.
    let mut q_cols = vec![0.0; m * n];
    for c in 0..m {
        q_cols[c * n + c] = 1.0;
    }
    for j in (0..m).rev() {
        let (v, beta) = &reflectors[j];
        if *beta == 0.0 {
            continue;
        }
        for c in 0..m {
            let col = &mut q_cols[c * n + j..(c + 1) * n];
            let s = beta * dot(v, col);
            if s != 0.0 {
                for (ci, vi) in col.iter_mut().zip(v) {
                    *ci -= s * vi;
                }
            }
        }
    }
    let q = DenseMatrix::from_vec(m, n, q_cols)?.transpose();
    Ok((q, r))
}
