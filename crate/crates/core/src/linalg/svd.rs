use super::matrix::{dot, norm2, DenseMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `A = U diag(s) V^T`.
#[derive(Debug, Clone)]
pub struct Svd {
    /// `m x q`, `q = min(m, n)`.
    pub u: DenseMatrix,
    /// Nonincreasing, nonnegative.
    pub s: Vec<f64>,
    /// `n x q`.
    pub v: DenseMatrix,
}

/// SVD of a small dense matrix by one-sided (Hestenes) Jacobi rotations.
pub fn svd_small(a: &DenseMatrix) -> Result<Svd> {
    if !a.is_finite() {
        return Err(Error::invalid("svd input contains non-finite entries"));
    }
    let (m, n) = a.shape();
    if m < n {
        let t = svd_small(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    if n == 0 {
        return Ok(Svd {
            u: DenseMatrix::zeros(m, 0),
            s: Vec::new(),
            v: DenseMatrix::zeros(0, 0),
        });
    }

    // Columns of A and V stored contiguously.
    let mut w = a.transpose().into_vec();
    let mut v = DenseMatrix::identity(n).into_vec();
    let tol = f64::EPSILON * (m as f64).sqrt();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (wp, wq) = pair(&mut w, m, p, q);
                let alpha = dot(wp, wp);
                let beta = dot(wq, wq);
                let gamma = dot(wp, wq);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(wp, wq, c, s);
                let (vp, vq) = pair(&mut v, n, p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numeric(format!(
            "one-sided Jacobi SVD did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vec<f64> = (0..n).map(|j| norm2(&w[j * m..(j + 1) * m])).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v_out = DenseMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    let smax = norms[order[0]];
    let mut missing = Vec::new();
    for (out, &j) in order.iter().enumerate() {
        let sigma = norms[j];
        s.push(sigma);
        for i in 0..n {
            v_out[(i, out)] = v[j * n + i];
        }
        if sigma > 0.0 && sigma > smax * f64::EPSILON * 1e-3 {
            u_cols.push(w[j * m..(j + 1) * m].iter().map(|x| x / sigma).collect());
        } else {
            u_cols.push(vec![0.0; m]);
            missing.push(out);
        }
    }
    complete_orthonormal(&mut u_cols, &missing, m);

    let mut u = DenseMatrix::zeros(m, n);
    for (j, col) in u_cols.iter().enumerate() {
        for i in 0..m {
            u[(i, j)] = col[i];
        }
    }
    Ok(Svd { u, s, v: v_out })
}

fn pair(buf: &mut [f64], len: usize, p: usize, q: usize) -> (&mut [f64], &mut [f64]) {
    debug_assert!(p < q);
    let (lo, hi) = buf.split_at_mut(q * len);
    (&mut lo[p * len..(p + 1) * len], &mut hi[..len])
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let a = *xi;
        let b = *yi;
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

/// Fills the listed (zero) columns with unit vectors orthogonal to all others.
pub(crate) fn complete_orthonormal(cols: &mut [Vec<f64>], missing: &[usize], m: usize) {
    let mut candidate = 0usize;
    for &slot in missing {
        while candidate < m {
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for (j, col) in cols.iter().enumerate() {
                    if j == slot || col.iter().all(|&x| x == 0.0) {
                        continue;
                    }
                    let proj = dot(col, &e);
                    for (ei, ci) in e.iter_mut().zip(col) {
                        *ei -= proj * ci;
                    }
                }
            }
            let nrm = norm2(&e);
            if nrm > 0.5 {
                cols[slot] = e.iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reconstruct(svd: &Svd) -> DenseMatrix {
        let mut us = svd.u.clone();
        for i in 0..us.rows() {
            for j in 0..us.cols() {
                us[(i, j)] *= svd.s[j];
            }
        }
        us.matmul_transb(&svd.v).unwrap()
    }

    #[test]
    fn diagonal_values() {
        let svd = svd_small(&DenseMatrix::diag(&[1.0, 3.0])).unwrap();
        assert_eq!(svd.s.len(), 2);
        assert!((svd.s[0] - 3.0).abs() < 1e-15 && (svd.s[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix() {
        let svd = svd_small(&DenseMatrix::zeros(2, 2)).unwrap();
        assert_eq!(svd.s, vec![0.0, 0.0]);
        let utu = svd.u.transpose_matmul(&svd.u).unwrap();
        assert!(utu.sub(&DenseMatrix::identity(2)).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn permutation_matrix() {
        let a = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let svd = svd_small(&a).unwrap();
        assert!((svd.s[0] - 1.0).abs() < 1e-15 && (svd.s[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_rectangular_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(m, n) in &[(7, 4), (4, 7), (12, 12)] {
            let a = DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
            let svd = svd_small(&a).unwrap();
            assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
            let err = reconstruct(&svd).sub(&a).unwrap().frobenius_norm();
            assert!(err <= 1e-12 * svd.s[0], "residual {err}");
        }
    }

    #[test]
    fn rank_deficient_input_still_has_orthonormal_u() {
        let a = DenseMatrix::from_fn(6, 3, |i, j| (i + 1) as f64 * (j + 1) as f64);
        let svd = svd_small(&a).unwrap();
        assert!(svd.s[1] < 1e-13 * svd.s[0]);
        let utu = svd.u.transpose_matmul(&svd.u).unwrap();
        assert!(utu.sub(&DenseMatrix::identity(3)).unwrap().max_abs() < 1e-12);
        assert!(reconstruct(&svd).sub(&a).unwrap().max_abs() < 1e-12 * svd.s[0]);
    }
}
