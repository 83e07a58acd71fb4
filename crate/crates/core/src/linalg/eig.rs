use super::matrix::{dot, norm2, DenseMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;

/// Symmetric eigendecomposition `A = Q diag(values) Q^T`, ordered by
/// decreasing `|value|`.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    /// Eigenvectors as columns.
    pub vectors: DenseMatrix,
}

fn check_symmetric(a: &DenseMatrix) -> Result<()> {
    if a.rows() != a.cols() {
        return Err(Error::invalid(format!(
            "symmetric eigenproblem needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::invalid("eigen input contains non-finite entries"));
    }
    let scale = a.norm_inf();
    if a.asymmetry() > 1e-10 * scale {
        return Err(Error::invalid(format!(
            "matrix is not symmetric: max |a_ij - a_ji| = {:e}",
            a.asymmetry()
        )));
    }
    Ok(())
}

/// Cyclic Jacobi eigensolver for small symmetric matrices.
pub fn eig_sym(a: &DenseMatrix) -> Result<SymEig> {
    check_symmetric(a)?;
    let n = a.rows();
    let mut m = a.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    let mut v = DenseMatrix::identity(n);

    let mut converged = n <= 1;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let g = 100.0 * apq.abs();
                if apq == 0.0 || (app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs()) {
                    m[(p, q)] = 0.0;
                    m[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = m[(r, p)];
                        let arq = m[(r, q)];
                        let np = c * arp - s * arq;
                        let nq = s * arp + c * arq;
                        m[(r, p)] = np;
                        m[(p, r)] = np;
                        m[(r, q)] = nq;
                        m[(q, r)] = nq;
                    }
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::numeric(format!(
            "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].abs().total_cmp(&m[(i, i)].abs()));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = DenseMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymEig { values, vectors })
}

/// Eigenvalues only of a (possibly large) symmetric matrix, via Householder
/// tridiagonalization and implicit QL. Ordered by decreasing `|value|`.
pub fn sym_eigenvalues(a: &DenseMatrix) -> Result<Vec<f64>> {
    check_symmetric(a)?;
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (mut d, mut e) = tridiagonalize(a.clone());
    tql_eigenvalues(&mut d, &mut e)?;
    d.sort_by(|x, y| y.abs().total_cmp(&x.abs()));
    Ok(d)
}

/// Reduces a symmetric matrix to tridiagonal form; returns the diagonal and
/// the off-diagonal (with a trailing zero).
fn tridiagonalize(mut a: DenseMatrix) -> (Vec<f64>, Vec<f64>) {
    use rayon::prelude::*;

    let n = a.rows();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for k in 0..n.saturating_sub(2) {
        let s = n - k - 1;
        let x: Vec<f64> = a.row(k)[k + 1..].to_vec();
        let xnorm = norm2(&x);
        d[k] = a[(k, k)];
        if xnorm == 0.0 {
            e[k] = 0.0;
            continue;
        }
        let alpha = if x[0] >= 0.0 { -xnorm } else { xnorm };
        let mut v = x;
        v[0] -= alpha;
        let beta = 2.0 / dot(&v, &v);
        e[k] = alpha;

        let cols = a.cols();
        let block = &mut a.data_mut()[(k + 1) * cols..];
        let p: Vec<f64> = block
            .par_chunks(cols)
            .map(|row| beta * dot(&row[k + 1..], &v))
            .collect();
        let kk = 0.5 * beta * dot(&v, &p);
        let w: Vec<f64> = p.iter().zip(&v).map(|(pi, vi)| pi - kk * vi).collect();
        block
            .par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| {
                let vi = v[i];
                let wi = w[i];
                for (j, rj) in row[k + 1..].iter_mut().enumerate() {
                    *rj -= vi * w[j] + wi * v[j];
                }
            });
        debug_assert_eq!(p.len(), s);
    }
    if n >= 2 {
        d[n - 2] = a[(n - 2, n - 2)];
        d[n - 1] = a[(n - 1, n - 1)];
        e[n - 2] = a[(n - 1, n - 2)];
    } else {
        d[0] = a[(0, 0)];
    }
    e[n - 1] = 0.0;
    (d, e)
}

/// Implicit QL with Wilkinson-type shifts on a symmetric tridiagonal matrix.
/// `e[i]` couples rows `i` and `i + 1`.
fn tql_eigenvalues(d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::numeric("tridiagonal QL iteration did not converge"));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    if d.iter().any(|x| !x.is_finite()) {
        return Err(Error::numeric("non-finite eigenvalue from tridiagonal QL"));
    }
    Ok(())
}
