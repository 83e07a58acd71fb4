use super::matrix::{dot, DenseMatrix};
use crate::error::{Error, Result};

/// Number of times the default jitter is doubled before giving up.
pub const JITTER_DOUBLINGS: usize = 8;

/// Lower-triangular Cholesky factor of `A + jitter * I`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: DenseMatrix,
    jitter: f64,
}

impl Cholesky {
    pub fn factor(a: &DenseMatrix, jitter: f64) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::invalid(format!(
                "Cholesky needs a square matrix, got {}x{}",
                n,
                a.cols()
            )));
        }
        if !(jitter >= 0.0) || !jitter.is_finite() {
            return Err(Error::invalid(format!("jitter must be finite and >= 0, got {jitter}")));
        }
        if !a.is_finite() {
            return Err(Error::invalid("Cholesky input contains non-finite entries"));
        }
        if a.asymmetry() > 1e-10 * a.norm_inf().max(f64::MIN_POSITIVE) {
            return Err(Error::invalid("Cholesky input is not symmetric"));
        }
        let mut l = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let rj: Vec<f64> = l.row(j)[..j].to_vec();
            let pivot = a[(j, j)] + jitter - dot(&rj, &rj);
            if !(pivot > 0.0) || !pivot.is_finite() {
                return Err(Error::numeric(format!(
                    "Cholesky pivot {j} is {pivot:e} (jitter {jitter:e})"
                )));
            }
            let ljj = pivot.sqrt();
            l[(j, j)] = ljj;
            for i in (j + 1)..n {
                let s = a[(i, j)] - dot(&l.row(i)[..j], &rj);
                l[(i, j)] = s / ljj;
            }
        }
        Ok(Self { l, jitter })
    }

    /// Factors with the default jitter `1e-12 * trace(A) / n`, doubling it on
    /// failure up to [`JITTER_DOUBLINGS`] times.
    pub fn factor_with_default_jitter(a: &DenseMatrix) -> Result<Self> {
        let n = a.rows().max(1);
        let base = 1e-12 * (a.trace().abs() / n as f64);
        let mut jitter = if base > 0.0 { base } else { 1e-300 };
        let mut last_err = None;
        for _ in 0..=JITTER_DOUBLINGS {
            match Self::factor(a, jitter) {
                Ok(c) => return Ok(c),
                Err(e @ Error::NumericFailure(_)) => last_err = Some(e),
                Err(e) => return Err(e),
            }
            jitter *= 2.0;
        }
        Err(last_err.unwrap_or_else(|| Error::numeric("Cholesky failed")))
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn lower(&self) -> &DenseMatrix {
        &self.l
    }

    /// Solves `L z = b` in place.
    pub fn forward_solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let s = b[i] - dot(&self.l.row(i)[..i], &b[..i]);
            b[i] = s / self.l[(i, i)];
        }
    }

    /// Solves `L^T x = z` in place.
    pub fn backward_solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let bi = b[i] / self.l[(i, i)];
            b[i] = bi;
            let row = self.l.row(i);
            for (bj, lij) in b[..i].iter_mut().zip(&row[..i]) {
                *bj -= lij * bi;
            }
        }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.forward_solve_in_place(b);
        self.backward_solve_in_place(b);
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.len() != self.dim() {
            return Err(Error::invalid(format!(
                "right-hand side has length {}, expected {}",
                b.len(),
                self.dim()
            )));
        }
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        Ok(x)
    }
}

/// Solves `(A + jitter I) x = b` for symmetric positive-definite `A`.
pub fn solve_spd(a: &DenseMatrix, b: &[f64], jitter: f64) -> Result<Vec<f64>> {
    Cholesky::factor(a, jitter)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trivial_systems() {
        let x = solve_spd(&DenseMatrix::identity(2), &[1.0, 2.0], 0.0).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        let x = solve_spd(&DenseMatrix::diag(&[4.0]), &[8.0], 0.0).unwrap();
        assert_eq!(x, vec![2.0]);
    }

    #[test]
    fn random_spd_residual() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = DenseMatrix::from_fn(20, 20, |_, _| rng.random_range(-1.0..1.0));
        let mut a = m.transpose_matmul(&m).unwrap();
        for i in 0..20 {
            a[(i, i)] += 1.0;
        }
        let b: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let x = solve_spd(&a, &b, 0.0).unwrap();
        let ax = a.matvec(&x).unwrap();
        let res: f64 = ax.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(res <= 1e-10 * bn);
    }

    #[test]
    fn jitter_is_applied_and_reported() {
        let a = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
        let err = Cholesky::factor(&a, 0.0).unwrap_err();
        assert!(err.to_string().contains("pivot 1"));
        let c = Cholesky::factor_with_default_jitter(&a).unwrap();
        assert!(c.jitter() > 0.0);
        let x = solve_spd(&a, &[2.0, 2.0], 0.5).unwrap();
        // (A + 0.5 I) x = b has x = (0.8, 0.8)
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 0.8).abs() < 1e-14);
    }

    #[test]
    fn indefinite_fails_after_escalation() {
        let a = DenseMatrix::diag(&[1.0, -1.0]);
        assert!(matches!(
            Cholesky::factor_with_default_jitter(&a),
            Err(Error::NumericFailure(_))
        ));
    }
}
