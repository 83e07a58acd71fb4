//! Coefficient tensor of the separated expansion
//! `k(|x-y|) = sum_k C_k^alpha(cos g) sum_{m,n} |y|^m |x|^n T'_{k,m,n}`.

use rayon::prelude::*;

use crate::chebyshev::ChebyshevExpansion;
use crate::error::{Error, Result};
use crate::kernels::MIN_DIM;
use crate::linalg::DenseMatrix;
use crate::special::binomial;

/// `J! / (k1! k2! k3!)` with `k1 + k2 + k3 = J`.
pub fn multinomial(j_half: i64, k1: i64, k2: i64, k3: i64) -> Result<f64> {
    if j_half < 0 || k1 < 0 || k2 < 0 || k3 < 0 {
        return Err(Error::invalid("multinomial arguments must be non-negative"));
    }
    if k1 + k2 + k3 != j_half {
        return Err(Error::invalid(format!(
            "multinomial parts {k1}+{k2}+{k3} do not sum to {j_half}"
        )));
    }
    Ok(binomial(j_half, k1) * binomial(j_half - k1, k2))
}

/// Coefficient `A_{ki}` in `cos^i g = sum_k A_{ki} C_k^alpha(cos g)`:
/// `i! (alpha + k) / (2^i ((i-k)/2)! (alpha)_{(i+k)/2 + 1})`, zero when the
/// parities of `k` and `i` differ.
pub fn gegenbauer_connection(alpha: f64, k: usize, i: usize) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::UnsupportedDimension {
            dim: (2.0 * alpha + 2.0).round().max(0.0) as usize,
        });
    }
    if k > i {
        return Err(Error::invalid(format!("connection order {k} exceeds power {i}")));
    }
    if (i - k) % 2 != 0 {
        return Ok(0.0);
    }
    Ok(connection_unchecked(alpha, k, i))
}

/// Factors of the numerator and denominator are sorted and interleaved so the
/// running product stays near the magnitude of the result (which is below 1).
fn connection_unchecked(alpha: f64, k: usize, i: usize) -> f64 {
    let half_diff = (i - k) / 2;
    let rising_len = (i + k) / 2 + 1;
    let mut num: Vec<f64> = (1..=i).map(|v| v as f64).collect();
    let mut den: Vec<f64> = std::iter::repeat(2.0)
        .take(i)
        .chain((1..=half_diff).map(|v| v as f64))
        .chain((0..rising_len).map(|j| alpha + j as f64))
        .collect();
    num.sort_by(|a, b| b.total_cmp(a));
    den.sort_by(|a, b| b.total_cmp(a));
    let mut acc = alpha + k as f64;
    let mut di = 0;
    for n in num {
        acc *= n;
        while di < den.len() && acc >= den[di] {
            acc /= den[di];
            di += 1;
        }
    }
    for d in &den[di..] {
        acc /= d;
    }
    acc
}

/// `T'_{k,m,n}` stored per order `k` as an `L_k x L_k` block over the
/// parity-admissible `m = k + 2l`, `n = k + 2l'`, with `L_k = (p - 2k)/2 + 1`.
/// Entries with `m + n > p` are zero.
#[derive(Debug, Clone)]
pub struct CoefficientTensor {
    p: usize,
    d: usize,
    alpha: f64,
    blocks: Vec<DenseMatrix>,
}

impl CoefficientTensor {
    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Largest harmonic order, `p / 2`.
    pub fn max_order(&self) -> usize {
        self.p / 2
    }

    /// Number of admissible `m` (and `n`) values for order `k`.
    pub fn block_len(&self, k: usize) -> usize {
        (self.p - 2 * k) / 2 + 1
    }

    /// Block for order `k`: entry `(l, l')` is `T'_{k, k+2l, k+2l'}`.
    pub fn block(&self, k: usize) -> &DenseMatrix {
        &self.blocks[k]
    }

    /// `T'_{k,m,n}`; exactly zero outside the admissible index set.
    pub fn get(&self, k: usize, m: usize, n: usize) -> f64 {
        if k > self.max_order() || m < k || n < k || (m - k) % 2 != 0 || (n - k) % 2 != 0 {
            return 0.0;
        }
        if m + n > self.p {
            return 0.0;
        }
        self.blocks[k][((m - k) / 2, (n - k) / 2)]
    }

    /// Worst-case roundoff amplification of evaluating the expansion for
    /// points in the ball of radius 1/2: `sum_k C_k(1) sum_{m,n} |T'| 2^{-(m+n)}`
    /// times the unit roundoff. Large values mean the monomial form cancels.
    pub fn roundoff_estimate(&self) -> f64 {
        let total: f64 = (0..=self.max_order())
            .map(|k| {
                let len = self.block_len(k);
                let mut s = 0.0;
                for l in 0..len {
                    for lp in 0..len {
                        s += self.blocks[k][(l, lp)].abs() * 0.5f64.powi((2 * k + 2 * l + 2 * lp) as i32);
                    }
                }
                binomial((k + self.d - 3) as i64, k as i64) * s
            })
            .sum();
        f64::EPSILON * total
    }

    pub fn nnz(&self) -> usize {
        self.blocks
            .iter()
            .map(|b| b.data().iter().filter(|v| **v != 0.0).count())
            .sum()
    }

    /// Radial function `r^(k)(|x|, |y|) = sum_{m,n} |y|^m |x|^n T'_{k,m,n}`.
    pub fn radial(&self, k: usize, norm_x: f64, norm_y: f64) -> f64 {
        let block = &self.blocks[k];
        let len = self.block_len(k);
        let mut total = 0.0;
        for l in 0..len {
            let ym = norm_y.powi((k + 2 * l) as i32);
            let row: f64 = (0..len)
                .map(|lp| block[(l, lp)] * norm_x.powi((k + 2 * lp) as i32))
                .sum();
            total += ym * row;
        }
        total
    }
}

/// Builds the tensor from a (truncated) even Chebyshev expansion. The
/// Chebyshev-to-monomial conversion runs in double-double arithmetic.
pub fn build_tensor(cheb: &ChebyshevExpansion, d: usize) -> Result<CoefficientTensor> {
    if d < MIN_DIM {
        return Err(Error::UnsupportedDimension { dim: d });
    }
    let p = cheb.degree();
    let alpha = d as f64 / 2.0 - 1.0;
    let c = cheb.monomial_coefficients();
    let max_order = p / 2;

    // A_{j,i} for j <= i <= max_order... only powers k3 <= p/2 occur.
    let conn: Vec<Vec<f64>> = (0..=max_order)
        .map(|i| {
            (0..=i)
                .map(|j| {
                    if (i - j) % 2 == 0 {
                        connection_unchecked(alpha, j, i)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();

    let blocks: Vec<DenseMatrix> = (0..=max_order)
        .into_par_iter()
        .map(|k| {
            let len = (p - 2 * k) / 2 + 1;
            let mut block = DenseMatrix::zeros(len, len);
            for l in 0..len {
                let m = k + 2 * l;
                for lp in 0..len {
                    let n = k + 2 * lp;
                    if m + n > p {
                        break;
                    }
                    let cj = c[m + n];
                    if cj == 0.0 {
                        continue;
                    }
                    let j_half = ((m + n) / 2) as i64;
                    let mut sum = 0.0;
                    let mut k3 = k;
                    while k3 <= m.min(n) {
                        let mult = binomial(j_half, ((n - k3) / 2) as i64)
                            * binomial(j_half - ((n - k3) / 2) as i64, ((m - k3) / 2) as i64);
                        let sign = if k3 % 2 == 0 { 1.0 } else { -1.0 };
                        sum += sign * conn[k3][k] * 2f64.powi(k3 as i32) * mult;
                        k3 += 2;
                    }
                    block[(l, lp)] = cj * sum;
                }
            }
            block
        })
        .collect();

    if blocks.iter().any(|b| !b.is_finite()) {
        return Err(Error::numeric("expansion tensor has non-finite entries"));
    }
    Ok(CoefficientTensor {
        p,
        d,
        alpha,
        blocks,
    })
}
