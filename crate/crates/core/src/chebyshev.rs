//! Chebyshev expansion of the even extension `k(|r|)` on `[-1, 1]`, adaptive
//! degree selection from the coefficient tail, and the monomial coefficient
//! table of `T_i`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kernels::IsotropicKernel;
use crate::special::{ln_gamma, DoubleDouble};

/// Degree of the reference expansion used to estimate truncation tails.
pub const REFERENCE_DEGREE: usize = 256;

/// Largest degree `choose_degree` will return. Reference coefficients above
/// this index only serve to estimate the tail.
pub const MAX_SEARCH_DEGREE: usize = REFERENCE_DEGREE / 2;

/// Grid size for the derivative maximum in [`chebyshev_tail_bound`].
const DERIVATIVE_GRID: usize = 512;

/// Truncated Chebyshev series `sum_i a_i T_i(r)` of an even function.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevExpansion {
    coeffs: Vec<f64>,
    /// Largest `|a_odd|` seen before the odd coefficients were zeroed.
    odd_residual: f64,
}

impl ChebyshevExpansion {
    /// Builds an expansion from explicit coefficients, zeroing odd entries.
    pub fn from_coeffs(mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        if coeffs.len() % 2 == 0 {
            coeffs.push(0.0);
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("Chebyshev coefficients must be finite"));
        }
        let mut odd_residual = 0.0_f64;
        for c in coeffs.iter_mut().skip(1).step_by(2) {
            odd_residual = odd_residual.max(c.abs());
            *c = 0.0;
        }
        Ok(Self {
            coeffs,
            odd_residual,
        })
    }

    /// Even degree `p`.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn odd_residual(&self) -> f64 {
        self.odd_residual
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.abs()))
    }

    /// First `p + 1` coefficients (`p` rounded down to even).
    pub fn truncated(&self, p: usize) -> Self {
        let p = p.min(self.degree()) & !1;
        Self {
            coeffs: self.coeffs[..=p].to_vec(),
            odd_residual: self.odd_residual,
        }
    }

    /// `sum_{i > p} |a_i|`.
    pub fn tail(&self, p: usize) -> f64 {
        self.coeffs.iter().skip(p + 1).map(|c| c.abs()).sum()
    }

    /// Clenshaw evaluation at `r` in `[-1, 1]`.
    pub fn eval(&self, r: f64) -> f64 {
        clenshaw(&self.coeffs, r)
    }

    /// Monomial coefficients `c_j = sum_i a_i t_{i,j}`, accumulated in
    /// double-double arithmetic to avoid cancellation in the conversion.
    pub fn monomial_coefficients(&self) -> Vec<f64> {
        let p = self.degree();
        let table = dd_table(p);
        (0..=p)
            .map(|j| {
                let mut acc = DoubleDouble::ZERO;
                for (i, &a) in self.coeffs.iter().enumerate().skip(j) {
                    if a != 0.0 {
                        acc = acc.add(table[i][j].mul_f64(a));
                    }
                }
                acc.to_f64()
            })
            .collect()
    }

    /// Zeroes coefficients at roundoff level relative to the largest one.
    /// Magnitude below which coefficients are indistinguishable from roundoff.
    pub fn resolution(&self) -> f64 {
        4.0 * f64::EPSILON * self.max_abs_coeff()
    }

    fn chopped(mut self) -> Self {
        let floor = self.resolution();
        for c in &mut self.coeffs {
            if c.abs() < floor {
                *c = 0.0;
            }
        }
        self
    }
}

fn clenshaw(coeffs: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &a in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + a;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + coeffs.first().copied().unwrap_or(0.0)
}

/// Degree-`p` Chebyshev interpolant of `k(|r|)` at the `p + 1` Chebyshev
/// points of the first kind, via a type-II discrete cosine transform.
/// Odd coefficients vanish analytically and are zeroed.
pub fn cheb_transform(kernel: &IsotropicKernel, p: usize) -> Result<ChebyshevExpansion> {
    if p % 2 != 0 {
        return Err(Error::invalid(format!("Chebyshev degree must be even, got {p}")));
    }
    let n = p + 1;
    let values: Vec<f64> = (0..n)
        .map(|j| {
            let x = (PI * (2 * j + 1) as f64 / (2 * n) as f64).cos();
            let v = kernel.even_value(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::InvalidKernel { r: x.abs() })
            }
        })
        .collect::<Result<_>>()?;
    let coeffs = dct2(&values)
        .into_iter()
        .enumerate()
        .map(|(i, c)| if i == 0 { c / n as f64 } else { 2.0 * c / n as f64 })
        .collect();
    ChebyshevExpansion::from_coeffs(coeffs)
}

/// `X_i = sum_j x_j cos(pi i (2j + 1) / (2n))`, with the angle reduced in
/// exact integer arithmetic before taking the cosine.
fn dct2(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let period = 4 * n;
    let table: Vec<f64> = (0..period)
        .map(|m| (PI * m as f64 / (2 * n) as f64).cos())
        .collect();
    (0..n)
        .map(|i| {
            x.iter()
                .enumerate()
                .map(|(j, &xj)| xj * table[(i * (2 * j + 1)) % period])
                .sum()
        })
        .collect()
}

/// The reference expansion at [`REFERENCE_DEGREE`] with roundoff-level
/// coefficients removed.
pub fn reference_expansion(kernel: &IsotropicKernel) -> Result<ChebyshevExpansion> {
    Ok(cheb_transform(kernel, REFERENCE_DEGREE)?.chopped())
}

/// Outcome of adaptive degree selection.
#[derive(Debug, Clone)]
pub struct DegreeChoice {
    pub p: usize,
    /// `sum_{i > p} |a_i|` of the reference expansion.
    pub tail: f64,
    /// Reference coefficients truncated at `p`.
    pub expansion: ChebyshevExpansion,
}

/// Smallest even `p` whose reference tail is at most `eps / 2`.
pub fn choose_degree(kernel: &IsotropicKernel, eps: f64) -> Result<DegreeChoice> {
    choose_degree_for_budget(kernel, eps / 2.0)
}

/// Smallest even `p <= MAX_SEARCH_DEGREE` with reference tail `<= budget`.
pub fn choose_degree_for_budget(kernel: &IsotropicKernel, budget: f64) -> Result<DegreeChoice> {
    if !(budget > 0.0) {
        return Err(Error::invalid(format!("tolerance must be > 0, got {budget}")));
    }
    let reference = reference_expansion(kernel)?;
    // Tails below the chop level read as zero but carry no information.
    let floor = reference.resolution();
    if budget < floor {
        return Err(Error::ToleranceUnreachable {
            requested: budget,
            best_tail: reference.tail(MAX_SEARCH_DEGREE).max(floor),
            degree: MAX_SEARCH_DEGREE,
        });
    }
    for p in (0..=MAX_SEARCH_DEGREE).step_by(2) {
        let tail = reference.tail(p);
        if tail <= budget {
            return Ok(DegreeChoice {
                p,
                tail,
                expansion: reference.truncated(p),
            });
        }
    }
    Err(Error::ToleranceUnreachable {
        requested: budget,
        best_tail: reference.tail(MAX_SEARCH_DEGREE),
        degree: MAX_SEARCH_DEGREE,
    })
}

/// Monomial coefficients of the Chebyshev polynomials:
/// `T_i(r) = sum_j t_{i,j} r^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebCoeffTable {
    rows: Vec<Vec<f64>>,
}

impl ChebCoeffTable {
    pub fn degree(&self) -> usize {
        self.rows.len() - 1
    }

    /// `t_{i,j}`; zero for `j > i`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].get(j).copied().unwrap_or(0.0)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }
}

pub fn cheb_coeff_table(p: usize) -> ChebCoeffTable {
    let rows = dd_table(p)
        .into_iter()
        .map(|row| row.into_iter().map(DoubleDouble::to_f64).collect())
        .collect();
    ChebCoeffTable { rows }
}

/// `t_{i,j}` in double-double, built from `t_{i,j} = 2 t_{i-1,j-1} - t_{i-2,j}`
/// with `t_{0,0} = t_{1,1} = 1`.
fn dd_table(p: usize) -> Vec<Vec<DoubleDouble>> {
    let mut rows: Vec<Vec<DoubleDouble>> = Vec::with_capacity(p + 1);
    for i in 0..=p {
        let mut row = vec![DoubleDouble::ZERO; i + 1];
        match i {
            0 => row[0] = DoubleDouble::from_f64(1.0),
            1 => row[1] = DoubleDouble::from_f64(1.0),
            _ => {
                for j in 0..=i {
                    let up = if j >= 1 && j - 1 < rows[i - 1].len() {
                        rows[i - 1][j - 1].scale_pow2(2.0)
                    } else {
                        DoubleDouble::ZERO
                    };
                    let back = rows[i - 2].get(j).copied().unwrap_or(DoubleDouble::ZERO);
                    row[j] = up.add(back.neg());
                }
            }
        }
        rows.push(row);
    }
    rows
}

/// Chebyshev coefficients of the derivative of `sum_k a_k T_k`.
fn derivative_coeffs(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    if n <= 1 {
        return vec![0.0];
    }
    let mut b = vec![0.0; n];
    b[n - 2] = 2.0 * (n - 1) as f64 * a[n - 1];
    for k in (1..n - 1).rev() {
        b[k - 1] = b.get(k + 1).copied().unwrap_or(0.0) + 2.0 * k as f64 * a[k];
    }
    b[0] /= 2.0;
    b.truncate(n - 1);
    b
}

/// Analytic tail bound `max_{0<=r<=1} |k^{(p+1)}(r)| / (2^p (p+1)!)`, with the
/// derivative estimated by spectral differentiation of the reference
/// expansion on a uniform grid of 512 points.
pub fn chebyshev_tail_bound(kernel: &IsotropicKernel, p: usize) -> Result<f64> {
    let reference = reference_expansion(kernel)?;
    let mut coeffs = reference.coeffs().to_vec();
    for _ in 0..=p {
        if coeffs.iter().all(|&c| c == 0.0) {
            return Ok(0.0);
        }
        coeffs = derivative_coeffs(&coeffs);
    }
    let max_deriv = (0..DERIVATIVE_GRID)
        .map(|i| clenshaw(&coeffs, i as f64 / (DERIVATIVE_GRID - 1) as f64).abs())
        .fold(0.0_f64, f64::max);
    if !max_deriv.is_finite() {
        return Err(Error::numeric(format!(
            "derivative of order {} is not finite on the grid",
            p + 1
        )));
    }
    if max_deriv == 0.0 {
        return Ok(0.0);
    }
    let log_denom = p as f64 * 2f64.ln() + ln_gamma(p as f64 + 2.0);
    Ok((max_deriv.ln() - log_denom).exp())
}
