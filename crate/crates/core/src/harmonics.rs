//! Real hyperspherical harmonics on `S^{d-1}`, orthonormal with respect to
//! the uniform probability measure, and the Gegenbauer addition theorem
//! `C_k^alpha(x.y) / Z_k = sum_h Y_k^h(x) Y_k^h(y)`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::kernels::MIN_DIM;
use crate::linalg::{qr_tall, svd_small, sym_eigenvalues, DenseMatrix};
use crate::special::{binomial, binomial_u128, ln_gamma};

/// Default point cap for [`harmonic_gram_spectrum`].
pub const GRAM_DIAGNOSTIC_CAP: usize = 2000;

/// `(mu_1, ..., mu_{d-2})` with `k >= mu_1 >= ... >= mu_{d-3} >= |mu_{d-2}|`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HarmonicIndex {
    pub k: usize,
    pub mu: Vec<i64>,
}

fn check_dim(d: usize) -> Result<()> {
    if d < MIN_DIM {
        Err(Error::UnsupportedDimension { dim: d })
    } else {
        Ok(())
    }
}

/// Index set of order `k` in lexicographic order.
pub fn enumerate_indices(k: usize, d: usize) -> Result<Vec<HarmonicIndex>> {
    check_dim(d)?;
    let levels = d - 2;
    let mut out = Vec::with_capacity(harmonic_count(k, d)?);
    let mut mu = vec![0i64; levels];
    fn rec(level: usize, upper: i64, mu: &mut Vec<i64>, k: usize, out: &mut Vec<HarmonicIndex>) {
        let last = level + 1 == mu.len();
        let lo = if last { -upper } else { 0 };
        for v in lo..=upper {
            mu[level] = v;
            if last {
                out.push(HarmonicIndex { k, mu: mu.clone() });
            } else {
                rec(level + 1, v, mu, k, out);
            }
        }
    }
    rec(0, k as i64, &mut mu, k, &mut out);
    Ok(out)
}

/// `|H_k| = C(k+d-1, k) - C(k+d-3, k-2)`.
pub fn harmonic_count(k: usize, d: usize) -> Result<usize> {
    check_dim(d)?;
    let a = binomial_u128((k + d - 1) as u64, k as u64);
    let b = if k >= 2 {
        binomial_u128((k + d - 3) as u64, (k - 2) as u64)
    } else {
        0
    };
    usize::try_from(a - b).map_err(|_| Error::invalid("harmonic count overflows usize"))
}

/// `sum_{k <= kmax} |H_k| = C(kmax+d-1, d-1) + C(kmax+d-2, d-1)`.
pub fn count_up_to(kmax: usize, d: usize) -> Result<usize> {
    check_dim(d)?;
    let a = binomial_u128((kmax + d - 1) as u64, (d - 1) as u64);
    let b = binomial_u128((kmax + d - 2) as u64, (d - 1) as u64);
    usize::try_from(a + b).map_err(|_| Error::invalid("harmonic count overflows usize"))
}

/// `C_k^alpha(t)` by the three-term recurrence; `t` is clamped to `[-1, 1]`.
pub fn gegenbauer(alpha: f64, k: usize, t: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::UnsupportedDimension {
            dim: (2.0 * alpha + 2.0).round().max(0.0) as usize,
        });
    }
    let mut buf = vec![0.0; k + 1];
    gegenbauer_all(alpha, t.clamp(-1.0, 1.0), &mut buf);
    Ok(buf[k])
}

/// Fills `out[j] = C_j^alpha(t)` for `j < out.len()`.
pub(crate) fn gegenbauer_all(alpha: f64, t: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = 2.0 * alpha * t;
    }
    for j in 2..out.len() {
        let jf = j as f64;
        out[j] = (2.0 * t * (jf + alpha - 1.0) * out[j - 1] - (jf + 2.0 * alpha - 2.0) * out[j - 2]) / jf;
    }
}

/// Hyperspherical coordinates of one direction, ready for evaluation.
#[derive(Debug, Clone)]
pub struct PointTables {
    kmax: usize,
    origin: bool,
    /// Per level `j`, entry `a(a+1)/2 + b` holds
    /// `N_j(a-b, b) sin^b(theta_j) C^{lambda_j(b)}_{a-b}(cos theta_j)`.
    factors: Vec<Vec<f64>>,
    cos_mphi: Vec<f64>,
    sin_mphi: Vec<f64>,
}

/// Order-wise metadata and normalization tables for dimension `d` up to
/// order `kmax`. Index lists are not stored; harmonics of each order are
/// produced in [`enumerate_indices`] order.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    d: usize,
    kmax: usize,
    counts: Vec<usize>,
    z: Vec<f64>,
    /// `norm[j][b][l]` for levels `j = 0..d-2`, `b + l <= kmax`.
    norm: Vec<Vec<Vec<f64>>>,
}

impl HarmonicBasis {
    pub fn new(d: usize, kmax: usize) -> Result<Self> {
        check_dim(d)?;
        let counts = (0..=kmax)
            .map(|k| harmonic_count(k, d))
            .collect::<Result<Vec<_>>>()?;
        let z = (0..=kmax)
            .map(|k| binomial((k + d - 3) as i64, k as i64) / counts[k] as f64)
            .collect();
        let norm = (0..d - 2)
            .map(|j| {
                // Level j (0-based) lives on the sphere in ambient dimension m.
                let m = (d - j) as f64;
                let ln_b = 0.5 * PI.ln() + ln_gamma((m - 1.0) / 2.0) - ln_gamma(m / 2.0);
                (0..=kmax)
                    .map(|b| {
                        let lambda = b as f64 + (m - 2.0) / 2.0;
                        (0..=kmax - b)
                            .map(|l| {
                                let lf = l as f64;
                                let ln_h = PI.ln() + (1.0 - 2.0 * lambda) * 2f64.ln()
                                    + ln_gamma(lf + 2.0 * lambda)
                                    - ln_gamma(lf + 1.0)
                                    - (lf + lambda).ln()
                                    - 2.0 * ln_gamma(lambda);
                                (0.5 * (ln_b - ln_h)).exp()
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            d,
            kmax,
            counts,
            z,
            norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn alpha(&self) -> f64 {
        self.d as f64 / 2.0 - 1.0
    }

    /// `|H_k|`.
    pub fn count(&self, k: usize) -> usize {
        self.counts[k]
    }

    /// `sum_{k <= kmax} |H_k|`.
    pub fn total_count(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn indices(&self, k: usize) -> Vec<HarmonicIndex> {
        enumerate_indices(k, self.d).expect("dimension validated at construction")
    }

    /// `Z_k = C_k^alpha(1) / |H_k|`.
    pub fn normalizer(&self, k: usize) -> f64 {
        self.z[k]
    }

    /// Precomputes the angle-dependent factors of `x / |x|`.
    pub fn prepare(&self, x: &[f64]) -> PointTables {
        assert_eq!(x.len(), self.d, "point dimension mismatch");
        let d = self.d;
        let levels = d - 2;
        let kmax = self.kmax;
        // rho[j] = |(x_1, ..., x_{d-j})| for j = 0..d-1
        let mut rho = vec![0.0; d - 1];
        let mut acc = x[0].hypot(x[1]);
        rho[d - 2] = acc;
        for j in (0..d - 2).rev() {
            acc = acc.hypot(x[d - 1 - j]);
            rho[j] = acc;
        }
        let origin = rho[0] == 0.0;
        let tri = (kmax + 1) * (kmax + 2) / 2;
        let mut factors = vec![vec![0.0; tri]; levels];
        let mut geg = vec![0.0; kmax + 1];
        for (j, table) in factors.iter_mut().enumerate() {
            let (cos_t, sin_t) = if rho[j] > 0.0 {
                (x[d - 1 - j] / rho[j], rho[j + 1] / rho[j])
            } else {
                (1.0, 0.0)
            };
            let m = (d - j) as f64;
            for b in 0..=kmax {
                let lambda = b as f64 + (m - 2.0) / 2.0;
                gegenbauer_all(lambda, cos_t.clamp(-1.0, 1.0), &mut geg[..=kmax - b]);
                let sb = sin_t.powi(b as i32);
                for l in 0..=kmax - b {
                    let a = b + l;
                    table[a * (a + 1) / 2 + b] = self.norm[j][b][l] * sb * geg[l];
                }
            }
        }
        let (cphi, sphi) = if rho[d - 2] > 0.0 {
            (x[0] / rho[d - 2], x[1] / rho[d - 2])
        } else {
            (1.0, 0.0)
        };
        let mut cos_mphi = vec![1.0; kmax + 1];
        let mut sin_mphi = vec![0.0; kmax + 1];
        for m in 1..=kmax {
            cos_mphi[m] = cos_mphi[m - 1] * cphi - sin_mphi[m - 1] * sphi;
            sin_mphi[m] = sin_mphi[m - 1] * cphi + cos_mphi[m - 1] * sphi;
        }
        PointTables {
            kmax,
            origin,
            factors,
            cos_mphi,
            sin_mphi,
        }
    }

    /// All harmonics of order `k` at a prepared point, in index order.
    /// `out.len()` must equal `count(k)`.
    pub fn eval_order(&self, tables: &PointTables, k: usize, out: &mut [f64]) {
        assert!(k <= tables.kmax && k <= self.kmax, "order above kmax");
        assert_eq!(out.len(), self.counts[k], "output length must equal |H_k|");
        if tables.origin {
            out.fill(if k == 0 { 1.0 } else { 0.0 });
            return;
        }
        let mut pos = 0;
        self.descend(tables, 0, k, 1.0, out, &mut pos);
        debug_assert_eq!(pos, out.len());
    }

    fn descend(&self, t: &PointTables, level: usize, a: usize, acc: f64, out: &mut [f64], pos: &mut usize) {
        let table = &t.factors[level];
        let base = a * (a + 1) / 2;
        if level + 1 == t.factors.len() {
            for mu in -(a as i64)..=(a as i64) {
                let b = mu.unsigned_abs() as usize;
                let circle = match mu.signum() {
                    0 => 1.0,
                    1 => SQRT_2 * t.cos_mphi[b],
                    _ => SQRT_2 * t.sin_mphi[b],
                };
                out[*pos] = acc * table[base + b] * circle;
                *pos += 1;
            }
        } else {
            for b in 0..=a {
                self.descend(t, level + 1, b, acc * table[base + b], out, pos);
            }
        }
    }

    /// All harmonics of order `k` at `x`.
    pub fn eval_all(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let tables = self.prepare(x);
        let mut out = vec![0.0; self.counts[k]];
        self.eval_order(&tables, k, &mut out);
        out
    }
}

/// Single harmonic `Y_k^h(x / |x|)`; zero at the origin for `k >= 1`.
pub fn harmonic_eval(basis: &HarmonicBasis, idx: &HarmonicIndex, x: &[f64]) -> f64 {
    let d = basis.dim();
    if idx.k > basis.kmax() || idx.mu.len() != d - 2 {
        return f64::NAN;
    }
    let t = basis.prepare(x);
    if t.origin {
        return if idx.k == 0 { 1.0 } else { 0.0 };
    }
    let mut acc = 1.0;
    let mut a = idx.k;
    for (level, &mu) in idx.mu.iter().enumerate() {
        let b = mu.unsigned_abs() as usize;
        acc *= t.factors[level][a * (a + 1) / 2 + b];
        a = b;
    }
    let last = *idx.mu.last().expect("d >= 3");
    let b = last.unsigned_abs() as usize;
    acc * match last.signum() {
        0 => 1.0,
        1 => SQRT_2 * t.cos_mphi[b],
        _ => SQRT_2 * t.sin_mphi[b],
    }
}

/// `Z_k` of the addition theorem.
pub fn addition_normalizer(basis: &HarmonicBasis, k: usize) -> f64 {
    basis.normalizer(k)
}

/// Singular values (descending, length `N`) of the order-`k` harmonic Gram
/// matrix `M_ij = sum_h Y_k^h(x_i) Y_k^h(x_j)`.
pub fn harmonic_gram_spectrum(points: &DenseMatrix, k: usize) -> Result<Vec<f64>> {
    harmonic_gram_spectrum_capped(points, k, GRAM_DIAGNOSTIC_CAP)
}

pub fn harmonic_gram_spectrum_capped(points: &DenseMatrix, k: usize, cap: usize) -> Result<Vec<f64>> {
    let n = points.rows();
    if n > cap {
        return Err(Error::SizeCap {
            what: "harmonic Gram diagnostic points",
            size: n,
            cap,
        });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let basis = HarmonicBasis::new(points.cols(), k)?;
    let h = basis.count(k);
    let mut vals = DenseMatrix::zeros(n, h);
    for i in 0..n {
        let t = basis.prepare(points.row(i));
        basis.eval_order(&t, k, vals.row_mut(i));
    }
    let mut spectrum = if h <= n {
        // sigma(M) = sigma(H)^2 and sigma(H) = sigma(R) for H = QR.
        let (_, r) = qr_tall(&vals)?;
        svd_small(&r)?.s.into_iter().map(|s| s * s).collect()
    } else {
        sym_eigenvalues(&vals.matmul_transb(&vals)?)?
            .into_iter()
            .map(f64::abs)
            .collect::<Vec<_>>()
    };
    spectrum.sort_by(|a, b| b.total_cmp(a));
    spectrum.resize(n, 0.0);
    Ok(spectrum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = crate::linalg::norm2(&v);
        v.into_iter().map(|c| c / n).collect()
    }

    #[test]
    fn enumeration_examples() {
        let i = enumerate_indices(1, 3).unwrap();
        let mus: Vec<i64> = i.iter().map(|h| h.mu[0]).collect();
        assert_eq!(mus, vec![-1, 0, 1]);
        assert_eq!(enumerate_indices(2, 3).unwrap().len(), 5);
        assert_eq!(enumerate_indices(2, 5).unwrap().len(), 14);
        assert!(enumerate_indices(2, 2).is_err());
    }

    #[test]
    fn counts_consistent() {
        for d in 3..=8 {
            let mut total = 0;
            for k in 0..=12 {
                let n = enumerate_indices(k, d).unwrap().len();
                assert_eq!(n, harmonic_count(k, d).unwrap());
                total += n;
                assert_eq!(total, count_up_to(k, d).unwrap());
            }
        }
        assert_eq!(count_up_to(0, 7).unwrap(), 1);
        assert_eq!(count_up_to(2, 3).unwrap(), 9);
        assert_eq!(count_up_to(3, 4).unwrap(), 30);
    }

    #[test]
    fn enumeration_is_lexicographic_and_valid() {
        let idx = enumerate_indices(4, 6).unwrap();
        for w in idx.windows(2) {
            assert!(w[0].mu < w[1].mu);
        }
        for h in &idx {
            let mut prev = 4i64;
            for (j, &m) in h.mu.iter().enumerate() {
                let a = if j + 1 == h.mu.len() { m.abs() } else { m };
                assert!(a >= 0 && a <= prev);
                prev = a;
            }
        }
    }

    #[test]
    fn gegenbauer_examples() {
        assert_eq!(gegenbauer(0.3, 0, 0.9).unwrap(), 1.0);
        assert_eq!(gegenbauer(1.0, 1, 0.5).unwrap(), 1.0);
        assert!(gegenbauer(1.0, 2, 0.5).unwrap().abs() < 1e-15);
        assert!(gegenbauer(0.0, 2, 0.5).is_err());
    }

    #[test]
    fn gegenbauer_bounded_by_value_at_one() {
        for d in 3..=8 {
            let alpha = d as f64 / 2.0 - 1.0;
            for k in 0..=20 {
                let bound = binomial((k + d - 3) as i64, k as i64);
                for i in 0..1000 {
                    let t = -1.0 + 2.0 * i as f64 / 999.0;
                    assert!(gegenbauer(alpha, k, t).unwrap().abs() <= bound * (1.0 + 1e-12));
                }
            }
        }
    }

    #[test]
    fn constant_harmonic_and_origin() {
        let b = HarmonicBasis::new(5, 3).unwrap();
        assert_eq!(b.eval_all(0, &[0.1, -0.3, 0.2, 0.0, 0.5]), vec![1.0]);
        assert_eq!(b.eval_all(0, &[0.0; 5]), vec![1.0]);
        assert!(b.eval_all(2, &[0.0; 5]).iter().all(|v| *v == 0.0));
        assert_eq!(b.normalizer(0), 1.0);
    }

    #[test]
    fn degree_one_harmonics_in_three_dimensions() {
        let b = HarmonicBasis::new(3, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let u = unit(&mut rng, 3);
            let v = b.eval_all(1, &u);
            // ordering (-1, 0, 1) -> (sin phi, cos theta, cos phi) directions
            let want = [u[1], u[2], u[0]].map(|c| 3f64.sqrt() * c);
            for (a, w) in v.iter().zip(want) {
                assert!((a - w).abs() < 1e-12);
            }
        }
        assert!((b.normalizer(1) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn addition_theorem() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in 3..=6 {
            let b = HarmonicBasis::new(d, 10).unwrap();
            for _ in 0..20 {
                let x = unit(&mut rng, d);
                let y = unit(&mut rng, d);
                for k in 0..=10 {
                    let s = dot(&b.eval_all(k, &x), &b.eval_all(k, &y));
                    let want = gegenbauer(b.alpha(), k, dot(&x, &y)).unwrap() / b.normalizer(k);
                    assert!((s - want).abs() <= 1e-10, "d={d} k={k} {s} vs {want}");
                }
            }
        }
    }

    #[test]
    fn single_index_evaluation_matches_batch() {
        let b = HarmonicBasis::new(6, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = unit(&mut rng, 6);
        for k in 0..=4 {
            let batch = b.eval_all(k, &x);
            for (idx, v) in b.indices(k).iter().zip(batch) {
                assert_eq!(harmonic_eval(&b, idx, &x), v);
            }
        }
    }

    #[test]
    fn gram_spectrum_small_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts = DenseMatrix::from_fn(500, 3, |_, _| StandardNormal.sample(&mut rng));
        let s0 = harmonic_gram_spectrum(&pts, 0).unwrap();
        assert!((s0[0] - 500.0).abs() < 1e-9);
        assert!(s0[1..].iter().all(|v| *v < 1e-9));
        let s2 = harmonic_gram_spectrum(&pts, 2).unwrap();
        let rank = s2.iter().filter(|v| **v > 1e-10 * s2[0]).count();
        assert_eq!(rank, 5);
        let big = DenseMatrix::zeros(2001, 3);
        assert!(matches!(harmonic_gram_spectrum(&big, 1), Err(Error::SizeCap { .. })));
    }
}
