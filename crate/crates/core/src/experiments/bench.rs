//! Benchmark sweeps: rank/error against Nyström and the SVD optimum, time
//! scaling in `N`, error/time over tolerances, and the harmonic diagnostic.

use std::time::Instant;

use crate::baselines::{dense_kernel_matrix, nystrom, optimal_errors_from_spectrum, singular_values};
use crate::error::Result;
use crate::harmonics::{harmonic_gram_spectrum, GRAM_DIAGNOSTIC_CAP};
use crate::hdf::{factor_with, relative_error, ErrorMode, HdfConfig, LowRankFactorization, TauMode};
use crate::kernels::{IsotropicKernel, KernelFamily};
use crate::linalg::DenseMatrix;

use super::data::{fmt_float, synth_points};
use super::{CsvRow, Sweep};

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn rel_fro(k: &DenseMatrix, approx: &DenseMatrix) -> Result<f64> {
    let den = k.frobenius_norm();
    let num = k.sub(approx)?.frobenius_norm();
    Ok(if den == 0.0 { num } else { num / den })
}

#[derive(Debug, Clone)]
pub struct RankSweepConfig {
    pub kernels: Vec<KernelFamily>,
    pub sigma: f64,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub eps: Vec<f64>,
    /// Nyström is run with this many consecutive seeds; the best error is kept.
    pub nystrom_seeds: u64,
    pub mode: TauMode,
}

impl Default for RankSweepConfig {
    fn default() -> Self {
        Self {
            kernels: KernelFamily::BUILTIN.to_vec(),
            sigma: 1.0,
            n: 2000,
            d: 5,
            seed: 0,
            eps: vec![3e-1, 1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            nystrom_seeds: 3,
            mode: TauMode::Practical,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankErrorRow {
    pub kernel: KernelFamily,
    pub method: &'static str,
    /// HDF tolerance that produced this rank.
    pub eps: f64,
    pub rank: usize,
    pub rel_error: f64,
    pub time_ms: f64,
}

impl CsvRow for RankErrorRow {
    const HEADER: &'static [&'static str] = &["kernel", "method", "eps", "rank", "rel_error", "time_ms"];

    fn record(&self) -> Vec<String> {
        vec![
            self.kernel.to_string(),
            self.method.to_string(),
            fmt_float(self.eps),
            self.rank.to_string(),
            fmt_float(self.rel_error),
            fmt_float(self.time_ms),
        ]
    }
}

/// For each kernel and tolerance: HDF's rank and relative Frobenius error,
/// Nyström at the same rank (best of several seeds), and the SVD optimum.
/// Ranks at or above `N` have no Nyström counterpart and emit only HDF and
/// SVD rows. Tolerances the expansion cannot reach are skipped.
pub fn bench_rank_error(cfg: &RankSweepConfig) -> Result<Sweep<RankErrorRow>> {
    let x = synth_points(cfg.n, cfg.d, cfg.seed)?;
    let hdf_cfg = HdfConfig::default().with_mode(cfg.mode);
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for &fam in &cfg.kernels {
        let kernel = IsotropicKernel::new(fam, cfg.sigma)?;
        let k = dense_kernel_matrix(&kernel, &x, &x)?;
        let spectrum = singular_values(&k)?;
        for &eps in &cfg.eps {
            let t = Instant::now();
            let f = match factor_with(&kernel, eps, &x, Some(&x), &hdf_cfg) {
                Ok(f) => f,
                Err(e) => {
                    notes.push(format!("{fam} eps={eps:e} skipped: {e}"));
                    continue;
                }
            };
            let time_ms = ms_since(t);
            let r = f.rank();
            rows.push(RankErrorRow {
                kernel: fam,
                method: "hdf",
                eps,
                rank: r,
                rel_error: rel_fro(&k, &f.to_dense()?)?,
                time_ms,
            });
            if r >= cfg.n {
                notes.push(format!("{fam} eps={eps:e}: rank {r} >= N, no Nyström counterpart"));
            }
            if r >= 1 && r < cfg.n {
                let mut best: Option<(f64, f64)> = None;
                for s in 0..cfg.nystrom_seeds.max(1) {
                    let t = Instant::now();
                    let ny = nystrom(&kernel, &x, r, cfg.seed.wrapping_add(s))?;
                    let time = ms_since(t);
                    let err = rel_fro(&k, &ny.to_dense()?)?;
                    if best.is_none_or(|(e, _)| err < e) {
                        best = Some((err, time));
                    }
                }
                let (err, time) = best.expect("at least one seed");
                rows.push(RankErrorRow {
                    kernel: fam,
                    method: "nystrom",
                    eps,
                    rank: r,
                    rel_error: err,
                    time_ms: time,
                });
            }
            rows.push(RankErrorRow {
                kernel: fam,
                method: "svd",
                eps,
                rank: r,
                rel_error: optimal_errors_from_spectrum(&spectrum, &[r])[0],
                time_ms: 0.0,
            });
        }
    }
    Ok(Sweep { rows, notes })
}

#[derive(Debug, Clone)]
pub struct TimeConfig {
    pub ns: Vec<usize>,
    pub ds: Vec<usize>,
    pub kernel: KernelFamily,
    pub sigma: f64,
    pub eps: f64,
    pub trials: usize,
    pub seed: u64,
    pub mode: TauMode,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self {
            ns: vec![10_000, 20_000, 40_000, 80_000],
            ds: vec![3],
            kernel: KernelFamily::Cauchy,
            sigma: 1.0,
            eps: 1e-3,
            trials: 10,
            seed: 0,
            mode: TauMode::Practical,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeRow {
    pub d: usize,
    pub n: usize,
    pub rank: usize,
    pub time_ms: f64,
}

impl CsvRow for TimeRow {
    const HEADER: &'static [&'static str] = &["d", "N", "rank", "time_ms"];

    fn record(&self) -> Vec<String> {
        vec![self.d.to_string(), self.n.to_string(), self.rank.to_string(), fmt_float(self.time_ms)]
    }
}

/// Mean wall-clock time of `trials` factorizations after one discarded
/// warm-up, on an `(d, N)` grid; rows sorted by `(d, N)`.
pub fn bench_time(cfg: &TimeConfig) -> Result<Vec<TimeRow>> {
    let kernel = IsotropicKernel::new(cfg.kernel, cfg.sigma)?;
    let hdf_cfg = HdfConfig::default().with_mode(cfg.mode);
    let mut ds = cfg.ds.clone();
    ds.sort_unstable();
    let mut ns = cfg.ns.clone();
    ns.sort_unstable();
    let mut rows = Vec::new();
    for &d in &ds {
        for &n in &ns {
            let x = synth_points(n, d, cfg.seed)?;
            let warm = factor_with(&kernel, cfg.eps, &x, Some(&x), &hdf_cfg)?;
            let rank = warm.rank();
            drop(warm);
            let trials = cfg.trials.max(1);
            let mut total = 0.0;
            for _ in 0..trials {
                let t = Instant::now();
                let f = factor_with(&kernel, cfg.eps, &x, Some(&x), &hdf_cfg)?;
                total += ms_since(t);
                drop(f);
            }
            rows.push(TimeRow {
                d,
                n,
                rank,
                time_ms: total / trials as f64,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct ErrTimeConfig {
    pub kernels: Vec<KernelFamily>,
    pub sigma: f64,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    pub eps: Vec<f64>,
    pub mode: TauMode,
    pub error: ErrorMode,
}

impl Default for ErrTimeConfig {
    fn default() -> Self {
        Self {
            kernels: KernelFamily::BUILTIN.to_vec(),
            sigma: 1.0,
            n: 5000,
            d: 3,
            seed: 0,
            eps: vec![1e-1, 1e-2, 1e-3, 1e-4],
            mode: TauMode::Practical,
            error: ErrorMode::Sampled {
                samples: 100_000,
                seed: 0,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrTimeRow {
    pub kernel: KernelFamily,
    pub eps: f64,
    pub p: usize,
    pub rank: usize,
    pub rel_error: f64,
    pub bound: f64,
    pub time_ms: f64,
}

impl CsvRow for ErrTimeRow {
    const HEADER: &'static [&'static str] = &["kernel", "eps", "p", "rank", "rel_error", "bound", "time_ms"];

    fn record(&self) -> Vec<String> {
        vec![
            self.kernel.to_string(),
            fmt_float(self.eps),
            self.p.to_string(),
            self.rank.to_string(),
            fmt_float(self.rel_error),
            fmt_float(self.bound),
            fmt_float(self.time_ms),
        ]
    }
}

/// Factorization time and achieved error as the tolerance varies.
pub fn bench_errtime(cfg: &ErrTimeConfig) -> Result<Sweep<ErrTimeRow>> {
    let x = synth_points(cfg.n, cfg.d, cfg.seed)?;
    let hdf_cfg = HdfConfig::default().with_mode(cfg.mode);
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for &fam in &cfg.kernels {
        let kernel = IsotropicKernel::new(fam, cfg.sigma)?;
        for &eps in &cfg.eps {
            let t = Instant::now();
            let f: LowRankFactorization = match factor_with(&kernel, eps, &x, Some(&x), &hdf_cfg) {
                Ok(f) => f,
                Err(e) => {
                    notes.push(format!("{fam} eps={eps:e} skipped: {e}"));
                    continue;
                }
            };
            let time_ms = ms_since(t);
            rows.push(ErrTimeRow {
                kernel: fam,
                eps,
                p: f.degree(),
                rank: f.rank(),
                rel_error: relative_error(&f, &kernel, &x, &x, cfg.error)?,
                bound: f.apriori_bound().unwrap_or(f64::NAN),
                time_ms,
            });
        }
    }
    Ok(Sweep { rows, notes })
}

#[derive(Debug, Clone)]
pub struct DiagConfig {
    pub n: usize,
    pub ds: Vec<usize>,
    pub ks: Vec<usize>,
    pub seed: u64,
}

impl Default for DiagConfig {
    fn default() -> Self {
        Self {
            n: 500,
            ds: vec![3, 5, 10, 20],
            ks: vec![0, 1, 2, 3],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagRow {
    pub d: usize,
    pub k: usize,
    pub index: usize,
    pub sigma: f64,
    pub sigma_rel: f64,
}

impl CsvRow for DiagRow {
    const HEADER: &'static [&'static str] = &["d", "k", "index", "sigma", "sigma_rel"];

    fn record(&self) -> Vec<String> {
        vec![
            self.d.to_string(),
            self.k.to_string(),
            self.index.to_string(),
            fmt_float(self.sigma),
            fmt_float(self.sigma_rel),
        ]
    }
}

/// Spectra of the order-`k` harmonic Gram matrices on `N` normal points.
pub fn diag_harmonics(cfg: &DiagConfig) -> Result<Vec<DiagRow>> {
    if cfg.n > GRAM_DIAGNOSTIC_CAP {
        return Err(crate::Error::SizeCap {
            what: "harmonic Gram diagnostic points",
            size: cfg.n,
            cap: GRAM_DIAGNOSTIC_CAP,
        });
    }
    let mut rows = Vec::new();
    for &d in &cfg.ds {
        let x = synth_points(cfg.n, d, cfg.seed)?;
        for &k in &cfg.ks {
            let s = harmonic_gram_spectrum(&x, k)?;
            let top = s.first().copied().unwrap_or(0.0);
            rows.extend(s.iter().enumerate().map(|(i, &v)| DiagRow {
                d,
                k,
                index: i + 1,
                sigma: v,
                sigma_rel: if top > 0.0 { v / top } else { 0.0 },
            }));
        }
    }
    Ok(rows)
}
