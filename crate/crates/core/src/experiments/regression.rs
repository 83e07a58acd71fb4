//! The regression protocol: min-max scaled features, seeded 2/3–1/3 shuffles,
//! block-diagonal KRR per kernel and method, median/min/max MSE.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::hdf::HdfConfig;
use crate::kernels::{IsotropicKernel, KernelFamily};
use crate::krr::{fit, mse, predict, KrrConfig, KrrMethod, NystromRank, OffDiagonal, DEFAULT_CLUSTERS};
use crate::linalg::DenseMatrix;

use super::data::{fmt_float, median_min_max, minmax_scale};
use super::CsvRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodChoice {
    Hdf,
    /// Nyström per block at the rank HDF reaches on that block.
    NystromMatched,
    Dense,
}

impl MethodChoice {
    pub fn name(self) -> &'static str {
        match self {
            MethodChoice::Hdf => "hdf",
            MethodChoice::NystromMatched => "nystrom",
            MethodChoice::Dense => "dense",
        }
    }
}

impl std::str::FromStr for MethodChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hdf" => Ok(MethodChoice::Hdf),
            "nystrom" => Ok(MethodChoice::NystromMatched),
            "dense" => Ok(MethodChoice::Dense),
            other => Err(Error::invalid(format!("unknown method '{other}' (expected hdf, nystrom, dense)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrrRunConfig {
    pub kernels: Vec<KernelFamily>,
    pub methods: Vec<MethodChoice>,
    pub sigma: f64,
    pub eps: f64,
    /// `None` means `1e-3 * N_train`.
    pub lambda: Option<f64>,
    pub clusters: usize,
    pub trials: usize,
    pub seed: u64,
    pub precond_lambda: bool,
    pub offdiag: OffDiagonal,
    pub hdf: HdfConfig,
}

impl Default for KrrRunConfig {
    fn default() -> Self {
        Self {
            kernels: KernelFamily::BUILTIN.to_vec(),
            methods: vec![MethodChoice::Hdf, MethodChoice::Dense],
            sigma: 1.0,
            eps: 1e-3,
            lambda: None,
            clusters: DEFAULT_CLUSTERS,
            trials: 5,
            seed: 0,
            precond_lambda: true,
            offdiag: OffDiagonal::Drop,
            hdf: HdfConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub kernel: KernelFamily,
    pub method: &'static str,
    pub mse: f64,
    pub iters: usize,
    pub converged: bool,
    pub time_ms: f64,
}

impl CsvRow for TrialRow {
    const HEADER: &'static [&'static str] = &["trial", "kernel", "method", "mse", "iters", "converged", "time_ms"];

    fn record(&self) -> Vec<String> {
        vec![
            self.trial.to_string(),
            self.kernel.to_string(),
            self.method.to_string(),
            fmt_float(self.mse),
            self.iters.to_string(),
            self.converged.to_string(),
            fmt_float(self.time_ms),
        ]
    }
}

/// Table-1-shaped summary line.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub kernel: KernelFamily,
    pub method: &'static str,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub converged_trials: usize,
    pub trials: usize,
}

impl CsvRow for SummaryRow {
    const HEADER: &'static [&'static str] =
        &["kernel", "method", "mse_median", "mse_min", "mse_max", "converged_trials", "trials"];

    fn record(&self) -> Vec<String> {
        vec![
            self.kernel.to_string(),
            self.method.to_string(),
            fmt_float(self.median),
            fmt_float(self.min),
            fmt_float(self.max),
            self.converged_trials.to_string(),
            self.trials.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockErrorRow {
    pub trial: usize,
    pub kernel: KernelFamily,
    pub method: &'static str,
    pub block: usize,
    pub size: usize,
    pub rank: usize,
    pub rel_error: f64,
}

impl CsvRow for BlockErrorRow {
    const HEADER: &'static [&'static str] = &["trial", "kernel", "method", "block", "size", "rank", "rel_error"];

    fn record(&self) -> Vec<String> {
        vec![
            self.trial.to_string(),
            self.kernel.to_string(),
            self.method.to_string(),
            self.block.to_string(),
            self.size.to_string(),
            self.rank.to_string(),
            fmt_float(self.rel_error),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct KrrReport {
    pub lambda: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub summary: Vec<SummaryRow>,
    pub trials: Vec<TrialRow>,
    pub blocks: Vec<BlockErrorRow>,
}

impl KrrReport {
    pub fn summary_for(&self, kernel: KernelFamily, method: MethodChoice) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.kernel == kernel && r.method == method.name())
    }
}

/// Seeded permutation for trial `t`; the first two thirds train.
pub fn trial_split(n: usize, seed: u64, trial: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let cut = (2 * n) / 3;
    let test = perm.split_off(cut);
    (perm, test)
}

pub fn krr_run(x: &DenseMatrix, y: &[f64], cfg: &KrrRunConfig) -> Result<KrrReport> {
    let n = x.rows();
    if y.len() != n {
        return Err(Error::invalid(format!("{} labels for {n} points", y.len())));
    }
    if n < 3 {
        return Err(Error::invalid("regression needs at least three samples"));
    }
    let scaled = minmax_scale(x);
    let n_train = (2 * n) / 3;
    let lambda = cfg.lambda.unwrap_or(1e-3 * n_train as f64);
    let mut trials = Vec::new();
    let mut blocks = Vec::new();
    for t in 0..cfg.trials.max(1) {
        let (train, test) = trial_split(n, cfg.seed, t);
        let xtr = scaled.select_rows(&train);
        let xte = scaled.select_rows(&test);
        let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let yte: Vec<f64> = test.iter().map(|&i| y[i]).collect();
        for &fam in &cfg.kernels {
            let kernel = IsotropicKernel::new(fam, cfg.sigma)?;
            for &m in &cfg.methods {
                let method = match m {
                    MethodChoice::Hdf => KrrMethod::Hdf { eps: cfg.eps },
                    MethodChoice::NystromMatched => KrrMethod::Nystrom {
                        rank: NystromRank::MatchHdf(cfg.eps),
                        seed: cfg.seed.wrapping_add(t as u64),
                    },
                    MethodChoice::Dense => KrrMethod::Dense,
                };
                let kc = KrrConfig {
                    lambda,
                    method,
                    clusters: cfg.clusters,
                    seed: cfg.seed.wrapping_add(t as u64),
                    precond_lambda: cfg.precond_lambda,
                    offdiag: cfg.offdiag,
                    hdf: cfg.hdf.clone(),
                    ..KrrConfig::new(lambda, method)
                };
                let start = Instant::now();
                let model = fit(&kernel, &xtr, &ytr, &kc)?;
                let pred = predict(&model, &kernel, &xtr, &xte)?;
                let time_ms = start.elapsed().as_secs_f64() * 1e3;
                trials.push(TrialRow {
                    trial: t,
                    kernel: fam,
                    method: m.name(),
                    mse: mse(&pred, &yte)?,
                    iters: model.iters,
                    converged: model.converged,
                    time_ms,
                });
                for (b, (idx, blk)) in model.clusters.members.iter().zip(&model.blocks).enumerate() {
                    blocks.push(BlockErrorRow {
                        trial: t,
                        kernel: fam,
                        method: m.name(),
                        block: b,
                        size: idx.len(),
                        rank: blk.rank(),
                        rel_error: model.block_errors[b],
                    });
                }
            }
        }
    }
    let mut summary = Vec::new();
    for &fam in &cfg.kernels {
        for &m in &cfg.methods {
            let sel: Vec<&TrialRow> = trials.iter().filter(|r| r.kernel == fam && r.method == m.name()).collect();
            let mses: Vec<f64> = sel.iter().map(|r| r.mse).collect();
            if let Some((median, min, max)) = median_min_max(&mses) {
                summary.push(SummaryRow {
                    kernel: fam,
                    method: m.name(),
                    median,
                    min,
                    max,
                    converged_trials: sel.iter().filter(|r| r.converged).count(),
                    trials: sel.len(),
                });
            }
        }
    }
    Ok(KrrReport {
        lambda,
        n_train,
        n_test: n - n_train,
        summary,
        trials,
        blocks,
    })
}
