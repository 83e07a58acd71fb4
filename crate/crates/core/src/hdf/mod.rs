//! Harmonic decomposition factorization `K ~ U V^T` (or `U D U^T`) of an
//! isotropic kernel matrix.

mod io;

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::chebyshev::choose_degree_for_budget;
use crate::error::{Error, Result};
use crate::expansion::build_tensor;
use crate::harmonics::HarmonicBasis;
use crate::kernels::{make_scaled_problem, IsotropicKernel, KernelFamily};
use crate::linalg::{norm2, DenseMatrix};
use crate::radial::{build_radial_matrices, mixing_matrix, radial_y, RadialDecomposition, RadialFactors};

pub use io::{load, save, MAGIC};

/// Cap on `N * M` for dense error evaluation.
pub const DENSE_ENTRY_CAP: usize = 40_000_000;

/// Default cap on stored factor entries (`r * (N + M)`, or `r * N + r`).
pub const DEFAULT_RANK_BUDGET: usize = 60_000_000;

/// How the singular-value threshold is derived from the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TauMode {
    /// `tau = eps_svd` against the small-matrix singular values directly.
    #[default]
    Practical,
    /// `tau = eps_svd / (sqrt(N) C)`, which guarantees the a-priori bound.
    Strict,
}

impl fmt::Display for TauMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TauMode::Practical => "practical",
            TauMode::Strict => "strict",
        })
    }
}

impl FromStr for TauMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "practical" => Ok(TauMode::Practical),
            "strict" => Ok(TauMode::Strict),
            other => Err(Error::invalid(format!("unknown mode '{other}' (expected strict or practical)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct HdfConfig {
    pub mode: TauMode,
    /// Share of `eps` given to the Chebyshev tail; the rest goes to SVD truncation.
    pub cheb_fraction: f64,
    /// Interpret `tau` relative to the largest radial singular value over all orders.
    pub relative_tau: bool,
    pub rank_budget: usize,
    /// Refuse expansions whose roundoff estimate exceeds `eps`.
    pub check_conditioning: bool,
}

impl Default for HdfConfig {
    fn default() -> Self {
        Self {
            mode: TauMode::Practical,
            cheb_fraction: 0.5,
            relative_tau: false,
            rank_budget: DEFAULT_RANK_BUDGET,
            check_conditioning: true,
        }
    }
}

impl HdfConfig {
    pub fn strict() -> Self {
        Self {
            mode: TauMode::Strict,
            ..Self::default()
        }
    }

    pub fn with_mode(mut self, mode: TauMode) -> Self {
        self.mode = mode;
        self
    }
}

/// Singular-value threshold from the `eps / 2` SVD share.
pub fn choose_tau(eps: f64, mode: TauMode, n: usize, bound_constant: f64) -> f64 {
    tau_for_budget(eps / 2.0, mode, n, bound_constant)
}

fn tau_for_budget(budget: f64, mode: TauMode, n: usize, bound_constant: f64) -> f64 {
    match mode {
        TauMode::Practical => budget,
        TauMode::Strict => budget / ((n.max(1) as f64).sqrt() * bound_constant),
    }
}

/// Tolerance split and the constant of the a-priori bound.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBudget {
    pub eps_total: f64,
    pub eps_cheb: f64,
    /// Measured Chebyshev tail at the chosen degree.
    pub cheb_tail: f64,
    /// Effective absolute threshold applied to the radial spectra.
    pub tau: f64,
    /// `C = sum_k C(k+d-3, k) / Z_k`.
    pub bound_constant: f64,
    /// Worst-case roundoff amplification of the monomial expansion.
    pub roundoff: f64,
}

/// Metadata that only exists for factorizations built in-process.
#[derive(Debug, Clone)]
pub struct FactorizationInfo {
    pub kernel: KernelFamily,
    pub sigma: f64,
    pub mode: TauMode,
    pub budget: ErrorBudget,
    /// Per-order radial ranks `s_k`.
    pub ranks: Vec<usize>,
    /// Per-order harmonic counts `|H_k|`.
    pub harmonics: Vec<usize>,
    pub center: Vec<f64>,
    pub scale: f64,
}

#[derive(Debug, Clone)]
pub struct LowRankFactorization {
    pub(crate) u: DenseMatrix,
    pub(crate) v: Option<DenseMatrix>,
    pub(crate) diag: Option<Vec<f64>>,
    pub(crate) p: usize,
    pub(crate) d: usize,
    pub(crate) info: Option<FactorizationInfo>,
}

impl LowRankFactorization {
    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn rows(&self) -> usize {
        self.u.rows()
    }

    pub fn cols(&self) -> usize {
        self.v.as_ref().map_or(self.u.rows(), DenseMatrix::rows)
    }

    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn is_symmetric(&self) -> bool {
        self.diag.is_some()
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> Option<&DenseMatrix> {
        self.v.as_ref()
    }

    pub fn diag(&self) -> Option<&[f64]> {
        self.diag.as_deref()
    }

    pub fn info(&self) -> Option<&FactorizationInfo> {
        self.info.as_ref()
    }

    /// Number of stored floating-point values.
    pub fn stored_entries(&self) -> usize {
        self.u.data().len()
            + self.v.as_ref().map_or(0, |v| v.data().len())
            + self.diag.as_ref().map_or(0, Vec::len)
    }

    /// Approximation of `K_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let ui = self.u.row(i);
        match (&self.v, &self.diag) {
            (Some(v), _) => ui.iter().zip(v.row(j)).map(|(a, b)| a * b).sum(),
            (None, Some(d)) => ui
                .iter()
                .zip(self.u.row(j))
                .zip(d)
                .map(|((a, b), s)| a * s * b)
                .sum(),
            (None, None) => unreachable!("factorization has either V or D"),
        }
    }

    /// `U (V^T w)` or `U (D (U^T w))`.
    pub fn matvec(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.cols() {
            return Err(Error::invalid(format!(
                "vector length {} does not match {} columns",
                w.len(),
                self.cols()
            )));
        }
        if self.rank() == 0 {
            return Ok(vec![0.0; self.rows()]);
        }
        let mut t = match &self.v {
            Some(v) => v.matvec_transpose(w)?,
            None => self.u.matvec_transpose(w)?,
        };
        if let Some(d) = &self.diag {
            for (ti, di) in t.iter_mut().zip(d) {
                *ti *= di;
            }
        }
        self.u.matvec(&t)
    }

    /// `sqrt(max(N, M)) C tau + eps_c(p)`; `None` without build metadata.
    pub fn apriori_bound(&self) -> Option<f64> {
        let info = self.info.as_ref()?;
        let n = self.rows().max(self.cols()) as f64;
        Some(n.sqrt() * info.budget.bound_constant * info.budget.tau + info.budget.cheb_tail)
    }

    /// Dense `U V^T` (or `U D U^T`).
    pub fn to_dense(&self) -> Result<DenseMatrix> {
        match (&self.v, &self.diag) {
            (Some(v), _) => self.u.matmul_transb(v),
            (None, Some(d)) => {
                let mut ud = self.u.clone();
                for i in 0..ud.rows() {
                    for (x, s) in ud.row_mut(i).iter_mut().zip(d) {
                        *x *= s;
                    }
                }
                ud.matmul_transb(&self.u)
            }
            (None, None) => unreachable!("factorization has either V or D"),
        }
    }
}

pub fn factor(kernel: &IsotropicKernel, eps: f64, x: &DenseMatrix, y: &DenseMatrix) -> Result<LowRankFactorization> {
    factor_with(kernel, eps, x, Some(y), &HdfConfig::default())
}

pub fn factor_sym(kernel: &IsotropicKernel, eps: f64, x: &DenseMatrix) -> Result<LowRankFactorization> {
    factor_with(kernel, eps, x, None, &HdfConfig::default())
}

/// Full pipeline. `y = None` selects the symmetric `U D U^T` variant.
pub fn factor_with(
    kernel: &IsotropicKernel,
    eps: f64,
    x: &DenseMatrix,
    y: Option<&DenseMatrix>,
    config: &HdfConfig,
) -> Result<LowRankFactorization> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::invalid(format!("tolerance must be a positive number, got {eps}")));
    }
    if !(config.cheb_fraction > 0.0 && config.cheb_fraction < 1.0) {
        return Err(Error::invalid("Chebyshev share of the tolerance must lie in (0, 1)"));
    }
    if x.rows() == 0 || y.is_some_and(|y| y.rows() == 0) {
        return Err(Error::invalid("point sets must be non-empty"));
    }
    let problem = make_scaled_problem(kernel, x, y)?;
    let d = problem.dim();
    let eps_cheb = eps * config.cheb_fraction;
    let choice = choose_degree_for_budget(&problem.kernel, eps_cheb)?;
    let p = choice.p;
    let tensor = build_tensor(&choice.expansion, d)?;
    let roundoff = tensor.roundoff_estimate();
    if config.check_conditioning && !(roundoff <= eps) {
        return Err(Error::numeric(format!(
            "monomial expansion at degree {p} amplifies roundoff to about {roundoff:.2e}, \
             above the tolerance {eps:.2e} (kernel too narrow for the scaled data)"
        )));
    }
    let basis = HarmonicBasis::new(d, p / 2)?;
    let kmax = p / 2;

    let n = x.rows();
    let m = y.map_or(n, DenseMatrix::rows);
    let bound_constant: f64 = (0..=kmax).map(|k| basis.count(k) as f64).sum();
    let mut tau = tau_for_budget(eps - eps_cheb, config.mode, n.max(m), bound_constant);

    let norms_x: Vec<f64> = (0..n).map(|i| norm2(problem.x.row(i))).collect();
    let norms_y: Option<Vec<f64>> = problem
        .y
        .as_ref()
        .map(|yy| (0..yy.rows()).map(|i| norm2(yy.row(i))).collect());

    let decompositions: Vec<RadialDecomposition> = (0..=kmax)
        .into_par_iter()
        .map(|k| match &norms_y {
            Some(ny) => {
                let (xr, yr) = build_radial_matrices(&tensor, k, 1.0, &norms_x, ny);
                RadialDecomposition::new(k, &xr, &yr)
            }
            None => {
                let yr = radial_y(k, tensor.block_len(k), &norms_x);
                RadialDecomposition::new_sym(k, &yr, &mixing_matrix(&tensor, k, 1.0))
            }
        })
        .collect::<Result<_>>()?;

    if config.relative_tau {
        let top = decompositions.iter().map(|dcp| dcp.leading_value()).fold(0.0, f64::max);
        tau *= top;
    }

    let ranks: Vec<usize> = decompositions.iter().map(|dcp| dcp.rank_at(tau)).collect();
    let harmonics: Vec<usize> = (0..=kmax).map(|k| basis.count(k)).collect();
    let rank: usize = ranks.iter().zip(&harmonics).map(|(s, h)| s * h).sum();
    let entries = if norms_y.is_some() { rank * (n + m) } else { rank * (n + 1) };
    if entries > config.rank_budget {
        return Err(Error::RankBudget {
            rank,
            entries,
            budget: config.rank_budget,
        });
    }

    let factors: Vec<RadialFactors> = decompositions
        .par_iter()
        .map(|dcp| dcp.truncate(tau))
        .collect::<Result<_>>()?;

    let u = assemble(&basis, &factors, &problem.x, rank, |f| &f.xbar);
    let (v, diag) = match &problem.y {
        Some(yy) => (
            Some(assemble(&basis, &factors, yy, rank, |f| {
                f.ybar.as_ref().expect("asymmetric factors carry Ybar")
            })),
            None,
        ),
        None => {
            let mut dg = Vec::with_capacity(rank);
            for f in &factors {
                let ev = f.eigvals.as_ref().expect("symmetric factors carry eigenvalues");
                for _ in 0..basis.count(f.k) {
                    dg.extend_from_slice(ev);
                }
            }
            (None, Some(dg))
        }
    };
    if !u.is_finite() || v.as_ref().is_some_and(|v| !v.is_finite()) {
        return Err(Error::numeric("factor matrices contain non-finite values"));
    }

    Ok(LowRankFactorization {
        u,
        v,
        diag,
        p,
        d,
        info: Some(FactorizationInfo {
            kernel: kernel.family(),
            sigma: kernel.sigma(),
            mode: config.mode,
            budget: ErrorBudget {
                eps_total: eps,
                eps_cheb,
                cheb_tail: choice.tail,
                tau,
                bound_constant,
                roundoff,
            },
            ranks,
            harmonics,
            center: problem.center.clone(),
            scale: problem.scale,
        }),
    })
}

/// Row `i` of the factor: for each order `k`, harmonic `h`, radial column
/// `l`, the entry `radial[i, l] * sqrt(Z_k) Y_k^h(point_i)`. The addition
/// normalization sits on the harmonics, one square root per side, so the
/// radial spectra compared against `tau` are those of `r^(k)` itself.
fn assemble<'a>(
    basis: &HarmonicBasis,
    factors: &'a [RadialFactors],
    points: &DenseMatrix,
    rank: usize,
    radial: impl Fn(&'a RadialFactors) -> &'a DenseMatrix + Sync,
) -> DenseMatrix {
    let n = points.rows();
    let mut out = DenseMatrix::zeros(n, rank);
    if rank == 0 {
        return out;
    }
    let max_h = factors
        .iter()
        .filter(|f| f.rank() > 0)
        .map(|f| basis.count(f.k))
        .max()
        .unwrap_or(0);
    out.data_mut()
        .par_chunks_mut(rank)
        .enumerate()
        .for_each_init(
            || vec![0.0; max_h],
            |buf, (i, row)| {
                let tables = basis.prepare(points.row(i));
                let mut col = 0;
                for f in factors.iter().filter(|f| f.rank() > 0) {
                    let h_count = basis.count(f.k);
                    let harm = &mut buf[..h_count];
                    basis.eval_order(&tables, f.k, harm);
                    let root_z = basis.normalizer(f.k).sqrt();
                    let rad = radial(f).row(i);
                    for &hv in harm.iter() {
                        for (slot, &r) in row[col..col + rad.len()].iter_mut().zip(rad) {
                            *slot = r * (root_z * hv);
                        }
                        col += rad.len();
                    }
                }
                debug_assert_eq!(col, rank);
            },
        );
    out
}

/// Exact or sampled relative Frobenius error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    Exact,
    Sampled { samples: usize, seed: u64 },
}

/// `||K - U V^T||_F / ||K||_F` against the kernel on the original points.
pub fn relative_error(
    f: &LowRankFactorization,
    kernel: &IsotropicKernel,
    x: &DenseMatrix,
    y: &DenseMatrix,
    mode: ErrorMode,
) -> Result<f64> {
    check_shapes(f, x, y)?;
    relative_error_by(|i, j| f.entry(i, j), kernel, x, y, mode)
}

/// Relative Frobenius error of any entry oracle against the kernel.
pub(crate) fn relative_error_by<F>(
    approx: F,
    kernel: &IsotropicKernel,
    x: &DenseMatrix,
    y: &DenseMatrix,
    mode: ErrorMode,
) -> Result<f64>
where
    F: Fn(usize, usize) -> f64 + Sync,
{
    let (n, m) = (x.rows(), y.rows());
    let (num, den) = match mode {
        ErrorMode::Exact => {
            if n.saturating_mul(m) > DENSE_ENTRY_CAP {
                return Err(Error::SizeCap {
                    what: "exact error evaluation (use sampled mode)",
                    size: n * m,
                    cap: DENSE_ENTRY_CAP,
                });
            }
            (0..n)
                .into_par_iter()
                .map(|i| {
                    (0..m).fold((0.0, 0.0), |(a, b), j| {
                        let kij = kernel.between(x.row(i), y.row(j));
                        let e = kij - approx(i, j);
                        (a + e * e, b + kij * kij)
                    })
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d))
        }
        ErrorMode::Sampled { samples, seed } => {
            let total = n * m;
            let count = samples.min(total);
            if count == 0 {
                return Err(Error::invalid("sampled error needs at least one sample"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = sample(&mut rng, total, count).into_vec();
            idx.sort_unstable();
            idx.iter().fold((0.0, 0.0), |(a, b), &t| {
                let (i, j) = (t / m, t % m);
                let kij = kernel.between(x.row(i), y.row(j));
                let e = kij - approx(i, j);
                (a + e * e, b + kij * kij)
            })
        }
    };
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((num / den).sqrt())
}

/// `(max_ij |K_ij - (UV^T)_ij|, max_ij |K_ij|)` over all entries.
pub fn max_entry_error(
    f: &LowRankFactorization,
    kernel: &IsotropicKernel,
    x: &DenseMatrix,
    y: &DenseMatrix,
) -> Result<(f64, f64)> {
    check_shapes(f, x, y)?;
    let (n, m) = (x.rows(), y.rows());
    if n.saturating_mul(m) > DENSE_ENTRY_CAP {
        return Err(Error::SizeCap {
            what: "max-entry error evaluation",
            size: n * m,
            cap: DENSE_ENTRY_CAP,
        });
    }
    let per_row: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..m).fold((0.0_f64, 0.0_f64), |(e, k), j| {
                let kij = kernel.between(x.row(i), y.row(j));
                (e.max((kij - f.entry(i, j)).abs()), k.max(kij.abs()))
            })
        })
        .collect();
    Ok(per_row
        .into_iter()
        .fold((0.0, 0.0), |(a, b), (c, d)| (a.max(c), b.max(d))))
}

fn check_shapes(f: &LowRankFactorization, x: &DenseMatrix, y: &DenseMatrix) -> Result<()> {
    if f.rows() != x.rows() || f.cols() != y.rows() {
        return Err(Error::invalid(format!(
            "factorization is {}x{} but point sets give {}x{}",
            f.rows(),
            f.cols(),
            x.rows(),
            y.rows()
        )));
    }
    Ok(())
}
