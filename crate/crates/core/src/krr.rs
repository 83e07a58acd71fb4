//! Kernel ridge regression with a k-means block-diagonal kernel approximation
//! solved by preconditioned CG.

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::baselines::{dense_kernel_matrix, nystrom, NystromFactorization};
use crate::error::{Error, Result};
use crate::hdf::{factor_with, HdfConfig, LowRankFactorization};
use crate::kernels::IsotropicKernel;
use crate::linalg::{cg_solve, Cholesky, DenseMatrix, FnOperator, DEFAULT_MAX_ITERS};

pub const DEFAULT_CLUSTERS: usize = 30;
pub const DEFAULT_KMEANS_ITERS: usize = 100;
/// Blocks with fewer points are kept dense.
pub const DENSE_BLOCK_FLOOR: usize = 32;
pub const CG_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub centroids: DenseMatrix,
    pub assignments: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    pub iterations: usize,
}

impl ClusterModel {
    pub fn n_clusters(&self) -> usize {
        self.members.len()
    }

    /// Sum of squared distances to the assigned centroid.
    pub fn distortion(&self, x: &DenseMatrix) -> f64 {
        (0..x.rows())
            .map(|i| sq_dist(x.row(i), self.centroids.row(self.assignments[i])))
            .sum()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

fn nearest(p: &[f64], centroids: &DenseMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = sq_dist(p, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Lloyd iterations from a seeded k-means++ start. Empty clusters are
/// re-seeded from the point farthest from its centroid; clusters still empty
/// at the end are dropped.
pub fn kmeans(x: &DenseMatrix, k: usize, seed: u64, max_iters: usize) -> Result<ClusterModel> {
    let (n, d) = x.shape();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cluster count must lie in 1..={n}, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![rng.random_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(&mut rng),
            // All remaining mass is zero (duplicates): take any unchosen point.
            Err(_) => (0..n).find(|i| !chosen.contains(i)).expect("k <= n"),
        };
        chosen.push(next);
        for (i, v) in d2.iter_mut().enumerate() {
            *v = v.min(sq_dist(x.row(i), x.row(next)));
        }
    }
    let mut centroids = x.select_rows(&chosen);
    let mut assignments = vec![usize::MAX; n];
    let mut iterations = 0;
    for _ in 0..max_iters {
        iterations += 1;
        let fresh: Vec<(usize, f64)> = (0..n).into_par_iter().map(|i| nearest(x.row(i), &centroids)).collect();
        let changed = fresh.iter().zip(&assignments).any(|(f, a)| f.0 != *a);
        for (a, f) in assignments.iter_mut().zip(&fresh) {
            *a = f.0;
        }
        let mut sums = DenseMatrix::zeros(k, d);
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assignments[i]] += 1;
            for (s, v) in sums.row_mut(assignments[i]).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        let mut reseeded = false;
        let mut taken = vec![false; n];
        for c in 0..k {
            if counts[c] == 0 {
                let far = (0..n)
                    .filter(|&i| !taken[i] && counts[assignments[i]] > 1)
                    .max_by(|&i, &j| fresh[i].1.total_cmp(&fresh[j].1).then(j.cmp(&i)));
                if let Some(i) = far {
                    taken[i] = true;
                    centroids.row_mut(c).copy_from_slice(x.row(i));
                    reseeded = true;
                }
            } else {
                let inv = 1.0 / counts[c] as f64;
                for (dst, s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        if !changed && !reseeded {
            break;
        }
    }
    // Final assignment against the final centroids, then drop empty clusters.
    for i in 0..n {
        assignments[i] = nearest(x.row(i), &centroids).0;
    }
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &a) in assignments.iter().enumerate() {
        members[a].push(i);
    }
    let keep: Vec<usize> = (0..k).filter(|&c| !members[c].is_empty()).collect();
    let mut remap = vec![usize::MAX; k];
    for (new, &old) in keep.iter().enumerate() {
        remap[old] = new;
    }
    Ok(ClusterModel {
        centroids: centroids.select_rows(&keep),
        assignments: assignments.iter().map(|&a| remap[a]).collect(),
        members: keep.iter().map(|&c| std::mem::take(&mut members[c])).collect(),
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NystromRank {
    Fixed(usize),
    /// Per block, the rank HDF reaches at this tolerance.
    MatchHdf(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KrrMethod {
    Hdf { eps: f64 },
    Nystrom { rank: NystromRank, seed: u64 },
    Dense,
}

impl KrrMethod {
    pub fn name(&self) -> &'static str {
        match self {
            KrrMethod::Hdf { .. } => "hdf",
            KrrMethod::Nystrom { .. } => "nystrom",
            KrrMethod::Dense => "dense",
        }
    }
}

/// What the training operator does with kernel interactions between clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffDiagonal {
    /// Solve the block-diagonal system only.
    #[default]
    Drop,
    /// Keep the off-diagonal blocks exact (dense); only diagonal blocks are
    /// approximated. Needs the full `N x N` kernel matrix in memory.
    Exact,
}

impl OffDiagonal {
    pub fn name(self) -> &'static str {
        match self {
            OffDiagonal::Drop => "drop",
            OffDiagonal::Exact => "exact",
        }
    }
}

impl std::str::FromStr for OffDiagonal {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop" => Ok(OffDiagonal::Drop),
            "exact" => Ok(OffDiagonal::Exact),
            other => Err(Error::invalid(format!("unknown off-diagonal mode '{other}' (expected drop, exact)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrrConfig {
    pub lambda: f64,
    pub method: KrrMethod,
    pub clusters: usize,
    pub seed: u64,
    /// Include `lambda I` in the exact-block preconditioner.
    pub precond_lambda: bool,
    pub offdiag: OffDiagonal,
    pub tol: f64,
    pub max_iters: usize,
    pub hdf: HdfConfig,
}

impl KrrConfig {
    pub fn new(lambda: f64, method: KrrMethod) -> Self {
        Self {
            lambda,
            method,
            clusters: DEFAULT_CLUSTERS,
            seed: 0,
            precond_lambda: true,
            offdiag: OffDiagonal::Drop,
            tol: CG_TOLERANCE,
            max_iters: DEFAULT_MAX_ITERS,
            hdf: HdfConfig::default(),
        }
    }
}

/// One approximated diagonal block.
#[derive(Debug, Clone)]
pub enum BlockApprox {
    Dense(DenseMatrix),
    Hdf(LowRankFactorization),
    Nystrom(NystromFactorization),
}

impl BlockApprox {
    pub fn rank(&self) -> usize {
        match self {
            BlockApprox::Dense(m) => m.rows(),
            BlockApprox::Hdf(f) => f.rank(),
            BlockApprox::Nystrom(f) => f.rank(),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match self {
            BlockApprox::Dense(m) => m.matvec(x),
            BlockApprox::Hdf(f) => f.matvec(x),
            BlockApprox::Nystrom(f) => f.matvec(x),
        }
        .expect("block operator dimensions fixed at construction")
    }

    fn to_dense(&self) -> Result<DenseMatrix> {
        match self {
            BlockApprox::Dense(m) => Ok(m.clone()),
            BlockApprox::Hdf(f) => f.to_dense(),
            BlockApprox::Nystrom(f) => f.to_dense(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrrModel {
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub clusters: ClusterModel,
    pub blocks: Vec<BlockApprox>,
    /// `||B_exact - B_approx||_F / ||B_exact||_F` per block.
    pub block_errors: Vec<f64>,
    pub iters: usize,
    pub converged: bool,
    pub residuals: Vec<f64>,
}

/// Solves `(lambda I + blockdiag(B_i)) w = y` over k-means blocks.
pub fn fit(kernel: &IsotropicKernel, x: &DenseMatrix, y: &[f64], config: &KrrConfig) -> Result<KrrModel> {
    let n = x.rows();
    if y.len() != n {
        return Err(Error::invalid(format!("{} labels for {n} points", y.len())));
    }
    if !(config.lambda > 0.0) {
        return Err(Error::invalid("regularization lambda must be > 0"));
    }
    let clusters = kmeans(x, config.clusters.min(n), config.seed, DEFAULT_KMEANS_ITERS)?;

    type Built = (BlockApprox, Cholesky, f64);
    let built: Vec<Built> = clusters
        .members
        .par_iter()
        .map(|idx| -> Result<Built> {
            let pts = x.select_rows(idx);
            let exact = dense_kernel_matrix(kernel, &pts, &pts)?;
            let block = if idx.len() < DENSE_BLOCK_FLOOR {
                BlockApprox::Dense(exact.clone())
            } else {
                match config.method {
                    KrrMethod::Dense => BlockApprox::Dense(exact.clone()),
                    KrrMethod::Hdf { eps } => BlockApprox::Hdf(factor_with(kernel, eps, &pts, None, &config.hdf)?),
                    KrrMethod::Nystrom { rank, seed } => {
                        let m = match rank {
                            NystromRank::Fixed(m) => m,
                            NystromRank::MatchHdf(eps) => factor_with(kernel, eps, &pts, None, &config.hdf)?.rank(),
                        };
                        BlockApprox::Nystrom(nystrom(kernel, &pts, m.clamp(1, idx.len()), seed)?)
                    }
                }
            };
            let err = {
                let diff = exact.sub(&block.to_dense()?)?;
                let den = exact.frobenius_norm();
                if den == 0.0 { 0.0 } else { diff.frobenius_norm() / den }
            };
            let mut pre = exact;
            if config.precond_lambda {
                for i in 0..pre.rows() {
                    pre[(i, i)] += config.lambda;
                }
            }
            let chol = match Cholesky::factor(&pre, 0.0) {
                Ok(c) => c,
                Err(_) => Cholesky::factor_with_default_jitter(&pre)?,
            };
            Ok((block, chol, err))
        })
        .collect::<Result<_>>()?;

    let members = &clusters.members;
    let off = match config.offdiag {
        OffDiagonal::Drop => None,
        OffDiagonal::Exact => {
            let mut k = dense_kernel_matrix(kernel, x, x)?;
            for idx in members {
                for &i in idx {
                    for &j in idx {
                        k[(i, j)] = 0.0;
                    }
                }
            }
            Some(k)
        }
    };
    let lambda = config.lambda;
    let op = FnOperator::new(n, |v: &[f64], out: &mut [f64]| {
        match &off {
            Some(k) => {
                let kv = k.matvec(v).expect("square operator");
                for ((o, vi), kvi) in out.iter_mut().zip(v).zip(kv) {
                    *o = lambda * vi + kvi;
                }
            }
            None => {
                for (o, vi) in out.iter_mut().zip(v) {
                    *o = lambda * vi;
                }
            }
        }
        for (idx, (block, _, _)) in members.iter().zip(&built) {
            let local: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
            for (&i, bv) in idx.iter().zip(block.apply(&local)) {
                out[i] += bv;
            }
        }
    });
    let precond = FnOperator::new(n, |v: &[f64], out: &mut [f64]| {
        for (idx, (_, chol, _)) in members.iter().zip(&built) {
            let mut local: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
            chol.solve_in_place(&mut local);
            for (&i, s) in idx.iter().zip(local) {
                out[i] = s;
            }
        }
    });
    let outcome = cg_solve(&op, y, &precond, config.tol, config.max_iters)?;
    let (blocks, block_errors) = built.into_iter().map(|(b, _, e)| (b, e)).unzip();
    Ok(KrrModel {
        weights: outcome.x,
        lambda,
        clusters,
        blocks,
        block_errors,
        iters: outcome.iters,
        converged: outcome.converged,
        residuals: outcome.residuals,
    })
}

/// `K(X_test, X_train) w`, evaluated densely row by row.
pub fn predict(model: &KrrModel, kernel: &IsotropicKernel, x_train: &DenseMatrix, x_test: &DenseMatrix) -> Result<Vec<f64>> {
    if x_train.rows() != model.weights.len() {
        return Err(Error::invalid("training set does not match the model weights"));
    }
    if x_test.cols() != x_train.cols() {
        return Err(Error::invalid("test points have a different dimension than training points"));
    }
    Ok((0..x_test.rows())
        .into_par_iter()
        .map(|i| {
            let p = x_test.row(i);
            (0..x_train.rows())
                .map(|j| kernel.between(p, x_train.row(j)) * model.weights[j])
                .sum()
        })
        .collect())
}

pub fn mse(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    if predictions.is_empty() {
        return Err(Error::invalid("mean squared error of an empty set"));
    }
    if predictions.len() != truth.len() {
        return Err(Error::invalid("prediction and truth lengths differ"));
    }
    Ok(predictions.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm2, solve_spd};
    use rand_distr::StandardNormal;

    fn data(n: usize, d: usize, seed: u64) -> (DenseMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = DenseMatrix::from_fn(n, d, |_, _| rng.random::<f64>());
        let y = (0..n)
            .map(|i| {
                let r = x.row(i);
                (3.0 * r[0]).sin() + r[1] * r[2] + 0.05 * rng.sample::<f64, _>(StandardNormal)
            })
            .collect();
        (x, y)
    }

    #[test]
    fn kmeans_extremes() {
        let (x, _) = data(25, 3, 1);
        let all = kmeans(&x, 25, 3, 100).unwrap();
        assert_eq!(all.n_clusters(), 25);
        assert!(all.distortion(&x) < 1e-24);
        let one = kmeans(&x, 1, 3, 100).unwrap();
        let mean: Vec<f64> = (0..3).map(|j| x.column(j).iter().sum::<f64>() / 25.0).collect();
        for (a, b) in one.centroids.row(0).iter().zip(&mean) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(one.members[0].len(), 25);
        assert!(kmeans(&x, 26, 3, 10).is_err());
    }

    #[test]
    fn kmeans_separates_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DenseMatrix::from_fn(200, 2, |i, _| {
            let off = if i < 100 { 0.0 } else { 20.0 };
            off + rng.sample::<f64, _>(StandardNormal)
        });
        let m = kmeans(&x, 2, 7, 100).unwrap();
        let a = m.assignments[0];
        assert!(m.assignments[..100].iter().all(|&c| c == a));
        assert!(m.assignments[100..].iter().all(|&c| c != a));
    }

    #[test]
    fn large_lambda_limit() {
        let (x, y) = data(120, 3, 3);
        let k = IsotropicKernel::gaussian(1.0).unwrap();
        let mut cfg = KrrConfig::new(1e6, KrrMethod::Dense);
        cfg.clusters = 4;
        let model = fit(&k, &x, &y, &cfg).unwrap();
        for (w, t) in model.weights.iter().zip(&y) {
            assert!((w * 1e6 - t).abs() <= 0.01 * t.abs().max(1e-3));
        }
    }

    #[test]
    fn dense_method_is_exactly_preconditioned() {
        let (x, y) = data(300, 3, 4);
        let k = IsotropicKernel::matern25(1.0).unwrap();
        let mut cfg = KrrConfig::new(0.3, KrrMethod::Dense);
        cfg.clusters = 5;
        let model = fit(&k, &x, &y, &cfg).unwrap();
        assert!(model.converged && model.iters <= 2, "{} iters", model.iters);
        // Direct blockwise solve.
        let mut direct = vec![0.0; 300];
        for idx in &model.clusters.members {
            let pts = x.select_rows(idx);
            let mut a = dense_kernel_matrix(&k, &pts, &pts).unwrap();
            for i in 0..a.rows() {
                a[(i, i)] += 0.3;
            }
            let rhs: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
            for (&i, v) in idx.iter().zip(solve_spd(&a, &rhs, 0.0).unwrap()) {
                direct[i] = v;
            }
        }
        let diff: Vec<f64> = direct.iter().zip(&model.weights).map(|(a, b)| a - b).collect();
        assert!(norm2(&diff) <= 1e-8 * norm2(&direct));
    }

    #[test]
    fn exact_off_diagonal_solves_full_system() {
        let (x, y) = data(300, 3, 8);
        let k = IsotropicKernel::cauchy(1.0).unwrap();
        let mut cfg = KrrConfig::new(0.3, KrrMethod::Dense);
        cfg.clusters = 5;
        cfg.offdiag = OffDiagonal::Exact;
        let model = fit(&k, &x, &y, &cfg).unwrap();
        assert!(model.converged);
        let mut a = dense_kernel_matrix(&k, &x, &x).unwrap();
        for i in 0..300 {
            a[(i, i)] += 0.3;
        }
        let direct = solve_spd(&a, &y, 0.0).unwrap();
        let diff: Vec<f64> = direct.iter().zip(&model.weights).map(|(a, b)| a - b).collect();
        assert!(norm2(&diff) <= 1e-6 * norm2(&direct));

        // Training predictions of the full model sit far closer to the labels
        // than those of the block-diagonal model pushed through the full kernel.
        cfg.offdiag = OffDiagonal::Drop;
        let blockwise = fit(&k, &x, &y, &cfg).unwrap();
        let full_mse = mse(&predict(&model, &k, &x, &x).unwrap(), &y).unwrap();
        let block_mse = mse(&predict(&blockwise, &k, &x, &x).unwrap(), &y).unwrap();
        assert!(full_mse < block_mse, "{full_mse} vs {block_mse}");
    }

    #[test]
    fn hdf_method_matches_dense() {
        let (x, y) = data(500, 3, 5);
        let k = IsotropicKernel::cauchy(1.0).unwrap();
        let mut dense_cfg = KrrConfig::new(0.5, KrrMethod::Dense);
        dense_cfg.clusters = 6;
        let hdf_cfg = KrrConfig {
            method: KrrMethod::Hdf { eps: 1e-10 },
            ..dense_cfg.clone()
        };
        let wd = fit(&k, &x, &y, &dense_cfg).unwrap().weights;
        let wh = fit(&k, &x, &y, &hdf_cfg).unwrap().weights;
        let diff: Vec<f64> = wd.iter().zip(&wh).map(|(a, b)| a - b).collect();
        assert!(norm2(&diff) <= 1e-6 * norm2(&wd));
    }

    #[test]
    fn nystrom_method_runs_and_reports_errors() {
        let (x, y) = data(300, 3, 6);
        let k = IsotropicKernel::gaussian(1.0).unwrap();
        let mut cfg = KrrConfig::new(1.0, KrrMethod::Nystrom { rank: NystromRank::MatchHdf(1e-3), seed: 1 });
        cfg.clusters = 4;
        let model = fit(&k, &x, &y, &cfg).unwrap();
        assert_eq!(model.block_errors.len(), model.clusters.n_clusters());
        assert!(model.block_errors.iter().all(|e| e.is_finite() && *e >= 0.0));
    }

    #[test]
    fn prediction_examples() {
        let (x, y) = data(60, 3, 7);
        let k = IsotropicKernel::gaussian(0.3).unwrap();
        let mut cfg = KrrConfig::new(1e-9, KrrMethod::Dense);
        cfg.clusters = 1;
        let model = fit(&k, &x, &y, &cfg).unwrap();
        let pred = predict(&model, &k, &x, &x).unwrap();
        for (p, t) in pred.iter().zip(&y) {
            assert!((p - t).abs() <= 1e-4, "{p} vs {t}");
        }

        let mut zero = model.clone();
        zero.weights = vec![0.0; 60];
        assert!(predict(&zero, &k, &x, &x).unwrap().iter().all(|v| *v == 0.0));

        let mut hot = zero.clone();
        hot.weights[5] = 1.0;
        let single = x.select_rows(&[5]);
        assert_eq!(predict(&hot, &k, &x, &single).unwrap(), vec![1.0]);
        assert!(predict(&model, &k, &x, &DenseMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!(mse(&[], &[]).is_err());
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn fit_is_deterministic() {
        let (x, y) = data(200, 3, 8);
        let k = IsotropicKernel::cauchy(1.0).unwrap();
        let mut cfg = KrrConfig::new(0.2, KrrMethod::Hdf { eps: 1e-3 });
        cfg.clusters = 3;
        cfg.seed = 42;
        let a = fit(&k, &x, &y, &cfg).unwrap();
        let b = fit(&k, &x, &y, &cfg).unwrap();
        assert_eq!(a.clusters.assignments, b.clusters.assignments);
        assert_eq!(a.weights, b.weights);
    }
}
