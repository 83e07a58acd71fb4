use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hdf::baselines::nystrom;
use hdf::experiments::{
    bench_errtime, bench_rank_error, bench_time, diag_harmonics, fit_power_law, fmt_float, krr_run, read_points_file,
    read_table, seeded_vector, split_labels, synth_points, synth_regression, write_csv, write_points, CsvRow,
    DiagConfig, ErrTimeConfig, KrrRunConfig, LabelColumn, MethodChoice, RankSweepConfig, TimeConfig,
};
use hdf::hdf::{factor_with, relative_error, ErrorMode, HdfConfig, TauMode};
use hdf::kernels::{IsotropicKernel, KernelFamily};
use hdf::krr::OffDiagonal;
use hdf::linalg::DenseMatrix;
use hdf::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "hdf", version, about = "Harmonic decomposition factorization of isotropic kernel matrices")]
struct Cli {
    /// Worker threads; timings follow a single-threaded protocol by default.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Write 0 in every wall-clock column so that output is byte-reproducible.
    #[arg(long, global = true)]
    no_timing: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Standard normal points rescaled to max norm 1.
    Synth {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Factor K(X, X) and optionally save it.
    Factor {
        #[command(flatten)]
        data: PointsArgs,
        #[command(flatten)]
        kern: KernelArgs,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = TauMode::Practical)]
        mode: TauMode,
        #[command(flatten)]
        error: ErrorArgs,
        /// Factorization file to write.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a saved factorization to a vector.
    Matvec {
        #[arg(long = "in")]
        input: PathBuf,
        /// One-column CSV; a seeded vector is used when absent.
        #[arg(long)]
        vector: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank vs relative Frobenius error for HDF, Nyström and the SVD optimum.
    BenchRank {
        #[arg(long, value_delimiter = ',', default_value = "all")]
        kernel: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_delimiter = ',', default_value = "3e-1,1e-1,3e-2,1e-2,3e-3,1e-3")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        nystrom_seeds: u64,
        #[arg(long, default_value_t = TauMode::Practical)]
        mode: TauMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Factorization time over a grid of N and d.
    BenchTime {
        #[arg(long, value_delimiter = ',', default_value = "10000,20000,40000,80000")]
        n: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "3")]
        d: Vec<usize>,
        #[arg(long, default_value_t = KernelFamily::Cauchy)]
        kernel: KernelFamily,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = TauMode::Practical)]
        mode: TauMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Requested tolerance against achieved error, bound and time.
    BenchErrtime {
        #[arg(long, value_delimiter = ',', default_value = "all")]
        kernel: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_delimiter = ',', default_value = "1e-1,1e-2,1e-3,1e-4,1e-5,1e-6")]
        eps: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 3)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = TauMode::Practical)]
        mode: TauMode,
        #[command(flatten)]
        error: ErrorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Uniform Nyström approximation of K(X, X).
    Nystrom {
        #[command(flatten)]
        data: PointsArgs,
        #[command(flatten)]
        kern: KernelArgs,
        #[arg(long)]
        rank: usize,
        #[command(flatten)]
        error: ErrorArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Block-diagonal kernel ridge regression over seeded splits.
    Krr {
        /// CSV of features plus a label column; synthetic data when absent.
        #[arg(long)]
        points: Option<PathBuf>,
        /// Zero-based index or header name; defaults to the last column.
        #[arg(long)]
        labels_col: Option<String>,
        #[arg(long, default_value_t = 4000)]
        n: usize,
        #[arg(long, default_value_t = 8)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', default_value = "all")]
        kernel: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "hdf,dense")]
        method: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 1e-3)]
        eps: f64,
        #[arg(long, default_value_t = TauMode::Practical)]
        mode: TauMode,
        /// Ridge parameter; 1e-3 times the training size when absent.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 30)]
        clusters: usize,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, value_enum, default_value_t = Switch::On)]
        precond_lambda: Switch,
        /// Kernel interactions between clusters: drop (block-diagonal system) or exact.
        #[arg(long, default_value = "drop")]
        offdiag: OffDiagonal,
        /// Summary (median, min, max MSE per kernel and method).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trials_out: Option<PathBuf>,
        #[arg(long)]
        blocks_out: Option<PathBuf>,
    },
    /// Singular values of harmonic Gram matrices on random points.
    DiagHarmonics {
        #[arg(long, default_value_t = 500)]
        n: usize,
        #[arg(long, value_delimiter = ',', default_value = "3,5,10,20")]
        d: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        k: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct PointsArgs {
    /// Points CSV; synthetic points are generated when absent.
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl PointsArgs {
    fn load(&self) -> Result<DenseMatrix> {
        match &self.points {
            Some(p) => read_points_file(p),
            None => synth_points(self.n, self.d, self.seed),
        }
    }
}

#[derive(Args, Debug)]
struct KernelArgs {
    #[arg(long, default_value_t = KernelFamily::Cauchy)]
    kernel: KernelFamily,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
}

impl KernelArgs {
    fn build(&self) -> Result<IsotropicKernel> {
        IsotropicKernel::new(self.kernel, self.sigma)
    }
}

#[derive(Args, Debug)]
struct ErrorArgs {
    /// How to measure the relative Frobenius error; skipped when absent.
    #[arg(long, value_enum)]
    error: Option<ErrorKind>,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

impl ErrorArgs {
    fn mode(&self, seed: u64) -> Option<ErrorMode> {
        self.error.map(|k| match k {
            ErrorKind::Exact => ErrorMode::Exact,
            ErrorKind::Sampled => ErrorMode::Sampled {
                samples: self.samples,
                seed,
            },
        })
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ErrorKind {
    Exact,
    Sampled,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Switch {
    On,
    Off,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    eprintln!("hdf: resolved config {cli:?}");
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads.max(1)).build_global() {
        eprintln!("hdf: could not configure thread pool: {e}");
        return ExitCode::from(1);
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hdf: error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidInput(_)
        | Error::UnsupportedDimension { .. }
        | Error::InvalidKernel { .. }
        | Error::SizeCap { .. }
        | Error::Parse { .. } => 2,
        Error::NumericFailure(_) => 3,
        Error::ToleranceUnreachable { .. } | Error::RankBudget { .. } => 4,
        Error::Io(_) => 1,
    }
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit<T: CsvRow>(path: &Option<PathBuf>, rows: &[T]) -> Result<()> {
    let mut w = sink(path)?;
    write_csv(&mut w, rows)?;
    w.flush()?;
    Ok(())
}

fn kernel_list(names: &[String]) -> Result<Vec<KernelFamily>> {
    if names.iter().any(|n| n == "all") {
        return Ok(KernelFamily::BUILTIN.to_vec());
    }
    names.iter().map(|n| n.parse()).collect()
}

fn notes(list: &[String]) {
    for n in list {
        eprintln!("hdf: note: {n}");
    }
}

fn elapsed_ms(t: Instant, no_timing: bool) -> f64 {
    if no_timing { 0.0 } else { t.elapsed().as_secs_f64() * 1e3 }
}

struct FactorSummary {
    kernel: KernelFamily,
    sigma: f64,
    eps: f64,
    mode: TauMode,
    n: usize,
    d: usize,
    p: usize,
    rank: usize,
    stored_entries: usize,
    bound: Option<f64>,
    rel_error: Option<f64>,
    time_ms: f64,
}

impl CsvRow for FactorSummary {
    const HEADER: &'static [&'static str] = &[
        "kernel", "sigma", "eps", "mode", "n", "d", "p", "rank", "stored_entries", "bound", "rel_error", "time_ms",
    ];

    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
        vec![
            self.kernel.to_string(),
            fmt_float(self.sigma),
            fmt_float(self.eps),
            self.mode.to_string(),
            self.n.to_string(),
            self.d.to_string(),
            self.p.to_string(),
            self.rank.to_string(),
            self.stored_entries.to_string(),
            opt(self.bound),
            opt(self.rel_error),
            fmt_float(self.time_ms),
        ]
    }
}

struct NystromSummary {
    kernel: KernelFamily,
    sigma: f64,
    n: usize,
    rank: usize,
    jitter: f64,
    rel_error: Option<f64>,
    time_ms: f64,
}

impl CsvRow for NystromSummary {
    const HEADER: &'static [&'static str] = &["kernel", "sigma", "n", "rank", "jitter", "rel_error", "time_ms"];

    fn record(&self) -> Vec<String> {
        vec![
            self.kernel.to_string(),
            fmt_float(self.sigma),
            self.n.to_string(),
            self.rank.to_string(),
            fmt_float(self.jitter),
            self.rel_error.map(fmt_float).unwrap_or_default(),
            fmt_float(self.time_ms),
        ]
    }
}

struct VectorEntry(f64);

impl CsvRow for VectorEntry {
    const HEADER: &'static [&'static str] = &["y"];

    fn record(&self) -> Vec<String> {
        vec![fmt_float(self.0)]
    }
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let table = read_table(BufReader::new(File::open(path)?))?;
    if table.values.cols() != 1 {
        return Err(Error::InvalidInput(format!(
            "vector file must have one column, found {}",
            table.values.cols()
        )));
    }
    Ok(table.values.column(0))
}

fn run(cli: &Cli) -> Result<()> {
    let no_timing = cli.no_timing;
    match &cli.command {
        Command::Synth { n, d, seed, out } => {
            let x = synth_points(*n, *d, *seed)?;
            let mut w = sink(out)?;
            write_points(&mut w, &x)?;
            w.flush()?;
        }
        Command::Factor {
            data,
            kern,
            eps,
            mode,
            error,
            out,
        } => {
            let x = data.load()?;
            let kernel = kern.build()?;
            let t = Instant::now();
            let f = factor_with(&kernel, *eps, &x, None, &HdfConfig::default().with_mode(*mode))?;
            let time_ms = elapsed_ms(t, no_timing);
            let rel_error = match error.mode(data.seed) {
                Some(m) => Some(relative_error(&f, &kernel, &x, &x, m)?),
                None => None,
            };
            if let Some(path) = out {
                let mut w = BufWriter::new(File::create(path)?);
                hdf::hdf::save(&f, &mut w)?;
                w.flush()?;
            }
            let row = FactorSummary {
                kernel: kern.kernel,
                sigma: kern.sigma,
                eps: *eps,
                mode: *mode,
                n: x.rows(),
                d: x.cols(),
                p: f.degree(),
                rank: f.rank(),
                stored_entries: f.stored_entries(),
                bound: f.apriori_bound(),
                rel_error,
                time_ms,
            };
            emit(&None, &[row])?;
        }
        Command::Matvec {
            input,
            vector,
            seed,
            out,
        } => {
            let f = hdf::hdf::load(BufReader::new(File::open(input)?))?;
            let w = match vector {
                Some(p) => read_vector(p)?,
                None => seeded_vector(f.cols(), *seed),
            };
            let y = f.matvec(&w)?;
            let rows: Vec<VectorEntry> = y.into_iter().map(VectorEntry).collect();
            emit(out, &rows)?;
        }
        Command::BenchRank {
            kernel,
            sigma,
            eps,
            n,
            d,
            seed,
            nystrom_seeds,
            mode,
            out,
        } => {
            let cfg = RankSweepConfig {
                kernels: kernel_list(kernel)?,
                sigma: *sigma,
                n: *n,
                d: *d,
                seed: *seed,
                eps: eps.clone(),
                nystrom_seeds: *nystrom_seeds,
                mode: *mode,
            };
            let mut sweep = bench_rank_error(&cfg)?;
            notes(&sweep.notes);
            if no_timing {
                sweep.rows.iter_mut().for_each(|r| r.time_ms = 0.0);
            }
            emit(out, &sweep.rows)?;
        }
        Command::BenchTime {
            n,
            d,
            kernel,
            sigma,
            eps,
            trials,
            seed,
            mode,
            out,
        } => {
            let cfg = TimeConfig {
                ns: n.clone(),
                ds: d.clone(),
                kernel: *kernel,
                sigma: *sigma,
                eps: *eps,
                trials: *trials,
                seed: *seed,
                mode: *mode,
            };
            let mut rows = bench_time(&cfg)?;
            for &dd in &cfg.ds {
                let sel: Vec<_> = rows.iter().filter(|r| r.d == dd).collect();
                let ns: Vec<f64> = sel.iter().map(|r| r.n as f64).collect();
                let ts: Vec<f64> = sel.iter().map(|r| r.time_ms).collect();
                if let Ok(slope) = fit_power_law(&ns, &ts) {
                    eprintln!("hdf: d={dd} time ~ N^{slope:.3}");
                }
            }
            if no_timing {
                rows.iter_mut().for_each(|r| r.time_ms = 0.0);
            }
            emit(out, &rows)?;
        }
        Command::BenchErrtime {
            kernel,
            sigma,
            eps,
            n,
            d,
            seed,
            mode,
            error,
            out,
        } => {
            let cfg = ErrTimeConfig {
                kernels: kernel_list(kernel)?,
                sigma: *sigma,
                n: *n,
                d: *d,
                seed: *seed,
                eps: eps.clone(),
                mode: *mode,
                error: error.mode(*seed).unwrap_or(ErrorMode::Sampled {
                    samples: error.samples,
                    seed: *seed,
                }),
            };
            let mut sweep = bench_errtime(&cfg)?;
            notes(&sweep.notes);
            if no_timing {
                sweep.rows.iter_mut().for_each(|r| r.time_ms = 0.0);
            }
            emit(out, &sweep.rows)?;
        }
        Command::Nystrom {
            data,
            kern,
            rank,
            error,
            out,
        } => {
            let x = data.load()?;
            let kernel = kern.build()?;
            let t = Instant::now();
            let ny = nystrom(&kernel, &x, *rank, data.seed)?;
            let time_ms = elapsed_ms(t, no_timing);
            let rel_error = match error.mode(data.seed) {
                Some(m) => Some(ny.relative_error(&kernel, &x, m)?),
                None => None,
            };
            let row = NystromSummary {
                kernel: kern.kernel,
                sigma: kern.sigma,
                n: x.rows(),
                rank: ny.rank(),
                jitter: ny.jitter(),
                rel_error,
                time_ms,
            };
            emit(out, &[row])?;
        }
        Command::Krr {
            points,
            labels_col,
            n,
            d,
            seed,
            kernel,
            method,
            sigma,
            eps,
            mode,
            lambda,
            clusters,
            trials,
            precond_lambda,
            offdiag,
            out,
            trials_out,
            blocks_out,
        } => {
            let (x, y) = match points {
                Some(p) => {
                    let table = read_table(BufReader::new(File::open(p)?))?;
                    let col = match labels_col {
                        Some(c) => c.parse::<LabelColumn>()?,
                        None => LabelColumn::Index(table.values.cols().saturating_sub(1)),
                    };
                    split_labels(&table, &col)?
                }
                None => synth_regression(*n, *d, *seed)?,
            };
            let cfg = KrrRunConfig {
                kernels: kernel_list(kernel)?,
                methods: method.iter().map(|m| m.parse::<MethodChoice>()).collect::<Result<_>>()?,
                sigma: *sigma,
                eps: *eps,
                lambda: *lambda,
                clusters: *clusters,
                trials: *trials,
                seed: *seed,
                precond_lambda: *precond_lambda == Switch::On,
                offdiag: *offdiag,
                hdf: HdfConfig::default().with_mode(*mode),
            };
            let mut report = krr_run(&x, &y, &cfg)?;
            eprintln!(
                "hdf: lambda = {} ({}), {} train / {} test",
                report.lambda,
                if lambda.is_some() { "given" } else { "default 1e-3 * N_train" },
                report.n_train,
                report.n_test
            );
            if no_timing {
                report.trials.iter_mut().for_each(|r| r.time_ms = 0.0);
            }
            emit(out, &report.summary)?;
            if trials_out.is_some() {
                emit(trials_out, &report.trials)?;
            }
            if blocks_out.is_some() {
                emit(blocks_out, &report.blocks)?;
            }
        }
        Command::DiagHarmonics { n, d, k, seed, out } => {
            let rows = diag_harmonics(&DiagConfig {
                n: *n,
                ds: d.clone(),
                ks: k.clone(),
                seed: *seed,
            })?;
            emit(out, &rows)?;
        }
    }
    Ok(())
}
