//! HDF against uniform Nyström and the SVD optimum at matched rank.

use hdf::experiments::{write_csv, RankSweepConfig};
use hdf::kernels::KernelFamily;

fn main() -> hdf::Result<()> {
    let cfg = RankSweepConfig {
        kernels: vec![KernelFamily::Gaussian, KernelFamily::Matern15],
        n: 1500,
        d: 5,
        eps: vec![1e-1, 1e-2, 1e-3],
        ..RankSweepConfig::default()
    };
    let sweep = hdf::experiments::bench_rank_error(&cfg)?;
    for note in &sweep.notes {
        eprintln!("note: {note}");
    }
    write_csv(std::io::stdout().lock(), &sweep.rows)
}
