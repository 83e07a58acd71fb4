//! Factorization time against N with a power-law fit.

use hdf::experiments::{bench_time, fit_power_law, TimeConfig};

fn main() -> hdf::Result<()> {
    let rows = bench_time(&TimeConfig {
        ns: vec![5_000, 10_000, 20_000, 40_000],
        trials: 3,
        ..TimeConfig::default()
    })?;
    for r in &rows {
        println!("N={:>6} rank={:>4} {:>9.2} ms", r.n, r.rank, r.time_ms);
    }
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let ts: Vec<f64> = rows.iter().map(|r| r.time_ms).collect();
    println!("time ~ N^{:.2}", fit_power_law(&ns, &ts)?);
    Ok(())
}
