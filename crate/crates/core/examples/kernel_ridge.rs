//! Block-diagonal kernel ridge regression: HDF blocks against exact blocks.

use hdf::experiments::{krr_run, synth_regression, KrrRunConfig};
use hdf::kernels::KernelFamily;

fn main() -> hdf::Result<()> {
    let (x, y) = synth_regression(2000, 6, 0)?;
    let cfg = KrrRunConfig {
        kernels: vec![KernelFamily::Cauchy, KernelFamily::Gaussian],
        clusters: 10,
        trials: 3,
        ..KrrRunConfig::default()
    };
    let report = krr_run(&x, &y, &cfg)?;
    println!("lambda = {:.3}, {} train / {} test", report.lambda, report.n_train, report.n_test);
    for s in &report.summary {
        println!(
            "{:<9} {:<6} MSE {:.4e} [{:.4e}, {:.4e}]",
            s.kernel.to_string(),
            s.method,
            s.median,
            s.min,
            s.max
        );
    }
    let worst = report.blocks.iter().filter(|b| b.method == "hdf").map(|b| b.rel_error).fold(0.0, f64::max);
    println!("worst HDF block relative error {worst:.2e}");
    Ok(())
}
