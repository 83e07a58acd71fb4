//! Factor a Cauchy kernel matrix in strict mode and compare the measured
//! error with the a priori bound.

use hdf::experiments::synth_points;
use hdf::hdf::{factor_with, max_entry_error, relative_error, ErrorMode, HdfConfig};
use hdf::kernels::IsotropicKernel;

fn main() -> hdf::Result<()> {
    let x = synth_points(2000, 3, 42)?;
    let kernel = IsotropicKernel::cauchy(1.0)?;
    for eps in [1e-2, 1e-4, 1e-6] {
        let f = factor_with(&kernel, eps, &x, None, &HdfConfig::strict())?;
        let (max_err, max_k) = max_entry_error(&f, &kernel, &x, &x)?;
        let fro = relative_error(&f, &kernel, &x, &x, ErrorMode::Exact)?;
        println!(
            "eps {eps:.0e}: p={:>3} rank={:>4} max|K-UV'|={:.2e} (bound {:.2e}, eps*max|K| {:.2e}) rel fro={:.2e}",
            f.degree(),
            f.rank(),
            max_err,
            f.apriori_bound().unwrap_or(f64::NAN),
            eps * max_k,
            fro
        );
        if let Some(info) = f.info() {
            println!("    ranks per order: {:?}", info.ranks);
        }
    }
    Ok(())
}
