//! Adaptive Chebyshev degree selection for the built-in kernels.

use hdf::chebyshev::choose_degree;
use hdf::kernels::{IsotropicKernel, KernelFamily};

fn main() -> hdf::Result<()> {
    println!("{:<9} {:>7} {:>4} {:>12} {:>12}", "kernel", "eps", "p", "tail", "grid err");
    for fam in KernelFamily::BUILTIN {
        let kernel = IsotropicKernel::new(fam, 1.0)?;
        for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
            let choice = match choose_degree(&kernel, eps) {
                Ok(c) => c,
                Err(e) => {
                    println!("{:<9} {:>7.0e}  {e}", fam.name(), eps);
                    continue;
                }
            };
            // Worst deviation of the truncated series from the kernel on [0, 1].
            let err = (0..=1000)
                .map(|i| {
                    let r = i as f64 / 1000.0;
                    (kernel.value(r) - choice.expansion.eval(r)).abs()
                })
                .fold(0.0, f64::max);
            println!("{:<9} {:>7.0e} {:>4} {:>12.3e} {:>12.3e}", fam.name(), eps, choice.p, choice.tail, err);
        }
    }
    Ok(())
}
