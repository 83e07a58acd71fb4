//! Singular value decay of harmonic Gram matrices as the dimension grows.

use hdf::experiments::{diag_harmonics, DiagConfig};

fn main() -> hdf::Result<()> {
    let rows = diag_harmonics(&DiagConfig {
        n: 500,
        ds: vec![3, 5, 10, 20],
        ks: vec![2],
        seed: 0,
    })?;
    for d in [3, 5, 10, 20] {
        let sel: Vec<f64> = rows.iter().filter(|r| r.d == d && r.sigma_rel > 1e-10).map(|r| r.sigma_rel).collect();
        println!(
            "d={d:>2} k=2: {:>3} nonzero, smallest/largest = {:.3}",
            sel.len(),
            sel.last().copied().unwrap_or(0.0)
        );
    }
    Ok(())
}
