//! Persist a factorization, reload it, and apply it to a vector.

use std::io::Cursor;

use hdf::baselines::dense_kernel_matrix;
use hdf::experiments::{seeded_vector, synth_points};
use hdf::hdf::{factor_sym, load, save};
use hdf::kernels::IsotropicKernel;

fn main() -> hdf::Result<()> {
    let x = synth_points(3000, 4, 7)?;
    let kernel = IsotropicKernel::gaussian(1.0)?;
    let f = factor_sym(&kernel, 1e-6, &x)?;

    let mut bytes = Vec::new();
    save(&f, &mut bytes)?;
    let g = load(Cursor::new(&bytes))?;
    println!("rank {} stored in {} bytes", g.rank(), bytes.len());

    let w = seeded_vector(x.rows(), 3);
    let fast = g.matvec(&w)?;
    assert_eq!(fast, f.matvec(&w)?);
    let exact = dense_kernel_matrix(&kernel, &x, &x)?.matvec(&w)?;
    let num: f64 = fast.iter().zip(&exact).map(|(a, b)| (a - b).powi(2)).sum();
    let den: f64 = exact.iter().map(|b| b * b).sum();
    println!("relative matvec error {:.3e}", (num / den).sqrt());
    Ok(())
}
