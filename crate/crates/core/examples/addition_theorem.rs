//! Hyperspherical harmonics reproduce Gegenbauer polynomials of the angle.

use hdf::harmonics::{gegenbauer, harmonic_count, HarmonicBasis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

fn main() -> hdf::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for d in [3, 4, 6, 10] {
        let basis = HarmonicBasis::new(d, 8)?;
        let (x, y) = (unit(&mut rng, d), unit(&mut rng, d));
        let cos: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let mut worst = 0.0_f64;
        for k in 0..=8 {
            let s: f64 = basis.eval_all(k, &x).iter().zip(basis.eval_all(k, &y)).map(|(a, b)| a * b).sum();
            let want = gegenbauer(basis.alpha(), k, cos)? / basis.normalizer(k);
            worst = worst.max((s - want).abs());
        }
        println!(
            "d={d:>2}: {} harmonics up to k=8 (|H_8| = {}), max residual {worst:.2e}",
            basis.total_count(),
            harmonic_count(8, d)?
        );
    }
    Ok(())
}
