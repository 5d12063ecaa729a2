//! Correlated coil noise: build a covariance from independent sources, draw
//! k-space noise from it, and recover it from the outer k-space samples.
//!
//! cargo run --release --example noise_model

use varmap::noise::{build_coil_covariance, estimate_coil_covariance, sample_noise, NoiseSourceModel, SampleCovariance};
use varmap::numerics::HermitianMatrix;
use varmap::Result;

fn rel_frobenius(a: &HermitianMatrix, b: &HermitianMatrix) -> f64 {
    let diff = a.entries().sub(b.entries()).expect("same size");
    diff.norm() / b.frobenius()
}

fn main() -> Result<()> {
    let (coils, rows, cols) = (4, 64, 64);
    let sources = NoiseSourceModel::random(coils, 6, 1.0, 21)?;
    let truth = build_coil_covariance(&sources)?;
    println!("coil covariance from {} sources (mean coil variance 1):", sources.n_sources());
    for i in 0..coils {
        let row: Vec<String> = (0..coils)
            .map(|j| {
                let z = truth.matrix().get(i, j);
                format!("{:+.3}{:+.3}i", z.re, z.im)
            })
            .collect();
        println!("  {}", row.join("  "));
    }

    let cov = SampleCovariance::new(truth.clone(), rows, cols);
    println!("block-diagonal sample covariance: m = {} (never materialized)", cov.m());
    for fraction in [0.02, 0.05, 0.2] {
        let noise = sample_noise(&cov, 5);
        let est = estimate_coil_covariance(&noise, fraction)?;
        println!(
            "outer {:>4.0}% of k-space: relative Frobenius error {:.3}",
            100.0 * fraction,
            rel_frobenius(est.matrix(), truth.matrix())
        );
    }

    let scaled = cov.with_scale(4.0)?;
    let n1 = sample_noise(&cov, 9).norm_sqr();
    let n4 = sample_noise(&scaled, 9).norm_sqr();
    println!("noise energy ratio at alpha = 4: {:.6}", n4 / n1);
    Ok(())
}
