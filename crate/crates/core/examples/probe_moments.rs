//! Probe distributions: second and fourth moments, and the single-probe
//! estimator variance against its closed form.
//!
//! cargo run --release --example probe_moments

use varmap::numerics::HermitianMatrix;
use varmap::probes::{estimator_variance_closed_form, gen_probes, hadamard_sample, ProbeDistribution, ProbeSource};
use varmap::Result;

fn main() -> Result<()> {
    let draws = 1_000_000;
    for dist in ProbeDistribution::ALL {
        let p = gen_probes(1, draws, dist, 5)?;
        let m2 = p.data().norm_sqr() / draws as f64;
        let m4 = p.data().data().iter().map(|v| v.norm_sqr().powi(2)).sum::<f64>() / draws as f64;
        println!("{:<17} E|v|² = {m2:.4}  E|v|⁴ = {m4:.4} (theory {})", dist.name(), dist.fourth_moment());
    }

    let sigma = HermitianMatrix::random_psd(6, 6, 31);
    println!("\nsingle-probe variance of conj(v)·(Σv) on a seeded 6×6 Σ:");
    println!("{:>3} {:>12} {:>12} {:>12} {:>12}", "i", "gauss", "gauss (MC)", "phase", "phase (MC)");
    let s = 200_000;
    let mut mc = Vec::new();
    for dist in ProbeDistribution::ALL {
        let src = ProbeSource::new(dist, 32);
        let (mut sum, mut sq) = (vec![num_complex::Complex64::new(0.0, 0.0); 6], vec![0.0; 6]);
        for j in 0..s {
            for (i, y) in hadamard_sample(&sigma, &src.column(6, j))?.into_iter().enumerate() {
                sum[i] += y;
                sq[i] += y.norm_sqr();
            }
        }
        mc.push((0..6).map(|i| (sq[i] - sum[i].norm_sqr() / s as f64) / (s - 1) as f64).collect::<Vec<_>>());
    }
    let g = estimator_variance_closed_form(&sigma, ProbeDistribution::ComplexGaussian);
    let p = estimator_variance_closed_form(&sigma, ProbeDistribution::RandomPhase);
    for i in 0..6 {
        println!("{i:>3} {:>12.4} {:>12.4} {:>12.4} {:>12.4}", g[i], mc[0][i], p[i], mc[1][i]);
    }
    Ok(())
}
