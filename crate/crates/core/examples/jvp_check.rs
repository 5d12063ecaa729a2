//! Forward- and reverse-mode derivatives of every reconstruction model:
//! JVP against central finite differences, and JVP/VJP adjoint pairing.
//!
//! cargo run --release --example jvp_check

use std::sync::Arc;

use num_complex::Complex64;
use varmap::numerics::{real_inner, ComplexArray};
use varmap::operator::{make_birdcage_maps, make_mask, ImagingOperator, MaskSpec, Scheme};
use varmap::recon::{DataConsistency, NetArch, ReconModel};
use varmap::rng::CounterRng;
use varmap::Result;

fn random(shape: &[usize], seed: u64) -> ComplexArray {
    let rng = CounterRng::new(seed);
    ComplexArray::from_fn(shape, |k| rng.complex_normal(0, k as u64))
}

fn main() -> Result<()> {
    let size = 12;
    let mask = make_mask(&MaskSpec::new(Scheme::UniformRandom2d, 2.0, size, size, 1))?;
    let op = Arc::new(ImagingOperator::new(make_birdcage_maps(2, size, size)?, mask)?);
    let arch = NetArch::default();
    let models = [
        ("identity", ReconModel::identity(op.clone())),
        ("unrolled-dc K=4", ReconModel::unrolled(op.clone(), 4, &arch, 11)?),
        (
            "unrolled-dc K=2, CG",
            ReconModel::unrolled(op.clone(), 2, &arch, 12)?.with_dc(DataConsistency::Cg { lambda: 0.1, iters: 5 })?,
        ),
        ("single-pass-denoiser", ReconModel::denoiser(op.clone(), &arch, 13)?),
    ];
    let h = 1e-5;
    for (name, model) in &models {
        let (mut fd_err, mut pair_err): (f64, f64) = (0.0, 0.0);
        for t in 0..20u64 {
            let x = random(&op.image_shape(), 100 + t);
            let u = random(&op.image_shape(), 200 + t);
            let lin = model.linearize(&x)?;
            let ju = lin.jvp(&u)?;
            let plus = model.apply(&x.add(&u.scaled(Complex64::new(h, 0.0)))?)?;
            let minus = model.apply(&x.sub(&u.scaled(Complex64::new(h, 0.0)))?)?;
            let mut fd = plus.sub(&minus)?;
            fd.scale(Complex64::new(0.5 / h, 0.0));
            fd_err = fd_err.max(fd.sub(&ju)?.norm() / ju.norm());

            let w = random(&op.image_shape(), 300 + t);
            let lhs = real_inner(&ju, &w)?;
            let rhs = real_inner(&u, &lin.vjp(&w)?)?;
            pair_err = pair_err.max((lhs - rhs).abs() / (ju.norm() * w.norm()));
        }
        println!("{name:<22} max FD rel. error {fd_err:.2e}   max adjoint pairing error {pair_err:.2e}");
    }
    Ok(())
}
