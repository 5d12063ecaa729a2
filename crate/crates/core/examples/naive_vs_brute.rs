//! The two exact linearized backends agree to rounding: per-voxel VJPs
//! (naive) and pushing every k-space basis vector forward (brute force).
//!
//! cargo run --release --example naive_vs_brute

use varmap::estimators::{brute_force_diag, naive_variance};
use varmap::experiment::{build_pipeline, ExperimentConfig};
use varmap::metrics::compare_maps;
use varmap::Result;

fn main() -> Result<()> {
    for kind in ["identity", "unrolled-dc", "single-pass-denoiser"] {
        let mut cfg = ExperimentConfig::default();
        cfg.phantom.rows = 12;
        cfg.phantom.cols = 12;
        cfg.coils.count = 2;
        cfg.mask.scheme = "uniform-random-2d".into();
        cfg.mask.acceleration = 2.0;
        cfg.model.kind = kind.into();
        let plan = build_pipeline(&cfg, 0)?.plan()?;
        let naive = naive_variance(&plan)?;
        let brute = brute_force_diag(&plan)?;
        let max_rel = naive
            .values()
            .iter()
            .zip(brute.values())
            .map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        let r = compare_maps(&naive, &brute)?;
        println!(
            "{kind:<22} max rel. diff {max_rel:.2e}  NRMSE {:.2e}%  naive {}s  brute {}s",
            r.nrmse,
            naive.meta().get("wall_time_s").unwrap_or("?"),
            brute.meta().get("wall_time_s").unwrap_or("?")
        );
    }
    Ok(())
}
