//! The reference protocol on one slice: sketched variance (S = 1000
//! random-phase probes) against 3000 Monte-Carlo reruns and the exact
//! linearized map.
//!
//! cargo run --release --example sketch_vs_mc [-- SEED]

use varmap::experiment::{build_pipeline, EstimatorKind, ExperimentConfig};
use varmap::metrics::{compare_maps, mean_std, reports_to_text, z_score_map};
use varmap::Result;

fn main() -> Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = ExperimentConfig {
        seed,
        ..Default::default()
    };
    let pipeline = build_pipeline(&cfg, 0)?;
    println!(
        "{}×{} {} phantom, {} coils, {} at R={} (achieved {:.2}), {} K={}",
        pipeline.phantom.rows(),
        pipeline.phantom.cols(),
        pipeline.phantom.kind,
        pipeline.op.n_coils(),
        pipeline.op.mask().spec().scheme,
        pipeline.op.mask().spec().acceleration,
        pipeline.op.mask().achieved_acceleration(),
        pipeline.model.kind(),
        pipeline.model.steps()
    );
    let plan = pipeline.plan()?;
    let sketch = pipeline.estimate(&plan, EstimatorKind::Sketch)?;
    let mc = pipeline.estimate(&plan, EstimatorKind::Mc)?;
    let naive = pipeline.estimate(&plan, EstimatorKind::Naive)?;
    for m in [&sketch, &mc, &naive] {
        println!("{:<7} mean variance {:.4e}  wall time {} s", m.estimator(), m.mean(), m.meta().get("wall_time_s").unwrap_or("?"));
    }
    let reports = vec![
        ("sketch_vs_mc".to_string(), compare_maps(&sketch, &mc)?),
        ("sketch_vs_naive".to_string(), compare_maps(&sketch, &naive)?),
        ("mc_vs_naive".to_string(), compare_maps(&mc, &naive)?),
    ];
    print!("{}", reports_to_text(&reports));
    let (zm, zs) = mean_std(&z_score_map(&sketch, &mc)?);
    println!("z-score of sketch against MC standard error: mean {zm:.3}, std {zs:.3}");
    Ok(())
}
