//! Wall time of each estimator on the reference pipeline, and of the
//! sketch as the unrolled depth K grows.
//!
//! cargo run --release --example benchmark

use varmap::experiment::{run_benchmark, ExperimentConfig, SweepConfig};
use varmap::Result;

fn main() -> Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.estimators.run = vec!["sketch".into(), "naive".into(), "mc".into()];
    cfg.bench.repeats = 3;
    print!("{}", run_benchmark(&cfg)?.to_text());

    cfg.estimators.run = vec!["sketch".into()];
    cfg.sweep = Some(SweepConfig {
        param: "steps".into(),
        values: vec![2.0, 4.0, 6.0, 8.0, 10.0],
    });
    print!("\n{}", run_benchmark(&cfg)?.to_text());
    Ok(())
}
