//! Error against the exact linearized map as the sketch size S and the
//! Monte-Carlo trial count N grow.
//!
//! cargo run --release --example convergence

use varmap::estimators::{mc_variance, naive_variance, sketch_variance};
use varmap::experiment::{build_pipeline, ExperimentConfig};
use varmap::metrics::convergence_table;
use varmap::Result;

fn main() -> Result<()> {
    let pipeline = build_pipeline(&ExperimentConfig::default(), 0)?;
    let plan = pipeline.plan()?;
    let reference = naive_variance(&plan)?;

    let sketches = [100, 400, 700, 1000, 1900]
        .into_iter()
        .map(|s| {
            let p = plan.clone().with_sketch(s, plan.distribution(), plan.seed())?;
            Ok((s, sketch_variance(&p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    print!("{}", convergence_table("S", &reference, &sketches)?.to_text());

    let base = pipeline.mc_options();
    let trials = [100, 300, 1000, 3000]
        .into_iter()
        .map(|n| {
            let opts = varmap::estimators::McOptions { trials: n, ..base };
            Ok((n, mc_variance(&plan, &opts)?))
        })
        .collect::<Result<Vec<_>>>()?;
    print!("\n{}", convergence_table("N", &reference, &trials)?.to_text());
    Ok(())
}
