//! Run a TOML experiment config end to end and print the summary.
//!
//! cargo run --release --example run_config -- crates/core/configs/minimal.toml [OUT]

use std::path::PathBuf;

use varmap::experiment::{run_experiment, with_threads, ExperimentConfig};
use varmap::Result;

fn main() -> Result<()> {
    let mut args = std::env::args().skip(1);
    let mut cfg = match args.next() {
        Some(path) => ExperimentConfig::load(&PathBuf::from(path))?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = args.next() {
        cfg.out = out.into();
    }
    let summary = with_threads(cfg.threads, || run_experiment(&cfg))??;
    print!("{}", summary.summary_text());
    println!("artifacts in {}", cfg.out.display());
    Ok(())
}
