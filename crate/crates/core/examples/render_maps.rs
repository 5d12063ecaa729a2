//! Save variance maps and a signed difference map, then render them to
//! PNG (the difference amplified 10× on the reference map's scale).
//!
//! cargo run --release --example render_maps [-- OUT_DIR]

use std::path::PathBuf;

use varmap::experiment::render::{render_file, Colormap, RenderOptions};
use varmap::experiment::{build_pipeline, EstimatorKind, ExperimentConfig, DIFF_AMPLIFY};
use varmap::metrics::difference_map;
use varmap::numerics::io;
use varmap::Result;

fn main() -> Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "render_out".into()));
    std::fs::create_dir_all(&dir).map_err(|e| varmap::Error::Io { path: dir.clone(), source: e })?;
    let mut cfg = ExperimentConfig::default();
    cfg.estimators.trials = 1000;
    let pipeline = build_pipeline(&cfg, 0)?;
    let plan = pipeline.plan()?;
    let sketch = pipeline.estimate(&plan, EstimatorKind::Sketch)?;
    let naive = pipeline.estimate(&plan, EstimatorKind::Naive)?;
    sketch.save(&dir.join("sketch"))?;
    naive.save(&dir.join("naive"))?;
    io::write_real(&dir.join("diff"), &naive.shape(), &difference_map(&sketch, &naive)?)?;

    let peak = naive.values().iter().fold(0.0_f64, |a, v| a.max(*v));
    let gray = RenderOptions {
        scale: Some(peak),
        ..Default::default()
    };
    render_file(&dir.join("sketch"), &dir.join("sketch.png"), &gray)?;
    render_file(&dir.join("naive"), &dir.join("naive.png"), &gray)?;
    let diverging = RenderOptions {
        colormap: Colormap::Diverging,
        amplify: DIFF_AMPLIFY,
        scale: Some(peak),
        ..Default::default()
    };
    render_file(&dir.join("diff"), &dir.join("diff_x10.png"), &diverging)?;
    println!("wrote sketch.png, naive.png and diff_x10.png to {}", dir.display());
    Ok(())
}
