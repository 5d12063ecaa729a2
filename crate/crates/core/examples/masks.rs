//! The four undersampling schemes: achieved acceleration and layout.
//!
//! cargo run --release --example masks [-- OUT_DIR]   (writes PNGs if given)

use varmap::experiment::render::{render_png, RenderOptions};
use varmap::operator::{make_mask, MaskSpec, Scheme};
use varmap::Result;

fn main() -> Result<()> {
    let out = std::env::args().nth(1).map(std::path::PathBuf::from);
    let size = 32;
    for scheme in Scheme::ALL {
        for r in [4.0, 8.0, 16.0] {
            let mask = make_mask(&MaskSpec::new(scheme, r, size, size, 7))?;
            println!(
                "{:<18} R={:>4}: kept {:>4}, achieved R={:.2}{}",
                scheme.name(),
                r,
                mask.n_kept(),
                mask.achieved_acceleration(),
                mask.radius().map(|d| format!(", radius {d:.2}")).unwrap_or_default()
            );
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir).map_err(|e| varmap::Error::Io { path: dir.clone(), source: e })?;
                let values: Vec<f64> = mask.kept().iter().map(|&k| if k { 1.0 } else { 0.0 }).collect();
                render_png(&values, size, size, &RenderOptions::default(), &dir.join(format!("{scheme}_R{r}.png")))?;
            }
        }
    }
    let mask = make_mask(&MaskSpec::new(Scheme::PoissonDisc2d, 8.0, size, size, 7))?;
    println!("\npoisson-disc-2d, R = 8 (# kept, . skipped):");
    for r in 0..size {
        let line: String = (0..size).map(|c| if mask.kept()[r * size + c] { '#' } else { '.' }).collect();
        println!("  {line}");
    }
    Ok(())
}
