use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use varmap::experiment::render::{render_file, Colormap, RenderOptions};
use varmap::experiment::{run_benchmark, run_experiment, run_sweep, with_threads, write_benchmark, ExperimentConfig};
use varmap::Result;

/// Voxel-wise noise-variance maps for differentiable reconstructions.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured estimators and write maps, reports and difference maps.
    Run(Common),
    /// Time each estimator (over the sweep values, if any).
    Bench {
        #[command(flatten)]
        common: Common,
        /// Repeats per estimator; overrides `bench.repeats`.
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Rerun the experiment once per value of the `[sweep]` table.
    Sweep(Common),
    /// Render a stored real map to PNG.
    Render {
        /// Array stem (without `.hdr`/`.bin`).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        amplify: f64,
        /// Value mapped to full intensity (default: largest magnitude).
        #[arg(long)]
        scale: Option<f64>,
        /// `gray` or `diverging`.
        #[arg(long, default_value = "gray")]
        colormap: String,
        #[arg(long, default_value_t = 8)]
        zoom: u32,
    },
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults describe the reference protocol.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.out = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        cfg.settings()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.load()?;
            let summary = with_threads(cfg.threads, || run_experiment(&cfg))??;
            print!("{}", summary.summary_text());
            println!("wrote {}", cfg.out.display());
        }
        Command::Sweep(common) => {
            let cfg = common.load()?;
            let summary = with_threads(cfg.threads, || run_sweep(&cfg))??;
            if let Some(first) = summary.runs.first() {
                for a in &first.aggregate {
                    println!("{}_vs_{}", a.estimate, a.reference);
                    print!("{}", summary.table(a.estimate, a.reference).to_text());
                }
            }
            println!("wrote {}", cfg.out.display());
        }
        Command::Bench { common, repeats } => {
            let mut cfg = common.load()?;
            if let Some(r) = repeats {
                cfg.bench.repeats = r;
            }
            cfg.settings()?;
            let table = with_threads(cfg.threads, || run_benchmark(&cfg))??;
            print!("{}", table.to_text());
            write_benchmark(&table, &cfg.out)?;
            println!("wrote {}", cfg.out.display());
        }
        Command::Render {
            input,
            output,
            amplify,
            scale,
            colormap,
            zoom,
        } => {
            let opts = RenderOptions {
                colormap: colormap.parse::<Colormap>()?,
                amplify,
                scale,
                zoom,
            };
            render_file(&input, &output, &opts)?;
            println!("wrote {}", output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
