//! Config-driven experiments: build a synthetic acquisition, run the
//! selected variance estimators, compare them, and store every artifact.
//!
//! Output layout of [`run_experiment`] under `out/`:
//!
//! ```text
//! config.toml                  resolved top-level config
//! summary.txt, summary.csv     mean ± std of each comparison over slices
//! timing.csv                   wall time per slice and estimator
//! sliceNNN/manifest.toml       single-slice config with all seeds pinned
//! sliceNNN/phantom.*           ground-truth image
//! sliceNNN/mask.*              sampling mask
//! sliceNNN/coil_cov.*          coil covariance handed to the estimators
//! sliceNNN/maps/<est>.*        variance maps (+ `.se` for Monte-Carlo)
//! sliceNNN/diff/<a>_vs_<b>.*   signed difference maps `a − b`
//! sliceNNN/reports.txt/.csv    pairwise comparisons
//! sliceNNN/png/*.png           renderings when `render = true`
//! ```
//!
//! Files are written to a sibling staging directory and moved into place
//! only after everything succeeded.

mod config;
pub mod render;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;

pub use config::{
    BenchConfig, CoilConfig, CoilModel, EstimatorConfig, EstimatorKind, ExperimentConfig, MaskConfig, ModelConfig,
    NoiseConfig, NoiseKind, PhantomConfig, SeedTag, Settings, SweepConfig, SWEEP_PARAMS,
};

use crate::error::{Error, Result};
use crate::estimators::{
    brute_force_diag, mc_variance, naive_variance, sketch_variance, McOptions, SketchPlan, VarianceMap,
};
use crate::metrics::{aligned, compare_maps_lenient, difference_map, mean_std, ComparisonReport};
use crate::noise::{build_coil_covariance, estimate_coil_covariance, CoilCovariance, NoiseSourceModel, SampleCovariance};
use crate::numerics::io::{self, Sidecar};
use crate::numerics::{ComplexArray, HermitianMatrix};
use crate::operator::{make_birdcage_maps, make_mask, ImagingOperator, MaskSpec, SamplingMask, SensitivityMaps};
use crate::phantom::{make_phantom, Phantom};
use crate::recon::{ModelKind, ReconModel};
use crate::rng::CounterRng;
use render::{render_png, Colormap, RenderOptions};

/// Amplification applied to rendered difference maps.
pub const DIFF_AMPLIFY: f64 = 10.0;

const ACQUISITION_TAG: u64 = 0x6163_71;

/// Runs `f` on a dedicated pool of `threads` workers (all cores if `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::config("threads", e.to_string()))?;
    Ok(pool.install(f))
}

/// One synthetic acquisition and the model that reconstructs it.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub slice: usize,
    /// Single-slice config with all seeds pinned.
    pub config: ExperimentConfig,
    pub settings: Settings,
    pub phantom: Phantom,
    pub op: Arc<ImagingOperator>,
    pub model: ReconModel,
    /// Covariance of the simulated acquisition noise.
    pub acquisition: SampleCovariance,
    /// Covariance handed to the estimators (estimated or true, times `α`).
    pub cov: SampleCovariance,
    pub clean: ComplexArray,
    pub measured: ComplexArray,
}

pub fn build_pipeline(cfg: &ExperimentConfig, slice: usize) -> Result<Pipeline> {
    let config = cfg.pinned(slice);
    let settings = config.settings()?;
    let (rows, cols) = (config.phantom.rows, config.phantom.cols);
    let seed_of = |tag| config.derived_seed(tag, slice);

    let phantom = make_phantom(settings.phantom, rows, cols, seed_of(SeedTag::Phantom))?;
    let spec = MaskSpec {
        calib: config.mask.calib,
        ..MaskSpec::new(settings.scheme, config.mask.acceleration, rows, cols, seed_of(SeedTag::Mask))
    };
    let mask = make_mask(&spec)?;
    let nc = config.coils.count;
    let maps = match settings.coil_model {
        CoilModel::Birdcage => make_birdcage_maps(nc, rows, cols)?,
        CoilModel::Unit => SensitivityMaps::unit(rows, cols),
    };
    let op = Arc::new(ImagingOperator::new(maps.clone(), mask)?);

    let noise = &config.noise;
    let noise_seed = seed_of(SeedTag::Noise);
    let variance = noise.std * noise.std;
    let true_coil = match settings.noise {
        NoiseKind::Sources => build_coil_covariance(&NoiseSourceModel::random(nc, noise.n_sources, variance, noise_seed)?)?,
        NoiseKind::White => CoilCovariance::from_matrix(HermitianMatrix::from_real_diagonal(&vec![variance; nc]))?,
    };
    let acquisition = SampleCovariance::new(true_coil, rows, cols);
    let rng = CounterRng::new(noise_seed).derive(ACQUISITION_TAG);
    let one = Complex64::new(1.0, 0.0);

    let clean = op.forward(&phantom.image)?;
    let mut measured = acquisition.sample_noise_with(&rng, 0);
    op.mask().apply(measured.data_mut());
    measured.axpy(one, &clean)?;

    let coil = if noise.estimate {
        // A separate fully sampled noisy scan, as a prescan would provide.
        let full = ImagingOperator::new(maps, SamplingMask::full(rows, cols))?;
        let mut scan = acquisition.sample_noise_with(&rng, 1);
        scan.axpy(one, &full.forward(&phantom.image)?)?;
        estimate_coil_covariance(&scan, noise.corner_fraction)?
    } else {
        acquisition.coil().clone()
    };
    let cov = SampleCovariance::new(coil.with_scale(noise.alpha)?, rows, cols);

    let model = match &config.model.weights {
        Some(stem) => ReconModel::load_weights(op.clone(), stem)?,
        None => {
            let wseed = seed_of(SeedTag::Weights);
            match settings.model {
                ModelKind::Identity => ReconModel::identity(op.clone()),
                ModelKind::UnrolledDc => ReconModel::unrolled(op.clone(), config.model.steps, &settings.arch, wseed)?,
                ModelKind::SinglePassDenoiser => ReconModel::denoiser(op.clone(), &settings.arch, wseed)?,
            }
            .with_dc(settings.dc)?
        }
    };

    Ok(Pipeline {
        slice,
        config,
        settings,
        phantom,
        op,
        model,
        acquisition,
        cov,
        clean,
        measured,
    })
}

impl Pipeline {
    pub fn plan(&self) -> Result<SketchPlan> {
        let e = &self.config.estimators;
        let plan = SketchPlan::new(self.model.clone(), self.cov.clone(), self.measured.clone())?
            .with_clean(self.clean.clone())?
            .with_sketch(e.sketch_size, self.settings.distribution, self.config.derived_seed(SeedTag::Probes, self.slice))?
            .with_chunk(e.chunk)?;
        if self.settings.linearize_clean {
            plan.linearize_at_clean()
        } else {
            Ok(plan)
        }
    }

    pub fn mc_options(&self) -> McOptions {
        McOptions {
            mode: self.settings.mc_mode,
            chunk: self.config.estimators.chunk,
            ..McOptions::new(
                self.config.estimators.trials,
                self.config.derived_seed(SeedTag::MonteCarlo, self.slice),
            )
        }
    }

    pub fn estimate(&self, plan: &SketchPlan, kind: EstimatorKind) -> Result<VarianceMap> {
        let mut map = match kind {
            EstimatorKind::Sketch => sketch_variance(plan)?,
            EstimatorKind::Naive => naive_variance(plan)?,
            EstimatorKind::Brute => brute_force_diag(plan)?,
            EstimatorKind::Mc => mc_variance(plan, &self.mc_options())?,
        };
        map.meta_mut()
            .set("slice", self.slice)
            .set("master_seed", self.config.seed)
            .set("phantom", self.phantom.kind)
            .set("phantom_seed", self.phantom.seed)
            .set("linearization", &self.config.estimators.linearization)
            .set("manifest", "manifest.toml");
        Ok(map)
    }
}

/// Comparison of `estimate` against `reference`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairReport {
    pub estimate: EstimatorKind,
    pub reference: EstimatorKind,
    pub report: ComparisonReport,
    /// Signed `estimate − reference`.
    pub diff: Vec<f64>,
}

impl PairReport {
    pub fn label(&self) -> String {
        format!("{}_vs_{}", self.estimate, self.reference)
    }
}

#[derive(Clone, Debug)]
pub struct SliceResult {
    pub slice: usize,
    pub maps: Vec<(EstimatorKind, VarianceMap)>,
    pub pairs: Vec<PairReport>,
}

impl SliceResult {
    pub fn map(&self, kind: EstimatorKind) -> Option<&VarianceMap> {
        self.maps.iter().find(|(k, _)| *k == kind).map(|(_, m)| m)
    }

    pub fn pair(&self, estimate: EstimatorKind, reference: EstimatorKind) -> Option<&PairReport> {
        self.pairs
            .iter()
            .find(|p| p.estimate == estimate && p.reference == reference)
    }
}

/// Every unordered pair of maps, with the higher-ranked estimator as reference.
pub fn compare_all(maps: &[(EstimatorKind, VarianceMap)]) -> Result<Vec<PairReport>> {
    let mut pairs = Vec::new();
    for (i, (ka, a)) in maps.iter().enumerate() {
        for (kb, b) in &maps[i + 1..] {
            let ((est, em), (rf, rm)) = if ka.reference_rank() < kb.reference_rank() {
                ((*ka, a), (*kb, b))
            } else {
                ((*kb, b), (*ka, a))
            };
            pairs.push(PairReport {
                estimate: est,
                reference: rf,
                report: compare_maps_lenient(em, rm)?,
                diff: difference_map(em, rm)?,
            });
        }
    }
    Ok(pairs)
}

/// Builds one slice's pipeline and runs every configured estimator.
pub fn compute_slice(cfg: &ExperimentConfig, slice: usize) -> Result<(Pipeline, SliceResult)> {
    let pipeline = build_pipeline(cfg, slice)?;
    let plan = pipeline.plan()?;
    let maps = pipeline
        .settings
        .estimators
        .iter()
        .map(|&k| Ok((k, pipeline.estimate(&plan, k)?)))
        .collect::<Result<Vec<_>>>()?;
    let pairs = compare_all(&maps)?;
    Ok((pipeline, SliceResult { slice, maps, pairs }))
}

/// Mean and standard deviation of one comparison over slices.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub estimate: EstimatorKind,
    pub reference: EstimatorKind,
    pub pcc: (f64, f64),
    pub nrmse: (f64, f64),
    pub r_squared: (f64, f64),
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub slices: Vec<SliceResult>,
    pub aggregate: Vec<AggregateRow>,
}

impl RunSummary {
    pub fn aggregate_for(&self, estimate: EstimatorKind, reference: EstimatorKind) -> Option<&AggregateRow> {
        self.aggregate
            .iter()
            .find(|r| r.estimate == estimate && r.reference == reference)
    }

    pub fn summary_text(&self) -> String {
        let header = ["comparison", "pcc_percent", "nrmse_percent", "r_squared"];
        let pm = |(m, s): (f64, f64), digits: usize| format!("{m:.digits$} ± {s:.digits$}");
        let rows: Vec<Vec<String>> = self
            .aggregate
            .iter()
            .map(|r| {
                vec![
                    format!("{}_vs_{}", r.estimate, r.reference),
                    pm(r.pcc, 3),
                    pm(r.nrmse, 3),
                    pm(r.r_squared, 5),
                ]
            })
            .collect();
        format!(
            "mean ± std over {} seeded phantom instance(s)\n{}",
            self.slices.len(),
            aligned(&header, &rows)
        )
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("comparison,slices,pcc_mean,pcc_std,nrmse_mean,nrmse_std,r_squared_mean,r_squared_std\n");
        for r in &self.aggregate {
            out.push_str(&format!(
                "{}_vs_{},{},{},{},{},{},{},{}\n",
                r.estimate,
                r.reference,
                self.slices.len(),
                r.pcc.0,
                r.pcc.1,
                r.nrmse.0,
                r.nrmse.1,
                r.r_squared.0,
                r.r_squared.1
            ));
        }
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("slice,estimator,wall_time_s\n");
        for s in &self.slices {
            for (k, m) in &s.maps {
                out.push_str(&format!("{},{},{}\n", s.slice, k, m.meta().get("wall_time_s").unwrap_or("")));
            }
        }
        out
    }
}

fn aggregate(slices: &[SliceResult]) -> Vec<AggregateRow> {
    let Some(first) = slices.first() else {
        return Vec::new();
    };
    first
        .pairs
        .iter()
        .map(|p| {
            let stat = |f: fn(&ComparisonReport) -> f64| {
                let v: Vec<f64> = slices
                    .iter()
                    .filter_map(|s| s.pair(p.estimate, p.reference))
                    .map(|q| f(&q.report))
                    .collect();
                mean_std(&v)
            };
            AggregateRow {
                estimate: p.estimate,
                reference: p.reference,
                pcc: stat(|r| r.pcc),
                nrmse: stat(|r| r.nrmse),
                r_squared: stat(|r| r.r_squared),
            }
        })
        .collect()
}

/// Computes every slice of `cfg` without touching the file system.
pub fn compute_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.settings()?;
    let slices = cfg
        .slice_indices()
        .map(|s| compute_slice(cfg, s).map(|(_, r)| r))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&slices);
    Ok(RunSummary { slices, aggregate })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_slice(dir: &Path, pipeline: &Pipeline, result: &SliceResult, render: bool) -> Result<()> {
    for sub in ["maps", "diff"] {
        create_dir(&dir.join(sub))?;
    }
    write_text(&dir.join("manifest.toml"), &pipeline.config.to_toml())?;

    let (rows, cols) = (pipeline.phantom.rows(), pipeline.phantom.cols());
    let phantom_stem = dir.join("phantom");
    io::write_complex(&phantom_stem, &pipeline.phantom.image)?;
    let mut pm = Sidecar::new();
    pm.set("kind", pipeline.phantom.kind).set("seed", pipeline.phantom.seed);
    pm.write(&phantom_stem)?;

    let mask = pipeline.op.mask();
    let mask_stem = dir.join("mask");
    io::write_bool(&mask_stem, &[rows, cols], mask.kept())?;
    mask.sidecar().write(&mask_stem)?;

    let cov_stem = dir.join("coil_cov");
    io::write_complex(&cov_stem, pipeline.cov.coil().matrix().entries())?;
    pipeline.cov.coil().sidecar().write(&cov_stem)?;

    for (k, map) in &result.maps {
        map.save(&dir.join("maps").join(k.name()))?;
    }
    let mut reports = Vec::new();
    for p in &result.pairs {
        let stem = dir.join("diff").join(p.label());
        io::write_real(&stem, &[rows, cols], &p.diff)?;
        let mut meta = Sidecar::new();
        meta.set("estimate", p.estimate)
            .set("reference", p.reference)
            .set("kind", "signed difference estimate - reference")
            .set("render_amplify", DIFF_AMPLIFY);
        meta.write(&stem)?;
        reports.push((p.label(), p.report.clone()));
    }
    write_text(&dir.join("reports.txt"), &crate::metrics::reports_to_text(&reports))?;
    write_text(&dir.join("reports.csv"), &crate::metrics::reports_to_csv(&reports))?;

    if render {
        let png = dir.join("png");
        create_dir(&png)?;
        let peak = |m: &VarianceMap| m.values().iter().fold(0.0_f64, |a, v| a.max(*v));
        for (k, map) in &result.maps {
            render_png(map.values(), rows, cols, &RenderOptions::default(), &png.join(format!("{k}.png")))?;
        }
        for p in &result.pairs {
            let reference = result.map(p.reference).expect("compared maps are present");
            let opts = RenderOptions {
                colormap: Colormap::Diverging,
                amplify: DIFF_AMPLIFY,
                scale: Some(peak(reference).max(f64::MIN_POSITIVE)),
                ..Default::default()
            };
            render_png(&p.diff, rows, cols, &opts, &png.join(format!("diff_{}_x10.png", p.label())))?;
        }
    }
    Ok(())
}

fn write_run(cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary> {
    create_dir(dir)?;
    write_text(&dir.join("config.toml"), &cfg.to_toml())?;
    let mut slices = Vec::new();
    for s in cfg.slice_indices() {
        let (pipeline, result) = compute_slice(cfg, s)?;
        write_slice(&dir.join(format!("slice{s:03}")), &pipeline, &result, cfg.render)?;
        slices.push(result);
    }
    let summary = RunSummary {
        aggregate: aggregate(&slices),
        slices,
    };
    write_text(&dir.join("summary.txt"), &summary.summary_text())?;
    write_text(&dir.join("summary.csv"), &summary.summary_csv())?;
    write_text(&dir.join("timing.csv"), &summary.timing_csv())?;
    Ok(summary)
}

/// Sibling directory that receives outputs until they are complete.
struct Staging {
    path: PathBuf,
    target: PathBuf,
    committed: bool,
}

impl Staging {
    fn new(target: &Path) -> Result<Self> {
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let path = target.with_file_name(format!(".{name}.partial-{}", std::process::id()));
        if path.exists() {
            fs::remove_dir_all(&path).map_err(|e| Error::io(&path, e))?;
        }
        create_dir(&path)?;
        Ok(Self {
            path,
            target: target.to_path_buf(),
            committed: false,
        })
    }

    /// Moves every staged entry into the target, replacing same-named ones.
    fn commit(mut self) -> Result<()> {
        create_dir(&self.target)?;
        let entries = fs::read_dir(&self.path).map_err(|e| Error::io(&self.path, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| Error::io(&self.path, e))?;
            let dest = self.target.join(entry.file_name());
            if dest.is_dir() {
                fs::remove_dir_all(&dest).map_err(|e| Error::io(&dest, e))?;
            } else if dest.exists() {
                fs::remove_file(&dest).map_err(|e| Error::io(&dest, e))?;
            }
            fs::rename(entry.path(), &dest).map_err(|e| Error::io(&dest, e))?;
        }
        self.committed = true;
        fs::remove_dir_all(&self.path).map_err(|e| Error::io(&self.path, e))
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.path);
        }
    }
}

fn staged<T>(out: &Path, f: impl FnOnce(&Path) -> Result<T>) -> Result<T> {
    let staging = Staging::new(out)?;
    let value = f(&staging.path)?;
    staging.commit()?;
    Ok(value)
}

/// Runs every slice and writes all artifacts under `cfg.out`. On failure
/// nothing is left behind.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.settings()?;
    staged(&cfg.out, |dir| write_run(cfg, dir))
}

/// Results of a one-parameter sweep.
#[derive(Clone, Debug)]
pub struct SweepSummary {
    pub param: String,
    pub values: Vec<f64>,
    pub runs: Vec<RunSummary>,
}

impl SweepSummary {
    /// NRMSE and PCC of `estimate` vs. `reference` (slice means) per value.
    pub fn table(&self, estimate: EstimatorKind, reference: EstimatorKind) -> crate::metrics::ConvergenceTable {
        crate::metrics::ConvergenceTable {
            param_name: self.param.clone(),
            rows: self
                .values
                .iter()
                .zip(&self.runs)
                .filter_map(|(v, run)| {
                    run.aggregate_for(estimate, reference)
                        .map(|a| crate::metrics::ConvergenceRow {
                            param: format_value(*v),
                            nrmse: a.nrmse.0,
                            pcc: a.pcc.0,
                        })
                })
                .collect(),
        }
    }

    fn pairs(&self) -> Vec<(EstimatorKind, EstimatorKind)> {
        self.runs
            .first()
            .map(|r| r.aggregate.iter().map(|a| (a.estimate, a.reference)).collect())
            .unwrap_or_default()
    }
}

fn format_value(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Runs the config once per sweep value under `out/<param>=<value>/` and
/// writes one convergence table per compared pair.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepSummary> {
    cfg.settings()?;
    let sweep = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::config("sweep", "the config has no [sweep] table"))?;
    staged(&cfg.out, |dir| {
        write_text(&dir.join("config.toml"), &cfg.to_toml())?;
        let mut runs = Vec::new();
        for &v in &sweep.values {
            let sub = cfg.with_param(&sweep.param, v)?;
            runs.push(write_run(&sub, &dir.join(format!("{}={}", sweep.param, format_value(v))))?);
        }
        let summary = SweepSummary {
            param: sweep.param.clone(),
            values: sweep.values.clone(),
            runs,
        };
        for (est, rf) in summary.pairs() {
            let table = summary.table(est, rf);
            let stem = format!("sweep_{est}_vs_{rf}");
            write_text(&dir.join(format!("{stem}.txt")), &table.to_text())?;
            write_text(&dir.join(format!("{stem}.csv")), &table.to_csv())?;
        }
        Ok(summary)
    })
}

/// Median wall time of one estimator in one configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub param: Option<String>,
    pub estimator: EstimatorKind,
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    /// Transient working-set estimate: Monte-Carlo holds `N` images, the
    /// sketch and brute-force backends one chunk of images, naive two images.
    pub memory_bytes: usize,
}

#[derive(Clone, Debug, Default)]
pub struct BenchTable {
    pub param_name: Option<String>,
    pub repeats: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchTable {
    pub fn median(&self, param: Option<&str>, estimator: EstimatorKind) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.param.as_deref() == param && r.estimator == estimator)
            .map(|r| r.median_s)
    }

    fn cells(&self) -> (Vec<&'static str>, Vec<Vec<String>>) {
        let header = vec!["param", "estimator", "median_s", "min_s", "max_s", "memory_bytes"];
        let rows = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.param.clone().unwrap_or_else(|| "-".into()),
                    r.estimator.to_string(),
                    format!("{:.6}", r.median_s),
                    format!("{:.6}", r.min_s),
                    format!("{:.6}", r.max_s),
                    r.memory_bytes.to_string(),
                ]
            })
            .collect();
        (header, rows)
    }

    pub fn to_text(&self) -> String {
        let (header, rows) = self.cells();
        let label = self.param_name.as_deref().unwrap_or("none");
        format!("median over {} repeat(s); swept parameter: {label}\n{}", self.repeats, aligned(&header, &rows))
    }

    pub fn to_csv(&self) -> String {
        let (header, rows) = self.cells();
        let mut out = header.join(",") + "\n";
        for r in rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn memory_estimate(kind: EstimatorKind, pipeline: &Pipeline) -> usize {
    let image = pipeline.op.n() * std::mem::size_of::<Complex64>();
    let e = &pipeline.config.estimators;
    match kind {
        EstimatorKind::Mc => e.trials * image,
        EstimatorKind::Sketch | EstimatorKind::Brute => e.chunk * image,
        EstimatorKind::Naive => 2 * image,
    }
}

/// Times each configured estimator on the first slice, `bench.repeats`
/// times, for every sweep value if a sweep is configured.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<BenchTable> {
    cfg.settings()?;
    let variants: Vec<(Option<String>, ExperimentConfig)> = match &cfg.sweep {
        Some(sw) => sw
            .values
            .iter()
            .map(|&v| Ok((Some(format_value(v)), cfg.with_param(&sw.param, v)?)))
            .collect::<Result<_>>()?,
        None => vec![(None, cfg.clone())],
    };
    let mut table = BenchTable {
        param_name: cfg.sweep.as_ref().map(|s| s.param.clone()),
        repeats: cfg.bench.repeats,
        rows: Vec::new(),
    };
    for (param, variant) in variants {
        let pipeline = build_pipeline(&variant, variant.first_slice)?;
        let plan = pipeline.plan()?;
        for &kind in &pipeline.settings.estimators {
            let times = (0..variant.bench.repeats)
                .map(|_| {
                    let start = Instant::now();
                    pipeline.estimate(&plan, kind)?;
                    Ok(start.elapsed().as_secs_f64())
                })
                .collect::<Result<Vec<f64>>>()?;
            table.rows.push(BenchRow {
                param: param.clone(),
                estimator: kind,
                min_s: times.iter().copied().fold(f64::INFINITY, f64::min),
                max_s: times.iter().copied().fold(0.0, f64::max),
                median_s: median(times),
                memory_bytes: memory_estimate(kind, &pipeline),
            });
        }
    }
    Ok(table)
}

/// Writes `bench.txt` and `bench.csv` under `out`.
pub fn write_benchmark(table: &BenchTable, out: &Path) -> Result<()> {
    staged(out, |dir| {
        write_text(&dir.join("bench.txt"), &table.to_text())?;
        write_text(&dir.join("bench.csv"), &table.to_csv())
    })
}
