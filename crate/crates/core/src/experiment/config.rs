//! Experiment configuration: a TOML file with nested tables.
//!
//! Every field has a default, so an empty file describes the reference
//! protocol (32×32 smooth-random phantom, 4 coils, Poisson-disc `R = 8`,
//! estimated coil covariance, unrolled model with `K = 4`, sketch vs.
//! Monte-Carlo). Seeds left unset are derived from the master seed and the
//! slice index; [`ExperimentConfig::pinned`] writes them all out so a single
//! slice can be rerun from its manifest alone.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{McNoiseMode, BRUTE_FORCE_LIMIT, DEFAULT_CHUNK};
use crate::operator::{MaskSpec, Scheme};
use crate::phantom::{PhantomKind, MIN_SIDE};
use crate::probes::ProbeDistribution;
use crate::recon::{Activation, DataConsistency, ModelKind, NetArch};
use crate::rng::CounterRng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Master seed; every unset component seed derives from it.
    pub seed: u64,
    pub out: PathBuf,
    /// Number of seeded phantom instances to aggregate over.
    pub slices: usize,
    /// Index of the first slice (pinned manifests set this).
    pub first_slice: usize,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
    /// Write PNG renderings next to the stored maps.
    pub render: bool,
    pub phantom: PhantomConfig,
    pub mask: MaskConfig,
    pub coils: CoilConfig,
    pub noise: NoiseConfig,
    pub model: ModelConfig,
    pub estimators: EstimatorConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    pub bench: BenchConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhantomConfig {
    pub kind: String,
    pub rows: usize,
    pub cols: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaskConfig {
    pub scheme: String,
    pub acceleration: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calib: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoilConfig {
    pub count: usize,
    /// `birdcage` or `unit` (single coil with a constant map).
    pub model: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// `sources` (correlated mixture) or `white` (`std² · I`).
    pub model: String,
    /// Per-coil k-space noise standard deviation of the acquisition.
    pub std: f64,
    pub n_sources: usize,
    /// Estimate the coil covariance from a fully sampled noisy scan instead
    /// of using the true one.
    pub estimate: bool,
    pub corner_fraction: f64,
    /// Scale applied to the covariance used by the estimators.
    pub alpha: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub kind: String,
    pub steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights_seed: Option<u64>,
    /// Load weights from this stem instead of seeding them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    /// `gradient` or `cg`.
    pub dc: String,
    pub cg_lambda: f64,
    pub cg_iters: usize,
    pub layers: usize,
    pub hidden: usize,
    pub kernel: usize,
    pub activation: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    /// Subset of `sketch`, `naive`, `mc`, `brute`.
    pub run: Vec<String>,
    pub sketch_size: usize,
    pub trials: usize,
    pub distribution: String,
    pub mc_mode: String,
    /// Linearization point: `measured` (zero-filled noisy data) or `clean`.
    pub linearization: String,
    pub chunk: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub param: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchConfig {
    pub repeats: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out: PathBuf::from("out"),
            slices: 1,
            first_slice: 0,
            threads: None,
            render: false,
            phantom: PhantomConfig::default(),
            mask: MaskConfig::default(),
            coils: CoilConfig::default(),
            noise: NoiseConfig::default(),
            model: ModelConfig::default(),
            estimators: EstimatorConfig::default(),
            sweep: None,
            bench: BenchConfig::default(),
        }
    }
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            kind: PhantomKind::SmoothRandom.name().into(),
            rows: 32,
            cols: 32,
            seed: None,
        }
    }
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::PoissonDisc2d.name().into(),
            acceleration: 8.0,
            calib: None,
            seed: None,
        }
    }
}

impl Default for CoilConfig {
    fn default() -> Self {
        Self {
            count: 4,
            model: "birdcage".into(),
        }
    }
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            model: "sources".into(),
            std: 0.05,
            n_sources: 6,
            estimate: true,
            corner_fraction: 0.05,
            alpha: 1.0,
            seed: None,
        }
    }
}

impl Default for ModelConfig {
    fn default() -> Self {
        let arch = NetArch::default();
        Self {
            kind: ModelKind::UnrolledDc.name().into(),
            steps: 4,
            weights_seed: None,
            weights: None,
            dc: "gradient".into(),
            cg_lambda: 0.05,
            cg_iters: 8,
            layers: arch.n_layers,
            hidden: arch.hidden,
            kernel: arch.kernel,
            activation: arch.activation.name().into(),
        }
    }
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            run: vec!["sketch".into(), "mc".into()],
            sketch_size: 1000,
            trials: 3000,
            distribution: ProbeDistribution::RandomPhase.name().into(),
            mc_mode: McNoiseMode::FreshOnMeasured.name().into(),
            linearization: "measured".into(),
            chunk: DEFAULT_CHUNK,
            probe_seed: None,
            mc_seed: None,
        }
    }
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { repeats: 3 }
    }
}

/// Variance-map backends selectable from a config.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EstimatorKind {
    Sketch,
    Naive,
    Mc,
    Brute,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [EstimatorKind::Sketch, EstimatorKind::Naive, EstimatorKind::Mc, EstimatorKind::Brute];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Sketch => "sketch",
            EstimatorKind::Naive => "naive",
            EstimatorKind::Mc => "mc",
            EstimatorKind::Brute => "brute",
        }
    }

    /// Higher ranks serve as the reference when two maps are compared.
    pub fn reference_rank(self) -> u8 {
        match self {
            EstimatorKind::Sketch => 0,
            EstimatorKind::Mc => 1,
            EstimatorKind::Naive => 2,
            EstimatorKind::Brute => 3,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("estimators.run", format!("unknown estimator `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoilModel {
    Birdcage,
    Unit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseKind {
    Sources,
    White,
}

/// Parameters a sweep may vary.
pub const SWEEP_PARAMS: [&str; 7] = ["alpha", "sketch_size", "trials", "steps", "acceleration", "coils", "seed"];

/// Typed view of a validated config.
#[derive(Clone, Debug, PartialEq)]
pub struct Settings {
    pub phantom: PhantomKind,
    pub scheme: Scheme,
    pub coil_model: CoilModel,
    pub noise: NoiseKind,
    pub model: ModelKind,
    pub dc: DataConsistency,
    pub arch: NetArch,
    pub estimators: Vec<EstimatorKind>,
    pub distribution: ProbeDistribution,
    pub mc_mode: McNoiseMode,
    pub linearize_clean: bool,
}

fn at<T>(field: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config { reason, .. } => Error::config(field, reason),
        other => Error::config(field, other.to_string()),
    })
}

fn check(ok: bool, field: &str, reason: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, reason))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config("config", e.message().to_string()))?;
        cfg.settings()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Validates every section and returns the parsed enumerations.
    pub fn settings(&self) -> Result<Settings> {
        check(self.slices >= 1, "slices", "need at least one slice")?;
        check(self.threads != Some(0), "threads", "need at least one thread")?;

        let p = &self.phantom;
        let phantom = at("phantom.kind", p.kind.parse())?;
        check(p.rows >= MIN_SIDE && p.cols >= MIN_SIDE, "phantom.rows", "grid must be at least 8×8")?;

        let scheme = at("mask.scheme", self.mask.scheme.parse())?;
        let spec = MaskSpec {
            calib: self.mask.calib,
            ..MaskSpec::new(scheme, self.mask.acceleration, p.rows, p.cols, 0)
        };
        spec.validate()?;

        let coil_model = match self.coils.model.as_str() {
            "birdcage" => CoilModel::Birdcage,
            "unit" => CoilModel::Unit,
            other => return Err(Error::config("coils.model", format!("unknown coil model `{other}`"))),
        };
        check(self.coils.count >= 1, "coils.count", "need at least one coil")?;
        check(
            coil_model == CoilModel::Birdcage || self.coils.count == 1,
            "coils.count",
            "the unit coil model has exactly one coil",
        )?;

        let n = &self.noise;
        let noise = match n.model.as_str() {
            "sources" => NoiseKind::Sources,
            "white" => NoiseKind::White,
            other => return Err(Error::config("noise.model", format!("unknown noise model `{other}`"))),
        };
        check(n.std.is_finite() && n.std > 0.0, "noise.std", "must be positive")?;
        check(n.n_sources >= 1, "noise.n_sources", "need at least one source")?;
        check(n.alpha.is_finite() && n.alpha > 0.0, "noise.alpha", "must be positive")?;
        check(
            n.corner_fraction > 0.0 && n.corner_fraction < 1.0,
            "noise.corner_fraction",
            "must lie in (0, 1)",
        )?;
        if n.estimate {
            let samples = (n.corner_fraction * (p.rows * p.cols) as f64).round() as usize;
            check(
                samples >= 2 * self.coils.count,
                "noise.corner_fraction",
                "selects fewer than 2 samples per coil",
            )?;
        }

        let m = &self.model;
        let model = at("model.kind", m.kind.parse())?;
        let activation: Activation = at("model.activation", m.activation.parse())?;
        let arch = NetArch {
            n_layers: m.layers,
            hidden: m.hidden,
            kernel: m.kernel,
            activation,
        };
        arch.validate()?;
        check(model != ModelKind::UnrolledDc || m.steps >= 1, "model.steps", "need at least one step")?;
        let dc = match m.dc.as_str() {
            "gradient" => DataConsistency::Gradient,
            "cg" => {
                check(m.cg_lambda.is_finite() && m.cg_lambda > 0.0, "model.cg_lambda", "must be positive")?;
                check(m.cg_iters >= 1, "model.cg_iters", "need at least one iteration")?;
                DataConsistency::Cg {
                    lambda: m.cg_lambda,
                    iters: m.cg_iters,
                }
            }
            other => return Err(Error::config("model.dc", format!("unknown data-consistency `{other}`"))),
        };

        let e = &self.estimators;
        check(!e.run.is_empty(), "estimators.run", "select at least one estimator")?;
        let mut estimators = e
            .run
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<EstimatorKind>>>()?;
        estimators.sort();
        estimators.dedup();
        let distribution = at("estimators.distribution", e.distribution.parse())?;
        let mc_mode = at("estimators.mc_mode", e.mc_mode.parse())?;
        let linearize_clean = match e.linearization.as_str() {
            "measured" => false,
            "clean" => true,
            other => return Err(Error::config("estimators.linearization", format!("unknown point `{other}`"))),
        };
        check(e.chunk >= 1, "estimators.chunk", "must be at least 1")?;
        if estimators.contains(&EstimatorKind::Sketch) {
            check(e.sketch_size >= 1, "estimators.sketch_size", "must be at least 1")?;
        }
        if estimators.contains(&EstimatorKind::Mc) {
            check(e.trials >= 2, "estimators.trials", "Monte-Carlo needs at least 2 trials")?;
        }
        if estimators.contains(&EstimatorKind::Brute) && p.rows * p.cols > BRUTE_FORCE_LIMIT {
            return Err(Error::SizeLimit {
                n: p.rows * p.cols,
                limit: BRUTE_FORCE_LIMIT,
            });
        }

        if let Some(sw) = &self.sweep {
            check(SWEEP_PARAMS.contains(&sw.param.as_str()), "sweep.param", "not a sweepable parameter")?;
            check(!sw.values.is_empty(), "sweep.values", "need at least one value")?;
            for &v in &sw.values {
                at("sweep.values", self.with_param(&sw.param, v).and_then(|c| c.settings().map(|_| ())))?;
            }
        }
        check(self.bench.repeats >= 1, "bench.repeats", "need at least one repeat")?;

        Ok(Settings {
            phantom,
            scheme,
            coil_model,
            noise,
            model,
            dc,
            arch,
            estimators,
            distribution,
            mc_mode,
            linearize_clean,
        })
    }

    /// Copy with one sweepable parameter replaced.
    pub fn with_param(&self, param: &str, value: f64) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.sweep = None;
        let count = |v: f64| -> Result<usize> {
            if v.fract() == 0.0 && v >= 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::config(format!("sweep.{param}"), format!("{v} is not a count")))
            }
        };
        match param {
            "alpha" => cfg.noise.alpha = value,
            "sketch_size" => cfg.estimators.sketch_size = count(value)?,
            "trials" => cfg.estimators.trials = count(value)?,
            "steps" => cfg.model.steps = count(value)?,
            "acceleration" => cfg.mask.acceleration = value,
            "coils" => cfg.coils.count = count(value)?,
            "seed" => cfg.seed = count(value)? as u64,
            other => return Err(Error::config("sweep.param", format!("cannot sweep `{other}`"))),
        }
        Ok(cfg)
    }

    pub fn slice_indices(&self) -> std::ops::Range<usize> {
        self.first_slice..self.first_slice + self.slices
    }

    /// Seed of component `tag` for `slice`, unless pinned explicitly.
    pub fn derived_seed(&self, tag: SeedTag, slice: usize) -> u64 {
        let pinned = match tag {
            SeedTag::Phantom => self.phantom.seed,
            SeedTag::Mask => self.mask.seed,
            SeedTag::Noise => self.noise.seed,
            SeedTag::Probes => self.estimators.probe_seed,
            SeedTag::MonteCarlo => self.estimators.mc_seed,
            SeedTag::Weights => self.model.weights_seed,
        };
        pinned.unwrap_or_else(|| {
            // Weights are shared by every slice, like a trained network.
            let index = if tag == SeedTag::Weights { 0 } else { slice as u64 };
            CounterRng::new(self.seed).derive(tag as u64).derive(index).key()
        })
    }

    /// Single-slice config with every seed written out.
    pub fn pinned(&self, slice: usize) -> Self {
        let mut cfg = self.clone();
        cfg.slices = 1;
        cfg.first_slice = slice;
        cfg.sweep = None;
        cfg.phantom.seed = Some(self.derived_seed(SeedTag::Phantom, slice));
        cfg.mask.seed = Some(self.derived_seed(SeedTag::Mask, slice));
        cfg.noise.seed = Some(self.derived_seed(SeedTag::Noise, slice));
        cfg.estimators.probe_seed = Some(self.derived_seed(SeedTag::Probes, slice));
        cfg.estimators.mc_seed = Some(self.derived_seed(SeedTag::MonteCarlo, slice));
        if cfg.model.weights.is_none() {
            cfg.model.weights_seed = Some(self.derived_seed(SeedTag::Weights, slice));
        }
        cfg
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedTag {
    Phantom = 1,
    Mask = 2,
    Noise = 3,
    Probes = 4,
    MonteCarlo = 5,
    Weights = 6,
}
