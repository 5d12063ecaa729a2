//! Variance-map backends.
//!
//! All of them describe the same quantity: the per-voxel variance of
//! `f(Aᴴ(y + n))` with `n ~ CN(0, Σ_k)`. Under linearization at `x_lin`,
//! `δx = J(Aᴴ σ g)` with `g` standard circular normal and `σ` the block
//! factor of `Σ_k`, so `diag Σ_x = diag(L Lᵀ)` for the real-linear map
//! `L = J Aᴴ σ`.
//!
//! * [`sketch_variance`] averages `|L v|²` over random probes `v`.
//! * [`naive_variance`] pulls each voxel back with two VJPs (real and
//!   imaginary parts of the output).
//! * [`brute_force_diag`] pushes every k-space basis vector forward.
//! * [`mc_variance`] reruns the nonlinear pipeline on fresh noise.
//!
//! Work is split into fixed-size chunks whose partial sums are combined by a
//! fixed pairwise tree, so results are bit-identical for any thread count.

use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::noise::SampleCovariance;
use crate::numerics::io::{self, Sidecar};
use crate::numerics::ComplexArray;
use crate::probes::{ProbeDistribution, ProbeSource};
use crate::recon::{Linearized, ReconModel};
use crate::rng::CounterRng;

/// Largest image for which [`brute_force_diag`] is allowed.
pub const BRUTE_FORCE_LIMIT: usize = 1024;

/// Probe columns per work unit.
pub const DEFAULT_CHUNK: usize = 16;

const MC_TAG: u64 = 0x6d63;

/// Everything needed to evaluate a variance map for one pipeline.
#[derive(Clone, Debug)]
pub struct SketchPlan {
    model: ReconModel,
    cov: SampleCovariance,
    linearization: ComplexArray,
    measured: ComplexArray,
    clean: Option<ComplexArray>,
    s: usize,
    seed: u64,
    distribution: ProbeDistribution,
    chunk: usize,
}

impl SketchPlan {
    /// Linearizes at the zero-filled image of `measured`; defaults to
    /// `S = 1000` random-phase probes with seed 0.
    pub fn new(model: ReconModel, cov: SampleCovariance, measured: ComplexArray) -> Result<Self> {
        let op = model.operator();
        measured.ensure_shape(&op.kspace_shape())?;
        if cov.kspace_shape() != op.kspace_shape() {
            return Err(Error::shape(op.kspace_shape(), cov.kspace_shape()));
        }
        let linearization = op.adjoint(&measured)?;
        Ok(Self {
            model,
            cov,
            linearization,
            measured,
            clean: None,
            s: 1000,
            seed: 0,
            distribution: ProbeDistribution::RandomPhase,
            chunk: DEFAULT_CHUNK,
        })
    }

    pub fn with_linearization(mut self, x: ComplexArray) -> Result<Self> {
        x.ensure_shape(&self.model.operator().image_shape())?;
        self.linearization = x;
        Ok(self)
    }

    /// Noise-free data, used to linearize at the true image and to
    /// resimulate Monte-Carlo trials from scratch.
    pub fn with_clean(mut self, clean: ComplexArray) -> Result<Self> {
        clean.ensure_shape(&self.model.operator().kspace_shape())?;
        self.clean = Some(clean);
        Ok(self)
    }

    /// Linearizes at `Aᴴ y₀` instead of the measured zero-filled image.
    pub fn linearize_at_clean(self) -> Result<Self> {
        let clean = self
            .clean
            .as_ref()
            .ok_or_else(|| Error::config("estimators.linearization", "no noise-free data available"))?;
        let x = self.model.operator().adjoint(clean)?;
        self.with_linearization(x)
    }

    pub fn with_sketch(mut self, s: usize, distribution: ProbeDistribution, seed: u64) -> Result<Self> {
        if s == 0 {
            return Err(Error::config("estimators.sketch_size", "must be at least 1"));
        }
        self.s = s;
        self.distribution = distribution;
        self.seed = seed;
        Ok(self)
    }

    /// Probe columns per work unit; changes rounding, never the estimate.
    pub fn with_chunk(mut self, chunk: usize) -> Result<Self> {
        if chunk == 0 {
            return Err(Error::config("estimators.chunk", "must be at least 1"));
        }
        self.chunk = chunk;
        Ok(self)
    }

    pub fn with_covariance(mut self, cov: SampleCovariance) -> Result<Self> {
        if cov.kspace_shape() != self.model.operator().kspace_shape() {
            return Err(Error::shape(self.model.operator().kspace_shape(), cov.kspace_shape()));
        }
        self.cov = cov;
        Ok(self)
    }

    pub fn model(&self) -> &ReconModel {
        &self.model
    }

    pub fn cov(&self) -> &SampleCovariance {
        &self.cov
    }

    pub fn linearization(&self) -> &ComplexArray {
        &self.linearization
    }

    pub fn measured(&self) -> &ComplexArray {
        &self.measured
    }

    pub fn clean(&self) -> Option<&ComplexArray> {
        self.clean.as_ref()
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn distribution(&self) -> ProbeDistribution {
        self.distribution
    }

    pub fn chunk(&self) -> usize {
        self.chunk
    }

    fn base_meta(&self, estimator: &str) -> Sidecar {
        let op = self.model.operator();
        let spec = op.mask().spec();
        let mut m = Sidecar::new();
        m.set("estimator", estimator)
            .set("model", self.model.kind())
            .set("steps", self.model.steps())
            .set("dc", self.model.dc().name())
            .set("mask_scheme", spec.scheme)
            .set("mask_acceleration", spec.acceleration)
            .set("mask_seed", spec.seed)
            .set("achieved_acceleration", op.mask().achieved_acceleration())
            .set("coils", op.n_coils())
            .set("alpha", self.cov.coil().scale());
        if let Some(seed) = self.model.weights_seed() {
            m.set("weights_seed", seed);
        }
        m
    }

    /// `Aᴴ σ w` for a stacked k-space vector `w`.
    fn transport(&self, mut w: ComplexArray) -> Result<ComplexArray> {
        self.cov.apply_factor_in_place(w.data_mut(), false);
        self.model.operator().adjoint(&w)
    }

    /// `σᴴ A x`.
    fn pull(&self, x: &ComplexArray) -> Result<ComplexArray> {
        let mut k = self.model.operator().forward(x)?;
        self.cov.apply_factor_in_place(k.data_mut(), true);
        Ok(k)
    }
}

/// Per-voxel variance image with provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceMap {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    std_error: Option<Vec<f64>>,
    meta: Sidecar,
}

impl VarianceMap {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, meta: Sidecar) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::shape([rows, cols], [values.len()]));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("variance map".into()));
        }
        if let Some(v) = values.iter().find(|v| **v < 0.0) {
            return Err(Error::NonFinite(format!("variance map (negative value {v})")));
        }
        Ok(Self {
            rows,
            cols,
            values,
            std_error: None,
            meta,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Monte-Carlo standard error of each value, when available.
    pub fn std_error(&self) -> Option<&[f64]> {
        self.std_error.as_deref()
    }

    pub fn with_std_error(mut self, se: Vec<f64>) -> Result<Self> {
        if se.len() != self.values.len() {
            return Err(Error::shape(self.shape(), [se.len()]));
        }
        self.std_error = Some(se);
        Ok(self)
    }

    pub fn meta(&self) -> &Sidecar {
        &self.meta
    }

    pub fn meta_mut(&mut self) -> &mut Sidecar {
        &mut self.meta
    }

    pub fn estimator(&self) -> &str {
        self.meta.get("estimator").unwrap_or("unknown")
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Writes `stem.hdr/.bin` (values), `stem.meta`, and `stem.se.*` if present.
    pub fn save(&self, stem: &Path) -> Result<Vec<PathBuf>> {
        let mut files = io::write_real(stem, &self.shape(), &self.values)?;
        files.push(self.meta.write(stem)?);
        if let Some(se) = &self.std_error {
            files.extend(io::write_real(&se_stem(stem), &self.shape(), se)?);
        }
        Ok(files)
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let (dims, values) = io::read_real(stem)?;
        if dims.len() != 2 {
            return Err(Error::Format {
                path: stem.to_path_buf(),
                reason: format!("variance maps are 2D, found dims {dims:?}"),
            });
        }
        let meta = Sidecar::read(stem).unwrap_or_default();
        let mut map = Self::new(dims[0], dims[1], values, meta)?;
        if io::header_path(&se_stem(stem)).exists() {
            map.std_error = Some(io::read_real(&se_stem(stem))?.1);
        }
        Ok(map)
    }
}

fn se_stem(stem: &Path) -> PathBuf {
    let name = stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.with_file_name(format!("{name}.se"))
}

/// Sums equal-length vectors by a fixed balanced binary tree.
pub(crate) fn pairwise_sum(mut parts: Vec<Vec<f64>>) -> Vec<f64> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}

/// Splits `0..total` into fixed chunks, maps each chunk in parallel and
/// reduces the per-chunk vectors with [`pairwise_sum`].
fn chunked_sum<F>(total: usize, chunk: usize, len: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(std::ops::Range<usize>, &mut [f64]) -> Result<()> + Sync,
{
    let n_chunks = total.div_ceil(chunk);
    let parts = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; len];
            f(c * chunk..((c + 1) * chunk).min(total), &mut acc)?;
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sum = pairwise_sum(parts);
    sum.resize(len, 0.0);
    Ok(sum)
}

/// `(1/S) Σ_s |L v_s|²` for an implicit map `L` from `n_in` to `n_out` entries.
pub fn factor_diagonal<F>(n_in: usize, n_out: usize, s: usize, probes: &ProbeSource, chunk: usize, apply: F) -> Result<Vec<f64>>
where
    F: Fn(Vec<Complex64>) -> Result<Vec<Complex64>> + Sync,
{
    let sum = chunked_sum(s, chunk.max(1), n_out, |cols, acc| {
        for j in cols {
            let u = apply(probes.column(n_in, j))?;
            if u.len() != n_out {
                return Err(Error::shape([n_out], [u.len()]));
            }
            acc.iter_mut().zip(&u).for_each(|(a, z)| *a += z.norm_sqr());
        }
        Ok(())
    })?;
    Ok(sum.into_iter().map(|v| v / s as f64).collect())
}

/// `(1/S) Σ_s Re(conj(v_s) ⊙ Σ v_s)` for an implicit Hermitian `Σ`.
pub fn hadamard_diagonal<F>(n: usize, s: usize, probes: &ProbeSource, chunk: usize, apply: F) -> Result<Vec<f64>>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>> + Sync,
{
    let sum = chunked_sum(s, chunk.max(1), n, |cols, acc| {
        for j in cols {
            let v = probes.column(n, j);
            let sv = apply(&v)?;
            if sv.len() != n {
                return Err(Error::shape([n], [sv.len()]));
            }
            acc.iter_mut().zip(v.iter().zip(&sv)).for_each(|(a, (vi, si))| *a += (vi.conj() * si).re);
        }
        Ok(())
    })?;
    Ok(sum.into_iter().map(|v| v / s as f64).collect())
}

fn finish(plan: &SketchPlan, values: Vec<f64>, meta: Sidecar, start: Instant) -> Result<VarianceMap> {
    let [rows, cols] = plan.model.operator().image_shape();
    let mut map = VarianceMap::new(rows, cols, values, meta)?;
    map.meta.set("wall_time_s", format!("{:.6}", start.elapsed().as_secs_f64()));
    Ok(map)
}

/// Random-probe sketch of `diag(L Lᵀ)`, `L = J_f(x_lin) Aᴴ σ`.
pub fn sketch_variance(plan: &SketchPlan) -> Result<VarianceMap> {
    let start = Instant::now();
    let lin = plan.model.linearize(&plan.linearization)?;
    let kshape = plan.cov.kspace_shape();
    let probes = ProbeSource::new(plan.distribution, plan.seed);
    let values = factor_diagonal(plan.cov.m(), plan.linearization.len(), plan.s, &probes, plan.chunk, |v| {
        let w = ComplexArray::new(kshape.to_vec(), v)?;
        Ok(lin.jvp(&plan.transport(w)?)?.into_vec())
    })?;
    let mut meta = plan.base_meta("sketch");
    meta.set("samples", plan.s)
        .set("seed", plan.seed)
        .set("distribution", plan.distribution)
        .set("chunk", plan.chunk);
    finish(plan, values, meta, start)
}

/// Exact linearized variance, two VJPs per voxel:
/// `var_i = ½(‖σᴴA·vjp(e_i)‖² + ‖σᴴA·vjp(i·e_i)‖²)`.
pub fn naive_variance(plan: &SketchPlan) -> Result<VarianceMap> {
    let start = Instant::now();
    let lin = plan.model.linearize(&plan.linearization)?;
    let n = plan.linearization.len();
    let shape = plan.linearization.shape().to_vec();
    let values = (0..n)
        .into_par_iter()
        .map(|i| row_norm(plan, &lin, &shape, i))
        .collect::<Result<Vec<_>>>()?;
    let mut meta = plan.base_meta("naive");
    meta.set("samples", "exact");
    finish(plan, values, meta, start)
}

fn row_norm(plan: &SketchPlan, lin: &Linearized<'_>, shape: &[usize], i: usize) -> Result<f64> {
    let mut total = 0.0;
    for z in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
        let mut e = ComplexArray::zeros(shape);
        e.data_mut()[i] = z;
        total += plan.pull(&lin.vjp(&e)?)?.norm_sqr();
    }
    Ok(0.5 * total)
}

/// Exact linearized variance by pushing every sampled k-space basis vector
/// (and its `i`-multiple) through `J Aᴴ σ`. Limited to `n ≤ 1024`.
pub fn brute_force_diag(plan: &SketchPlan) -> Result<VarianceMap> {
    let start = Instant::now();
    let n = plan.linearization.len();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::SizeLimit {
            n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let lin = plan.model.linearize(&plan.linearization)?;
    let op = plan.model.operator();
    let kshape = plan.cov.kspace_shape();
    let nf = plan.cov.n_freqs();
    // Unsampled frequencies are annihilated by Aᴴ and contribute nothing.
    let columns: Vec<usize> = (0..plan.cov.n_coils())
        .flat_map(|c| (0..nf).filter(|&f| op.mask().kept()[f]).map(move |f| c * nf + f))
        .collect();
    let sum = chunked_sum(columns.len(), plan.chunk, n, |range, acc| {
        for &j in &columns[range] {
            for z in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)] {
                let mut e = ComplexArray::zeros(&kshape);
                e.data_mut()[j] = z;
                let col = lin.jvp(&plan.transport(e)?)?;
                acc.iter_mut().zip(col.data()).for_each(|(a, u)| *a += 0.5 * u.norm_sqr());
            }
        }
        Ok(())
    })?;
    let mut meta = plan.base_meta("brute");
    meta.set("samples", "exact");
    finish(plan, sum, meta, start)
}

/// Where Monte-Carlo trials start from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum McNoiseMode {
    /// Fresh noise added to the (already noisy) measured data.
    #[default]
    FreshOnMeasured,
    /// Fresh noise added to the noise-free data.
    Resimulate,
}

impl McNoiseMode {
    pub fn name(self) -> &'static str {
        match self {
            McNoiseMode::FreshOnMeasured => "fresh-on-measured",
            McNoiseMode::Resimulate => "resimulate",
        }
    }
}

impl std::str::FromStr for McNoiseMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fresh-on-measured" => Ok(McNoiseMode::FreshOnMeasured),
            "resimulate" => Ok(McNoiseMode::Resimulate),
            _ => Err(Error::config("estimators.mc_mode", format!("unknown Monte-Carlo mode `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McOptions {
    pub trials: usize,
    pub seed: u64,
    pub mode: McNoiseMode,
    /// Every trial reuses the noise of trial 0 (degenerate check).
    pub repeat_noise: bool,
    pub chunk: usize,
}

impl McOptions {
    pub fn new(trials: usize, seed: u64) -> Self {
        Self {
            trials,
            seed,
            mode: McNoiseMode::FreshOnMeasured,
            repeat_noise: false,
            chunk: DEFAULT_CHUNK,
        }
    }
}

/// Shifted power sums of one voxel's trial outputs.
const MC_SUMS: usize = 8;

/// Empirical per-voxel variance over `trials` reconstructions of noisy data,
/// `1/(N−1) Σ_t |x_t − x̄|²`, with a standard error from the fourth central
/// moment.
pub fn mc_variance(plan: &SketchPlan, opts: &McOptions) -> Result<VarianceMap> {
    let start = Instant::now();
    let big_n = opts.trials;
    if big_n < 2 {
        return Err(Error::config("estimators.trials", "Monte-Carlo needs at least 2 trials"));
    }
    let base = match opts.mode {
        McNoiseMode::FreshOnMeasured => &plan.measured,
        McNoiseMode::Resimulate => plan
            .clean
            .as_ref()
            .ok_or_else(|| Error::config("estimators.mc_mode", "resimulation needs noise-free data"))?,
    };
    let op = plan.model.operator();
    let n = plan.linearization.len();
    // Sums are taken about the noise-free-of-trial-noise output to keep
    // cancellation small.
    let reference = plan.model.apply(&op.adjoint(base)?)?;
    let rng = CounterRng::new(opts.seed).derive(MC_TAG);
    let sums = chunked_sum(big_n, opts.chunk.max(1), MC_SUMS * n, |trials, acc| {
        for t in trials {
            let stream = if opts.repeat_noise { 0 } else { t as u64 };
            let mut y = plan.cov.sample_noise_with(&rng, stream);
            y.axpy(Complex64::new(1.0, 0.0), base)?;
            let x0 = op.adjoint(&y)?;
            let out = plan.model.reconstruct(&x0, &y)?;
            for (k, (o, r)) in out.data().iter().zip(reference.data()).enumerate() {
                let d = o - r;
                let d2 = d.norm_sqr();
                let sq = d * d;
                let cube = d * d2;
                let a = &mut acc[k * MC_SUMS..(k + 1) * MC_SUMS];
                a[0] += d.re;
                a[1] += d.im;
                a[2] += d2;
                a[3] += sq.re;
                a[4] += sq.im;
                a[5] += cube.re;
                a[6] += cube.im;
                a[7] += d2 * d2;
            }
        }
        Ok(())
    })?;
    let nf = big_n as f64;
    let mut values = Vec::with_capacity(n);
    let mut std_error = Vec::with_capacity(n);
    for a in sums.chunks(MC_SUMS) {
        let s1 = Complex64::new(a[0], a[1]);
        let s2c = Complex64::new(a[3], a[4]);
        let s3 = Complex64::new(a[5], a[6]);
        let (s2, s4) = (a[2], a[7]);
        let mu = s1 / nf;
        let mu2 = mu.norm_sqr();
        let ss = (s2 - nf * mu2).max(0.0);
        let var = ss / (nf - 1.0);
        // Σ|d − μ|⁴ expanded in the shifted sums.
        let re_sq = 0.5 * (mu2 * s2 + (mu.conj() * mu.conj() * s2c).re);
        let m4 = (s4 + nf * mu2 * mu2 + 4.0 * re_sq + 2.0 * mu2 * s2
            - 4.0 * (mu.conj() * s3).re
            - 4.0 * mu2 * (mu.conj() * s1).re)
            / nf;
        let se2 = (m4 - var * var * (nf - 3.0) / (nf - 1.0)) / nf;
        values.push(var);
        std_error.push(se2.max(0.0).sqrt());
    }
    let mut meta = plan.base_meta("mc");
    meta.set("samples", big_n)
        .set("seed", opts.seed)
        .set("mc_mode", opts.mode.name())
        .set("chunk", opts.chunk);
    let mut map = finish(plan, values, meta, start)?;
    map.std_error = Some(std_error);
    Ok(map)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::noise::CoilCovariance;
    use crate::numerics::HermitianMatrix;
    use crate::operator::{
        make_birdcage_maps, make_mask, ImagingOperator, MaskSpec, SamplingMask, Scheme, SensitivityMaps,
    };
    use crate::recon::{DataConsistency, NetArch};

    fn random(shape: &[usize], seed: u64) -> ComplexArray {
        let rng = CounterRng::new(seed);
        ComplexArray::from_fn(shape, |k| rng.complex_normal(0, k as u64))
    }

    fn rel(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    fn unit_plan(size: usize, coil: CoilCovariance) -> SketchPlan {
        let op = Arc::new(ImagingOperator::new(SensitivityMaps::unit(size, size), SamplingMask::full(size, size)).unwrap());
        let y = op.forward(&random(&[size, size], 1)).unwrap();
        SketchPlan::new(ReconModel::identity(op), SampleCovariance::new(coil, size, size), y).unwrap()
    }

    fn pipeline(size: usize, coils: usize, r: f64, model_seed: Option<u64>, cov_seed: u64) -> SketchPlan {
        let maps = make_birdcage_maps(coils, size, size).unwrap();
        let mask = make_mask(&MaskSpec::new(Scheme::UniformRandom2d, r, size, size, 3)).unwrap();
        let op = Arc::new(ImagingOperator::new(maps, mask).unwrap());
        let model = match model_seed {
            Some(seed) => ReconModel::unrolled(op.clone(), 2, &NetArch::default(), seed).unwrap(),
            None => ReconModel::identity(op.clone()),
        };
        let coil = CoilCovariance::from_matrix(HermitianMatrix::random_psd(coils, coils + 2, cov_seed)).unwrap();
        let cov = SampleCovariance::new(coil, size, size).with_scale(0.01).unwrap();
        let y = op.forward(&random(&[size, size], cov_seed + 1)).unwrap();
        SketchPlan::new(model, cov, y).unwrap()
    }

    #[test]
    fn pairwise_sum_matches_serial_sum() {
        let parts: Vec<Vec<f64>> = (0..7).map(|k| vec![k as f64, 1.0]).collect();
        assert_eq!(pairwise_sum(parts), vec![21.0, 7.0]);
        assert!(pairwise_sum(Vec::new()).is_empty());
    }

    #[test]
    fn naive_on_unitary_pipeline_is_ones() {
        let plan = unit_plan(8, CoilCovariance::identity(1));
        let map = naive_variance(&plan).unwrap();
        assert!(map.values().iter().all(|v| (v - 1.0).abs() <= 1e-12));
        let brute = brute_force_diag(&plan).unwrap();
        assert!(brute.values().iter().all(|v| (v - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn brute_force_scales_with_coil_variance() {
        let one = brute_force_diag(&unit_plan(8, CoilCovariance::identity(1))).unwrap();
        let four = brute_force_diag(&unit_plan(
            8,
            CoilCovariance::from_matrix(HermitianMatrix::from_real_diagonal(&[4.0])).unwrap(),
        ))
        .unwrap();
        for (a, b) in one.values().iter().zip(four.values()) {
            assert!((4.0 * a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn zero_covariance_gives_zero_maps() {
        let zero = CoilCovariance::from_matrix(HermitianMatrix::from_real_diagonal(&[0.0])).unwrap();
        let plan = unit_plan(8, zero).with_sketch(5, ProbeDistribution::RandomPhase, 1).unwrap();
        for map in [sketch_variance(&plan).unwrap(), naive_variance(&plan).unwrap()] {
            assert!(map.values().iter().all(|v| *v == 0.0));
        }
    }

    /// For a unitary `L` a single phase probe has `Σ_i |u_i|² = n` exactly,
    /// although individual voxels scatter around 1.
    #[test]
    fn single_phase_probe_preserves_total_variance() {
        let plan = unit_plan(8, CoilCovariance::identity(1)).with_sketch(1, ProbeDistribution::RandomPhase, 4).unwrap();
        let map = sketch_variance(&plan).unwrap();
        assert!((map.mean() - 1.0).abs() <= 1e-12);
        assert!(map.values().iter().any(|v| (v - 1.0).abs() > 1e-3));
    }

    /// With a diagonal image covariance a single phase probe is exact for the
    /// Hadamard form `conj(v) ⊙ Σv`.
    #[test]
    fn single_phase_probe_is_exact_for_diagonal_covariance() {
        let plan = unit_plan(8, CoilCovariance::from_matrix(HermitianMatrix::from_real_diagonal(&[2.5])).unwrap());
        let op = plan.model().operator();
        let probes = ProbeSource::new(ProbeDistribution::RandomPhase, 6);
        let diag = hadamard_diagonal(64, 1, &probes, 1, |v| {
            let x = ComplexArray::new(vec![8, 8], v.to_vec())?;
            // Σ_x v = Aᴴ σ σᴴ A v.
            Ok(op.adjoint(&plan.cov().apply_factor(&plan.pull(&x)?)?)?.into_vec())
        })
        .unwrap();
        assert!(diag.iter().all(|v| (v - 2.5).abs() <= 1e-12));
    }

    #[test]
    fn naive_equals_brute_force() {
        for (k, model_seed) in [None, Some(7), Some(8)].into_iter().enumerate() {
            let plan = pipeline(12, 2, 2.0, model_seed, 20 + k as u64);
            let naive = naive_variance(&plan).unwrap();
            let brute = brute_force_diag(&plan).unwrap();
            assert!(rel(naive.values(), brute.values()) <= 1e-10);
        }
    }

    #[test]
    fn naive_equals_brute_force_with_cg_dc() {
        let mut plan = pipeline(8, 2, 2.0, Some(9), 30);
        plan.model = plan
            .model
            .clone()
            .with_dc(DataConsistency::Cg { lambda: 0.3, iters: 3 })
            .unwrap();
        let naive = naive_variance(&plan).unwrap();
        let brute = brute_force_diag(&plan).unwrap();
        assert!(rel(naive.values(), brute.values()) <= 1e-10);
    }

    #[test]
    fn sketch_converges_to_brute_force() {
        let plan = pipeline(12, 2, 2.0, Some(10), 40).with_sketch(20_000, ProbeDistribution::RandomPhase, 1).unwrap();
        let sketch = sketch_variance(&plan).unwrap();
        let brute = brute_force_diag(&plan).unwrap();
        let err = rel(sketch.values(), brute.values());
        assert!(err <= 0.02, "{err}");
    }

    #[test]
    fn sketch_mean_over_seeds_is_unbiased() {
        let base = pipeline(12, 2, 2.0, None, 50);
        let reference = naive_variance(&base).unwrap();
        let maps: Vec<Vec<f64>> = (0..200)
            .map(|seed| {
                let plan = base.clone().with_sketch(50, ProbeDistribution::RandomPhase, seed).unwrap();
                sketch_variance(&plan).unwrap().values().to_vec()
            })
            .collect();
        let mean: Vec<f64> = pairwise_sum(maps).into_iter().map(|v| v / 200.0).collect();
        let err = rel(&mean, reference.values());
        assert!(err <= 0.02, "{err}");
    }

    #[test]
    fn brute_force_refuses_large_images() {
        let plan = unit_plan(40, CoilCovariance::identity(1));
        assert!(matches!(brute_force_diag(&plan), Err(Error::SizeLimit { n: 1600, .. })));
    }

    #[test]
    fn repeated_noise_gives_zero_spread() {
        let plan = pipeline(8, 2, 2.0, Some(11), 60);
        let opts = McOptions {
            repeat_noise: true,
            ..McOptions::new(2, 3)
        };
        assert!(mc_variance(&plan, &opts).unwrap().values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn mc_on_unitary_pipeline_concentrates_at_one() {
        let plan = unit_plan(16, CoilCovariance::identity(1));
        let map = mc_variance(&plan, &McOptions::new(10_000, 5)).unwrap();
        let close = map.values().iter().filter(|v| (*v - 1.0).abs() <= 0.1).count();
        assert!(close as f64 >= 0.99 * 256.0, "{close}");
        // Circular Gaussian output: standard error ≈ var/√N.
        let se = map.std_error().unwrap();
        assert!(se.iter().all(|s| (s * 100.0 - 1.0).abs() < 0.15), "{:?}", &se[..4]);
    }

    #[test]
    fn mc_matches_naive_for_linear_pipeline() {
        let plan = pipeline(12, 2, 3.0, None, 70);
        let naive = naive_variance(&plan).unwrap();
        let mc = mc_variance(&plan, &McOptions::new(10_000, 6)).unwrap();
        let err = rel(mc.values(), naive.values());
        assert!(err <= 0.05, "{err}");
    }

    #[test]
    fn resimulate_needs_clean_data() {
        let plan = pipeline(8, 2, 2.0, None, 80);
        let opts = McOptions {
            mode: McNoiseMode::Resimulate,
            ..McOptions::new(4, 0)
        };
        assert!(mc_variance(&plan, &opts).is_err());
        let clean = plan.measured().clone();
        let plan = plan.with_clean(clean).unwrap();
        let a = mc_variance(&plan, &opts).unwrap();
        let b = mc_variance(&plan, &McOptions::new(4, 0)).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn linear_maps_scale_with_alpha() {
        let plan = pipeline(12, 2, 2.0, None, 90).with_sketch(64, ProbeDistribution::RandomPhase, 2).unwrap();
        let base_alpha = plan.cov().coil().scale();
        let s1 = sketch_variance(&plan).unwrap();
        let n1 = naive_variance(&plan).unwrap();
        for alpha in [4.0, 16.0] {
            let scaled = plan.clone().with_covariance(plan.cov().with_scale(alpha * base_alpha).unwrap()).unwrap();
            let s = sketch_variance(&scaled).unwrap();
            let n = naive_variance(&scaled).unwrap();
            let want_s: Vec<f64> = s1.values().iter().map(|v| v * alpha).collect();
            let want_n: Vec<f64> = n1.values().iter().map(|v| v * alpha).collect();
            assert!(rel(s.values(), &want_s) <= 1e-9);
            assert!(rel(n.values(), &want_n) <= 1e-9);
        }
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let plan = pipeline(12, 2, 2.0, Some(12), 100).with_sketch(100, ProbeDistribution::RandomPhase, 3).unwrap();
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                (
                    sketch_variance(&plan).unwrap().values().to_vec(),
                    mc_variance(&plan, &McOptions::new(50, 4)).unwrap().values().to_vec(),
                    naive_variance(&plan).unwrap().values().to_vec(),
                )
            })
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn map_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let plan = pipeline(8, 2, 2.0, None, 110);
        let map = mc_variance(&plan, &McOptions::new(20, 1)).unwrap();
        let stem = dir.path().join("mc");
        map.save(&stem).unwrap();
        assert_eq!(VarianceMap::load(&stem).unwrap(), map);
    }

    #[test]
    fn negative_or_nan_values_are_rejected() {
        assert!(VarianceMap::new(1, 2, vec![1.0, -1e-3], Sidecar::new()).is_err());
        assert!(VarianceMap::new(1, 2, vec![1.0, f64::NAN], Sidecar::new()).is_err());
        assert!(VarianceMap::new(1, 3, vec![1.0, 2.0], Sidecar::new()).is_err());
    }
}
