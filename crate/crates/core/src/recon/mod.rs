//! Differentiable reconstruction pipelines `f` with exact JVPs and VJPs.
//!
//! Every model maps a zero-filled image `x₀ = Aᴴ y` to a reconstruction.
//! Measured data enter a data-consistency step only through `Aᴴ y`, so `f`
//! is a function of `x₀` alone and its Jacobian is taken with respect to
//! `x₀`; noise in `y` therefore reaches both the regularizer input and the
//! data term, exactly as it does in a Monte-Carlo rerun.
//!
//! The regularizers act on stacked real/imaginary channels and are only
//! real-linear after linearization. [`Linearized::vjp`] is the adjoint with
//! respect to the real inner product `Re⟨a, b⟩`; it coincides with the
//! complex adjoint `Jᴴ w` whenever the Jacobian is complex-linear.

mod cg;
mod net;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;

pub use net::{Activation, ConvLayer, NetArch, SmoothConvNet};

use crate::error::{Error, Result};
use crate::numerics::io::Sidecar;
use crate::numerics::ComplexArray;
use crate::operator::ImagingOperator;
use crate::rng::CounterRng;
use cg::CgTape;
use net::NetTape;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Identity,
    UnrolledDc,
    SinglePassDenoiser,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Identity, ModelKind::UnrolledDc, ModelKind::SinglePassDenoiser];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Identity => "identity",
            ModelKind::UnrolledDc => "unrolled-dc",
            ModelKind::SinglePassDenoiser => "single-pass-denoiser",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("model.kind", format!("unknown model kind `{s}`")))
    }
}

/// Data-consistency update used between regularizer blocks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DataConsistency {
    /// `x̂ − Aᴴ(A x̂ − y)`.
    Gradient,
    /// `iters` CG steps on `(AᴴA + λI) x = Aᴴ y + λ x̂`, started from zero.
    Cg { lambda: f64, iters: usize },
}

impl DataConsistency {
    pub fn name(&self) -> &'static str {
        match self {
            DataConsistency::Gradient => "gradient",
            DataConsistency::Cg { .. } => "cg",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReconModel {
    kind: ModelKind,
    op: Arc<ImagingOperator>,
    nets: Vec<SmoothConvNet>,
    dc: DataConsistency,
    weights_seed: Option<u64>,
}

impl ReconModel {
    pub fn identity(op: Arc<ImagingOperator>) -> Self {
        Self {
            kind: ModelKind::Identity,
            op,
            nets: Vec::new(),
            dc: DataConsistency::Gradient,
            weights_seed: None,
        }
    }

    /// `steps` alternations of a seeded regularizer and a gradient DC step.
    /// Block `b` draws its weights from a seed derived from `(seed, b)`.
    pub fn unrolled(op: Arc<ImagingOperator>, steps: usize, arch: &NetArch, seed: u64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::config("model.steps", "unrolled models need at least one step"));
        }
        let nets = (0..steps)
            .map(|b| SmoothConvNet::seeded(arch, block_seed(seed, b)))
            .collect::<Result<Vec<_>>>()?;
        let mut model = Self::from_nets(ModelKind::UnrolledDc, op, nets, DataConsistency::Gradient)?;
        model.weights_seed = Some(seed);
        Ok(model)
    }

    pub fn denoiser(op: Arc<ImagingOperator>, arch: &NetArch, seed: u64) -> Result<Self> {
        let net = SmoothConvNet::seeded(arch, block_seed(seed, 0))?;
        let mut model = Self::from_nets(ModelKind::SinglePassDenoiser, op, vec![net], DataConsistency::Gradient)?;
        model.weights_seed = Some(seed);
        Ok(model)
    }

    pub fn from_nets(
        kind: ModelKind,
        op: Arc<ImagingOperator>,
        nets: Vec<SmoothConvNet>,
        dc: DataConsistency,
    ) -> Result<Self> {
        let expected = match kind {
            ModelKind::Identity => nets.is_empty(),
            ModelKind::UnrolledDc => !nets.is_empty(),
            ModelKind::SinglePassDenoiser => nets.len() == 1,
        };
        if !expected {
            return Err(Error::config("model", format!("{kind} cannot hold {} regularizer blocks", nets.len())));
        }
        let mut model = Self {
            kind,
            op,
            nets,
            dc: DataConsistency::Gradient,
            weights_seed: None,
        };
        model.set_dc(dc)?;
        Ok(model)
    }

    pub fn with_dc(mut self, dc: DataConsistency) -> Result<Self> {
        self.set_dc(dc)?;
        Ok(self)
    }

    fn set_dc(&mut self, dc: DataConsistency) -> Result<()> {
        if let DataConsistency::Cg { lambda, iters } = dc {
            if !(lambda.is_finite() && lambda > 0.0) || iters == 0 {
                return Err(Error::config("model.cg", "need lambda > 0 and at least one iteration"));
            }
        }
        self.dc = dc;
        Ok(())
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Number of unrolled steps `K` (0 for the identity, 1 for the denoiser).
    pub fn steps(&self) -> usize {
        self.nets.len()
    }

    pub fn nets(&self) -> &[SmoothConvNet] {
        &self.nets
    }

    pub fn dc(&self) -> DataConsistency {
        self.dc
    }

    pub fn operator(&self) -> &ImagingOperator {
        &self.op
    }

    pub fn operator_arc(&self) -> &Arc<ImagingOperator> {
        &self.op
    }

    pub fn weights_seed(&self) -> Option<u64> {
        self.weights_seed
    }

    /// `f(x₀)` with the data term `Aᴴ y` taken from `y`.
    pub fn reconstruct(&self, x0: &ComplexArray, y: &ComplexArray) -> Result<ComplexArray> {
        x0.ensure_shape(&self.op.image_shape())?;
        let data = self.op.adjoint(y)?;
        Ok(self.run(x0, &data, false)?.0)
    }

    /// `f(x₀)` with the data term tied to the input, `Aᴴ y = x₀`.
    pub fn apply(&self, x0: &ComplexArray) -> Result<ComplexArray> {
        x0.ensure_shape(&self.op.image_shape())?;
        Ok(self.run(x0, x0, false)?.0)
    }

    /// Records everything `jvp`/`vjp` need at the linearization point.
    pub fn linearize(&self, x_lin: &ComplexArray) -> Result<Linearized<'_>> {
        x_lin.ensure_shape(&self.op.image_shape())?;
        let (output, tapes) = self.run(x_lin, x_lin, true)?;
        Ok(Linearized {
            model: self,
            tapes,
            output,
        })
    }

    /// `J_f(x_lin)·u`. `y` is checked for shape only: the DC step is affine
    /// in the data, so the Jacobian does not depend on it.
    pub fn jvp(&self, x_lin: &ComplexArray, y: &ComplexArray, u: &ComplexArray) -> Result<ComplexArray> {
        y.ensure_shape(&self.op.kspace_shape())?;
        self.linearize(x_lin)?.jvp(u)
    }

    /// Real adjoint of [`Self::jvp`].
    pub fn vjp(&self, x_lin: &ComplexArray, y: &ComplexArray, w: &ComplexArray) -> Result<ComplexArray> {
        y.ensure_shape(&self.op.kspace_shape())?;
        self.linearize(x_lin)?.vjp(w)
    }

    fn normal_plus(&self, lambda: f64) -> impl Fn(&ComplexArray) -> Result<ComplexArray> + '_ {
        move |v| {
            let mut out = self.op.normal(v)?;
            out.axpy(lambda.into(), v)?;
            Ok(out)
        }
    }

    fn run(&self, x0: &ComplexArray, data: &ComplexArray, record: bool) -> Result<(ComplexArray, Vec<BlockTape>)> {
        let (rows, cols) = (self.op.rows(), self.op.cols());
        let mut x = x0.clone();
        let mut tapes = Vec::new();
        for net in &self.nets {
            let (out, net_tape) = net.forward(&to_channels(&x), rows, cols, record);
            let xr = from_channels(&out, x.shape());
            let mut cg_tape = None;
            x = match (self.kind, self.dc) {
                (ModelKind::UnrolledDc, DataConsistency::Gradient) => {
                    let mut next = xr.sub(&self.op.normal(&xr)?)?;
                    next.axpy(Complex64::new(1.0, 0.0), data)?;
                    next
                }
                (ModelKind::UnrolledDc, DataConsistency::Cg { lambda, iters }) => {
                    let mut rhs = data.clone();
                    rhs.axpy(lambda.into(), &xr)?;
                    let (sol, tape) = cg::solve(&self.normal_plus(lambda), &rhs, iters)?;
                    cg_tape = record.then_some(tape);
                    sol
                }
                _ => xr,
            };
            if let Some(net) = net_tape {
                tapes.push(BlockTape { net, cg: cg_tape });
            }
        }
        Ok((x, tapes))
    }

    /// Writes a model manifest at `stem.meta` and each block's weights at `stem.block{b}`.
    pub fn save_weights(&self, stem: &Path) -> Result<Vec<PathBuf>> {
        let mut files = vec![self.manifest().write(stem)?];
        for (b, net) in self.nets.iter().enumerate() {
            files.extend(net.save(&sub_stem(stem, &format!("block{b}")))?);
        }
        Ok(files)
    }

    /// Rebuilds a model saved by [`Self::save_weights`] on operator `op`.
    pub fn load_weights(op: Arc<ImagingOperator>, stem: &Path) -> Result<Self> {
        let meta = Sidecar::read(stem)?;
        let bad = |reason: &str| Error::Format {
            path: stem.to_path_buf(),
            reason: reason.to_string(),
        };
        let kind: ModelKind = meta.get("kind").ok_or_else(|| bad("missing kind"))?.parse()?;
        let steps: usize = meta.get("steps").and_then(|s| s.parse().ok()).ok_or_else(|| bad("missing steps"))?;
        let dc = match meta.get("dc") {
            Some("cg") => DataConsistency::Cg {
                lambda: meta.get("cg_lambda").and_then(|s| s.parse().ok()).ok_or_else(|| bad("missing cg_lambda"))?,
                iters: meta.get("cg_iters").and_then(|s| s.parse().ok()).ok_or_else(|| bad("missing cg_iters"))?,
            },
            _ => DataConsistency::Gradient,
        };
        let nets = (0..steps)
            .map(|b| SmoothConvNet::load(&sub_stem(stem, &format!("block{b}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut model = Self::from_nets(kind, op, nets, dc)?;
        model.weights_seed = meta.get("weights_seed").and_then(|s| s.parse().ok());
        Ok(model)
    }

    pub fn manifest(&self) -> Sidecar {
        let mut m = Sidecar::new();
        m.set("kind", self.kind).set("steps", self.steps()).set("dc", self.dc.name());
        if let DataConsistency::Cg { lambda, iters } = self.dc {
            m.set("cg_lambda", lambda).set("cg_iters", iters);
        }
        if let Some(net) = self.nets.first() {
            m.set("activation", net.activation());
            let shapes: Vec<String> = net.layers().iter().map(|l| format!("{:?}", l.shape())).collect();
            m.set("layer_shapes", shapes.join(" "));
        }
        m.set(
            "weights_seed",
            self.weights_seed.map_or_else(|| "none".to_string(), |s| s.to_string()),
        );
        m
    }
}

fn block_seed(seed: u64, block: usize) -> u64 {
    CounterRng::new(seed).derive(block as u64).key()
}

fn sub_stem(stem: &Path, part: &str) -> PathBuf {
    let name = stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.with_file_name(format!("{name}.{part}"))
}

fn to_channels(x: &ComplexArray) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; 2 * n];
    for (k, z) in x.data().iter().enumerate() {
        out[k] = z.re;
        out[n + k] = z.im;
    }
    out
}

fn from_channels(v: &[f64], shape: &[usize]) -> ComplexArray {
    let n = v.len() / 2;
    ComplexArray::from_fn(shape, |k| Complex64::new(v[k], v[n + k]))
}

#[derive(Clone, Debug)]
struct BlockTape {
    net: NetTape,
    cg: Option<CgTape>,
}

/// A model frozen at a linearization point. Cheap to share across threads;
/// each `jvp`/`vjp` only propagates tangents.
#[derive(Clone, Debug)]
pub struct Linearized<'a> {
    model: &'a ReconModel,
    tapes: Vec<BlockTape>,
    output: ComplexArray,
}

impl Linearized<'_> {
    pub fn model(&self) -> &ReconModel {
        self.model
    }

    /// `f(x_lin)`.
    pub fn output(&self) -> &ComplexArray {
        &self.output
    }

    pub fn jvp(&self, u: &ComplexArray) -> Result<ComplexArray> {
        let m = self.model;
        u.ensure_shape(&m.op.image_shape())?;
        let (rows, cols) = (m.op.rows(), m.op.cols());
        let mut t = u.clone();
        for (net, tape) in m.nets.iter().zip(&self.tapes) {
            let tr = from_channels(&net.jvp(&tape.net, &to_channels(&t), rows, cols), u.shape());
            t = match (m.kind, m.dc) {
                (ModelKind::UnrolledDc, DataConsistency::Gradient) => {
                    let mut next = tr.sub(&m.op.normal(&tr)?)?;
                    next.axpy(Complex64::new(1.0, 0.0), u)?;
                    next
                }
                (ModelKind::UnrolledDc, DataConsistency::Cg { lambda, .. }) => {
                    let mut rhs = u.clone();
                    rhs.axpy(lambda.into(), &tr)?;
                    cg::tangent(&m.normal_plus(lambda), tape.cg.as_ref().expect("recorded"), &rhs)?
                }
                _ => tr,
            };
        }
        Ok(t)
    }

    pub fn vjp(&self, w: &ComplexArray) -> Result<ComplexArray> {
        let m = self.model;
        w.ensure_shape(&m.op.image_shape())?;
        let (rows, cols) = (m.op.rows(), m.op.cols());
        let mut g = w.clone();
        // Cotangent reaching x₀ through the data terms.
        let mut data_bar = ComplexArray::zeros(w.shape());
        for (net, tape) in m.nets.iter().zip(&self.tapes).rev() {
            let gr = match (m.kind, m.dc) {
                (ModelKind::UnrolledDc, DataConsistency::Gradient) => {
                    data_bar.axpy(Complex64::new(1.0, 0.0), &g)?;
                    g.sub(&m.op.normal(&g)?)?
                }
                (ModelKind::UnrolledDc, DataConsistency::Cg { lambda, .. }) => {
                    let cbar = cg::cotangent(&m.normal_plus(lambda), tape.cg.as_ref().expect("recorded"), &g)?;
                    data_bar.axpy(Complex64::new(1.0, 0.0), &cbar)?;
                    cbar.scaled(lambda.into())
                }
                _ => g,
            };
            g = from_channels(&net.vjp(&tape.net, &to_channels(&gr), rows, cols), w.shape());
        }
        g.axpy(Complex64::new(1.0, 0.0), &data_bar)?;
        Ok(g)
    }
}

/// Free-function form of [`ReconModel::reconstruct`].
pub fn reconstruct(model: &ReconModel, x0: &ComplexArray, y: &ComplexArray) -> Result<ComplexArray> {
    model.reconstruct(x0, y)
}

pub fn jvp(model: &ReconModel, x_lin: &ComplexArray, y: &ComplexArray, u: &ComplexArray) -> Result<ComplexArray> {
    model.jvp(x_lin, y, u)
}

pub fn vjp(model: &ReconModel, x_lin: &ComplexArray, y: &ComplexArray, w: &ComplexArray) -> Result<ComplexArray> {
    model.vjp(x_lin, y, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{inner, real_inner};
    use crate::operator::{make_birdcage_maps, make_mask, MaskSpec, SamplingMask, Scheme, SensitivityMaps};

    fn random(shape: &[usize], seed: u64) -> ComplexArray {
        let rng = CounterRng::new(seed);
        ComplexArray::from_fn(shape, |k| rng.complex_normal(0, k as u64))
    }

    fn op(size: usize, coils: usize, r: f64) -> Arc<ImagingOperator> {
        let maps = make_birdcage_maps(coils, size, size).unwrap();
        let mask = make_mask(&MaskSpec::new(Scheme::UniformRandom2d, r, size, size, 5)).unwrap();
        Arc::new(ImagingOperator::new(maps, mask).unwrap())
    }

    fn models(a: &Arc<ImagingOperator>) -> Vec<ReconModel> {
        let arch = NetArch::default();
        vec![
            ReconModel::identity(a.clone()),
            ReconModel::unrolled(a.clone(), 2, &arch, 3).unwrap(),
            ReconModel::denoiser(a.clone(), &arch, 4).unwrap(),
            ReconModel::unrolled(a.clone(), 2, &arch, 5)
                .unwrap()
                .with_dc(DataConsistency::Cg { lambda: 0.5, iters: 4 })
                .unwrap(),
        ]
    }

    fn central_difference(model: &ReconModel, x: &ComplexArray, u: &ComplexArray) -> ComplexArray {
        let eps = 1e-5 * x.norm() / u.norm();
        let mut xp = x.clone();
        xp.axpy(eps.into(), u).unwrap();
        let mut xm = x.clone();
        xm.axpy((-eps).into(), u).unwrap();
        model
            .apply(&xp)
            .unwrap()
            .sub(&model.apply(&xm).unwrap())
            .unwrap()
            .scaled((0.5 / eps).into())
    }

    #[test]
    fn identity_model_is_identity() {
        let a = op(8, 2, 2.0);
        let m = ReconModel::identity(a.clone());
        let (x, y, u) = (random(&[8, 8], 1), random(&[2, 8, 8], 2), random(&[8, 8], 3));
        assert_eq!(m.reconstruct(&x, &y).unwrap(), x);
        assert_eq!(m.jvp(&x, &y, &u).unwrap(), u);
        assert_eq!(m.vjp(&x, &y, &u).unwrap(), u);
    }

    #[test]
    fn zero_weight_unrolled_is_dc_fixed_point() {
        let a = Arc::new(ImagingOperator::new(SensitivityMaps::unit(8, 8), SamplingMask::full(8, 8)).unwrap());
        let arch = NetArch::default();
        let nets = vec![SmoothConvNet::zeros(&arch).unwrap(); 3];
        let m = ReconModel::from_nets(ModelKind::UnrolledDc, a.clone(), nets, DataConsistency::Gradient).unwrap();
        let y = random(&[1, 8, 8], 4);
        let x0 = a.adjoint(&y).unwrap();
        let out = m.reconstruct(&x0, &y).unwrap();
        assert!(out.sub(&x0).unwrap().norm() < 1e-13 * x0.norm());
    }

    #[test]
    fn unrolled_matches_hand_composition() {
        let a = op(16, 2, 2.0);
        let arch = NetArch::default();
        let m = ReconModel::unrolled(a.clone(), 2, &arch, 11).unwrap();
        let y = a.forward(&random(&[16, 16], 6)).unwrap();
        let x0 = a.adjoint(&y).unwrap();
        let mut x = x0.clone();
        for b in 0..2 {
            let net = SmoothConvNet::seeded(&arch, block_seed(11, b)).unwrap();
            let xr = from_channels(&net.forward(&to_channels(&x), 16, 16, false).0, &[16, 16]);
            let resid = a.forward(&xr).unwrap().sub(&y).unwrap();
            x = xr.sub(&a.adjoint(&resid).unwrap()).unwrap();
        }
        let out = m.reconstruct(&x0, &y).unwrap();
        assert!(out.sub(&x).unwrap().norm() <= 1e-13 * x.norm());
    }

    #[test]
    fn jvp_of_zero_is_zero() {
        let a = op(8, 2, 2.0);
        for m in models(&a) {
            let lin = m.linearize(&random(&[8, 8], 7)).unwrap();
            assert_eq!(lin.jvp(&ComplexArray::zeros(&[8, 8])).unwrap().norm(), 0.0);
        }
    }

    #[test]
    fn jvp_matches_central_differences() {
        let a = op(16, 2, 2.0);
        let arch = NetArch::default();
        let m = ReconModel::unrolled(a.clone(), 2, &arch, 12).unwrap();
        let x = a.adjoint(&a.forward(&random(&[16, 16], 8)).unwrap()).unwrap();
        let u = random(&[16, 16], 23);
        let y = a.forward(&x).unwrap();
        let jv = m.jvp(&x, &y, &u).unwrap();
        let fd = central_difference(&m, &x, &u);
        assert!(fd.sub(&jv).unwrap().norm() <= 1e-5 * jv.norm());
    }

    #[test]
    fn jvp_matches_central_differences_for_every_kind() {
        let a = op(12, 2, 2.0);
        for m in models(&a) {
            for s in 0..5 {
                let x = random(&[12, 12], 100 + s);
                let u = random(&[12, 12], 200 + s);
                let jv = m.linearize(&x).unwrap().jvp(&u).unwrap();
                let fd = central_difference(&m, &x, &u);
                let err = fd.sub(&jv).unwrap().norm() / jv.norm();
                assert!(err <= 1e-5, "{} ({:?}): {err}", m.kind(), m.dc());
            }
        }
    }

    #[test]
    fn vjp_is_real_adjoint_of_jvp() {
        let a = op(12, 2, 3.0);
        for m in models(&a) {
            let lin = m.linearize(&random(&[12, 12], 9)).unwrap();
            for s in 0..50 {
                let (u, w) = (random(&[12, 12], 300 + s), random(&[12, 12], 400 + s));
                let lhs = real_inner(&lin.jvp(&u).unwrap(), &w).unwrap();
                let rhs = real_inner(&u, &lin.vjp(&w).unwrap()).unwrap();
                assert!((lhs - rhs).abs() <= 1e-10 * u.norm() * w.norm(), "{}: {lhs} vs {rhs}", m.kind());
            }
        }
    }

    #[test]
    fn linear_pipelines_pair_as_complex_adjoints() {
        let a = op(8, 2, 2.0);
        let arch = NetArch::default();
        let nets = vec![SmoothConvNet::zeros(&arch).unwrap(); 2];
        let linear = [
            ReconModel::identity(a.clone()),
            ReconModel::from_nets(ModelKind::UnrolledDc, a.clone(), nets.clone(), DataConsistency::Gradient).unwrap(),
        ];
        for m in &linear {
            let lin = m.linearize(&random(&[8, 8], 10)).unwrap();
            for s in 0..20 {
                let (u, w) = (random(&[8, 8], 500 + s), random(&[8, 8], 600 + s));
                let lhs = inner(&lin.jvp(&u).unwrap(), &w).unwrap();
                let rhs = inner(&u, &lin.vjp(&w).unwrap()).unwrap();
                assert!((lhs - rhs).norm() <= 1e-10 * u.norm() * w.norm());
            }
        }
    }

    #[test]
    fn vjp_of_basis_vector_is_jacobian_row() {
        let size = 8;
        let a = op(size, 2, 2.0);
        let m = ReconModel::unrolled(a.clone(), 2, &NetArch::default(), 13).unwrap();
        let lin = m.linearize(&random(&[size, size], 14)).unwrap();
        let n = size * size;
        let basis = |j: usize, z: Complex64| {
            let mut e = ComplexArray::zeros(&[size, size]);
            e.data_mut()[j] = z;
            e
        };
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let cols_re: Vec<_> = (0..n).map(|j| lin.jvp(&basis(j, one)).unwrap()).collect();
        let cols_im: Vec<_> = (0..n).map(|j| lin.jvp(&basis(j, i)).unwrap()).collect();
        for row in [0, 17, 36, 63] {
            let v = lin.vjp(&basis(row, one)).unwrap();
            for j in 0..n {
                // Real-linear row: (Re J e_j)_row + i (Re J (i e_j))_row; for a
                // complex-linear J this is conj(J_row,j).
                let want = Complex64::new(cols_re[j].data()[row].re, cols_im[j].data()[row].re);
                assert!((v.data()[j] - want).norm() < 1e-12, "row {row} col {j}");
            }
        }
    }

    #[test]
    fn reconstruct_with_consistent_data_equals_apply() {
        let a = op(8, 2, 2.0);
        for m in models(&a) {
            let y = random(&[2, 8, 8], 15);
            let x0 = a.adjoint(&y).unwrap();
            assert!(m.reconstruct(&x0, &y).unwrap().sub(&m.apply(&x0).unwrap()).unwrap().norm() < 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let a = op(8, 2, 2.0);
        let m = ReconModel::unrolled(a, 1, &NetArch::default(), 0).unwrap();
        assert!(m.apply(&ComplexArray::zeros(&[8, 7])).is_err());
        let x = ComplexArray::zeros(&[8, 8]);
        assert!(m.jvp(&x, &ComplexArray::zeros(&[1, 8, 8]), &x).is_err());
        assert!(m.linearize(&x).unwrap().vjp(&ComplexArray::zeros(&[4, 4])).is_err());
    }

    #[test]
    fn weights_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = op(8, 2, 2.0);
        let m = ReconModel::unrolled(a.clone(), 3, &NetArch::default(), 21)
            .unwrap()
            .with_dc(DataConsistency::Cg { lambda: 0.1, iters: 3 })
            .unwrap();
        let stem = dir.path().join("model");
        m.save_weights(&stem).unwrap();
        let back = ReconModel::load_weights(a, &stem).unwrap();
        assert_eq!(back.nets(), m.nets());
        assert_eq!(back.dc(), m.dc());
        assert_eq!(back.weights_seed(), Some(21));
        let x = random(&[8, 8], 16);
        assert_eq!(back.apply(&x).unwrap(), m.apply(&x).unwrap());
    }
}
