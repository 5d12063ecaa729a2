use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numerics::io::{self, Sidecar};
use crate::rng::CounterRng;

/// Smooth pointwise nonlinearity, so the network Jacobian exists everywhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    /// `z·sigmoid(z)`.
    Silu,
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Silu => "silu",
            Activation::Tanh => "tanh",
        }
    }

    #[inline]
    fn eval(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                (z * s, s * (1.0 + z * (1.0 - s)))
            }
            Activation::Tanh => {
                let t = z.tanh();
                (t, 1.0 - t * t)
            }
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "silu" => Ok(Activation::Silu),
            "tanh" => Ok(Activation::Tanh),
            _ => Err(Error::config("model.activation", format!("unknown activation `{s}`"))),
        }
    }
}

/// Shape of a regularizer network: `n_layers` convolutions
/// `2 → hidden → … → hidden → 2`, activation after all but the last.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetArch {
    pub n_layers: usize,
    pub hidden: usize,
    pub kernel: usize,
    pub activation: Activation,
}

impl Default for NetArch {
    fn default() -> Self {
        Self {
            n_layers: 3,
            hidden: 8,
            kernel: 3,
            activation: Activation::Silu,
        }
    }
}

impl NetArch {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 {
            return Err(Error::config("model.layers", "need at least one layer"));
        }
        if self.hidden == 0 {
            return Err(Error::config("model.hidden", "need at least one channel"));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::config("model.kernel", "kernel size must be odd"));
        }
        Ok(())
    }

    fn channels(&self) -> Vec<usize> {
        let mut ch = vec![2];
        ch.extend(std::iter::repeat_n(self.hidden, self.n_layers - 1));
        ch.push(2);
        ch
    }
}

/// Real 2D convolution with zero "same" padding.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    c_in: usize,
    c_out: usize,
    kernel: usize,
    /// `c_out × c_in × kernel × kernel`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvLayer {
    pub fn new(c_in: usize, c_out: usize, kernel: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != c_out * c_in * kernel * kernel || bias.len() != c_out {
            return Err(Error::shape([c_out, c_in, kernel, kernel], [weights.len(), bias.len()]));
        }
        Ok(Self {
            c_in,
            c_out,
            kernel,
            weights,
            bias,
        })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.c_out, self.c_in, self.kernel, self.kernel]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Visits every `(weight, dy, dx, o, i)` tap.
    #[inline]
    fn taps(&self, mut f: impl FnMut(f64, isize, isize, usize, usize)) {
        let (k, r) = (self.kernel, (self.kernel / 2) as isize);
        for o in 0..self.c_out {
            for i in 0..self.c_in {
                for ky in 0..k {
                    for kx in 0..k {
                        let w = self.weights[((o * self.c_in + i) * k + ky) * k + kx];
                        if w != 0.0 {
                            f(w, ky as isize - r, kx as isize - r, o, i);
                        }
                    }
                }
            }
        }
    }

    /// `out = W * input (+ bias)`.
    fn apply(&self, input: &[f64], rows: usize, cols: usize, bias: bool, out: &mut [f64]) {
        let n = rows * cols;
        for (o, plane) in out.chunks_mut(n).enumerate() {
            plane.fill(if bias { self.bias[o] } else { 0.0 });
        }
        self.taps(|w, dy, dx, o, i| {
            let (src, dst) = (&input[i * n..(i + 1) * n], &mut out[o * n..(o + 1) * n]);
            for_each_shift(rows, cols, dy, dx, |d, s, len| {
                for (a, b) in dst[d..d + len].iter_mut().zip(&src[s..s + len]) {
                    *a += w * b;
                }
            });
        });
    }

    /// `grad_in += Wᵀ * grad_out`.
    fn apply_transpose(&self, grad_out: &[f64], rows: usize, cols: usize, grad_in: &mut [f64]) {
        let n = rows * cols;
        self.taps(|w, dy, dx, o, i| {
            let (src, dst) = (&grad_out[o * n..(o + 1) * n], &mut grad_in[i * n..(i + 1) * n]);
            for_each_shift(rows, cols, dy, dx, |d, s, len| {
                for (a, b) in dst[s..s + len].iter_mut().zip(&src[d..d + len]) {
                    *a += w * b;
                }
            });
        });
    }
}

/// Calls `f(dst_start, src_start, len)` for each row segment where output
/// pixel `(r, c)` reads input pixel `(r + dy, c + dx)` inside the grid.
#[inline]
fn for_each_shift(rows: usize, cols: usize, dy: isize, dx: isize, mut f: impl FnMut(usize, usize, usize)) {
    let r0 = (-dy).max(0) as usize;
    let r1 = (rows as isize - dy.max(0)).max(0) as usize;
    let c0 = (-dx).max(0) as usize;
    let c1 = (cols as isize - dx.max(0)).max(0) as usize;
    if c1 <= c0 {
        return;
    }
    for r in r0..r1 {
        let sr = (r as isize + dy) as usize;
        f(r * cols + c0, sr * cols + (c0 as isize + dx) as usize, c1 - c0);
    }
}

/// Residual convolutional regularizer `x ↦ x + g(x)` on stacked re/im channels.
#[derive(Clone, Debug, PartialEq)]
pub struct SmoothConvNet {
    layers: Vec<ConvLayer>,
    activation: Activation,
    seed: Option<u64>,
}

/// Activation derivatives recorded at a linearization point.
#[derive(Clone, Debug)]
pub(crate) struct NetTape {
    slopes: Vec<Vec<f64>>,
}

impl SmoothConvNet {
    pub fn new(layers: Vec<ConvLayer>, activation: Activation) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::config("model.layers", "empty network"))?;
        let last = layers.last().expect("nonempty");
        if first.c_in != 2 || last.c_out != 2 {
            return Err(Error::shape([2, 2], [first.c_in, last.c_out]));
        }
        for pair in layers.windows(2) {
            if pair[0].c_out != pair[1].c_in {
                return Err(Error::shape([pair[0].c_out], [pair[1].c_in]));
            }
        }
        Ok(Self {
            layers,
            activation,
            seed: None,
        })
    }

    /// Weights drawn `N(0, 1/fan_in)`, hidden biases `N(0, 0.01)`, output bias zero.
    pub fn seeded(arch: &NetArch, seed: u64) -> Result<Self> {
        arch.validate()?;
        let rng = CounterRng::new(seed).derive(0x6e6574);
        let ch = arch.channels();
        let k = arch.kernel;
        let n_layers = ch.len() - 1;
        let layers = (0..n_layers)
            .map(|l| {
                let (c_in, c_out) = (ch[l], ch[l + 1]);
                let std = 1.0 / ((c_in * k * k) as f64).sqrt();
                let mut cur = rng.cursor(2 * l as u64, 0);
                let weights = (0..c_out * c_in * k * k).map(|_| std * cur.normal()).collect();
                let mut cur = rng.cursor(2 * l as u64 + 1, 0);
                let bias = if l + 1 < n_layers {
                    (0..c_out).map(|_| 0.1 * cur.normal()).collect()
                } else {
                    vec![0.0; c_out]
                };
                ConvLayer::new(c_in, c_out, k, weights, bias)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut net = Self::new(layers, arch.activation)?;
        net.seed = Some(seed);
        Ok(net)
    }

    /// All weights and biases zero: the network is the identity map.
    pub fn zeros(arch: &NetArch) -> Result<Self> {
        arch.validate()?;
        let ch = arch.channels();
        let k = arch.kernel;
        let layers = ch
            .windows(2)
            .map(|p| ConvLayer::new(p[0], p[1], k, vec![0.0; p[1] * p[0] * k * k], vec![0.0; p[1]]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers, arch.activation)
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn width(&self) -> usize {
        self.layers.iter().map(|l| l.c_out).max().unwrap_or(2).max(2)
    }

    /// Forward pass on a `2 × rows × cols` buffer; optionally records the
    /// activation slopes needed by [`Self::jvp`] and [`Self::vjp`].
    pub(crate) fn forward(&self, x: &[f64], rows: usize, cols: usize, record: bool) -> (Vec<f64>, Option<NetTape>) {
        let n = rows * cols;
        let mut cur = x.to_vec();
        let mut next = vec![0.0; self.width() * n];
        let mut slopes = Vec::new();
        for (l, layer) in self.layers.iter().enumerate() {
            let out = &mut next[..layer.c_out * n];
            layer.apply(&cur, rows, cols, true, out);
            if l + 1 < self.layers.len() {
                let mut d = if record { vec![0.0; out.len()] } else { Vec::new() };
                for (k, z) in out.iter_mut().enumerate() {
                    let (a, da) = self.activation.eval(*z);
                    *z = a;
                    if record {
                        d[k] = da;
                    }
                }
                if record {
                    slopes.push(d);
                }
            }
            cur.clear();
            cur.extend_from_slice(out);
        }
        for (c, xi) in cur.iter_mut().zip(x) {
            *c += xi;
        }
        (cur, record.then_some(NetTape { slopes }))
    }

    pub(crate) fn jvp(&self, tape: &NetTape, u: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        let n = rows * cols;
        let mut cur = u.to_vec();
        let mut next = vec![0.0; self.width() * n];
        for (l, layer) in self.layers.iter().enumerate() {
            let out = &mut next[..layer.c_out * n];
            layer.apply(&cur, rows, cols, false, out);
            if let Some(d) = tape.slopes.get(l) {
                out.iter_mut().zip(d).for_each(|(t, s)| *t *= s);
            }
            cur.clear();
            cur.extend_from_slice(out);
        }
        for (c, ui) in cur.iter_mut().zip(u) {
            *c += ui;
        }
        cur
    }

    pub(crate) fn vjp(&self, tape: &NetTape, w: &[f64], rows: usize, cols: usize) -> Vec<f64> {
        let n = rows * cols;
        let mut grad = w.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            if let Some(d) = tape.slopes.get(l) {
                grad.iter_mut().zip(d).for_each(|(g, s)| *g *= s);
            }
            let mut below = vec![0.0; layer.c_in * n];
            layer.apply_transpose(&grad, rows, cols, &mut below);
            grad = below;
        }
        for (g, wi) in grad.iter_mut().zip(w) {
            *g += wi;
        }
        grad
    }

    /// Text manifest describing layer shapes, activation and seed.
    pub fn manifest(&self) -> Sidecar {
        let mut m = Sidecar::new();
        m.set("activation", self.activation);
        m.set("layers", self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let s = layer.shape();
            m.set(&format!("layer{l}"), format!("{} {} {} {}", s[0], s[1], s[2], s[3]));
        }
        m.set(
            "seed",
            self.seed.map_or_else(|| "none".to_string(), |s| s.to_string()),
        );
        m
    }

    /// Writes `stem.meta` plus one weight and one bias array per layer.
    pub fn save(&self, stem: &Path) -> Result<Vec<PathBuf>> {
        let mut files = vec![self.manifest().write(stem)?];
        for (l, layer) in self.layers.iter().enumerate() {
            files.extend(io::write_real(&layer_stem(stem, l, "w"), &layer.shape(), &layer.weights)?);
            files.extend(io::write_real(&layer_stem(stem, l, "b"), &[layer.c_out], &layer.bias)?);
        }
        Ok(files)
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let meta = Sidecar::read(stem)?;
        let bad = |reason: &str| Error::Format {
            path: stem.to_path_buf(),
            reason: reason.to_string(),
        };
        let activation: Activation = meta
            .get("activation")
            .ok_or_else(|| bad("missing activation"))?
            .parse()
            .map_err(|_| bad("unknown activation"))?;
        let n_layers: usize = meta
            .get("layers")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing layer count"))?;
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (dims, weights) = io::read_real(&layer_stem(stem, l, "w"))?;
            let (_, bias) = io::read_real(&layer_stem(stem, l, "b"))?;
            if dims.len() != 4 || dims[2] != dims[3] {
                return Err(bad("weight arrays must be c_out × c_in × k × k"));
            }
            layers.push(ConvLayer::new(dims[1], dims[0], dims[2], weights, bias)?);
        }
        let mut net = Self::new(layers, activation)?;
        net.seed = meta.get("seed").and_then(|s| s.parse().ok());
        Ok(net)
    }
}

fn layer_stem(stem: &Path, l: usize, part: &str) -> PathBuf {
    let name = stem.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.with_file_name(format!("{name}.layer{l}.{part}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rand_vec(len: usize, seed: u64) -> Vec<f64> {
        let mut c = CounterRng::new(seed).cursor(0, 0);
        (0..len).map(|_| c.normal()).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn conv_matches_direct_loop() {
        let (rows, cols) = (5, 7);
        let n = rows * cols;
        let layer = ConvLayer::new(2, 3, 3, rand_vec(54, 1), rand_vec(3, 2)).unwrap();
        let x = rand_vec(2 * n, 3);
        let mut out = vec![0.0; 3 * n];
        layer.apply(&x, rows, cols, true, &mut out);
        for o in 0..3 {
            for r in 0..rows as isize {
                for c in 0..cols as isize {
                    let mut acc = layer.bias[o];
                    for i in 0..2 {
                        for ky in 0..3isize {
                            for kx in 0..3isize {
                                let (sr, sc) = (r + ky - 1, c + kx - 1);
                                if sr >= 0 && sr < rows as isize && sc >= 0 && sc < cols as isize {
                                    let w = layer.weights[((o * 2 + i) * 3 + ky as usize) * 3 + kx as usize];
                                    acc += w * x[i * n + (sr as usize) * cols + sc as usize];
                                }
                            }
                        }
                    }
                    let got = out[o * n + r as usize * cols + c as usize];
                    assert!((got - acc).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn conv_transpose_is_adjoint() {
        let (rows, cols) = (6, 4);
        let n = rows * cols;
        let layer = ConvLayer::new(3, 2, 5, rand_vec(150, 4), vec![0.0; 2]).unwrap();
        let x = rand_vec(3 * n, 5);
        let g = rand_vec(2 * n, 6);
        let mut y = vec![0.0; 2 * n];
        layer.apply(&x, rows, cols, false, &mut y);
        let mut xt = vec![0.0; 3 * n];
        layer.apply_transpose(&g, rows, cols, &mut xt);
        assert!((dot(&y, &g) - dot(&x, &xt)).abs() < 1e-12 * dot(&y, &y).sqrt() * dot(&g, &g).sqrt());
    }

    #[test]
    fn activation_slopes_match_finite_differences() {
        for act in [Activation::Silu, Activation::Tanh] {
            for z in [-3.0, -0.4, 0.0, 0.7, 2.5] {
                let h = 1e-6;
                let fd = (act.eval(z + h).0 - act.eval(z - h).0) / (2.0 * h);
                assert!((fd - act.eval(z).1).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_network_is_identity() {
        let net = SmoothConvNet::zeros(&NetArch::default()).unwrap();
        let x = rand_vec(2 * 64, 7);
        assert_eq!(net.forward(&x, 8, 8, false).0, x);
    }

    #[test]
    fn seeded_weights_are_deterministic_and_fan_in_scaled() {
        let arch = NetArch {
            hidden: 16,
            ..NetArch::default()
        };
        let a = SmoothConvNet::seeded(&arch, 9).unwrap();
        assert_eq!(a, SmoothConvNet::seeded(&arch, 9).unwrap());
        assert_ne!(a, SmoothConvNet::seeded(&arch, 10).unwrap());
        let w = a.layers()[1].weights();
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert!((var * 16.0 * 9.0 - 1.0).abs() < 0.15, "{var}");
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let net = SmoothConvNet::seeded(&NetArch::default(), 3).unwrap();
        let stem = dir.path().join("reg");
        net.save(&stem).unwrap();
        assert_eq!(SmoothConvNet::load(&stem).unwrap(), net);
    }
}
