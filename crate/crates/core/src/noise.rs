//! Correlated multi-coil k-space noise.
//!
//! Coil noise is modelled as a weighted sum of independent Gaussian sources,
//! which yields a Hermitian PSD coil covariance `Σ̃ = W·diag(σ²)·Wᴴ`. Noise at
//! different k-space locations is independent, so the full sample covariance
//! is the block-diagonal replication of `Σ̃` over all frequencies. That matrix
//! is never formed: [`SampleCovariance`] applies the coil factor frequency by
//! frequency.
//!
//! Multi-coil k-space arrays are laid out `coils × rows × cols`, so the coil
//! vector of frequency `f` sits at stride `rows·cols`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::io::Sidecar;
use crate::numerics::{cholesky, CholeskyFactor, ComplexArray, HermitianMatrix};
use crate::rng::CounterRng;

/// Independent noise sources coupled into coils with complex weights.
#[derive(Clone, Debug)]
pub struct NoiseSourceModel {
    sigmas: Vec<f64>,
    weights: ComplexArray,
}

impl NoiseSourceModel {
    /// `weights` is `n_coils × n_sources`.
    pub fn new(sigmas: Vec<f64>, weights: ComplexArray) -> Result<Self> {
        let (nc, ns) = weights.dims2()?;
        if ns == 0 || nc == 0 || sigmas.len() != ns {
            return Err(Error::shape([nc, sigmas.len()], weights.shape()));
        }
        if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::config("sigmas", "must be finite and nonnegative"));
        }
        Ok(Self { sigmas, weights })
    }

    /// Seeded sources with complex-normal couplings, rescaled so the mean coil
    /// variance equals `mean_variance`.
    pub fn random(n_coils: usize, n_sources: usize, mean_variance: f64, seed: u64) -> Result<Self> {
        let rng = CounterRng::new(seed).derive(0x6e6f_6973_65);
        let sigmas: Vec<f64> = (0..n_sources)
            .map(|t| 0.5 + rng.uniform(1, t as u64))
            .collect();
        let weights = ComplexArray::from_fn(&[n_coils, n_sources], |k| rng.complex_normal(0, k as u64));
        let mut model = Self::new(sigmas, weights)?;
        let cov = model.covariance_matrix();
        let mean = cov.trace() / n_coils as f64;
        if mean > 0.0 {
            let s = (mean_variance / mean).sqrt();
            model.sigmas.iter_mut().for_each(|x| *x *= s);
        }
        Ok(model)
    }

    pub fn n_coils(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn n_sources(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn weights(&self) -> &ComplexArray {
        &self.weights
    }

    fn covariance_matrix(&self) -> HermitianMatrix {
        let (nc, ns) = (self.n_coils(), self.n_sources());
        let w = self.weights.data();
        let mut m = ComplexArray::zeros(&[nc, nc]);
        for g in 0..nc {
            for h in 0..nc {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..ns {
                    acc += w[g * ns + t] * w[h * ns + t].conj() * (self.sigmas[t] * self.sigmas[t]);
                }
                m.data_mut()[g * nc + h] = acc;
            }
        }
        HermitianMatrix::symmetrized(&m).expect("square by construction")
    }
}

/// Where a coil covariance came from.
#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    Sources { n_sources: usize },
    Estimated {
        corner_fraction: f64,
        grid: [usize; 3],
        samples: usize,
    },
    Explicit,
}

/// Coil-level covariance `Σ̃`, its Cholesky factor, and a noise scale `α`.
///
/// The effective covariance is `α·Σ̃`; the effective factor is `√α` times the
/// stored factor, so rescaling never refactorizes.
#[derive(Clone, Debug)]
pub struct CoilCovariance {
    matrix: HermitianMatrix,
    factor: CholeskyFactor,
    scale: f64,
    provenance: Provenance,
}

impl CoilCovariance {
    pub fn from_matrix(matrix: HermitianMatrix) -> Result<Self> {
        Self::with_provenance(matrix, Provenance::Explicit)
    }

    fn with_provenance(matrix: HermitianMatrix, provenance: Provenance) -> Result<Self> {
        let factor = cholesky(&matrix, matrix.default_jitter())?;
        Ok(Self {
            matrix,
            factor,
            scale: 1.0,
            provenance,
        })
    }

    pub fn identity(n_coils: usize) -> Self {
        Self::from_matrix(HermitianMatrix::identity(n_coils)).expect("identity is PSD")
    }

    pub fn n_coils(&self) -> usize {
        self.matrix.dim()
    }

    /// Unscaled coil covariance `Σ̃`.
    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    /// Effective covariance `α·Σ̃`.
    pub fn scaled_matrix(&self) -> HermitianMatrix {
        self.matrix.scaled(self.scale)
    }

    /// Factor of the effective covariance.
    pub fn factor(&self) -> CholeskyFactor {
        self.factor.scaled(self.scale.sqrt())
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_scale(&self, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::config("noise.alpha", "must be positive"));
        }
        Ok(Self {
            scale: alpha,
            ..self.clone()
        })
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn sidecar(&self) -> Sidecar {
        let mut s = Sidecar::new();
        s.set("n_coils", self.n_coils()).set("alpha", self.scale);
        match &self.provenance {
            Provenance::Sources { n_sources } => {
                s.set("provenance", "sources").set("n_sources", n_sources);
            }
            Provenance::Estimated {
                corner_fraction,
                grid,
                samples,
            } => {
                s.set("provenance", "estimated")
                    .set("corner_fraction", corner_fraction)
                    .set("source_grid", format!("{} {} {}", grid[0], grid[1], grid[2]))
                    .set("samples", samples);
            }
            Provenance::Explicit => {
                s.set("provenance", "explicit");
            }
        }
        s
    }
}

/// `Σ̃ = W·diag(σ²)·Wᴴ`.
pub fn build_coil_covariance(src: &NoiseSourceModel) -> Result<CoilCovariance> {
    CoilCovariance::with_provenance(
        src.covariance_matrix(),
        Provenance::Sources {
            n_sources: src.n_sources(),
        },
    )
}

/// Signed frequency index of FFT bin `k` on an axis of length `n`.
pub(crate) fn signed_freq(k: usize, n: usize) -> isize {
    if k < n.div_ceil(2) {
        k as isize
    } else {
        k as isize - n as isize
    }
}

/// Indices of the `round(fraction · rows · cols)` grid points farthest from
/// the k-space centre in normalised Chebyshev distance (ties broken by index).
pub fn outer_kspace_points(rows: usize, cols: usize, fraction: f64) -> Vec<usize> {
    let mut pts: Vec<(f64, usize)> = (0..rows * cols)
        .map(|k| {
            let fy = signed_freq(k / cols, rows).unsigned_abs() as f64 / (rows as f64 / 2.0);
            let fx = signed_freq(k % cols, cols).unsigned_abs() as f64 / (cols as f64 / 2.0);
            (fy.max(fx), k)
        })
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let take = (fraction * (rows * cols) as f64).round() as usize;
    pts.into_iter().take(take).map(|(_, k)| k).collect()
}

/// Coil covariance estimated from the outermost k-space samples.
///
/// Uses the mean-subtracted sample covariance with `1/(P−1)` normalisation,
/// explicitly Hermitian-symmetrised.
pub fn estimate_coil_covariance(ksp: &ComplexArray, corner_fraction: f64) -> Result<CoilCovariance> {
    let (nc, rows, cols) = ksp.dims3()?;
    if !(corner_fraction > 0.0 && corner_fraction < 1.0) {
        return Err(Error::config("corner_fraction", "must lie in (0, 1)"));
    }
    let pts = outer_kspace_points(rows, cols, corner_fraction);
    let p = pts.len();
    if p < 2 * nc {
        return Err(Error::TooFewSamples { got: p, need: 2 * nc });
    }
    let nf = rows * cols;
    let d = ksp.data();
    let mut mean = vec![Complex64::new(0.0, 0.0); nc];
    for &f in &pts {
        for (c, m) in mean.iter_mut().enumerate() {
            *m += d[c * nf + f];
        }
    }
    mean.iter_mut().for_each(|m| *m /= p as f64);
    let mut acc = ComplexArray::zeros(&[nc, nc]);
    for &f in &pts {
        for a in 0..nc {
            let za = d[a * nf + f] - mean[a];
            for b in 0..nc {
                let zb = d[b * nf + f] - mean[b];
                acc.data_mut()[a * nc + b] += za * zb.conj();
            }
        }
    }
    acc.scale(Complex64::new(1.0 / (p - 1) as f64, 0.0));
    let matrix = HermitianMatrix::symmetrized(&acc)?;
    CoilCovariance::with_provenance(
        matrix,
        Provenance::Estimated {
            corner_fraction,
            grid: [nc, rows, cols],
            samples: p,
        },
    )
}

/// Block-diagonal k-space covariance `I_{n_f} ⊗ α·Σ̃` over a `rows × cols` grid.
#[derive(Clone, Debug)]
pub struct SampleCovariance {
    coil: CoilCovariance,
    factor: CholeskyFactor,
    rows: usize,
    cols: usize,
}

impl SampleCovariance {
    pub fn new(coil: CoilCovariance, rows: usize, cols: usize) -> Self {
        let factor = coil.factor();
        Self {
            coil,
            factor,
            rows,
            cols,
        }
    }

    pub fn coil(&self) -> &CoilCovariance {
        &self.coil
    }

    pub fn n_coils(&self) -> usize {
        self.coil.n_coils()
    }

    pub fn n_freqs(&self) -> usize {
        self.rows * self.cols
    }

    /// Length of a stacked multi-coil k-space vector, `n_f · n_c`.
    pub fn m(&self) -> usize {
        self.n_freqs() * self.n_coils()
    }

    pub fn kspace_shape(&self) -> [usize; 3] {
        [self.n_coils(), self.rows, self.cols]
    }

    pub fn with_scale(&self, alpha: f64) -> Result<Self> {
        Ok(Self::new(self.coil.with_scale(alpha)?, self.rows, self.cols))
    }

    fn check(&self, v: &ComplexArray) -> Result<()> {
        if v.len() != self.m() {
            return Err(Error::shape(self.kspace_shape(), v.shape()));
        }
        Ok(())
    }

    /// Multiplies every frequency's coil vector by the effective factor `σ̃`.
    pub fn apply_factor(&self, v: &ComplexArray) -> Result<ComplexArray> {
        self.check(v)?;
        let mut out = v.clone();
        self.apply_factor_in_place(out.data_mut(), false);
        Ok(out)
    }

    /// Multiplies every frequency's coil vector by `σ̃ᴴ`.
    pub fn apply_factor_adjoint(&self, v: &ComplexArray) -> Result<ComplexArray> {
        self.check(v)?;
        let mut out = v.clone();
        self.apply_factor_in_place(out.data_mut(), true);
        Ok(out)
    }

    pub(crate) fn apply_factor_in_place(&self, data: &mut [Complex64], adjoint: bool) {
        let nc = self.n_coils();
        let nf = self.n_freqs();
        let mut buf = vec![Complex64::new(0.0, 0.0); nc];
        for f in 0..nf {
            for (c, b) in buf.iter_mut().enumerate() {
                *b = data[c * nf + f];
            }
            for r in 0..nc {
                let mut acc = Complex64::new(0.0, 0.0);
                if adjoint {
                    for (c, b) in buf.iter().enumerate().skip(r) {
                        acc += self.factor.get(c, r).conj() * b;
                    }
                } else {
                    for (c, b) in buf.iter().enumerate().take(r + 1) {
                        acc += self.factor.get(r, c) * b;
                    }
                }
                data[r * nf + f] = acc;
            }
        }
    }

    /// Draws `n = σ̃·g` per frequency with `g` standard circular complex normal.
    ///
    /// The draw for coil `c` at frequency `f` lives in slot `f·n_c + c` of
    /// stream `stream` of `rng`, so any subset of frequencies can be generated
    /// independently with identical results.
    pub fn sample_noise_with(&self, rng: &CounterRng, stream: u64) -> ComplexArray {
        let (nc, nf) = (self.n_coils(), self.n_freqs());
        let mut out = ComplexArray::zeros(&self.kspace_shape());
        let data = out.data_mut();
        let mut cursor = rng.cursor(stream, 0);
        for f in 0..nf {
            for c in 0..nc {
                data[c * nf + f] = cursor.complex_normal();
            }
        }
        self.apply_factor_in_place(data, false);
        out
    }
}

pub fn sample_noise(cov: &SampleCovariance, rng_seed: u64) -> ComplexArray {
    cov.sample_noise_with(&CounterRng::new(rng_seed), 0)
}

pub fn apply_factor(cov: &SampleCovariance, v: &ComplexArray) -> Result<ComplexArray> {
    cov.apply_factor(v)
}
