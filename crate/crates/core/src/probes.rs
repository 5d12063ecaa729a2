//! Random probe vectors for stochastic diagonal estimation.
//!
//! Probe column `j` is stream `j` of a counter-addressed generator and row
//! `i` is slot `i`, so any column can be regenerated on its own, in any
//! order, on any thread.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{CholeskyFactor, ComplexArray, HermitianMatrix};
use crate::rng::CounterRng;

/// Tag mixed into the seed so probes never share streams with noise draws.
const PROBE_TAG: u64 = 0x7072_6f62_65;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ProbeDistribution {
    /// Circular complex normal, `re, im ~ N(0, 1/2)`.
    ComplexGaussian,
    /// `e^{iθ}` with `θ ~ U[0, 2π)`.
    #[default]
    RandomPhase,
}

impl ProbeDistribution {
    pub const ALL: [ProbeDistribution; 2] = [ProbeDistribution::ComplexGaussian, ProbeDistribution::RandomPhase];

    pub fn name(self) -> &'static str {
        match self {
            ProbeDistribution::ComplexGaussian => "complex-gaussian",
            ProbeDistribution::RandomPhase => "random-phase",
        }
    }

    /// `E|v|⁴` for a single entry.
    pub fn fourth_moment(self) -> f64 {
        match self {
            ProbeDistribution::ComplexGaussian => 2.0,
            ProbeDistribution::RandomPhase => 1.0,
        }
    }
}

impl fmt::Display for ProbeDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProbeDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProbeDistribution::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::config("distribution", format!("unknown probe distribution `{s}`")))
    }
}

/// Seeded source of probe columns.
#[derive(Clone, Copy, Debug)]
pub struct ProbeSource {
    rng: CounterRng,
    distribution: ProbeDistribution,
    seed: u64,
}

impl ProbeSource {
    pub fn new(distribution: ProbeDistribution, seed: u64) -> Self {
        Self {
            rng: CounterRng::new(seed).derive(PROBE_TAG),
            distribution,
            seed,
        }
    }

    pub fn distribution(&self) -> ProbeDistribution {
        self.distribution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fills `out` with column `j`.
    pub fn fill_column(&self, j: usize, out: &mut [Complex64]) {
        let mut cur = self.rng.cursor(j as u64, 0);
        match self.distribution {
            ProbeDistribution::ComplexGaussian => out.iter_mut().for_each(|v| *v = cur.complex_normal()),
            ProbeDistribution::RandomPhase => out.iter_mut().for_each(|v| *v = cur.phase()),
        }
    }

    pub fn column(&self, m: usize, j: usize) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); m];
        self.fill_column(j, &mut v);
        v
    }
}

/// Materialized `m × S` probe matrix.
#[derive(Clone, Debug)]
pub struct ProbeMatrix {
    distribution: ProbeDistribution,
    seed: u64,
    data: ComplexArray,
}

impl ProbeMatrix {
    pub fn m(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn s(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn distribution(&self) -> ProbeDistribution {
        self.distribution
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Row-major `m × S`.
    pub fn data(&self) -> &ComplexArray {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data.data()[i * self.s() + j]
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.m()).map(|i| self.get(i, j)).collect()
    }
}

pub fn gen_probes(m: usize, s: usize, distribution: ProbeDistribution, seed: u64) -> Result<ProbeMatrix> {
    if m == 0 || s == 0 {
        return Err(Error::config("probes", "need m ≥ 1 and S ≥ 1"));
    }
    let src = ProbeSource::new(distribution, seed);
    let mut data = ComplexArray::zeros(&[m, s]);
    let mut col = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..s {
        src.fill_column(j, &mut col);
        for (i, v) in col.iter().enumerate() {
            data.data_mut()[i * s + j] = *v;
        }
    }
    Ok(ProbeMatrix {
        distribution,
        seed,
        data,
    })
}

/// Per-index variance of the single-probe estimate `Y_i = conj(v_i)·(Σv)_i`:
/// `Σ_j |Σ_ij|²` for Gaussian probes, minus `|Σ_ii|²` for random-phase probes.
pub fn estimator_variance_closed_form(sigma: &HermitianMatrix, distribution: ProbeDistribution) -> Vec<f64> {
    let n = sigma.dim();
    (0..n)
        .map(|i| {
            let row: f64 = (0..n).map(|j| sigma.get(i, j).norm_sqr()).sum();
            // The diagonal term contributes (E|v|⁴ − 1)·|Σ_ii|².
            row + (distribution.fourth_moment() - 2.0) * sigma.get(i, i).norm_sqr()
        })
        .collect()
}

/// Per-index variance of the single-probe estimate `|(L v)_i|²` for
/// `Σ = L Lᴴ`: `Σ_ii²` for Gaussian probes and `Σ_ii² − Σ_j |L_ij|⁴` for
/// random-phase probes.
pub fn factor_estimator_variance_closed_form(factor: &CholeskyFactor, distribution: ProbeDistribution) -> Vec<f64> {
    let n = factor.dim();
    (0..n)
        .map(|i| {
            let sii: f64 = (0..n).map(|j| factor.get(i, j).norm_sqr()).sum();
            let quartic: f64 = (0..n).map(|j| factor.get(i, j).norm_sqr().powi(2)).sum();
            sii * sii - (2.0 - distribution.fourth_moment()) * quartic
        })
        .collect()
}

/// Single-probe Hadamard estimate `conj(v) ⊙ (Σ v)` (complex; its real part
/// is the diagonal estimate).
pub fn hadamard_sample(sigma: &HermitianMatrix, v: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = sigma.dim();
    if v.len() != n {
        return Err(Error::shape([n], [v.len()]));
    }
    Ok((0..n)
        .map(|i| {
            let sv: Complex64 = (0..n).map(|j| sigma.get(i, j) * v[j]).sum();
            v[i].conj() * sv
        })
        .collect())
}
