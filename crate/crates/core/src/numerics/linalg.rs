use num_complex::Complex64;

use super::ComplexArray;
use crate::error::{Error, Result};

/// Absolute tolerance for the Hermitian symmetry check.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Square complex matrix with `a[i][j] == conj(a[j][i])`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    entries: ComplexArray,
}

impl HermitianMatrix {
    pub fn new(entries: ComplexArray) -> Result<Self> {
        let (r, c) = entries.dims2()?;
        if r != c {
            return Err(Error::shape([r, r], [r, c]));
        }
        let d = entries.data();
        for i in 0..r {
            for j in i..r {
                let dev = (d[i * r + j] - d[j * r + i].conj()).norm();
                if dev > HERMITIAN_TOL {
                    return Err(Error::NotHermitian { i, j, deviation: dev });
                }
            }
        }
        Ok(Self { dim: r, entries })
    }

    /// Averages a square matrix with its conjugate transpose.
    pub fn symmetrized(entries: &ComplexArray) -> Result<Self> {
        let (r, c) = entries.dims2()?;
        if r != c {
            return Err(Error::shape([r, r], [r, c]));
        }
        let d = entries.data();
        let sym = ComplexArray::from_fn(&[r, r], |k| {
            let (i, j) = (k / r, k % r);
            (d[i * r + j] + d[j * r + i].conj()) * 0.5
        });
        Ok(Self { dim: r, entries: sym })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            entries: ComplexArray::identity(dim),
        }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self {
            dim: n,
            entries: ComplexArray::from_fn(&[n, n], |k| {
                if k / n == k % n {
                    Complex64::new(diag[k / n], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    /// Seeded `B Bᴴ` with `B` a `dim × rank` complex-normal matrix.
    pub fn random_psd(dim: usize, rank: usize, seed: u64) -> Self {
        let rng = crate::rng::CounterRng::new(seed).derive(0x7073_64);
        let b = ComplexArray::from_fn(&[dim, rank], |k| rng.complex_normal(0, k as u64));
        Self::symmetrized(&b.matmul(&b.adjoint().expect("2D")).expect("conformable")).expect("square")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &ComplexArray {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries.data()[i * self.dim + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i).re).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.scaled(Complex64::new(factor, 0.0)),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.entries.norm()
    }

    /// Default diagonal tolerance used by [`cholesky`]: `1e-12 · trace / dim`.
    pub fn default_jitter(&self) -> f64 {
        1e-12 * self.trace().abs() / self.dim as f64
    }
}

/// Lower-triangular factor `L` with `L Lᴴ` reproducing the source matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    lower: ComplexArray,
}

impl CholeskyFactor {
    pub fn from_lower(lower: ComplexArray) -> Result<Self> {
        let (r, c) = lower.dims2()?;
        if r != c {
            return Err(Error::shape([r, r], [r, c]));
        }
        let d = lower.data();
        for i in 0..r {
            for j in i + 1..r {
                if d[i * r + j] != Complex64::new(0.0, 0.0) {
                    return Err(Error::shape("lower-triangular matrix", (i, j)));
                }
            }
        }
        Ok(Self { dim: r, lower })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> &ComplexArray {
        &self.lower
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.lower.data()[i * self.dim + j]
    }

    /// `L Lᴴ`.
    pub fn reconstruct(&self) -> ComplexArray {
        let n = self.dim;
        ComplexArray::from_fn(&[n, n], |k| {
            let (i, j) = (k / n, k % n);
            (0..=i.min(j)).map(|p| self.get(i, p) * self.get(j, p).conj()).sum()
        })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            lower: self.lower.scaled(Complex64::new(factor, 0.0)),
        }
    }
}

/// Cholesky factorization of a Hermitian positive semidefinite matrix.
///
/// Pivots in `[-jitter, jitter]` are treated as exact zeros: the corresponding
/// column of the factor is set to zero, so rank-deficient inputs factor
/// without diagonal loading. A pivot below `-jitter` is reported as `NotPsd`.
pub fn cholesky(mat: &HermitianMatrix, jitter: f64) -> Result<CholeskyFactor> {
    let n = mat.dim();
    let a = mat.entries().data();
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let mut pivot = a[j * n + j].re;
        for p in 0..j {
            pivot -= l[j * n + p].norm_sqr();
        }
        if pivot < -jitter {
            return Err(Error::NotPsd {
                index: j,
                pivot,
                jitter,
            });
        }
        if pivot <= jitter {
            continue;
        }
        let d = pivot.sqrt();
        l[j * n + j] = Complex64::new(d, 0.0);
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for p in 0..j {
                s -= l[i * n + p] * l[j * n + p].conj();
            }
            l[i * n + j] = s / d;
        }
    }
    Ok(CholeskyFactor {
        dim: n,
        lower: ComplexArray::new(vec![n, n], l)?,
    })
}

/// Relative Frobenius error `‖L Lᴴ − Σ‖_F / ‖Σ‖_F` (absolute when `Σ = 0`).
pub fn reconstruction_error(mat: &HermitianMatrix, factor: &CholeskyFactor) -> f64 {
    let diff = factor.reconstruct().sub(mat.entries()).expect("same shape");
    let scale = mat.frobenius();
    if scale == 0.0 {
        diff.norm()
    } else {
        diff.norm() / scale
    }
}
