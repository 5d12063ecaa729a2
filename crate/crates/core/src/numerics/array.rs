use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex tensor stored row-major with an explicit shape.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexArray {
    shape: Vec<usize>,
    data: Vec<Complex64>,
}

impl ComplexArray {
    pub fn new(shape: Vec<usize>, data: Vec<Complex64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&d| d == 0) {
            return Err(Error::shape("positive dimensions", &shape));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(Error::shape(len, data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> Complex64) -> Self {
        let len: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..len).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Returns `(rows, cols)` for a 2D array.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            &[r, c] => Ok((r, c)),
            other => Err(Error::shape("2D array", other)),
        }
    }

    /// Returns `(planes, rows, cols)` for a 3D array.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape.as_slice() {
            &[p, r, c] => Ok((p, r, c)),
            other => Err(Error::shape("3D array", other)),
        }
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len: usize = shape.iter().product();
        if len != self.data.len() || shape.contains(&0) {
            return Err(Error::shape(shape, &self.shape));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn ensure_shape(&self, shape: &[usize]) -> Result<()> {
        if self.shape != shape {
            return Err(Error::shape(shape, &self.shape));
        }
        Ok(())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&mut self, factor: Complex64) {
        self.data.iter_mut().for_each(|z| *z *= factor);
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: Complex64, other: &ComplexArray) -> Result<()> {
        other.ensure_shape(&self.shape)?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn sub(&self, other: &ComplexArray) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn add(&self, other: &ComplexArray) -> Result<Self> {
        let mut out = self.clone();
        out.axpy(Complex64::new(1.0, 0.0), other)?;
        Ok(out)
    }

    pub fn conj(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Conjugate transpose of a 2D array.
    pub fn adjoint(&self) -> Result<Self> {
        let (r, c) = self.dims2()?;
        Ok(Self::from_fn(&[c, r], |k| {
            let (i, j) = (k / r, k % r);
            self.data[j * c + i].conj()
        }))
    }

    /// Dense matrix product of two 2D arrays.
    pub fn matmul(&self, other: &ComplexArray) -> Result<Self> {
        let (m, k) = self.dims2()?;
        let (k2, n) = other.dims2()?;
        if k != k2 {
            return Err(Error::shape([k, n], [k2, n]));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); m * n];
        for i in 0..m {
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let row = &other.data[p * n..(p + 1) * n];
                for (o, b) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Self::new(vec![m, n], out)
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(&[dim, dim], |k| {
            if k / dim == k % dim {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

/// `Σ conj(a_i) b_i`.
pub fn inner(a: &ComplexArray, b: &ComplexArray) -> Result<Complex64> {
    b.ensure_shape(a.shape())?;
    Ok(inner_slices(a.data(), b.data()))
}

pub(crate) fn inner_slices(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Real part of the complex inner product: the Euclidean inner product on the
/// stacked real/imaginary representation.
pub fn real_inner(a: &ComplexArray, b: &ComplexArray) -> Result<f64> {
    Ok(inner(a, b)?.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inner_of_basis_vector_is_one() {
        let mut e0 = ComplexArray::zeros(&[4]);
        e0.data_mut()[0] = c(1.0, 0.0);
        assert_eq!(inner(&e0, &e0).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn inner_conjugates_first_argument() {
        let a = ComplexArray::new(vec![2], vec![c(0.0, 1.0), c(0.0, 0.0)]).unwrap();
        let b = ComplexArray::new(vec![2], vec![c(1.0, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(inner(&a, &b).unwrap(), c(0.0, -1.0));
    }

    #[test]
    fn inner_matches_naive_loop() {
        let rng = CounterRng::new(9);
        let a = ComplexArray::from_fn(&[16], |i| rng.complex_normal(0, i as u64));
        let b = ComplexArray::from_fn(&[16], |i| rng.complex_normal(1, i as u64));
        let mut re = 0.0;
        let mut im = 0.0;
        for i in 0..16 {
            let (x, y) = (a.data()[i], b.data()[i]);
            re += x.re * y.re + x.im * y.im;
            im += x.re * y.im - x.im * y.re;
        }
        let got = inner(&a, &b).unwrap();
        assert!((got.re - re).abs() < 1e-14 && (got.im - im).abs() < 1e-14);
    }

    #[test]
    fn inner_rejects_shape_mismatch() {
        let a = ComplexArray::zeros(&[4]);
        let b = ComplexArray::zeros(&[5]);
        assert!(matches!(inner(&a, &b), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn new_rejects_bad_lengths() {
        assert!(ComplexArray::new(vec![2, 2], vec![c(0.0, 0.0); 3]).is_err());
        assert!(ComplexArray::new(vec![0], vec![]).is_err());
    }

    #[test]
    fn adjoint_and_matmul() {
        let a = ComplexArray::new(vec![2, 2], vec![c(1.0, 1.0), c(2.0, 0.0), c(0.0, -1.0), c(3.0, 0.0)])
            .unwrap();
        let ah = a.adjoint().unwrap();
        assert_eq!(ah.data()[1], c(0.0, 1.0));
        let p = a.matmul(&ComplexArray::identity(2)).unwrap();
        assert_eq!(p, a);
    }
}
