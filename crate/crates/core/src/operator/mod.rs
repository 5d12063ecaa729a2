//! The multi-coil imaging operator `A = M·F·S` and its adjoint.
//!
//! `S` multiplies the image by each coil map, `F` is the unitary 2D DFT and
//! `M` zeroes unsampled frequencies. k-space is stored on the full grid with
//! explicit zeros at unsampled locations, so the operator maps an image
//! `rows × cols` to `coils × rows × cols`.

mod coils;
mod mask;

pub use coils::{coil_angle, coil_center, make_birdcage_maps, SensitivityMaps, COIL_RING_RADIUS};
pub use mask::{make_mask, MaskSpec, SamplingMask, Scheme, ACCELERATION_TOL, DEFAULT_CALIB_FRACTION};

use crate::error::{Error, Result};
use crate::numerics::{ComplexArray, Dft2};

#[derive(Clone, Debug)]
pub struct ImagingOperator {
    maps: SensitivityMaps,
    mask: SamplingMask,
    dft: Dft2,
}

impl ImagingOperator {
    pub fn new(maps: SensitivityMaps, mask: SamplingMask) -> Result<Self> {
        if maps.rows() != mask.rows() || maps.cols() != mask.cols() {
            return Err(Error::shape(
                [mask.rows(), mask.cols()],
                [maps.rows(), maps.cols()],
            ));
        }
        let dft = Dft2::new(maps.rows(), maps.cols());
        Ok(Self { maps, mask, dft })
    }

    pub fn maps(&self) -> &SensitivityMaps {
        &self.maps
    }

    pub fn mask(&self) -> &SamplingMask {
        &self.mask
    }

    pub fn rows(&self) -> usize {
        self.maps.rows()
    }

    pub fn cols(&self) -> usize {
        self.maps.cols()
    }

    pub fn n_coils(&self) -> usize {
        self.maps.n_coils()
    }

    pub fn image_shape(&self) -> [usize; 2] {
        [self.rows(), self.cols()]
    }

    pub fn kspace_shape(&self) -> [usize; 3] {
        [self.n_coils(), self.rows(), self.cols()]
    }

    /// Image dimension `n`.
    pub fn n(&self) -> usize {
        self.rows() * self.cols()
    }

    /// Stacked k-space dimension `m = n_f · n_c` on the full grid.
    pub fn m(&self) -> usize {
        self.n() * self.n_coils()
    }

    /// `y_γ = M ⊙ F(map_γ ⊙ x)`.
    pub fn forward(&self, x: &ComplexArray) -> Result<ComplexArray> {
        x.ensure_shape(&self.image_shape())?;
        let n = self.n();
        let mut out = ComplexArray::zeros(&self.kspace_shape());
        for (c, plane) in out.data_mut().chunks_mut(n).enumerate() {
            for ((o, s), v) in plane.iter_mut().zip(self.maps.coil(c)).zip(x.data()) {
                *o = s * v;
            }
            self.dft.forward_in_place(plane);
        }
        self.mask.apply(out.data_mut());
        Ok(out)
    }

    /// `x = Σ_γ conj(map_γ) ⊙ F⁻¹(M ⊙ y_γ)`.
    pub fn adjoint(&self, y: &ComplexArray) -> Result<ComplexArray> {
        y.ensure_shape(&self.kspace_shape())?;
        let n = self.n();
        let mut buf = y.clone();
        self.mask.apply(buf.data_mut());
        let mut out = ComplexArray::zeros(&self.image_shape());
        for (c, plane) in buf.data_mut().chunks_mut(n).enumerate() {
            self.dft.inverse_in_place(plane);
            for ((o, s), v) in out.data_mut().iter_mut().zip(self.maps.coil(c)).zip(plane.iter()) {
                *o += s.conj() * v;
            }
        }
        Ok(out)
    }

    /// `Aᴴ A x`.
    pub fn normal(&self, x: &ComplexArray) -> Result<ComplexArray> {
        self.adjoint(&self.forward(x)?)
    }
}

pub fn forward(op: &ImagingOperator, x: &ComplexArray) -> Result<ComplexArray> {
    op.forward(x)
}

pub fn adjoint(op: &ImagingOperator, y: &ComplexArray) -> Result<ComplexArray> {
    op.adjoint(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{inner, unitary_dft, Complex64};
    use crate::rng::CounterRng;

    fn random(shape: &[usize], seed: u64) -> ComplexArray {
        let rng = CounterRng::new(seed);
        ComplexArray::from_fn(shape, |k| rng.complex_normal(0, k as u64))
    }

    fn op(n_coils: usize, scheme: Scheme, r: f64, size: usize, seed: u64) -> ImagingOperator {
        let maps = make_birdcage_maps(n_coils, size, size).unwrap();
        let mask = make_mask(&MaskSpec::new(scheme, r, size, size, seed)).unwrap();
        ImagingOperator::new(maps, mask).unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let a = op(2, Scheme::Random1d, 2.0, 8, 0);
        assert_eq!(a.forward(&ComplexArray::zeros(&[8, 8])).unwrap().norm(), 0.0);
        assert_eq!(a.adjoint(&ComplexArray::zeros(&[2, 8, 8])).unwrap().norm(), 0.0);
    }

    #[test]
    fn reduces_to_dft_for_single_unit_coil() {
        let a = ImagingOperator::new(SensitivityMaps::unit(8, 8), SamplingMask::full(8, 8)).unwrap();
        let x = random(&[8, 8], 1);
        let y = a.forward(&x).unwrap();
        let f = unitary_dft(&x).unwrap();
        assert!(y.reshape(&[8, 8]).unwrap().sub(&f).unwrap().norm() < 1e-12 * x.norm());
        let back = a.adjoint(&a.forward(&x).unwrap()).unwrap();
        assert!(back.sub(&x).unwrap().norm() < 1e-12 * x.norm());
    }

    #[test]
    fn dot_product_adjoint_test() {
        let a = op(2, Scheme::PoissonDisc2d, 2.0, 8, 13);
        for s in 0..20 {
            let x = random(&[8, 8], 2 * s);
            let y = random(&[2, 8, 8], 2 * s + 1);
            let lhs = inner(&a.forward(&x).unwrap(), &y).unwrap();
            let rhs = inner(&x, &a.adjoint(&y).unwrap()).unwrap();
            assert!((lhs - rhs).norm() <= 1e-11 * x.norm() * y.norm());
        }
    }

    #[test]
    fn linearity() {
        let a = op(4, Scheme::UniformRandom2d, 4.0, 16, 3);
        let (x, z) = (random(&[16, 16], 4), random(&[16, 16], 5));
        let (ca, cb) = (Complex64::new(0.3, -1.2), Complex64::new(-2.0, 0.5));
        let mut comb = x.scaled(ca);
        comb.axpy(cb, &z).unwrap();
        let lhs = a.forward(&comb).unwrap();
        let mut rhs = a.forward(&x).unwrap().scaled(ca);
        rhs.axpy(cb, &a.forward(&z).unwrap()).unwrap();
        assert!(lhs.sub(&rhs).unwrap().norm() <= 1e-12 * lhs.norm());
    }

    #[test]
    fn matches_materialized_matrix() {
        let size = 12;
        let a = op(4, Scheme::UniformRandom2d, 4.0, size, 11);
        let n = size * size;
        // Column j of the explicit matrix is A e_j.
        let cols: Vec<ComplexArray> = (0..n)
            .map(|j| {
                let mut e = ComplexArray::zeros(&[size, size]);
                e.data_mut()[j] = Complex64::new(1.0, 0.0);
                a.forward(&e).unwrap()
            })
            .collect();
        let x = random(&[size, size], 11);
        let mut explicit = ComplexArray::zeros(&a.kspace_shape());
        for (j, col) in cols.iter().enumerate() {
            explicit.axpy(x.data()[j], col).unwrap();
        }
        let y = a.forward(&x).unwrap();
        assert!(y.sub(&explicit).unwrap().norm() <= 1e-12 * y.norm());
        // Adjoint against the conjugate transpose of the same columns.
        let w = random(&a.kspace_shape(), 12);
        let ah = a.adjoint(&w).unwrap();
        for (j, col) in cols.iter().enumerate() {
            assert!((ah.data()[j] - inner(col, &w).unwrap()).norm() <= 1e-12 * w.norm());
        }
    }

    #[test]
    fn shape_errors() {
        let a = op(2, Scheme::Uniform1d, 2.0, 8, 0);
        assert!(a.forward(&ComplexArray::zeros(&[8, 9])).is_err());
        assert!(a.adjoint(&ComplexArray::zeros(&[3, 8, 8])).is_err());
        let maps = make_birdcage_maps(2, 8, 8).unwrap();
        assert!(ImagingOperator::new(maps, SamplingMask::full(16, 16)).is_err());
    }
}
