//! Unitary 2D discrete Fourier transform.
//!
//! Both directions carry a `1/√(rows·cols)` factor, so the transform is
//! unitary: it preserves ℓ2 norms and its adjoint is its inverse. Frequencies
//! use the standard unshifted FFT layout (DC at index `(0, 0)`).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::ComplexArray;
use crate::error::Result;

/// Planned unitary transform for a fixed grid size.
#[derive(Clone)]
pub struct Dft2 {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Dft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft2")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .finish()
    }
}

impl Dft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
            scale: 1.0 / ((rows * cols) as f64).sqrt(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// In-place transform of one `rows × cols` plane.
    pub fn forward_in_place(&self, plane: &mut [Complex64]) {
        self.apply(plane, &self.row_fwd, &self.col_fwd);
    }

    pub fn inverse_in_place(&self, plane: &mut [Complex64]) {
        self.apply(plane, &self.row_inv, &self.col_inv);
    }

    fn apply(&self, plane: &mut [Complex64], row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(plane.len(), self.rows * self.cols);
        row.process(plane);
        let mut column = vec![Complex64::new(0.0, 0.0); self.rows];
        for c in 0..self.cols {
            for r in 0..self.rows {
                column[r] = plane[r * self.cols + c];
            }
            col.process(&mut column);
            for r in 0..self.rows {
                plane[r * self.cols + c] = column[r] * self.scale;
            }
        }
    }
}

pub fn unitary_dft(img: &ComplexArray) -> Result<ComplexArray> {
    let (r, c) = img.dims2()?;
    let mut out = img.clone();
    Dft2::new(r, c).forward_in_place(out.data_mut());
    Ok(out)
}

pub fn unitary_idft(ksp: &ComplexArray) -> Result<ComplexArray> {
    let (r, c) = ksp.dims2()?;
    let mut out = ksp.clone();
    Dft2::new(r, c).inverse_in_place(out.data_mut());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::TAU;

    use super::*;
    use crate::error::Error;
    use crate::numerics::inner;
    use crate::rng::CounterRng;

    fn random(rows: usize, cols: usize, seed: u64) -> ComplexArray {
        let rng = CounterRng::new(seed);
        ComplexArray::from_fn(&[rows, cols], |k| rng.complex_normal(0, k as u64))
    }

    /// Direct O(N⁴) summation.
    fn direct_dft(img: &ComplexArray) -> ComplexArray {
        let (r, c) = img.dims2().unwrap();
        let s = 1.0 / ((r * c) as f64).sqrt();
        ComplexArray::from_fn(&[r, c], |k| {
            let (u, v) = (k / c, k % c);
            let mut acc = Complex64::new(0.0, 0.0);
            for y in 0..r {
                for x in 0..c {
                    let ph = -TAU * ((u * y) as f64 / r as f64 + (v * x) as f64 / c as f64);
                    acc += img.data()[y * c + x] * Complex64::from_polar(1.0, ph);
                }
            }
            acc * s
        })
    }

    #[test]
    fn zeros_map_to_zeros() {
        let z = ComplexArray::zeros(&[8, 8]);
        assert_eq!(unitary_dft(&z).unwrap(), z);
        assert_eq!(unitary_idft(&z).unwrap(), z);
    }

    #[test]
    fn constant_image_has_single_dc_coefficient() {
        let n = 8;
        let ones = ComplexArray::from_fn(&[n, n], |_| Complex64::new(1.0, 0.0));
        let k = unitary_dft(&ones).unwrap();
        assert!((k.data()[0] - Complex64::new(n as f64, 0.0)).norm() < 1e-12);
        assert!(k.data()[1..].iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn dc_coefficient_inverts_to_ones() {
        let n = 8;
        let mut k = ComplexArray::zeros(&[n, n]);
        k.data_mut()[0] = Complex64::new(n as f64, 0.0);
        let img = unitary_idft(&k).unwrap();
        assert!(img.data().iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn matches_direct_summation_and_preserves_norm() {
        let x = random(4, 4, 3);
        let fast = unitary_dft(&x).unwrap();
        let slow = direct_dft(&x);
        assert!(fast.sub(&slow).unwrap().norm() <= 1e-12 * slow.norm());
        assert!((fast.norm() - x.norm()).abs() <= 1e-12 * x.norm());
        let rect = random(6, 10, 4);
        let fast = unitary_dft(&rect).unwrap();
        assert!(fast.sub(&direct_dft(&rect)).unwrap().norm() <= 1e-12 * rect.norm());
    }

    #[test]
    fn inverse_round_trip() {
        let x = random(8, 8, 5);
        let back = unitary_idft(&unitary_dft(&x).unwrap()).unwrap();
        assert!(back.sub(&x).unwrap().norm() <= 1e-12 * x.norm());
    }

    #[test]
    fn adjoint_equals_inverse() {
        for seed in 0..100 {
            let x = random(8, 6, 2 * seed);
            let y = random(8, 6, 2 * seed + 1);
            let lhs = inner(&unitary_dft(&x).unwrap(), &y).unwrap();
            let rhs = inner(&x, &unitary_idft(&y).unwrap()).unwrap();
            assert!((lhs - rhs).norm() <= 1e-12 * x.norm() * y.norm());
        }
    }

    #[test]
    fn rejects_non_2d() {
        let x = ComplexArray::zeros(&[2, 4, 4]);
        assert!(matches!(unitary_dft(&x), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(unitary_idft(&x), Err(Error::ShapeMismatch { .. })));
    }
}
