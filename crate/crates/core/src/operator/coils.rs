use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::ComplexArray;

/// Distance of the coil ring from the image centre, in half-FOV units.
pub const COIL_RING_RADIUS: f64 = 1.5;

/// Complex coil sensitivity profiles, `coils × rows × cols`.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityMaps {
    maps: ComplexArray,
}

impl SensitivityMaps {
    pub fn new(maps: ComplexArray) -> Result<Self> {
        maps.dims3()?;
        Ok(Self { maps })
    }

    /// A single unit map: the operator reduces to masked Fourier encoding.
    pub fn unit(rows: usize, cols: usize) -> Self {
        Self {
            maps: ComplexArray::from_fn(&[1, rows, cols], |_| Complex64::new(1.0, 0.0)),
        }
    }

    pub fn n_coils(&self) -> usize {
        self.maps.shape()[0]
    }

    pub fn rows(&self) -> usize {
        self.maps.shape()[1]
    }

    pub fn cols(&self) -> usize {
        self.maps.shape()[2]
    }

    pub fn maps(&self) -> &ComplexArray {
        &self.maps
    }

    pub fn coil(&self, c: usize) -> &[Complex64] {
        let n = self.rows() * self.cols();
        &self.maps.data()[c * n..(c + 1) * n]
    }

    /// Per-pixel `Σ_γ |map_γ|²`.
    pub fn sum_of_squares(&self) -> Vec<f64> {
        let n = self.rows() * self.cols();
        (0..n)
            .map(|p| (0..self.n_coils()).map(|c| self.maps.data()[c * n + p].norm_sqr()).sum())
            .collect()
    }
}

/// Normalised image coordinates in [-1, 1) along both axes.
pub(crate) fn grid_coord(k: usize, rows: usize, cols: usize) -> (f64, f64) {
    let (r, c) = (k / cols, k % cols);
    let y = (r as f64 - rows as f64 / 2.0) / (rows as f64 / 2.0);
    let x = (c as f64 - cols as f64 / 2.0) / (cols as f64 / 2.0);
    (y, x)
}

/// Angular position of coil `c` on the ring.
pub fn coil_angle(c: usize, n_coils: usize) -> f64 {
    TAU * c as f64 / n_coils as f64
}

/// Centre of coil `c` in normalised `(y, x)` coordinates.
pub fn coil_center(c: usize, n_coils: usize) -> (f64, f64) {
    let a = coil_angle(c, n_coils);
    (COIL_RING_RADIUS * a.sin(), COIL_RING_RADIUS * a.cos())
}

/// Ring-of-coils sensitivity model: coil `c` sits on a circle around the
/// field of view and sees `e^{iφ}/r`, with `r` the distance to the coil and
/// `φ` the azimuth around it. Maps are normalised to unit root-sum-of-squares.
pub fn make_birdcage_maps(n_coils: usize, rows: usize, cols: usize) -> Result<SensitivityMaps> {
    if n_coils == 0 || rows == 0 || cols == 0 {
        return Err(Error::config("coils.count", "need at least one coil and a nonempty grid"));
    }
    let n = rows * cols;
    let mut maps = ComplexArray::zeros(&[n_coils, rows, cols]);
    let data = maps.data_mut();
    for c in 0..n_coils {
        let (cy, cx) = coil_center(c, n_coils);
        for k in 0..n {
            let (y, x) = grid_coord(k, rows, cols);
            let (dy, dx) = (y - cy, x - cx);
            let r = (dy * dy + dx * dx).sqrt();
            let phi = dx.atan2(-dy) + coil_angle(c, n_coils);
            data[c * n + k] = Complex64::from_polar(1.0 / r, phi);
        }
    }
    for k in 0..n {
        let rss = (0..n_coils).map(|c| data[c * n + k].norm_sqr()).sum::<f64>().sqrt();
        for c in 0..n_coils {
            data[c * n + k] /= rss;
        }
    }
    Ok(SensitivityMaps { maps })
}
