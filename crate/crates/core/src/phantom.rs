//! Synthetic complex test images, all peak-normalized to magnitude 1.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{unitary_idft, ComplexArray};
use crate::rng::CounterRng;

/// Smallest supported side length.
pub const MIN_SIDE: usize = 8;

/// Default impulse spacing for [`PhantomKind::PointGrid`].
pub const DEFAULT_SPACING: usize = 8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PhantomKind {
    EllipsePhantom,
    #[default]
    SmoothRandom,
    PointGrid,
}

impl PhantomKind {
    pub const ALL: [PhantomKind; 3] = [PhantomKind::EllipsePhantom, PhantomKind::SmoothRandom, PhantomKind::PointGrid];

    pub fn name(self) -> &'static str {
        match self {
            PhantomKind::EllipsePhantom => "ellipse-phantom",
            PhantomKind::SmoothRandom => "smooth-random",
            PhantomKind::PointGrid => "point-grid",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PhantomKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config("phantom.kind", format!("unknown phantom `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    pub kind: PhantomKind,
    pub seed: u64,
    pub image: ComplexArray,
}

impl Phantom {
    pub fn rows(&self) -> usize {
        self.image.shape()[0]
    }

    pub fn cols(&self) -> usize {
        self.image.shape()[1]
    }
}

pub fn make_phantom(kind: PhantomKind, rows: usize, cols: usize, seed: u64) -> Result<Phantom> {
    if rows < MIN_SIDE || cols < MIN_SIDE {
        return Err(Error::config("phantom.size", format!("need at least {MIN_SIDE}×{MIN_SIDE}")));
    }
    let image = match kind {
        PhantomKind::EllipsePhantom => ellipses(rows, cols),
        PhantomKind::SmoothRandom => smooth_random(rows, cols, seed)?,
        PhantomKind::PointGrid => point_grid(rows, cols, DEFAULT_SPACING),
    };
    Ok(Phantom { kind, seed, image })
}

/// Unit impulses every `spacing` pixels, offset by half a spacing.
pub fn point_grid(rows: usize, cols: usize, spacing: usize) -> ComplexArray {
    let spacing = spacing.max(1);
    let half = spacing / 2;
    ComplexArray::from_fn(&[rows, cols], |k| {
        let (r, c) = (k / cols, k % cols);
        if r % spacing == half && c % spacing == half {
            ramp(r, c, rows, cols)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// One cycle of phase across the field of view along each axis, plus a
/// constant offset so no pixel is forced onto the real axis.
fn ramp(r: usize, c: usize, rows: usize, cols: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * (r as f64 / rows as f64 + c as f64 / cols as f64) + PI / 3.0)
}

fn normalize(mut img: ComplexArray) -> ComplexArray {
    let peak = img.data().iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak > 0.0 {
        img.scale((1.0 / peak).into());
    }
    img
}

/// Overlapping ellipses `(y0, x0, a, b, angle, intensity)` in `[-1, 1)` coordinates.
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 6] = [
    (0.0, 0.0, 0.92, 0.69, 0.0, 1.0),
    (-0.0184, 0.0, 0.874, 0.6624, 0.0, -0.8),
    (0.0, 0.22, 0.41, 0.11, -18.0, -0.2),
    (0.0, -0.22, 0.31, 0.16, 18.0, -0.2),
    (0.35, 0.0, 0.25, 0.21, 0.0, 0.1),
    (-0.605, 0.0, 0.023, 0.046, 0.0, 0.1),
];

fn ellipses(rows: usize, cols: usize) -> ComplexArray {
    let img = ComplexArray::from_fn(&[rows, cols], |k| {
        let (r, c) = (k / cols, k % cols);
        let y = (r as f64 + 0.5 - rows as f64 / 2.0) / (rows as f64 / 2.0);
        let x = (c as f64 + 0.5 - cols as f64 / 2.0) / (cols as f64 / 2.0);
        let value: f64 = ELLIPSES
            .iter()
            .map(|&(y0, x0, a, b, deg, v)| {
                let (s, co) = deg.to_radians().sin_cos();
                let (dy, dx) = (y - y0, x - x0);
                let (u, w) = (dx * co + dy * s, -dx * s + dy * co);
                if (u / b).powi(2) + (w / a).powi(2) <= 1.0 {
                    v
                } else {
                    0.0
                }
            })
            .sum();
        value * ramp(r, c, rows, cols)
    });
    normalize(img)
}

/// Complex white noise restricted to the central quarter band of each axis
/// with a Gaussian taper, then shifted by the one-cycle phase ramp. Everything
/// stays within the central half band.
fn smooth_random(rows: usize, cols: usize, seed: u64) -> Result<ComplexArray> {
    let rng = CounterRng::new(seed).derive(0x7068_616e);
    let band = |k: usize, n: usize| -> Option<f64> {
        let f = if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
        let limit = (n / 4) as i64 - 1;
        (f.abs() <= limit).then(|| (-(f as f64 / (n as f64 / 8.0)).powi(2)).exp())
    };
    let spectrum = ComplexArray::from_fn(&[rows, cols], |k| {
        match (band(k / cols, rows), band(k % cols, cols)) {
            (Some(wr), Some(wc)) => rng.complex_normal(0, k as u64) * (wr * wc),
            _ => Complex64::new(0.0, 0.0),
        }
    });
    let mut img = unitary_idft(&spectrum)?;
    for (k, z) in img.data_mut().iter_mut().enumerate() {
        *z *= ramp(k / cols, k % cols, rows, cols);
    }
    Ok(normalize(img))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::unitary_dft;

    fn peak(img: &ComplexArray) -> f64 {
        img.data().iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn point_grid_has_four_unit_impulses() {
        let img = point_grid(16, 16, 8);
        let nonzero: Vec<_> = img.data().iter().filter(|z| z.norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 4);
        assert!(nonzero.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn every_kind_peaks_at_one() {
        for kind in PhantomKind::ALL {
            for (rows, cols) in [(8, 8), (16, 24), (33, 32)] {
                let p = make_phantom(kind, rows, cols, 3).unwrap();
                assert!((peak(&p.image) - 1.0).abs() < 1e-12, "{kind} {rows}×{cols}");
            }
        }
    }

    #[test]
    fn smooth_random_is_band_limited() {
        let (rows, cols) = (32, 32);
        let img = make_phantom(PhantomKind::SmoothRandom, rows, cols, 41).unwrap().image;
        let spec = unitary_dft(&img).unwrap();
        let total = spec.norm_sqr();
        let outside: f64 = spec
            .data()
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = |k: usize, n: usize| if k <= n / 2 { k as i64 } else { k as i64 - n as i64 };
                f(k / cols, rows).abs() > (rows / 4) as i64 || f(k % cols, cols).abs() > (cols / 4) as i64
            })
            .map(|(_, z)| z.norm_sqr())
            .sum();
        assert!(outside <= 0.01 * total, "{}", outside / total);
    }

    #[test]
    fn phantoms_are_deterministic_and_complex() {
        for kind in PhantomKind::ALL {
            let a = make_phantom(kind, 16, 16, 9).unwrap();
            assert_eq!(a, make_phantom(kind, 16, 16, 9).unwrap());
            assert!(a.image.data().iter().any(|z| z.im.abs() > 1e-3));
        }
        assert_ne!(
            make_phantom(PhantomKind::SmoothRandom, 16, 16, 1).unwrap().image,
            make_phantom(PhantomKind::SmoothRandom, 16, 16, 2).unwrap().image
        );
    }

    #[test]
    fn tiny_grids_are_rejected() {
        assert!(make_phantom(PhantomKind::EllipsePhantom, 4, 16, 0).is_err());
    }
}
