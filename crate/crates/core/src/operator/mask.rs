use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::signed_freq;
use crate::numerics::io::Sidecar;
use crate::rng::CounterRng;

/// Maximum relative deviation of the achieved acceleration from its target.
pub const ACCELERATION_TOL: f64 = 0.10;

/// Default calibration square for Poisson-disc masks, as a fraction of each dimension.
pub const DEFAULT_CALIB_FRACTION: f64 = 0.06;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Every `R`-th phase-encode column.
    Uniform1d,
    /// Randomly chosen phase-encode columns.
    Random1d,
    /// Uniformly random individual k-space points.
    UniformRandom2d,
    /// Dart-thrown points with a minimum-distance radius.
    PoissonDisc2d,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [
        Scheme::Uniform1d,
        Scheme::Random1d,
        Scheme::UniformRandom2d,
        Scheme::PoissonDisc2d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Uniform1d => "uniform-1d",
            Scheme::Random1d => "random-1d",
            Scheme::UniformRandom2d => "uniform-random-2d",
            Scheme::PoissonDisc2d => "poisson-disc-2d",
        }
    }

    fn is_1d(self) -> bool {
        matches!(self, Scheme::Uniform1d | Scheme::Random1d)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| Error::config("mask.scheme", format!("unknown scheme `{s}`")))
    }
}

/// Parameters of a sampling mask.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaskSpec {
    pub scheme: Scheme,
    pub acceleration: f64,
    pub rows: usize,
    pub cols: usize,
    /// Side of the fully sampled centre (columns for 1D schemes). `None`
    /// selects 6% of each dimension for Poisson-disc and zero otherwise.
    #[serde(default)]
    pub calib: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

impl MaskSpec {
    pub fn new(scheme: Scheme, acceleration: f64, rows: usize, cols: usize, seed: u64) -> Self {
        Self {
            scheme,
            acceleration,
            rows,
            cols,
            calib: None,
            seed,
        }
    }

    pub fn with_calib(mut self, calib: usize) -> Self {
        self.calib = Some(calib);
        self
    }

    fn calib_size(&self) -> (usize, usize) {
        match (self.calib, self.scheme) {
            (Some(c), Scheme::Uniform1d | Scheme::Random1d) => (self.rows, c),
            (Some(c), _) => (c, c),
            (None, Scheme::PoissonDisc2d) => (
                (DEFAULT_CALIB_FRACTION * self.rows as f64).round() as usize,
                (DEFAULT_CALIB_FRACTION * self.cols as f64).round() as usize,
            ),
            (None, _) => (0, 0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.acceleration.is_finite() && self.acceleration >= 1.0) {
            return Err(Error::config("mask.acceleration", "must be ≥ 1"));
        }
        if self.rows < 8 || self.cols < 8 {
            return Err(Error::config("mask.rows/cols", "grid must be at least 8×8"));
        }
        if let Some(c) = self.calib {
            let limit = if self.scheme.is_1d() { self.cols } else { self.rows.min(self.cols) };
            if c > limit {
                return Err(Error::config("mask.calib", "larger than the grid"));
            }
        }
        Ok(())
    }
}

/// Boolean k-space sampling pattern on the unshifted FFT grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingMask {
    spec: MaskSpec,
    kept: Vec<bool>,
    calib: (usize, usize),
    radius: Option<f64>,
}

fn centered(k: usize, n: usize, size: usize) -> bool {
    if size == 0 {
        return false;
    }
    let f = signed_freq(k, n);
    let lo = -((size / 2) as isize);
    let hi = lo + size as isize;
    f >= lo && f < hi
}

impl SamplingMask {
    pub fn full(rows: usize, cols: usize) -> Self {
        Self {
            spec: MaskSpec::new(Scheme::UniformRandom2d, 1.0, rows, cols, 0),
            kept: vec![true; rows * cols],
            calib: (0, 0),
            radius: None,
        }
    }

    /// Builds a mask from an explicit grid (e.g. one read from disk).
    pub fn from_grid(spec: MaskSpec, kept: Vec<bool>) -> Result<Self> {
        if kept.len() != spec.rows * spec.cols {
            return Err(Error::shape([spec.rows, spec.cols], kept.len()));
        }
        let calib = spec.calib_size();
        Ok(Self {
            spec,
            kept,
            calib,
            radius: None,
        })
    }

    pub fn spec(&self) -> &MaskSpec {
        &self.spec
    }

    pub fn rows(&self) -> usize {
        self.spec.rows
    }

    pub fn cols(&self) -> usize {
        self.spec.cols
    }

    pub fn kept(&self) -> &[bool] {
        &self.kept
    }

    pub fn n_kept(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }

    pub fn achieved_acceleration(&self) -> f64 {
        (self.rows() * self.cols()) as f64 / self.n_kept() as f64
    }

    /// Minimum-distance radius used for Poisson-disc masks.
    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn in_calibration(&self, k: usize) -> bool {
        let (r, c) = (k / self.cols(), k % self.cols());
        centered(r, self.rows(), self.calib.0) && centered(c, self.cols(), self.calib.1)
    }

    /// Zeroes unkept entries of every `rows × cols` plane.
    pub fn apply<T: Copy + Default>(&self, data: &mut [T]) {
        let n = self.kept.len();
        for plane in data.chunks_mut(n) {
            for (v, &k) in plane.iter_mut().zip(&self.kept) {
                if !k {
                    *v = T::default();
                }
            }
        }
    }

    pub fn sidecar(&self) -> Sidecar {
        let mut s = Sidecar::new();
        s.set("scheme", self.spec.scheme)
            .set("acceleration_target", self.spec.acceleration)
            .set("acceleration_achieved", self.achieved_acceleration())
            .set("seed", self.spec.seed)
            .set("calib", format!("{} {}", self.calib.0, self.calib.1));
        if let Some(r) = self.radius {
            s.set("radius", r);
        }
        s
    }
}

fn shuffle(items: &mut [usize], rng: &CounterRng, stream: u64) {
    let mut cur = rng.cursor(stream, 0);
    for i in (1..items.len()).rev() {
        let j = (cur.uniform() * (i + 1) as f64) as usize;
        items.swap(i, j.min(i));
    }
}

/// Greedy dart throwing over `order`, accepting points at distance ≥ `radius`
/// from every accepted point, stopping after `limit` acceptances.
fn dart_throw(rows: usize, cols: usize, order: &[usize], radius: f64, limit: usize) -> Vec<usize> {
    let mut occupied = vec![false; rows * cols];
    let mut accepted = Vec::new();
    let reach = radius.ceil() as isize;
    let r2 = radius * radius;
    for &k in order {
        if accepted.len() >= limit {
            break;
        }
        let (y, x) = ((k / cols) as isize, (k % cols) as isize);
        let mut ok = true;
        'scan: for dy in -reach..=reach {
            let yy = y + dy;
            if yy < 0 || yy >= rows as isize {
                continue;
            }
            for dx in -reach..=reach {
                let xx = x + dx;
                if xx < 0 || xx >= cols as isize {
                    continue;
                }
                if ((dy * dy + dx * dx) as f64) < r2 && occupied[yy as usize * cols + xx as usize] {
                    ok = false;
                    break 'scan;
                }
            }
        }
        if ok {
            occupied[k] = true;
            accepted.push(k);
        }
    }
    accepted
}

/// Centred frequency coordinates, so distances are measured in k-space rather
/// than on the wrapped FFT index grid.
fn to_centered(k: usize, rows: usize, cols: usize) -> usize {
    let r = (signed_freq(k / cols, rows) + (rows / 2) as isize) as usize;
    let c = (signed_freq(k % cols, cols) + (cols / 2) as isize) as usize;
    r * cols + c
}

pub fn make_mask(spec: &MaskSpec) -> Result<SamplingMask> {
    spec.validate()?;
    let (rows, cols) = (spec.rows, spec.cols);
    let n = rows * cols;
    if spec.acceleration == 1.0 {
        return Ok(SamplingMask {
            spec: spec.clone(),
            kept: vec![true; n],
            calib: spec.calib_size(),
            radius: None,
        });
    }
    let rng = CounterRng::new(spec.seed).derive(0x6d61_736b);
    let calib = spec.calib_size();
    let mut kept = vec![false; n];
    let mut radius = None;
    let infeasible = |what: &str| Error::InfeasibleSpec(format!("{what} for R={} on {rows}×{cols}", spec.acceleration));

    if spec.scheme.is_1d() {
        let target = ((cols as f64 / spec.acceleration).round() as usize).max(1);
        let calib_cols: Vec<usize> = (0..cols).filter(|&c| centered(c, cols, calib.1)).collect();
        if calib_cols.len() > target {
            return Err(infeasible("calibration region exceeds the column budget"));
        }
        let mut chosen = vec![false; cols];
        calib_cols.iter().for_each(|&c| chosen[c] = true);
        match spec.scheme {
            Scheme::Uniform1d => {
                let count_for = |step: usize| {
                    (0..cols)
                        .filter(|&c| chosen[c] || signed_freq(c, cols).rem_euclid(step as isize) == 0)
                        .count()
                };
                let step = (1..=cols)
                    .min_by_key(|&s| (count_for(s) as isize - target as isize).unsigned_abs())
                    .unwrap();
                for (c, ch) in chosen.iter_mut().enumerate() {
                    if signed_freq(c, cols).rem_euclid(step as isize) == 0 {
                        *ch = true;
                    }
                }
            }
            _ => {
                let mut rest: Vec<usize> = (0..cols).filter(|&c| !chosen[c]).collect();
                shuffle(&mut rest, &rng, 0);
                for &c in rest.iter().take(target - calib_cols.len()) {
                    chosen[c] = true;
                }
            }
        }
        for k in 0..n {
            kept[k] = chosen[k % cols];
        }
    } else {
        let target = ((n as f64 / spec.acceleration).round() as usize).max(1);
        let in_calib = |k: usize| centered(k / cols, rows, calib.0) && centered(k % cols, cols, calib.1);
        let n_calib = (0..n).filter(|&k| in_calib(k)).count();
        if n_calib > target {
            return Err(infeasible("calibration region exceeds the sample budget"));
        }
        (0..n).filter(|&k| in_calib(k)).for_each(|k| kept[k] = true);
        let mut rest: Vec<usize> = (0..n).filter(|&k| !in_calib(k)).collect();
        shuffle(&mut rest, &rng, 1);
        let budget = target - n_calib;
        match spec.scheme {
            Scheme::UniformRandom2d => {
                rest.iter().take(budget).for_each(|&k| kept[k] = true);
            }
            _ => {
                // Dart throwing runs on centred coordinates; map back afterwards.
                let order: Vec<usize> = rest.iter().map(|&k| to_centered(k, rows, cols)).collect();
                let mut back = vec![0usize; n];
                for k in 0..n {
                    back[to_centered(k, rows, cols)] = k;
                }
                // Largest radius whose unconstrained run still reaches the budget.
                let (mut lo, mut hi) = (0.0f64, (rows.max(cols)) as f64);
                for _ in 0..48 {
                    let mid = 0.5 * (lo + hi);
                    if dart_throw(rows, cols, &order, mid, usize::MAX).len() >= budget {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                for k in dart_throw(rows, cols, &order, lo, budget) {
                    kept[back[k]] = true;
                }
                radius = Some(lo);
            }
        }
    }

    let mask = SamplingMask {
        spec: spec.clone(),
        kept,
        calib,
        radius,
    };
    let achieved = mask.achieved_acceleration();
    if (achieved - spec.acceleration).abs() > ACCELERATION_TOL * spec.acceleration {
        return Err(Error::InfeasibleSpec(format!(
            "achieved R={achieved:.3} is not within 10% of target R={} on {rows}×{cols}",
            spec.acceleration
        )));
    }
    Ok(mask)
}
