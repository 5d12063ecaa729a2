//! PNG renderings of real-valued maps for visual inspection.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::numerics::io;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Colormap {
    /// `[0, scale]` to black..white.
    #[default]
    Gray,
    /// `[-scale, scale]` to blue..white..red.
    Diverging,
}

impl Colormap {
    pub fn name(self) -> &'static str {
        match self {
            Colormap::Gray => "gray",
            Colormap::Diverging => "diverging",
        }
    }
}

impl fmt::Display for Colormap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Colormap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gray" => Ok(Colormap::Gray),
            "diverging" => Ok(Colormap::Diverging),
            _ => Err(Error::config("colormap", format!("unknown colormap `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderOptions {
    pub colormap: Colormap,
    /// Multiplier applied before mapping to colours (10 for difference maps).
    pub amplify: f64,
    /// Value mapped to full intensity; `None` uses the largest magnitude.
    pub scale: Option<f64>,
    /// Nearest-neighbour magnification per pixel.
    pub zoom: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            colormap: Colormap::Gray,
            amplify: 1.0,
            scale: None,
            zoom: 8,
        }
    }
}

fn to_byte(t: f64) -> u8 {
    (t.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn colour(v: f64, scale: f64, map: Colormap) -> Rgb<u8> {
    match map {
        Colormap::Gray => {
            let g = to_byte(v / scale);
            Rgb([g, g, g])
        }
        Colormap::Diverging => {
            let t = (v / scale).clamp(-1.0, 1.0);
            let fade = to_byte(1.0 - t.abs());
            if t >= 0.0 {
                Rgb([255, fade, fade])
            } else {
                Rgb([fade, fade, 255])
            }
        }
    }
}

pub fn render_image(values: &[f64], rows: usize, cols: usize, opts: &RenderOptions) -> Result<RgbImage> {
    if values.len() != rows * cols {
        return Err(Error::shape([rows, cols], [values.len()]));
    }
    if !(opts.amplify.is_finite() && opts.amplify > 0.0) || opts.zoom == 0 {
        return Err(Error::config("render", "amplify must be positive and zoom at least 1"));
    }
    let scaled: Vec<f64> = values.iter().map(|v| v * opts.amplify).collect();
    let peak = scaled.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = match opts.scale {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(_) => return Err(Error::config("render.scale", "must be positive")),
        None if peak > 0.0 => peak,
        None => 1.0,
    };
    let z = opts.zoom;
    Ok(RgbImage::from_fn(cols as u32 * z, rows as u32 * z, |x, y| {
        let (r, c) = ((y / z) as usize, (x / z) as usize);
        colour(scaled[r * cols + c], scale, opts.colormap)
    }))
}

pub fn render_png(values: &[f64], rows: usize, cols: usize, opts: &RenderOptions, path: &Path) -> Result<()> {
    render_image(values, rows, cols, opts)?
        .save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Format {
                path: path.to_path_buf(),
                reason: other.to_string(),
            },
        })
}

/// Renders a stored 2D real array (`stem.hdr` + `stem.bin`) to a PNG.
pub fn render_file(stem: &Path, out: &Path, opts: &RenderOptions) -> Result<()> {
    let (dims, values) = io::read_real(stem)?;
    if dims.len() != 2 {
        return Err(Error::Format {
            path: stem.to_path_buf(),
            reason: format!("expected a 2D map, found dims {dims:?}"),
        });
    }
    render_png(&values, dims[0], dims[1], opts, out)
}
