//! Two-file array format.
//!
//! An array stored at stem `path/name` is written as `name.hdr`, a text
//! header with one `key: value` field per line,
//!
//! ```text
//! dims: 32 32
//! dtype: complex128
//! order: row-major
//! ```
//!
//! and `name.bin`, the raw little-endian payload. `complex128` is interleaved
//! re/im `f64` pairs, `float64` is plain `f64`, `bool` is one byte per entry.
//! Metadata lives in an optional `name.meta` sidecar of `key: value` lines.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use super::ComplexArray;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dtype {
    Complex128,
    Float64,
    Bool,
}

impl Dtype {
    fn name(self) -> &'static str {
        match self {
            Dtype::Complex128 => "complex128",
            Dtype::Float64 => "float64",
            Dtype::Bool => "bool",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "complex128" => Some(Dtype::Complex128),
            "float64" => Some(Dtype::Float64),
            "bool" => Some(Dtype::Bool),
            _ => None,
        }
    }

    fn item_bytes(self) -> usize {
        match self {
            Dtype::Complex128 => 16,
            Dtype::Float64 => 8,
            Dtype::Bool => 1,
        }
    }
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

pub fn header_path(stem: &Path) -> PathBuf {
    with_ext(stem, "hdr")
}

pub fn data_path(stem: &Path) -> PathBuf {
    with_ext(stem, "bin")
}

pub fn meta_path(stem: &Path) -> PathBuf {
    with_ext(stem, "meta")
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_raw(stem: &Path, dims: &[usize], dtype: Dtype, payload: Vec<u8>) -> Result<Vec<PathBuf>> {
    let dims_str: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
    let header = format!(
        "dims: {}\ndtype: {}\norder: row-major\n",
        dims_str.join(" "),
        dtype.name()
    );
    let (hdr, bin) = (header_path(stem), data_path(stem));
    write_file(&hdr, header.as_bytes())?;
    write_file(&bin, &payload)?;
    Ok(vec![hdr, bin])
}

fn read_raw(stem: &Path) -> Result<(Vec<usize>, Dtype, Vec<u8>)> {
    let hdr = header_path(stem);
    let text = fs::read_to_string(&hdr).map_err(|e| Error::io(&hdr, e))?;
    let fmt_err = |reason: &str| Error::Format {
        path: hdr.clone(),
        reason: reason.to_string(),
    };
    let fields = parse_key_values(&text);
    let dims: Vec<usize> = fields
        .iter()
        .find(|(k, _)| k == "dims")
        .ok_or_else(|| fmt_err("missing dims"))?
        .1
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| fmt_err("bad dims"))?;
    let dtype = fields
        .iter()
        .find(|(k, _)| k == "dtype")
        .and_then(|(_, v)| Dtype::parse(v))
        .ok_or_else(|| fmt_err("missing or unknown dtype"))?;
    match fields.iter().find(|(k, _)| k == "order") {
        Some((_, v)) if v == "row-major" => {}
        _ => return Err(fmt_err("order must be row-major")),
    }
    if dims.is_empty() || dims.contains(&0) {
        return Err(fmt_err("dims must be positive"));
    }
    let bin = data_path(stem);
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let expect = dims.iter().product::<usize>() * dtype.item_bytes();
    if bytes.len() != expect {
        return Err(Error::Format {
            path: bin,
            reason: format!("payload is {} bytes, expected {expect}", bytes.len()),
        });
    }
    Ok((dims, dtype, bytes))
}

fn expect_dtype(stem: &Path, got: Dtype, want: Dtype) -> Result<()> {
    if got != want {
        return Err(Error::Format {
            path: header_path(stem),
            reason: format!("dtype {} where {} was expected", got.name(), want.name()),
        });
    }
    Ok(())
}

pub fn write_complex(stem: &Path, arr: &ComplexArray) -> Result<Vec<PathBuf>> {
    let mut payload = Vec::with_capacity(arr.len() * 16);
    for z in arr.data() {
        payload.extend_from_slice(&z.re.to_le_bytes());
        payload.extend_from_slice(&z.im.to_le_bytes());
    }
    write_raw(stem, arr.shape(), Dtype::Complex128, payload)
}

pub fn read_complex(stem: &Path) -> Result<ComplexArray> {
    let (dims, dtype, bytes) = read_raw(stem)?;
    expect_dtype(stem, dtype, Dtype::Complex128)?;
    let data = bytes
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    ComplexArray::new(dims, data)
}

pub fn write_real(stem: &Path, dims: &[usize], values: &[f64]) -> Result<Vec<PathBuf>> {
    if dims.iter().product::<usize>() != values.len() {
        return Err(Error::shape(dims, values.len()));
    }
    let payload = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    write_raw(stem, dims, Dtype::Float64, payload)
}

pub fn read_real(stem: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let (dims, dtype, bytes) = read_raw(stem)?;
    expect_dtype(stem, dtype, Dtype::Float64)?;
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((dims, values))
}

pub fn write_bool(stem: &Path, dims: &[usize], values: &[bool]) -> Result<Vec<PathBuf>> {
    if dims.iter().product::<usize>() != values.len() {
        return Err(Error::shape(dims, values.len()));
    }
    let payload = values.iter().map(|&b| b as u8).collect();
    write_raw(stem, dims, Dtype::Bool, payload)
}

pub fn read_bool(stem: &Path) -> Result<(Vec<usize>, Vec<bool>)> {
    let (dims, dtype, bytes) = read_raw(stem)?;
    expect_dtype(stem, dtype, Dtype::Bool)?;
    Ok((dims, bytes.into_iter().map(|b| b != 0).collect()))
}

/// Ordered `key: value` text sidecar.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sidecar {
    entries: Vec<(String, String)>,
}

impl Sidecar {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}: {v}\n"))
            .collect()
    }

    pub fn parse(text: &str) -> Self {
        Self {
            entries: parse_key_values(text),
        }
    }

    pub fn write(&self, stem: &Path) -> Result<PathBuf> {
        let path = meta_path(stem);
        write_file(&path, self.render().as_bytes())?;
        Ok(path)
    }

    pub fn read(stem: &Path) -> Result<Self> {
        let path = meta_path(stem);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self::parse(&text))
    }
}

fn parse_key_values(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|line| {
            let (k, v) = line.split_once(':')?;
            Some((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::CounterRng;
    use proptest::prelude::*;

    #[test]
    fn header_layout_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("x");
        let arr = ComplexArray::zeros(&[3, 5]);
        write_complex(&stem, &arr).unwrap();
        let text = fs::read_to_string(header_path(&stem)).unwrap();
        assert_eq!(text, "dims: 3 5\ndtype: complex128\norder: row-major\n");
        assert_eq!(fs::read(data_path(&stem)).unwrap().len(), 15 * 16);
    }

    #[test]
    fn payload_is_little_endian_interleaved() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("x");
        let arr = ComplexArray::new(vec![1], vec![Complex64::new(1.5, -2.0)]).unwrap();
        write_complex(&stem, &arr).unwrap();
        let bytes = fs::read(data_path(&stem)).unwrap();
        assert_eq!(&bytes[..8], &1.5f64.to_le_bytes());
        assert_eq!(&bytes[8..], &(-2.0f64).to_le_bytes());
    }

    #[test]
    fn dtype_mismatch_and_truncation_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("r");
        write_real(&stem, &[2, 2], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!(matches!(read_complex(&stem), Err(Error::Format { .. })));
        fs::write(data_path(&stem), [0u8; 7]).unwrap();
        assert!(matches!(read_real(&stem), Err(Error::Format { .. })));
        assert!(matches!(read_real(&dir.path().join("missing")), Err(Error::Io { .. })));
    }

    #[test]
    fn sidecar_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("m");
        let mut s = Sidecar::new();
        s.set("scheme", "poisson-disc-2d").set("acceleration", 8).set("scheme", "uniform-1d");
        s.write(&stem).unwrap();
        let back = Sidecar::read(&stem).unwrap();
        assert_eq!(back, s);
        assert_eq!(back.get("scheme"), Some("uniform-1d"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn arrays_survive_disk(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            let dir = tempfile::tempdir().unwrap();
            let rng = CounterRng::new(seed);
            let arr = ComplexArray::from_fn(&[rows, cols], |k| rng.complex_normal(0, k as u64));
            write_complex(&dir.path().join("c"), &arr).unwrap();
            prop_assert_eq!(read_complex(&dir.path().join("c")).unwrap(), arr.clone());
            let re: Vec<f64> = arr.data().iter().map(|z| z.re).collect();
            write_real(&dir.path().join("f"), &[rows, cols], &re).unwrap();
            prop_assert_eq!(read_real(&dir.path().join("f")).unwrap(), (vec![rows, cols], re.clone()));
            let b: Vec<bool> = re.iter().map(|v| *v > 0.0).collect();
            write_bool(&dir.path().join("b"), &[rows, cols], &b).unwrap();
            prop_assert_eq!(read_bool(&dir.path().join("b")).unwrap(), (vec![rows, cols], b));
        }
    }
}
