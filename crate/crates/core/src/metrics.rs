//! Agreement metrics between variance maps and their text/CSV reports.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::estimators::VarianceMap;

/// Agreement of a map `a` with a reference `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComparisonReport {
    /// `100 · Pearson(a, b)`.
    pub pcc: f64,
    /// `100 · ‖a − b‖ / ‖b‖`.
    pub nrmse: f64,
    pub r_squared: f64,
    /// Least-squares fit `a ≈ slope · b + intercept`.
    pub slope: f64,
    pub intercept: f64,
    pub n_voxels: usize,
}

impl ComparisonReport {
    pub const HEADER: [&'static str; 6] = ["pcc_percent", "nrmse_percent", "r_squared", "slope", "intercept", "n_voxels"];

    fn cells(&self) -> [String; 6] {
        [
            format!("{:.4}", self.pcc),
            format!("{:.4}", self.nrmse),
            format!("{:.6}", self.r_squared),
            format!("{:.6}", self.slope),
            format!("{:.6e}", self.intercept),
            self.n_voxels.to_string(),
        ]
    }
}

pub fn compare_maps(a: &VarianceMap, b: &VarianceMap) -> Result<ComparisonReport> {
    if a.shape() != b.shape() {
        return Err(Error::shape(b.shape(), a.shape()));
    }
    compare_values(a.values(), b.values())
}

/// [`compare_maps`] on raw slices; `b` is the reference.
pub fn compare_values(a: &[f64], b: &[f64]) -> Result<ComparisonReport> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape([b.len()], [a.len()]));
    }
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut saa, mut sbb, mut sab, mut diff, mut ref_sq) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        saa += dx * dx;
        sbb += dy * dy;
        sab += dx * dy;
        diff += (x - y) * (x - y);
        ref_sq += y * y;
    }
    // Constant up to rounding: the spread is below 1e-10 of the RMS value.
    if sbb <= 1e-20 * ref_sq || sbb == 0.0 {
        return Err(Error::DegenerateReference);
    }
    // A constant estimate is uncorrelated with anything.
    let r = if saa == 0.0 { 0.0 } else { (sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0) };
    let slope = sab / sbb;
    Ok(ComparisonReport {
        pcc: 100.0 * r,
        nrmse: 100.0 * (diff / ref_sq).sqrt(),
        r_squared: r * r,
        slope,
        intercept: ma - slope * mb,
        n_voxels: a.len(),
    })
}

/// [`compare_maps`], except that a constant reference yields `NaN`
/// correlation and regression fields instead of an error; the NRMSE is
/// still defined.
pub fn compare_maps_lenient(a: &VarianceMap, b: &VarianceMap) -> Result<ComparisonReport> {
    match compare_maps(a, b) {
        Err(Error::DegenerateReference) => {
            let (mut diff, mut ref_sq) = (0.0, 0.0);
            for (x, y) in a.values().iter().zip(b.values()) {
                diff += (x - y) * (x - y);
                ref_sq += y * y;
            }
            Ok(ComparisonReport {
                pcc: f64::NAN,
                nrmse: 100.0 * (diff / ref_sq).sqrt(),
                r_squared: f64::NAN,
                slope: f64::NAN,
                intercept: f64::NAN,
                n_voxels: a.values().len(),
            })
        }
        other => other,
    }
}

/// Signed `a − b`.
pub fn difference_map(a: &VarianceMap, b: &VarianceMap) -> Result<Vec<f64>> {
    if a.shape() != b.shape() {
        return Err(Error::shape(b.shape(), a.shape()));
    }
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect())
}

/// `(a − mc) / se(mc)` per voxel, using the Monte-Carlo standard error.
/// Voxels with zero standard error get 0 when they agree exactly and a
/// signed infinity otherwise.
pub fn z_score_map(a: &VarianceMap, mc: &VarianceMap) -> Result<Vec<f64>> {
    let se = mc
        .std_error()
        .ok_or_else(|| Error::config("metrics.z_score", "reference map carries no standard error"))?;
    let diff = difference_map(a, mc)?;
    Ok(diff
        .iter()
        .zip(se)
        .map(|(d, s)| match (*s > 0.0, *d == 0.0) {
            (true, _) => d / s,
            (false, true) => 0.0,
            (false, false) => d.signum() * f64::INFINITY,
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub param: String,
    pub nrmse: f64,
    pub pcc: f64,
}

/// NRMSE and PCC of a series of maps against one reference, in input order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTable {
    pub param_name: String,
    pub rows: Vec<ConvergenceRow>,
}

pub fn convergence_table<P: ToString>(
    param_name: &str,
    reference: &VarianceMap,
    series: &[(P, VarianceMap)],
) -> Result<ConvergenceTable> {
    let rows = series
        .iter()
        .map(|(p, map)| {
            let r = compare_maps(map, reference)?;
            Ok(ConvergenceRow {
                param: p.to_string(),
                nrmse: r.nrmse,
                pcc: r.pcc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConvergenceTable {
        param_name: param_name.to_string(),
        rows,
    })
}

impl ConvergenceTable {
    pub fn nrmse(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.nrmse).collect()
    }

    pub fn to_text(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| vec![r.param.clone(), format!("{:.4}", r.nrmse), format!("{:.4}", r.pcc)])
            .collect();
        aligned(&[&self.param_name, "nrmse_percent", "pcc_percent"], &rows)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{},nrmse_percent,pcc_percent\n", self.param_name);
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{}", r.param, r.nrmse, r.pcc);
        }
        out
    }
}

/// Number of adjacent increases in `values`.
pub fn count_inversions(values: &[f64]) -> usize {
    values.windows(2).filter(|w| w[1] > w[0]).count()
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Labelled comparison reports rendered as one table.
pub fn reports_to_text(reports: &[(String, ComparisonReport)]) -> String {
    let mut header = vec!["comparison"];
    header.extend(ComparisonReport::HEADER);
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|(label, r)| std::iter::once(label.clone()).chain(r.cells()).collect())
        .collect();
    aligned(&header, &rows)
}

pub fn reports_to_csv(reports: &[(String, ComparisonReport)]) -> String {
    let mut out = format!("comparison,{}\n", ComparisonReport::HEADER.join(","));
    for (label, r) in reports {
        let _ = writeln!(
            out,
            "{label},{},{},{},{},{},{}",
            r.pcc, r.nrmse, r.r_squared, r.slope, r.intercept, r.n_voxels
        );
    }
    out
}

/// Left-aligned first column, right-aligned numbers, two-space gutters.
pub fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let mut s = String::new();
        for (k, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if k == 0 {
                let _ = write!(s, "{cell:<w$}");
            } else {
                let _ = write!(s, "  {cell:>w$}");
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for row in rows {
        out += &line(row.iter().map(String::as_str).collect());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::io::Sidecar;
    use crate::rng::CounterRng;

    fn map(values: Vec<f64>, rows: usize) -> VarianceMap {
        let cols = values.len() / rows;
        VarianceMap::new(rows, cols, values, Sidecar::new()).unwrap()
    }

    fn random_map(seed: u64) -> VarianceMap {
        let rng = CounterRng::new(seed);
        map((0..256).map(|k| rng.uniform(0, k)).collect(), 16)
    }

    #[test]
    fn identical_maps() {
        let b = random_map(1);
        let r = compare_maps(&b, &b).unwrap();
        assert!((r.pcc - 100.0).abs() < 1e-12);
        assert_eq!(r.nrmse, 0.0);
        assert!((r.r_squared - 1.0).abs() < 1e-12);
        assert!((r.slope - 1.0).abs() < 1e-12);
        assert!(r.intercept.abs() < 1e-12);
    }

    #[test]
    fn doubled_map() {
        let b = random_map(2);
        let a = map(b.values().iter().map(|v| 2.0 * v).collect(), 16);
        let r = compare_maps(&a, &b).unwrap();
        assert!((r.pcc - 100.0).abs() < 1e-12);
        assert!((r.nrmse - 100.0).abs() < 1e-12);
        assert!((r.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_definitional_loop() {
        let (a, b) = (random_map(3), random_map(4));
        let r = compare_maps(&a, &b).unwrap();
        let (x, y) = (a.values(), b.values());
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut vx = 0.0;
        let mut vy = 0.0;
        for i in 0..x.len() {
            num += (x[i] - mx) * (y[i] - my);
            vx += (x[i] - mx) * (x[i] - mx);
            vy += (y[i] - my) * (y[i] - my);
        }
        let pearson = num / (vx * vy).sqrt();
        let mut d = 0.0;
        let mut yy = 0.0;
        for i in 0..x.len() {
            d += (x[i] - y[i]).powi(2);
            yy += y[i] * y[i];
        }
        let slope = num / vy;
        // R² from the regression residuals.
        let resid: f64 = (0..x.len()).map(|i| (x[i] - (slope * y[i] + mx - slope * my)).powi(2)).sum();
        assert!((r.pcc - 100.0 * pearson).abs() < 1e-12);
        assert!((r.nrmse - 100.0 * (d / yy).sqrt()).abs() < 1e-12);
        assert!((r.slope - slope).abs() < 1e-12);
        assert!((r.intercept - (mx - slope * my)).abs() < 1e-12);
        assert!((r.r_squared - (1.0 - resid / vx)).abs() < 1e-12);
    }

    #[test]
    fn pcc_symmetric_nrmse_not() {
        let (a, b) = (random_map(5), map(random_map(6).values().iter().map(|v| 3.0 * v).collect(), 16));
        let ab = compare_maps(&a, &b).unwrap();
        let ba = compare_maps(&b, &a).unwrap();
        assert!((ab.pcc - ba.pcc).abs() < 1e-12);
        assert!((ab.nrmse - ba.nrmse).abs() > 1.0);
    }

    #[test]
    fn scale_invariance() {
        let (a, b) = (random_map(7), random_map(8));
        let r = compare_maps(&a, &b).unwrap();
        let k = 37.5;
        let s = compare_maps(
            &map(a.values().iter().map(|v| k * v).collect(), 16),
            &map(b.values().iter().map(|v| k * v).collect(), 16),
        )
        .unwrap();
        assert!((r.pcc - s.pcc).abs() < 1e-10);
        assert!((r.r_squared - s.r_squared).abs() < 1e-12);
        assert!((r.nrmse - s.nrmse).abs() < 1e-10);
    }

    #[test]
    fn errors() {
        let b = map(vec![1.0; 16], 4);
        assert!(matches!(compare_maps(&random_map(9), &random_map(10)).map(|_| ()), Ok(())));
        assert!(matches!(compare_maps(&map(vec![0.5; 16], 4), &b), Err(Error::DegenerateReference)));
        assert!(compare_maps(&random_map(9), &b).is_err());
    }

    #[test]
    fn lenient_comparison_keeps_nrmse_for_constant_references() {
        let b = map(vec![1.0; 16], 4);
        let r = compare_maps_lenient(&map(vec![1.1; 16], 4), &b).unwrap();
        assert!(r.pcc.is_nan() && r.r_squared.is_nan());
        assert!((r.nrmse - 10.0).abs() < 1e-12);
        let a = random_map(3);
        let c = random_map(4);
        assert_eq!(compare_maps_lenient(&a, &c).unwrap(), compare_maps(&a, &c).unwrap());
    }

    #[test]
    fn convergence_of_shrinking_offsets() {
        let reference = random_map(11);
        let rng = CounterRng::new(12);
        let offsets: Vec<f64> = (0..256).map(|k| rng.uniform(0, k)).collect();
        let series: Vec<(usize, VarianceMap)> = (1..=6)
            .map(|k| {
                let v = reference.values().iter().zip(&offsets).map(|(r, o)| r + o / k as f64).collect();
                (k, map(v, 16))
            })
            .collect();
        let table = convergence_table("k", &reference, &series).unwrap();
        let nrmse = table.nrmse();
        assert!(nrmse.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(count_inversions(&nrmse), 0);
        let same: Vec<(usize, VarianceMap)> = (0..3).map(|k| (k, reference.clone())).collect();
        assert!(convergence_table("k", &reference, &same).unwrap().nrmse().iter().all(|v| *v == 0.0));
        assert!(table.to_csv().starts_with("k,nrmse_percent,pcc_percent\n1,"));
        assert_eq!(table.to_text().lines().count(), 7);
    }

    #[test]
    fn z_scores_use_standard_error() {
        let b = random_map(13);
        let a = map(b.values().iter().map(|v| v + 0.1).collect(), 16);
        assert!(z_score_map(&a, &b).is_err());
        let b = b.with_std_error(vec![0.05; 256]).unwrap();
        assert!(z_score_map(&a, &b).unwrap().iter().all(|z| (z - 2.0).abs() < 1e-9));
    }

    #[test]
    fn aligned_table_layout() {
        let text = aligned(&["name", "x"], &[vec!["a".into(), "1.5".into()], vec!["long".into(), "10.25".into()]]);
        assert_eq!(text, "name      x\na       1.5\nlong  10.25\n");
    }
}
