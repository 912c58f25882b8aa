//! Evaluation: lung volume, overlap and Dice coefficients, cohort summary
//! statistics, and cross-method volume correlation.
//!
//! Conventions: "overlap" is intersection over union; `std` is the
//! population standard deviation; quartiles interpolate linearly between
//! order statistics at `h = (n - 1)·p`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::load_mask;
use crate::volume::BinaryMask;

/// Mask volume in millilitres.
pub fn volume_ml(mask: &BinaryMask) -> f64 {
    mask.count() as f64 * mask.geometry().voxel_volume_mm3() / 1000.0
}

/// `|a ∩ b| / |a ∪ b|`, 1 when both masks are empty.
pub fn overlap_coefficient(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (inter, na, nb) = a.overlap_counts(b)?;
    let union = na + nb - inter;
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// `2|a ∩ b| / (|a| + |b|)`, 1 when both masks are empty.
pub fn dice_coefficient(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let (inter, na, nb) = a.overlap_counts(b)?;
    Ok(if na + nb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (na + nb) as f64
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub object_name: String,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl OverlapSummary {
    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.object_name = name.into();
        self
    }
}

/// Inclusive linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summary_stats(values: &[f64]) -> Result<OverlapSummary> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    // offset from the minimum so a constant list has an exact mean and zero std
    let lo = sorted[0];
    let mean = lo + values.iter().map(|v| v - lo).sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(OverlapSummary {
        object_name: String::new(),
        // summation can push the mean a rounding step outside the data range
        mean: mean.clamp(sorted[0], sorted[sorted.len() - 1]),
        std: var.sqrt(),
        min: sorted[0],
        q1: quantile(&sorted, 0.25),
        median: quantile(&sorted, 0.5),
        q3: quantile(&sorted, 0.75),
        max: sorted[sorted.len() - 1],
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeRecord {
    pub case_id: String,
    pub method: String,
    pub volume_ml: f64,
}

/// Reads a `case_id,method,volume_ml` table.
pub fn read_volume_table(reader: impl Read) -> Result<Vec<VolumeRecord>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Pearson correlation between methods over paired cases. Method order is
/// order of first appearance in the table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub methods: Vec<String>,
    pub r: Vec<Vec<f64>>,
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn pearson_correlation_matrix(table: &[VolumeRecord]) -> Result<CorrelationMatrix> {
    let mut methods: Vec<String> = Vec::new();
    let mut cases: Vec<String> = Vec::new();
    let mut values: HashMap<(&str, &str), f64> = HashMap::new();
    for rec in table {
        if !methods.contains(&rec.method) {
            methods.push(rec.method.clone());
        }
        if !cases.contains(&rec.case_id) {
            cases.push(rec.case_id.clone());
        }
        if values
            .insert((rec.case_id.as_str(), rec.method.as_str()), rec.volume_ml)
            .is_some()
        {
            return Err(Error::IncompleteTable(format!(
                "duplicate entry for case {} method {}",
                rec.case_id, rec.method
            )));
        }
    }
    if cases.len() < 2 {
        return Err(Error::IncompleteTable(format!(
            "{} case(s); at least 2 needed",
            cases.len()
        )));
    }
    let series: Vec<Vec<f64>> = methods
        .iter()
        .map(|m| {
            cases
                .iter()
                .map(|c| {
                    values.get(&(c.as_str(), m.as_str())).copied().ok_or_else(|| {
                        Error::IncompleteTable(format!("no volume for case {c} method {m}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    for (m, s) in methods.iter().zip(&series) {
        if s.iter().all(|v| *v == s[0]) {
            return Err(Error::ConstantSeries(m.clone()));
        }
    }
    let k = methods.len();
    let mut r = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in 0..i {
            let v = pearson(&series[i], &series[j]).ok_or_else(|| Error::ConstantSeries(methods[i].clone()))?;
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok(CorrelationMatrix { methods, r })
}

/// Lower-triangular correlation table, three decimals.
pub fn format_correlation_table(m: &CorrelationMatrix) -> String {
    let label_w = m.methods.iter().map(|s| s.len()).max().unwrap_or(0).max(6);
    let col_w = |j: usize| m.methods[j].len().max(5);
    let mut out = String::new();
    let _ = write!(out, "{:label_w$}", "");
    for (j, name) in m.methods.iter().enumerate() {
        let _ = write!(out, "  {:>w$}", name, w = col_w(j));
    }
    out.push('\n');
    for (i, name) in m.methods.iter().enumerate() {
        let _ = write!(out, "{name:label_w$}");
        for j in 0..=i {
            let _ = write!(out, "  {:>w$.3}", m.r[i][j], w = col_w(j));
        }
        out.push('\n');
    }
    out
}

/// Per-object summary table with a trailing `score` row holding the mean
/// of the object means.
pub fn format_overlap_table(summaries: &[OverlapSummary]) -> String {
    let label_w = summaries
        .iter()
        .map(|s| s.object_name.len())
        .max()
        .unwrap_or(0)
        .max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:label_w$}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}",
        "obj", "mean", "std", "min", "Q1", "median", "Q3", "max"
    );
    for s in summaries {
        let _ = writeln!(
            out,
            "{:label_w$}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}  {:>6.3}",
            s.object_name, s.mean, s.std, s.min, s.q1, s.median, s.q3, s.max
        );
    }
    if !summaries.is_empty() {
        let _ = writeln!(out, "{:label_w$}  {:>6.3}", "score", score(summaries));
        let _ = writeln!(
            out,
            "(overlap = |A∩B|/|A∪B|; std over n; score = mean of the per-object means)"
        );
    }
    out
}

pub fn score(summaries: &[OverlapSummary]) -> f64 {
    summaries.iter().map(|s| s.mean).sum::<f64>() / summaries.len() as f64
}

/// One row of an overlap evaluation manifest. `object` groups rows into
/// report lines; `label` selects one label value from both files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub case_id: String,
    pub reference_path: PathBuf,
    pub predicted_path: PathBuf,
    #[serde(default)]
    pub object: Option<String>,
    #[serde(default)]
    pub label: Option<f32>,
}

pub fn read_manifest(reader: impl Read) -> Result<Vec<ManifestRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseOverlap {
    pub case_id: String,
    pub object: String,
    pub overlap: f64,
    pub dice: f64,
}

pub const DEFAULT_OBJECT: &str = "lung";

/// Evaluates manifest rows in parallel; output order follows the manifest.
/// Relative paths resolve against `base_dir`.
pub fn evaluate_manifest(rows: &[ManifestRow], base_dir: &Path) -> Result<Vec<CaseOverlap>> {
    rows.par_iter()
        .map(|row| {
            let reference = load_mask(base_dir.join(&row.reference_path), row.label)?;
            let predicted = load_mask(base_dir.join(&row.predicted_path), row.label)?;
            Ok(CaseOverlap {
                case_id: row.case_id.clone(),
                object: row
                    .object
                    .clone()
                    .unwrap_or_else(|| DEFAULT_OBJECT.to_string()),
                overlap: overlap_coefficient(&reference, &predicted)?,
                dice: dice_coefficient(&reference, &predicted)?,
            })
        })
        .collect()
}

/// Groups case overlaps by object (first-appearance order) and summarizes.
pub fn summarize_by_object(results: &[CaseOverlap]) -> Result<Vec<OverlapSummary>> {
    let mut objects: Vec<&str> = Vec::new();
    for r in results {
        if !objects.contains(&r.object.as_str()) {
            objects.push(&r.object);
        }
    }
    objects
        .into_iter()
        .map(|obj| {
            let values: Vec<f64> = results
                .iter()
                .filter(|r| r.object == obj)
                .map(|r| r.overlap)
                .collect();
            Ok(summary_stats(&values)?.named(obj))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::VolumeGeometry;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn volume_examples() {
        let g = VolumeGeometry::new([10, 10, 10], [1.0; 3]);
        assert_eq!(volume_ml(&BinaryMask::full(g.clone())), 1.0);
        assert_eq!(volume_ml(&BinaryMask::empty(g)), 0.0);
        let g = VolumeGeometry::new([2, 2, 2], [2.0, 2.0, 2.5]);
        assert!(close(volume_ml(&BinaryMask::full(g)), 0.08));
    }

    #[test]
    fn overlap_and_dice_examples() {
        let g = VolumeGeometry::new([2, 2, 2], [1.0; 3]);
        let cube = BinaryMask::full(g.clone());
        let half = BinaryMask::from_fn(g.clone(), |v| v[0] == 0);
        let other_half = BinaryMask::from_fn(g.clone(), |v| v[0] == 1);
        let empty = BinaryMask::empty(g.clone());
        assert_eq!(overlap_coefficient(&cube, &cube).unwrap(), 1.0);
        assert_eq!(overlap_coefficient(&half, &other_half).unwrap(), 0.0);
        assert_eq!(overlap_coefficient(&cube, &half).unwrap(), 0.5);
        assert_eq!(overlap_coefficient(&empty, &empty).unwrap(), 1.0);
        assert_eq!(dice_coefficient(&cube, &cube).unwrap(), 1.0);
        assert_eq!(dice_coefficient(&half, &other_half).unwrap(), 0.0);
        assert!(close(dice_coefficient(&cube, &half).unwrap(), 2.0 * 4.0 / 12.0));
        assert_eq!(dice_coefficient(&empty, &empty).unwrap(), 1.0);

        let g2 = VolumeGeometry::new([2, 2, 1], [1.0; 3]);
        assert!(matches!(
            overlap_coefficient(&cube, &BinaryMask::empty(g2)),
            Err(Error::GeometryMismatch)
        ));
    }

    #[test]
    fn summary_examples() {
        let s = summary_stats(&[0.5]).unwrap();
        assert_eq!(
            [s.mean, s.min, s.q1, s.median, s.q3, s.max],
            [0.5; 6]
        );
        assert_eq!(s.std, 0.0);

        let s = summary_stats(&[0.0, 1.0]).unwrap();
        assert_eq!((s.mean, s.min, s.max, s.median), (0.5, 0.0, 1.0, 0.5));
        assert_eq!(s.std, 0.5);

        // h = 3p: q1 at 0.75 -> .1 + .75*.1, median at 1.5, q3 at 2.25
        let s = summary_stats(&[0.4, 0.1, 0.3, 0.2]).unwrap();
        assert!(close(s.q1, 0.175));
        assert!(close(s.median, 0.25));
        assert!(close(s.q3, 0.325));

        assert!(matches!(summary_stats(&[]), Err(Error::EmptyInput)));
    }

    fn table(rows: &[(&str, &str, f64)]) -> Vec<VolumeRecord> {
        rows.iter()
            .map(|(c, m, v)| VolumeRecord {
                case_id: c.to_string(),
                method: m.to_string(),
                volume_ml: *v,
            })
            .collect()
    }

    #[test]
    fn pearson_examples() {
        let x = [1.0, 2.0, 3.0];
        assert!(close(pearson(&x, &x.map(|v| 2.0 * v + 3.0)).unwrap(), 1.0));
        assert!(close(pearson(&x, &[3.0, 2.0, 1.0]).unwrap(), -1.0));
        // cov = 1, var_x = var_y = 2 (sums of squares), r = 1 / 2
        assert!(close(pearson(&x, &[1.0, 3.0, 2.0]).unwrap(), 0.5));
        assert_eq!(pearson(&x, &[1.0, 1.0, 1.0]), None);
    }

    #[test]
    fn correlation_matrix_shape_and_errors() {
        let t = table(&[
            ("a", "fc", 1.0),
            ("a", "ref", 3.0),
            ("b", "fc", 2.0),
            ("b", "ref", 2.0),
            ("c", "fc", 3.0),
            ("c", "ref", 1.0),
        ]);
        let m = pearson_correlation_matrix(&t).unwrap();
        assert_eq!(m.methods, vec!["fc", "ref"]);
        assert_eq!(m.r[0][0], 1.0);
        assert!(close(m.r[1][0], -1.0));
        assert_eq!(m.r[0][1], m.r[1][0]);

        let text = format_correlation_table(&m);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].trim_end().ends_with("1.000"));
        assert!(lines[2].contains("-1.000"));

        let mut incomplete = t.clone();
        incomplete.pop();
        assert!(matches!(
            pearson_correlation_matrix(&incomplete),
            Err(Error::IncompleteTable(_))
        ));
        let constant = table(&[("a", "x", 1.0), ("b", "x", 1.0), ("a", "y", 1.0), ("b", "y", 2.0)]);
        assert!(matches!(
            pearson_correlation_matrix(&constant),
            Err(Error::ConstantSeries(m)) if m == "x"
        ));
        let single = table(&[("a", "x", 1.0), ("a", "y", 2.0)]);
        assert!(pearson_correlation_matrix(&single).is_err());
        let dup = table(&[("a", "x", 1.0), ("a", "x", 2.0)]);
        assert!(pearson_correlation_matrix(&dup).is_err());
    }

    #[test]
    fn volume_table_csv() {
        let csv = "case_id,method,volume_ml\n c1 , fc , 1200.5\nc2,fc,980\n";
        let t = read_volume_table(csv.as_bytes()).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].method, "fc");
        assert_eq!(t[0].volume_ml, 1200.5);
        assert!(read_volume_table("case_id,method,volume_ml\nc1,fc,abc\n".as_bytes()).is_err());
    }

    #[test]
    fn manifest_csv_optional_columns() {
        let rows = read_manifest("case_id,reference_path,predicted_path\nc1,a.nii,b.nii\n".as_bytes())
            .unwrap();
        assert_eq!(rows[0].object, None);
        let rows = read_manifest(
            "case_id,reference_path,predicted_path,object,label\nc1,a.nii,b.nii,Left lung,2\n"
                .as_bytes(),
        )
        .unwrap();
        assert_eq!(rows[0].object.as_deref(), Some("Left lung"));
        assert_eq!(rows[0].label, Some(2.0));
    }

    #[test]
    fn overlap_table_layout() {
        let left = summary_stats(&[0.9, 1.0]).unwrap().named("Left lung");
        let right = summary_stats(&[0.8, 1.0]).unwrap().named("Right lung");
        let text = format_overlap_table(&[left, right]);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("obj"));
        assert!(lines[0].contains("median") && lines[0].contains("Q3"));
        assert!(lines[1].starts_with("Left lung"));
        assert!(lines[3].starts_with("score"));
        assert!(lines[3].trim_end().ends_with("0.925"));
    }
}
