//! Classification metrics over per-sample class scores.
//!
//! Undefined ratios (0/0) resolve to 0 and leave a warning in the report.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::util::fmt_f64;

pub const GRID_POINTS: usize = 1001;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no predictions to score")]
    Empty,
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("invalid prediction scores: {0}")]
    Invalid(String),
    #[error("ROC/PR undefined: {0}")]
    Degenerate(String),
    #[error("reading {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub sample_id: String,
    pub true_class: usize,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionScores {
    pub classes: Vec<String>,
    pub rows: Vec<ScoreRow>,
}

impl PredictionScores {
    pub fn new(classes: Vec<String>, rows: Vec<ScoreRow>) -> Result<Self, MetricsError> {
        let c = classes.len();
        if c == 0 {
            return Err(MetricsError::Invalid("no classes".into()));
        }
        let mut seen = HashSet::new();
        for r in &rows {
            if !seen.insert(r.sample_id.as_str()) {
                return Err(MetricsError::Invalid(format!("duplicate sample {:?}", r.sample_id)));
            }
            if r.true_class >= c {
                return Err(MetricsError::Invalid(format!(
                    "sample {:?} has class {} but only {c} classes exist",
                    r.sample_id, r.true_class
                )));
            }
            if r.scores.len() != c {
                return Err(MetricsError::Invalid(format!(
                    "sample {:?} has {} scores, expected {c}",
                    r.sample_id,
                    r.scores.len()
                )));
            }
            if r.scores.iter().any(|s| !s.is_finite()) {
                return Err(MetricsError::Invalid(format!("non-finite score for {:?}", r.sample_id)));
            }
        }
        Ok(PredictionScores { classes, rows })
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Reads `sample_id<TAB>true_class<TAB>score_0..score_{C-1}` with a
    /// header row. `true_class` is an integer class code. When `labels`
    /// (sample → class name) is given, class names are its sorted distinct
    /// values and every row must agree with it.
    pub fn read(path: &Path, labels: Option<&BTreeMap<String, String>>) -> Result<Self, MetricsError> {
        let text = fs::read_to_string(path).map_err(|source| MetricsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let perr = |line: usize, msg: String| MetricsError::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(MetricsError::Empty)?;
        let cols: Vec<&str> = header.split('\t').collect();
        if cols.len() < 3 || cols[0] != "sample_id" || cols[1] != "true_class" {
            return Err(perr(1, "header must be sample_id<TAB>true_class<TAB>score_0…".into()));
        }
        let c = cols.len() - 2;
        for (k, name) in cols[2..].iter().enumerate() {
            if *name != format!("score_{k}") {
                return Err(perr(1, format!("column {} should be score_{k}, found {name:?}", k + 3)));
            }
        }
        let classes: Vec<String> = match labels {
            Some(l) => {
                let names: BTreeSet<&String> = l.values().collect();
                if names.len() != c {
                    return Err(MetricsError::Invalid(format!(
                        "labels define {} classes but scores have {c} columns",
                        names.len()
                    )));
                }
                names.into_iter().cloned().collect()
            }
            None => (0..c).map(|k| k.to_string()).collect(),
        };
        let mut rows = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != c + 2 {
                return Err(perr(i + 1, format!("expected {} columns, found {}", c + 2, f.len())));
            }
            let true_class: usize = f[1]
                .trim()
                .parse()
                .map_err(|_| perr(i + 1, format!("true_class {:?} is not a class code", f[1])))?;
            let scores = f[2..]
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| perr(i + 1, format!("bad score {s:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let sample_id = f[0].to_string();
            if let Some(l) = labels {
                let name = l.get(&sample_id).ok_or_else(|| {
                    MetricsError::Invalid(format!("sample {sample_id:?} missing from labels"))
                })?;
                if classes.get(true_class) != Some(name) {
                    return Err(MetricsError::Invalid(format!(
                        "sample {sample_id:?}: true_class {true_class} disagrees with label {name:?}"
                    )));
                }
            }
            rows.push(ScoreRow {
                sample_id,
                true_class,
                scores,
            });
        }
        PredictionScores::new(classes, rows)
    }

    pub fn write<W: Write>(&self, mut w: W) -> io::Result<()> {
        write!(w, "sample_id\ttrue_class")?;
        for k in 0..self.n_classes() {
            write!(w, "\tscore_{k}")?;
        }
        writeln!(w)?;
        for r in &self.rows {
            write!(w, "{}\t{}", r.sample_id, r.true_class)?;
            for s in &r.scores {
                write!(w, "\t{}", fmt_f64(*s))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Row = true class, column = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix(pub Vec<Vec<u64>>);

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.0.len()
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    fn tp(&self, c: usize) -> u64 {
        self.0[c][c]
    }

    fn actual(&self, c: usize) -> u64 {
        self.0[c].iter().sum()
    }

    fn predicted(&self, c: usize) -> u64 {
        self.0.iter().map(|r| r[c]).sum()
    }
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Tallies (true, argmax) pairs; ties go to the lowest class index.
pub fn confusion_matrix(p: &PredictionScores) -> Result<ConfusionMatrix, MetricsError> {
    if p.rows.is_empty() {
        return Err(MetricsError::Empty);
    }
    let c = p.n_classes();
    let mut m = vec![vec![0u64; c]; c];
    for r in &p.rows {
        m[r.true_class][argmax(&r.scores)] += 1;
    }
    Ok(ConfusionMatrix(m))
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    let trace: u64 = (0..cm.n_classes()).map(|c| cm.tp(c)).sum();
    Ok(trace as f64 / total as f64)
}

fn ratio(num: u64, den: u64, what: &str, warnings: &mut Vec<String>) -> f64 {
    if den == 0 {
        warnings.push(format!("{what}: 0/0 set to 0"));
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

fn per_class(cm: &ConfusionMatrix, names: &[String], warnings: &mut Vec<String>) -> Vec<ClassMetrics> {
    let total = cm.total();
    (0..cm.n_classes())
        .map(|c| {
            let tp = cm.tp(c);
            let actual = cm.actual(c);
            let predicted = cm.predicted(c);
            let fp = predicted - tp;
            let tn = total - actual - fp;
            let name = &names[c];
            let precision = ratio(tp, predicted, &format!("precision[{name}]"), warnings);
            let recall = ratio(tp, actual, &format!("recall[{name}]"), warnings);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            let specificity = ratio(tn, tn + fp, &format!("specificity[{name}]"), warnings);
            ClassMetrics {
                class: name.clone(),
                support: actual,
                precision,
                recall,
                f1,
                sensitivity: recall,
                specificity,
            }
        })
        .collect()
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|c| c.to_string()).collect()
}

/// Unweighted mean of per-class F1.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64, MetricsError> {
    if cm.total() == 0 {
        return Err(MetricsError::Empty);
    }
    let pc = per_class(cm, &default_names(cm.n_classes()), &mut Vec::new());
    Ok(pc.iter().map(|m| m.f1).sum::<f64>() / pc.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensSpec {
    pub per_class: Vec<(f64, f64)>,
    pub macro_sensitivity: f64,
    pub macro_specificity: f64,
    pub warnings: Vec<String>,
}

/// One-vs-rest sensitivity and specificity per class plus macro means.
pub fn sensitivity_specificity(cm: &ConfusionMatrix) -> Result<SensSpec, MetricsError> {
    if cm.total() == 0 {
        return Err(MetricsError::Empty);
    }
    let mut warnings = Vec::new();
    let pc = per_class(cm, &default_names(cm.n_classes()), &mut warnings);
    let k = pc.len() as f64;
    Ok(SensSpec {
        per_class: pc.iter().map(|m| (m.sensitivity, m.specificity)).collect(),
        macro_sensitivity: pc.iter().map(|m| m.sensitivity).sum::<f64>() / k,
        macro_specificity: pc.iter().map(|m| m.specificity).sum::<f64>() / k,
        warnings,
    })
}

/// (positive count, negative count, [(fp, tp)] after each distinct threshold)
fn sweep(p: &PredictionScores, class: usize) -> (u64, u64, Vec<(u64, u64)>) {
    let mut s: Vec<(f64, bool)> = p
        .rows
        .iter()
        .map(|r| (r.scores[class], r.true_class == class))
        .collect();
    s.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let pos = s.iter().filter(|x| x.1).count() as u64;
    let neg = s.len() as u64 - pos;
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut i = 0;
    while i < s.len() {
        let t = s[i].0;
        while i < s.len() && s[i].0 == t {
            if s[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((fp, tp));
    }
    (pos, neg, out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Curve {
    pub class: String,
    /// (x, y): (FPR, TPR) for ROC, (recall, precision) for PR
    pub points: Vec<(f64, f64)>,
    /// ROC AUC or average precision
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroCurve {
    pub grid: Vec<f64>,
    pub macro_values: Vec<f64>,
    pub per_class_values: Vec<Vec<f64>>,
    pub per_class: Vec<Curve>,
    /// Area under the macro curve (trapezoid on the grid).
    pub macro_area: f64,
    pub skipped_classes: Vec<String>,
}

pub fn grid(points: usize) -> Vec<f64> {
    (0..points).map(|i| i as f64 / (points - 1) as f64).collect()
}

/// ROC staircase for one class, including (0,0) and ending at (1,1).
fn roc_points(p: &PredictionScores, class: usize) -> Option<Vec<(f64, f64)>> {
    let (pos, neg, sw) = sweep(p, class);
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut pts = vec![(0.0, 0.0)];
    pts.extend(sw.iter().map(|&(fp, tp)| (fp as f64 / neg as f64, tp as f64 / pos as f64)));
    Some(pts)
}

fn trapezoid(pts: &[(f64, f64)]) -> f64 {
    pts.windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Upper-envelope linear interpolation of a monotone staircase at `x`.
fn interp_upper(pts: &[(f64, f64)], x: f64) -> f64 {
    let last_le = pts.iter().rposition(|p| p.0 <= x).unwrap_or(0);
    let (x0, y0) = pts[last_le];
    match pts.get(last_le + 1) {
        Some(&(x1, y1)) if x1 > x0 => y0 + (y1 - y0) * (x - x0) / (x1 - x0),
        _ => y0,
    }
}

/// One-vs-rest ROC per class, TPR macro-averaged on a shared FPR grid.
/// Classes with no positives or no negatives are skipped.
pub fn macro_roc(p: &PredictionScores, grid_points: usize) -> Result<MacroCurve, MetricsError> {
    if p.rows.is_empty() {
        return Err(MetricsError::Empty);
    }
    let xs = grid(grid_points);
    let mut per_class = Vec::new();
    let mut per_class_values = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..p.n_classes() {
        match roc_points(p, c) {
            Some(pts) => {
                per_class_values.push(xs.iter().map(|&x| interp_upper(&pts, x)).collect());
                per_class.push(Curve {
                    class: p.classes[c].clone(),
                    area: trapezoid(&pts),
                    points: pts,
                });
            }
            None => skipped.push(p.classes[c].clone()),
        }
    }
    if per_class.is_empty() {
        return Err(MetricsError::Degenerate(
            "every class lacks either positives or negatives".into(),
        ));
    }
    let k = per_class.len() as f64;
    let macro_values: Vec<f64> = (0..xs.len())
        .map(|i| per_class_values.iter().map(|v: &Vec<f64>| v[i]).sum::<f64>() / k)
        .collect();
    let curve: Vec<(f64, f64)> = xs.iter().copied().zip(macro_values.iter().copied()).collect();
    Ok(MacroCurve {
        macro_area: trapezoid(&curve),
        grid: xs,
        macro_values,
        per_class_values,
        per_class,
        skipped_classes: skipped,
    })
}

fn pr_points(p: &PredictionScores, class: usize) -> Option<Vec<(f64, f64)>> {
    let (pos, _, sw) = sweep(p, class);
    if pos == 0 {
        return None;
    }
    Some(
        sw.iter()
            .map(|&(fp, tp)| (tp as f64 / pos as f64, tp as f64 / (tp + fp) as f64))
            .collect(),
    )
}

/// Step-wise average precision: Σ (R_k − R_{k−1}) · P_k.
fn average_precision(pts: &[(f64, f64)]) -> f64 {
    let mut prev = 0.0;
    let mut ap = 0.0;
    for &(r, pr) in pts {
        ap += (r - prev) * pr;
        prev = r;
    }
    ap
}

/// Interpolated precision: best precision at any recall ≥ r.
fn interp_precision(pts: &[(f64, f64)], r: f64) -> f64 {
    pts.iter()
        .filter(|p| p.0 >= r - 1e-12)
        .map(|p| p.1)
        .fold(0.0, f64::max)
}

/// One-vs-rest precision–recall per class, interpolated precision
/// macro-averaged on a shared recall grid.
pub fn macro_pr(p: &PredictionScores, grid_points: usize) -> Result<MacroCurve, MetricsError> {
    if p.rows.is_empty() {
        return Err(MetricsError::Empty);
    }
    let xs = grid(grid_points);
    let mut per_class = Vec::new();
    let mut per_class_values = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..p.n_classes() {
        match pr_points(p, c) {
            Some(pts) => {
                per_class_values.push(xs.iter().map(|&r| interp_precision(&pts, r)).collect());
                per_class.push(Curve {
                    class: p.classes[c].clone(),
                    area: average_precision(&pts),
                    points: pts,
                });
            }
            None => skipped.push(p.classes[c].clone()),
        }
    }
    if per_class.is_empty() {
        return Err(MetricsError::Degenerate("no class has positives".into()));
    }
    let k = per_class.len() as f64;
    let macro_values: Vec<f64> = (0..xs.len())
        .map(|i| per_class_values.iter().map(|v: &Vec<f64>| v[i]).sum::<f64>() / k)
        .collect();
    let curve: Vec<(f64, f64)> = xs.iter().copied().zip(macro_values.iter().copied()).collect();
    Ok(MacroCurve {
        macro_area: trapezoid(&curve),
        grid: xs,
        macro_values,
        per_class_values,
        per_class,
        skipped_classes: skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub n: u64,
    pub classes: Vec<String>,
    pub confusion_matrix: ConfusionMatrix,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub macro_sensitivity: f64,
    pub macro_specificity: f64,
    pub macro_roc_auc: Option<f64>,
    pub macro_average_precision: Option<f64>,
    pub per_class: Vec<ClassMetrics>,
    pub per_class_roc_auc: BTreeMap<String, f64>,
    pub per_class_average_precision: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

/// Everything the `metrics` command reports, plus the two curve tables.
pub fn evaluate(p: &PredictionScores) -> Result<(MetricsReport, Option<MacroCurve>, Option<MacroCurve>), MetricsError> {
    let cm = confusion_matrix(p)?;
    let mut warnings = Vec::new();
    let pc = per_class(&cm, &p.classes, &mut warnings);
    for (m, c) in pc.iter().zip(0..) {
        if cm.actual(c) == 0 {
            warnings.push(format!("class {} absent from truth", m.class));
        }
    }
    let k = pc.len() as f64;
    let roc = match macro_roc(p, GRID_POINTS) {
        Ok(r) => Some(r),
        Err(MetricsError::Degenerate(msg)) => {
            warnings.push(format!("ROC skipped: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    let pr = match macro_pr(p, GRID_POINTS) {
        Ok(r) => Some(r),
        Err(MetricsError::Degenerate(msg)) => {
            warnings.push(format!("PR skipped: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    for (name, r) in [("ROC", &roc), ("PR", &pr)] {
        if let Some(r) = r {
            for s in &r.skipped_classes {
                warnings.push(format!("{name}: class {s} skipped (single-sided truth)"));
            }
        }
    }
    let report = MetricsReport {
        n: cm.total(),
        classes: p.classes.clone(),
        accuracy: accuracy(&cm)?,
        macro_f1: pc.iter().map(|m| m.f1).sum::<f64>() / k,
        macro_sensitivity: pc.iter().map(|m| m.sensitivity).sum::<f64>() / k,
        macro_specificity: pc.iter().map(|m| m.specificity).sum::<f64>() / k,
        macro_roc_auc: roc.as_ref().map(|r| r.macro_area),
        macro_average_precision: pr
            .as_ref()
            .map(|r| r.per_class.iter().map(|c| c.area).sum::<f64>() / r.per_class.len() as f64),
        per_class_roc_auc: roc
            .iter()
            .flat_map(|r| r.per_class.iter().map(|c| (c.class.clone(), c.area)))
            .collect(),
        per_class_average_precision: pr
            .iter()
            .flat_map(|r| r.per_class.iter().map(|c| (c.class.clone(), c.area)))
            .collect(),
        confusion_matrix: cm,
        per_class: pc,
        warnings,
    };
    Ok((report, roc, pr))
}

/// Plot-ready table: grid column, macro column, one column per class.
pub fn write_curve_table<W: Write>(mut w: W, curve: &MacroCurve, x_name: &str, y_name: &str) -> io::Result<()> {
    write!(w, "{x_name}\tmacro_{y_name}")?;
    for c in &curve.per_class {
        write!(w, "\t{y_name}_{}", c.class)?;
    }
    writeln!(w)?;
    for (i, x) in curve.grid.iter().enumerate() {
        write!(w, "{}\t{}", fmt_f64(*x), fmt_f64(curve.macro_values[i]))?;
        for v in &curve.per_class_values {
            write!(w, "\t{}", fmt_f64(v[i]))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn scores(rows: &[(usize, &[f64])]) -> PredictionScores {
        let c = rows[0].1.len();
        PredictionScores::new(
            (0..c).map(|k| k.to_string()).collect(),
            rows.iter()
                .enumerate()
                .map(|(i, (y, s))| ScoreRow {
                    sample_id: format!("s{i}"),
                    true_class: *y,
                    scores: s.to_vec(),
                })
                .collect(),
        )
        .unwrap()
    }

    fn hand_cm() -> ConfusionMatrix {
        // y = [0,0,1,1], argmax = [0,1,1,1]
        let p = scores(&[(0, &[0.9, 0.1]), (0, &[0.2, 0.8]), (1, &[0.3, 0.7]), (1, &[0.4, 0.6])]);
        confusion_matrix(&p).unwrap()
    }

    #[test]
    fn confusion_tally() {
        assert_eq!(hand_cm(), ConfusionMatrix(vec![vec![1, 1], vec![0, 2]]));
        let perfect = scores(&[(0, &[1.0, 0.0]), (1, &[0.0, 1.0]), (1, &[0.2, 0.8])]);
        assert_eq!(confusion_matrix(&perfect).unwrap().0, vec![vec![1, 0], vec![0, 2]]);
        let single = scores(&[(1, &[0.1, 0.2, 0.7])]);
        assert_eq!(confusion_matrix(&single).unwrap().total(), 1);
        // ties go to the lowest index
        let tie = scores(&[(1, &[0.5, 0.5])]);
        assert_eq!(confusion_matrix(&tie).unwrap().0, vec![vec![0, 0], vec![1, 0]]);
        let empty = PredictionScores::new(vec!["a".into()], vec![]).unwrap();
        assert!(matches!(confusion_matrix(&empty), Err(MetricsError::Empty)));
    }

    #[test]
    fn hand_fixture_scalars() {
        let cm = hand_cm();
        assert_eq!(accuracy(&cm).unwrap(), 0.75);
        assert_abs_diff_eq!(macro_f1(&cm).unwrap(), (2.0 / 3.0 + 0.8) / 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(macro_f1(&cm).unwrap(), 0.7333333333, epsilon = 1e-9);
        let ss = sensitivity_specificity(&cm).unwrap();
        assert_eq!(ss.per_class, vec![(0.5, 1.0), (1.0, 0.5)]);
        assert_eq!((ss.macro_sensitivity, ss.macro_specificity), (0.75, 0.75));
        assert_eq!(accuracy(&ConfusionMatrix(vec![vec![0, 3], vec![2, 0]])).unwrap(), 0.0);
        assert_eq!(accuracy(&ConfusionMatrix(vec![vec![3, 0], vec![0, 2]])).unwrap(), 1.0);
    }

    #[test]
    fn majority_collapse_f1() {
        let cm = ConfusionMatrix(vec![vec![5, 0], vec![5, 0]]);
        assert_abs_diff_eq!(macro_f1(&cm).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
        let ss = sensitivity_specificity(&cm).unwrap();
        assert!(ss.warnings.iter().any(|w| w.contains("precision[1]")));
        // class absent in truth: sensitivity 0 by convention, with a warning
        let absent = ConfusionMatrix(vec![vec![4, 0], vec![0, 0]]);
        let ss = sensitivity_specificity(&absent).unwrap();
        assert_eq!(ss.per_class[1].0, 0.0);
        assert!(ss.warnings.iter().any(|w| w.contains("recall[1]")));
    }

    #[test]
    fn roc_extremes() {
        let perfect = scores(&[(0, &[0.9, 0.1]), (0, &[0.8, 0.2]), (1, &[0.3, 0.7]), (1, &[0.1, 0.9])]);
        let r = macro_roc(&perfect, GRID_POINTS).unwrap();
        assert_abs_diff_eq!(r.macro_area, 1.0, epsilon = 1e-12);
        let constant = scores(&[(0, &[0.5, 0.5]), (0, &[0.5, 0.5]), (1, &[0.5, 0.5]), (1, &[0.5, 0.5])]);
        let r = macro_roc(&constant, GRID_POINTS).unwrap();
        assert_abs_diff_eq!(r.macro_area, 0.5, epsilon = 1e-9);
        let one_class = scores(&[(0, &[0.5]), (0, &[0.2])]);
        assert!(matches!(macro_roc(&one_class, GRID_POINTS), Err(MetricsError::Degenerate(_))));
    }

    #[test]
    fn roc_hand_staircase() {
        // class 1 scores: 0.9 pos, 0.8 neg, 0.7 pos, 0.1 neg
        let p = scores(&[(1, &[0.1, 0.9]), (0, &[0.2, 0.8]), (1, &[0.3, 0.7]), (0, &[0.9, 0.1])]);
        let pts = roc_points(&p, 1).unwrap();
        assert_eq!(pts, vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]);
        assert_eq!(trapezoid(&pts), 0.75);
        assert_eq!(interp_upper(&pts, 0.0), 0.5);
        assert_eq!(interp_upper(&pts, 0.25), 0.5);
        assert_eq!(interp_upper(&pts, 0.5), 1.0);
    }

    #[test]
    fn pr_curves() {
        let p = scores(&[(1, &[0.1, 0.9]), (0, &[0.2, 0.8]), (1, &[0.3, 0.7]), (0, &[0.9, 0.1])]);
        let pts = pr_points(&p, 1).unwrap();
        assert_eq!(pts, vec![(0.5, 1.0), (0.5, 0.5), (1.0, 2.0 / 3.0), (1.0, 0.5)]);
        assert_abs_diff_eq!(average_precision(&pts), 0.5 + 0.5 * 2.0 / 3.0, epsilon = 1e-12);
        assert_eq!(interp_precision(&pts, 0.3), 1.0);
        assert_eq!(interp_precision(&pts, 0.75), 2.0 / 3.0);

        let perfect = scores(&[(0, &[0.9, 0.1]), (1, &[0.3, 0.7]), (1, &[0.1, 0.9])]);
        let r = macro_pr(&perfect, 11).unwrap();
        assert!(r.macro_values.iter().all(|v| *v == 1.0));

        // prevalence of class 1 is 0.25
        let constant = scores(&[(0, &[0.5, 0.5]), (0, &[0.5, 0.5]), (0, &[0.5, 0.5]), (1, &[0.5, 0.5])]);
        let r = macro_pr(&constant, 11).unwrap();
        assert!(r.per_class_values[1].iter().all(|v| (*v - 0.25).abs() < 1e-12));
        assert!(r.per_class_values[0].iter().all(|v| (*v - 0.75).abs() < 1e-12));
    }

    #[test]
    fn scores_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = scores(&[(0, &[0.9, 0.1]), (1, &[0.25, 0.75])]);
        let path = dir.path().join("scores.tsv");
        let mut buf = Vec::new();
        p.write(&mut buf).unwrap();
        fs::write(&path, &buf).unwrap();
        assert_eq!(PredictionScores::read(&path, None).unwrap(), p);
        let labels: BTreeMap<String, String> =
            [("s0", "healthy"), ("s1", "tumor")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        let named = PredictionScores::read(&path, Some(&labels)).unwrap();
        assert_eq!(named.classes, vec!["healthy", "tumor"]);
        let wrong: BTreeMap<String, String> =
            [("s0", "tumor"), ("s1", "healthy")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        assert!(matches!(PredictionScores::read(&path, Some(&wrong)), Err(MetricsError::Invalid(_))));
    }

    #[test]
    fn invalid_rows_rejected() {
        let bad = PredictionScores::new(
            vec!["a".into(), "b".into()],
            vec![ScoreRow { sample_id: "x".into(), true_class: 2, scores: vec![0.0, 1.0] }],
        );
        assert!(bad.is_err());
        let nan = PredictionScores::new(
            vec!["a".into()],
            vec![ScoreRow { sample_id: "x".into(), true_class: 0, scores: vec![f64::NAN] }],
        );
        assert!(nan.is_err());
    }

    fn arb_scores() -> impl Strategy<Value = PredictionScores> {
        (2usize..5, 4usize..30).prop_flat_map(|(c, n)| {
            (
                proptest::collection::vec(0..c, n),
                proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, c), n),
            )
                .prop_map(move |(ys, ss)| {
                    PredictionScores::new(
                        (0..c).map(|k| format!("c{k}")).collect(),
                        ys.into_iter()
                            .zip(ss)
                            .enumerate()
                            .map(|(i, (y, s))| ScoreRow { sample_id: format!("s{i}"), true_class: y, scores: s })
                            .collect(),
                    )
                    .unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn bounded_and_total(p in arb_scores()) {
            let cm = confusion_matrix(&p).unwrap();
            prop_assert_eq!(cm.total(), p.rows.len() as u64);
            let acc = accuracy(&cm).unwrap();
            let f1 = macro_f1(&cm).unwrap();
            prop_assert!((0.0..=1.0).contains(&acc));
            prop_assert!((0.0..=1.0).contains(&f1));
        }

        #[test]
        fn class_permutation_keeps_macros(p in arb_scores(), rot in 1usize..4) {
            let c = p.n_classes();
            let perm: Vec<usize> = (0..c).map(|k| (k + rot) % c).collect();
            // to avoid argmax tie effects, only compare when scores are distinct per row
            prop_assume!(p.rows.iter().all(|r| {
                let mut s = r.scores.clone();
                s.sort_by(|a, b| a.partial_cmp(b).unwrap());
                s.windows(2).all(|w| w[0] != w[1])
            }));
            let q = PredictionScores::new(
                perm.iter().map(|&k| p.classes[k].clone()).collect(),
                p.rows.iter().map(|r| ScoreRow {
                    sample_id: r.sample_id.clone(),
                    true_class: perm.iter().position(|&k| k == r.true_class).unwrap(),
                    scores: perm.iter().map(|&k| r.scores[k]).collect(),
                }).collect(),
            ).unwrap();
            let (a, _, _) = evaluate(&p).unwrap();
            let (b, _, _) = evaluate(&q).unwrap();
            prop_assert!((a.macro_f1 - b.macro_f1).abs() < 1e-12);
            prop_assert!((a.accuracy - b.accuracy).abs() < 1e-12);
            prop_assert!((a.macro_sensitivity - b.macro_sensitivity).abs() < 1e-12);
            match (a.macro_roc_auc, b.macro_roc_auc) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
                (x, y) => prop_assert_eq!(x.is_some(), y.is_some()),
            }
            for (k, m) in b.per_class.iter().enumerate() {
                prop_assert_eq!(&a.per_class[perm[k]], m);
            }
        }

        #[test]
        fn roc_invariant_under_monotone_transform(p in arb_scores()) {
            let q = PredictionScores::new(
                p.classes.clone(),
                p.rows.iter().map(|r| ScoreRow {
                    sample_id: r.sample_id.clone(),
                    true_class: r.true_class,
                    scores: r.scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect(),
                }).collect(),
            ).unwrap();
            match (macro_roc(&p, GRID_POINTS), macro_roc(&q, GRID_POINTS)) {
                (Ok(a), Ok(b)) => prop_assert!((a.macro_area - b.macro_area).abs() < 1e-12),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "one side failed"),
            }
        }
    }
}
