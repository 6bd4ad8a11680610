//! Expression matrix ingestion and the numeric derivations built on it:
//! log transform, highly-variable-gene selection, sample-wise and gene-wise
//! z-scores, the co-expression (PCC) node feature, and per-sample
//! dysregulated gene sets.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, ArrayView1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geneid::{canonicalize, GeneIdMapping, Namespace};
use crate::graph::GeneSymbol;
use crate::util::fmt_f64;

pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ExpressionError {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("negative expression {value} for gene {gene} in sample {sample}; log1p needs values >= 0")]
    NegativeValue {
        gene: String,
        sample: String,
        value: f64,
    },
    #[error("duplicate {kind} id {id:?}")]
    Duplicate { kind: &'static str, id: String },
    #[error("matrix is empty after {0}")]
    Empty(&'static str),
    #[error("reading {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    #[default]
    GenesInRows,
    GenesInCols,
}

/// Matrix as read from disk, before identifier canonicalization.
#[derive(Debug, Clone, PartialEq)]
pub struct RawMatrix {
    pub row_ids: Vec<String>,
    pub samples: Vec<String>,
    pub values: Array2<f64>,
}

impl RawMatrix {
    /// Reads a delimited matrix: header row of sample ids, first column of
    /// gene ids. The delimiter is a tab when the header contains one,
    /// otherwise a comma.
    pub fn read(path: &Path, orientation: Orientation) -> Result<Self, ExpressionError> {
        let text = fs::read_to_string(path).map_err(|source| ExpressionError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path, orientation)
    }

    pub fn parse(text: &str, path: &Path, orientation: Orientation) -> Result<Self, ExpressionError> {
        let perr = |line: usize, msg: String| ExpressionError::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, header) = lines.next().ok_or_else(|| perr(1, "empty matrix file".into()))?;
        let delim = if header.contains('\t') { '\t' } else { ',' };
        let header: Vec<String> = header
            .trim_end_matches('\r')
            .split(delim)
            .skip(1)
            .map(|s| s.trim().to_string())
            .collect();
        if header.is_empty() {
            return Err(perr(1, "header has no data columns".into()));
        }
        let mut row_ids = Vec::new();
        let mut data = Vec::new();
        for (i, line) in lines {
            let cols: Vec<&str> = line.trim_end_matches('\r').split(delim).collect();
            if cols.len() != header.len() + 1 {
                return Err(perr(
                    i + 1,
                    format!("expected {} columns, found {}", header.len() + 1, cols.len()),
                ));
            }
            row_ids.push(cols[0].trim().to_string());
            for c in &cols[1..] {
                let v: f64 = c
                    .trim()
                    .parse()
                    .map_err(|_| perr(i + 1, format!("not a number: {c:?}")))?;
                if !v.is_finite() {
                    return Err(perr(i + 1, format!("non-finite value {c:?}")));
                }
                data.push(v);
            }
        }
        let values = Array2::from_shape_vec((row_ids.len(), header.len()), data)
            .expect("row lengths checked above");
        let m = match orientation {
            Orientation::GenesInRows => RawMatrix {
                row_ids,
                samples: header,
                values,
            },
            Orientation::GenesInCols => RawMatrix {
                row_ids: header,
                samples: row_ids,
                values: values.t().to_owned(),
            },
        };
        check_unique("sample", &m.samples)?;
        if m.row_ids.is_empty() {
            return Err(ExpressionError::Empty("reading"));
        }
        Ok(m)
    }
}

fn check_unique<'a, I: IntoIterator<Item = &'a String>>(kind: &'static str, ids: I) -> Result<(), ExpressionError> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ExpressionError::Duplicate {
                kind,
                id: id.clone(),
            });
        }
    }
    Ok(())
}

/// Genes × samples matrix with HGNC row identifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpressionMatrix {
    genes: Vec<GeneSymbol>,
    samples: Vec<String>,
    values: Array2<f64>,
}

impl ExpressionMatrix {
    pub fn new(genes: Vec<GeneSymbol>, samples: Vec<String>, values: Array2<f64>) -> Result<Self, ExpressionError> {
        if genes.is_empty() || samples.is_empty() {
            return Err(ExpressionError::Empty("construction"));
        }
        assert_eq!(values.dim(), (genes.len(), samples.len()), "shape mismatch");
        let mut seen = HashSet::new();
        for g in &genes {
            if !seen.insert(g) {
                return Err(ExpressionError::Duplicate {
                    kind: "gene",
                    id: g.to_string(),
                });
            }
        }
        check_unique("sample", &samples)?;
        if let Some(((r, c), v)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(ExpressionError::Parse {
                path: PathBuf::new(),
                line: r + 1,
                msg: format!("non-finite value {v} in sample {}", samples[c]),
            });
        }
        Ok(ExpressionMatrix {
            genes,
            samples,
            values,
        })
    }

    pub fn genes(&self) -> &[GeneSymbol] {
        &self.genes
    }

    pub fn samples(&self) -> &[String] {
        &self.samples
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    pub fn gene_set(&self) -> BTreeSet<GeneSymbol> {
        self.genes.iter().cloned().collect()
    }

    fn select_rows(&self, rows: &[usize]) -> ExpressionMatrix {
        ExpressionMatrix {
            genes: rows.iter().map(|&r| self.genes[r].clone()).collect(),
            samples: self.samples.clone(),
            values: self.values.select(Axis(0), rows),
        }
    }

    /// Writes the matrix as TSV with a `gene` header cell.
    pub fn write_tsv<W: Write>(&self, w: W) -> io::Result<()> {
        write_gene_table(w, &self.genes, &self.samples, &self.values)
    }

    pub fn read_tsv(path: &Path) -> Result<Self, ExpressionError> {
        let raw = RawMatrix::read(path, Orientation::GenesInRows)?;
        let genes = raw
            .row_ids
            .iter()
            .enumerate()
            .map(|(i, id)| {
                GeneSymbol::new(id).ok_or_else(|| ExpressionError::Parse {
                    path: path.to_path_buf(),
                    line: i + 2,
                    msg: format!("invalid gene symbol {id:?}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        ExpressionMatrix::new(genes, raw.samples, raw.values)
    }
}

pub fn write_gene_table<W: Write>(
    mut w: W,
    genes: &[GeneSymbol],
    samples: &[String],
    values: &Array2<f64>,
) -> io::Result<()> {
    write!(w, "gene")?;
    for s in samples {
        write!(w, "\t{s}")?;
    }
    writeln!(w)?;
    for (g, row) in genes.iter().zip(values.rows()) {
        write!(w, "{g}")?;
        for v in row {
            write!(w, "\t{}", fmt_f64(*v))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// What happened to each raw row during canonicalization.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CanonicalizationReport {
    pub unmapped: Vec<String>,
    pub non_coding: Vec<String>,
    /// (raw id, symbol it collapsed into)
    pub collapsed: Vec<(String, String)>,
}

/// Maps raw row ids to HGNC symbols. Ids without a `ns:` prefix are
/// qualified with `default_ns`. Rows mapping to the same symbol collapse to
/// the one with the highest mean expression (first wins ties).
pub fn canonicalize_matrix(
    raw: &RawMatrix,
    table: &GeneIdMapping,
    default_ns: Namespace,
    require_protein_coding: bool,
) -> Result<(ExpressionMatrix, CanonicalizationReport), ExpressionError> {
    let mut report = CanonicalizationReport::default();
    let mut chosen: Vec<(GeneSymbol, usize, f64)> = Vec::new();
    let mut slot_of: HashMap<GeneSymbol, usize> = HashMap::new();
    for (r, id) in raw.row_ids.iter().enumerate() {
        let key = if id.contains(':') {
            id.clone()
        } else {
            default_ns.qualify(id)
        };
        let Some(entry) = table.get(&key) else {
            report.unmapped.push(id.clone());
            continue;
        };
        let Some(symbol) = canonicalize(&key, table, require_protein_coding) else {
            debug_assert!(!entry.protein_coding);
            report.non_coding.push(id.clone());
            continue;
        };
        let mean = raw.values.row(r).mean().unwrap_or(0.0);
        match slot_of.get(&symbol) {
            Some(&s) => {
                let (_, prev_row, prev_mean) = chosen[s].clone();
                if mean > prev_mean {
                    report.collapsed.push((raw.row_ids[prev_row].clone(), symbol.to_string()));
                    chosen[s] = (symbol, r, mean);
                } else {
                    report.collapsed.push((id.clone(), symbol.to_string()));
                }
            }
            None => {
                slot_of.insert(symbol.clone(), chosen.len());
                chosen.push((symbol, r, mean));
            }
        }
    }
    if chosen.is_empty() {
        return Err(ExpressionError::Empty("identifier canonicalization"));
    }
    let rows: Vec<usize> = chosen.iter().map(|c| c.1).collect();
    let genes = chosen.into_iter().map(|c| c.0).collect();
    let m = ExpressionMatrix::new(genes, raw.samples.clone(), raw.values.select(Axis(0), &rows))?;
    Ok((m, report))
}

/// Natural log of (1 + x) applied elementwise.
pub fn log1p_transform(m: &ExpressionMatrix) -> Result<ExpressionMatrix, ExpressionError> {
    if let Some(((r, c), v)) = m.values.indexed_iter().find(|(_, v)| **v < 0.0) {
        return Err(ExpressionError::NegativeValue {
            gene: m.genes[r].to_string(),
            sample: m.samples[c].clone(),
            value: *v,
        });
    }
    Ok(ExpressionMatrix {
        genes: m.genes.clone(),
        samples: m.samples.clone(),
        values: m.values.mapv(f64::ln_1p),
    })
}

fn mean_and_pop_sd(v: ArrayView1<'_, f64>) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.sum() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Population variance of each gene across samples.
pub fn gene_variances(m: &ExpressionMatrix) -> Array1<f64> {
    m.values
        .rows()
        .into_iter()
        .map(|r| {
            let (_, sd) = mean_and_pop_sd(r);
            sd * sd
        })
        .collect()
}

/// Keeps the `n` most variable genes (ties broken by row order). The kept
/// rows stay in their original order.
pub fn select_hvg(m: &ExpressionMatrix, n: usize) -> ExpressionMatrix {
    assert!(n >= 1, "hvg count must be positive");
    if n >= m.n_genes() {
        return m.clone();
    }
    let var = gene_variances(m);
    let mut order: Vec<usize> = (0..m.n_genes()).collect();
    order.sort_by(|&a, &b| var[b].partial_cmp(&var[a]).unwrap_or(Ordering::Equal));
    let mut keep = order[..n].to_vec();
    keep.sort_unstable();
    m.select_rows(&keep)
}

fn standardize_lanes(values: &Array2<f64>, axis: Axis, epsilon: f64) -> Array2<f64> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let mut out = values.clone();
    out.axis_iter_mut(axis).into_par_iter().for_each(|mut lane| {
        let (mean, sd) = mean_and_pop_sd(lane.view());
        lane.mapv_inplace(|x| (x - mean) / (sd + epsilon));
    });
    out
}

/// z-scores within each sample (column) over genes, with population σ.
pub fn samplewise_zscores(m: &ExpressionMatrix, epsilon: f64) -> Array2<f64> {
    standardize_lanes(&m.values, Axis(1), epsilon)
}

/// z-scores within each gene (row) over samples, with population σ.
pub fn genewise_zscores(m: &ExpressionMatrix, epsilon: f64) -> Array2<f64> {
    standardize_lanes(&m.values, Axis(0), epsilon)
}

/// `r[g,h] = (1/N) Σ_i zg[g,i]·zg[h,i]` over gene-wise z-scores.
pub fn pcc_matrix(zg: &Array2<f64>) -> Array2<f64> {
    let n = zg.ncols() as f64;
    let mut r = zg.dot(&zg.t()) / n;
    // exact symmetry regardless of the BLAS-free dot's summation order
    let g = r.nrows();
    for i in 0..g {
        for j in (i + 1)..g {
            let v = 0.5 * (r[[i, j]] + r[[j, i]]);
            r[[i, j]] = v;
            r[[j, i]] = v;
        }
    }
    r
}

fn top_k_mean(mut abs: Vec<f64>, k: usize) -> f64 {
    if abs.is_empty() {
        return 0.0;
    }
    let k = k.min(abs.len());
    if k < abs.len() {
        abs.select_nth_unstable_by(k - 1, |a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    }
    abs[..k].iter().sum::<f64>() / k as f64
}

/// Mean |r| between each gene and its `k` most correlated other genes.
pub fn pcc_node_feature(r: &Array2<f64>, k: usize) -> Array1<f64> {
    assert!(k >= 1, "k must be positive");
    let g = r.nrows();
    (0..g)
        .into_par_iter()
        .map(|i| {
            let abs: Vec<f64> = (0..g).filter(|&h| h != i).map(|h| r[[i, h]].abs()).collect();
            top_k_mean(abs, k)
        })
        .collect::<Vec<_>>()
        .into()
}

/// Same result as `pcc_node_feature(&pcc_matrix(zg), k)` without holding the
/// G×G matrix; used for cohort-sized gene sets.
pub fn pcc_feature_streaming(zg: &Array2<f64>, k: usize) -> Array1<f64> {
    assert!(k >= 1, "k must be positive");
    let g = zg.nrows();
    let n = zg.ncols() as f64;
    (0..g)
        .into_par_iter()
        .map(|i| {
            let row = zg.row(i);
            let abs: Vec<f64> = (0..g)
                .filter(|&h| h != i)
                .map(|h| (row.dot(&zg.row(h)) / n).abs())
                .collect();
            top_k_mean(abs, k)
        })
        .collect::<Vec<_>>()
        .into()
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile_linear(values: &[f64], tau: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty slice");
    assert!((0.0..=100.0).contains(&tau), "tau must be in [0, 100]");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    let pos = tau / 100.0 * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        v[lo]
    } else {
        (v[lo] + frac * (v[hi] - v[lo])).min(v[hi])
    }
}

/// Genes whose |z| is at or above the τ-th percentile of |z| in the sample.
pub fn dysregulated_genes(z_column: ArrayView1<'_, f64>, genes: &[GeneSymbol], tau: f64) -> BTreeSet<GeneSymbol> {
    assert_eq!(z_column.len(), genes.len(), "z column / gene list length mismatch");
    if genes.is_empty() {
        return BTreeSet::new();
    }
    let abs: Vec<f64> = z_column.iter().map(|z| z.abs()).collect();
    let q = percentile_linear(&abs, tau);
    genes
        .iter()
        .zip(&abs)
        .filter(|(_, a)| **a >= q)
        .map(|(g, _)| g.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geneid::MappingEntry;
    use crate::graph::sym;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn matrix(rows: &[&[f64]]) -> ExpressionMatrix {
        let g = rows.len();
        let n = rows[0].len();
        let data: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        ExpressionMatrix::new(
            (0..g).map(|i| sym(&format!("G{i}"))).collect(),
            (0..n).map(|i| format!("s{i}")).collect(),
            Array2::from_shape_vec((g, n), data).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn log1p_values() {
        let m = matrix(&[&[0.0, std::f64::consts::E - 1.0]]);
        let t = log1p_transform(&m).unwrap();
        assert_eq!(t.values()[[0, 0]], 0.0);
        assert_abs_diff_eq!(t.values()[[0, 1]], 1.0, epsilon = 1e-15);
        let zeros = matrix(&[&[0.0, 0.0], &[0.0, 0.0]]);
        assert_eq!(log1p_transform(&zeros).unwrap(), zeros);
        let neg = matrix(&[&[1.0, -2.0]]);
        match log1p_transform(&neg) {
            Err(ExpressionError::NegativeValue { gene, sample, .. }) => {
                assert_eq!((gene.as_str(), sample.as_str()), ("G0", "s1"))
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn hvg_ranking_and_ties() {
        // variances 0, 1, 4
        let m = matrix(&[&[1.0, 1.0], &[0.0, 2.0], &[0.0, 4.0]]);
        let top = select_hvg(&m, 2);
        assert_eq!(top.genes(), &[sym("G1"), sym("G2")]);
        assert_eq!(select_hvg(&m, 3), m);
        assert_eq!(select_hvg(&m, 10), m);
        let tied = matrix(&[&[0.0, 2.0], &[5.0, 7.0]]);
        assert_eq!(select_hvg(&tied, 1).genes(), &[sym("G0")]);
    }

    #[test]
    fn samplewise_three_values() {
        let m = matrix(&[&[1.0], &[2.0], &[3.0]]);
        let z = samplewise_zscores(&m, DEFAULT_EPSILON);
        let expect = [-1.224744871391589, 0.0, 1.224744871391589];
        for (a, b) in z.column(0).iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-6);
        }
        let constant = matrix(&[&[5.0], &[5.0], &[5.0]]);
        assert!(samplewise_zscores(&constant, DEFAULT_EPSILON).iter().all(|v| *v == 0.0));
        let single = matrix(&[&[3.0, 9.0]]);
        assert!(samplewise_zscores(&single, DEFAULT_EPSILON).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn genewise_three_values() {
        let m = matrix(&[&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]]);
        let z = genewise_zscores(&m, DEFAULT_EPSILON);
        assert_abs_diff_eq!(z[[0, 0]], -1.224744871391589, epsilon = 1e-6);
        assert_abs_diff_eq!(z[[0, 1]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(z[[0, 2]], 1.224744871391589, epsilon = 1e-6);
        assert!(z.row(1).iter().all(|v| *v == 0.0));
        let one_sample = matrix(&[&[1.0], &[7.0]]);
        assert!(genewise_zscores(&one_sample, DEFAULT_EPSILON).iter().all(|v| *v == 0.0));
    }

    // values frozen from an independent numpy evaluation of the same formulas
    const R3: [[f64; 3]; 3] = [
        [0.9999999821114565, 0.5999999892668739, 0.8315218275608288],
        [0.5999999892668739, 0.9999999821114565, 0.07559289341462079],
        [0.8315218275608288, 0.07559289341462079, 0.999999986477532],
    ];

    #[test]
    fn pcc_matches_hand_fixture() {
        let m = matrix(&[&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0], &[1.0, 3.0, 2.0, 5.0]]);
        let r = pcc_matrix(&genewise_zscores(&m, DEFAULT_EPSILON));
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(r[[i, j]], R3[i][j], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn pcc_self_and_anti_correlation() {
        let m = matrix(&[&[1.0, 5.0, 2.0], &[1.0, 5.0, 2.0], &[-1.0, -5.0, -2.0]]);
        let r = pcc_matrix(&genewise_zscores(&m, DEFAULT_EPSILON));
        assert_abs_diff_eq!(r[[0, 1]], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(r[[0, 2]], -1.0, epsilon = 1e-7);
    }

    #[test]
    fn pcc_feature_top_k() {
        let m = matrix(&[
            &[1.0, 2.0, 3.0, 4.0],
            &[2.0, 1.0, 4.0, 3.0],
            &[1.0, 3.0, 2.0, 5.0],
            &[4.0, 1.0, 2.0, 0.0],
        ]);
        let zg = genewise_zscores(&m, DEFAULT_EPSILON);
        let c = pcc_node_feature(&pcc_matrix(&zg), 2);
        let expect = [0.8315218275608288, 0.3377964413407474, 0.887189478834108, 0.887189478834108];
        for (a, b) in c.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
        // k >= G-1 saturates to the mean of all off-diagonal |r|
        let all = pcc_node_feature(&pcc_matrix(&zg), 50);
        let expect = [0.7543478814628438, 0.2503952586987052, 0.616657283694279, 0.616657283694279];
        for (a, b) in all.iter().zip(expect) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-9);
        }
        let streamed = pcc_feature_streaming(&zg, 2);
        for (a, b) in streamed.iter().zip(c.iter()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn pcc_feature_identical_pair() {
        let m = matrix(&[&[1.0, 2.0, 0.0], &[1.0, 2.0, 0.0]]);
        let c = pcc_node_feature(&pcc_matrix(&genewise_zscores(&m, DEFAULT_EPSILON)), 1);
        assert_abs_diff_eq!(c[0], 1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(c[1], 1.0, epsilon = 1e-7);
        let single = matrix(&[&[1.0, 2.0]]);
        let c = pcc_node_feature(&pcc_matrix(&genewise_zscores(&single, DEFAULT_EPSILON)), 5);
        assert_eq!(c[0], 0.0);
    }

    #[test]
    fn percentile_threshold() {
        assert_abs_diff_eq!(percentile_linear(&[0.1, 0.5, 1.0, 2.0, 3.0], 80.0), 2.2, epsilon = 1e-12);
        let genes: Vec<_> = (0..5).map(|i| sym(&format!("G{i}"))).collect();
        let z = array![0.1, -0.5, 1.0, -2.0, 3.0];
        let d = dysregulated_genes(z.view(), &genes, 80.0);
        assert_eq!(d, [sym("G4")].into_iter().collect());
        assert_eq!(dysregulated_genes(z.view(), &genes, 0.0).len(), 5);
        let flat = array![-1.5, 1.5, 1.5, -1.5, 1.5];
        assert_eq!(dysregulated_genes(flat.view(), &genes, 80.0).len(), 5);
    }

    #[test]
    fn reads_both_orientations() {
        let rows = "gene\ts1\ts2\nA\t1\t2\nB\t3\t4\n";
        let m = RawMatrix::parse(rows, Path::new("m.tsv"), Orientation::GenesInRows).unwrap();
        assert_eq!(m.values, array![[1.0, 2.0], [3.0, 4.0]]);
        let cols = "sample,A,B\ns1,1,3\ns2,2,4\n";
        let t = RawMatrix::parse(cols, Path::new("m.csv"), Orientation::GenesInCols).unwrap();
        assert_eq!(t, m);
        let ragged = "gene\ts1\ts2\nA\t1\n";
        assert!(matches!(
            RawMatrix::parse(ragged, Path::new("m.tsv"), Orientation::GenesInRows),
            Err(ExpressionError::Parse { line: 2, .. })
        ));
        let nan = "gene\ts1\nA\tNaN\n";
        assert!(RawMatrix::parse(nan, Path::new("m.tsv"), Orientation::GenesInRows).is_err());
        let dup = "gene\ts1\ts1\nA\t1\t2\n";
        assert!(matches!(
            RawMatrix::parse(dup, Path::new("m.tsv"), Orientation::GenesInRows),
            Err(ExpressionError::Duplicate { .. })
        ));
    }

    #[test]
    fn canonicalization_filters_and_collapses() {
        let raw = RawMatrix::parse(
            "gene\ts1\ts2\nENSG01.3\t1\t1\nENSG02.1\t5\t5\nENSG03\t9\t9\nENSG04\t0\t0\nENSG05\t2\t2\n",
            Path::new("m.tsv"),
            Orientation::GenesInRows,
        )
        .unwrap();
        let mut t = GeneIdMapping::new();
        let e = |s: &str, pc| MappingEntry { symbol: sym(s), protein_coding: pc };
        t.insert("ensembl:ENSG01", e("A", true));
        t.insert("ensembl:ENSG02", e("A", true));
        t.insert("ensembl:ENSG03", e("B", false));
        t.insert("ensembl:ENSG05", e("C", true));
        let (m, rep) = canonicalize_matrix(&raw, &t, Namespace::Ensembl, true).unwrap();
        assert_eq!(m.genes(), &[sym("A"), sym("C")]);
        // higher-mean duplicate wins
        assert_eq!(m.values().row(0).to_vec(), vec![5.0, 5.0]);
        assert_eq!(rep.unmapped, vec!["ENSG04"]);
        assert_eq!(rep.non_coding, vec!["ENSG03"]);
        assert_eq!(rep.collapsed, vec![("ENSG01.3".to_string(), "A".to_string())]);
    }

    fn arb_matrix() -> impl Strategy<Value = ExpressionMatrix> {
        (1usize..12, 1usize..8).prop_flat_map(|(g, n)| {
            proptest::collection::vec(-50.0f64..50.0, g * n).prop_map(move |data| {
                ExpressionMatrix::new(
                    (0..g).map(|i| sym(&format!("G{i}"))).collect(),
                    (0..n).map(|i| format!("s{i}")).collect(),
                    Array2::from_shape_vec((g, n), data).unwrap(),
                )
                .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn samplewise_columns_standardized(m in arb_matrix()) {
            let z = samplewise_zscores(&m, DEFAULT_EPSILON);
            for (col, raw) in z.columns().into_iter().zip(m.values().columns()) {
                let (mean, sd) = mean_and_pop_sd(col);
                prop_assert!(mean.abs() < 1e-9);
                let (_, raw_sd) = mean_and_pop_sd(raw);
                if raw_sd > 1e-3 {
                    prop_assert!((sd - 1.0).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn pcc_symmetric_and_bounded(m in arb_matrix()) {
            let r = pcc_matrix(&genewise_zscores(&m, DEFAULT_EPSILON));
            for i in 0..r.nrows() {
                for j in 0..r.ncols() {
                    prop_assert!((r[[i, j]] - r[[j, i]]).abs() <= 1e-12);
                    prop_assert!(r[[i, j]].abs() <= 1.0 + 1e-9);
                }
            }
        }

        #[test]
        fn hvg_idempotent(m in arb_matrix(), n in 1usize..12) {
            let once = select_hvg(&m, n);
            prop_assert_eq!(select_hvg(&once, n), once);
        }

        #[test]
        fn dysregulated_size_bounds(m in arb_matrix()) {
            let z = samplewise_zscores(&m, DEFAULT_EPSILON);
            let g = m.n_genes();
            for col in z.columns() {
                let d = dysregulated_genes(col, m.genes(), 80.0);
                prop_assert!(d.len() >= (0.2 * g as f64).ceil() as usize);
                prop_assert!(d.len() <= g);
            }
        }
    }
}
