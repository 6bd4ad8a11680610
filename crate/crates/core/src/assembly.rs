//! Per-sample graph assembly, node features, splits, class weights and the
//! on-disk dataset layout consumed by trainers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{merge_graphs, restrict_to_genes, GeneSymbol, MolecularGraph};
use crate::pathway::{pathway_set_for_sample, MeasuredGenes, PathwayError, PathwayStore};
use crate::util::{derive_seed, fmt_f64, sha256_hex, write_atomic};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("sample {sample}: no {channel} feature for graph node {gene}")]
    FeatureMissing {
        sample: String,
        gene: String,
        channel: &'static str,
    },
    #[error("sample {sample}: non-finite {channel} feature for {gene}")]
    NonFinite {
        sample: String,
        gene: String,
        channel: &'static str,
    },
    #[error("sample {sample}: graph has {nodes} nodes and {edges} edges; records need at least 2 and 1")]
    Degenerate {
        sample: String,
        nodes: usize,
        edges: usize,
    },
    #[error("no labelled samples")]
    EmptyLabels,
    #[error("split fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("class {0} has no training samples")]
    AbsentClass(usize),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("nothing to export: no patient graphs survived")]
    NothingToExport,
    #[error("sample id {0:?} cannot be used as a file name")]
    BadSampleId(String),
    #[error("writing {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> AssemblyError + '_ {
    move |source| AssemblyError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exclusion {
    NoPathways,
    TooSmall,
}

impl fmt::Display for Exclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Exclusion::NoPathways => "no-pathways",
            Exclusion::TooSmall => "too-small",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatientGraph {
    Built(MolecularGraph),
    Excluded {
        reason: Exclusion,
        nodes: usize,
        edges: usize,
    },
}

/// Union of the processed pathway graphs selected by `d`, restricted to the
/// measured genes. Graphs with fewer than two nodes or no edge are excluded.
pub fn build_patient_graph(
    d: &BTreeSet<GeneSymbol>,
    store: &PathwayStore,
    measured: &MeasuredGenes,
) -> Result<PatientGraph, PathwayError> {
    let selected = pathway_set_for_sample(d, &store.index);
    if selected.pathways.is_empty() {
        return Ok(PatientGraph::Excluded {
            reason: Exclusion::NoPathways,
            nodes: 0,
            edges: 0,
        });
    }
    let parts = selected
        .pathways
        .iter()
        .map(|wp| store.pathway_graph(wp, measured))
        .collect::<Result<Vec<_>, _>>()?;
    let merged = merge_graphs(parts.iter().map(|g| g.as_ref()));
    let g = restrict_to_genes(&merged, measured.set());
    if g.node_count() < 2 || g.edge_count() == 0 {
        return Ok(PatientGraph::Excluded {
            reason: Exclusion::TooSmall,
            nodes: g.node_count(),
            edges: g.edge_count(),
        });
    }
    Ok(PatientGraph::Built(g))
}

/// Sorted known genes numbered from 1; index 0 is reserved for unknowns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneVocabulary {
    genes: Vec<GeneSymbol>,
    index: BTreeMap<GeneSymbol, usize>,
}

pub const UNKNOWN_TOKEN: &str = "<unk>";

impl GeneVocabulary {
    pub fn new<I: IntoIterator<Item = GeneSymbol>>(genes: I) -> Self {
        let set: BTreeSet<GeneSymbol> = genes.into_iter().collect();
        let genes: Vec<GeneSymbol> = set.into_iter().collect();
        let index = genes.iter().enumerate().map(|(i, g)| (g.clone(), i + 1)).collect();
        GeneVocabulary { genes, index }
    }

    pub fn index_of(&self, g: &GeneSymbol) -> usize {
        self.index.get(g).copied().unwrap_or(0)
    }

    /// Number of indices including the unknown slot.
    pub fn len(&self) -> usize {
        self.genes.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn genes(&self) -> &[GeneSymbol] {
        &self.genes
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index\tgene")?;
        writeln!(w, "0\t{UNKNOWN_TOKEN}")?;
        for (i, g) in self.genes.iter().enumerate() {
            writeln!(w, "{}\t{g}", i + 1)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatientGraphRecord {
    pub sample_id: String,
    pub graph: MolecularGraph,
    /// One row per node in graph order: [z, c].
    pub node_features: Array2<f64>,
    pub gene_indices: Vec<usize>,
    pub label: usize,
}

/// Looks up both feature channels for every node in graph order.
pub fn assemble_record<Z, C>(
    sample_id: &str,
    graph: MolecularGraph,
    z: Z,
    c: C,
    vocab: &GeneVocabulary,
    label: usize,
) -> Result<PatientGraphRecord, AssemblyError>
where
    Z: Fn(&GeneSymbol) -> Option<f64>,
    C: Fn(&GeneSymbol) -> Option<f64>,
{
    if graph.node_count() < 2 || graph.edge_count() == 0 {
        return Err(AssemblyError::Degenerate {
            sample: sample_id.to_string(),
            nodes: graph.node_count(),
            edges: graph.edge_count(),
        });
    }
    let mut feats = Array2::zeros((graph.node_count(), 2));
    let mut gene_indices = Vec::with_capacity(graph.node_count());
    for (i, g) in graph.nodes().enumerate() {
        for (col, channel, value) in [(0, "z", z(g)), (1, "c", c(g))] {
            let v = value.ok_or_else(|| AssemblyError::FeatureMissing {
                sample: sample_id.to_string(),
                gene: g.to_string(),
                channel,
            })?;
            if !v.is_finite() {
                return Err(AssemblyError::NonFinite {
                    sample: sample_id.to_string(),
                    gene: g.to_string(),
                    channel,
                });
            }
            feats[[i, col]] = v;
        }
        gene_indices.push(vocab.index_of(g));
    }
    Ok(PatientGraphRecord {
        sample_id: sample_id.to_string(),
        graph,
        node_features: feats,
        gene_indices,
        label,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub frac: f64,
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

/// Seeded per-class shuffle; each class puts round(frac·n) samples in train,
/// clamped to [1, n−1]. Singleton classes go entirely to train.
pub fn stratified_split(
    labels: &BTreeMap<String, String>,
    frac: f64,
    seed: u64,
) -> Result<SplitSpec, AssemblyError> {
    if !(frac > 0.0 && frac < 1.0) {
        return Err(AssemblyError::BadFraction(frac));
    }
    if labels.is_empty() {
        return Err(AssemblyError::EmptyLabels);
    }
    let mut by_class: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (s, c) in labels {
        by_class.entry(c.as_str()).or_default().push(s.as_str());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        let n = members.len();
        let k = if n == 1 {
            1
        } else {
            ((frac * n as f64).round() as usize).clamp(1, n - 1)
        };
        train.extend(members[..k].iter().map(|s| s.to_string()));
        test.extend(members[k..].iter().map(|s| s.to_string()));
    }
    train.sort();
    test.sort();
    Ok(SplitSpec {
        seed,
        frac,
        train_ids: train,
        test_ids: test,
    })
}

/// `n` independent stratified splits with seeds derived from `seed`.
pub fn repeated_splits(
    labels: &BTreeMap<String, String>,
    frac: f64,
    seed: u64,
    n: usize,
) -> Result<Vec<SplitSpec>, AssemblyError> {
    (0..n)
        .map(|i| stratified_split(labels, frac, derive_seed(seed, &format!("split{i}"))))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub weights: Vec<f64>,
    pub class_counts: Vec<usize>,
}

/// w_c = (1/n_c) / Σ_j (1/n_j) · C over training-label counts.
pub fn class_weights(train_labels: &[usize], n_classes: usize) -> Result<ClassWeights, AssemblyError> {
    let mut counts = vec![0usize; n_classes];
    for &y in train_labels {
        *counts.get_mut(y).ok_or(AssemblyError::LabelOutOfRange {
            label: y,
            classes: n_classes,
        })? += 1;
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(AssemblyError::AbsentClass(c));
    }
    let inv: Vec<f64> = counts.iter().map(|&n| 1.0 / n as f64).collect();
    let norm: f64 = inv.iter().sum();
    Ok(ClassWeights {
        weights: inv.iter().map(|v| v / norm * n_classes as f64).collect(),
        class_counts: counts,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedSample {
    pub sample_id: String,
    pub reason: Exclusion,
    pub nodes: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub n_records: usize,
    pub n_excluded: usize,
    pub classes: Vec<String>,
    pub vocab_size: usize,
    pub feature_channels: Vec<String>,
    /// Input name → sha256 of the file it was read from.
    pub inputs: BTreeMap<String, String>,
    /// Relative path → sha256 of its bytes.
    pub files: BTreeMap<String, String>,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> io::Result<Self> {
        let bytes = fs::read(path)?;
        serde_json::from_slice(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))
    }
}

fn check_sample_id(id: &str) -> Result<(), AssemblyError> {
    let bad = id.is_empty()
        || id.starts_with('.')
        || id.chars().any(|c| c == '/' || c == '\\' || c.is_control() || c.is_whitespace());
    if bad {
        Err(AssemblyError::BadSampleId(id.to_string()))
    } else {
        Ok(())
    }
}

fn nodes_tsv(r: &PatientGraphRecord) -> String {
    let mut s = String::from("gene\tvocab_idx\tz\tc\n");
    for (i, g) in r.graph.nodes().enumerate() {
        s.push_str(&format!(
            "{g}\t{}\t{}\t{}\n",
            r.gene_indices[i],
            fmt_f64(r.node_features[[i, 0]]),
            fmt_f64(r.node_features[[i, 1]])
        ));
    }
    s
}

fn edges_tsv(r: &PatientGraphRecord) -> String {
    let mut s = String::from("src\tdst\n");
    for &(i, j) in &r.graph.indexed().edges {
        s.push_str(&format!("{i}\t{j}\n{j}\t{i}\n"));
    }
    s
}

/// Everything `export_dataset` writes besides the records themselves.
pub struct ExportContext<'a> {
    pub split: &'a SplitSpec,
    pub weights: &'a ClassWeights,
    pub vocab: &'a GeneVocabulary,
    pub classes: &'a [String],
    pub excluded: &'a [ExcludedSample],
    pub input_checksums: BTreeMap<String, String>,
}

/// Writes the dataset under `out_dir`, replacing any previous `samples/`
/// directory, and returns the manifest (written last).
pub fn export_dataset(
    records: &[PatientGraphRecord],
    ctx: &ExportContext<'_>,
    out_dir: &Path,
) -> Result<DatasetManifest, AssemblyError> {
    if records.is_empty() {
        return Err(AssemblyError::NothingToExport);
    }
    for r in records {
        check_sample_id(&r.sample_id)?;
        if r.label >= ctx.classes.len() {
            return Err(AssemblyError::LabelOutOfRange {
                label: r.label,
                classes: ctx.classes.len(),
            });
        }
    }
    let samples_dir = out_dir.join("samples");
    if samples_dir.exists() {
        fs::remove_dir_all(&samples_dir).map_err(io_at(&samples_dir))?;
    }
    fs::create_dir_all(&samples_dir).map_err(io_at(&samples_dir))?;

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut buf = Vec::new();
    ctx.vocab.write_tsv(&mut buf).expect("writing to memory");
    files.push(("vocab.tsv".into(), buf));
    let split_json = serde_json::to_vec_pretty(ctx.split).expect("split serializes");
    files.push(("split.json".into(), split_json));
    let mut cw = String::from("class_idx\tclass\tn_train\tweight\n");
    for (i, name) in ctx.classes.iter().enumerate() {
        cw.push_str(&format!(
            "{i}\t{name}\t{}\t{}\n",
            ctx.weights.class_counts.get(i).copied().unwrap_or(0),
            ctx.weights.weights.get(i).map_or("0".to_string(), |w| fmt_f64(*w))
        ));
    }
    files.push(("class_weights.tsv".into(), cw.into_bytes()));
    let mut ex = String::from("sample_id\treason\tnodes\tedges\n");
    for e in ctx.excluded {
        ex.push_str(&format!("{}\t{}\t{}\t{}\n", e.sample_id, e.reason, e.nodes, e.edges));
    }
    files.push(("exclusions.tsv".into(), ex.into_bytes()));

    let per_sample: Vec<(String, Vec<u8>)> = records
        .par_iter()
        .flat_map_iter(|r| {
            let id = &r.sample_id;
            [
                (format!("samples/{id}.nodes.tsv"), nodes_tsv(r).into_bytes()),
                (format!("samples/{id}.edges.tsv"), edges_tsv(r).into_bytes()),
                (format!("samples/{id}.label"), format!("{}\n", r.label).into_bytes()),
            ]
        })
        .collect();
    files.extend(per_sample);

    files
        .par_iter()
        .map(|(rel, bytes)| {
            let p = out_dir.join(rel);
            write_atomic(&p, bytes).map_err(io_at(&p))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let manifest = DatasetManifest {
        n_records: records.len(),
        n_excluded: ctx.excluded.len(),
        classes: ctx.classes.to_vec(),
        vocab_size: ctx.vocab.len(),
        feature_channels: vec!["z".into(), "c".into()],
        inputs: ctx.input_checksums.clone(),
        files: files.iter().map(|(rel, b)| (rel.clone(), sha256_hex(b))).collect(),
    };
    let mpath = out_dir.join("manifest.json");
    let mut mbytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    mbytes.push(b'\n');
    write_atomic(&mpath, &mbytes).map_err(io_at(&mpath))?;
    Ok(manifest)
}
