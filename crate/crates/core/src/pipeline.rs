//! The three cohort stages wired together: preprocess → build-graphs →
//! export. Each stage recomputes its upstream stages in memory, so a stage
//! can always run on its own; outputs land in fixed subdirectories of the
//! configured output directory.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use log::{info, warn};
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Serialize;

use crate::assembly::{
    assemble_record, build_patient_graph, class_weights, export_dataset, stratified_split, DatasetManifest,
    ExcludedSample, ExportContext, GeneVocabulary, PatientGraph,
};
use crate::config::PipelineConfig;
use crate::error::Error;
use crate::expression::{
    canonicalize_matrix, dysregulated_genes, genewise_zscores, log1p_transform, pcc_feature_streaming,
    samplewise_zscores, select_hvg, write_gene_table, CanonicalizationReport, ExpressionMatrix, RawMatrix,
};
use crate::geneid::{default_cache_dir, resolve_batch_online, GeneIdMapping};
use crate::graph::{GeneSymbol, MolecularGraph};
use crate::pathway::{GenePathwayIndex, MeasuredGenes, PathwayStore};
use crate::util::{fmt_f64, sha256_hex, write_atomic};

pub const PREPROCESS_DIR: &str = "preprocess";
pub const GRAPHS_DIR: &str = "graphs";
pub const DATASET_DIR: &str = "dataset";
pub const RUN_LOG: &str = "run_log.jsonl";

/// Everything downstream stages need from preprocessing.
#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub matrix: ExpressionMatrix,
    pub z: Array2<f64>,
    pub c: Array1<f64>,
    /// Dysregulated genes per sample, in matrix column order.
    pub dysregulated: Vec<BTreeSet<GeneSymbol>>,
    pub report: CanonicalizationReport,
    pub table: GeneIdMapping,
    pub raw_rows: usize,
    pub canonical_genes: usize,
}

impl Preprocessed {
    pub fn gene_rows(&self) -> HashMap<GeneSymbol, usize> {
        self.matrix.genes().iter().cloned().enumerate().map(|(i, g)| (g, i)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
struct PreprocessSummary {
    raw_rows: usize,
    canonical_genes: usize,
    genes: usize,
    samples: usize,
    unmapped: usize,
    non_coding: usize,
    collapsed: usize,
    log1p: bool,
    hvg_n: usize,
    tau: f64,
    k: usize,
    epsilon: f64,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    write_atomic(path, bytes).map_err(Error::io(path))
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializable");
    b.push(b'\n');
    b
}

fn load_table(cfg: &PipelineConfig, raw: &RawMatrix) -> Result<GeneIdMapping, Error> {
    let mut table = GeneIdMapping::load(&cfg.mapping_table)?;
    if !cfg.offline {
        let missing: Vec<String> = raw
            .row_ids
            .iter()
            .map(|id| {
                if id.contains(':') {
                    id.clone()
                } else {
                    cfg.matrix_id_namespace.qualify(id)
                }
            })
            .filter(|k| table.get(k).is_none())
            .collect();
        if !missing.is_empty() {
            let cache = cfg.gene_cache_dir.clone().unwrap_or_else(default_cache_dir);
            info!("resolving {} unmapped ids online", missing.len());
            table.extend(resolve_batch_online(&missing, &cache)?);
        }
    }
    Ok(table)
}

/// Reads and canonicalizes the matrix, transforms it, keeps the top
/// `hvg_n` genes and derives both feature channels and the dysregulated sets.
pub fn preprocess(cfg: &PipelineConfig) -> Result<Preprocessed, Error> {
    let raw = RawMatrix::read(&cfg.matrix, cfg.orientation)?;
    let table = load_table(cfg, &raw)?;
    let (m, report) = canonicalize_matrix(&raw, &table, cfg.matrix_id_namespace, cfg.require_protein_coding)?;
    info!(
        "canonicalized {} rows into {} genes ({} unmapped, {} non-coding, {} collapsed)",
        raw.row_ids.len(),
        m.n_genes(),
        report.unmapped.len(),
        report.non_coding.len(),
        report.collapsed.len()
    );
    let canonical_genes = m.n_genes();
    let m = if cfg.log1p { log1p_transform(&m)? } else { m };
    let m = select_hvg(&m, cfg.hvg_n);
    let z = samplewise_zscores(&m, cfg.epsilon);
    let zg = genewise_zscores(&m, cfg.epsilon);
    let c = pcc_feature_streaming(&zg, cfg.k);
    let dysregulated = (0..m.n_samples())
        .into_par_iter()
        .map(|j| dysregulated_genes(z.column(j), m.genes(), cfg.tau))
        .collect();
    Ok(Preprocessed {
        matrix: m,
        z,
        c,
        dysregulated,
        report,
        table,
        raw_rows: raw.row_ids.len(),
        canonical_genes,
    })
}

pub fn write_preprocess(cfg: &PipelineConfig, p: &Preprocessed) -> Result<PathBuf, Error> {
    let dir = cfg.output_dir.join(PREPROCESS_DIR);
    let m = &p.matrix;
    let mut buf = Vec::new();
    m.write_tsv(&mut buf).map_err(Error::io(&dir))?;
    write_file(&dir.join("matrix.tsv"), &buf)?;
    buf.clear();
    write_gene_table(&mut buf, m.genes(), m.samples(), &p.z).map_err(Error::io(&dir))?;
    write_file(&dir.join("zscores.tsv"), &buf)?;
    let mut pcc = String::from("gene\tc\n");
    for (g, c) in m.genes().iter().zip(p.c.iter()) {
        pcc.push_str(&format!("{g}\t{}\n", fmt_f64(*c)));
    }
    write_file(&dir.join("pcc_feature.tsv"), pcc.as_bytes())?;
    let mut dys = String::from("sample_id\tgene\n");
    for (s, d) in m.samples().iter().zip(&p.dysregulated) {
        for g in d {
            dys.push_str(&format!("{s}\t{g}\n"));
        }
    }
    write_file(&dir.join("dysregulated.tsv"), dys.as_bytes())?;
    write_file(&dir.join("canonicalization.json"), &json_bytes(&p.report))?;
    let summary = PreprocessSummary {
        raw_rows: p.raw_rows,
        canonical_genes: p.canonical_genes,
        genes: m.n_genes(),
        samples: m.n_samples(),
        unmapped: p.report.unmapped.len(),
        non_coding: p.report.non_coding.len(),
        collapsed: p.report.collapsed.len(),
        log1p: cfg.log1p,
        hvg_n: cfg.hvg_n,
        tau: cfg.tau,
        k: cfg.k,
        epsilon: cfg.epsilon,
    };
    write_file(&dir.join("summary.json"), &json_bytes(&summary))?;
    Ok(dir)
}

#[derive(Debug, Clone)]
pub struct SampleGraph {
    pub sample_id: String,
    pub column: usize,
    pub pathways: usize,
    pub graph: PatientGraph,
}

/// One patient graph (or exclusion) per sample, in matrix column order.
pub fn build_graphs(cfg: &PipelineConfig, p: &Preprocessed) -> Result<Vec<SampleGraph>, Error> {
    let index = GenePathwayIndex::load(&cfg.pathway_index)?;
    let store = PathwayStore::new(index, p.table.clone(), cfg.pathway_cache().to_path_buf(), !cfg.offline);
    let measured = MeasuredGenes::new(p.matrix.gene_set());
    let samples = p.matrix.samples();
    let out = (0..samples.len())
        .into_par_iter()
        .map(|j| {
            let d = &p.dysregulated[j];
            let pathways = crate::pathway::pathway_set_for_sample(d, &store.index).pathways.len();
            let graph = build_patient_graph(d, &store, &measured)?;
            Ok(SampleGraph {
                sample_id: samples[j].clone(),
                column: j,
                pathways,
                graph,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    info!(
        "built {} graphs from {} pathways ({} excluded)",
        out.iter().filter(|s| matches!(s.graph, PatientGraph::Built(_))).count(),
        store.memoized_count(),
        out.iter().filter(|s| matches!(s.graph, PatientGraph::Excluded { .. })).count()
    );
    Ok(out)
}

pub fn write_graphs(cfg: &PipelineConfig, graphs: &[SampleGraph]) -> Result<PathBuf, Error> {
    let dir = cfg.output_dir.join(GRAPHS_DIR);
    let edges_dir = dir.join("edges");
    if edges_dir.exists() {
        fs::remove_dir_all(&edges_dir).map_err(Error::io(&edges_dir))?;
    }
    let mut summary = String::from("sample_id\tstatus\tpathways\tnodes\tedges\n");
    for s in graphs {
        match &s.graph {
            PatientGraph::Built(g) => {
                summary.push_str(&format!(
                    "{}\tbuilt\t{}\t{}\t{}\n",
                    s.sample_id,
                    s.pathways,
                    g.node_count(),
                    g.edge_count()
                ));
                let path = edges_dir.join(format!("{}.tsv", s.sample_id));
                write_file(&path, g.to_edge_list_string().as_bytes())?;
            }
            PatientGraph::Excluded { reason, nodes, edges } => {
                summary.push_str(&format!("{}\t{reason}\t{}\t{nodes}\t{edges}\n", s.sample_id, s.pathways));
            }
        }
    }
    write_file(&dir.join("summary.tsv"), summary.as_bytes())?;
    Ok(dir)
}

/// `sample_id<TAB>class` lines; a leading `sample_id` or `graph_id` header
/// is skipped.
pub fn read_labels(path: &Path) -> Result<BTreeMap<String, String>, Error> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || (i == 0 && (line.starts_with("sample_id") || line.starts_with("graph_id"))) {
            continue;
        }
        let f: Vec<&str> = line.split('\t').map(str::trim).collect();
        if f.len() != 2 || f[0].is_empty() || f[1].is_empty() {
            return Err(Error::Input {
                path: path.to_path_buf(),
                msg: format!("line {}: expected sample_id<TAB>class", i + 1),
            });
        }
        if out.insert(f[0].to_string(), f[1].to_string()).is_some() {
            return Err(Error::Input {
                path: path.to_path_buf(),
                msg: format!("line {}: duplicate sample {:?}", i + 1, f[0]),
            });
        }
    }
    if out.is_empty() {
        return Err(Error::Input {
            path: path.to_path_buf(),
            msg: "no labels".into(),
        });
    }
    Ok(out)
}

/// Records, split and class weights for every labelled, non-excluded
/// sample, written as the dataset layout.
pub fn export(cfg: &PipelineConfig, p: &Preprocessed, graphs: &[SampleGraph]) -> Result<DatasetManifest, Error> {
    let labels_path = cfg
        .labels
        .as_ref()
        .ok_or_else(|| Error::Usage("export needs a labels file (config `labels` or --labels)".into()))?;
    let labels = read_labels(labels_path)?;
    let known: BTreeSet<&String> = p.matrix.samples().iter().collect();
    if let Some(s) = labels.keys().find(|s| !known.contains(s)) {
        return Err(Error::Input {
            path: labels_path.clone(),
            msg: format!("sample {s:?} is not in the expression matrix"),
        });
    }
    let classes: Vec<String> = labels.values().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let code: BTreeMap<&String, usize> = classes.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let vocab = GeneVocabulary::new(p.matrix.genes().iter().cloned());
    let rows = p.gene_rows();

    let mut excluded = Vec::new();
    let mut built: Vec<(&SampleGraph, &MolecularGraph, usize)> = Vec::new();
    for s in graphs {
        let Some(class) = labels.get(&s.sample_id) else {
            warn!("sample {} has no label; skipped", s.sample_id);
            continue;
        };
        match &s.graph {
            PatientGraph::Built(g) => built.push((s, g, code[class])),
            PatientGraph::Excluded { reason, nodes, edges } => excluded.push(ExcludedSample {
                sample_id: s.sample_id.clone(),
                reason: *reason,
                nodes: *nodes,
                edges: *edges,
            }),
        }
    }
    let records = built
        .par_iter()
        .map(|(s, g, label)| {
            let j = s.column;
            assemble_record(
                &s.sample_id,
                (*g).clone(),
                |gene| rows.get(gene).map(|&r| p.z[[r, j]]),
                |gene| rows.get(gene).map(|&r| p.c[r]),
                &vocab,
                *label,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    if records.is_empty() {
        return Err(crate::assembly::AssemblyError::NothingToExport.into());
    }
    let kept: BTreeMap<String, String> = records
        .iter()
        .map(|r| (r.sample_id.clone(), classes[r.label].clone()))
        .collect();
    let split = stratified_split(&kept, cfg.split_frac, cfg.seed)?;
    let train: BTreeSet<&String> = split.train_ids.iter().collect();
    let train_labels: Vec<usize> = records
        .iter()
        .filter(|r| train.contains(&r.sample_id))
        .map(|r| r.label)
        .collect();
    let weights = class_weights(&train_labels, classes.len())?;
    let ctx = ExportContext {
        split: &split,
        weights: &weights,
        vocab: &vocab,
        classes: &classes,
        excluded: &excluded,
        input_checksums: input_checksums(cfg, p)?,
    };
    let manifest = export_dataset(&records, &ctx, &cfg.output_dir.join(DATASET_DIR))?;
    info!(
        "exported {} records ({} train / {} test), {} excluded",
        records.len(),
        split.train_ids.len(),
        split.test_ids.len(),
        excluded.len()
    );
    Ok(manifest)
}

fn file_sha(path: &Path) -> Result<String, Error> {
    Ok(sha256_hex(&fs::read(path).map_err(Error::io(path))?))
}

/// Checksums of every input that shapes the export, including each GPML
/// document any sample selected.
fn input_checksums(cfg: &PipelineConfig, p: &Preprocessed) -> Result<BTreeMap<String, String>, Error> {
    let mut out = BTreeMap::new();
    out.insert("matrix".to_string(), file_sha(&cfg.matrix)?);
    out.insert("mapping_table".to_string(), file_sha(&cfg.mapping_table)?);
    out.insert("pathway_index".to_string(), file_sha(&cfg.pathway_index)?);
    if let Some(l) = &cfg.labels {
        out.insert("labels".to_string(), file_sha(l)?);
    }
    let index = GenePathwayIndex::load(&cfg.pathway_index)?;
    let used: BTreeSet<String> = p
        .dysregulated
        .iter()
        .flat_map(|d| crate::pathway::pathway_set_for_sample(d, &index).pathways)
        .collect();
    for wp in used {
        let path = crate::pathway::gpml_path(&wp, cfg.pathway_cache());
        out.insert(format!("gpml:{wp}"), file_sha(&path)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct RunLogEntry<'a> {
    pub unix_time: u64,
    pub command: &'a str,
    pub config_checksum: Option<&'a str>,
    pub status: &'a str,
    pub category: Option<&'a str>,
    pub message: Option<String>,
}

/// Appends one JSON line to `<dir>/run_log.jsonl`.
pub fn append_run_log(dir: &Path, mut entry: RunLogEntry<'_>) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(Error::io(dir))?;
    entry.unix_time = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let path = dir.join(RUN_LOG);
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .map_err(Error::io(&path))?;
    let mut line = serde_json::to_vec(&entry).expect("log entry serializes");
    line.push(b'\n');
    f.write_all(&line).map_err(Error::io(&path))
}
