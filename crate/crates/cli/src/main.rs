use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gig_core::config::{ConfigOverrides, PipelineConfig};
use gig_core::expression::Orientation;
use gig_core::geneid::Namespace;
use gig_core::graphlets::{
    compare_groups, count_orbits, graph_signature, read_signatures, write_orbit_table, write_signatures,
    zscore_signatures,
};
use gig_core::metrics::{evaluate, write_curve_table, PredictionScores};
use gig_core::nullmodels::{generate, NullKind, RewireConfig};
use gig_core::pipeline::{self, RunLogEntry};
use gig_core::util::{derive_seed, write_atomic};
use gig_core::{Error, MolecularGraph};

#[derive(Parser)]
#[command(name = "gig", version, about = "Patient-specific pathway graphs from expression data")]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log level: error, warn, info, debug
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Canonicalize, transform and standardize the expression matrix
    Preprocess(PipelineArgs),
    /// Build one pathway graph per sample
    BuildGraphs(PipelineArgs),
    /// Write the graph-level dataset (runs upstream stages as needed)
    Export(PipelineArgs),
    /// Random-graph control for one edge list, or every `*.tsv` in a directory
    Nullmodel(NullArgs),
    /// Per-node orbit counts for one edge list, or per-graph signatures for a directory
    Orbits(OrbitArgs),
    /// Group-level orbit z-scores and Mann–Whitney comparisons
    CompareOrbits(CompareArgs),
    /// Score a prediction file
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long, conflicts_with = "genes_in_cols")]
    genes_in_rows: bool,
    #[arg(long)]
    genes_in_cols: bool,
    /// Namespace for unprefixed matrix ids: ensembl, uniprot, entrez, label
    #[arg(long, value_parser = parse_namespace)]
    matrix_id_namespace: Option<Namespace>,
    #[arg(long)]
    mapping_table: Option<PathBuf>,
    #[arg(long)]
    pathway_index: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    gene_cache_dir: Option<PathBuf>,
    #[arg(long, conflicts_with = "online")]
    offline: bool,
    #[arg(long)]
    online: bool,
    #[arg(long)]
    require_protein_coding: Option<bool>,
    #[arg(long)]
    hvg_n: Option<usize>,
    #[arg(long)]
    log1p: Option<bool>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    split_frac: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn parse_namespace(s: &str) -> Result<Namespace, String> {
    Namespace::parse(s).ok_or_else(|| format!("unknown namespace {s:?}"))
}

impl PipelineArgs {
    fn overrides(&self, threads: Option<usize>) -> ConfigOverrides {
        ConfigOverrides {
            matrix: self.matrix.clone(),
            orientation: if self.genes_in_cols {
                Some(Orientation::GenesInCols)
            } else if self.genes_in_rows {
                Some(Orientation::GenesInRows)
            } else {
                None
            },
            matrix_id_namespace: self.matrix_id_namespace,
            mapping_table: self.mapping_table.clone(),
            pathway_index: self.pathway_index.clone(),
            labels: self.labels.clone(),
            cache_dir: self.cache_dir.clone(),
            gene_cache_dir: self.gene_cache_dir.clone(),
            offline: if self.offline {
                Some(true)
            } else if self.online {
                Some(false)
            } else {
                None
            },
            require_protein_coding: self.require_protein_coding,
            hvg_n: self.hvg_n,
            log1p: self.log1p,
            epsilon: self.epsilon,
            tau: self.tau,
            k: self.k,
            split_frac: self.split_frac,
            seed: self.seed,
            output_dir: self.output_dir.clone(),
            threads,
        }
    }
}

#[derive(Args)]
struct NullArgs {
    /// er, dp or full
    #[arg(long)]
    kind: NullKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Swap attempts per edge (degree-preserving only)
    #[arg(long, default_value_t = 10)]
    factor: usize,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OrbitArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Signature table written by `gig orbits` on a directory
    #[arg(long)]
    signatures: PathBuf,
    /// `graph_id<TAB>group`
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = gig_core::expression::DEFAULT_EPSILON)]
    epsilon: f64,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    scores: PathBuf,
    /// `sample_id<TAB>class_name`; names the classes in the report
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Directory for metrics.json, roc.tsv and pr.tsv
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_graph(path: &Path) -> Result<MolecularGraph, Error> {
    let f = fs::File::open(path).map_err(Error::io(path))?;
    MolecularGraph::read_edge_list(std::io::BufReader::new(f)).map_err(|source| Error::EdgeList {
        path: path.to_path_buf(),
        source,
    })
}

/// Edge-list files in a directory, sorted by name, with their stems.
fn graph_files(dir: &Path) -> Result<Vec<(String, PathBuf)>, Error> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).map_err(Error::io(dir))? {
        let p = e.map_err(Error::io(dir))?.path();
        if p.extension().is_some_and(|x| x == "tsv") {
            let stem = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            out.push((stem, p));
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::Input {
            path: dir.to_path_buf(),
            msg: "no .tsv edge lists found".into(),
        });
    }
    Ok(out)
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    write_atomic(path, bytes).map_err(Error::io(path))
}

fn run_nullmodel(a: &NullArgs) -> Result<(), Error> {
    let one = |g: &MolecularGraph, seed: u64, out: &Path| -> Result<(), Error> {
        let cfg = RewireConfig {
            seed,
            swap_attempt_factor: a.factor,
        };
        let null = generate(a.kind, g, &cfg)?;
        write_out(out, null.to_edge_list_string().as_bytes())
    };
    if a.input.is_dir() {
        for (id, p) in graph_files(&a.input)? {
            one(&read_graph(&p)?, derive_seed(a.seed, &id), &a.out.join(format!("{id}.tsv")))?;
        }
        Ok(())
    } else {
        one(&read_graph(&a.input)?, a.seed, &a.out)
    }
}

fn run_orbits(a: &OrbitArgs) -> Result<(), Error> {
    let mut buf = Vec::new();
    if a.input.is_dir() {
        let mut sigs = Vec::new();
        for (id, p) in graph_files(&a.input)? {
            sigs.push(graph_signature(&id, &count_orbits(&read_graph(&p)?))?);
        }
        write_signatures(&mut buf, &sigs).map_err(Error::io(&a.out))?;
    } else {
        write_orbit_table(&mut buf, &count_orbits(&read_graph(&a.input)?)).map_err(Error::io(&a.out))?;
    }
    write_out(&a.out, &buf)
}

fn run_compare(a: &CompareArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&a.signatures).map_err(Error::io(&a.signatures))?;
    let sigs = read_signatures(&text).map_err(|msg| Error::Input {
        path: a.signatures.clone(),
        msg,
    })?;
    let labels = pipeline::read_labels(&a.labels)?;
    let groups = zscore_signatures(&sigs, &labels, a.epsilon)?;
    let tests = if groups.groups.len() == 2 {
        Some(compare_groups(&sigs, &labels)?)
    } else {
        log::info!("{} groups; Mann–Whitney comparison needs exactly two", groups.groups.len());
        None
    };
    let report = serde_json::json!({ "groups": groups, "mann_whitney": tests });
    let mut bytes = serde_json::to_vec_pretty(&report).expect("report serializes");
    bytes.push(b'\n');
    write_out(&a.out, &bytes)
}

fn run_metrics(a: &MetricsArgs) -> Result<(), Error> {
    let labels = a.labels.as_deref().map(pipeline::read_labels).transpose()?;
    let scores = PredictionScores::read(&a.scores, labels.as_ref())?;
    let (report, roc, pr) = evaluate(&scores)?;
    for w in &report.warnings {
        log::warn!("{w}");
    }
    let mut json = serde_json::to_vec_pretty(&report).expect("report serializes");
    json.push(b'\n');
    if let Some(dir) = &a.out {
        write_out(&dir.join("metrics.json"), &json)?;
        for (name, curve, x, y) in [("roc.tsv", &roc, "fpr", "tpr"), ("pr.tsv", &pr, "recall", "precision")] {
            if let Some(c) = curve {
                let mut buf = Vec::new();
                write_curve_table(&mut buf, c, x, y).map_err(Error::io(dir))?;
                write_out(&dir.join(name), &buf)?;
            }
        }
    }
    std::io::stdout().write_all(&json).map_err(Error::io("<stdout>"))
}

fn run_pipeline(name: &str, a: &PipelineArgs, threads: Option<usize>) -> (Result<(), Error>, Option<PipelineConfig>) {
    let cfg = match PipelineConfig::load(&a.config, &a.overrides(threads)) {
        Ok(c) => c,
        Err(e) => return (Err(e.into()), None),
    };
    if let Some(n) = cfg.threads {
        // first call wins; later calls in the same process are no-ops
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = (|| {
        let p = pipeline::preprocess(&cfg)?;
        let dir = pipeline::write_preprocess(&cfg, &p)?;
        if name == "preprocess" {
            println!("{}", dir.display());
            return Ok(());
        }
        let graphs = pipeline::build_graphs(&cfg, &p)?;
        let gdir = pipeline::write_graphs(&cfg, &graphs)?;
        if name == "build-graphs" {
            println!("{}", gdir.display());
            return Ok(());
        }
        pipeline::export(&cfg, &p, &graphs)?;
        println!("{}", cfg.output_dir.join(pipeline::DATASET_DIR).join("manifest.json").display());
        Ok(())
    })();
    (result, Some(cfg))
}

fn log_dir_for(out: &Path) -> PathBuf {
    if out.is_dir() {
        out.to_path_buf()
    } else {
        out.parent().map(Path::to_path_buf).unwrap_or_default()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    if cli.threads == Some(0) {
        eprintln!("error\tusage\t--threads must be at least 1");
        return ExitCode::from(2);
    }
    if let Some(n) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let (name, result, checksum, log_dir) = match &cli.command {
        Command::Preprocess(a) | Command::BuildGraphs(a) | Command::Export(a) => {
            let name = match &cli.command {
                Command::Preprocess(_) => "preprocess",
                Command::BuildGraphs(_) => "build-graphs",
                _ => "export",
            };
            let (r, cfg) = run_pipeline(name, a, cli.threads);
            let checksum = cfg.as_ref().map(|c| c.checksum());
            (name, r, checksum, cfg.map(|c| c.output_dir))
        }
        Command::Nullmodel(a) => ("nullmodel", run_nullmodel(a), None, Some(log_dir_for(&a.out))),
        Command::Orbits(a) => ("orbits", run_orbits(a), None, Some(log_dir_for(&a.out))),
        Command::CompareOrbits(a) => ("compare-orbits", run_compare(a), None, Some(log_dir_for(&a.out))),
        Command::Metrics(a) => ("metrics", run_metrics(a), None, a.out.clone()),
    };
    let category = result.as_ref().err().map(|e| e.category());
    if let Some(dir) = log_dir.filter(|d| !d.as_os_str().is_empty()) {
        let entry = RunLogEntry {
            unix_time: 0,
            command: name,
            config_checksum: checksum.as_deref(),
            status: if result.is_ok() { "ok" } else { "error" },
            category: category.map(|c| c.as_str()),
            message: result.as_ref().err().map(|e| e.to_string()),
        };
        if let Err(e) = pipeline::append_run_log(&dir, entry) {
            log::warn!("run log not written: {e}");
        }
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let cat = e.category();
            eprintln!("error\t{}\t{}", cat.as_str(), e.to_string().replace('\n', " "));
            ExitCode::from(cat.exit_code() as u8)
        }
    }
}
