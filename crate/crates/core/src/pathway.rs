//! Gene→pathway index, GPML cache, and memoized per-pathway graphs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::geneid::GeneIdMapping;
use crate::gpml::{self, GpmlError};
use crate::graph::{GeneSymbol, MolecularGraph};
use crate::util::{sha256_hex, write_atomic};

pub const PATHWAY_CACHE_ENV: &str = "GIG_PATHWAY_CACHE";
pub const WIKIPATHWAYS_URL_ENV: &str = "GIG_WIKIPATHWAYS_URL";
pub const DEFAULT_WIKIPATHWAYS_URL: &str = "https://www.wikipathways.org/wikipathways-assets/pathways";

#[derive(Debug, Error)]
pub enum PathwayError {
    #[error("pathway {wpid} is not in the cache at {} and offline mode is on", cache_dir.display())]
    Missing { wpid: String, cache_dir: PathBuf },
    #[error("downloading pathway {wpid} failed: {msg}")]
    Download { wpid: String, msg: String },
    #[error("writing cached pathway {wpid} to {}: {source}", path.display())]
    CacheWrite {
        wpid: String,
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("reading {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("invalid pathway id {0:?}")]
    InvalidId(String),
    #[error("{path}:{line}: {msg}")]
    Index {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Gpml(#[from] GpmlError),
}

/// Gene → set of WPIDs. Genes recorded without pathways map to the empty set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenePathwayIndex {
    map: BTreeMap<GeneSymbol, BTreeSet<String>>,
}

impl GenePathwayIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, gene: GeneSymbol, wpid: &str) {
        let set = self.map.entry(gene).or_default();
        if !wpid.trim().is_empty() {
            set.insert(wpid.trim().to_string());
        }
    }

    pub fn gene_count(&self) -> usize {
        self.map.len()
    }

    pub fn all_pathways(&self) -> BTreeSet<String> {
        self.map.values().flatten().cloned().collect()
    }

    /// Reads `gene<TAB>wpid` lines. A line with an empty wpid records a gene
    /// known to have no pathways.
    pub fn from_tsv<R: BufRead>(r: R, path: &Path) -> Result<Self, PathwayError> {
        let mut idx = GenePathwayIndex::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(|source| PathwayError::Read {
                path: path.to_path_buf(),
                source,
            })?;
            let t = line.trim_end_matches('\r');
            if t.trim().is_empty() || t.starts_with('#') || (i == 0 && t.starts_with("gene\t")) {
                continue;
            }
            let (gene, wpid) = t.split_once('\t').unwrap_or((t, ""));
            let gene = GeneSymbol::new(gene).ok_or_else(|| PathwayError::Index {
                path: path.to_path_buf(),
                line: i + 1,
                msg: "empty gene symbol".into(),
            })?;
            if wpid.contains('\t') {
                return Err(PathwayError::Index {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: "expected 2 tab-separated columns".into(),
                });
            }
            idx.insert(gene, wpid);
        }
        Ok(idx)
    }

    pub fn load(path: &Path) -> Result<Self, PathwayError> {
        let f = fs::File::open(path).map_err(|source| PathwayError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_tsv(BufReader::new(f), path)
    }
}

static EMPTY: BTreeSet<String> = BTreeSet::new();

pub fn pathways_for_gene<'a>(g: &GeneSymbol, index: &'a GenePathwayIndex) -> &'a BTreeSet<String> {
    index.map.get(g).unwrap_or(&EMPTY)
}

/// Pathways selected by a gene set, plus the genes that matched none.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SamplePathways {
    pub pathways: BTreeSet<String>,
    pub unmatched: BTreeSet<GeneSymbol>,
}

pub fn pathway_set_for_sample(d: &BTreeSet<GeneSymbol>, index: &GenePathwayIndex) -> SamplePathways {
    let mut out = SamplePathways::default();
    for g in d {
        let ps = pathways_for_gene(g, index);
        if ps.is_empty() {
            out.unmatched.insert(g.clone());
        } else {
            out.pathways.extend(ps.iter().cloned());
        }
    }
    out
}

fn check_wpid(wpid: &str) -> Result<(), PathwayError> {
    let ok = !wpid.is_empty()
        && wpid
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
    if ok {
        Ok(())
    } else {
        Err(PathwayError::InvalidId(wpid.to_string()))
    }
}

pub fn gpml_path(wpid: &str, cache_dir: &Path) -> PathBuf {
    cache_dir.join(format!("{wpid}.gpml"))
}

/// Returns the GPML bytes for `wpid`, downloading into the cache when
/// `online` is set and the file is absent.
pub fn fetch_gpml(wpid: &str, cache_dir: &Path, online: bool) -> Result<Vec<u8>, PathwayError> {
    let base =
        std::env::var(WIKIPATHWAYS_URL_ENV).unwrap_or_else(|_| DEFAULT_WIKIPATHWAYS_URL.to_string());
    fetch_gpml_from(wpid, cache_dir, online, &base)
}

fn writer_lock(wpid: &str) -> Arc<Mutex<()>> {
    static LOCKS: Mutex<Option<HashMap<String, Arc<Mutex<()>>>>> = Mutex::new(None);
    let mut guard = LOCKS.lock().unwrap_or_else(|e| e.into_inner());
    guard
        .get_or_insert_with(HashMap::new)
        .entry(wpid.to_string())
        .or_default()
        .clone()
}

pub fn fetch_gpml_from(
    wpid: &str,
    cache_dir: &Path,
    online: bool,
    base_url: &str,
) -> Result<Vec<u8>, PathwayError> {
    check_wpid(wpid)?;
    let path = gpml_path(wpid, cache_dir);
    let read = |path: &Path| {
        fs::read(path).map_err(|source| PathwayError::Read {
            path: path.to_path_buf(),
            source,
        })
    };
    if path.exists() {
        return read(&path);
    }
    if !online {
        return Err(PathwayError::Missing {
            wpid: wpid.to_string(),
            cache_dir: cache_dir.to_path_buf(),
        });
    }
    let lock = writer_lock(wpid);
    let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
    // another writer may have finished while we waited
    if path.exists() {
        return read(&path);
    }
    let url = format!("{}/{wpid}/{wpid}.gpml", base_url.trim_end_matches('/'));
    log::info!("downloading {url}");
    let download = |e: &dyn std::fmt::Display| PathwayError::Download {
        wpid: wpid.to_string(),
        msg: e.to_string(),
    };
    let resp = ureq::get(&url).call().map_err(|e| download(&e))?;
    let bytes = resp
        .into_body()
        .read_to_vec()
        .map_err(|e| download(&e))?;
    write_atomic(&path, &bytes).map_err(|source| PathwayError::CacheWrite {
        wpid: wpid.to_string(),
        path: path.clone(),
        source,
    })?;
    Ok(bytes)
}

/// The measured gene universe with a stable fingerprint used as a memo key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasuredGenes {
    genes: BTreeSet<GeneSymbol>,
    fingerprint: String,
}

impl MeasuredGenes {
    pub fn new(genes: BTreeSet<GeneSymbol>) -> Self {
        let joined: Vec<&str> = genes.iter().map(GeneSymbol::as_str).collect();
        let fingerprint = sha256_hex(joined.join("\n").as_bytes());
        MeasuredGenes { genes, fingerprint }
    }

    pub fn set(&self) -> &BTreeSet<GeneSymbol> {
        &self.genes
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

type Slot = Arc<Mutex<Option<Arc<MolecularGraph>>>>;

/// Pathway knowledge base: index, GPML cache and the id table used to
/// resolve pathway nodes. Processed graphs are built once per
/// (WPID, measured gene set) and shared.
pub struct PathwayStore {
    pub index: GenePathwayIndex,
    pub cache_dir: PathBuf,
    pub online: bool,
    table: GeneIdMapping,
    memo: Mutex<HashMap<(String, String), Slot>>,
}

impl PathwayStore {
    pub fn new(index: GenePathwayIndex, table: GeneIdMapping, cache_dir: PathBuf, online: bool) -> Self {
        PathwayStore {
            index,
            cache_dir,
            online,
            table,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn memoized_count(&self) -> usize {
        self.memo
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .filter(|s| s.lock().unwrap_or_else(|e| e.into_inner()).is_some())
            .count()
    }

    /// Processed graph of one pathway restricted to `measured`.
    pub fn pathway_graph(
        &self,
        wpid: &str,
        measured: &MeasuredGenes,
    ) -> Result<Arc<MolecularGraph>, PathwayError> {
        let slot = {
            let mut memo = self.memo.lock().unwrap_or_else(|e| e.into_inner());
            memo.entry((wpid.to_string(), measured.fingerprint.clone()))
                .or_default()
                .clone()
        };
        let mut guard = slot.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(g) = guard.as_ref() {
            return Ok(g.clone());
        }
        let bytes = fetch_gpml(wpid, &self.cache_dir, self.online)?;
        let doc = gpml::parse_gpml(&bytes, wpid)?;
        let graph = Arc::new(gpml::build_pathway_graph(
            &doc,
            gpml::resolve_with_table(&self.table),
            measured.set(),
        ));
        *guard = Some(graph.clone());
        Ok(graph)
    }
}
