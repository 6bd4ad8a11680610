//! Gene identifier canonicalization to HGNC symbols.
//!
//! Source identifiers are namespace-qualified strings (`ensembl:ENSG…`,
//! `entrez:7157`, `uniprot:P04637`, `label:TP53`). The offline path is a
//! three-column TSV table; [`resolve_batch_online`] wraps a MyGene.info-style
//! query endpoint and persists every response under a cache directory so
//! later runs are offline.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::GeneSymbol;

pub const CACHE_DIR_ENV: &str = "GIG_CACHE_DIR";
pub const MYGENE_URL_ENV: &str = "GIG_MYGENE_URL";
pub const DEFAULT_MYGENE_URL: &str = "https://mygene.info/v3";
const ONLINE_BATCH: usize = 1000;

#[derive(Debug, Error)]
pub enum GeneIdError {
    #[error("{path}:{line}: {msg}")]
    Table {
        path: PathBuf,
        line: usize,
        msg: String,
    },
    #[error("duplicate source id {id:?} in mapping table {path}")]
    DuplicateKey { path: PathBuf, id: String },
    #[error("corrupt gene-id cache file {path}: {msg}")]
    CacheCorrupt { path: PathBuf, msg: String },
    #[error("gene-id service request failed ({msg}); unresolved ids: {}", unresolved.join(","))]
    Network { msg: String, unresolved: Vec<String> },
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> GeneIdError {
    let context = context.into();
    move |source| GeneIdError::Io { context, source }
}

/// Identifier namespaces understood by the mapping table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Namespace {
    Ensembl,
    Uniprot,
    Entrez,
    Label,
}

impl Namespace {
    pub fn prefix(self) -> &'static str {
        match self {
            Namespace::Ensembl => "ensembl",
            Namespace::Uniprot => "uniprot",
            Namespace::Entrez => "entrez",
            Namespace::Label => "label",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ensembl" => Some(Namespace::Ensembl),
            "uniprot" => Some(Namespace::Uniprot),
            "entrez" => Some(Namespace::Entrez),
            "label" | "symbol" | "hgnc" => Some(Namespace::Label),
            _ => None,
        }
    }

    /// Builds the qualified key for `raw`, applying the label case rule and
    /// the Ensembl version strip.
    pub fn qualify(self, raw: &str) -> String {
        let raw = raw.trim();
        match self {
            Namespace::Label => format!("label:{}", raw.to_uppercase()),
            Namespace::Ensembl => format!("ensembl:{}", strip_ensembl_version(raw)),
            _ => format!("{}:{raw}", self.prefix()),
        }
    }
}

/// Normalizes a `namespace:value` key. Unknown namespaces are returned as-is.
pub fn normalize_key(id: &str) -> String {
    match id.split_once(':') {
        Some((ns, rest)) => match Namespace::parse(ns) {
            Some(ns) => ns.qualify(rest),
            None => id.trim().to_string(),
        },
        None => id.trim().to_string(),
    }
}

/// Removes a trailing `.<digits>` from Ensembl gene accessions (`ENSG` +
/// digits). Anything else is returned unchanged.
pub fn strip_ensembl_version(id: &str) -> &str {
    let Some((stem, version)) = id.rsplit_once('.') else {
        return id;
    };
    let is_gene = stem.len() > 4
        && stem.starts_with("ENSG")
        && stem[4..].bytes().all(|b| b.is_ascii_digit());
    let is_version = !version.is_empty() && version.bytes().all(|b| b.is_ascii_digit());
    if is_gene && is_version {
        stem
    } else {
        id
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MappingEntry {
    pub symbol: GeneSymbol,
    pub protein_coding: bool,
}

/// Source id → HGNC symbol table. Many-to-one is allowed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GeneIdMapping {
    entries: BTreeMap<String, MappingEntry>,
}

impl GeneIdMapping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Inserts an entry, returning the previous one for the same key.
    pub fn insert(&mut self, source_id: &str, entry: MappingEntry) -> Option<MappingEntry> {
        self.entries.insert(normalize_key(source_id), entry)
    }

    pub fn get(&self, source_id: &str) -> Option<&MappingEntry> {
        self.entries.get(&normalize_key(source_id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &MappingEntry)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn extend(&mut self, other: GeneIdMapping) {
        self.entries.extend(other.entries);
    }

    /// Reads `source_id<TAB>hgnc_symbol<TAB>protein_coding(0|1)`. Blank lines
    /// and `#` comments are skipped; a header line starting with
    /// `source_id` is tolerated.
    pub fn from_tsv<R: BufRead>(r: R, path: &Path) -> Result<Self, GeneIdError> {
        let mut table = GeneIdMapping::new();
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(io_err(format!("reading {}", path.display())))?;
            let t = line.trim_end_matches(['\r', '\n']);
            if t.trim().is_empty() || t.starts_with('#') || (i == 0 && t.starts_with("source_id")) {
                continue;
            }
            let bad = |msg: &str| GeneIdError::Table {
                path: path.to_path_buf(),
                line: i + 1,
                msg: msg.to_string(),
            };
            let cols: Vec<&str> = t.split('\t').collect();
            if cols.len() != 3 {
                return Err(bad("expected 3 tab-separated columns"));
            }
            let symbol = GeneSymbol::new(cols[1]).ok_or_else(|| bad("empty HGNC symbol"))?;
            let protein_coding = match cols[2].trim() {
                "1" => true,
                "0" => false,
                _ => return Err(bad("protein_coding must be 0 or 1")),
            };
            let key = normalize_key(cols[0]);
            if key.is_empty() {
                return Err(bad("empty source id"));
            }
            if table.entries.contains_key(&key) {
                return Err(GeneIdError::DuplicateKey {
                    path: path.to_path_buf(),
                    id: key,
                });
            }
            table.entries.insert(
                key,
                MappingEntry {
                    symbol,
                    protein_coding,
                },
            );
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, GeneIdError> {
        let f = fs::File::open(path).map_err(io_err(format!("opening {}", path.display())))?;
        Self::from_tsv(BufReader::new(f), path)
    }
}

/// Maps `id` to its HGNC symbol. Returns `None` for unmapped ids and, when
/// `require_protein_coding` is set, for non-coding genes.
pub fn canonicalize(
    id: &str,
    table: &GeneIdMapping,
    require_protein_coding: bool,
) -> Option<GeneSymbol> {
    let e = table.get(id)?;
    if require_protein_coding && !e.protein_coding {
        return None;
    }
    Some(e.symbol.clone())
}

/// Default cache directory: `$GIG_CACHE_DIR`, else `.gig-cache/geneid`.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".gig-cache").join("geneid"))
}

/// One cached service response. `None` records an id the service could not
/// resolve so it is not re-queried.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct CacheBatch {
    ids: Vec<String>,
    entries: BTreeMap<String, Option<MappingEntry>>,
}

fn read_cache(cache_dir: &Path) -> Result<BTreeMap<String, Option<MappingEntry>>, GeneIdError> {
    let mut out = BTreeMap::new();
    if !cache_dir.exists() {
        return Ok(out);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(cache_dir)
        .map_err(io_err(format!("listing {}", cache_dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    for path in files {
        let text = fs::read_to_string(&path).map_err(io_err(format!("reading {}", path.display())))?;
        let batch: CacheBatch =
            serde_json::from_str(&text).map_err(|e| GeneIdError::CacheCorrupt {
                path: path.clone(),
                msg: e.to_string(),
            })?;
        for (k, v) in batch.entries {
            out.insert(normalize_key(&k), v);
        }
    }
    Ok(out)
}

fn write_cache(cache_dir: &Path, batch: &CacheBatch) -> Result<PathBuf, GeneIdError> {
    fs::create_dir_all(cache_dir).map_err(io_err(format!("creating {}", cache_dir.display())))?;
    let mut h = Sha256::new();
    for id in &batch.ids {
        h.update(id.as_bytes());
        h.update(b"\n");
    }
    let name = format!("mygene_{}.json", &hex::encode(h.finalize())[..16]);
    let path = cache_dir.join(name);
    let body = serde_json::to_vec_pretty(batch).expect("cache batch serializes");
    crate::util::write_atomic(&path, &body).map_err(io_err(format!("writing {}", path.display())))?;
    Ok(path)
}

#[derive(Debug, Deserialize)]
struct ServiceHit {
    query: String,
    #[serde(default)]
    symbol: Option<String>,
    #[serde(default)]
    type_of_gene: Option<String>,
    #[serde(default)]
    notfound: bool,
}

fn scope_for(ns: Namespace) -> &'static str {
    match ns {
        Namespace::Ensembl => "ensembl.gene",
        Namespace::Uniprot => "uniprot",
        Namespace::Entrez => "entrezgene",
        Namespace::Label => "symbol",
    }
}

fn query_service(
    base_url: &str,
    ns: Namespace,
    raw_ids: &[String],
) -> Result<Vec<ServiceHit>, String> {
    let url = format!("{}/query", base_url.trim_end_matches('/'));
    let q = raw_ids.join(",");
    let resp = ureq::post(&url)
        .send_form([
            ("q", q.as_str()),
            ("scopes", scope_for(ns)),
            ("fields", "symbol,type_of_gene"),
            ("species", "human"),
        ])
        .map_err(|e| e.to_string())?;
    let mut body = resp.into_body();
    let text = body.read_to_string().map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| format!("bad response body: {e}"))
}

/// Resolves `ids` through the annotation service at `$GIG_MYGENE_URL`
/// (default MyGene.info), serving cached answers first.
pub fn resolve_batch_online(ids: &[String], cache_dir: &Path) -> Result<GeneIdMapping, GeneIdError> {
    let base = std::env::var(MYGENE_URL_ENV).unwrap_or_else(|_| DEFAULT_MYGENE_URL.to_string());
    resolve_batch_with(ids, cache_dir, &base)
}

pub fn resolve_batch_with(
    ids: &[String],
    cache_dir: &Path,
    base_url: &str,
) -> Result<GeneIdMapping, GeneIdError> {
    let wanted: BTreeSet<String> = ids.iter().map(|s| normalize_key(s)).collect();
    let mut cached = read_cache(cache_dir)?;
    let missing: Vec<String> = wanted
        .iter()
        .filter(|k| !cached.contains_key(*k))
        .cloned()
        .collect();

    // group by namespace so each request has one scope
    let mut by_ns: BTreeMap<Namespace, Vec<String>> = BTreeMap::new();
    for key in &missing {
        let ns = key.split_once(':').and_then(|(ns, _)| Namespace::parse(ns));
        match ns {
            Some(ns) => by_ns.entry(ns).or_default().push(key.clone()),
            None => {
                cached.insert(key.clone(), None);
            }
        }
    }
    for (ns, keys) in by_ns {
        for chunk in keys.chunks(ONLINE_BATCH) {
            let raw: Vec<String> = chunk
                .iter()
                .map(|k| k.split_once(':').map(|(_, r)| r.to_string()).unwrap_or_default())
                .collect();
            let hits = query_service(base_url, ns, &raw).map_err(|msg| GeneIdError::Network {
                msg,
                unresolved: chunk.to_vec(),
            })?;
            let mut batch = CacheBatch {
                ids: chunk.to_vec(),
                entries: chunk.iter().map(|k| (k.clone(), None)).collect(),
            };
            for hit in hits {
                if hit.notfound {
                    continue;
                }
                let key = ns.qualify(&hit.query);
                let Some(symbol) = hit.symbol.as_deref().and_then(GeneSymbol::new) else {
                    continue;
                };
                let slot = batch.entries.entry(key).or_insert(None);
                // first hit wins for multi-mapped queries
                if slot.is_none() {
                    *slot = Some(MappingEntry {
                        symbol,
                        protein_coding: hit.type_of_gene.as_deref() == Some("protein-coding"),
                    });
                }
            }
            write_cache(cache_dir, &batch)?;
            cached.extend(batch.entries);
        }
    }

    let mut out = GeneIdMapping::new();
    for key in wanted {
        if let Some(Some(e)) = cached.get(&key) {
            out.entries.insert(key, e.clone());
        }
    }
    Ok(out)
}

/// Writes a table in the TSV format read by [`GeneIdMapping::from_tsv`].
pub fn write_tsv<W: Write>(table: &GeneIdMapping, mut w: W) -> io::Result<()> {
    for (k, e) in table.iter() {
        writeln!(w, "{k}\t{}\t{}", e.symbol, u8::from(e.protein_coding))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::sym;

    fn fixture_table() -> GeneIdMapping {
        let text = "source_id\thgnc_symbol\tprotein_coding\n\
                    ensembl:ENSG000001\tGENEA\t1\n\
                    ensembl:ENSG000002\tGENEB\t0\n\
                    label:tp53\tTP53\t1\n\
                    entrez:7157\tTP53\t1\n";
        GeneIdMapping::from_tsv(text.as_bytes(), Path::new("fixture.tsv")).unwrap()
    }

    #[test]
    fn ensembl_version_strip() {
        assert_eq!(strip_ensembl_version("ENSG00000141510.15"), "ENSG00000141510");
        assert_eq!(strip_ensembl_version("ENSG00000141510"), "ENSG00000141510");
        assert_eq!(strip_ensembl_version("TP53.1"), "TP53.1");
        assert_eq!(strip_ensembl_version("ENSG.1"), "ENSG.1");
        assert_eq!(strip_ensembl_version("ENSG0001.x"), "ENSG0001.x");
        assert_eq!(strip_ensembl_version("ENST00000269305.4"), "ENST00000269305.4");
    }

    #[test]
    fn canonicalize_lookups() {
        let t = fixture_table();
        assert_eq!(canonicalize("ensembl:ENSG000001", &t, true), Some(sym("GENEA")));
        assert_eq!(canonicalize("ensembl:ENSG000001.7", &t, true), Some(sym("GENEA")));
        assert_eq!(canonicalize("ensembl:ENSG000002", &t, true), None);
        assert_eq!(canonicalize("ensembl:ENSG000002", &t, false), Some(sym("GENEB")));
        assert_eq!(canonicalize("ensembl:ENSG999", &t, false), None);
        // labels are case-normalized, accessions are not
        assert_eq!(canonicalize("label:Tp53", &t, true), Some(sym("TP53")));
        assert_eq!(canonicalize("entrez:7157", &t, true), Some(sym("TP53")));
        assert_eq!(canonicalize("ENSEMBL:ensg000001", &t, true), None);
    }

    #[test]
    fn table_errors() {
        let dup = "ensembl:E1\tA\t1\nensembl:E1\tB\t1\n";
        assert!(matches!(
            GeneIdMapping::from_tsv(dup.as_bytes(), Path::new("t")),
            Err(GeneIdError::DuplicateKey { .. })
        ));
        let bad = "ensembl:E1\tA\tyes\n";
        assert!(matches!(
            GeneIdMapping::from_tsv(bad.as_bytes(), Path::new("t")),
            Err(GeneIdError::Table { line: 1, .. })
        ));
        let empty_sym = "ensembl:E1\t \t1\n";
        assert!(GeneIdMapping::from_tsv(empty_sym.as_bytes(), Path::new("t")).is_err());
    }

    #[test]
    fn tsv_round_trip() {
        let t = fixture_table();
        let mut buf = Vec::new();
        write_tsv(&t, &mut buf).unwrap();
        let back = GeneIdMapping::from_tsv(buf.as_slice(), Path::new("x")).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn empty_batch_needs_no_network() {
        let dir = tempfile::tempdir().unwrap();
        let out = resolve_batch_with(&[], dir.path(), "http://127.0.0.1:9").unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn cache_hits_skip_network() {
        let dir = tempfile::tempdir().unwrap();
        let batch = CacheBatch {
            ids: vec!["ensembl:ENSG000001".into()],
            entries: [(
                "ensembl:ENSG000001".to_string(),
                Some(MappingEntry {
                    symbol: sym("GENEA"),
                    protein_coding: true,
                }),
            )]
            .into_iter()
            .collect(),
        };
        write_cache(dir.path(), &batch).unwrap();
        // port 9 (discard) is never contacted on a full cache hit
        let out = resolve_batch_with(
            &["ensembl:ENSG000001.3".to_string()],
            dir.path(),
            "http://127.0.0.1:9",
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(canonicalize("ensembl:ENSG000001", &out, true), Some(sym("GENEA")));
    }

    #[test]
    fn corrupt_cache_names_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mygene_bad.json");
        fs::write(&p, "{not json").unwrap();
        match resolve_batch_with(&["entrez:1".into()], dir.path(), "http://127.0.0.1:9") {
            Err(GeneIdError::CacheCorrupt { path, .. }) => assert_eq!(path, p),
            other => panic!("unexpected {other:?}"),
        }
    }
}
