//! Pipeline configuration: a flat TOML file whose keys can all be
//! overridden from the command line.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expression::{Orientation, DEFAULT_EPSILON};
use crate::geneid::{Namespace, CACHE_DIR_ENV};
use crate::pathway::PATHWAY_CACHE_ENV;
use crate::util::sha256_hex;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading config {}: {source}", path.display())]
    Read {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("parsing config {}: {msg}", path.display())]
    Parse { path: PathBuf, msg: String },
    #[error("config: {0}")]
    Invalid(String),
    #[error("config: {field} = {} does not exist", path.display())]
    MissingPath { field: &'static str, path: PathBuf },
}

fn default_hvg_n() -> usize {
    10_000
}
fn default_true() -> bool {
    true
}
fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}
fn default_tau() -> f64 {
    80.0
}
fn default_k() -> usize {
    50
}
fn default_frac() -> f64 {
    0.8
}
fn default_seed() -> u64 {
    42
}
fn default_namespace() -> Namespace {
    Namespace::Ensembl
}
fn default_output() -> PathBuf {
    PathBuf::from("gig-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub matrix: PathBuf,
    #[serde(default)]
    pub orientation: Orientation,
    /// Namespace assumed for matrix row ids that carry no `ns:` prefix.
    #[serde(default = "default_namespace")]
    pub matrix_id_namespace: Namespace,
    pub mapping_table: PathBuf,
    pub pathway_index: PathBuf,
    /// `sample_id<TAB>class_name`; required by `export`.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// GPML cache; falls back to `GIG_PATHWAY_CACHE`.
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Gene-id service cache; falls back to `GIG_CACHE_DIR`.
    #[serde(default)]
    pub gene_cache_dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub offline: bool,
    #[serde(default = "default_true")]
    pub require_protein_coding: bool,
    #[serde(default = "default_hvg_n")]
    pub hvg_n: usize,
    #[serde(default = "default_true")]
    pub log1p: bool,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_frac")]
    pub split_frac: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub threads: Option<usize>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct ConfigOverrides {
    pub matrix: Option<PathBuf>,
    pub orientation: Option<Orientation>,
    pub matrix_id_namespace: Option<Namespace>,
    pub mapping_table: Option<PathBuf>,
    pub pathway_index: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub gene_cache_dir: Option<PathBuf>,
    pub offline: Option<bool>,
    pub require_protein_coding: Option<bool>,
    pub hvg_n: Option<usize>,
    pub log1p: Option<bool>,
    pub epsilon: Option<f64>,
    pub tau: Option<f64>,
    pub k: Option<usize>,
    pub split_frac: Option<f64>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

macro_rules! apply {
    ($cfg:ident, $ov:ident; $($f:ident),*; $($o:ident),*) => {
        $(if let Some(v) = $ov.$f.clone() { $cfg.$f = v; })*
        $(if let Some(v) = $ov.$o.clone() { $cfg.$o = Some(v); })*
    };
}

impl PipelineConfig {
    pub fn parse(text: &str, path: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })
    }

    /// Reads, resolves relative paths against the config file's directory,
    /// applies overrides, fills env fallbacks and validates.
    pub fn load(path: &Path, overrides: &ConfigOverrides) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text, path)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        cfg.rebase(base);
        cfg.apply(overrides);
        cfg.fill_env();
        cfg.validate()?;
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.matrix);
        fix(&mut self.mapping_table);
        fix(&mut self.pathway_index);
        fix(&mut self.output_dir);
        for p in [&mut self.labels, &mut self.cache_dir, &mut self.gene_cache_dir].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn apply(&mut self, ov: &ConfigOverrides) {
        let cfg = self;
        apply!(cfg, ov;
            matrix, orientation, matrix_id_namespace, mapping_table, pathway_index, offline,
            require_protein_coding, hvg_n, log1p, epsilon, tau, k, split_frac, seed, output_dir;
            labels, cache_dir, gene_cache_dir, threads);
    }

    fn fill_env(&mut self) {
        if self.cache_dir.is_none() {
            self.cache_dir = std::env::var_os(PATHWAY_CACHE_ENV).map(PathBuf::from);
        }
        if self.gene_cache_dir.is_none() {
            self.gene_cache_dir = std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.hvg_n < 1 {
            return Err(ConfigError::Invalid("hvg_n must be at least 1".into()));
        }
        if !(0.0..=100.0).contains(&self.tau) {
            return Err(ConfigError::Invalid(format!("tau must lie in [0, 100], got {}", self.tau)));
        }
        if !(self.split_frac > 0.0 && self.split_frac < 1.0) {
            return Err(ConfigError::Invalid(format!(
                "split_frac must lie strictly between 0 and 1, got {}",
                self.split_frac
            )));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(ConfigError::Invalid(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.k < 1 {
            return Err(ConfigError::Invalid("k must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(ConfigError::Invalid("threads must be at least 1".into()));
        }
        let Some(cache) = &self.cache_dir else {
            return Err(ConfigError::Invalid(format!(
                "cache_dir is not set and {PATHWAY_CACHE_ENV} is empty"
            )));
        };
        for (field, p) in [
            ("matrix", &self.matrix),
            ("mapping_table", &self.mapping_table),
            ("pathway_index", &self.pathway_index),
        ] {
            if !p.is_file() {
                return Err(ConfigError::MissingPath {
                    field,
                    path: p.clone(),
                });
            }
        }
        if let Some(l) = &self.labels {
            if !l.is_file() {
                return Err(ConfigError::MissingPath {
                    field: "labels",
                    path: l.clone(),
                });
            }
        }
        if self.offline && !cache.is_dir() {
            return Err(ConfigError::MissingPath {
                field: "cache_dir",
                path: cache.clone(),
            });
        }
        Ok(())
    }

    pub fn pathway_cache(&self) -> &Path {
        self.cache_dir.as_deref().expect("validated config has a cache dir")
    }

    /// Hash of the resolved configuration; recorded in every run-log line.
    pub fn checksum(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}
