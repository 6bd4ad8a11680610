//! Crate-wide error type and its mapping onto process exit codes.

use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::assembly::AssemblyError;
use crate::config::ConfigError;
use crate::expression::ExpressionError;
use crate::geneid::GeneIdError;
use crate::gpml::GpmlError;
use crate::graph::EdgeListError;
use crate::graphlets::GraphletError;
use crate::metrics::MetricsError;
use crate::nullmodels::NullModelError;
use crate::pathway::PathwayError;

/// Coarse failure class: 1 = bad input data, 2 = bad invocation or config,
/// 3 = cache, network or filesystem trouble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Data,
    Usage,
    Environment,
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Data => 1,
            ErrorCategory::Usage => 2,
            ErrorCategory::Environment => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Data => "data",
            ErrorCategory::Usage => "usage",
            ErrorCategory::Environment => "environment",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    GeneId(#[from] GeneIdError),
    #[error(transparent)]
    Gpml(#[from] GpmlError),
    #[error(transparent)]
    Pathway(#[from] PathwayError),
    #[error(transparent)]
    Expression(#[from] ExpressionError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    NullModel(#[from] NullModelError),
    #[error(transparent)]
    Graphlet(#[from] GraphletError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{}: {source}", path.display())]
    EdgeList {
        path: PathBuf,
        #[source]
        source: EdgeListError,
    },
    #[error("{}: {msg}", path.display())]
    Input { path: PathBuf, msg: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Error {
        let path = path.into();
        move |source| Error::Io { path, source }
    }

    pub fn category(&self) -> ErrorCategory {
        use ErrorCategory::*;
        match self {
            Error::Config(ConfigError::MissingPath { field: "cache_dir", .. }) => Environment,
            Error::Config(_) | Error::Usage(_) => Usage,
            Error::GeneId(e) => match e {
                GeneIdError::Table { .. } | GeneIdError::DuplicateKey { .. } => Data,
                GeneIdError::CacheCorrupt { .. } | GeneIdError::Network { .. } | GeneIdError::Io { .. } => {
                    Environment
                }
            },
            Error::Pathway(e) => match e {
                PathwayError::Missing { .. }
                | PathwayError::Download { .. }
                | PathwayError::CacheWrite { .. }
                | PathwayError::Read { .. } => Environment,
                PathwayError::InvalidId(_) | PathwayError::Index { .. } | PathwayError::Gpml(_) => Data,
            },
            Error::Expression(ExpressionError::Io { .. }) => Environment,
            Error::Assembly(AssemblyError::Io { .. }) => Environment,
            Error::Metrics(MetricsError::Io { .. }) => Environment,
            Error::EdgeList {
                source: EdgeListError::Io(_),
                ..
            } => Environment,
            Error::Io { .. } => Environment,
            Error::Gpml(_)
            | Error::Expression(_)
            | Error::Assembly(_)
            | Error::NullModel(_)
            | Error::Graphlet(_)
            | Error::Metrics(_)
            | Error::EdgeList { .. }
            | Error::Input { .. } => Data,
        }
    }
}
