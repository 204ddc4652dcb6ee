//! Command-line front end for the consumption analytics pipeline.
//!
//! Stages communicate only through files in the configured output directory,
//! so any stage can be rerun or audited on its own. `run` chains all of them
//! and records a manifest of content digests and per-stage row counts.

pub mod config;
pub mod manifest;
pub mod report;
pub mod stages;

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Corpus(#[from] pubsci_core::CorpusError),
    #[error(transparent)]
    Match(#[from] pubsci_core::refmatch::MatchError),
    #[error(transparent)]
    Metrics(#[from] pubsci_core::metrics::MetricsError),
    #[error(transparent)]
    Funding(#[from] pubsci_core::funding::FundingError),
    #[error(transparent)]
    Regress(#[from] pubsci_core::regress::RegressError),
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("missing artifact {path}, run `pubsci {producer}` first")]
    MissingArtifact { path: String, producer: &'static str },
    #[error("bad table at {path}:{line}: {detail}")]
    BadTable {
        path: String,
        line: usize,
        detail: String,
    },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<CliError>,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> CliError {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Tag an error with the stage it surfaced in. Already-tagged errors
    /// keep their original stage so the innermost failure site wins.
    pub fn stage(stage: &'static str, err: CliError) -> CliError {
        match err {
            tagged @ CliError::Stage { .. } => tagged,
            other => CliError::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }
}
