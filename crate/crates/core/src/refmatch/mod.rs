//! Reference-string resolution against the paper corpus.
//!
//! A raw reference string is tokenized, scored against a multi-field BM25
//! inverted index, and the best candidate is accepted only when its score is
//! significantly above a null distribution built from second-best scores of
//! strings with similar word length.

pub mod batch;
pub mod index;
pub mod null;
pub mod tokenize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PaperId;

pub use batch::{
    calibration_observations, evaluate_matching, match_batch, MatchEvaluation, MatchLogEntry,
};
pub use index::{MetaField, SearchIndex, NUM_FIELDS};
pub use null::{NullBin, NullModel};
pub use tokenize::tokenize;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,
    #[error("unknown paper id: {0}")]
    UnknownPaper(PaperId),
    #[error("invalid BM25 parameter: {0}")]
    BadParams(String),
    #[error("null model needs at least one second-best observation")]
    EmptyCalibration,
    #[error("match log holds no records to evaluate")]
    EmptyLog,
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad file at {path}: {detail}")]
    BadFormat { path: String, detail: String },
}

/// Okapi BM25 parameters with one weight per metadata field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
    pub field_weights: [f64; NUM_FIELDS],
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params {
            k1: 1.2,
            b: 0.75,
            field_weights: [1.0; NUM_FIELDS],
        }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<(), MatchError> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(MatchError::BadParams(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(MatchError::BadParams(format!("b must lie in [0,1], got {}", self.b)));
        }
        for (i, w) in self.field_weights.iter().enumerate() {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(MatchError::BadParams(format!(
                    "field weight {i} must be nonnegative, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// A scored retrieval candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub paper_id: PaperId,
    pub score: f64,
}

/// Outcome of thresholding one query against the null model.
///
/// When the best score falls in a zero-variance bin the z-score degenerates;
/// it is recorded as an infinity of the matching sign and the decision falls
/// back to a strict comparison against the bin mean. Non-finite z-scores
/// serialize as JSON null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchDecision {
    pub best: Option<Candidate>,
    pub second: Option<Candidate>,
    pub zscore: Option<f64>,
    pub matched: bool,
}

/// Right-tail z cutoff matching a one-sided P = 0.05 under a Gaussian null.
pub const Z_TAIL_P05: f64 = 1.6448536269514722;

/// Default acceptance threshold; predictive power peaks near this cutoff.
pub const Z_DEFAULT: f64 = 2.0;
