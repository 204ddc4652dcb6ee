//! Batch resolution of reference records and evaluation against gold labels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::{MatchError, NullModel, SearchIndex};
use crate::corpus::{ConsumptionEvent, Domain, PaperId, ReferenceRecord};

/// One decision in the match log, in input-record order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatchLogEntry {
    pub source_doc_id: String,
    pub domain: Domain,
    pub query_len: u32,
    pub best_paper_id: Option<PaperId>,
    pub best_score: Option<f64>,
    pub second_score: Option<f64>,
    /// Absent when no candidate was retrieved; also absent after a file round
    /// trip when the score fell in a zero-variance bin (JSON cannot carry the
    /// infinity sentinel).
    pub zscore: Option<f64>,
    pub matched: bool,
    /// In labeled files, absence means the string has no true match.
    pub gold_paper_id: Option<PaperId>,
}

/// Resolve a batch of reference records. Returns one consumption event per
/// accepted match plus a log entry for every record. Records are processed in
/// parallel; both outputs keep input order.
pub fn match_batch(
    index: &SearchIndex,
    records: &[ReferenceRecord],
    null_model: &NullModel,
    z_threshold: f64,
) -> (Vec<ConsumptionEvent>, Vec<MatchLogEntry>) {
    let log: Vec<MatchLogEntry> = records
        .par_iter()
        .map(|rec| {
            let tokens = tokenize(&rec.raw_string);
            let mut candidates = index.query_top2_tokens(&tokens).into_iter();
            let best = candidates.next();
            let second = candidates.next();
            let decision = null_model.decide_match(best, second, tokens.len(), z_threshold);
            MatchLogEntry {
                source_doc_id: rec.source_doc_id.clone(),
                domain: rec.domain,
                query_len: tokens.len() as u32,
                best_paper_id: decision.best.as_ref().map(|c| c.paper_id.clone()),
                best_score: decision.best.as_ref().map(|c| c.score),
                second_score: decision.second.as_ref().map(|c| c.score),
                zscore: decision.zscore,
                matched: decision.matched,
                gold_paper_id: rec.gold_paper_id.clone(),
            }
        })
        .collect();
    let events = log
        .iter()
        .filter(|entry| entry.matched)
        .map(|entry| ConsumptionEvent {
            domain: entry.domain,
            consumer_doc_id: entry.source_doc_id.clone(),
            subdomain: None,
            paper_id: entry
                .best_paper_id
                .clone()
                .expect("matched entries carry a best candidate"),
        })
        .collect();
    (events, log)
}

/// Second-best scores paired with query lengths, the null model's
/// calibration input. A record with fewer than two candidates contributes a
/// zero, the score of a document sharing no token with the query.
pub fn calibration_observations(
    index: &SearchIndex,
    records: &[ReferenceRecord],
) -> Vec<(usize, f64)> {
    records
        .par_iter()
        .map(|rec| {
            let tokens = tokenize(&rec.raw_string);
            let second = index
                .query_top2_tokens(&tokens)
                .get(1)
                .map(|c| c.score)
                .unwrap_or(0.0);
            (tokens.len(), second)
        })
        .collect()
}

/// Fit-for-purpose summary of a labeled match log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchEvaluation {
    /// F1 over the binary has-a-match task.
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// Among records where gold has a match and the system matched, the
    /// fraction resolved to the correct paper.
    pub conditional_accuracy: f64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub true_negatives: u64,
    pub correct_ids: u64,
}

/// Score a labeled log. Absent gold ids count as explicit no-true-match
/// labels. Empty-denominator rates degrade to 1.0, a vacuous success.
pub fn evaluate_matching(log: &[MatchLogEntry]) -> Result<MatchEvaluation, MatchError> {
    if log.is_empty() {
        return Err(MatchError::EmptyLog);
    }
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fng = 0u64;
    let mut tn = 0u64;
    let mut correct_ids = 0u64;
    for entry in log {
        match (entry.matched, entry.gold_paper_id.as_ref()) {
            (true, Some(gold)) => {
                tp += 1;
                if entry.best_paper_id.as_ref() == Some(gold) {
                    correct_ids += 1;
                }
            }
            (true, None) => fp += 1,
            (false, Some(_)) => fng += 1,
            (false, None) => tn += 1,
        }
    }
    let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    Ok(MatchEvaluation {
        f1: ratio(2 * tp, 2 * tp + fp + fng),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fng),
        conditional_accuracy: ratio(correct_ids, tp),
        true_positives: tp,
        false_positives: fp,
        false_negatives: fng,
        true_negatives: tn,
        correct_ids,
    })
}
