//! Second-best-score null model.
//!
//! Acceptance of a best match is judged against the distribution of
//! second-best scores for queries of similar word length. Scores are binned
//! by query token count; sparse bins are folded into their nearest populated
//! neighbor before the per-bin mean and population standard deviation are
//! frozen.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Candidate, MatchDecision, MatchError};

pub const DEFAULT_BIN_WIDTH: u32 = 5;
pub const DEFAULT_MIN_BIN_SAMPLES: u32 = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullBin {
    pub count: u64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModel {
    pub bin_width: u32,
    pub min_bin_samples: u32,
    /// Keyed by query-length bin (token count / bin_width). Lookups fall to
    /// the nearest key, so merged-away bins stay addressable.
    pub bins: BTreeMap<u32, NullBin>,
}

impl NullModel {
    /// Fit from (query token count, second-best score) observations.
    pub fn fit(
        observations: &[(usize, f64)],
        bin_width: u32,
        min_bin_samples: u32,
    ) -> Result<Self, MatchError> {
        if observations.is_empty() {
            return Err(MatchError::EmptyCalibration);
        }
        let bin_width = bin_width.max(1);
        let mut grouped: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for &(len, score) in observations {
            grouped.entry(len as u32 / bin_width).or_default().push(score);
        }

        let keep: Vec<u32> = grouped
            .iter()
            .filter(|(_, v)| v.len() as u64 >= min_bin_samples as u64)
            .map(|(k, _)| *k)
            .collect();
        let mut merged: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        if keep.is_empty() {
            // nothing reaches the sample floor, collapse to one global bin
            let first = *grouped.keys().next().expect("nonempty input");
            let all: Vec<f64> = grouped.into_values().flatten().collect();
            merged.insert(first, all);
        } else {
            for (key, scores) in grouped {
                let target = if keep.binary_search(&key).is_ok() {
                    key
                } else {
                    nearest(&keep, key)
                };
                merged.entry(target).or_default().extend(scores);
            }
        }

        let bins = merged
            .into_iter()
            .map(|(key, scores)| {
                let n = scores.len() as f64;
                let mean = scores.iter().sum::<f64>() / n;
                let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
                (
                    key,
                    NullBin {
                        count: scores.len() as u64,
                        mean,
                        std: var.sqrt(),
                    },
                )
            })
            .collect();
        Ok(NullModel {
            bin_width,
            min_bin_samples,
            bins,
        })
    }

    /// The bin responsible for a query of this token count.
    pub fn lookup(&self, query_len: usize) -> &NullBin {
        let key = query_len as u32 / self.bin_width;
        if let Some(bin) = self.bins.get(&key) {
            return bin;
        }
        let keys: Vec<u32> = self.bins.keys().copied().collect();
        &self.bins[&nearest(&keys, key)]
    }

    /// Threshold the best candidate against the null distribution.
    ///
    /// In a zero-variance bin the decision degenerates to a strict comparison
    /// with the bin mean and the z-score is recorded as a signed infinity
    /// (zero when the score sits exactly on the mean).
    pub fn decide_match(
        &self,
        best: Option<Candidate>,
        second: Option<Candidate>,
        query_len: usize,
        z_threshold: f64,
    ) -> MatchDecision {
        let Some(best) = best else {
            return MatchDecision {
                best: None,
                second: None,
                zscore: None,
                matched: false,
            };
        };
        let bin = self.lookup(query_len);
        let (zscore, matched) = if bin.std > 0.0 {
            let z = (best.score - bin.mean) / bin.std;
            (z, z >= z_threshold)
        } else {
            let diff = best.score - bin.mean;
            let z = if diff > 0.0 {
                f64::INFINITY
            } else if diff < 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            };
            (z, diff > 0.0)
        };
        MatchDecision {
            best: Some(best),
            second,
            zscore: Some(zscore),
            matched,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), MatchError> {
        let body = serde_json::to_string_pretty(&NullModelFile {
            format: NULL_FORMAT.to_string(),
            version: NULL_VERSION,
            bin_width: self.bin_width,
            min_bin_samples: self.min_bin_samples,
            bins: self.bins.clone(),
        })
        .expect("null model serializes");
        fs::write(path, body + "\n").map_err(|e| MatchError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self, MatchError> {
        let body = fs::read_to_string(path).map_err(|e| MatchError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let file: NullModelFile = serde_json::from_str(&body).map_err(|e| MatchError::BadFormat {
            path: path.display().to_string(),
            detail: format!("unreadable null model: {e}"),
        })?;
        if file.format != NULL_FORMAT || file.version != NULL_VERSION {
            return Err(MatchError::BadFormat {
                path: path.display().to_string(),
                detail: format!(
                    "unsupported null-model format {}/{} (want {NULL_FORMAT}/{NULL_VERSION})",
                    file.format, file.version
                ),
            });
        }
        Ok(NullModel {
            bin_width: file.bin_width,
            min_bin_samples: file.min_bin_samples,
            bins: file.bins,
        })
    }
}

const NULL_FORMAT: &str = "pubsci-null";
const NULL_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct NullModelFile {
    format: String,
    version: u32,
    bin_width: u32,
    min_bin_samples: u32,
    bins: BTreeMap<u32, NullBin>,
}

fn nearest(keys: &[u32], key: u32) -> u32 {
    debug_assert!(!keys.is_empty());
    *keys
        .iter()
        .min_by_key(|k| (k.abs_diff(key), **k))
        .expect("nonempty key set")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::PaperId;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, Normal};

    fn cand(score: f64) -> Candidate {
        Candidate {
            paper_id: PaperId::from("p"),
            score,
        }
    }

    #[test]
    fn two_point_bin_has_mean_five_std_one() {
        let model = NullModel::fit(&[(3, 4.0), (3, 6.0)], 5, 1).unwrap();
        let bin = model.lookup(3);
        assert_eq!(bin.mean, 5.0);
        assert_eq!(bin.std, 1.0);
        assert_eq!(bin.count, 2);
    }

    #[test]
    fn identical_scores_give_zero_std() {
        let model = NullModel::fit(&[(2, 7.0), (2, 7.0), (2, 7.0)], 5, 1).unwrap();
        assert_eq!(model.lookup(2).std, 0.0);
    }

    #[test]
    fn empty_calibration_is_an_error() {
        assert!(matches!(
            NullModel::fit(&[], 5, 30),
            Err(MatchError::EmptyCalibration)
        ));
    }

    #[test]
    fn sparse_bins_merge_into_nearest_populated_bin() {
        // bin 0 has 30 samples, bin 1 has 30, bin 3 has just 2
        let mut obs = Vec::new();
        for _ in 0..30 {
            obs.push((2usize, 1.0));
            obs.push((7, 2.0));
        }
        obs.push((16, 100.0));
        obs.push((17, 100.0));
        let model = NullModel::fit(&obs, 5, 30).unwrap();
        assert_eq!(model.bins.len(), 2);
        // the two far-out samples landed in bin 1
        assert_eq!(model.bins[&1].count, 32);
        assert!(model.bins[&1].mean > 2.0);
        // lookups for long queries fall to the surviving nearest bin
        assert_eq!(model.lookup(16).count, 32);
    }

    #[test]
    fn all_sparse_collapses_to_single_global_bin() {
        let obs = vec![(1usize, 1.0), (8, 3.0), (22, 5.0)];
        let model = NullModel::fit(&obs, 5, 30).unwrap();
        assert_eq!(model.bins.len(), 1);
        let bin = model.lookup(100);
        assert_eq!(bin.count, 3);
        assert_eq!(bin.mean, 3.0);
    }

    #[test]
    fn monte_carlo_recovers_generator_means() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let mut obs = Vec::new();
        let gens = [(2usize, 3.0, 0.5), (7, 6.0, 1.0), (12, 9.0, 2.0)];
        for &(len, mean, std) in &gens {
            let normal = Normal::new(mean, std).unwrap();
            for _ in 0..10_000 {
                obs.push((len, normal.sample(&mut rng)));
            }
        }
        let model = NullModel::fit(&obs, 5, 30).unwrap();
        for &(len, mean, std) in &gens {
            let bin = model.lookup(len);
            let bound = 3.0 * std / (bin.count as f64).sqrt();
            assert!(
                (bin.mean - mean).abs() < bound,
                "len {len}: recovered {} vs generator {mean}",
                bin.mean
            );
        }
    }

    #[test]
    fn high_score_in_unit_bin_matches() {
        let model = NullModel::fit(&[(3, 4.0), (3, 6.0)], 5, 1).unwrap();
        let d = model.decide_match(Some(cand(9.0)), None, 3, 2.0);
        assert_eq!(d.zscore, Some(4.0));
        assert!(d.matched);
    }

    #[test]
    fn score_at_bin_mean_does_not_match() {
        let model = NullModel::fit(&[(3, 4.0), (3, 6.0)], 5, 1).unwrap();
        let d = model.decide_match(Some(cand(5.0)), None, 3, 2.0);
        assert_eq!(d.zscore, Some(0.0));
        assert!(!d.matched);
    }

    #[test]
    fn zero_std_bin_needs_strict_improvement() {
        let model = NullModel::fit(&[(2, 7.0), (2, 7.0)], 5, 1).unwrap();
        assert!(!model.decide_match(Some(cand(7.0)), None, 2, 2.0).matched);
        let d = model.decide_match(Some(cand(7.01)), None, 2, 2.0);
        assert!(d.matched);
        assert_eq!(d.zscore, Some(f64::INFINITY));
    }

    #[test]
    fn no_candidates_is_a_clean_non_match() {
        let model = NullModel::fit(&[(3, 4.0)], 5, 1).unwrap();
        let d = model.decide_match(None, None, 3, 2.0);
        assert!(!d.matched);
        assert_eq!(d.best, None);
        assert_eq!(d.zscore, None);
    }

    #[test]
    fn matched_decisions_always_meet_the_threshold() {
        let model = NullModel::fit(&[(3, 4.0), (3, 6.0)], 5, 1).unwrap();
        for score in [0.0, 4.9, 5.0, 6.9, 7.0, 7.1, 12.0] {
            let d = model.decide_match(Some(cand(score)), None, 3, 2.0);
            if d.matched {
                assert!(d.zscore.unwrap() >= 2.0);
            }
        }
    }

    #[test]
    fn model_round_trips_through_file() {
        let model = NullModel::fit(&[(3, 4.0), (3, 6.0), (9, 2.0)], 5, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("null.json");
        model.save(&path).unwrap();
        assert_eq!(NullModel::load(&path).unwrap(), model);
    }
}
