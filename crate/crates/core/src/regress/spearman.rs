//! Spearman rank correlation with exact small-sample p-values.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::RegressError;

/// Largest sample size for which the permutation null is enumerated exactly.
pub const EXACT_PERMUTATION_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanResult {
    pub r_s: f64,
    pub p_value: f64,
    pub n: usize,
    /// True when the p-value came from full permutation enumeration rather
    /// than the t approximation.
    pub exact: bool,
}

/// Midranks: ties receive the average of the positions they occupy.
fn midranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|a, b| values[*a].total_cmp(&values[*b]));
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based positions i+1 ..= j+1 share one midrank
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        None
    } else {
        Some(sab / (saa * sbb).sqrt())
    }
}

/// Count permutations of `b` whose |correlation| with `a` reaches |observed|,
/// by Heap's algorithm over all n! orderings.
fn permutation_tail_count(a: &[f64], b: &[f64], observed: f64) -> (u64, u64) {
    let n = b.len();
    let mut perm = b.to_vec();
    let mut counts = vec![0usize; n];
    let mut hits = 0u64;
    let mut total = 1u64;
    let threshold = observed.abs() - 1e-9;
    if pearson(a, &perm).is_some_and(|r| r.abs() >= threshold) {
        hits += 1;
    }
    let mut i = 0;
    while i < n {
        if counts[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(counts[i], i);
            }
            total += 1;
            if pearson(a, &perm).is_some_and(|r| r.abs() >= threshold) {
                hits += 1;
            }
            counts[i] += 1;
            i = 0;
        } else {
            counts[i] = 0;
            i += 1;
        }
    }
    (hits, total)
}

/// Spearman correlation of two equal-length samples.
///
/// The correlation is the Pearson correlation of midranks. For n up to
/// [`EXACT_PERMUTATION_MAX_N`] the p-value is the exact two-sided
/// permutation tail probability; for larger n it uses the t approximation
/// with n-2 degrees of freedom.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<SpearmanResult, RegressError> {
    if a.len() != b.len() {
        return Err(RegressError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 3 {
        return Err(RegressError::TooFewPoints { need: 3, got: n });
    }
    let ra = midranks(a);
    let rb = midranks(b);
    let r_s = pearson(&ra, &rb).ok_or(RegressError::ConstantInput)?;

    if n <= EXACT_PERMUTATION_MAX_N {
        let (hits, total) = permutation_tail_count(&ra, &rb, r_s);
        return Ok(SpearmanResult {
            r_s,
            p_value: hits as f64 / total as f64,
            n,
            exact: true,
        });
    }

    let dof = (n - 2) as f64;
    let denom = 1.0 - r_s * r_s;
    let p_value = if denom <= 0.0 {
        0.0
    } else {
        let t = r_s * (dof / denom).sqrt();
        let dist = StudentsT::new(0.0, 1.0, dof).expect("positive dof");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok(SpearmanResult {
        r_s,
        p_value,
        n,
        exact: false,
    })
}
