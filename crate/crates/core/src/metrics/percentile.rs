//! Citation percentiles within (field, publication year) cells and the hit
//! sets derived from them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{FieldId, FieldTaxonomy, PaperId, PaperSet};

use super::{fields_at_level, FieldLevel, MetricsError};

/// Per-paper, per-field citation percentiles.
///
/// A percentile is the fraction of the paper's (field, year) cell with
/// strictly more citations, so it lies in [0,1) and ties share one value.
/// Smaller means better cited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileTable {
    pub level: FieldLevel,
    pub percentiles: BTreeMap<PaperId, BTreeMap<FieldId, f64>>,
    pub cells: BTreeMap<(FieldId, i32), u64>,
}

pub fn citation_percentiles(
    papers: &PaperSet,
    taxonomy: &FieldTaxonomy,
    level: FieldLevel,
) -> PercentileTable {
    let mut cells: BTreeMap<(FieldId, i32), Vec<(PaperId, u64)>> = BTreeMap::new();
    for paper in papers.iter() {
        for field in fields_at_level(paper, taxonomy, level) {
            cells
                .entry((field, paper.year))
                .or_default()
                .push((paper.id.clone(), paper.citations));
        }
    }
    let mut percentiles: BTreeMap<PaperId, BTreeMap<FieldId, f64>> = BTreeMap::new();
    let mut cell_sizes = BTreeMap::new();
    for ((field, year), members) in cells {
        let n = members.len();
        cell_sizes.insert((field.clone(), year), n as u64);
        let mut counts: Vec<u64> = members.iter().map(|(_, c)| *c).collect();
        counts.sort_unstable_by(|a, b| b.cmp(a));
        // strictly-greater count of a value is the index of its first
        // occurrence in the descending sort
        let mut first_at: BTreeMap<u64, usize> = BTreeMap::new();
        for (i, c) in counts.iter().enumerate() {
            first_at.entry(*c).or_insert(i);
        }
        for (id, citations) in members {
            let greater = first_at[&citations];
            percentiles
                .entry(id)
                .or_default()
                .insert(field.clone(), greater as f64 / n as f64);
        }
    }
    PercentileTable {
        level,
        percentiles,
        cells: cell_sizes,
    }
}

/// How a multi-field paper qualifies as a hit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitRule {
    /// Hit when inside the threshold in at least one of its fields.
    AnyField,
    /// Hit only when inside the threshold in every one of its fields.
    AllField,
}

/// Papers whose percentile clears the threshold under the given rule.
pub fn hit_set(
    table: &PercentileTable,
    q: f64,
    rule: HitRule,
) -> Result<BTreeSet<PaperId>, MetricsError> {
    if !(q > 0.0 && q < 1.0) {
        return Err(MetricsError::BadThreshold(q));
    }
    let hits = table
        .percentiles
        .iter()
        .filter(|(_, by_field)| match rule {
            HitRule::AnyField => by_field.values().any(|p| *p < q),
            HitRule::AllField => !by_field.is_empty() && by_field.values().all(|p| *p < q),
        })
        .map(|(id, _)| id.clone())
        .collect();
    Ok(hits)
}

/// Fraction of the subset that are hits.
pub fn hit_rate(subset: &BTreeSet<PaperId>, hits: &BTreeSet<PaperId>) -> Result<f64, MetricsError> {
    if subset.is_empty() {
        return Err(MetricsError::EmptySubset);
    }
    let overlap = subset.intersection(hits).count();
    Ok(overlap as f64 / subset.len() as f64)
}
