//! Field-level consumption statistics: relative consumption indices, citation
//! percentiles, hit rates, domain intersections, and subdomain profiles.

pub mod percentile;
pub mod subdomain;
pub mod venn;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Domain, EventSet, FieldId, FieldTaxonomy, Paper, PaperId, PaperSet};

pub use percentile::{citation_percentiles, hit_rate, hit_set, HitRule, PercentileTable};
pub use subdomain::{subdomain_profiles, SubdomainProfile};
pub use venn::{
    combination_label, domain_intersections, exclusive_subsets, inclusive_subsets,
    ternary_coordinates, VennCounts, VENN_COMBINATIONS,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("domain {0} has no consumed papers, RCI undefined")]
    NoConsumption(Domain),
    #[error("hit rate of an empty paper subset is undefined")]
    EmptySubset,
    #[error("ternary coordinates need at least one positive component")]
    AllZero,
    #[error("invalid hit threshold {0}, must lie in (0,1)")]
    BadThreshold(f64),
}

/// Taxonomy level a statistic is computed at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldLevel {
    Zero,
    One,
}

/// A paper's fields at the requested level. Level-0 membership is the union
/// of its level-1 parents.
pub fn fields_at_level(paper: &Paper, taxonomy: &FieldTaxonomy, level: FieldLevel) -> BTreeSet<FieldId> {
    match level {
        FieldLevel::One => paper.level1_fields.clone(),
        FieldLevel::Zero => taxonomy.level0_membership(&paper.level1_fields),
    }
}

/// Per-domain sets of consumed paper ids.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConsumedSets {
    sets: BTreeMap<Domain, BTreeSet<PaperId>>,
}

impl ConsumedSets {
    pub fn get(&self, domain: Domain) -> &BTreeSet<PaperId> {
        static EMPTY: BTreeSet<PaperId> = BTreeSet::new();
        self.sets.get(&domain).unwrap_or(&EMPTY)
    }

    /// Papers consumed by at least one domain.
    pub fn union(&self) -> BTreeSet<PaperId> {
        let mut out = BTreeSet::new();
        for set in self.sets.values() {
            out.extend(set.iter().cloned());
        }
        out
    }
}

/// A paper belongs to a domain's set iff at least one event links it there.
pub fn consumed_sets(events: &EventSet) -> ConsumedSets {
    let mut sets: BTreeMap<Domain, BTreeSet<PaperId>> = BTreeMap::new();
    for ev in &events.events {
        sets.entry(ev.domain).or_default().insert(ev.paper_id.clone());
    }
    ConsumedSets { sets }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RciEntry {
    pub papers: u64,
    pub consumed: u64,
    pub rci: f64,
}

/// RCI values for one domain at one taxonomy level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RciSlice {
    pub domain: Domain,
    pub level: FieldLevel,
    pub entries: BTreeMap<FieldId, RciEntry>,
    /// Consumed papers counting toward the baseline.
    pub domain_total: u64,
    /// Corpus papers counting toward the baseline.
    pub corpus_total: u64,
}

impl RciSlice {
    pub fn rci(&self, field: &FieldId) -> Option<f64> {
        self.entries.get(field).map(|e| e.rci)
    }
}

/// Relative consumption per field: the share of a field's papers consumed by
/// the domain, normalized by the domain's share of the whole corpus.
///
/// Multi-field papers count once in every field they belong to and once in
/// the totals. Fieldless papers never enter per-field statistics; they join
/// the totals only when `include_fieldless_in_totals` is set.
pub fn compute_rci(
    papers: &PaperSet,
    taxonomy: &FieldTaxonomy,
    consumed: &BTreeSet<PaperId>,
    domain: Domain,
    level: FieldLevel,
    include_fieldless_in_totals: bool,
) -> Result<RciSlice, MetricsError> {
    let mut paper_counts: BTreeMap<FieldId, u64> = BTreeMap::new();
    let mut consumed_counts: BTreeMap<FieldId, u64> = BTreeMap::new();
    let mut corpus_total = 0u64;
    let mut domain_total = 0u64;
    for paper in papers.iter() {
        let fields = fields_at_level(paper, taxonomy, level);
        let is_consumed = consumed.contains(&paper.id);
        if fields.is_empty() && !include_fieldless_in_totals {
            continue;
        }
        corpus_total += 1;
        if is_consumed {
            domain_total += 1;
        }
        for f in fields {
            *paper_counts.entry(f.clone()).or_insert(0) += 1;
            if is_consumed {
                *consumed_counts.entry(f).or_insert(0) += 1;
            }
        }
    }
    if domain_total == 0 {
        return Err(MetricsError::NoConsumption(domain));
    }
    let baseline = domain_total as f64 / corpus_total as f64;
    let entries = paper_counts
        .into_iter()
        .map(|(field, papers_f)| {
            let consumed_f = consumed_counts.get(&field).copied().unwrap_or(0);
            let rci = (consumed_f as f64 / papers_f as f64) / baseline;
            (
                field,
                RciEntry {
                    papers: papers_f,
                    consumed: consumed_f,
                    rci,
                },
            )
        })
        .collect();
    Ok(RciSlice {
        domain,
        level,
        entries,
        domain_total,
        corpus_total,
    })
}

/// RCI slices for all three domains at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RciTable {
    pub level: FieldLevel,
    pub slices: BTreeMap<Domain, RciSlice>,
}

impl RciTable {
    pub fn compute(
        papers: &PaperSet,
        taxonomy: &FieldTaxonomy,
        consumed: &ConsumedSets,
        level: FieldLevel,
        include_fieldless_in_totals: bool,
    ) -> Result<Self, MetricsError> {
        let mut slices = BTreeMap::new();
        for domain in Domain::ALL {
            let slice = compute_rci(
                papers,
                taxonomy,
                consumed.get(domain),
                domain,
                level,
                include_fieldless_in_totals,
            )?;
            slices.insert(domain, slice);
        }
        Ok(RciTable { level, slices })
    }

    pub fn slice(&self, domain: Domain) -> &RciSlice {
        &self.slices[&domain]
    }
}

/// Sort key for field ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankKey {
    /// By count of consumed papers.
    Consumed,
    /// By relative consumption index.
    Rci,
}

/// Fields in descending key order, ties broken by ascending field id.
pub fn rank_fields(slice: &RciSlice, key: RankKey) -> Vec<(FieldId, f64)> {
    let mut out: Vec<(FieldId, f64)> = slice
        .entries
        .iter()
        .map(|(field, entry)| {
            let value = match key {
                RankKey::Consumed => entry.consumed as f64,
                RankKey::Rci => entry.rci,
            };
            (field.clone(), value)
        })
        .collect();
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    out
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::corpus::DocCategory;

    pub fn taxonomy(level0: &[&str], parents: &[(&str, &[&str])]) -> FieldTaxonomy {
        FieldTaxonomy::new(
            level0.iter().map(|s| FieldId::from(*s)).collect(),
            parents
                .iter()
                .map(|(child, ps)| {
                    (
                        FieldId::from(*child),
                        ps.iter().map(|p| FieldId::from(*p)).collect(),
                    )
                })
                .collect(),
        )
        .unwrap()
    }

    pub fn paper(id: &str, year: i32, citations: u64, fields: &[&str]) -> Paper {
        Paper {
            id: PaperId::from(id),
            title: format!("title {id}"),
            authors: vec![],
            venue: String::new(),
            year,
            doi: None,
            language: None,
            country_tags: BTreeSet::new(),
            doc_category: DocCategory::Journal,
            level1_fields: fields.iter().map(|f| FieldId::from(*f)).collect(),
            citations,
        }
    }

    pub fn event(domain: Domain, doc: &str, paper: &str) -> crate::corpus::ConsumptionEvent {
        crate::corpus::ConsumptionEvent {
            domain,
            consumer_doc_id: doc.into(),
            subdomain: None,
            paper_id: PaperId::from(paper),
        }
    }
}
