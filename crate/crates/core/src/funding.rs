//! Attribution of grant money to level-1 fields.
//!
//! A grant's award is first prorated to the analysis window by day overlap,
//! then split over fields through its linked publications: every publication
//! carries one unit of weight, divided equally among its own level-1 fields.
//! Shares are computed in integer cents with largest-remainder rounding so
//! each grant's shares sum exactly to its prorated amount.

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{FieldId, FunderClass, Grant, GrantId, Money, PaperSet};

#[derive(Debug, Error)]
pub enum FundingError {
    #[error("window start {0} is after end {1}")]
    BadWindow(NaiveDate, NaiveDate),
    #[error("grant {0} has no resolvable publication with level-1 fields")]
    NoFieldedPublications(GrantId),
    #[error("grant {0}: field-count mix too large for exact allocation")]
    Overflow(GrantId),
}

/// Inclusive date interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateWindow {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Result<Self, FundingError> {
        if start > end {
            return Err(FundingError::BadWindow(start, end));
        }
        Ok(DateWindow { start, end })
    }

    pub fn days(&self) -> i64 {
        (self.end - self.start).num_days() + 1
    }
}

/// Integer division a*b/c with round half up, for nonnegative operands.
fn mul_div_round(a: u128, b: u128, c: u128) -> u128 {
    (2 * a * b + c) / (2 * c)
}

/// The part of the award falling inside the window, by day overlap of the
/// grant's active interval. Single-day grants inside the window keep the
/// full amount.
pub fn prorate_amount(grant: &Grant, window: &DateWindow) -> Money {
    let start = grant.start_date.max(window.start);
    let end = grant.end_date.min(window.end);
    if start > end {
        return Money::ZERO;
    }
    let overlap = (end - start).num_days() + 1;
    let total = (grant.end_date - grant.start_date).num_days() + 1;
    let cents = mul_div_round(grant.total_amount.cents() as u128, overlap as u128, total as u128);
    Money::from_cents(cents as i64)
}

/// One grant's money split over level-1 fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrantAllocation {
    pub grant_id: GrantId,
    pub funder_class: FunderClass,
    pub in_window_amount: Money,
    pub field_shares: BTreeMap<FieldId, Money>,
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Split an in-window amount over the fields of the grant's resolvable
/// publications. Weights are handled as exact fractions over the least
/// common multiple of the publications' field counts; leftover cents go to
/// the largest remainders, ties to the lexically smaller field id.
pub fn allocate_to_fields(
    grant: &Grant,
    in_window_amount: Money,
    papers: &PaperSet,
) -> Result<GrantAllocation, FundingError> {
    let field_sets: Vec<&BTreeSet<FieldId>> = grant
        .linked_paper_ids
        .iter()
        .filter_map(|id| papers.get(id))
        .map(|p| &p.level1_fields)
        .filter(|fs| !fs.is_empty())
        .collect();
    if field_sets.is_empty() {
        return Err(FundingError::NoFieldedPublications(grant.id.clone()));
    }

    let mut denom: u128 = 1;
    for fs in &field_sets {
        let k = fs.len() as u128;
        let step = k / gcd(denom, k);
        denom = denom
            .checked_mul(step)
            .ok_or_else(|| FundingError::Overflow(grant.id.clone()))?;
    }
    // weight of field f in units of 1/denom publication-equivalents
    let mut weights: BTreeMap<&FieldId, u128> = BTreeMap::new();
    for fs in &field_sets {
        let unit = denom / fs.len() as u128;
        for f in *fs {
            *weights.entry(f).or_insert(0) += unit;
        }
    }
    let total_weight = denom
        .checked_mul(field_sets.len() as u128)
        .ok_or_else(|| FundingError::Overflow(grant.id.clone()))?;
    debug_assert_eq!(weights.values().sum::<u128>(), total_weight);

    let amount = in_window_amount.cents() as u128;
    let mut shares: BTreeMap<FieldId, i64> = BTreeMap::new();
    let mut remainders: Vec<(u128, &FieldId)> = Vec::with_capacity(weights.len());
    let mut assigned: u128 = 0;
    for (field, w) in &weights {
        let exact = amount
            .checked_mul(*w)
            .ok_or_else(|| FundingError::Overflow(grant.id.clone()))?;
        let base = exact / total_weight;
        assigned += base;
        shares.insert((*field).clone(), base as i64);
        remainders.push((exact % total_weight, field));
    }
    let mut leftover = (amount - assigned) as usize;
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    for (_, field) in remainders.into_iter().take(leftover) {
        *shares.get_mut(field).expect("share present") += 1;
        leftover -= 1;
    }
    debug_assert_eq!(leftover, 0);

    Ok(GrantAllocation {
        grant_id: grant.id.clone(),
        funder_class: grant.funder_class,
        in_window_amount,
        field_shares: shares
            .into_iter()
            .map(|(f, cents)| (f, Money::from_cents(cents)))
            .collect(),
    })
}

/// Which funders count toward field totals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunderFilter {
    Government,
    All,
}

impl FunderFilter {
    pub fn admits(self, class: FunderClass) -> bool {
        match self {
            FunderFilter::All => true,
            FunderFilter::Government => class == FunderClass::Government,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldFundingEntry {
    pub total: Money,
    pub papers: u64,
    /// Absent when the field has no papers in the corpus.
    pub per_paper: Option<Money>,
}

/// Per-field funding totals and per-paper averages.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldFunding {
    pub entries: BTreeMap<FieldId, FieldFundingEntry>,
}

pub fn field_funding(
    allocations: &[GrantAllocation],
    papers: &PaperSet,
    filter: FunderFilter,
) -> FieldFunding {
    let mut paper_counts: BTreeMap<FieldId, u64> = BTreeMap::new();
    for paper in papers.iter() {
        for f in &paper.level1_fields {
            *paper_counts.entry(f.clone()).or_insert(0) += 1;
        }
    }
    let mut totals: BTreeMap<FieldId, i64> = BTreeMap::new();
    for alloc in allocations {
        if !filter.admits(alloc.funder_class) {
            continue;
        }
        for (field, share) in &alloc.field_shares {
            *totals.entry(field.clone()).or_insert(0) += share.cents();
        }
    }
    let entries = totals
        .into_iter()
        .map(|(field, cents)| {
            let papers = paper_counts.get(&field).copied().unwrap_or(0);
            let per_paper = (papers > 0).then(|| {
                Money::from_cents(mul_div_round(cents as u128, 1, papers as u128) as i64)
            });
            (
                field,
                FieldFundingEntry {
                    total: Money::from_cents(cents),
                    papers,
                    per_paper,
                },
            )
        })
        .collect();
    FieldFunding { entries }
}
