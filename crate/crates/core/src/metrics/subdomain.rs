//! Consumption profiles of subdomains (agencies, outlets, patent classes).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Domain, EventSet, FieldTaxonomy, PaperId, PaperSet};

use super::{compute_rci, hit_rate, FieldLevel, MetricsError, RciSlice};

/// One subdomain's consumption pattern: an RCI vector normalized within its
/// own consumption, and the hit rate of the papers it consumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubdomainProfile {
    pub domain: Domain,
    pub subdomain: String,
    pub consumed_papers: u64,
    pub rci: RciSlice,
    pub hit_rate: f64,
}

/// Profile every (domain, subdomain) pair with at least one event. Events
/// without a subdomain key are skipped.
pub fn subdomain_profiles(
    events: &EventSet,
    papers: &PaperSet,
    taxonomy: &FieldTaxonomy,
    level: FieldLevel,
    include_fieldless_in_totals: bool,
    hits: &BTreeSet<PaperId>,
) -> Result<Vec<SubdomainProfile>, MetricsError> {
    let mut consumed: BTreeMap<(Domain, String), BTreeSet<PaperId>> = BTreeMap::new();
    for ev in &events.events {
        let Some(sub) = &ev.subdomain else {
            continue;
        };
        consumed
            .entry((ev.domain, sub.clone()))
            .or_default()
            .insert(ev.paper_id.clone());
    }
    let mut out = Vec::with_capacity(consumed.len());
    for ((domain, subdomain), set) in consumed {
        let rci = compute_rci(papers, taxonomy, &set, domain, level, include_fieldless_in_totals)?;
        let hit_rate = hit_rate(&set, hits)?;
        out.push(SubdomainProfile {
            domain,
            subdomain,
            consumed_papers: set.len() as u64,
            rci,
            hit_rate,
        });
    }
    Ok(out)
}
