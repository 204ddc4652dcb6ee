//! Domain-intersection counts and simplex coordinates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Domain, PaperId, PaperSet};

use super::{ConsumedSets, MetricsError};

/// The seven nonempty domain combinations, in fixed output order.
pub const VENN_COMBINATIONS: [&[Domain]; 7] = [
    &[Domain::Government],
    &[Domain::News],
    &[Domain::Patent],
    &[Domain::Government, Domain::News],
    &[Domain::Government, Domain::Patent],
    &[Domain::News, Domain::Patent],
    &[Domain::Government, Domain::News, Domain::Patent],
];

pub fn combination_label(domains: &[Domain]) -> String {
    domains
        .iter()
        .map(|d| d.as_str())
        .collect::<Vec<_>>()
        .join("+")
}

/// Exclusive region counts partitioning the consumed papers, plus the
/// unconsumed remainder and the square-root areas used for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VennCounts {
    /// One count per entry of [`VENN_COMBINATIONS`]; a paper counts toward
    /// exactly the combination matching its full domain profile.
    pub regions: [u64; 7],
    pub unconsumed: u64,
}

impl VennCounts {
    pub fn sqrt_areas(&self) -> [f64; 7] {
        self.regions.map(|c| (c as f64).sqrt())
    }

    pub fn consumed_total(&self) -> u64 {
        self.regions.iter().sum()
    }
}

fn profile_of(id: &PaperId, sets: &ConsumedSets) -> Vec<Domain> {
    Domain::ALL
        .into_iter()
        .filter(|d| sets.get(*d).contains(id))
        .collect()
}

/// Count papers by their exact domain profile.
pub fn domain_intersections(sets: &ConsumedSets, papers: &PaperSet) -> VennCounts {
    let mut regions = [0u64; 7];
    let union = sets.union();
    for id in &union {
        let profile = profile_of(id, sets);
        let slot = VENN_COMBINATIONS
            .iter()
            .position(|c| *c == profile.as_slice())
            .expect("every nonempty profile maps to a combination");
        regions[slot] += 1;
    }
    VennCounts {
        regions,
        unconsumed: papers.len() as u64 - union.len() as u64,
    }
}

/// Papers whose domain profile is exactly each combination.
pub fn exclusive_subsets(sets: &ConsumedSets) -> BTreeMap<String, BTreeSet<PaperId>> {
    let mut out: BTreeMap<String, BTreeSet<PaperId>> = VENN_COMBINATIONS
        .iter()
        .map(|c| (combination_label(c), BTreeSet::new()))
        .collect();
    for id in sets.union() {
        let profile = profile_of(&id, sets);
        out.get_mut(&combination_label(&profile))
            .expect("combination present")
            .insert(id);
    }
    out
}

/// Papers consumed by at least every domain of each combination.
pub fn inclusive_subsets(sets: &ConsumedSets) -> BTreeMap<String, BTreeSet<PaperId>> {
    VENN_COMBINATIONS
        .iter()
        .map(|combo| {
            let members = sets
                .union()
                .into_iter()
                .filter(|id| combo.iter().all(|d| sets.get(*d).contains(id)))
                .collect();
            (combination_label(combo), members)
        })
        .collect()
}

/// Project three nonnegative RCI values onto the 2-simplex.
pub fn ternary_coordinates(
    rci_gov: f64,
    rci_news: f64,
    rci_patent: f64,
) -> Result<(f64, f64, f64), MetricsError> {
    let sum = rci_gov + rci_news + rci_patent;
    if !(sum > 0.0) || rci_gov < 0.0 || rci_news < 0.0 || rci_patent < 0.0 {
        return Err(MetricsError::AllZero);
    }
    Ok((rci_gov / sum, rci_news / sum, rci_patent / sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EventSet;
    use crate::metrics::consumed_sets;
    use crate::metrics::testutil::{event, paper};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn papers(n: usize) -> PaperSet {
        PaperSet::from_records(
            (0..n).map(|i| paper(&format!("p{i}"), 2010, 0, &["x"])).collect(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn three_singletons() {
        let set = papers(4);
        let events = EventSet::from_records(
            vec![
                event(Domain::Government, "g", "p0"),
                event(Domain::News, "n", "p1"),
                event(Domain::Patent, "t", "p2"),
            ],
            &set,
        );
        let counts = domain_intersections(&consumed_sets(&events), &set);
        assert_eq!(counts.regions, [1, 1, 1, 0, 0, 0, 0]);
        assert_eq!(counts.unconsumed, 1);
    }

    #[test]
    fn triple_intersection() {
        let set = papers(1);
        let events = EventSet::from_records(
            vec![
                event(Domain::Government, "g", "p0"),
                event(Domain::News, "n", "p0"),
                event(Domain::Patent, "t", "p0"),
            ],
            &set,
        );
        let counts = domain_intersections(&consumed_sets(&events), &set);
        assert_eq!(counts.regions, [0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(counts.unconsumed, 0);
    }

    #[test]
    fn random_fixture_matches_set_algebra() {
        let n = 200;
        let set = papers(n);
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        let mut records = Vec::new();
        for i in 0..n {
            for d in Domain::ALL {
                if rng.random::<f64>() < 0.3 {
                    records.push(event(d, &format!("{d}doc{i}"), &format!("p{i}")));
                }
            }
        }
        let events = EventSet::from_records(records, &set);
        let sets = consumed_sets(&events);
        let counts = domain_intersections(&sets, &set);

        // oracle: raw set algebra over the three membership sets
        let g = sets.get(Domain::Government);
        let nw = sets.get(Domain::News);
        let p = sets.get(Domain::Patent);
        let only = |a: &BTreeSet<PaperId>, b: &BTreeSet<PaperId>, c: &BTreeSet<PaperId>| {
            a.iter().filter(|x| !b.contains(*x) && !c.contains(*x)).count() as u64
        };
        let pair = |a: &BTreeSet<PaperId>, b: &BTreeSet<PaperId>, c: &BTreeSet<PaperId>| {
            a.iter().filter(|x| b.contains(*x) && !c.contains(*x)).count() as u64
        };
        let triple = g.iter().filter(|x| nw.contains(*x) && p.contains(*x)).count() as u64;
        assert_eq!(
            counts.regions,
            [
                only(g, nw, p),
                only(nw, g, p),
                only(p, g, nw),
                pair(g, nw, p),
                pair(g, p, nw),
                pair(nw, p, g),
                triple,
            ]
        );
        assert_eq!(counts.consumed_total(), sets.union().len() as u64);
    }

    #[test]
    fn exclusive_and_inclusive_subsets_relate_correctly() {
        let set = papers(3);
        let events = EventSet::from_records(
            vec![
                event(Domain::Government, "g1", "p0"),
                event(Domain::Government, "g2", "p1"),
                event(Domain::News, "n1", "p1"),
                event(Domain::News, "n2", "p2"),
            ],
            &set,
        );
        let sets = consumed_sets(&events);
        let excl = exclusive_subsets(&sets);
        let incl = inclusive_subsets(&sets);
        assert_eq!(excl["government"], [PaperId::from("p0")].into());
        assert_eq!(excl["government+news"], [PaperId::from("p1")].into());
        // inclusive government covers p0 and p1
        assert_eq!(incl["government"], [PaperId::from("p0"), PaperId::from("p1")].into());
        assert_eq!(incl["government+news"], [PaperId::from("p1")].into());
        assert!(incl["government+news+patent"].is_empty());
        // exclusive regions partition the union
        let total: usize = excl.values().map(|s| s.len()).sum();
        assert_eq!(total, sets.union().len());
    }

    #[test]
    fn sqrt_areas_match_counts() {
        let counts = VennCounts {
            regions: [9, 4, 1, 0, 16, 25, 36],
            unconsumed: 5,
        };
        assert_eq!(counts.sqrt_areas(), [3.0, 2.0, 1.0, 0.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn ternary_symmetry_vertex_and_hand_case() {
        assert_eq!(ternary_coordinates(1.0, 1.0, 1.0).unwrap(), (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0));
        assert_eq!(ternary_coordinates(2.0, 0.0, 0.0).unwrap(), (1.0, 0.0, 0.0));
        let (a, b, c) = ternary_coordinates(0.5, 1.0, 1.5).unwrap();
        assert!((a - 1.0 / 6.0).abs() < 1e-15);
        assert!((b - 1.0 / 3.0).abs() < 1e-15);
        assert!((c - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ternary_requires_a_positive_component() {
        assert!(matches!(ternary_coordinates(0.0, 0.0, 0.0), Err(MetricsError::AllZero)));
        assert!(ternary_coordinates(-1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn ternary_sums_to_one_and_keeps_argmax() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..200 {
            let v = [rng.random::<f64>() * 3.0, rng.random::<f64>() * 3.0, rng.random::<f64>() * 3.0];
            let (a, b, c) = ternary_coordinates(v[0], v[1], v[2]).unwrap();
            assert!((a + b + c - 1.0).abs() < 1e-12);
            let argmax_in = (0..3).max_by(|i, j| v[*i].total_cmp(&v[*j])).unwrap();
            let out = [a, b, c];
            let argmax_out = (0..3).max_by(|i, j| out[*i].total_cmp(&out[*j])).unwrap();
            assert_eq!(argmax_in, argmax_out);
        }
    }
}
