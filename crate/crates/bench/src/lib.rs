//! Input builders shared by the benchmark targets. Everything is generated
//! from fixed seeds so timings compare across runs.

use pubsci_core::corpus::{EventSet, FieldTaxonomy, PaperSet, ReferenceRecord};
use pubsci_core::fixture::{generate_fixture, FixtureSpec};

/// A corpus plus noisy reference strings pointing into it, sized for
/// retrieval benchmarks.
pub fn matching_corpus(papers: usize, references: usize) -> (PaperSet, Vec<ReferenceRecord>) {
    let fixture = generate_fixture(&FixtureSpec {
        seed: 7,
        papers,
        true_references: references,
        distractor_references: references / 10,
        consumption_rate: 0.0,
        grants: 0,
        ..FixtureSpec::default()
    })
    .expect("benchmark fixture generates");
    let set = PaperSet::from_records(fixture.papers, None).expect("benchmark corpus loads");
    (set, fixture.references)
}

/// A fielded corpus with consumption events, sized for metric benchmarks.
pub fn analytics_corpus(papers: usize) -> (PaperSet, FieldTaxonomy, EventSet) {
    let fixture = generate_fixture(&FixtureSpec {
        seed: 7,
        papers,
        true_references: 0,
        distractor_references: 0,
        grants: 0,
        ..FixtureSpec::default()
    })
    .expect("benchmark fixture generates");
    let taxonomy = fixture.field_taxonomy();
    let set = PaperSet::from_records(fixture.papers, Some(&taxonomy))
        .expect("benchmark corpus loads");
    let events = EventSet::from_records(fixture.events, &set);
    (set, taxonomy, events)
}
