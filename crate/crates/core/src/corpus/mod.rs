//! Corpus loading, validation, and filtering.
//!
//! Everything downstream (matching, metrics, funding, regression) consumes the
//! validated, immutable collections built here. Input files are newline-delimited
//! JSON records, one object per line; see [`io`] for the loaders.

pub mod io;

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at {path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate paper id: {0}")]
    DuplicatePaper(PaperId),
    #[error("duplicate field id in taxonomy: {0}")]
    DuplicateField(FieldId),
    #[error("orphan field: level-1 field {0} has no level-0 parent")]
    OrphanField(FieldId),
    #[error("field {field} references unknown level-0 parent {parent}")]
    UnknownParent { field: FieldId, parent: FieldId },
    #[error("paper {paper} references unknown level-1 field {field}")]
    UnknownField { paper: PaperId, field: FieldId },
    #[error("grant {0}: start date after end date")]
    GrantDateOrder(GrantId),
    #[error("grant {0}: negative funding amount")]
    NegativeAmount(GrantId),
    #[error("reference record at {path}:{line} has an empty reference string")]
    EmptyReference { path: String, line: usize },
    #[error("invalid filter: year window start {0} exceeds end {1}")]
    InvalidYearWindow(i32, i32),
}

macro_rules! id_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub String);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl $name {
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }
    };
}

id_newtype!(
    /// Opaque paper identifier, unique within a corpus.
    PaperId
);
id_newtype!(
    /// Field identifier in the two-level taxonomy.
    FieldId
);
id_newtype!(
    /// Opaque grant identifier.
    GrantId
);

/// One of the three public consumption channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Government,
    News,
    Patent,
}

impl Domain {
    pub const ALL: [Domain; 3] = [Domain::Government, Domain::News, Domain::Patent];

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Government => "government",
            Domain::News => "news",
            Domain::Patent => "patent",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Domain {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "government" => Ok(Domain::Government),
            "news" => Ok(Domain::News),
            "patent" => Ok(Domain::Patent),
            other => Err(format!("unknown domain tag: {other}")),
        }
    }
}

/// Document category of a corpus paper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocCategory {
    Journal,
    Conference,
    Book,
    Chapter,
    DoiOnly,
    Uncategorized,
}

impl DocCategory {
    pub const ALL: [DocCategory; 6] = [
        DocCategory::Journal,
        DocCategory::Conference,
        DocCategory::Book,
        DocCategory::Chapter,
        DocCategory::DoiOnly,
        DocCategory::Uncategorized,
    ];
}

/// A currency amount held in whole cents.
///
/// All funding arithmetic is done on integer cents so that allocation can
/// conserve totals exactly. On the wire the amount is a JSON number in
/// dollars, rounded to the nearest cent on read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn from_cents(cents: i64) -> Self {
        Money(cents)
    }

    pub fn from_dollars(dollars: f64) -> Self {
        Money((dollars * 100.0).round() as i64)
    }

    pub fn cents(self) -> i64 {
        self.0
    }

    pub fn dollars(self) -> f64 {
        self.0 as f64 / 100.0
    }

    pub fn is_negative(self) -> bool {
        self.0 < 0
    }
}

impl std::ops::Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl std::iter::Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.2}", self.dollars())
    }
}

impl Serialize for Money {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.dollars())
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let dollars = f64::deserialize(deserializer)?;
        Ok(Money::from_dollars(dollars))
    }
}

/// One scholarly work.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Paper {
    pub id: PaperId,
    pub title: String,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default)]
    pub venue: String,
    pub year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
    #[serde(default)]
    pub country_tags: BTreeSet<String>,
    pub doc_category: DocCategory,
    #[serde(default)]
    pub level1_fields: BTreeSet<FieldId>,
    pub citations: u64,
}

/// Two-level field hierarchy. Level-1 fields may have multiple level-0 parents.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FieldTaxonomy {
    pub level0: BTreeSet<FieldId>,
    pub level1: BTreeSet<FieldId>,
    pub parents: BTreeMap<FieldId, BTreeSet<FieldId>>,
}

impl FieldTaxonomy {
    /// Build from explicit parts, enforcing the parent invariants.
    pub fn new(
        level0: BTreeSet<FieldId>,
        parents: BTreeMap<FieldId, BTreeSet<FieldId>>,
    ) -> Result<Self, CorpusError> {
        let level1: BTreeSet<FieldId> = parents.keys().cloned().collect();
        let tax = FieldTaxonomy {
            level0,
            level1,
            parents,
        };
        tax.validate()?;
        Ok(tax)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        for l1 in &self.level1 {
            let parents = self
                .parents
                .get(l1)
                .ok_or_else(|| CorpusError::OrphanField(l1.clone()))?;
            if parents.is_empty() {
                return Err(CorpusError::OrphanField(l1.clone()));
            }
            for p in parents {
                if !self.level0.contains(p) {
                    return Err(CorpusError::UnknownParent {
                        field: l1.clone(),
                        parent: p.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Level-0 fields a paper belongs to: the union of parents of its level-1 fields.
    pub fn level0_membership<'a, I>(&self, level1_fields: I) -> BTreeSet<FieldId>
    where
        I: IntoIterator<Item = &'a FieldId>,
    {
        let mut out = BTreeSet::new();
        for f in level1_fields {
            if let Some(parents) = self.parents.get(f) {
                out.extend(parents.iter().cloned());
            }
        }
        out
    }
}

/// One citation of a corpus paper by a document in a public domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsumptionEvent {
    pub domain: Domain,
    pub consumer_doc_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subdomain: Option<String>,
    pub paper_id: PaperId,
}

/// Funder category used when aggregating grant money.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FunderClass {
    Government,
    Other,
}

/// A funded project with its active interval and linked publications.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grant {
    pub id: GrantId,
    pub funder_id: String,
    pub funder_class: FunderClass,
    pub total_amount: Money,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
    #[serde(default)]
    pub linked_paper_ids: BTreeSet<PaperId>,
}

/// A raw reference-like string extracted from a consumer document.
///
/// `gold_paper_id` carries the evaluation label: in labeled files its absence
/// means "no true match in the corpus", not "unlabeled".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceRecord {
    pub source_doc_id: String,
    pub domain: Domain,
    pub raw_string: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_paper_id: Option<PaperId>,
}

/// Predicates selecting the analysis corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFilter {
    /// Inclusive `[start, end]` publication-year window.
    pub year_window: (i32, i32),
    pub allowed_doc_categories: BTreeSet<DocCategory>,
    /// Admit uncategorized papers when they carry a DOI.
    pub require_doi_if_uncategorized: bool,
    /// Keep only papers whose language tag is `en`.
    pub english_only: bool,
    /// Keep only papers carrying the country tag `us`.
    pub us_affiliation_only: bool,
}

impl Default for CorpusFilter {
    /// The identity filter: admits every paper.
    fn default() -> Self {
        CorpusFilter {
            year_window: (i32::MIN, i32::MAX),
            allowed_doc_categories: DocCategory::ALL.iter().copied().collect(),
            require_doi_if_uncategorized: false,
            english_only: false,
            us_affiliation_only: false,
        }
    }
}

impl CorpusFilter {
    /// The standard analysis filter: 2005-2014, categorized publications plus
    /// uncategorized papers with a DOI.
    pub fn standard() -> Self {
        CorpusFilter {
            year_window: (2005, 2014),
            allowed_doc_categories: [
                DocCategory::Journal,
                DocCategory::Conference,
                DocCategory::Book,
                DocCategory::Chapter,
                DocCategory::DoiOnly,
            ]
            .into_iter()
            .collect(),
            require_doi_if_uncategorized: true,
            english_only: false,
            us_affiliation_only: false,
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.year_window.0 > self.year_window.1 {
            return Err(CorpusError::InvalidYearWindow(
                self.year_window.0,
                self.year_window.1,
            ));
        }
        Ok(())
    }

    pub fn matches(&self, paper: &Paper) -> bool {
        if paper.year < self.year_window.0 || paper.year > self.year_window.1 {
            return false;
        }
        let category_ok = self.allowed_doc_categories.contains(&paper.doc_category)
            || (paper.doc_category == DocCategory::Uncategorized
                && self.require_doi_if_uncategorized
                && paper.doi.is_some());
        if !category_ok {
            return false;
        }
        if self.english_only && paper.language.as_deref() != Some("en") {
            return false;
        }
        if self.us_affiliation_only && !paper.country_tags.contains("us") {
            return false;
        }
        true
    }
}

/// An immutable, id-indexed paper collection.
#[derive(Debug, Clone, Default)]
pub struct PaperSet {
    papers: Vec<Paper>,
    index: HashMap<PaperId, usize>,
}

impl PaperSet {
    /// Build from records, rejecting duplicate ids and (when a taxonomy is
    /// given) unknown level-1 field references.
    pub fn from_records(
        papers: Vec<Paper>,
        taxonomy: Option<&FieldTaxonomy>,
    ) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(papers.len());
        for (i, p) in papers.iter().enumerate() {
            if index.insert(p.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicatePaper(p.id.clone()));
            }
            if let Some(tax) = taxonomy {
                for f in &p.level1_fields {
                    if !tax.level1.contains(f) {
                        return Err(CorpusError::UnknownField {
                            paper: p.id.clone(),
                            field: f.clone(),
                        });
                    }
                }
            }
        }
        Ok(PaperSet { papers, index })
    }

    pub fn len(&self) -> usize {
        self.papers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    pub fn get(&self, id: &PaperId) -> Option<&Paper> {
        self.index.get(id).map(|&i| &self.papers[i])
    }

    pub fn contains(&self, id: &PaperId) -> bool {
        self.index.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Paper> {
        self.papers.iter()
    }

    pub fn ids(&self) -> impl Iterator<Item = &PaperId> {
        self.papers.iter().map(|p| &p.id)
    }

    /// Papers per publication year.
    pub fn year_histogram(&self) -> BTreeMap<i32, u64> {
        let mut hist = BTreeMap::new();
        for p in &self.papers {
            *hist.entry(p.year).or_insert(0) += 1;
        }
        hist
    }

    /// Order-stable subset satisfying every active predicate. The receiver is
    /// left untouched.
    pub fn filter(&self, filter: &CorpusFilter) -> PaperSet {
        let papers: Vec<Paper> = self
            .papers
            .iter()
            .filter(|p| filter.matches(p))
            .cloned()
            .collect();
        // ids were unique in the parent set, so rebuilding cannot fail
        PaperSet::from_records(papers, None).expect("filtered subset keeps unique ids")
    }
}

/// Deduplicated consumption events whose papers all resolve in the corpus.
#[derive(Debug, Clone, Default)]
pub struct EventSet {
    pub events: Vec<ConsumptionEvent>,
    /// Events dropped because their paper is not in the (filtered) corpus.
    pub dropped_unresolved: u64,
    /// Events collapsed as duplicate (domain, consumer, paper) triples.
    pub dropped_duplicate: u64,
}

impl EventSet {
    /// Validate raw events against a corpus: drop events citing absent papers
    /// (counted) and collapse duplicate triples, keeping first occurrences in
    /// input order.
    pub fn from_records(records: Vec<ConsumptionEvent>, papers: &PaperSet) -> EventSet {
        let mut seen: HashSet<(Domain, String, PaperId)> = HashSet::with_capacity(records.len());
        let mut events = Vec::with_capacity(records.len());
        let mut dropped_unresolved = 0;
        let mut dropped_duplicate = 0;
        for ev in records {
            if !papers.contains(&ev.paper_id) {
                dropped_unresolved += 1;
                continue;
            }
            let key = (ev.domain, ev.consumer_doc_id.clone(), ev.paper_id.clone());
            if seen.insert(key) {
                events.push(ev);
            } else {
                dropped_duplicate += 1;
            }
        }
        EventSet {
            events,
            dropped_unresolved,
            dropped_duplicate,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Validated grants with link-resolution bookkeeping.
#[derive(Debug, Clone, Default)]
pub struct GrantSet {
    pub grants: Vec<Grant>,
    /// Linked paper ids that did not resolve in the corpus, summed over grants.
    pub unresolved_links: u64,
    /// Grants dropped for having no resolvable linked paper.
    pub dropped_unlinked: u64,
}

impl GrantSet {
    /// Validate raw grants. When `require_link` is set, grants with no linked
    /// paper resolving in the corpus are dropped (counted).
    pub fn from_records(
        records: Vec<Grant>,
        papers: &PaperSet,
        require_link: bool,
    ) -> Result<GrantSet, CorpusError> {
        let mut grants = Vec::with_capacity(records.len());
        let mut unresolved_links = 0;
        let mut dropped_unlinked = 0;
        for g in records {
            if g.total_amount.is_negative() {
                return Err(CorpusError::NegativeAmount(g.id.clone()));
            }
            if g.start_date > g.end_date {
                return Err(CorpusError::GrantDateOrder(g.id.clone()));
            }
            let resolved = g
                .linked_paper_ids
                .iter()
                .filter(|id| papers.contains(id))
                .count();
            unresolved_links += (g.linked_paper_ids.len() - resolved) as u64;
            if require_link && resolved == 0 {
                dropped_unlinked += 1;
                continue;
            }
            grants.push(g);
        }
        Ok(GrantSet {
            grants,
            unresolved_links,
            dropped_unlinked,
        })
    }

    pub fn len(&self) -> usize {
        self.grants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grants.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(s: &str) -> FieldId {
        FieldId::from(s)
    }

    pub(crate) fn paper(id: &str, year: i32, fields: &[&str]) -> Paper {
        Paper {
            id: PaperId::from(id),
            title: format!("title of {id}"),
            authors: vec!["A Author".into()],
            venue: "venue".into(),
            year,
            doi: None,
            language: Some("en".into()),
            country_tags: BTreeSet::new(),
            doc_category: DocCategory::Journal,
            level1_fields: fields.iter().map(|f| FieldId::from(*f)).collect(),
            citations: 0,
        }
    }

    fn two_level_taxonomy() -> FieldTaxonomy {
        // level-0 {A, B}; x -> {A}, y -> {A, B}
        FieldTaxonomy::new(
            [field("A"), field("B")].into_iter().collect(),
            [
                (field("x"), [field("A")].into_iter().collect()),
                (field("y"), [field("A"), field("B")].into_iter().collect()),
            ]
            .into_iter()
            .collect(),
        )
        .unwrap()
    }

    #[test]
    fn taxonomy_multi_parent_minimal_case() {
        let tax = two_level_taxonomy();
        assert_eq!(tax.level0.len(), 2);
        assert_eq!(tax.level1.len(), 2);
        assert_eq!(tax.parents[&field("y")].len(), 2);
    }

    #[test]
    fn taxonomy_rejects_orphan_field() {
        let err = FieldTaxonomy::new(
            [field("A")].into_iter().collect(),
            [(field("x"), BTreeSet::new())].into_iter().collect(),
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::OrphanField(f) if f == field("x")));
    }

    #[test]
    fn taxonomy_rejects_unknown_parent() {
        let err = FieldTaxonomy::new(
            [field("A")].into_iter().collect(),
            [(field("x"), [field("Z")].into_iter().collect())]
                .into_iter()
                .collect(),
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::UnknownParent { .. }));
    }

    #[test]
    fn level0_membership_unions_parents() {
        let tax = two_level_taxonomy();
        let m = tax.level0_membership(&[field("x"), field("y")].into_iter().collect::<Vec<_>>());
        assert_eq!(m, [field("A"), field("B")].into_iter().collect());
    }

    #[test]
    fn paper_set_rejects_duplicate_id() {
        let err = PaperSet::from_records(
            vec![paper("p1", 2010, &[]), paper("p1", 2011, &[])],
            None,
        )
        .unwrap_err();
        match err {
            CorpusError::DuplicatePaper(id) => assert_eq!(id.as_str(), "p1"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn paper_set_rejects_unknown_field() {
        let tax = two_level_taxonomy();
        let err =
            PaperSet::from_records(vec![paper("p1", 2010, &["nope"])], Some(&tax)).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownField { .. }));
    }

    #[test]
    fn filter_year_window_excludes_2004() {
        let filter = CorpusFilter::standard();
        assert!(!filter.matches(&paper("p", 2004, &[])));
        assert!(filter.matches(&paper("p", 2005, &[])));
        assert!(filter.matches(&paper("p", 2014, &[])));
        assert!(!filter.matches(&paper("p", 2015, &[])));
    }

    #[test]
    fn filter_admits_uncategorized_with_doi() {
        let filter = CorpusFilter::standard();
        let mut p = paper("p", 2010, &[]);
        p.doc_category = DocCategory::Uncategorized;
        assert!(!filter.matches(&p));
        p.doi = Some("10.1/x".into());
        assert!(filter.matches(&p));
    }

    #[test]
    fn filter_english_only_excludes_other_languages() {
        let mut filter = CorpusFilter::default();
        filter.english_only = true;
        let mut p = paper("p", 2010, &[]);
        p.language = Some("fr".into());
        assert!(!filter.matches(&p));
        p.language = Some("en".into());
        assert!(filter.matches(&p));
        p.language = None;
        assert!(!filter.matches(&p));
    }

    #[test]
    fn filter_us_affiliation_matches_tag() {
        let mut filter = CorpusFilter::default();
        filter.us_affiliation_only = true;
        let mut p = paper("p", 2010, &[]);
        assert!(!filter.matches(&p));
        p.country_tags.insert("us".into());
        assert!(filter.matches(&p));
    }

    #[test]
    fn default_filter_is_identity() {
        let set = PaperSet::from_records(
            vec![paper("p1", 1990, &[]), paper("p2", 2030, &[])],
            None,
        )
        .unwrap();
        let out = set.filter(&CorpusFilter::default());
        assert_eq!(out.len(), set.len());
    }

    #[test]
    fn filtering_is_idempotent_and_order_stable() {
        let set = PaperSet::from_records(
            vec![
                paper("p3", 2007, &[]),
                paper("p1", 2001, &[]),
                paper("p2", 2010, &[]),
            ],
            None,
        )
        .unwrap();
        let f = CorpusFilter::standard();
        let once = set.filter(&f);
        let twice = once.filter(&f);
        let ids_once: Vec<_> = once.ids().cloned().collect();
        let ids_twice: Vec<_> = twice.ids().cloned().collect();
        assert_eq!(ids_once, ids_twice);
        assert_eq!(
            ids_once,
            vec![PaperId::from("p3"), PaperId::from("p2")],
            "input order must be preserved"
        );
    }

    #[test]
    fn events_drop_unresolved_and_duplicates() {
        let set = PaperSet::from_records(vec![paper("p1", 2010, &[])], None).unwrap();
        let ev = |doc: &str, paper: &str| ConsumptionEvent {
            domain: Domain::News,
            consumer_doc_id: doc.into(),
            subdomain: None,
            paper_id: PaperId::from(paper),
        };
        let events = EventSet::from_records(
            vec![ev("d1", "p1"), ev("d1", "p1"), ev("d2", "gone")],
            &set,
        );
        assert_eq!(events.len(), 1);
        assert_eq!(events.dropped_duplicate, 1);
        assert_eq!(events.dropped_unresolved, 1);
    }

    #[test]
    fn grants_require_resolvable_link() {
        let set = PaperSet::from_records(vec![paper("p1", 2010, &[])], None).unwrap();
        let grant = |id: &str, links: &[&str]| Grant {
            id: GrantId::from(id),
            funder_id: "nsf".into(),
            funder_class: FunderClass::Government,
            total_amount: Money::from_dollars(100.0),
            start_date: NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(),
            end_date: NaiveDate::from_ymd_opt(2010, 12, 31).unwrap(),
            linked_paper_ids: links.iter().map(|s| PaperId::from(*s)).collect(),
        };
        let out = GrantSet::from_records(
            vec![grant("g1", &["p1", "missing"]), grant("g2", &["missing"])],
            &set,
            true,
        )
        .unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.dropped_unlinked, 1);
        assert_eq!(out.unresolved_links, 2);
    }

    #[test]
    fn grants_reject_negative_amount_and_bad_dates() {
        let set = PaperSet::from_records(vec![paper("p1", 2010, &[])], None).unwrap();
        let mut g = Grant {
            id: GrantId::from("g"),
            funder_id: "nsf".into(),
            funder_class: FunderClass::Government,
            total_amount: Money::from_dollars(-5.0),
            start_date: NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(),
            end_date: NaiveDate::from_ymd_opt(2010, 12, 31).unwrap(),
            linked_paper_ids: [PaperId::from("p1")].into_iter().collect(),
        };
        let err = GrantSet::from_records(vec![g.clone()], &set, false).unwrap_err();
        assert!(matches!(err, CorpusError::NegativeAmount(_)));

        g.total_amount = Money::from_dollars(5.0);
        g.end_date = NaiveDate::from_ymd_opt(2009, 1, 1).unwrap();
        let err = GrantSet::from_records(vec![g], &set, false).unwrap_err();
        assert!(matches!(err, CorpusError::GrantDateOrder(_)));
    }

    #[test]
    fn money_round_trips_cents() {
        let m = Money::from_dollars(15000.0);
        assert_eq!(m.cents(), 1_500_000);
        let json = serde_json::to_string(&m).unwrap();
        let back: Money = serde_json::from_str(&json).unwrap();
        assert_eq!(m, back);
        assert_eq!(Money::from_dollars(0.01).cents(), 1);
    }
}
