//! Deterministic synthetic inputs for desk-scale runs.
//!
//! Every number flows from one seeded generator, so a seed pins the whole
//! file set byte for byte. The generator plants recoverable structure:
//! per-field consumption weights (the dispersion knob at zero makes
//! consumption uniform), citation enrichment for consumed papers, labeled
//! reference strings with controlled perturbations, and grant sizes tied to
//! the planted field weights through known exponents.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, LogNormal, Normal, Zipf};
use serde::{Deserialize, Serialize};

use crate::corpus::io::{write_ndjson, TaxonomyRecord};
use crate::corpus::{
    ConsumptionEvent, CorpusError, DocCategory, Domain, FieldId, FieldTaxonomy, FunderClass,
    Grant, GrantId, Money, Paper, PaperId, ReferenceRecord,
};
use crate::regress::FieldObservation;

pub const TAXONOMY_FILE: &str = "taxonomy.ndjson";
pub const PAPERS_FILE: &str = "papers.ndjson";
pub const EVENTS_FILE: &str = "events.ndjson";
pub const GRANTS_FILE: &str = "grants.ndjson";
pub const REFERENCES_FILE: &str = "references.ndjson";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

/// Sizes and planted parameters for one synthetic file set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub seed: u64,
    pub level0_fields: usize,
    pub level1_fields: usize,
    pub papers: usize,
    /// Inclusive publication-year window; a small share of papers falls
    /// outside it to exercise corpus filtering.
    pub year_window: (i32, i32),
    pub off_window_share: f64,
    /// Share of papers carrying a second level-1 field.
    pub multi_field_share: f64,
    /// Baseline per-domain probability that a paper is consumed.
    pub consumption_rate: f64,
    /// Spread of per-field consumption weights; 0 means uniform consumption
    /// and downstream indices near 1.
    pub rci_dispersion: f64,
    /// Log-citation shift per domain consuming a paper.
    pub hit_enrichment: f64,
    pub true_references: usize,
    pub distractor_references: usize,
    /// Inclusive range of token edits applied to a true reference string.
    pub reference_perturbations: (usize, usize),
    pub grants: usize,
    pub government_grant_share: f64,
    /// Exponents tying grant size to the planted per-field weights of the
    /// government, news, and patent domains, in that order.
    pub planted_funding_exponents: [f64; 3],
}

impl Default for FixtureSpec {
    fn default() -> Self {
        FixtureSpec {
            seed: 42,
            level0_fields: 19,
            level1_fields: 294,
            papers: 5_000,
            year_window: (2005, 2014),
            off_window_share: 0.03,
            multi_field_share: 0.25,
            consumption_rate: 0.12,
            rci_dispersion: 0.5,
            hit_enrichment: 0.8,
            true_references: 1_500,
            distractor_references: 400,
            reference_perturbations: (1, 2),
            grants: 800,
            government_grant_share: 0.85,
            planted_funding_exponents: [0.2, 0.8, 0.6],
        }
    }
}

impl FixtureSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.year_window.0 > self.year_window.1 {
            return Err(CorpusError::InvalidYearWindow(
                self.year_window.0,
                self.year_window.1,
            ));
        }
        assert!(self.level0_fields > 0, "need at least one level-0 field");
        assert!(
            self.level1_fields >= self.level0_fields,
            "need at least as many level-1 as level-0 fields"
        );
        assert!(self.papers > 0, "need at least one paper");
        assert!(
            self.reference_perturbations.0 <= self.reference_perturbations.1,
            "perturbation range is inverted"
        );
        for share in [
            self.off_window_share,
            self.multi_field_share,
            self.consumption_rate,
            self.government_grant_share,
        ] {
            assert!((0.0..=1.0).contains(&share), "share {share} outside [0, 1]");
        }
        Ok(())
    }
}

/// Declared contents of a generated file set, for downstream bookkeeping
/// checks and for tests that need the planted values back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: FixtureSpec,
    pub taxonomy_rows: usize,
    pub paper_rows: usize,
    pub in_window_papers: usize,
    pub event_rows: usize,
    pub events_by_domain: BTreeMap<Domain, usize>,
    pub grant_rows: usize,
    pub reference_rows: usize,
    pub true_reference_count: usize,
    pub distractor_reference_count: usize,
    /// Planted per-field consumption weight multipliers.
    pub field_weights: BTreeMap<Domain, BTreeMap<FieldId, f64>>,
}

/// A complete in-memory input file set plus its declaration.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub taxonomy: Vec<TaxonomyRecord>,
    pub papers: Vec<Paper>,
    pub events: Vec<ConsumptionEvent>,
    pub grants: Vec<Grant>,
    pub references: Vec<ReferenceRecord>,
    pub ground_truth: GroundTruth,
}

impl Fixture {
    /// The taxonomy records as a validated hierarchy.
    pub fn field_taxonomy(&self) -> FieldTaxonomy {
        let mut level0 = BTreeSet::new();
        let mut parents = BTreeMap::new();
        for rec in &self.taxonomy {
            if rec.level == 0 {
                level0.insert(rec.field_id.clone());
            } else {
                parents.insert(rec.field_id.clone(), rec.parents.iter().cloned().collect());
            }
        }
        FieldTaxonomy::new(level0, parents).expect("generated taxonomy is well-formed")
    }
}

const SYLLABLES: [&str; 24] = [
    "bar", "cen", "dor", "fel", "gim", "hul", "jan", "kor", "lem", "mir", "nov", "pel", "quin",
    "ros", "sul", "tor", "vek", "wim", "yor", "zan", "bri", "clo", "dra", "fru",
];

// vowel-initial syllables build the out-of-corpus half of distractor titles;
// corpus syllables are consonant-initial, so the word sets stay disjoint
const FOREIGN_SYLLABLES: [&str; 12] = [
    "ald", "ene", "ira", "ost", "ulm", "ave", "ion", "eda", "urn", "oke", "ati", "ilo",
];

const GOV_SUBDOMAINS: [&str; 5] = ["health", "defense", "energy", "environment", "justice"];
const NEWS_SUBDOMAINS: [&str; 3] = ["print", "broadcast", "online"];
const CONSUMERS_PER_DOMAIN: usize = 20;

fn build_vocab(rng: &mut ChaCha12Rng, syllables: &[&str], size: usize) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut vocab = Vec::with_capacity(size);
    while vocab.len() < size {
        let parts = rng.random_range(2..=3usize);
        let word: String = (0..parts)
            .map(|_| syllables[rng.random_range(0..syllables.len())])
            .collect();
        if seen.insert(word.clone()) {
            vocab.push(word);
        }
    }
    vocab
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

struct WordSampler {
    vocab: Vec<String>,
    zipf: Zipf<f64>,
}

impl WordSampler {
    fn new(vocab: Vec<String>) -> Self {
        let zipf = Zipf::new(vocab.len() as f64, 1.07).expect("valid Zipf parameters");
        WordSampler { vocab, zipf }
    }

    fn word(&self, rng: &mut ChaCha12Rng) -> &str {
        let idx = self.zipf.sample(rng) as usize - 1;
        &self.vocab[idx]
    }
}

fn consumer_pool(domain: Domain) -> Vec<(String, Option<String>)> {
    (0..CONSUMERS_PER_DOMAIN)
        .map(|k| match domain {
            Domain::Government => (
                format!("gov-{k:02}"),
                Some(GOV_SUBDOMAINS[k % GOV_SUBDOMAINS.len()].to_string()),
            ),
            Domain::News => (
                format!("news-{k:02}"),
                Some(NEWS_SUBDOMAINS[k % NEWS_SUBDOMAINS.len()].to_string()),
            ),
            Domain::Patent => (format!("pat-{k:02}"), None),
        })
        .collect()
}

fn reference_string(paper: &Paper) -> String {
    format!(
        "{}. {}. {}, {}.",
        paper.authors.join(", "),
        paper.title,
        paper.venue,
        paper.year
    )
}

fn perturb(rng: &mut ChaCha12Rng, text: &str, edits: usize) -> String {
    let mut tokens: Vec<String> = text.split_whitespace().map(str::to_string).collect();
    for _ in 0..edits {
        if tokens.len() > 3 && rng.random::<f64>() < 0.5 {
            let i = rng.random_range(0..tokens.len());
            tokens.remove(i);
        } else {
            let i = rng.random_range(0..tokens.len());
            let chars: Vec<char> = tokens[i].chars().collect();
            if chars.len() >= 2 {
                let j = rng.random_range(0..chars.len() - 1);
                let mut swapped = chars;
                swapped.swap(j, j + 1);
                tokens[i] = swapped.into_iter().collect();
            }
        }
    }
    tokens.join(" ")
}

/// Generate a complete input file set from the spec's seed.
pub fn generate_fixture(spec: &FixtureSpec) -> Result<Fixture, CorpusError> {
    spec.validate()?;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");

    let words = WordSampler::new(build_vocab(&mut rng, &SYLLABLES, 600));
    let surnames: Vec<String> = build_vocab(&mut rng, &SYLLABLES, 150)
        .into_iter()
        .map(|w| capitalize(&w))
        .collect();
    let venues: Vec<String> = (0..36)
        .map(|i| {
            let a = capitalize(words.word(&mut rng));
            let b = capitalize(words.word(&mut rng));
            match i % 4 {
                0 => format!("Journal of {a} {b}"),
                1 => format!("{a} Letters"),
                2 => format!("Annals of {a}"),
                _ => format!("{a} Review"),
            }
        })
        .collect();

    // taxonomy: level-0 ids d??, level-1 ids f???, one or two parents each
    let level0_ids: Vec<FieldId> =
        (0..spec.level0_fields).map(|i| FieldId::from(format!("d{i:02}"))).collect();
    let level1_ids: Vec<FieldId> =
        (0..spec.level1_fields).map(|i| FieldId::from(format!("f{i:03}"))).collect();
    let mut taxonomy = Vec::new();
    for id in &level0_ids {
        taxonomy.push(TaxonomyRecord {
            field_id: id.clone(),
            level: 0,
            parents: vec![],
        });
    }
    for (i, id) in level1_ids.iter().enumerate() {
        let mut parents = vec![level0_ids[i % spec.level0_fields].clone()];
        if rng.random::<f64>() < 0.2 {
            let other = level0_ids[rng.random_range(0..spec.level0_fields)].clone();
            if other != parents[0] {
                parents.push(other);
            }
        }
        taxonomy.push(TaxonomyRecord {
            field_id: id.clone(),
            level: 1,
            parents,
        });
    }

    // planted consumption weights per (domain, level-1 field)
    let mut field_weights: BTreeMap<Domain, BTreeMap<FieldId, f64>> = BTreeMap::new();
    let mut weight_by_index: BTreeMap<Domain, Vec<f64>> = BTreeMap::new();
    for domain in Domain::ALL {
        let w: Vec<f64> = (0..spec.level1_fields)
            .map(|_| (spec.rci_dispersion * normal.sample(&mut rng)).exp())
            .collect();
        field_weights.insert(
            domain,
            level1_ids.iter().cloned().zip(w.iter().copied()).collect(),
        );
        weight_by_index.insert(domain, w);
    }

    // papers, with citations filled in after consumption is known
    let (start_year, end_year) = spec.year_window;
    let mut papers = Vec::with_capacity(spec.papers);
    let mut primary_field = Vec::with_capacity(spec.papers);
    let mut in_window_papers = 0usize;
    for i in 0..spec.papers {
        let year = if rng.random::<f64>() < spec.off_window_share {
            if rng.random::<bool>() {
                start_year - rng.random_range(1..=3)
            } else {
                end_year + rng.random_range(1..=3)
            }
        } else {
            rng.random_range(start_year..=end_year)
        };
        if (start_year..=end_year).contains(&year) {
            in_window_papers += 1;
        }
        let title_len = rng.random_range(5..=9usize);
        let mut title_words: Vec<String> =
            (0..title_len).map(|_| words.word(&mut rng).to_string()).collect();
        title_words[0] = capitalize(&title_words[0]);
        let authors: Vec<String> = (0..rng.random_range(1..=4usize))
            .map(|_| {
                let initial = (b'A' + rng.random_range(0..26u8)) as char;
                format!("{initial}. {}", surnames[rng.random_range(0..surnames.len())])
            })
            .collect();
        let field = rng.random_range(0..spec.level1_fields);
        primary_field.push(field);
        let mut level1_fields: BTreeSet<FieldId> = BTreeSet::new();
        level1_fields.insert(level1_ids[field].clone());
        if rng.random::<f64>() < spec.multi_field_share {
            level1_fields.insert(level1_ids[rng.random_range(0..spec.level1_fields)].clone());
        }
        papers.push(Paper {
            id: PaperId::from(format!("p{i:06}")),
            title: title_words.join(" "),
            authors,
            venue: venues[rng.random_range(0..venues.len())].clone(),
            year,
            doi: (rng.random::<f64>() < 0.92).then(|| format!("10.5555/{:08x}", rng.random::<u32>())),
            language: Some("en".to_string()),
            country_tags: BTreeSet::from(["us".to_string()]),
            doc_category: if rng.random::<f64>() < 0.7 {
                DocCategory::Journal
            } else {
                DocCategory::Conference
            },
            level1_fields,
            citations: 0,
        });
    }

    // consumption: primary-field weight scales the baseline rate
    let mut events = Vec::new();
    let mut events_by_domain: BTreeMap<Domain, usize> = BTreeMap::new();
    let mut consuming_domains: HashMap<usize, u32> = HashMap::new();
    for domain in Domain::ALL {
        let consumers = consumer_pool(domain);
        let weights = &weight_by_index[&domain];
        let mut count = 0usize;
        for (i, paper) in papers.iter().enumerate() {
            let p = (spec.consumption_rate * weights[primary_field[i]]).min(0.95);
            if rng.random::<f64>() < p {
                *consuming_domains.entry(i).or_insert(0) += 1;
                let (consumer, subdomain) = &consumers[rng.random_range(0..consumers.len())];
                events.push(ConsumptionEvent {
                    domain,
                    consumer_doc_id: consumer.clone(),
                    subdomain: subdomain.clone(),
                    paper_id: paper.id.clone(),
                });
                count += 1;
                if rng.random::<f64>() < 0.15 {
                    let (other, other_sub) = &consumers[rng.random_range(0..consumers.len())];
                    if other != consumer {
                        events.push(ConsumptionEvent {
                            domain,
                            consumer_doc_id: other.clone(),
                            subdomain: other_sub.clone(),
                            paper_id: paper.id.clone(),
                        });
                        count += 1;
                    }
                }
            }
        }
        events_by_domain.insert(domain, count);
    }

    // citations: lognormal base, shifted up once per consuming domain
    for (i, paper) in papers.iter_mut().enumerate() {
        let boost = spec.hit_enrichment * f64::from(consuming_domains.get(&i).copied().unwrap_or(0));
        let ln_c = 1.1 + normal.sample(&mut rng) + boost;
        paper.citations = ln_c.exp().round().min(1e9) as u64;
    }

    // grants: sized by the planted funding exponents at a home field, linked
    // to papers whose primary field is that home field
    let mut papers_by_field: Vec<Vec<usize>> = vec![Vec::new(); spec.level1_fields];
    for (i, &f) in primary_field.iter().enumerate() {
        papers_by_field[f].push(i);
    }
    let amount_noise = LogNormal::new(11.5, 0.6).expect("valid lognormal");
    let [beta_g, beta_n, beta_p] = spec.planted_funding_exponents;
    let mut grants = Vec::with_capacity(spec.grants);
    for g in 0..spec.grants {
        let home = rng.random_range(0..spec.level1_fields);
        let planted = weight_by_index[&Domain::Government][home].powf(beta_g)
            * weight_by_index[&Domain::News][home].powf(beta_n)
            * weight_by_index[&Domain::Patent][home].powf(beta_p);
        let amount = Money::from_dollars((amount_noise.sample(&mut rng) * planted).max(1_000.0));
        let start_year = rng.random_range(spec.year_window.0 - 2..=spec.year_window.1);
        let start = NaiveDate::from_yo_opt(start_year, rng.random_range(1..=365))
            .expect("ordinal within a year");
        let end = start + Days::new(rng.random_range(180..=1800));
        let candidates = if papers_by_field[home].is_empty() {
            (0..papers.len()).collect::<Vec<_>>()
        } else {
            papers_by_field[home].clone()
        };
        let links = rng.random_range(1..=5usize).min(candidates.len());
        let mut linked_paper_ids = BTreeSet::new();
        while linked_paper_ids.len() < links {
            let idx = candidates[rng.random_range(0..candidates.len())];
            linked_paper_ids.insert(papers[idx].id.clone());
        }
        grants.push(Grant {
            id: GrantId::from(format!("g{g:05}")),
            funder_id: format!("funder-{:02}", rng.random_range(0..12)),
            funder_class: if rng.random::<f64>() < spec.government_grant_share {
                FunderClass::Government
            } else {
                FunderClass::Other
            },
            total_amount: amount,
            start_date: start,
            end_date: end,
            linked_paper_ids,
        });
    }

    // references: perturbed strings for in-window papers, plus distractors
    // citing works the corpus does not contain
    let in_window: Vec<usize> = (0..papers.len())
        .filter(|&i| (start_year..=end_year).contains(&papers[i].year))
        .collect();
    let (min_edits, max_edits) = spec.reference_perturbations;
    let mut references = Vec::with_capacity(spec.true_references + spec.distractor_references);
    for r in 0..spec.true_references {
        let idx = in_window[rng.random_range(0..in_window.len())];
        let edits = rng.random_range(min_edits..=max_edits);
        let raw_string = perturb(&mut rng, &reference_string(&papers[idx]), edits);
        references.push(ReferenceRecord {
            source_doc_id: format!("ref-{r:05}"),
            domain: Domain::ALL[r % Domain::ALL.len()],
            raw_string,
            gold_paper_id: Some(papers[idx].id.clone()),
        });
    }
    // distractors cite works the corpus lacks: titles mix shared terminology
    // with words of their own, so retrieval sees plausible weak candidates
    // rather than nothing at all
    let foreign_words = WordSampler::new(build_vocab(&mut rng, &FOREIGN_SYLLABLES, 300));
    for r in 0..spec.distractor_references {
        let title_len = rng.random_range(5..=9usize);
        let mut title_words: Vec<String> = (0..title_len)
            .map(|_| {
                if rng.random::<bool>() {
                    words.word(&mut rng).to_string()
                } else {
                    foreign_words.word(&mut rng).to_string()
                }
            })
            .collect();
        title_words[0] = capitalize(&title_words[0]);
        let authors: Vec<String> = (0..rng.random_range(1..=4usize))
            .map(|_| {
                let initial = (b'A' + rng.random_range(0..26u8)) as char;
                format!("{initial}. {}", surnames[rng.random_range(0..surnames.len())])
            })
            .collect();
        let text = format!(
            "{}. {}. {}, {}.",
            authors.join(", "),
            title_words.join(" "),
            venues[rng.random_range(0..venues.len())],
            rng.random_range(start_year..=end_year),
        );
        references.push(ReferenceRecord {
            source_doc_id: format!("dx-{r:05}"),
            domain: Domain::ALL[r % Domain::ALL.len()],
            raw_string: text,
            gold_paper_id: None,
        });
    }
    references.shuffle(&mut rng);

    let ground_truth = GroundTruth {
        spec: spec.clone(),
        taxonomy_rows: taxonomy.len(),
        paper_rows: papers.len(),
        in_window_papers,
        event_rows: events.len(),
        events_by_domain,
        grant_rows: grants.len(),
        reference_rows: references.len(),
        true_reference_count: spec.true_references,
        distractor_reference_count: spec.distractor_references,
        field_weights,
    };
    Ok(Fixture {
        taxonomy,
        papers,
        events,
        grants,
        references,
        ground_truth,
    })
}

/// Write the file set under `dir` with the standard file names.
pub fn write_fixture(fixture: &Fixture, dir: &Path) -> Result<(), CorpusError> {
    let io_err = |path: &Path, source: std::io::Error| CorpusError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_ndjson(&dir.join(TAXONOMY_FILE), &fixture.taxonomy)?;
    write_ndjson(&dir.join(PAPERS_FILE), &fixture.papers)?;
    write_ndjson(&dir.join(EVENTS_FILE), &fixture.events)?;
    write_ndjson(&dir.join(GRANTS_FILE), &fixture.grants)?;
    write_ndjson(&dir.join(REFERENCES_FILE), &fixture.references)?;
    let gt_path = dir.join(GROUND_TRUTH_FILE);
    let mut gt = serde_json::to_string_pretty(&fixture.ground_truth)
        .expect("ground truth serializes");
    gt.push('\n');
    std::fs::write(&gt_path, gt).map_err(|e| io_err(&gt_path, e))?;
    Ok(())
}

/// A field panel with known coefficients: per-field consumption indices and
/// a funding response following
/// ln Y = b_g ln RCI_g + b_n ln RCI_n + b_p ln RCI_p + N(0, sigma).
pub fn regression_panel(
    seed: u64,
    level1_fields: usize,
    level0_fields: usize,
    planted: [f64; 3],
    noise_sigma: f64,
) -> (Vec<FieldObservation>, FieldTaxonomy) {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let normal: Normal<f64> = Normal::new(0.0, 1.0).expect("unit normal");
    let level0_ids: Vec<FieldId> =
        (0..level0_fields).map(|i| FieldId::from(format!("d{i:02}"))).collect();
    let mut parents = BTreeMap::new();
    let mut observations = Vec::with_capacity(level1_fields);
    for i in 0..level1_fields {
        let id = FieldId::from(format!("f{i:03}"));
        let mut ps: BTreeSet<FieldId> = BTreeSet::new();
        ps.insert(level0_ids[i % level0_fields].clone());
        if i % 5 == 0 {
            ps.insert(level0_ids[(i + 1) % level0_fields].clone());
        }
        parents.insert(id.clone(), ps);
        let rci = [(); 3].map(|_| (0.7 * normal.sample(&mut rng)).exp());
        let noise = noise_sigma * normal.sample(&mut rng);
        let funding = (1.5
            + planted[0] * rci[0].ln()
            + planted[1] * rci[1].ln()
            + planted[2] * rci[2].ln()
            + noise)
            .exp();
        observations.push(FieldObservation {
            field_id: id,
            rci_government: rci[0],
            rci_news: rci[1],
            rci_patent: rci[2],
            paper_count: rng.random_range(20..=2000),
            funding_per_paper: funding,
        });
    }
    let taxonomy = FieldTaxonomy::new(level0_ids.into_iter().collect(), parents)
        .expect("well-formed synthetic taxonomy");
    (observations, taxonomy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EventSet, GrantSet, PaperSet};
    use crate::metrics::{consumed_sets, FieldLevel, RciTable};
    use crate::refmatch::{
        calibration_observations, evaluate_matching, match_batch, Bm25Params, NullModel,
        SearchIndex,
    };
    use crate::regress::fit_model;

    fn small_spec(seed: u64) -> FixtureSpec {
        FixtureSpec {
            seed,
            level0_fields: 4,
            level1_fields: 20,
            papers: 600,
            true_references: 150,
            distractor_references: 40,
            grants: 80,
            ..FixtureSpec::default()
        }
    }

    #[test]
    fn same_seed_reproduces_every_byte() {
        let a = generate_fixture(&small_spec(9)).unwrap();
        let b = generate_fixture(&small_spec(9)).unwrap();
        for (x, y) in [
            (serde_json::to_string(&a.papers), serde_json::to_string(&b.papers)),
            (serde_json::to_string(&a.events), serde_json::to_string(&b.events)),
            (serde_json::to_string(&a.grants), serde_json::to_string(&b.grants)),
            (serde_json::to_string(&a.references), serde_json::to_string(&b.references)),
            (serde_json::to_string(&a.ground_truth), serde_json::to_string(&b.ground_truth)),
        ] {
            assert_eq!(x.unwrap(), y.unwrap());
        }
    }

    #[test]
    fn different_seeds_differ() {
        let a = generate_fixture(&small_spec(1)).unwrap();
        let b = generate_fixture(&small_spec(2)).unwrap();
        assert_ne!(
            serde_json::to_string(&a.papers).unwrap(),
            serde_json::to_string(&b.papers).unwrap()
        );
    }

    #[test]
    fn declared_counts_match_contents() {
        let fx = generate_fixture(&small_spec(5)).unwrap();
        let gt = &fx.ground_truth;
        assert_eq!(gt.taxonomy_rows, fx.taxonomy.len());
        assert_eq!(gt.paper_rows, fx.papers.len());
        assert_eq!(gt.event_rows, fx.events.len());
        assert_eq!(gt.grant_rows, fx.grants.len());
        assert_eq!(gt.reference_rows, fx.references.len());
        assert_eq!(
            gt.event_rows,
            gt.events_by_domain.values().sum::<usize>()
        );
        let golds = fx.references.iter().filter(|r| r.gold_paper_id.is_some()).count();
        assert_eq!(golds, gt.true_reference_count);
        assert_eq!(fx.references.len() - golds, gt.distractor_reference_count);
        let in_window = fx
            .papers
            .iter()
            .filter(|p| (2005..=2014).contains(&p.year))
            .count();
        assert_eq!(in_window, gt.in_window_papers);
    }

    #[test]
    fn generated_records_are_internally_consistent() {
        let fx = generate_fixture(&small_spec(11)).unwrap();
        let taxonomy = fx.field_taxonomy();
        assert_eq!(taxonomy.level0.len(), 4);
        assert_eq!(taxonomy.level1.len(), 20);
        let papers = PaperSet::from_records(fx.papers.clone(), Some(&taxonomy)).unwrap();
        let events = EventSet::from_records(fx.events.clone(), &papers);
        assert_eq!(events.dropped_unresolved, 0);
        assert_eq!(events.dropped_duplicate, 0);
        let grants = GrantSet::from_records(fx.grants.clone(), &papers, true).unwrap();
        assert_eq!(grants.grants.len(), 80);
        assert_eq!(grants.unresolved_links, 0);
        for r in &fx.references {
            if let Some(gold) = &r.gold_paper_id {
                let paper = papers.get(gold).expect("gold ids resolve");
                assert!((2005..=2014).contains(&paper.year));
            }
        }
    }

    #[test]
    fn zero_dispersion_yields_near_unit_indices() {
        let spec = FixtureSpec {
            seed: 31,
            level0_fields: 5,
            level1_fields: 10,
            papers: 20_000,
            off_window_share: 0.0,
            consumption_rate: 0.4,
            rci_dispersion: 0.0,
            true_references: 0,
            distractor_references: 0,
            grants: 0,
            ..FixtureSpec::default()
        };
        let fx = generate_fixture(&spec).unwrap();
        let taxonomy = fx.field_taxonomy();
        let papers = PaperSet::from_records(fx.papers.clone(), Some(&taxonomy)).unwrap();
        let events = EventSet::from_records(fx.events.clone(), &papers);
        let sets = consumed_sets(&events);
        let table = RciTable::compute(&papers, &taxonomy, &sets, FieldLevel::One, false).unwrap();
        for slice in table.slices.values() {
            for entry in slice.entries.values() {
                assert!(
                    (entry.rci - 1.0).abs() < 0.05,
                    "{:?} rci {}",
                    slice.domain,
                    entry.rci
                );
            }
        }
    }

    #[test]
    fn enriched_consumption_lifts_citations() {
        let fx = generate_fixture(&FixtureSpec {
            seed: 3,
            hit_enrichment: 1.0,
            ..small_spec(3)
        })
        .unwrap();
        let consumed: BTreeSet<&PaperId> = fx.events.iter().map(|e| &e.paper_id).collect();
        let (mut hit_sum, mut hit_n, mut rest_sum, mut rest_n) = (0.0, 0u64, 0.0, 0u64);
        for p in &fx.papers {
            let ln_c = (p.citations.max(1) as f64).ln();
            if consumed.contains(&p.id) {
                hit_sum += ln_c;
                hit_n += 1;
            } else {
                rest_sum += ln_c;
                rest_n += 1;
            }
        }
        assert!(hit_n > 20 && rest_n > 20);
        assert!(hit_sum / hit_n as f64 > rest_sum / rest_n as f64 + 0.3);
    }

    #[test]
    fn references_resolve_well_at_default_threshold() {
        let fx = generate_fixture(&small_spec(17)).unwrap();
        let taxonomy = fx.field_taxonomy();
        let papers = PaperSet::from_records(fx.papers.clone(), Some(&taxonomy)).unwrap();
        let index = SearchIndex::build(&papers, Bm25Params::default()).unwrap();
        let calibration = calibration_observations(&index, &fx.references);
        let null = NullModel::fit(&calibration, 5, 30).unwrap();
        let (_, log) = match_batch(&index, &fx.references, &null, 2.0);
        let eval = evaluate_matching(&log).unwrap();
        assert!(eval.f1 > 0.85, "f1 {}", eval.f1);
        assert!(eval.conditional_accuracy > 0.95, "acc {}", eval.conditional_accuracy);
        let distractor_matches = log
            .iter()
            .filter(|e| e.gold_paper_id.is_none() && e.matched)
            .count();
        assert!(
            (distractor_matches as f64) < 0.05 * 40.0 + 1.0,
            "{distractor_matches} distractors matched"
        );
    }

    #[test]
    fn fixture_round_trips_through_files() {
        let dir = tempfile::tempdir().unwrap();
        let fx = generate_fixture(&small_spec(23)).unwrap();
        write_fixture(&fx, dir.path()).unwrap();
        let taxonomy = crate::corpus::io::load_taxonomy(&dir.path().join(TAXONOMY_FILE)).unwrap();
        assert_eq!(taxonomy.level0.len(), 4);
        assert_eq!(taxonomy.level1.len(), 20);
        let papers =
            crate::corpus::io::load_papers(&dir.path().join(PAPERS_FILE), Some(&taxonomy)).unwrap();
        assert_eq!(papers.len(), 600);
        let refs = crate::corpus::io::load_references(&dir.path().join(REFERENCES_FILE)).unwrap();
        assert_eq!(refs.len(), 190);
        let gt: GroundTruth = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join(GROUND_TRUTH_FILE)).unwrap(),
        )
        .unwrap();
        assert_eq!(gt, fx.ground_truth);
    }

    #[test]
    fn panel_recovers_planted_coefficients() {
        let (observations, taxonomy) = regression_panel(5, 294, 19, [0.2, 0.8, 0.6], 0.3);
        assert_eq!(observations.len(), 294);
        let fit = fit_model(7, &observations, &taxonomy).unwrap();
        for (label, want) in [
            ("ln_rci_government", 0.2),
            ("ln_rci_news", 0.8),
            ("ln_rci_patent", 0.6),
        ] {
            let c = &fit.coefficients[label];
            assert!(
                (c.estimate - want).abs() <= 2.0 * c.std_error,
                "{label}: {} vs {want} (se {})",
                c.estimate,
                c.std_error
            );
        }
    }

    #[test]
    fn panel_is_deterministic() {
        let (a, _) = regression_panel(7, 50, 5, [0.2, 0.8, 0.6], 0.3);
        let (b, _) = regression_panel(7, 50, 5, [0.2, 0.8, 0.6], 0.3);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
