//! Multi-field BM25 inverted index over paper metadata.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tokenize::tokenize;
use super::{Bm25Params, Candidate, MatchError};
use crate::corpus::{Paper, PaperId, PaperSet};

/// Metadata fields contributing to the score, in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetaField {
    Title,
    Authors,
    Venue,
    Year,
}

pub const NUM_FIELDS: usize = 4;

impl MetaField {
    pub const ALL: [MetaField; NUM_FIELDS] =
        [MetaField::Title, MetaField::Authors, MetaField::Venue, MetaField::Year];

    pub fn name(self) -> &'static str {
        match self {
            MetaField::Title => "title",
            MetaField::Authors => "authors",
            MetaField::Venue => "venue",
            MetaField::Year => "year",
        }
    }

    fn text(self, paper: &Paper) -> String {
        match self {
            MetaField::Title => paper.title.clone(),
            MetaField::Authors => paper.authors.join(" "),
            MetaField::Venue => paper.venue.clone(),
            MetaField::Year => paper.year.to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Posting {
    doc: u32,
    tf: [u32; NUM_FIELDS],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DocEntry {
    id: PaperId,
    len: [u32; NUM_FIELDS],
}

/// Immutable retrieval structure. Documents keep their corpus order; posting
/// lists are ascending in document index.
#[derive(Debug, Clone)]
pub struct SearchIndex {
    params: Bm25Params,
    docs: Vec<DocEntry>,
    doc_lookup: HashMap<PaperId, u32>,
    postings: HashMap<String, Vec<Posting>>,
    total_len: [u64; NUM_FIELDS],
    avg_len: [f64; NUM_FIELDS],
}

impl SearchIndex {
    pub fn build(papers: &PaperSet, params: Bm25Params) -> Result<Self, MatchError> {
        params.validate()?;
        if papers.is_empty() {
            return Err(MatchError::EmptyCorpus);
        }
        let mut docs = Vec::with_capacity(papers.len());
        let mut doc_lookup = HashMap::with_capacity(papers.len());
        let mut postings: HashMap<String, Vec<Posting>> = HashMap::new();
        let mut total_len = [0u64; NUM_FIELDS];

        for paper in papers.iter() {
            let doc = docs.len() as u32;
            let mut len = [0u32; NUM_FIELDS];
            let mut tf_by_token: HashMap<String, [u32; NUM_FIELDS]> = HashMap::new();
            for (fi, field) in MetaField::ALL.iter().enumerate() {
                let tokens = tokenize(&field.text(paper));
                len[fi] = tokens.len() as u32;
                total_len[fi] += tokens.len() as u64;
                for token in tokens {
                    tf_by_token.entry(token).or_default()[fi] += 1;
                }
            }
            for (token, tf) in tf_by_token {
                postings.entry(token).or_default().push(Posting { doc, tf });
            }
            doc_lookup.insert(paper.id.clone(), doc);
            docs.push(DocEntry {
                id: paper.id.clone(),
                len,
            });
        }
        // doc-order insertion above does not guarantee sorted lists because
        // tf_by_token drains in hash order within a doc, but each doc pushes
        // at most one posting per token, in increasing doc index overall
        for list in postings.values_mut() {
            list.sort_by_key(|p| p.doc);
        }
        let n = docs.len() as f64;
        let mut avg_len = [0.0; NUM_FIELDS];
        for fi in 0..NUM_FIELDS {
            avg_len[fi] = total_len[fi] as f64 / n;
        }
        Ok(SearchIndex {
            params,
            docs,
            doc_lookup,
            postings,
            total_len,
            avg_len,
        })
    }

    pub fn params(&self) -> &Bm25Params {
        &self.params
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_lengths(&self) -> [f64; NUM_FIELDS] {
        self.avg_len
    }

    /// Document frequency: documents containing the token in any field.
    pub fn doc_freq(&self, token: &str) -> usize {
        self.postings.get(token).map_or(0, |l| l.len())
    }

    fn idf(&self, df: usize) -> f64 {
        let n = self.docs.len() as f64;
        let df = df as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    fn contribution(&self, posting: &Posting, idf: f64) -> f64 {
        let entry = &self.docs[posting.doc as usize];
        let mut score = 0.0;
        for fi in 0..NUM_FIELDS {
            let tf = posting.tf[fi] as f64;
            if tf == 0.0 {
                continue;
            }
            let norm = 1.0 - self.params.b + self.params.b * entry.len[fi] as f64 / self.avg_len[fi];
            let term = tf * (self.params.k1 + 1.0) / (tf + self.params.k1 * norm);
            score += self.params.field_weights[fi] * idf * term;
        }
        score
    }

    /// Score one document against query tokens, bag semantics: a token
    /// appearing twice in the query contributes twice.
    pub fn bm25_score(&self, query_tokens: &[String], paper_id: &PaperId) -> Result<f64, MatchError> {
        let doc = *self
            .doc_lookup
            .get(paper_id)
            .ok_or_else(|| MatchError::UnknownPaper(paper_id.clone()))?;
        let mut score = 0.0;
        for token in query_tokens {
            let Some(list) = self.postings.get(token) else {
                continue;
            };
            let idf = self.idf(list.len());
            if let Ok(pos) = list.binary_search_by_key(&doc, |p| p.doc) {
                score += self.contribution(&list[pos], idf);
            }
        }
        Ok(score)
    }

    /// Top two candidates by score, ties broken by ascending paper id.
    ///
    /// Per-document scores accumulate in query-token order, so results do not
    /// depend on corpus order or hash iteration order.
    pub fn query_top2_tokens(&self, query_tokens: &[String]) -> Vec<Candidate> {
        let mut acc: HashMap<u32, f64> = HashMap::new();
        for token in query_tokens {
            let Some(list) = self.postings.get(token) else {
                continue;
            };
            let idf = self.idf(list.len());
            for posting in list {
                *acc.entry(posting.doc).or_insert(0.0) += self.contribution(posting, idf);
            }
        }
        let mut best: Option<(u32, f64)> = None;
        let mut second: Option<(u32, f64)> = None;
        for (doc, score) in acc {
            let entry = (doc, score);
            if best.is_none_or(|b| self.ranks_above(entry, b)) {
                second = best;
                best = Some(entry);
            } else if second.is_none_or(|s| self.ranks_above(entry, s)) {
                second = Some(entry);
            }
        }
        [best, second]
            .into_iter()
            .flatten()
            .map(|(doc, score)| Candidate {
                paper_id: self.docs[doc as usize].id.clone(),
                score,
            })
            .collect()
    }

    pub fn query_top2(&self, raw_string: &str) -> Vec<Candidate> {
        self.query_top2_tokens(&tokenize(raw_string))
    }

    fn ranks_above(&self, a: (u32, f64), b: (u32, f64)) -> bool {
        a.1 > b.1 || (a.1 == b.1 && self.docs[a.0 as usize].id < self.docs[b.0 as usize].id)
    }

    pub fn save(&self, path: &Path) -> Result<(), MatchError> {
        let io_err = |e: std::io::Error| MatchError::Io {
            path: path.display().to_string(),
            source: e,
        };
        let file = File::create(path).map_err(io_err)?;
        let mut w = BufWriter::new(file);
        let header = IndexHeader {
            format: INDEX_FORMAT.to_string(),
            version: INDEX_VERSION,
            params: self.params,
            n_docs: self.docs.len() as u64,
            total_len: self.total_len,
        };
        let mut write_line = |value: String| -> Result<(), MatchError> {
            w.write_all(value.as_bytes()).map_err(io_err)?;
            w.write_all(b"\n").map_err(io_err)
        };
        write_line(serde_json::to_string(&header).expect("header serializes"))?;
        for doc in &self.docs {
            write_line(serde_json::to_string(&IndexRecord::Doc(doc.clone())).expect("doc serializes"))?;
        }
        let mut tokens: Vec<&String> = self.postings.keys().collect();
        tokens.sort();
        for token in tokens {
            let rec = IndexRecord::Tok {
                s: token.clone(),
                p: self.postings[token].clone(),
            };
            write_line(serde_json::to_string(&rec).expect("posting serializes"))?;
        }
        w.flush().map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, MatchError> {
        let io_err = |e: std::io::Error| MatchError::Io {
            path: path.display().to_string(),
            source: e,
        };
        let bad = |detail: String| MatchError::BadFormat {
            path: path.display().to_string(),
            detail,
        };
        let file = File::open(path).map_err(io_err)?;
        let mut lines = BufReader::new(file).lines();
        let header_line = lines
            .next()
            .ok_or_else(|| bad("empty index file".into()))?
            .map_err(io_err)?;
        let header: IndexHeader = serde_json::from_str(&header_line)
            .map_err(|e| bad(format!("unreadable header: {e}")))?;
        if header.format != INDEX_FORMAT || header.version != INDEX_VERSION {
            return Err(bad(format!(
                "unsupported index format {}/{} (want {INDEX_FORMAT}/{INDEX_VERSION})",
                header.format, header.version
            )));
        }
        let mut docs = Vec::with_capacity(header.n_docs as usize);
        let mut doc_lookup = HashMap::with_capacity(header.n_docs as usize);
        let mut postings = HashMap::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(io_err)?;
            if line.trim().is_empty() {
                continue;
            }
            let record: IndexRecord = serde_json::from_str(&line)
                .map_err(|e| bad(format!("record on line {}: {e}", i + 2)))?;
            match record {
                IndexRecord::Doc(doc) => {
                    doc_lookup.insert(doc.id.clone(), docs.len() as u32);
                    docs.push(doc);
                }
                IndexRecord::Tok { s, p } => {
                    postings.insert(s, p);
                }
            }
        }
        if docs.len() as u64 != header.n_docs {
            return Err(bad(format!(
                "header declares {} docs, file holds {}",
                header.n_docs,
                docs.len()
            )));
        }
        if docs.is_empty() {
            return Err(MatchError::EmptyCorpus);
        }
        let n = docs.len() as f64;
        let mut avg_len = [0.0; NUM_FIELDS];
        for fi in 0..NUM_FIELDS {
            avg_len[fi] = header.total_len[fi] as f64 / n;
        }
        Ok(SearchIndex {
            params: header.params,
            docs,
            doc_lookup,
            postings,
            total_len: header.total_len,
            avg_len,
        })
    }
}

const INDEX_FORMAT: &str = "pubsci-index";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct IndexHeader {
    format: String,
    version: u32,
    params: Bm25Params,
    n_docs: u64,
    total_len: [u64; NUM_FIELDS],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "t")]
enum IndexRecord {
    #[serde(rename = "d")]
    Doc(DocEntry),
    #[serde(rename = "k")]
    Tok { s: String, p: Vec<Posting> },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{DocCategory, Paper};
    use std::collections::BTreeSet;

    fn paper(id: &str, title: &str, authors: &[&str], venue: &str, year: i32) -> Paper {
        Paper {
            id: PaperId::from(id),
            title: title.into(),
            authors: authors.iter().map(|s| s.to_string()).collect(),
            venue: venue.into(),
            year,
            doi: None,
            language: None,
            country_tags: BTreeSet::new(),
            doc_category: DocCategory::Journal,
            level1_fields: BTreeSet::new(),
            citations: 0,
        }
    }

    fn three_paper_fixture() -> PaperSet {
        PaperSet::from_records(
            vec![
                paper("p1", "alpha beta gamma", &["Ada Lovelace"], "J Alpha", 2010),
                paper("p2", "beta delta", &["Kurt Godel", "Emmy Noether"], "", 2011),
                paper("p3", "alpha alpha epsilon", &["Alan Turing"], "Conf Beta", 2012),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn empty_corpus_is_rejected() {
        let empty = PaperSet::from_records(vec![], None).unwrap();
        assert!(matches!(
            SearchIndex::build(&empty, Bm25Params::default()),
            Err(MatchError::EmptyCorpus)
        ));
    }

    #[test]
    fn every_title_token_retrieves_its_paper() {
        let papers =
            PaperSet::from_records(vec![paper("p1", "alpha beta", &[], "", 2010)], None).unwrap();
        let index = SearchIndex::build(&papers, Bm25Params::default()).unwrap();
        for token in ["alpha", "beta"] {
            let hits = index.query_top2(token);
            assert_eq!(hits.len(), 1);
            assert_eq!(hits[0].paper_id.as_str(), "p1");
        }
    }

    #[test]
    fn avg_lengths_match_hand_computed_means() {
        let index = SearchIndex::build(&three_paper_fixture(), Bm25Params::default()).unwrap();
        let avg = index.avg_lengths();
        // titles: 3, 2, 3 tokens; authors: 2, 4, 2; venue: 2, 0, 2; year: 1 each
        assert_eq!(avg[0], 8.0 / 3.0);
        assert_eq!(avg[1], 8.0 / 3.0);
        assert_eq!(avg[2], 4.0 / 3.0);
        assert_eq!(avg[3], 1.0);
    }

    #[test]
    fn empty_venue_is_handled() {
        let index = SearchIndex::build(&three_paper_fixture(), Bm25Params::default()).unwrap();
        let hits = index.query_top2("beta delta godel");
        assert_eq!(hits[0].paper_id.as_str(), "p2");
        assert!(hits[0].score.is_finite());
    }

    /// Direct evaluation of the scoring formula, bypassing the index.
    fn brute_force_score(papers: &PaperSet, params: &Bm25Params, query: &[String], id: &str) -> f64 {
        let n = papers.len() as f64;
        let field_tokens: Vec<Vec<Vec<String>>> = papers
            .iter()
            .map(|p| MetaField::ALL.iter().map(|f| tokenize(&f.text(p))).collect())
            .collect();
        let avg: Vec<f64> = (0..NUM_FIELDS)
            .map(|fi| field_tokens.iter().map(|d| d[fi].len() as f64).sum::<f64>() / n)
            .collect();
        let target = papers.iter().position(|p| p.id.as_str() == id).unwrap();
        let mut score = 0.0;
        for token in query {
            let df = field_tokens
                .iter()
                .filter(|d| d.iter().any(|toks| toks.contains(token)))
                .count() as f64;
            if df == 0.0 {
                continue;
            }
            let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
            for fi in 0..NUM_FIELDS {
                let toks = &field_tokens[target][fi];
                let tf = toks.iter().filter(|t| *t == token).count() as f64;
                if tf == 0.0 {
                    continue;
                }
                let norm = 1.0 - params.b + params.b * toks.len() as f64 / avg[fi];
                score += params.field_weights[fi] * idf * tf * (params.k1 + 1.0)
                    / (tf + params.k1 * norm);
            }
        }
        score
    }

    #[test]
    fn score_equals_direct_formula_evaluation() {
        let papers = three_paper_fixture();
        let params = Bm25Params::default();
        let index = SearchIndex::build(&papers, params).unwrap();
        for query in ["alpha", "alpha beta 2011", "godel noether beta", "epsilon turing"] {
            let tokens = tokenize(query);
            for id in ["p1", "p2", "p3"] {
                let got = index.bm25_score(&tokens, &PaperId::from(id)).unwrap();
                let want = brute_force_score(&papers, &params, &tokens, id);
                assert!(
                    (got - want).abs() < 1e-12,
                    "query {query:?} doc {id}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn duplicate_query_token_contributes_twice() {
        let papers = three_paper_fixture();
        let index = SearchIndex::build(&papers, Bm25Params::default()).unwrap();
        let once = index
            .bm25_score(&tokenize("epsilon"), &PaperId::from("p3"))
            .unwrap();
        let twice = index
            .bm25_score(&tokenize("epsilon epsilon"), &PaperId::from("p3"))
            .unwrap();
        assert!((twice - 2.0 * once).abs() < 1e-12);
    }

    #[test]
    fn absent_token_contributes_zero() {
        let papers = three_paper_fixture();
        let index = SearchIndex::build(&papers, Bm25Params::default()).unwrap();
        let base = index
            .bm25_score(&tokenize("alpha"), &PaperId::from("p1"))
            .unwrap();
        let extended = index
            .bm25_score(&tokenize("alpha zzzz"), &PaperId::from("p1"))
            .unwrap();
        assert_eq!(base, extended);
    }

    #[test]
    fn unknown_paper_id_is_an_error() {
        let index = SearchIndex::build(&three_paper_fixture(), Bm25Params::default()).unwrap();
        assert!(matches!(
            index.bm25_score(&tokenize("alpha"), &PaperId::from("nope")),
            Err(MatchError::UnknownPaper(_))
        ));
    }

    #[test]
    fn disjoint_query_returns_nothing() {
        let index = SearchIndex::build(&three_paper_fixture(), Bm25Params::default()).unwrap();
        assert!(index.query_top2("zeta eta theta").is_empty());
    }

    #[test]
    fn top2_is_descending_and_ties_break_by_id() {
        let papers = PaperSet::from_records(
            vec![
                paper("pb", "twin title", &[], "", 2010),
                paper("pa", "twin title", &[], "", 2010),
            ],
            None,
        )
        .unwrap();
        let index = SearchIndex::build(&papers, Bm25Params::default()).unwrap();
        let hits = index.query_top2("twin title");
        assert_eq!(hits.len(), 2);
        assert_eq!(hits[0].score, hits[1].score);
        assert_eq!(hits[0].paper_id.as_str(), "pa");
        assert_eq!(hits[1].paper_id.as_str(), "pb");
    }

    #[test]
    fn scores_survive_corpus_reordering() {
        let forward = three_paper_fixture();
        let mut reversed: Vec<Paper> = forward.iter().cloned().collect();
        reversed.reverse();
        let backward = PaperSet::from_records(reversed, None).unwrap();
        let fwd = SearchIndex::build(&forward, Bm25Params::default()).unwrap();
        let bwd = SearchIndex::build(&backward, Bm25Params::default()).unwrap();
        for query in ["alpha beta", "godel 2011", "alpha alpha epsilon turing"] {
            let a = fwd.query_top2(query);
            let b = bwd.query_top2(query);
            assert_eq!(a, b, "query {query:?}");
        }
    }

    #[test]
    fn index_round_trips_through_file() {
        let papers = three_paper_fixture();
        let index = SearchIndex::build(&papers, Bm25Params::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("index.ndjson");
        index.save(&path).unwrap();
        let loaded = SearchIndex::load(&path).unwrap();
        assert_eq!(loaded.num_docs(), index.num_docs());
        assert_eq!(loaded.avg_lengths(), index.avg_lengths());
        for query in ["alpha beta gamma", "turing", "beta"] {
            assert_eq!(loaded.query_top2(query), index.query_top2(query));
        }
    }

    #[test]
    fn saved_index_bytes_are_deterministic() {
        let papers = three_paper_fixture();
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.ndjson");
        let b = dir.path().join("b.ndjson");
        SearchIndex::build(&papers, Bm25Params::default()).unwrap().save(&a).unwrap();
        SearchIndex::build(&papers, Bm25Params::default()).unwrap().save(&b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn bad_params_are_rejected() {
        let papers = three_paper_fixture();
        let mut params = Bm25Params::default();
        params.b = 1.5;
        assert!(matches!(
            SearchIndex::build(&papers, params),
            Err(MatchError::BadParams(_))
        ));
    }
}
