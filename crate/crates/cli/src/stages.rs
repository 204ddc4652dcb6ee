//! Pipeline stages and their artifact files.
//!
//! Every stage is a pure function from input files to output files in the
//! configured output directory: it reads only declared inputs, writes each
//! output atomically through a temporary sibling, and reports row counts for
//! the manifest. Stage outputs are removed when the stage fails, so the
//! output directory never holds half-written artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use pubsci_core::corpus::io::{
    load_grants, load_papers, load_references, load_taxonomy, read_ndjson,
};
use pubsci_core::fixture::{generate_fixture, write_fixture, Fixture, FixtureSpec};
use pubsci_core::funding::{allocate_to_fields, field_funding, prorate_amount, FundingError};
use pubsci_core::metrics::{
    citation_percentiles, combination_label, compute_rci, consumed_sets, domain_intersections,
    fields_at_level, hit_set, subdomain_profiles, ternary_coordinates, FieldLevel, HitRule,
    MetricsError, RciSlice, VENN_COMBINATIONS,
};
use pubsci_core::refmatch::{
    calibration_observations, evaluate_matching, match_batch, MatchEvaluation, MatchLogEntry,
    NullModel, SearchIndex,
};
use pubsci_core::regress::{
    fit_model, format_models_table, spearman, FieldObservation, SpearmanResult,
};
use pubsci_core::{
    ConsumptionEvent, Domain, EventSet, FieldId, FieldTaxonomy, Money, PaperSet,
};

use crate::config::PipelineConfig;
use crate::manifest::{sha256_file, RunManifest, StageRecord, TOOL_NAME, TOOL_VERSION};
use crate::CliError;

pub const PAPERS_FILTERED_FILE: &str = "papers_filtered.ndjson";
pub const INDEX_FILE: &str = "index.ndjson";
pub const NULL_MODEL_FILE: &str = "null_model.json";
pub const MATCH_LOG_FILE: &str = "match_log.ndjson";
pub const MATCHED_EVENTS_FILE: &str = "matched_events.ndjson";
pub const EVENTS_COMBINED_FILE: &str = "events_combined.ndjson";
pub const RCI_LEVEL0_FILE: &str = "rci_level0.tsv";
pub const RCI_LEVEL1_FILE: &str = "rci_level1.tsv";
pub const HITS_FILE: &str = "hits.tsv";
pub const VENN_FILE: &str = "venn.tsv";
pub const TERNARY_FILE: &str = "ternary.tsv";
pub const SUBDOMAINS_FILE: &str = "subdomains.tsv";
pub const RANK_FILE: &str = "rank.tsv";
pub const FUNDING_FILE: &str = "funding.tsv";
pub const OBSERVATIONS_FILE: &str = "observations.ndjson";
pub const MODELS_FILE: &str = "models.ndjson";
pub const MODELS_TABLE_FILE: &str = "models_table.tsv";
pub const EVAL_FILE: &str = "eval.json";
pub const SPEARMAN_FILE: &str = "spearman.json";
pub const REPORT_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const PIPELINE_CONFIG_FILE: &str = "pipeline.toml";

pub type Counts = BTreeMap<String, u64>;

pub type StageFn = fn(&PipelineConfig) -> Result<Counts, CliError>;

pub struct StageDef {
    pub name: &'static str,
    pub run: StageFn,
    pub outputs: &'static [&'static str],
}

/// The full pipeline, in execution order.
pub const STAGES: [StageDef; 14] = [
    StageDef {
        name: "ingest",
        run: stage_ingest,
        outputs: &[PAPERS_FILTERED_FILE],
    },
    StageDef {
        name: "index",
        run: stage_index,
        outputs: &[INDEX_FILE],
    },
    StageDef {
        name: "calibrate",
        run: stage_calibrate,
        outputs: &[NULL_MODEL_FILE],
    },
    StageDef {
        name: "match",
        run: stage_match,
        outputs: &[MATCH_LOG_FILE, MATCHED_EVENTS_FILE],
    },
    StageDef {
        name: "events",
        run: stage_events,
        outputs: &[EVENTS_COMBINED_FILE],
    },
    StageDef {
        name: "rci",
        run: stage_rci,
        outputs: &[RCI_LEVEL0_FILE, RCI_LEVEL1_FILE],
    },
    StageDef {
        name: "hits",
        run: stage_hits,
        outputs: &[HITS_FILE],
    },
    StageDef {
        name: "venn",
        run: stage_venn,
        outputs: &[VENN_FILE],
    },
    StageDef {
        name: "ternary",
        run: stage_ternary,
        outputs: &[TERNARY_FILE],
    },
    StageDef {
        name: "subdomains",
        run: stage_subdomains,
        outputs: &[SUBDOMAINS_FILE],
    },
    StageDef {
        name: "rank",
        run: stage_rank,
        outputs: &[RANK_FILE],
    },
    StageDef {
        name: "funding",
        run: stage_funding,
        outputs: &[FUNDING_FILE],
    },
    StageDef {
        name: "regress",
        run: stage_regress,
        outputs: &[OBSERVATIONS_FILE, MODELS_FILE, MODELS_TABLE_FILE],
    },
    StageDef {
        name: "report",
        run: stage_report,
        outputs: &[REPORT_FILE],
    },
];

fn counts<const N: usize>(pairs: [(&str, u64); N]) -> Counts {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn out_path(config: &PipelineConfig, name: &str) -> PathBuf {
    config.paths.out_dir.join(name)
}

pub(crate) fn require_artifact(
    config: &PipelineConfig,
    name: &str,
    producer: &'static str,
) -> Result<PathBuf, CliError> {
    let path = out_path(config, name);
    if !path.exists() {
        return Err(CliError::MissingArtifact {
            path: path.display().to_string(),
            producer,
        });
    }
    Ok(path)
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

/// Run a writer against a temporary sibling, then rename into place. The
/// rename makes each artifact appear all at once or not at all.
fn save_via_tmp(
    path: &Path,
    save: impl FnOnce(&Path) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let tmp = tmp_path(path);
    let result = save(&tmp).and_then(|()| fs::rename(&tmp, path).map_err(|e| CliError::io(path, e)));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    save_via_tmp(path, |tmp| fs::write(tmp, bytes).map_err(|e| CliError::io(tmp, e)))
}

fn ndjson_bytes<'a, T, I>(records: I) -> Vec<u8>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let mut out = Vec::new();
    for rec in records {
        serde_json::to_writer(&mut out, rec).expect("record serializes");
        out.push(b'\n');
    }
    out
}

fn pretty_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut body = serde_json::to_vec_pretty(value).expect("value serializes");
    body.push(b'\n');
    body
}

/// Exact dollars-and-cents rendering, e.g. `12345.67`.
pub(crate) fn money_str(m: Money) -> String {
    let cents = m.cents();
    let sign = if cents < 0 { "-" } else { "" };
    let cents = cents.abs();
    format!("{sign}{}.{:02}", cents / 100, cents % 100)
}

/// Inverse of [`money_str`]: cents of a `D.CC` rendering.
pub(crate) fn parse_money(s: &str) -> Option<i64> {
    let (whole, frac) = s.split_once('.')?;
    let (sign, whole) = match whole.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, whole),
    };
    if frac.len() != 2 {
        return None;
    }
    let dollars: i64 = whole.parse().ok()?;
    let cents: i64 = frac.parse().ok()?;
    Some(sign * (dollars * 100 + cents))
}

// Parsed tab-separated artifact with a header row.
pub(crate) struct Table {
    pub path: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub(crate) fn read_tsv(path: &Path) -> Result<Table, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let display = path.display().to_string();
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| CliError::BadTable {
            path: display.clone(),
            line: 1,
            detail: "empty table".into(),
        })?
        .split('\t')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<String> = line.split('\t').map(str::to_string).collect();
        if cells.len() != header.len() {
            return Err(CliError::BadTable {
                path: display,
                line: i + 2,
                detail: format!("expected {} cells, got {}", header.len(), cells.len()),
            });
        }
        rows.push(cells);
    }
    Ok(Table {
        path: display,
        header,
        rows,
    })
}

impl Table {
    pub(crate) fn col(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::BadTable {
                path: self.path.clone(),
                line: 1,
                detail: format!("no column named {name}"),
            })
    }

    /// An empty cell reads as `None`; anything else must parse.
    pub(crate) fn f64_cell(&self, row: usize, col: usize) -> Result<Option<f64>, CliError> {
        let cell = &self.rows[row][col];
        if cell.is_empty() {
            return Ok(None);
        }
        cell.parse().map(Some).map_err(|_| CliError::BadTable {
            path: self.path.clone(),
            line: row + 2,
            detail: format!("bad number {cell:?}"),
        })
    }

    pub(crate) fn u64_cell(&self, row: usize, col: usize) -> Result<u64, CliError> {
        let cell = &self.rows[row][col];
        cell.parse().map_err(|_| CliError::BadTable {
            path: self.path.clone(),
            line: row + 2,
            detail: format!("bad count {cell:?}"),
        })
    }
}

fn load_filtered(config: &PipelineConfig) -> Result<(FieldTaxonomy, PaperSet), CliError> {
    let taxonomy = load_taxonomy(&config.paths.taxonomy)?;
    let path = require_artifact(config, PAPERS_FILTERED_FILE, "index")?;
    let papers = load_papers(&path, Some(&taxonomy))?;
    Ok((taxonomy, papers))
}

fn load_events(config: &PipelineConfig, papers: &PaperSet) -> Result<EventSet, CliError> {
    let path = require_artifact(config, EVENTS_COMBINED_FILE, "rci")?;
    let records: Vec<ConsumptionEvent> = read_ndjson(&path)?;
    Ok(EventSet::from_records(records, papers))
}

pub fn stage_ingest(config: &PipelineConfig) -> Result<Counts, CliError> {
    let taxonomy = load_taxonomy(&config.paths.taxonomy)?;
    let papers = load_papers(&config.paths.papers, Some(&taxonomy))?;
    let filter = config.filter.corpus_filter();
    filter.validate()?;
    let kept = papers.filter(&filter);
    write_atomic(
        &out_path(config, PAPERS_FILTERED_FILE),
        &ndjson_bytes(kept.iter()),
    )?;
    Ok(counts([
        ("fields_level0", taxonomy.level0.len() as u64),
        ("fields_level1", taxonomy.level1.len() as u64),
        ("papers_in", papers.len() as u64),
        ("papers_kept", kept.len() as u64),
        ("papers_dropped", (papers.len() - kept.len()) as u64),
    ]))
}

pub fn stage_index(config: &PipelineConfig) -> Result<Counts, CliError> {
    let (_, papers) = load_filtered(config)?;
    let index = SearchIndex::build(&papers, config.matching.bm25())?;
    save_via_tmp(&out_path(config, INDEX_FILE), |tmp| {
        index.save(tmp).map_err(Into::into)
    })?;
    Ok(counts([("documents", index.num_docs() as u64)]))
}

pub fn stage_calibrate(config: &PipelineConfig) -> Result<Counts, CliError> {
    let index = SearchIndex::load(&require_artifact(config, INDEX_FILE, "index")?)?;
    let references = load_references(&config.paths.references)?;
    let observations = calibration_observations(&index, &references);
    let null = NullModel::fit(
        &observations,
        config.matching.bin_width,
        config.matching.min_bin_samples,
    )?;
    save_via_tmp(&out_path(config, NULL_MODEL_FILE), |tmp| {
        null.save(tmp).map_err(Into::into)
    })?;
    Ok(counts([
        ("references", references.len() as u64),
        ("bins", null.bins.len() as u64),
    ]))
}

pub fn stage_match(config: &PipelineConfig) -> Result<Counts, CliError> {
    let index = SearchIndex::load(&require_artifact(config, INDEX_FILE, "index")?)?;
    let null = NullModel::load(&require_artifact(config, NULL_MODEL_FILE, "calibrate")?)?;
    let references = load_references(&config.paths.references)?;
    let (events, log) = match_batch(&index, &references, &null, config.matching.z_threshold);
    write_atomic(&out_path(config, MATCH_LOG_FILE), &ndjson_bytes(log.iter()))?;
    write_atomic(
        &out_path(config, MATCHED_EVENTS_FILE),
        &ndjson_bytes(events.iter()),
    )?;
    Ok(counts([
        ("references", log.len() as u64),
        ("matched", events.len() as u64),
    ]))
}

/// Merge the events file with the events recovered by matching, validating
/// both against the filtered corpus and collapsing duplicates.
pub fn stage_events(config: &PipelineConfig) -> Result<Counts, CliError> {
    let (_, papers) = load_filtered(config)?;
    let mut records: Vec<ConsumptionEvent> = read_ndjson(&config.paths.events)?;
    let events_in = records.len() as u64;
    let matched_path = out_path(config, MATCHED_EVENTS_FILE);
    let events_matched_in = if matched_path.exists() {
        let matched: Vec<ConsumptionEvent> = read_ndjson(&matched_path)?;
        let n = matched.len() as u64;
        records.extend(matched);
        n
    } else {
        0
    };
    let set = EventSet::from_records(records, &papers);
    write_atomic(
        &out_path(config, EVENTS_COMBINED_FILE),
        &ndjson_bytes(set.events.iter()),
    )?;
    Ok(counts([
        ("events_in", events_in),
        ("events_matched_in", events_matched_in),
        ("events_retained", set.events.len() as u64),
        ("events_dropped_unresolved", set.dropped_unresolved),
        ("events_dropped_duplicate", set.dropped_duplicate),
    ]))
}

fn level_label(level: FieldLevel) -> &'static str {
    match level {
        FieldLevel::Zero => "0",
        FieldLevel::One => "1",
    }
}

fn rci_table_text(
    papers: &PaperSet,
    taxonomy: &FieldTaxonomy,
    level: FieldLevel,
    slices: &BTreeMap<Domain, Option<RciSlice>>,
) -> String {
    let mut field_papers: BTreeMap<FieldId, u64> = BTreeMap::new();
    for paper in papers.iter() {
        for f in fields_at_level(paper, taxonomy, level) {
            *field_papers.entry(f).or_insert(0) += 1;
        }
    }
    let mut out = String::from(
        "field_id\tpapers\tgovernment_consumed\tgovernment_rci\tnews_consumed\tnews_rci\tpatent_consumed\tpatent_rci\n",
    );
    for (field, n) in &field_papers {
        out.push_str(field.as_str());
        out.push_str(&format!("\t{n}"));
        for domain in Domain::ALL {
            match slices[&domain].as_ref().and_then(|s| s.entries.get(field)) {
                Some(entry) => out.push_str(&format!("\t{}\t{}", entry.consumed, entry.rci)),
                None => out.push_str("\t\t"),
            }
        }
        out.push('\n');
    }
    out
}

/// Relative consumption indices per field, one wide table per taxonomy
/// level. A domain with no consumed papers leaves its columns empty rather
/// than failing the stage.
pub fn stage_rci(config: &PipelineConfig) -> Result<Counts, CliError> {
    let (taxonomy, papers) = load_filtered(config)?;
    let events = load_events(config, &papers)?;
    let consumed = consumed_sets(&events);
    let mut undefined = 0u64;
    let mut fields_by_level = [0u64; 2];
    for (i, (level, file)) in [
        (FieldLevel::Zero, RCI_LEVEL0_FILE),
        (FieldLevel::One, RCI_LEVEL1_FILE),
    ]
    .into_iter()
    .enumerate()
    {
        let mut slices: BTreeMap<Domain, Option<RciSlice>> = BTreeMap::new();
        for domain in Domain::ALL {
            match compute_rci(
                &papers,
                &taxonomy,
                consumed.get(domain),
                domain,
                level,
                config.analysis.include_fieldless_in_totals,
            ) {
                Ok(slice) => {
                    slices.insert(domain, Some(slice));
                }
                Err(MetricsError::NoConsumption(_)) => {
                    eprintln!(
                        "note: no {} consumption at level {}, indices undefined",
                        domain.as_str(),
                        level_label(level)
                    );
                    slices.insert(domain, None);
                    undefined += 1;
                }
                Err(e) => return Err(e.into()),
            }
        }
        let text = rci_table_text(&papers, &taxonomy, level, &slices);
        fields_by_level[i] = text.lines().count() as u64 - 1;
        write_atomic(&out_path(config, file), text.as_bytes())?;
    }
    Ok(counts([
        ("fields_level0", fields_by_level[0]),
        ("fields_level1", fields_by_level[1]),
        (
            "consumed_government",
            consumed.get(Domain::Government).len() as u64,
        ),
        ("consumed_news", consumed.get(Domain::News).len() as u64),
        ("consumed_patent", consumed.get(Domain::Patent).len() as u64),
        ("undefined_domains", undefined),
    ]))
}

fn hit_rule_label(rule: HitRule) -> &'static str {
    match rule {
        HitRule::AnyField => "any_field",
        HitRule::AllField => "all_field",
    }
}

fn hit_row(out: &mut String, q: f64, rule: &str, label: &str, size: usize, overlap: usize) {
    let rate = if size > 0 {
        format!("{}", overlap as f64 / size as f64)
    } else {
        String::new()
    };
    out.push_str(&format!("{q}\t{rule}\t{label}\t{size}\t{overlap}\t{rate}\n"));
}

/// Share of highly cited papers overall and among each domain's consumed
/// set, for every configured percentile threshold.
pub fn stage_hits(config: &PipelineConfig) -> Result<Counts, CliError> {
    let (taxonomy, papers) = load_filtered(config)?;
    let events = load_events(config, &papers)?;
    let consumed = consumed_sets(&events);
    let table = citation_percentiles(&papers, &taxonomy, FieldLevel::One);
    let rule = config.analysis.hit_rule;
    let rule_label = hit_rule_label(rule);
    let union = consumed.union();
    let mut out = String::from("threshold\trule\tdomain\tpapers\thits\thit_rate\n");
    let mut stage_counts = counts([(
        "thresholds",
        config.analysis.hit_thresholds.len() as u64,
    )]);
    for &q in &config.analysis.hit_thresholds {
        let hits = hit_set(&table, q, rule)?;
        hit_row(&mut out, q, rule_label, "corpus", papers.len(), hits.len());
        hit_row(
            &mut out,
            q,
            rule_label,
            "union",
            union.len(),
            union.intersection(&hits).count(),
        );
        for domain in Domain::ALL {
            let subset = consumed.get(domain);
            hit_row(
                &mut out,
                q,
                rule_label,
                domain.as_str(),
                subset.len(),
                subset.intersection(&hits).count(),
            );
        }
        stage_counts.insert(format!("hits_q{q}"), hits.len() as u64);
    }
    write_atomic(&out_path(config, HITS_FILE), out.as_bytes())?;
    Ok(stage_counts)
}

/// Exclusive domain-combination counts over the consumed papers, with the
/// square-root column used for area-true plotting.
pub fn stage_venn(config: &PipelineConfig) -> Result<Counts, CliError> {
    let (_, papers) = load_filtered(config)?;
    let events = load_events(config, &papers)?;
    let sets = consumed_sets(&events);
    let vc = domain_intersections(&sets, &papers);
    let mut out = String::from("combination\tpapers\tsqrt_papers\n");
    for (i, combo) in VENN_COMBINATIONS.iter().enumerate() {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            combination_label(combo),
            vc.regions[i],
            (vc.regions[i] as f64).sqrt()
        ));
    }
    out.push_str(&format!(
        "none\t{}\t{}\n",
        vc.unconsumed,
        (vc.unconsumed as f64).sqrt()
    ));
    write_atomic(&out_path(config, VENN_FILE), out.as_bytes())?;
    Ok(counts([
        ("consumed_union", vc.consumed_total()),
        ("unconsumed", vc.unconsumed),
    ]))
}

/// Per-field simplex coordinates over the three domains' indices. Fields
/// with an undefined or all-zero index triple are skipped.
pub fn stage_ternary(config: &PipelineConfig) -> Result<Counts, CliError> {
    let table = read_tsv(&require_artifact(config, RCI_LEVEL1_FILE, "rci")?)?;
    let field_col = table.col("field_id")?;
    let gov_col = table.col("government_rci")?;
    let news_col = table.col("news_rci")?;
    let patent_col = table.col("patent_rci")?;
    let mut out = String::from("field_id\tshare_government\tshare_news\tshare_patent\n");
    let mut exported = 0u64;
    let mut skipped = 0u64;
    for row in 0..table.rows.len() {
        let gov = table.f64_cell(row, gov_col)?;
        let news = table.f64_cell(row, news_col)?;
        let patent = table.f64_cell(row, patent_col)?;
        let (Some(gov), Some(news), Some(patent)) = (gov, news, patent) else {
            skipped += 1;
            continue;
        };
        match ternary_coordinates(gov, news, patent) {
            Ok((a, b, c)) => {
                out.push_str(&format!("{}\t{a}\t{b}\t{c}\n", table.rows[row][field_col]));
                exported += 1;
            }
            Err(MetricsError::AllZero) => skipped += 1,
            Err(e) => return Err(e.into()),
        }
    }
    write_atomic(&out_path(config, TERNARY_FILE), out.as_bytes())?;
    Ok(counts([
        ("fields_exported", exported),
        ("fields_skipped", skipped),
    ]))
}

/// Consumption profile of every (domain, subdomain) pair: level-0 index
/// vector plus the hit rate of its consumed papers at the first configured
/// threshold.
pub fn stage_subdomains(config: &PipelineConfig) -> Result<Counts, CliError> {
    let (taxonomy, papers) = load_filtered(config)?;
    let events = load_events(config, &papers)?;
    let table = citation_percentiles(&papers, &taxonomy, FieldLevel::One);
    let q = config.analysis.hit_thresholds[0];
    let hits = hit_set(&table, q, config.analysis.hit_rule)?;
    let profiles = subdomain_profiles(
        &events,
        &papers,
        &taxonomy,
        FieldLevel::Zero,
        config.analysis.include_fieldless_in_totals,
        &hits,
    )?;
    let mut out = String::from(
        "domain\tsubdomain\tconsumed_papers\thit_rate\tfield_id\tfield_papers\tfield_consumed\tfield_rci\n",
    );
    let mut rows = 0u64;
    for profile in &profiles {
        for (field, entry) in &profile.rci.entries {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                profile.domain.as_str(),
                profile.subdomain,
                profile.consumed_papers,
                profile.hit_rate,
                field.as_str(),
                entry.papers,
                entry.consumed,
                entry.rci
            ));
            rows += 1;
        }
    }
    write_atomic(&out_path(config, SUBDOMAINS_FILE), out.as_bytes())?;
    Ok(counts([("profiles", profiles.len() as u64), ("rows", rows)]))
}

/// Fields ranked per domain, both by consumed-paper count and by index.
pub fn stage_rank(config: &PipelineConfig) -> Result<Counts, CliError> {
    let table = read_tsv(&require_artifact(config, RCI_LEVEL1_FILE, "rci")?)?;
    let field_col = table.col("field_id")?;
    let mut out = String::from("domain\tkey\trank\tfield_id\tvalue\n");
    let mut rows = 0u64;
    for domain in Domain::ALL {
        let consumed_col = table.col(&format!("{}_consumed", domain.as_str()))?;
        let rci_col = table.col(&format!("{}_rci", domain.as_str()))?;
        for (key, col) in [("consumed", consumed_col), ("rci", rci_col)] {
            let mut ranked: Vec<(String, f64)> = Vec::new();
            for row in 0..table.rows.len() {
                if let Some(value) = table.f64_cell(row, col)? {
                    ranked.push((table.rows[row][field_col].clone(), value));
                }
            }
            ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
            for (i, (field, value)) in ranked.iter().enumerate() {
                out.push_str(&format!(
                    "{}\t{}\t{}\t{}\t{}\n",
                    domain.as_str(),
                    key,
                    i + 1,
                    field,
                    value
                ));
                rows += 1;
            }
        }
    }
    write_atomic(&out_path(config, RANK_FILE), out.as_bytes())?;
    Ok(counts([("rows", rows)]))
}

/// Prorate every grant to the analysis window, split the money over fields
/// through linked publications, and total per field under the configured
/// funder filter.
pub fn stage_funding(config: &PipelineConfig) -> Result<Counts, CliError> {
    let (_, papers) = load_filtered(config)?;
    let grants = load_grants(&config.paths.grants, &papers, true)?;
    let window = config.window()?;
    let mut allocations = Vec::new();
    let mut outside_window = 0u64;
    let mut unallocatable = 0u64;
    let mut unallocated_cents = 0u64;
    let mut prorated_cents = 0u64;
    let mut allocated_cents = 0u64;
    for grant in &grants.grants {
        let amount = prorate_amount(grant, &window);
        if amount.cents() == 0 {
            outside_window += 1;
            continue;
        }
        match allocate_to_fields(grant, amount, &papers) {
            Ok(alloc) => {
                prorated_cents += amount.cents() as u64;
                allocated_cents += alloc
                    .field_shares
                    .values()
                    .map(|m| m.cents() as u64)
                    .sum::<u64>();
                allocations.push(alloc);
            }
            Err(FundingError::NoFieldedPublications(_)) => {
                unallocatable += 1;
                unallocated_cents += amount.cents() as u64;
            }
            Err(e) => return Err(e.into()),
        }
    }
    let funding = field_funding(&allocations, &papers, config.analysis.funder_class);
    let mut out = String::from("field_id\ttotal\tpapers\tper_paper\n");
    for (field, entry) in &funding.entries {
        let per_paper = entry.per_paper.map(money_str).unwrap_or_default();
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            field.as_str(),
            money_str(entry.total),
            entry.papers,
            per_paper
        ));
    }
    write_atomic(&out_path(config, FUNDING_FILE), out.as_bytes())?;
    Ok(counts([
        (
            "grants_in",
            grants.grants.len() as u64 + grants.dropped_unlinked,
        ),
        ("grants_kept", grants.grants.len() as u64),
        ("grants_dropped_unlinked", grants.dropped_unlinked),
        ("grants_unresolved_links", grants.unresolved_links),
        ("grants_outside_window", outside_window),
        ("grants_unallocatable", unallocatable),
        ("grants_allocated", allocations.len() as u64),
        ("prorated_cents", prorated_cents),
        ("allocated_cents", allocated_cents),
        ("unallocated_cents", unallocated_cents),
    ]))
}

/// Assemble per-field observations from the index and funding tables, then
/// estimate the configured models. A model that is not estimable on this
/// data is skipped with a note instead of failing the stage.
pub fn stage_regress(config: &PipelineConfig) -> Result<Counts, CliError> {
    let taxonomy = load_taxonomy(&config.paths.taxonomy)?;
    let rci = read_tsv(&require_artifact(config, RCI_LEVEL1_FILE, "rci")?)?;
    let funding = read_tsv(&require_artifact(config, FUNDING_FILE, "funding")?)?;
    let funding_field_col = funding.col("field_id")?;
    let per_paper_col = funding.col("per_paper")?;
    let mut per_paper: BTreeMap<String, f64> = BTreeMap::new();
    for row in 0..funding.rows.len() {
        let cell = &funding.rows[row][per_paper_col];
        if cell.is_empty() {
            continue;
        }
        let cents = parse_money(cell).ok_or_else(|| CliError::BadTable {
            path: funding.path.clone(),
            line: row + 2,
            detail: format!("bad amount {cell:?}"),
        })?;
        per_paper.insert(
            funding.rows[row][funding_field_col].clone(),
            cents as f64 / 100.0,
        );
    }
    let field_col = rci.col("field_id")?;
    let papers_col = rci.col("papers")?;
    let gov_col = rci.col("government_rci")?;
    let news_col = rci.col("news_rci")?;
    let patent_col = rci.col("patent_rci")?;
    let mut observations = Vec::with_capacity(rci.rows.len());
    for row in 0..rci.rows.len() {
        let field = &rci.rows[row][field_col];
        // an undefined index reads as zero; the zero guard maps it to ln 1
        // during design construction
        observations.push(FieldObservation {
            field_id: FieldId::from(field.as_str()),
            rci_government: rci.f64_cell(row, gov_col)?.unwrap_or(0.0),
            rci_news: rci.f64_cell(row, news_col)?.unwrap_or(0.0),
            rci_patent: rci.f64_cell(row, patent_col)?.unwrap_or(0.0),
            paper_count: rci.u64_cell(row, papers_col)?,
            funding_per_paper: per_paper.get(field).copied().unwrap_or(0.0),
        });
    }
    write_atomic(
        &out_path(config, OBSERVATIONS_FILE),
        &ndjson_bytes(observations.iter()),
    )?;
    let mut fits = Vec::new();
    let mut failed = 0u64;
    for &m in &config.analysis.models {
        match fit_model(m, &observations, &taxonomy) {
            Ok(fit) => fits.push(fit),
            Err(e) => {
                eprintln!("note: model {m} not estimable: {e}");
                failed += 1;
            }
        }
    }
    write_atomic(&out_path(config, MODELS_FILE), &ndjson_bytes(fits.iter()))?;
    let table_text = if fits.is_empty() {
        "no estimable models\n".to_string()
    } else {
        format_models_table(&fits)
    };
    write_atomic(&out_path(config, MODELS_TABLE_FILE), table_text.as_bytes())?;
    Ok(counts([
        ("observations", observations.len() as u64),
        ("models_fitted", fits.len() as u64),
        ("models_failed", failed),
    ]))
}

pub fn stage_report(config: &PipelineConfig) -> Result<Counts, CliError> {
    let (text, sections) = crate::report::emit_report(config)?;
    write_atomic(&out_path(config, REPORT_FILE), text.as_bytes())?;
    Ok(counts([("sections", sections)]))
}

/// Run a named subset of the pipeline in declared order, cleaning up the
/// failing stage's outputs on error.
pub fn run_stages(
    config: &PipelineConfig,
    names: &[&str],
) -> Result<Vec<StageRecord>, CliError> {
    fs::create_dir_all(&config.paths.out_dir)
        .map_err(|e| CliError::io(&config.paths.out_dir, e))?;
    let mut records = Vec::new();
    for name in names {
        let def = STAGES
            .iter()
            .find(|d| d.name == *name)
            .unwrap_or_else(|| panic!("unknown stage {name}"));
        match (def.run)(config) {
            Ok(stage_counts) => records.push(StageRecord {
                stage: def.name.to_string(),
                counts: stage_counts,
            }),
            Err(e) => {
                for output in def.outputs {
                    let path = out_path(config, output);
                    let _ = fs::remove_file(tmp_path(&path));
                    let _ = fs::remove_file(path);
                }
                return Err(CliError::stage(def.name, e));
            }
        }
    }
    Ok(records)
}

/// Run every stage and record the manifest. Identical config and inputs
/// produce byte-identical artifacts; only the manifest's timestamp differs
/// between reruns.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunManifest, CliError> {
    let names: Vec<&str> = STAGES.iter().map(|d| d.name).collect();
    let stages = run_stages(config, &names)?;
    let mut outputs = BTreeMap::new();
    for def in &STAGES {
        for output in def.outputs {
            outputs.insert(
                output.to_string(),
                sha256_file(&out_path(config, output))?,
            );
        }
    }
    let mut inputs = BTreeMap::new();
    for (label, path) in [
        ("taxonomy", &config.paths.taxonomy),
        ("papers", &config.paths.papers),
        ("events", &config.paths.events),
        ("grants", &config.paths.grants),
        ("references", &config.paths.references),
    ] {
        inputs.insert(label.to_string(), sha256_file(path)?);
    }
    let manifest = RunManifest {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        created_utc: chrono::Utc::now()
            .format("%Y-%m-%dT%H:%M:%SZ")
            .to_string(),
        config: config.clone(),
        inputs,
        stages,
        outputs,
    };
    write_atomic(&out_path(config, MANIFEST_FILE), &pretty_json(&manifest))?;
    Ok(manifest)
}

/// Score the match log against its gold labels and write the summary.
pub fn eval_match(config: &PipelineConfig) -> Result<MatchEvaluation, CliError> {
    let path = require_artifact(config, MATCH_LOG_FILE, "match")?;
    let log: Vec<MatchLogEntry> = read_ndjson(&path)?;
    let eval = evaluate_matching(&log)?;
    fs::create_dir_all(&config.paths.out_dir)
        .map_err(|e| CliError::io(&config.paths.out_dir, e))?;
    write_atomic(&out_path(config, EVAL_FILE), &pretty_json(&eval))?;
    Ok(eval)
}

/// Rank-correlate two keyed value files over their shared keys. Each file
/// is tab-separated `key<TAB>value`; a non-numeric first line is treated as
/// a header.
pub fn spearman_from_files(a: &Path, b: &Path) -> Result<SpearmanResult, CliError> {
    let left = read_keyed_values(a)?;
    let right = read_keyed_values(b)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (key, value) in &left {
        if let Some(other) = right.get(key) {
            xs.push(*value);
            ys.push(*other);
        }
    }
    Ok(spearman(&xs, &ys)?)
}

pub fn write_spearman(config: &PipelineConfig, result: &SpearmanResult) -> Result<(), CliError> {
    fs::create_dir_all(&config.paths.out_dir)
        .map_err(|e| CliError::io(&config.paths.out_dir, e))?;
    write_atomic(&out_path(config, SPEARMAN_FILE), &pretty_json(result))
}

fn read_keyed_values(path: &Path) -> Result<BTreeMap<String, f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let display = path.display().to_string();
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('\t') else {
            return Err(CliError::BadTable {
                path: display,
                line: i + 1,
                detail: "expected key<TAB>value".into(),
            });
        };
        match value.trim().parse::<f64>() {
            Ok(v) => {
                if map.insert(key.to_string(), v).is_some() {
                    return Err(CliError::BadTable {
                        path: display,
                        line: i + 1,
                        detail: format!("duplicate key {key:?}"),
                    });
                }
            }
            // the first line may be a header
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(CliError::BadTable {
                    path: display,
                    line: i + 1,
                    detail: format!("bad number {value:?}"),
                });
            }
        }
    }
    if map.is_empty() {
        return Err(CliError::BadTable {
            path: display,
            line: 1,
            detail: "no numeric rows".into(),
        });
    }
    Ok(map)
}

/// Generate a fixture into `dir` along with a ready-to-run `pipeline.toml`
/// whose filter and funding window match the fixture's year window.
pub fn write_fixture_set(spec: &FixtureSpec, dir: &Path) -> Result<Fixture, CliError> {
    let fixture = generate_fixture(spec)?;
    write_fixture(&fixture, dir)?;
    let mut config = PipelineConfig::for_fixture_dir(spec.seed);
    config.filter.year_start = spec.year_window.0;
    config.filter.year_end = spec.year_window.1;
    config.analysis.window_start = chrono::NaiveDate::from_ymd_opt(spec.year_window.0, 1, 1)
        .expect("in-range year");
    config.analysis.window_end =
        chrono::NaiveDate::from_ymd_opt(spec.year_window.1, 12, 31).expect("in-range year");
    write_atomic(&dir.join(PIPELINE_CONFIG_FILE), config.to_toml().as_bytes())?;
    Ok(fixture)
}
