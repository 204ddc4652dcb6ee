//! Plain-text run summary assembled from the artifact files.
//!
//! The report is a reader, not a recomputer: every number comes from a file
//! some stage already wrote, so the summary always agrees with the
//! artifacts it sits next to.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use pubsci_core::corpus::io::read_ndjson;
use pubsci_core::funding::FunderFilter;
use pubsci_core::refmatch::MatchLogEntry;
use pubsci_core::{ConsumptionEvent, Domain, Money};

use crate::config::PipelineConfig;
use crate::stages::{
    parse_money, read_tsv, require_artifact, EVENTS_COMBINED_FILE, FUNDING_FILE, HITS_FILE,
    MATCH_LOG_FILE, MODELS_TABLE_FILE, PAPERS_FILTERED_FILE, RANK_FILE, SUBDOMAINS_FILE,
    TERNARY_FILE, VENN_FILE,
};
use crate::CliError;

/// Build the report text; returns it with the number of sections.
pub fn emit_report(config: &PipelineConfig) -> Result<(String, u64), CliError> {
    let mut out = String::from("consumption analytics report\n============================\n");
    let mut sections = 0u64;
    for text in [
        corpus_section(config)?,
        matching_section(config)?,
        consumption_section(config)?,
        hits_section(config)?,
        venn_section(config)?,
        ternary_section(config)?,
        subdomains_section(config)?,
        leading_fields_section(config)?,
        funding_section(config)?,
        models_section(config)?,
    ] {
        out.push('\n');
        out.push_str(&text);
        sections += 1;
    }
    Ok((out, sections))
}

fn count_lines(path: &Path) -> Result<u64, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Ok(text.lines().filter(|l| !l.is_empty()).count() as u64)
}

fn corpus_section(config: &PipelineConfig) -> Result<String, CliError> {
    let papers = count_lines(&require_artifact(config, PAPERS_FILTERED_FILE, "index")?)?;
    Ok(format!(
        "corpus\n  publication window: {}..{}\n  papers in analysis corpus: {}\n",
        config.filter.year_start, config.filter.year_end, papers
    ))
}

fn matching_section(config: &PipelineConfig) -> Result<String, CliError> {
    let log: Vec<MatchLogEntry> =
        read_ndjson(&require_artifact(config, MATCH_LOG_FILE, "match")?)?;
    let matched = log.iter().filter(|e| e.matched).count();
    let share = if log.is_empty() {
        0.0
    } else {
        matched as f64 / log.len() as f64 * 100.0
    };
    Ok(format!(
        "reference matching\n  references scored: {}\n  accepted matches: {} ({:.1}%)\n  acceptance threshold: z >= {}\n",
        log.len(),
        matched,
        share,
        config.matching.z_threshold
    ))
}

fn consumption_section(config: &PipelineConfig) -> Result<String, CliError> {
    let events: Vec<ConsumptionEvent> =
        read_ndjson(&require_artifact(config, EVENTS_COMBINED_FILE, "rci")?)?;
    let mut by_domain: BTreeMap<Domain, (u64, BTreeSet<&str>)> = BTreeMap::new();
    for event in &events {
        let entry = by_domain.entry(event.domain).or_default();
        entry.0 += 1;
        entry.1.insert(event.paper_id.as_str());
    }
    let mut out = format!("consumption events\n  total: {}\n", events.len());
    for domain in Domain::ALL {
        let (n, papers) = by_domain
            .get(&domain)
            .map(|(n, p)| (*n, p.len()))
            .unwrap_or((0, 0));
        out.push_str(&format!(
            "  {}: {} events over {} papers\n",
            domain.as_str(),
            n,
            papers
        ));
    }
    Ok(out)
}

fn hits_section(config: &PipelineConfig) -> Result<String, CliError> {
    let table = read_tsv(&require_artifact(config, HITS_FILE, "hits")?)?;
    let threshold_col = table.col("threshold")?;
    let domain_col = table.col("domain")?;
    let rate_col = table.col("hit_rate")?;
    let mut out = String::from("hit rates (top-cited share within field and year)\n");
    let mut current: Option<&str> = None;
    let mut line = String::new();
    for row in 0..table.rows.len() {
        let threshold = table.rows[row][threshold_col].as_str();
        if current != Some(threshold) {
            if !line.is_empty() {
                out.push_str(&line);
                out.push('\n');
            }
            line = format!("  q={threshold}:");
            current = Some(threshold);
        }
        let rate = match table.f64_cell(row, rate_col)? {
            Some(r) => format!("{:.1}%", r * 100.0),
            None => "n/a".to_string(),
        };
        line.push_str(&format!(" {} {}", table.rows[row][domain_col], rate));
    }
    if !line.is_empty() {
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

fn venn_section(config: &PipelineConfig) -> Result<String, CliError> {
    let table = read_tsv(&require_artifact(config, VENN_FILE, "venn")?)?;
    let combo_col = table.col("combination")?;
    let papers_col = table.col("papers")?;
    let sqrt_col = table.col("sqrt_papers")?;
    let mut out = String::from("domain intersections (sqrt scale for area-true plots)\n");
    out.push_str(&format!(
        "  {:<28} {:>10} {:>8}\n",
        "combination", "papers", "sqrt"
    ));
    for row in 0..table.rows.len() {
        let sqrt = table.f64_cell(row, sqrt_col)?.unwrap_or(0.0);
        out.push_str(&format!(
            "  {:<28} {:>10} {:>8.2}\n",
            table.rows[row][combo_col],
            table.rows[row][papers_col],
            sqrt
        ));
    }
    Ok(out)
}

fn ternary_section(config: &PipelineConfig) -> Result<String, CliError> {
    let table = read_tsv(&require_artifact(config, TERNARY_FILE, "ternary")?)?;
    Ok(format!(
        "simplex coordinates\n  fields with all three indices: {}\n  each row splits a field's indices into three domain shares summing to 1\n",
        table.rows.len()
    ))
}

fn subdomains_section(config: &PipelineConfig) -> Result<String, CliError> {
    let table = read_tsv(&require_artifact(config, SUBDOMAINS_FILE, "subdomains")?)?;
    let domain_col = table.col("domain")?;
    let subdomain_col = table.col("subdomain")?;
    let mut per_domain: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for row in &table.rows {
        per_domain
            .entry(row[domain_col].as_str())
            .or_default()
            .insert(row[subdomain_col].as_str());
    }
    let mut out = String::from("subdomain profiles\n");
    if per_domain.is_empty() {
        out.push_str("  none recorded\n");
    }
    for domain in Domain::ALL {
        if let Some(subs) = per_domain.get(domain.as_str()) {
            out.push_str(&format!(
                "  {}: {} subdomains profiled\n",
                domain.as_str(),
                subs.len()
            ));
        }
    }
    Ok(out)
}

fn leading_fields_section(config: &PipelineConfig) -> Result<String, CliError> {
    let table = read_tsv(&require_artifact(config, RANK_FILE, "rank")?)?;
    let domain_col = table.col("domain")?;
    let key_col = table.col("key")?;
    let rank_col = table.col("rank")?;
    let field_col = table.col("field_id")?;
    let value_col = table.col("value")?;
    let mut out = String::from("leading fields by index\n");
    for domain in Domain::ALL {
        let mut entries = Vec::new();
        for row in 0..table.rows.len() {
            if table.rows[row][domain_col] == domain.as_str()
                && table.rows[row][key_col] == "rci"
                && table.u64_cell(row, rank_col)? <= 5
            {
                let value = table.f64_cell(row, value_col)?.unwrap_or(0.0);
                entries.push(format!("{} ({:.2})", table.rows[row][field_col], value));
            }
        }
        if entries.is_empty() {
            out.push_str(&format!("  {}: none\n", domain.as_str()));
        } else {
            out.push_str(&format!("  {}: {}\n", domain.as_str(), entries.join(", ")));
        }
    }
    Ok(out)
}

fn funding_section(config: &PipelineConfig) -> Result<String, CliError> {
    let table = read_tsv(&require_artifact(config, FUNDING_FILE, "funding")?)?;
    let field_col = table.col("field_id")?;
    let total_col = table.col("total")?;
    let mut totals: Vec<(&str, i64)> = Vec::new();
    for row in 0..table.rows.len() {
        let cell = &table.rows[row][total_col];
        let cents = parse_money(cell).ok_or_else(|| CliError::BadTable {
            path: table.path.clone(),
            line: row + 2,
            detail: format!("bad amount {cell:?}"),
        })?;
        totals.push((table.rows[row][field_col].as_str(), cents));
    }
    let grand: i64 = totals.iter().map(|(_, c)| c).sum();
    let class = match config.analysis.funder_class {
        FunderFilter::Government => "government funders",
        FunderFilter::All => "all funders",
    };
    totals.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let top: Vec<String> = totals
        .iter()
        .take(3)
        .map(|(f, c)| format!("{f} (${})", crate::stages::money_str(Money::from_cents(*c))))
        .collect();
    let mut out = format!(
        "funding ({class})\n  fields with funding: {}\n  total allocated in window: ${}\n",
        totals.len(),
        crate::stages::money_str(Money::from_cents(grand))
    );
    if !top.is_empty() {
        out.push_str(&format!("  largest fields: {}\n", top.join(", ")));
    }
    Ok(out)
}

fn models_section(config: &PipelineConfig) -> Result<String, CliError> {
    let path = require_artifact(config, MODELS_TABLE_FILE, "regress")?;
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(format!("estimates\n{text}"))
}
