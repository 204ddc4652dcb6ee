//! Pipeline configuration: one TOML file naming every input, the output
//! directory, and the analysis knobs. Omitted keys fall back to the standard
//! analysis setup, so a minimal config is just the `[paths]` table.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use pubsci_core::funding::{DateWindow, FunderFilter};
use pubsci_core::metrics::HitRule;
use pubsci_core::refmatch::null::{DEFAULT_BIN_WIDTH, DEFAULT_MIN_BIN_SAMPLES};
use pubsci_core::refmatch::{Bm25Params, NUM_FIELDS, Z_DEFAULT};
use pubsci_core::regress::model_spec;
use pubsci_core::{CorpusFilter, DocCategory};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Seed for fixture generation; the analysis stages are deterministic
    /// functions of their input files and never draw randomness.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub paths: PathsConfig,
    #[serde(default)]
    pub filter: FilterConfig,
    #[serde(default, rename = "match")]
    pub matching: MatchConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    pub taxonomy: PathBuf,
    pub papers: PathBuf,
    pub events: PathBuf,
    pub grants: PathBuf,
    pub references: PathBuf,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterConfig {
    #[serde(default = "default_year_start")]
    pub year_start: i32,
    #[serde(default = "default_year_end")]
    pub year_end: i32,
    #[serde(default = "default_doc_categories")]
    pub doc_categories: BTreeSet<DocCategory>,
    #[serde(default = "default_true")]
    pub require_doi_if_uncategorized: bool,
    #[serde(default)]
    pub english_only: bool,
    #[serde(default)]
    pub us_affiliation_only: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchConfig {
    #[serde(default = "default_k1")]
    pub k1: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_field_weights")]
    pub field_weights: [f64; NUM_FIELDS],
    #[serde(default = "default_z_threshold")]
    pub z_threshold: f64,
    #[serde(default = "default_bin_width")]
    pub bin_width: u32,
    #[serde(default = "default_min_bin_samples")]
    pub min_bin_samples: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Funding proration window; dates are quoted ISO strings in the TOML.
    #[serde(default = "default_window_start")]
    pub window_start: NaiveDate,
    #[serde(default = "default_window_end")]
    pub window_end: NaiveDate,
    /// Citation-percentile cutoffs; the first one also feeds the subdomain
    /// profiles.
    #[serde(default = "default_hit_thresholds")]
    pub hit_thresholds: Vec<f64>,
    #[serde(default = "default_hit_rule")]
    pub hit_rule: HitRule,
    #[serde(default = "default_funder_class")]
    pub funder_class: FunderFilter,
    #[serde(default = "default_models")]
    pub models: Vec<u32>,
    #[serde(default)]
    pub include_fieldless_in_totals: bool,
}

fn default_seed() -> u64 {
    42
}

fn default_year_start() -> i32 {
    2005
}

fn default_year_end() -> i32 {
    2014
}

fn default_doc_categories() -> BTreeSet<DocCategory> {
    CorpusFilter::standard().allowed_doc_categories
}

fn default_true() -> bool {
    true
}

fn default_k1() -> f64 {
    Bm25Params::default().k1
}

fn default_b() -> f64 {
    Bm25Params::default().b
}

fn default_field_weights() -> [f64; NUM_FIELDS] {
    Bm25Params::default().field_weights
}

fn default_z_threshold() -> f64 {
    Z_DEFAULT
}

fn default_bin_width() -> u32 {
    DEFAULT_BIN_WIDTH
}

fn default_min_bin_samples() -> u32 {
    DEFAULT_MIN_BIN_SAMPLES
}

fn default_window_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2005, 1, 1).expect("valid date")
}

fn default_window_end() -> NaiveDate {
    NaiveDate::from_ymd_opt(2014, 12, 31).expect("valid date")
}

fn default_hit_thresholds() -> Vec<f64> {
    vec![0.01, 0.05, 0.10]
}

fn default_hit_rule() -> HitRule {
    HitRule::AnyField
}

fn default_funder_class() -> FunderFilter {
    FunderFilter::Government
}

fn default_models() -> Vec<u32> {
    (1..=8).collect()
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            year_start: default_year_start(),
            year_end: default_year_end(),
            doc_categories: default_doc_categories(),
            require_doi_if_uncategorized: true,
            english_only: false,
            us_affiliation_only: false,
        }
    }
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            k1: default_k1(),
            b: default_b(),
            field_weights: default_field_weights(),
            z_threshold: default_z_threshold(),
            bin_width: default_bin_width(),
            min_bin_samples: default_min_bin_samples(),
        }
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            window_start: default_window_start(),
            window_end: default_window_end(),
            hit_thresholds: default_hit_thresholds(),
            hit_rule: default_hit_rule(),
            funder_class: default_funder_class(),
            models: default_models(),
            include_fieldless_in_totals: false,
        }
    }
}

impl FilterConfig {
    pub fn corpus_filter(&self) -> CorpusFilter {
        CorpusFilter {
            year_window: (self.year_start, self.year_end),
            allowed_doc_categories: self.doc_categories.clone(),
            require_doi_if_uncategorized: self.require_doi_if_uncategorized,
            english_only: self.english_only,
            us_affiliation_only: self.us_affiliation_only,
        }
    }
}

impl MatchConfig {
    pub fn bm25(&self) -> Bm25Params {
        Bm25Params {
            k1: self.k1,
            b: self.b,
            field_weights: self.field_weights,
        }
    }
}

impl PipelineConfig {
    /// Read a config file, resolve its relative paths against the file's own
    /// directory, and validate.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut config: PipelineConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.paths.taxonomy,
            &mut self.paths.papers,
            &mut self.paths.events,
            &mut self.paths.grants,
            &mut self.paths.references,
            &mut self.paths.out_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let paths = [
            &self.paths.taxonomy,
            &self.paths.papers,
            &self.paths.events,
            &self.paths.grants,
            &self.paths.references,
            &self.paths.out_dir,
        ];
        let distinct: BTreeSet<&Path> = paths.iter().map(|p| p.as_path()).collect();
        if distinct.len() != paths.len() {
            return Err(CliError::Config(
                "input and output paths must be pairwise distinct".into(),
            ));
        }
        self.filter.corpus_filter().validate()?;
        self.matching.bm25().validate()?;
        if !self.matching.z_threshold.is_finite() {
            return Err(CliError::Config(format!(
                "z_threshold must be finite, got {}",
                self.matching.z_threshold
            )));
        }
        self.window()?;
        if self.analysis.hit_thresholds.is_empty() {
            return Err(CliError::Config("hit_thresholds must not be empty".into()));
        }
        for q in &self.analysis.hit_thresholds {
            if !(*q > 0.0 && *q < 1.0) {
                return Err(CliError::Config(format!(
                    "hit threshold {q} outside (0, 1)"
                )));
            }
        }
        if self.analysis.models.is_empty() {
            return Err(CliError::Config("models must not be empty".into()));
        }
        for m in &self.analysis.models {
            if model_spec(*m).is_none() {
                return Err(CliError::Config(format!("unknown model number {m}")));
            }
        }
        Ok(())
    }

    pub fn window(&self) -> Result<DateWindow, CliError> {
        Ok(DateWindow::new(
            self.analysis.window_start,
            self.analysis.window_end,
        )?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// A ready-to-run config for a directory holding a generated fixture,
    /// with paths relative to that directory.
    pub fn for_fixture_dir(seed: u64) -> PipelineConfig {
        use pubsci_core::fixture;
        PipelineConfig {
            seed,
            paths: PathsConfig {
                taxonomy: PathBuf::from(fixture::TAXONOMY_FILE),
                papers: PathBuf::from(fixture::PAPERS_FILE),
                events: PathBuf::from(fixture::EVENTS_FILE),
                grants: PathBuf::from(fixture::GRANTS_FILE),
                references: PathBuf::from(fixture::REFERENCES_FILE),
                out_dir: PathBuf::from("out"),
            },
            filter: FilterConfig::default(),
            matching: MatchConfig::default(),
            analysis: AnalysisConfig::default(),
        }
    }
}

/// Parse a model selection like `7`, `1-8`, or `1,3,5-7` into a sorted,
/// deduplicated list.
pub fn parse_models(s: &str) -> Result<Vec<u32>, String> {
    let mut models = BTreeSet::new();
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            return Err(format!("empty element in model list {s:?}"));
        }
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: u32 = lo.trim().parse().map_err(|_| format!("bad model number {lo:?}"))?;
                let hi: u32 = hi.trim().parse().map_err(|_| format!("bad model number {hi:?}"))?;
                if lo > hi {
                    return Err(format!("inverted model range {part:?}"));
                }
                models.extend(lo..=hi);
            }
            None => {
                models.insert(part.parse().map_err(|_| format!("bad model number {part:?}"))?);
            }
        }
    }
    for m in &models {
        if model_spec(*m).is_none() {
            return Err(format!("unknown model number {m}"));
        }
    }
    Ok(models.into_iter().collect())
}

/// Parse a date window like `2005-01-01..2014-12-31`; bare years expand to
/// the full year, so `2005..2014` means 2005-01-01 through 2014-12-31.
pub fn parse_window(s: &str) -> Result<(NaiveDate, NaiveDate), String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("window {s:?} must look like START..END"))?;
    let start = parse_window_edge(a.trim(), false)?;
    let end = parse_window_edge(b.trim(), true)?;
    if start > end {
        return Err(format!("window start {start} is after end {end}"));
    }
    Ok((start, end))
}

fn parse_window_edge(s: &str, is_end: bool) -> Result<NaiveDate, String> {
    if let Ok(date) = s.parse::<NaiveDate>() {
        return Ok(date);
    }
    let year: i32 = s
        .parse()
        .map_err(|_| format!("bad window edge {s:?}, want a date or a year"))?;
    let date = if is_end {
        NaiveDate::from_ymd_opt(year, 12, 31)
    } else {
        NaiveDate::from_ymd_opt(year, 1, 1)
    };
    date.ok_or_else(|| format!("year {year} out of range"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> &'static str {
        "[paths]\n\
         taxonomy = \"taxonomy.ndjson\"\n\
         papers = \"papers.ndjson\"\n\
         events = \"events.ndjson\"\n\
         grants = \"grants.ndjson\"\n\
         references = \"references.ndjson\"\n\
         out_dir = \"out\"\n"
    }

    #[test]
    fn defaults_survive_a_toml_round_trip() {
        let config = PipelineConfig::for_fixture_dir(7);
        let text = config.to_toml();
        let back: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn minimal_config_gets_the_standard_defaults() {
        let config: PipelineConfig = toml::from_str(minimal_toml()).unwrap();
        assert_eq!(config.seed, 42);
        assert_eq!(config.filter.year_start, 2005);
        assert_eq!(config.filter.year_end, 2014);
        assert!(config.filter.require_doi_if_uncategorized);
        assert_eq!(config.matching.k1, 1.2);
        assert_eq!(config.matching.z_threshold, 2.0);
        assert_eq!(config.analysis.hit_thresholds, vec![0.01, 0.05, 0.10]);
        assert_eq!(config.analysis.models, (1..=8).collect::<Vec<_>>());
        assert_eq!(config.analysis.funder_class, FunderFilter::Government);
        assert_eq!(
            config.analysis.window_start,
            NaiveDate::from_ymd_opt(2005, 1, 1).unwrap()
        );
    }

    #[test]
    fn partial_section_keeps_other_defaults() {
        let text = format!("{}\n[filter]\nyear_start = 2000\n", minimal_toml());
        let config: PipelineConfig = toml::from_str(&text).unwrap();
        assert_eq!(config.filter.year_start, 2000);
        assert_eq!(config.filter.year_end, 2014);
        assert!(config.filter.require_doi_if_uncategorized);
    }

    #[test]
    fn relative_paths_resolve_against_the_config_directory() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pipeline.toml");
        fs::write(&path, minimal_toml()).unwrap();
        let config = PipelineConfig::load(&path).unwrap();
        assert_eq!(config.paths.taxonomy, dir.path().join("taxonomy.ndjson"));
        assert_eq!(config.paths.out_dir, dir.path().join("out"));
    }

    #[test]
    fn duplicate_paths_are_rejected() {
        let mut config = PipelineConfig::for_fixture_dir(1);
        config.paths.events = config.paths.papers.clone();
        let err = config.validate().unwrap_err();
        assert!(err.to_string().contains("distinct"), "got: {err}");
    }

    #[test]
    fn out_of_range_threshold_is_rejected() {
        let mut config = PipelineConfig::for_fixture_dir(1);
        config.analysis.hit_thresholds = vec![0.05, 1.0];
        assert!(config.validate().is_err());
    }

    #[test]
    fn unknown_model_is_rejected() {
        let mut config = PipelineConfig::for_fixture_dir(1);
        config.analysis.models = vec![1, 9];
        assert!(config.validate().is_err());
    }

    #[test]
    fn inverted_year_window_is_rejected() {
        let mut config = PipelineConfig::for_fixture_dir(1);
        config.filter.year_start = 2015;
        assert!(config.validate().is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = format!("{}\ntypo_key = 1\n", minimal_toml());
        assert!(toml::from_str::<PipelineConfig>(&text).is_err());
    }

    #[test]
    fn parse_models_accepts_ranges_and_lists() {
        assert_eq!(parse_models("7").unwrap(), vec![7]);
        assert_eq!(parse_models("1-3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_models("1,3,5-7").unwrap(), vec![1, 3, 5, 6, 7]);
        assert_eq!(parse_models("2,1-2").unwrap(), vec![1, 2]);
        assert!(parse_models("3-1").is_err());
        assert!(parse_models("0").is_err());
        assert!(parse_models("9").is_err());
        assert!(parse_models("").is_err());
    }

    #[test]
    fn parse_window_accepts_dates_and_years() {
        let (s, e) = parse_window("2005-01-01..2014-12-31").unwrap();
        assert_eq!(s, NaiveDate::from_ymd_opt(2005, 1, 1).unwrap());
        assert_eq!(e, NaiveDate::from_ymd_opt(2014, 12, 31).unwrap());
        assert_eq!(parse_window("2005..2014").unwrap(), (s, e));
        let (s2, e2) = parse_window("2010..2010-06-30").unwrap();
        assert_eq!(s2, NaiveDate::from_ymd_opt(2010, 1, 1).unwrap());
        assert_eq!(e2, NaiveDate::from_ymd_opt(2010, 6, 30).unwrap());
        assert!(parse_window("2014..2005").is_err());
        assert!(parse_window("2005").is_err());
    }
}
