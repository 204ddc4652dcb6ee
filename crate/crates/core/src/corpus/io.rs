//! Newline-delimited JSON readers and writers for the corpus files.
//!
//! Every input file holds one JSON object per line. Parse failures are
//! reported with the path and 1-based line number.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    ConsumptionEvent, CorpusError, EventSet, FieldId, FieldTaxonomy, Grant, GrantSet, Paper,
    PaperSet, ReferenceRecord,
};

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Read a whole NDJSON file into memory. Blank lines are skipped.
pub fn read_ndjson<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            source: e,
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Write records as NDJSON, one object per line, in iteration order.
pub fn write_ndjson<'a, T, I>(path: &Path, records: I) -> Result<(), CorpusError>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        let line = serde_json::to_string(record).map_err(|e| CorpusError::Parse {
            path: path.display().to_string(),
            line: 0,
            source: e,
        })?;
        writer.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
        writer.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

/// One line of the taxonomy file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaxonomyRecord {
    pub field_id: FieldId,
    pub level: u8,
    /// Level-0 parents; required (nonempty) for level-1 records.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parents: Vec<FieldId>,
}

pub fn load_taxonomy(path: &Path) -> Result<FieldTaxonomy, CorpusError> {
    let records: Vec<TaxonomyRecord> = read_ndjson(path)?;
    let mut level0 = std::collections::BTreeSet::new();
    let mut parents = std::collections::BTreeMap::new();
    for rec in records {
        match rec.level {
            0 => {
                if !level0.insert(rec.field_id.clone()) {
                    return Err(CorpusError::DuplicateField(rec.field_id));
                }
            }
            _ => {
                if parents
                    .insert(rec.field_id.clone(), rec.parents.into_iter().collect())
                    .is_some()
                {
                    return Err(CorpusError::DuplicateField(rec.field_id));
                }
            }
        }
    }
    FieldTaxonomy::new(level0, parents)
}

pub fn load_papers(path: &Path, taxonomy: Option<&FieldTaxonomy>) -> Result<PaperSet, CorpusError> {
    let records: Vec<Paper> = read_ndjson(path)?;
    PaperSet::from_records(records, taxonomy)
}

pub fn load_consumption(path: &Path, papers: &PaperSet) -> Result<EventSet, CorpusError> {
    let records: Vec<ConsumptionEvent> = read_ndjson(path)?;
    Ok(EventSet::from_records(records, papers))
}

pub fn load_grants(
    path: &Path,
    papers: &PaperSet,
    require_link: bool,
) -> Result<GrantSet, CorpusError> {
    let records: Vec<Grant> = read_ndjson(path)?;
    GrantSet::from_records(records, papers, require_link)
}

/// Load reference strings, normalizing internal whitespace. A record whose
/// string is empty after normalization is an error, not a silent drop.
pub fn load_references(path: &Path) -> Result<Vec<ReferenceRecord>, CorpusError> {
    let mut records: Vec<ReferenceRecord> = read_ndjson(path)?;
    for (idx, rec) in records.iter_mut().enumerate() {
        let normalized = rec.raw_string.split_whitespace().collect::<Vec<_>>().join(" ");
        if normalized.is_empty() {
            return Err(CorpusError::EmptyReference {
                path: path.display().to_string(),
                line: idx + 1,
            });
        }
        rec.raw_string = normalized;
    }
    Ok(records)
}
