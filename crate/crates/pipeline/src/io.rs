//! JSONL inputs: corpora, classification labels and entity annotations.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use embinv_core::generator::{Corpus, CorpusRecord};
use embinv_core::metrics::EntityAnnotation;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};

/// Parses one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| PipelineError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| {
            PipelineError::Data(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        out.push(v);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut s = String::new();
    for item in items {
        s.push_str(&serde_json::to_string(item).expect("serializable"));
        s.push('\n');
    }
    fs::write(path, s).map_err(|e| PipelineError::io(path, e))
}

/// Reads `{"id", "text", "lang"}` lines.
pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let records: Vec<CorpusRecord> = read_jsonl(path)?;
    Corpus::new(records).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    write_jsonl(path, corpus.records())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub id: String,
    pub label: usize,
}

pub fn read_labels(path: &Path) -> Result<Vec<LabelRecord>> {
    read_jsonl(path)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub id: String,
    pub entities: Vec<EntityAnnotation>,
}

/// Entity annotations keyed by id.
pub fn read_entities(path: &Path) -> Result<HashMap<String, Vec<EntityAnnotation>>> {
    let records: Vec<EntityRecord> = read_jsonl(path)?;
    let mut out = HashMap::with_capacity(records.len());
    for r in records {
        if out.insert(r.id.clone(), r.entities).is_some() {
            return Err(PipelineError::Data(format!(
                "{}: duplicate id `{}`",
                path.display(),
                r.id
            )));
        }
    }
    Ok(out)
}

/// Reads a JSON document.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| PipelineError::Data(format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    fs::write(path, s).map_err(|e| PipelineError::io(path, e))
}

/// Sidecar listing the record ids of an embedding file, row by row.
pub fn ids_path(emb: &Path) -> std::path::PathBuf {
    emb.with_extension("ids.json")
}

/// Checks an embedding file's id sidecar (if present) against the corpus.
pub fn check_ids(emb: &Path, corpus: &Corpus) -> Result<()> {
    let sidecar = ids_path(emb);
    if !sidecar.exists() {
        return Ok(());
    }
    let ids: Vec<String> = read_json(&sidecar)?;
    if ids.len() != corpus.len() {
        return Err(PipelineError::DimMismatch {
            what: format!("ids in {}", sidecar.display()),
            expected: corpus.len(),
            found: ids.len(),
        });
    }
    for (row, (id, rec)) in ids.iter().zip(corpus.records()).enumerate() {
        if *id != rec.id {
            return Err(PipelineError::IdMismatch {
                row,
                expected: rec.id.clone(),
                found: id.clone(),
            });
        }
    }
    Ok(())
}
