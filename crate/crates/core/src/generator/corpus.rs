use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusRecord {
    pub id: String,
    pub text: String,
    #[serde(default = "default_lang")]
    pub lang: String,
}

fn default_lang() -> String {
    "en".to_string()
}

impl CorpusRecord {
    pub fn new(id: impl Into<String>, text: impl Into<String>, lang: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            lang: lang.into(),
        }
    }
}

/// Ordered records with unique ids and non-empty texts.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Corpus {
    records: Vec<CorpusRecord>,
}

impl Corpus {
    pub fn new(records: Vec<CorpusRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(Error::DuplicateId(r.id.clone()));
            }
            if r.text.trim().is_empty() {
                return Err(crate::error::invalid(
                    "text",
                    format!("record `{}` has empty text", r.id),
                ));
            }
        }
        Ok(Self { records })
    }

    /// Convenience for tests and synthetic data: ids are `0..n` in decimal.
    pub fn from_texts<S: Into<String>>(texts: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::new(
            texts
                .into_iter()
                .enumerate()
                .map(|(i, t)| CorpusRecord::new(i.to_string(), t, "en"))
                .collect(),
        )
    }

    pub fn records(&self) -> &[CorpusRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&CorpusRecord> {
        self.records.get(i)
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> + '_ {
        self.records.iter().map(|r| r.text.as_str())
    }

    /// Sub-corpus of `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            records: self.records[start..end].to_vec(),
        }
    }
}
