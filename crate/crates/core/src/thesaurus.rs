//! Flat synonym lists for field names.
//!
//! The text format is one record per line, `term: syn1, syn2, ...`. Blank
//! lines and lines starting with `#` are ignored. Terms are matched against
//! field identifiers after the same normalization headers go through, so
//! `Opening Date` and `opening_date` name the same term.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::field_identifier;
use crate::schema::DataSchema;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Thesaurus {
    entries: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("thesaurus line {line}: {reason}")]
pub struct ThesaurusFormatError {
    pub line: usize,
    pub reason: String,
}

impl Thesaurus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds synonyms for `term`, dropping duplicates and the term itself.
    pub fn insert<I, S>(&mut self, term: &str, synonyms: I)
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let key = field_identifier(term);
        let list = self.entries.entry(key.clone()).or_default();
        for s in synonyms {
            let s: String = s.into();
            let s = s.trim().to_string();
            let norm = field_identifier(&s);
            if s.is_empty() || norm == key || list.iter().any(|x| field_identifier(x) == norm) {
                continue;
            }
            list.push(s);
        }
    }

    pub fn get(&self, term: &str) -> Option<&[String]> {
        self.entries.get(&field_identifier(term)).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn parse(text: &str) -> Result<Self, ThesaurusFormatError> {
        let mut th = Thesaurus::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: &str| ThesaurusFormatError {
                line: i + 1,
                reason: reason.to_string(),
            };
            let (term, rest) = line.split_once(':').ok_or_else(|| err("expected `term: synonyms`"))?;
            if term.trim().is_empty() {
                return Err(err("empty term"));
            }
            let synonyms: Vec<&str> = rest.split(',').map(str::trim).collect();
            if synonyms.iter().any(|s| s.is_empty()) {
                return Err(err("empty synonym"));
            }
            th.insert(term, synonyms);
        }
        Ok(th)
    }
}

/// Replaces the synonyms of every field that has a thesaurus entry. Fields
/// without an entry, and everything else in the schema, are left alone.
pub fn enrich_with_synonyms(schema: &DataSchema, thesaurus: &Thesaurus) -> DataSchema {
    let mut out = schema.clone();
    for field in &mut out.fields {
        if let Some(list) = thesaurus.get(&field.name) {
            let mut synonyms: Vec<String> = Vec::new();
            for s in list {
                let norm = field_identifier(s);
                if norm != field.name && !synonyms.iter().any(|x| field_identifier(x) == norm) {
                    synonyms.push(s.clone());
                }
            }
            field.synonyms = synonyms;
        }
    }
    out
}
