//! Rule-based named entity recognition over utterances.
//!
//! Custom-value entities are matched as case-insensitive literals on word
//! boundaries; number and date entities by their literal grammars. When
//! candidates overlap the longer span wins, then the earlier start, then
//! the lexicographically smaller entity name.

use chrono::NaiveDateTime;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::conversation::{EntityKind, EntityType};
use crate::literal::{number_pattern, parse_number, DateFormat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "lowercase")]
pub enum EntityValue {
    Text(String),
    Number(f64),
    Date(NaiveDateTime),
}

impl EntityValue {
    pub fn as_text(&self) -> String {
        match self {
            EntityValue::Text(t) => t.clone(),
            EntityValue::Number(n) => super::format_number(*n),
            EntityValue::Date(d) => d.format("%Y-%m-%d").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMatch {
    pub entity: String,
    /// Byte offset of the span in the utterance.
    pub start: usize,
    /// Byte length of the span.
    pub len: usize,
    pub surface: String,
    pub value: EntityValue,
}

impl EntityMatch {
    pub fn end(&self) -> usize {
        self.start + self.len
    }

    fn overlaps(&self, other: &EntityMatch) -> bool {
        self.start < other.end() && other.start < self.end()
    }
}

pub(crate) fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// One-to-one lowercase so that char positions survive folding.
pub(crate) fn fold_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

pub(crate) fn fold(text: &str) -> String {
    text.chars().map(fold_char).collect()
}

struct Literal {
    chars: Vec<char>,
    canonical: String,
}

struct Gazetteer {
    entity: String,
    literals: Vec<Literal>,
}

/// Compiled recognizer for a fixed set of entity types.
pub struct Recognizer {
    gazetteers: Vec<Gazetteer>,
    numbers: Vec<(String, Regex)>,
    dates: Vec<(String, Vec<(Regex, DateFormat)>)>,
    decimal_separator: char,
    date_formats: Vec<DateFormat>,
}

impl Recognizer {
    pub fn new(entities: &[EntityType], date_formats: &[DateFormat], decimal_separator: char) -> Self {
        let mut gazetteers = Vec::new();
        let mut numbers = Vec::new();
        let mut dates = Vec::new();
        for e in entities {
            match e.kind {
                EntityKind::CustomValues => {
                    let mut literals = Vec::new();
                    for entry in &e.entries {
                        for surface in std::iter::once(&entry.value).chain(&entry.synonyms) {
                            let surface = surface.trim();
                            if surface.is_empty() {
                                continue;
                            }
                            literals.push(Literal {
                                chars: surface.chars().map(fold_char).collect(),
                                canonical: entry.value.clone(),
                            });
                        }
                    }
                    // longest literal first
                    literals.sort_by_key(|l| std::cmp::Reverse(l.chars.len()));
                    gazetteers.push(Gazetteer {
                        entity: e.name.clone(),
                        literals,
                    });
                }
                EntityKind::NumberLiteral => {
                    let re = Regex::new(&number_pattern(decimal_separator)).expect("number regex");
                    numbers.push((e.name.clone(), re));
                }
                EntityKind::DateLiteral => {
                    let compiled = date_formats
                        .iter()
                        .map(|f| (Regex::new(f.regex_source()).expect("date regex"), f.clone()))
                        .collect();
                    dates.push((e.name.clone(), compiled));
                }
            }
        }
        Recognizer {
            gazetteers,
            numbers,
            dates,
            decimal_separator,
            date_formats: date_formats.to_vec(),
        }
    }

    pub fn decimal_separator(&self) -> char {
        self.decimal_separator
    }

    pub fn date_formats(&self) -> &[DateFormat] {
        &self.date_formats
    }

    pub fn recognize(&self, utterance: &str) -> Vec<EntityMatch> {
        let chars: Vec<(usize, char)> = utterance.char_indices().collect();
        let byte_at = |i: usize| chars.get(i).map_or(utterance.len(), |(b, _)| *b);
        let folded: Vec<char> = chars.iter().map(|(_, c)| fold_char(*c)).collect();
        let mut candidates = Vec::new();

        for g in &self.gazetteers {
            for lit in &g.literals {
                let n = lit.chars.len();
                if n == 0 || n > folded.len() {
                    continue;
                }
                for start in 0..=folded.len() - n {
                    if folded[start..start + n] != lit.chars[..] {
                        continue;
                    }
                    let left_ok = !is_word_char(lit.chars[0]) || start == 0 || !is_word_char(folded[start - 1]);
                    let right_ok = !is_word_char(lit.chars[n - 1])
                        || start + n == folded.len()
                        || !is_word_char(folded[start + n]);
                    if left_ok && right_ok {
                        let (b0, b1) = (byte_at(start), byte_at(start + n));
                        candidates.push(EntityMatch {
                            entity: g.entity.clone(),
                            start: b0,
                            len: b1 - b0,
                            surface: utterance[b0..b1].to_string(),
                            value: EntityValue::Text(lit.canonical.clone()),
                        });
                    }
                }
            }
        }

        let on_boundary = |start: usize, end: usize| {
            let before = utterance[..start].chars().next_back();
            let after = utterance[end..].chars().next();
            !before.is_some_and(|c| is_word_char(c) || c == self.decimal_separator) && !after.is_some_and(is_word_char)
        };

        for (name, re) in &self.numbers {
            for m in re.find_iter(utterance) {
                if !on_boundary(m.start(), m.end()) {
                    continue;
                }
                if let Some(n) = parse_number(m.as_str(), self.decimal_separator) {
                    candidates.push(EntityMatch {
                        entity: name.clone(),
                        start: m.start(),
                        len: m.len(),
                        surface: m.as_str().to_string(),
                        value: EntityValue::Number(n),
                    });
                }
            }
        }

        for (name, formats) in &self.dates {
            for (re, format) in formats {
                for m in re.find_iter(utterance) {
                    if !on_boundary(m.start(), m.end()) {
                        continue;
                    }
                    if let Some(d) = format.parse(m.as_str()) {
                        candidates.push(EntityMatch {
                            entity: name.clone(),
                            start: m.start(),
                            len: m.len(),
                            surface: m.as_str().to_string(),
                            value: EntityValue::Date(d),
                        });
                    }
                }
            }
        }

        resolve_overlaps(candidates)
    }
}

fn char_len(m: &EntityMatch) -> usize {
    m.surface.chars().count()
}

/// Keeps a non-overlapping subset, preferring longer spans, then earlier
/// starts, then smaller entity names. The result is ordered by start.
pub fn resolve_overlaps(mut candidates: Vec<EntityMatch>) -> Vec<EntityMatch> {
    candidates.sort_by(|a, b| {
        char_len(b)
            .cmp(&char_len(a))
            .then(a.start.cmp(&b.start))
            .then_with(|| a.entity.cmp(&b.entity))
    });
    let mut kept: Vec<EntityMatch> = Vec::new();
    for c in candidates {
        if !kept.iter().any(|k| k.overlaps(&c)) {
            kept.push(c);
        }
    }
    kept.sort_by_key(|m| m.start);
    kept
}

pub fn recognize_entities(
    utterance: &str,
    entities: &[EntityType],
    date_formats: &[DateFormat],
    decimal_separator: char,
) -> Vec<EntityMatch> {
    Recognizer::new(entities, date_formats, decimal_separator).recognize(utterance)
}
