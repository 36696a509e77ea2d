//! Sentence-template catalog and the `{slot}` template syntax.

use std::collections::BTreeMap;

const DEFAULT_CATALOG: &str = include_str!("templates.txt");

pub const FILTER_BY: &str = "filter_by";
pub const FILTER_BY_SYNONYM: &str = "filter_by.synonym";
pub const FILTER_PAIR: &str = "filter_pair";
pub const FILTER_GT: &str = "filter_gt";
pub const FILTER_LT: &str = "filter_lt";
pub const FILTER_BETWEEN: &str = "filter_between";
pub const ROW_COUNT: &str = "row_count";
pub const SHOW_SCHEMA: &str = "show_schema";

pub fn aggregate_key(agg: crate::crud::AggFn) -> String {
    format!("aggregate.{}", agg.as_str())
}

const REQUIRED_KEYS: [&str; 12] = [
    FILTER_BY,
    FILTER_BY_SYNONYM,
    FILTER_PAIR,
    FILTER_GT,
    FILTER_LT,
    FILTER_BETWEEN,
    ROW_COUNT,
    SHOW_SCHEMA,
    "aggregate.min",
    "aggregate.max",
    "aggregate.sum",
    "aggregate.avg",
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CatalogError {
    #[error("template catalog line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("template catalog has no templates for `{0}`")]
    MissingKey(String),
}

/// Templates keyed by heuristic id, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateCatalog {
    entries: BTreeMap<String, Vec<String>>,
}

impl Default for TemplateCatalog {
    fn default() -> Self {
        TemplateCatalog::parse(DEFAULT_CATALOG).expect("built-in catalog parses")
    }
}

impl TemplateCatalog {
    pub fn parse(text: &str) -> Result<Self, CatalogError> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let format_err = |reason: &str| CatalogError::Format {
                line: i + 1,
                reason: reason.to_string(),
            };
            let (key, template) = line
                .split_once(':')
                .ok_or_else(|| format_err("expected `key: template`"))?;
            let template = template.trim();
            parse_template(template).map_err(|e| format_err(&e))?;
            entries
                .entry(key.trim().to_string())
                .or_default()
                .push(template.to_string());
        }
        for key in REQUIRED_KEYS {
            if entries.get(key).is_none_or(Vec::is_empty) {
                return Err(CatalogError::MissingKey(key.to_string()));
            }
        }
        Ok(TemplateCatalog { entries })
    }

    pub fn get(&self, key: &str) -> &[String] {
        self.entries.get(key).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// A piece of a training sentence: literal text or a `{slot}` marker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segment<'a> {
    Text(&'a str),
    Slot(&'a str),
}

/// Splits a template into text and slot segments. Slot names are
/// identifiers (`[A-Za-z0-9_]+`); braces cannot appear otherwise.
pub fn parse_template(template: &str) -> Result<Vec<Segment<'_>>, String> {
    let mut out = Vec::new();
    let mut rest = template;
    while !rest.is_empty() {
        match rest.find(['{', '}']) {
            None => {
                out.push(Segment::Text(rest));
                break;
            }
            Some(pos) => {
                if rest.as_bytes()[pos] == b'}' {
                    return Err(format!("unmatched `}}` in `{template}`"));
                }
                if pos > 0 {
                    out.push(Segment::Text(&rest[..pos]));
                }
                let after = &rest[pos + 1..];
                let end = after
                    .find('}')
                    .ok_or_else(|| format!("unclosed `{{` in `{template}`"))?;
                let name = &after[..end];
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(format!("bad slot name `{name}` in `{template}`"));
                }
                out.push(Segment::Slot(name));
                rest = &after[end + 1..];
            }
        }
    }
    Ok(out)
}

/// Rewrites `<field>`/`<field2>` markers and renames slots.
pub(crate) fn instantiate(template: &str, fields: &[(&str, &str)], slots: &[(&str, &str)]) -> String {
    let mut text = template.to_string();
    for (marker, word) in fields {
        text = text.replace(marker, word);
    }
    let segments = parse_template(&text).expect("catalog templates are validated");
    segments
        .into_iter()
        .map(|seg| match seg {
            Segment::Text(t) => t.to_string(),
            Segment::Slot(s) => {
                let renamed = slots.iter().find(|(from, _)| *from == s).map_or(s, |(_, to)| to);
                format!("{{{renamed}}}")
            }
        })
        .collect()
}
