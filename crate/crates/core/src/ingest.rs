//! Tabular ingest: CSV bytes into a rectangular [`RawTable`], plus the
//! per-column profiles that schema inference consumes.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::literal::{parse_date, parse_number};
use crate::schema::InferenceConfig;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawTable {
    pub name: String,
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn column_count(&self) -> usize {
        self.headers.len()
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn column(&self, col: usize) -> impl Iterator<Item = &str> + '_ {
        self.rows.iter().map(move |r| r[col].as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParseConfig {
    pub delimiter: char,
    pub quote: char,
    pub has_header: bool,
    pub max_rows: Option<usize>,
}

impl Default for ParseConfig {
    fn default() -> Self {
        ParseConfig {
            delimiter: ',',
            quote: '"',
            has_header: true,
            max_rows: None,
        }
    }
}

impl ParseConfig {
    pub fn validate(&self) -> Result<(), IngestError> {
        if !self.delimiter.is_ascii() || !self.quote.is_ascii() {
            return Err(IngestError::InvalidConfig(
                "delimiter and quote must be ASCII characters".into(),
            ));
        }
        if self.delimiter == self.quote {
            return Err(IngestError::InvalidConfig("delimiter and quote must differ".into()));
        }
        if matches!(self.delimiter, '\n' | '\r') || matches!(self.quote, '\n' | '\r') {
            return Err(IngestError::InvalidConfig(
                "line breaks cannot be delimiters or quotes".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("row {row_index} has {got} cells, expected {expected}")]
    NonRectangular {
        row_index: usize,
        expected: usize,
        got: usize,
    },
    #[error("duplicate column header `{0}`")]
    DuplicateHeader(String),
    #[error("input is not valid UTF-8 (byte offset {0})")]
    EncodingError(usize),
    #[error("input is empty")]
    EmptyInput,
    #[error("column {col} out of range (table has {count} columns)")]
    ColumnOutOfRange { col: usize, count: usize },
    #[error("invalid parse configuration: {0}")]
    InvalidConfig(String),
    #[error("malformed CSV: {0}")]
    Malformed(String),
}

/// Folds a header for uniqueness checks: trimmed and lowercased.
pub fn fold_header(header: &str) -> String {
    header.trim().to_lowercase()
}

/// Turns a header into the identifier used for field, entity and intent
/// names: trimmed, whitespace runs collapsed to `_`, lowercased, and any
/// remaining character outside `[a-z0-9_]` replaced by `_`.
pub fn field_identifier(header: &str) -> String {
    let joined = header.split_whitespace().collect::<Vec<_>>().join("_");
    let ident: String = joined
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if ident.is_empty() {
        "field".to_string()
    } else {
        ident
    }
}

pub fn parse_table(name: &str, bytes: &[u8], cfg: &ParseConfig) -> Result<RawTable, IngestError> {
    cfg.validate()?;
    let text = std::str::from_utf8(bytes).map_err(|e| IngestError::EncodingError(e.valid_up_to()))?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    if text.trim().is_empty() {
        return Err(IngestError::EmptyInput);
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(cfg.delimiter as u8)
        .quote(cfg.quote as u8)
        .from_reader(text.as_bytes());

    let mut records = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IngestError::Malformed(e.to_string()))?;
        records.push(record.iter().map(str::to_string).collect::<Vec<_>>());
    }
    let mut records = records.into_iter();
    let first = records.next().ok_or(IngestError::EmptyInput)?;
    let width = first.len();

    let (headers, mut pending) = if cfg.has_header {
        (first, None)
    } else {
        ((1..=width).map(|i| format!("col_{i}")).collect(), Some(first))
    };

    let mut seen = HashSet::new();
    for h in &headers {
        if !seen.insert(fold_header(h)) {
            return Err(IngestError::DuplicateHeader(h.trim().to_string()));
        }
    }

    let offset = usize::from(cfg.has_header);
    let mut rows = Vec::new();
    let mut index = 0;
    while let Some(row) = pending.take().or_else(|| records.next()) {
        if cfg.max_rows.is_some_and(|m| rows.len() >= m) {
            break;
        }
        if row.len() != width {
            return Err(IngestError::NonRectangular {
                row_index: index + offset,
                expected: width,
                got: row.len(),
            });
        }
        rows.push(row);
        index += 1;
    }

    Ok(RawTable {
        name: name.to_string(),
        headers,
        rows,
    })
}

/// Writes the table back as CSV (header first, `\n` line ends). Parsing the
/// output with the same config reproduces the table.
pub fn write_table(table: &RawTable, cfg: &ParseConfig) -> Result<Vec<u8>, IngestError> {
    cfg.validate()?;
    let mut writer = csv::WriterBuilder::new()
        .delimiter(cfg.delimiter as u8)
        .quote(cfg.quote as u8)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let malformed = |e: csv::Error| IngestError::Malformed(e.to_string());
    if cfg.has_header {
        writer.write_record(&table.headers).map_err(malformed)?;
    }
    for row in &table.rows {
        writer.write_record(row).map_err(malformed)?;
    }
    writer.into_inner().map_err(|e| IngestError::Malformed(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub column_index: usize,
    pub non_empty_count: usize,
    pub distinct_values: BTreeSet<String>,
    pub numeric_parse_count: usize,
    pub datetime_parse_count: usize,
    pub diversity: usize,
}

/// True when the cell counts as empty for profiling: blank after trimming
/// or exactly one of the configured null markers.
pub fn is_null_cell(cell: &str, cfg: &InferenceConfig) -> bool {
    let t = cell.trim();
    t.is_empty() || cfg.null_markers.iter().any(|m| m == t)
}

pub fn column_profile(table: &RawTable, col: usize, cfg: &InferenceConfig) -> Result<ColumnStats, IngestError> {
    if col >= table.column_count() {
        return Err(IngestError::ColumnOutOfRange {
            col,
            count: table.column_count(),
        });
    }
    let mut stats = ColumnStats {
        column_index: col,
        non_empty_count: 0,
        distinct_values: BTreeSet::new(),
        numeric_parse_count: 0,
        datetime_parse_count: 0,
        diversity: 0,
    };
    for cell in table.column(col) {
        if is_null_cell(cell, cfg) {
            continue;
        }
        stats.non_empty_count += 1;
        let t = cell.trim();
        if parse_number(t, cfg.decimal_separator).is_some() {
            stats.numeric_parse_count += 1;
        }
        if parse_date(t, &cfg.date_formats).is_some() {
            stats.datetime_parse_count += 1;
        }
        if !stats.distinct_values.contains(cell) {
            stats.distinct_values.insert(cell.to_string());
        }
    }
    stats.diversity = stats.distinct_values.len();
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RawTable, IngestError> {
        parse_table("t", s.as_bytes(), &ParseConfig::default())
    }

    fn table_with_column(cells: &[&str]) -> RawTable {
        RawTable {
            name: "t".into(),
            headers: vec!["c".into()],
            rows: cells.iter().map(|c| vec![c.to_string()]).collect(),
        }
    }

    #[test]
    fn minimal_csv() {
        let t = parse("a,b\n1,x\n2,y").unwrap();
        assert_eq!(t.headers, ["a", "b"]);
        assert_eq!(t.rows, [["1", "x"], ["2", "y"]]);
    }

    #[test]
    fn quoted_delimiter_is_kept() {
        let t = parse("a,b\n\"1,5\",x").unwrap();
        assert_eq!(t.rows, [["1,5", "x"]]);
    }

    #[test]
    fn quoted_newlines_and_doubled_quotes() {
        let t = parse("a,b\n\"line\nbreak\",\"say \"\"hi\"\"\"\n").unwrap();
        assert_eq!(t.rows, [["line\nbreak", "say \"hi\""]]);
    }

    #[test]
    fn short_row_is_rejected() {
        assert_eq!(
            parse("a,b\n1"),
            Err(IngestError::NonRectangular {
                row_index: 1,
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn duplicate_headers_after_folding() {
        assert_eq!(
            parse("City, city \n1,2"),
            Err(IngestError::DuplicateHeader("city".into()))
        );
    }

    #[test]
    fn encoding_and_empty_input() {
        let bytes = b"a,b\n\xff,1";
        assert_eq!(
            parse_table("t", bytes, &ParseConfig::default()),
            Err(IngestError::EncodingError(4))
        );
        assert_eq!(parse(""), Err(IngestError::EmptyInput));
        assert_eq!(parse("  \n"), Err(IngestError::EmptyInput));
    }

    #[test]
    fn headerless_input_gets_synthetic_names() {
        let cfg = ParseConfig {
            has_header: false,
            ..ParseConfig::default()
        };
        let t = parse_table("t", b"1,x\n2,y", &cfg).unwrap();
        assert_eq!(t.headers, ["col_1", "col_2"]);
        assert_eq!(t.rows.len(), 2);
    }

    #[test]
    fn custom_delimiter_and_row_cap() {
        let cfg = ParseConfig {
            delimiter: ';',
            max_rows: Some(1),
            ..ParseConfig::default()
        };
        let t = parse_table("t", b"a;b\n1;2\n3;4", &cfg).unwrap();
        assert_eq!(t.rows, [["1", "2"]]);
        let bad = ParseConfig {
            delimiter: '"',
            ..ParseConfig::default()
        };
        assert!(matches!(
            parse_table("t", b"a", &bad),
            Err(IngestError::InvalidConfig(_))
        ));
    }

    #[test]
    fn writer_round_trip() {
        let t = parse("a,b\n\"1,5\",\"q\"\"\"\n,\n\"x\ny\",z").unwrap();
        let bytes = write_table(&t, &ParseConfig::default()).unwrap();
        assert_eq!(parse_table("t", &bytes, &ParseConfig::default()).unwrap(), t);
    }

    #[test]
    fn identifiers() {
        assert_eq!(field_identifier("  Museum   Name "), "museum_name");
        assert_eq!(field_identifier("Pop (2020)"), "pop__2020_");
        assert_eq!(field_identifier("   "), "field");
    }

    #[test]
    fn profile_counts() {
        let cfg = InferenceConfig::default();
        let s = column_profile(&table_with_column(&["1", "2", "2", ""]), 0, &cfg).unwrap();
        assert_eq!(
            (
                s.non_empty_count,
                s.diversity,
                s.numeric_parse_count,
                s.datetime_parse_count
            ),
            (3, 2, 3, 0)
        );

        let s = column_profile(&table_with_column(&["", ""]), 0, &cfg).unwrap();
        assert_eq!((s.non_empty_count, s.diversity), (0, 0));

        let s = column_profile(&table_with_column(&["2021-01-01", "n/a"]), 0, &cfg).unwrap();
        assert_eq!((s.datetime_parse_count, s.numeric_parse_count, s.diversity), (1, 0, 2));
    }

    #[test]
    fn null_markers_are_empty() {
        let cfg = InferenceConfig::default();
        let s = column_profile(&table_with_column(&["NA", "N/A", "null", "5"]), 0, &cfg).unwrap();
        assert_eq!((s.non_empty_count, s.numeric_parse_count), (1, 1));
    }

    #[test]
    fn column_out_of_range() {
        let cfg = InferenceConfig::default();
        assert_eq!(
            column_profile(&table_with_column(&["1"]), 1, &cfg),
            Err(IngestError::ColumnOutOfRange { col: 1, count: 1 })
        );
    }
}
