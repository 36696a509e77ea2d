//! The data-schema model: one [`Field`] per source column, with its data
//! type, diversity and categorical classification.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{Diagnostic, Rule};
use crate::ingest::{column_profile, field_identifier, ColumnStats, IngestError, RawTable};
use crate::literal::{default_date_formats, DateFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DataType {
    Numeric,
    DateTime,
    Textual,
    /// Every cell of the column is empty.
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    pub name: String,
    pub display_name: String,
    pub datatype: DataType,
    pub diversity: usize,
    pub categorical: bool,
    #[serde(default)]
    pub category_values: Vec<String>,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: String,
    pub config_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSchema {
    pub name: String,
    pub fields: Vec<Field>,
    pub row_count: usize,
    pub provenance: Provenance,
}

impl DataSchema {
    pub fn field(&self, name: &str) -> Option<&Field> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InferenceConfig {
    pub diversity_threshold: usize,
    pub type_tolerance: f64,
    pub date_formats: Vec<DateFormat>,
    pub decimal_separator: char,
    pub null_markers: Vec<String>,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            diversity_threshold: 10,
            type_tolerance: 0.0,
            date_formats: default_date_formats(),
            decimal_separator: '.',
            null_markers: ["", "NA", "N/A", "null"].map(String::from).to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchemaError {
    #[error("invalid inference configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<(), SchemaError> {
        if self.diversity_threshold < 1 {
            return Err(SchemaError::InvalidConfig(
                "diversity_threshold must be at least 1".into(),
            ));
        }
        if !(0.0..0.5).contains(&self.type_tolerance) {
            return Err(SchemaError::InvalidConfig("type_tolerance must lie in [0, 0.5)".into()));
        }
        if self.decimal_separator.is_ascii_digit() || matches!(self.decimal_separator, '+' | '-') {
            return Err(SchemaError::InvalidConfig(
                "decimal_separator cannot be a digit or sign".into(),
            ));
        }
        Ok(())
    }

    /// Short content hash identifying this configuration.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

/// Numeric wins over DateTime, which wins over Textual; a type is accepted
/// when at least `(1 - type_tolerance)` of the non-empty cells parse as it.
pub fn infer_field_type(stats: &ColumnStats, cfg: &InferenceConfig) -> DataType {
    if stats.non_empty_count == 0 {
        return DataType::Unknown;
    }
    let required = (1.0 - cfg.type_tolerance) * stats.non_empty_count as f64;
    let accepts = |count: usize| count as f64 + 1e-9 >= required;
    if accepts(stats.numeric_parse_count) {
        DataType::Numeric
    } else if accepts(stats.datetime_parse_count) {
        DataType::DateTime
    } else {
        DataType::Textual
    }
}

/// Categorical means at least one value and no more than `threshold` of them.
pub fn classify_categorical(diversity: usize, threshold: usize) -> bool {
    diversity >= 1 && diversity <= threshold
}

pub fn infer_schema(table: &RawTable, cfg: &InferenceConfig) -> Result<DataSchema, SchemaError> {
    cfg.validate()?;
    let mut used = HashSet::new();
    let mut fields = Vec::with_capacity(table.column_count());
    for (col, header) in table.headers.iter().enumerate() {
        let stats = column_profile(table, col, cfg)?;
        let base = field_identifier(header);
        let mut name = base.clone();
        let mut n = 2;
        while !used.insert(name.clone()) {
            name = format!("{base}_{n}");
            n += 1;
        }
        let categorical = classify_categorical(stats.diversity, cfg.diversity_threshold);
        fields.push(Field {
            name,
            display_name: header.trim().to_string(),
            datatype: infer_field_type(&stats, cfg),
            diversity: stats.diversity,
            categorical,
            category_values: if categorical {
                stats.distinct_values.into_iter().collect()
            } else {
                Vec::new()
            },
            synonyms: Vec::new(),
        });
    }
    Ok(DataSchema {
        name: table.name.clone(),
        fields,
        row_count: table.row_count(),
        provenance: Provenance {
            source: table.name.clone(),
            config_fingerprint: cfg.fingerprint(),
        },
    })
}

/// Checks the structural invariants of a (possibly hand-edited) schema.
pub fn validate_schema(schema: &DataSchema) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut names = HashSet::new();
    for (i, f) in schema.fields.iter().enumerate() {
        let path = format!("fields[{i}]");
        if f.name.trim().is_empty() {
            out.push(Diagnostic::new(
                Rule::EmptyFieldName,
                &f.name,
                &path,
                "field name is empty",
            ));
        }
        if !names.insert(f.name.as_str()) {
            out.push(Diagnostic::new(
                Rule::DuplicateField,
                &f.name,
                &path,
                format!("field name `{}` is used more than once", f.name),
            ));
        }
        let distinct: HashSet<_> = f.category_values.iter().collect();
        if f.categorical {
            if f.category_values.is_empty()
                || f.category_values.len() != f.diversity
                || distinct.len() != f.category_values.len()
            {
                out.push(Diagnostic::new(
                    Rule::CategoryMismatch,
                    &f.name,
                    format!("{path}.category_values"),
                    format!(
                        "categorical field needs {} distinct category values, found {}",
                        f.diversity,
                        distinct.len()
                    ),
                ));
            }
        } else if !f.category_values.is_empty() {
            out.push(Diagnostic::new(
                Rule::CategoryMismatch,
                &f.name,
                format!("{path}.category_values"),
                "non-categorical field lists category values",
            ));
        }
        let mut seen = HashSet::new();
        for (j, s) in f.synonyms.iter().enumerate() {
            let key = field_identifier(s);
            if key == f.name {
                out.push(Diagnostic::new(
                    Rule::SelfSynonym,
                    &f.name,
                    format!("{path}.synonyms[{j}]"),
                    format!("synonym `{s}` repeats the field name"),
                ));
            } else if !seen.insert(key) {
                out.push(Diagnostic::new(
                    Rule::DuplicateSynonym,
                    &f.name,
                    format!("{path}.synonyms[{j}]"),
                    format!("synonym `{s}` is listed twice"),
                ));
            }
        }
    }
    out
}

/// Checks that a data table has the columns the schema describes.
pub fn validate_table_against_schema(schema: &DataSchema, table: &RawTable) -> Vec<Diagnostic> {
    if table.headers.len() != schema.fields.len() {
        return vec![Diagnostic::new(
            Rule::TableMismatch,
            &schema.name,
            "fields",
            format!(
                "schema has {} fields but the data has {} columns",
                schema.fields.len(),
                table.headers.len()
            ),
        )];
    }
    schema
        .fields
        .iter()
        .zip(&table.headers)
        .enumerate()
        .filter(|(_, (f, h))| f.display_name != h.trim())
        .map(|(i, (f, h))| {
            Diagnostic::new(
                Rule::TableMismatch,
                &f.name,
                format!("fields[{i}].display_name"),
                format!("column {i} is `{}` in the data", h.trim()),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(non_empty: usize, numeric: usize, datetime: usize) -> ColumnStats {
        ColumnStats {
            column_index: 0,
            non_empty_count: non_empty,
            distinct_values: Default::default(),
            numeric_parse_count: numeric,
            datetime_parse_count: datetime,
            diversity: 0,
        }
    }

    fn sample_table(rows: &[[&str; 2]]) -> RawTable {
        RawTable {
            name: "cities".into(),
            headers: vec!["city".into(), "pop".into()],
            rows: rows.iter().map(|r| r.iter().map(|c| c.to_string()).collect()).collect(),
        }
    }

    #[test]
    fn field_types() {
        let cfg = InferenceConfig::default();
        assert_eq!(infer_field_type(&stats(0, 0, 0), &cfg), DataType::Unknown);
        assert_eq!(infer_field_type(&stats(4, 4, 0), &cfg), DataType::Numeric);
        assert_eq!(infer_field_type(&stats(10, 9, 0), &cfg), DataType::Textual);
        let tolerant = InferenceConfig {
            type_tolerance: 0.1,
            ..cfg.clone()
        };
        assert_eq!(infer_field_type(&stats(10, 9, 0), &tolerant), DataType::Numeric);
        assert_eq!(infer_field_type(&stats(10, 8, 0), &tolerant), DataType::Textual);
        // a column of years parses both ways; numeric takes precedence
        assert_eq!(infer_field_type(&stats(3, 3, 3), &cfg), DataType::Numeric);
        assert_eq!(infer_field_type(&stats(3, 0, 3), &cfg), DataType::DateTime);
    }

    #[test]
    fn categorical_boundary() {
        assert!(classify_categorical(3, 10));
        assert!(!classify_categorical(11, 10));
        assert!(classify_categorical(10, 10));
        assert!(!classify_categorical(0, 10));
        assert!(classify_categorical(1, 1));
    }

    #[test]
    fn infer_two_column_table() {
        let t = sample_table(&[["Paris", "2100000"], ["Metz", "120000"], ["Paris", "2100000"]]);
        let s = infer_schema(&t, &InferenceConfig::default()).unwrap();
        assert_eq!(s.row_count, 3);
        let city = &s.fields[0];
        assert_eq!(city.datatype, DataType::Textual);
        assert!(city.categorical);
        assert_eq!(city.category_values, ["Metz", "Paris"]);
        let pop = &s.fields[1];
        assert_eq!(pop.datatype, DataType::Numeric);
        assert!(pop.categorical);
        assert_eq!(pop.diversity, 2);
        assert!(validate_schema(&s).is_empty());

        let strict = InferenceConfig {
            diversity_threshold: 1,
            ..InferenceConfig::default()
        };
        let s = infer_schema(&t, &strict).unwrap();
        assert!(s.fields.iter().all(|f| !f.categorical && f.category_values.is_empty()));
    }

    #[test]
    fn empty_table_is_unknown() {
        let s = infer_schema(&sample_table(&[]), &InferenceConfig::default()).unwrap();
        assert!(s
            .fields
            .iter()
            .all(|f| f.datatype == DataType::Unknown && !f.categorical));
    }

    #[test]
    fn colliding_identifiers_are_suffixed() {
        let t = RawTable {
            name: "t".into(),
            headers: vec!["a-b".into(), "a_b".into()],
            rows: vec![],
        };
        let s = infer_schema(&t, &InferenceConfig::default()).unwrap();
        assert_eq!(s.fields[0].name, "a_b");
        assert_eq!(s.fields[1].name, "a_b_2");
    }

    #[test]
    fn rejects_bad_config() {
        let t = sample_table(&[]);
        for cfg in [
            InferenceConfig {
                diversity_threshold: 0,
                ..InferenceConfig::default()
            },
            InferenceConfig {
                type_tolerance: 0.5,
                ..InferenceConfig::default()
            },
        ] {
            assert!(matches!(infer_schema(&t, &cfg), Err(SchemaError::InvalidConfig(_))));
        }
    }

    #[test]
    fn validator_flags_hand_edits() {
        let t = sample_table(&[["Paris", "1"], ["Metz", "2"]]);
        let mut s = infer_schema(&t, &InferenceConfig::default()).unwrap();
        s.fields[1].name = "city".into();
        s.fields[0].synonyms = vec!["town".into(), "Town".into(), "City".into()];
        s.fields[0].category_values.pop();
        let rules: Vec<_> = validate_schema(&s).into_iter().map(|d| d.rule).collect();
        assert_eq!(
            rules,
            [
                Rule::CategoryMismatch,
                Rule::DuplicateSynonym,
                Rule::SelfSynonym,
                Rule::DuplicateField
            ]
        );
    }
}
