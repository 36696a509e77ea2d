//! Bot bundles: the on-disk form of a generated bot.
//!
//! A bundle is a directory holding a `manifest` plus five files:
//!
//! | file | content |
//! |------|---------|
//! | `schema.model` | [`DataSchema`] |
//! | `operations.model` | [`OperationModel`] |
//! | `intents.model` | [`IntentModel`] |
//! | `data.csv` | the table, comma separated, header first |
//! | `bot.config` | [`BotConfig`] as TOML |
//!
//! Model files and the manifest are canonical JSON: object keys sorted,
//! two-space indentation, UTF-8, one trailing newline. Emitting equal
//! models therefore produces byte-identical files, and a hand-edited file
//! only has to be valid JSON to load (it is re-validated on load).

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::conversation::{validate_intent_model, HeuristicConfig, IntentModel};
use crate::crud::{validate_operation_model, OperationModel};
use crate::diagnostics::Diagnostic;
use crate::ingest::{parse_table, write_table, ParseConfig, RawTable};
use crate::runtime::{Bot, RuntimeConfig};
use crate::schema::{validate_schema, validate_table_against_schema, DataSchema};

pub const FORMAT_VERSION: &str = "1";
pub const MANIFEST_FILE: &str = "manifest";
pub const SCHEMA_FILE: &str = "schema.model";
pub const INTENTS_FILE: &str = "intents.model";
pub const OPERATIONS_FILE: &str = "operations.model";
pub const DATA_FILE: &str = "data.csv";
pub const CONFIG_FILE: &str = "bot.config";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub version: String,
    pub schema_file: String,
    pub intents_file: String,
    pub operations_file: String,
    pub data_file: String,
    pub config_file: String,
    /// `sha256:` followed by the hex digest of the data file.
    pub fingerprint: String,
}

/// Settings shipped with the bot.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BotConfig {
    pub runtime: RuntimeConfig,
    pub heuristics: HeuristicConfig,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BundleWarning {
    /// The data file changed after the bundle was emitted.
    FingerprintMismatch { expected: String, actual: String },
}

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("no manifest in {}", .0.display())]
    ManifestMissing(PathBuf),
    #[error("{file}:{line}:{column}: {message}")]
    ParseError {
        file: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported bundle version `{0}`")]
    UnsupportedVersion(String),
    #[error("models are inconsistent:\n{}", format_diagnostics(.0))]
    ValidationFailed(Vec<Diagnostic>),
}

fn format_diagnostics(diags: &[Diagnostic]) -> String {
    diags.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n")
}

fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Canonical text of a model: sorted keys, pretty printed, trailing newline.
pub fn to_canonical_json<T: Serialize>(value: &T) -> String {
    let tree = sort_keys(serde_json::to_value(value).expect("models serialize to JSON"));
    let mut text = serde_json::to_string_pretty(&tree).expect("JSON values print");
    text.push('\n');
    text
}

pub fn data_fingerprint(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

/// Runs every validator and tags each finding with the file it concerns.
pub fn validate_models(
    schema: &DataSchema,
    intents: &IntentModel,
    ops: &OperationModel,
    table: &RawTable,
) -> Vec<Diagnostic> {
    let tag = |diags: Vec<Diagnostic>, file| diags.into_iter().map(move |d| d.in_file(file));
    tag(validate_schema(schema), SCHEMA_FILE)
        .chain(tag(validate_table_against_schema(schema, table), DATA_FILE))
        .chain(tag(validate_operation_model(ops, schema), OPERATIONS_FILE))
        .chain(tag(validate_intent_model(intents, ops, schema), INTENTS_FILE))
        .collect()
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), BundleError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|source| BundleError::Io { path, source })
}

pub fn emit_bundle(
    schema: &DataSchema,
    intents: &IntentModel,
    ops: &OperationModel,
    table: &RawTable,
    config: &BotConfig,
    dir: &Path,
) -> Result<BundleManifest, BundleError> {
    let diags = validate_models(schema, intents, ops, table);
    if !diags.is_empty() {
        return Err(BundleError::ValidationFailed(diags));
    }
    fs::create_dir_all(dir).map_err(|source| BundleError::Io {
        path: dir.to_path_buf(),
        source,
    })?;

    let data = write_table(table, &ParseConfig::default()).map_err(|e| BundleError::ParseError {
        file: DATA_FILE.into(),
        line: 0,
        column: 0,
        message: e.to_string(),
    })?;
    let manifest = BundleManifest {
        version: FORMAT_VERSION.into(),
        schema_file: SCHEMA_FILE.into(),
        intents_file: INTENTS_FILE.into(),
        operations_file: OPERATIONS_FILE.into(),
        data_file: DATA_FILE.into(),
        config_file: CONFIG_FILE.into(),
        fingerprint: data_fingerprint(&data),
    };
    let config_text = toml::to_string(config).expect("bot config serializes to TOML");

    write_file(dir, SCHEMA_FILE, to_canonical_json(schema).as_bytes())?;
    write_file(dir, OPERATIONS_FILE, to_canonical_json(ops).as_bytes())?;
    write_file(dir, INTENTS_FILE, to_canonical_json(intents).as_bytes())?;
    write_file(dir, DATA_FILE, &data)?;
    write_file(dir, CONFIG_FILE, config_text.as_bytes())?;
    write_file(dir, MANIFEST_FILE, to_canonical_json(&manifest).as_bytes())?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedBundle {
    pub schema: DataSchema,
    pub intents: IntentModel,
    pub ops: OperationModel,
    pub table: RawTable,
    pub config: BotConfig,
    pub manifest: BundleManifest,
    pub warnings: Vec<BundleWarning>,
}

impl LoadedBundle {
    pub fn into_bot(self) -> Bot {
        Bot::new(self.schema, self.intents, self.ops, self.table, self.config.runtime)
    }
}

fn read_file(dir: &Path, name: &str) -> Result<Vec<u8>, BundleError> {
    let path = dir.join(name);
    fs::read(&path).map_err(|source| BundleError::Io { path, source })
}

fn read_json<T: DeserializeOwned>(dir: &Path, name: &str) -> Result<T, BundleError> {
    let bytes = read_file(dir, name)?;
    serde_json::from_slice(&bytes).map_err(|e| BundleError::ParseError {
        file: name.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Loads and re-validates a bundle, including any hand edits made to it.
pub fn load_bundle(dir: &Path) -> Result<LoadedBundle, BundleError> {
    if !dir.join(MANIFEST_FILE).is_file() {
        return Err(BundleError::ManifestMissing(dir.to_path_buf()));
    }
    let manifest: BundleManifest = read_json(dir, MANIFEST_FILE)?;
    if manifest.version != FORMAT_VERSION {
        return Err(BundleError::UnsupportedVersion(manifest.version));
    }
    let schema: DataSchema = read_json(dir, &manifest.schema_file)?;
    let ops: OperationModel = read_json(dir, &manifest.operations_file)?;
    let intents: IntentModel = read_json(dir, &manifest.intents_file)?;

    let config_bytes = read_file(dir, &manifest.config_file)?;
    let config_err = |line: usize, message: String| BundleError::ParseError {
        file: manifest.config_file.clone(),
        line,
        column: 0,
        message,
    };
    let config_text = String::from_utf8(config_bytes).map_err(|e| config_err(0, e.to_string()))?;
    let config: BotConfig = toml::from_str(&config_text).map_err(|e| {
        let line = e.span().map_or(0, |s| config_text[..s.start].matches('\n').count() + 1);
        config_err(line, e.message().to_string())
    })?;

    let data = read_file(dir, &manifest.data_file)?;
    let table = parse_table(&schema.name, &data, &ParseConfig::default()).map_err(|e| BundleError::ParseError {
        file: manifest.data_file.clone(),
        line: match e {
            crate::ingest::IngestError::NonRectangular { row_index, .. } => row_index + 1,
            _ => 0,
        },
        column: 0,
        message: e.to_string(),
    })?;

    let diags = validate_models(&schema, &intents, &ops, &table);
    if !diags.is_empty() {
        return Err(BundleError::ValidationFailed(diags));
    }

    let mut warnings = Vec::new();
    let actual = data_fingerprint(&data);
    if actual != manifest.fingerprint {
        warnings.push(BundleWarning::FingerprintMismatch {
            expected: manifest.fingerprint.clone(),
            actual,
        });
    }
    Ok(LoadedBundle {
        schema,
        intents,
        ops,
        table,
        config,
        manifest,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_sorts_keys() {
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: Vec<u8>,
        }
        let text = to_canonical_json(&S {
            zeta: 1,
            alpha: vec![2],
        });
        assert_eq!(text, "{\n  \"alpha\": [\n    2\n  ],\n  \"zeta\": 1\n}\n");
    }

    #[test]
    fn fingerprint_format() {
        assert_eq!(
            data_fingerprint(b""),
            "sha256:e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
