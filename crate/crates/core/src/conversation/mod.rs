//! Conversation model: entity types and intents generated from the data
//! schema by a fixed catalog of heuristics.
//!
//! | heuristic | fires for | intents |
//! |-----------|-----------|---------|
//! | H1 | each categorical field `F` | `filter_by_F` |
//! | H2 | each numeric field `N` | `min_N`, `max_N`, `sum_N`, `avg_N`, `filter_N_gt`, `filter_N_lt` |
//! | H3 | each date-time field `D` | `filter_D_between` |
//! | H4 | always | `row_count`, `show_schema`, `fallback` |
//! | H5 | each pair of categorical fields, when enabled | `filter_by_A_and_B` |

pub mod templates;

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::crud::{self, AggFn, CrudKind, OperationModel};
use crate::diagnostics::{Diagnostic, Rule};
use crate::ingest::field_identifier;
use crate::schema::{DataSchema, DataType, Field};

pub use templates::{parse_template, Segment, TemplateCatalog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityKind {
    CustomValues,
    NumberLiteral,
    DateLiteral,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityEntry {
    pub value: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityType {
    pub name: String,
    pub kind: EntityKind,
    #[serde(default)]
    pub entries: Vec<EntityEntry>,
}

pub const NUMBER_ENTITY: &str = "number";
pub const DATE_ENTITY: &str = "date";

pub fn value_entity_name(field: &str) -> String {
    format!("{field}_value")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrainingSentence(pub String);

impl TrainingSentence {
    pub fn template(&self) -> &str {
        &self.0
    }

    pub fn segments(&self) -> Result<Vec<Segment<'_>>, String> {
        parse_template(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub entity: String,
    pub required: bool,
    pub prompt: String,
}

/// Row predicate applied before the bound operation runs. Each variant
/// names the field it tests and the parameter(s) supplying the operand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum Condition {
    Equals { field: String, param: String },
    GreaterThan { field: String, param: String },
    LessThan { field: String, param: String },
    Between { field: String, from: String, to: String },
}

impl Condition {
    pub fn field(&self) -> &str {
        match self {
            Condition::Equals { field, .. }
            | Condition::GreaterThan { field, .. }
            | Condition::LessThan { field, .. }
            | Condition::Between { field, .. } => field,
        }
    }

    pub fn params(&self) -> Vec<&str> {
        match self {
            Condition::Equals { param, .. }
            | Condition::GreaterThan { param, .. }
            | Condition::LessThan { param, .. } => vec![param],
            Condition::Between { from, to, .. } => vec![from, to],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Action {
    Operation {
        op: String,
        #[serde(default)]
        filters: Vec<Condition>,
    },
    Help,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    pub name: String,
    #[serde(default)]
    pub training_sentences: Vec<TrainingSentence>,
    #[serde(default)]
    pub parameters: Vec<Parameter>,
    pub action: Action,
}

impl Intent {
    pub fn parameter(&self, name: &str) -> Option<&Parameter> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentModel {
    pub intents: Vec<Intent>,
    pub entities: Vec<EntityType>,
    pub fallback: String,
}

impl IntentModel {
    pub fn intent(&self, name: &str) -> Option<&Intent> {
        self.intents.iter().find(|i| i.name == name)
    }

    pub fn entity(&self, name: &str) -> Option<&EntityType> {
        self.entities.iter().find(|e| e.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeuristicConfig {
    pub max_conjunctive_filters: usize,
    pub sentence_variants_per_intent: usize,
    pub language: String,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            max_conjunctive_filters: 2,
            sentence_variants_per_intent: 3,
            language: "en".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConversationError {
    #[error("entities or operations do not match the schema: {0}")]
    InconsistentInputs(String),
    #[error("invalid heuristic configuration: {0}")]
    InvalidConfig(String),
}

pub const ROW_COUNT_INTENT: &str = "row_count";
pub const SHOW_SCHEMA_INTENT: &str = "show_schema";
pub const FALLBACK_INTENT: &str = "fallback";

pub fn build_entity_types(schema: &DataSchema) -> Vec<EntityType> {
    let mut out: Vec<EntityType> = schema
        .fields
        .iter()
        .filter(|f| f.categorical)
        .map(|f| EntityType {
            name: value_entity_name(&f.name),
            kind: EntityKind::CustomValues,
            entries: f
                .category_values
                .iter()
                .map(|v| EntityEntry {
                    value: v.clone(),
                    synonyms: Vec::new(),
                })
                .collect(),
        })
        .collect();
    let has = |t: DataType| schema.fields.iter().any(|f| f.datatype == t);
    if has(DataType::Numeric) {
        out.push(EntityType {
            name: NUMBER_ENTITY.into(),
            kind: EntityKind::NumberLiteral,
            entries: Vec::new(),
        });
    }
    if has(DataType::DateTime) {
        out.push(EntityType {
            name: DATE_ENTITY.into(),
            kind: EntityKind::DateLiteral,
            entries: Vec::new(),
        });
    }
    out
}

/// How a field is spoken inside a template: its identifier.
fn spoken(field: &Field) -> &str {
    &field.name
}

fn readable(field: &Field) -> String {
    field.name.replace('_', " ")
}

fn param(name: &str, entity: &str, prompt: String) -> Parameter {
    Parameter {
        name: name.to_string(),
        entity: entity.to_string(),
        required: true,
        prompt,
    }
}

pub fn generate_intents(
    schema: &DataSchema,
    ops: &OperationModel,
    entities: &[EntityType],
    cfg: &HeuristicConfig,
) -> Result<IntentModel, ConversationError> {
    generate_intents_with_catalog(schema, ops, entities, cfg, &TemplateCatalog::default())
}

pub fn generate_intents_with_catalog(
    schema: &DataSchema,
    ops: &OperationModel,
    entities: &[EntityType],
    cfg: &HeuristicConfig,
    catalog: &TemplateCatalog,
) -> Result<IntentModel, ConversationError> {
    if !(1..=2).contains(&cfg.max_conjunctive_filters) {
        return Err(ConversationError::InvalidConfig(
            "max_conjunctive_filters must be 1 or 2".into(),
        ));
    }
    if cfg.sentence_variants_per_intent == 0 {
        return Err(ConversationError::InvalidConfig(
            "sentence_variants_per_intent must be at least 1".into(),
        ));
    }
    if cfg.language != "en" {
        return Err(ConversationError::InvalidConfig(format!(
            "unsupported language `{}`",
            cfg.language
        )));
    }
    check_inputs(schema, ops, entities)?;

    let cap = cfg.sentence_variants_per_intent;
    let sentences = |key: &str, fields: &[(&str, &str)], slots: &[(&str, &str)]| {
        catalog
            .get(key)
            .iter()
            .take(cap)
            .map(|t| TrainingSentence(templates::instantiate(t, fields, slots)))
            .collect::<Vec<_>>()
    };

    // Base sentences for one field, plus the first template again under
    // each of the field's synonyms.
    let field_sentences = |key: &str, f: &Field, slots: &[(&str, &str)]| {
        let mut out = sentences(key, &[("<field>", spoken(f))], slots);
        let first = catalog.get(key).first();
        for syn in f.synonyms.iter().take(cap) {
            let word = field_identifier(syn);
            out.extend(first.map(|t| TrainingSentence(templates::instantiate(t, &[("<field>", &word)], slots))));
        }
        out
    };

    let mut intents = Vec::new();
    let categorical: Vec<&Field> = schema.fields.iter().filter(|f| f.categorical).collect();

    // H1
    for f in &categorical {
        let entity = value_entity_name(&f.name);
        let slots = [("value", f.name.as_str())];
        let mut training = sentences(templates::FILTER_BY, &[("<field>", spoken(f))], &slots);
        for syn in f.synonyms.iter().take(cap) {
            let word = field_identifier(syn);
            training.extend(
                catalog
                    .get(templates::FILTER_BY_SYNONYM)
                    .iter()
                    .take(1)
                    .map(|t| TrainingSentence(templates::instantiate(t, &[("<field>", &word)], &slots))),
            );
        }
        intents.push(Intent {
            name: format!("filter_by_{}", f.name),
            training_sentences: training,
            parameters: vec![param(&f.name, &entity, format!("Which {}?", readable(f)))],
            action: Action::Operation {
                op: crud::read_by_name(&f.name),
                filters: vec![Condition::Equals {
                    field: f.name.clone(),
                    param: f.name.clone(),
                }],
            },
        });
    }

    // H2
    for f in schema.fields.iter().filter(|f| f.datatype == DataType::Numeric) {
        for agg in AggFn::NUMERIC {
            let name = crud::aggregate_name(agg, &f.name);
            intents.push(Intent {
                name: name.clone(),
                training_sentences: field_sentences(&templates::aggregate_key(agg), f, &[]),
                parameters: Vec::new(),
                action: Action::Operation {
                    op: name,
                    filters: Vec::new(),
                },
            });
        }
        for (key, suffix, prompt) in [
            (templates::FILTER_GT, "gt", "Greater than which"),
            (templates::FILTER_LT, "lt", "Less than which"),
        ] {
            let cond = |field: String, param: String| match suffix {
                "gt" => Condition::GreaterThan { field, param },
                _ => Condition::LessThan { field, param },
            };
            intents.push(Intent {
                name: format!("filter_{}_{suffix}", f.name),
                training_sentences: field_sentences(key, f, &[("value", "threshold")]),
                parameters: vec![param("threshold", NUMBER_ENTITY, format!("{prompt} {}?", readable(f)))],
                action: Action::Operation {
                    op: crud::LIST_ROWS.into(),
                    filters: vec![cond(f.name.clone(), "threshold".into())],
                },
            });
        }
    }

    // H3
    for f in schema.fields.iter().filter(|f| f.datatype == DataType::DateTime) {
        intents.push(Intent {
            name: format!("filter_{}_between", f.name),
            training_sentences: field_sentences(templates::FILTER_BETWEEN, f, &[("from", "start"), ("to", "end")]),
            parameters: vec![
                param("start", DATE_ENTITY, format!("From which {}?", readable(f))),
                param("end", DATE_ENTITY, format!("Until which {}?", readable(f))),
            ],
            action: Action::Operation {
                op: crud::LIST_ROWS.into(),
                filters: vec![Condition::Between {
                    field: f.name.clone(),
                    from: "start".into(),
                    to: "end".into(),
                }],
            },
        });
    }

    // H5
    if cfg.max_conjunctive_filters == 2 {
        let mut sorted = categorical.clone();
        sorted.sort_by(|a, b| a.name.cmp(&b.name));
        for (i, a) in sorted.iter().enumerate() {
            for b in &sorted[i + 1..] {
                let slots = [("value", a.name.as_str()), ("value2", b.name.as_str())];
                let mut training = sentences(
                    templates::FILTER_PAIR,
                    &[("<field2>", spoken(b)), ("<field>", spoken(a))],
                    &slots,
                );
                let first = catalog.get(templates::FILTER_PAIR).first();
                let renamed = a
                    .synonyms
                    .iter()
                    .take(cap)
                    .map(|s| (field_identifier(s), spoken(b).to_string()))
                    .chain(
                        b.synonyms
                            .iter()
                            .take(cap)
                            .map(|s| (spoken(a).to_string(), field_identifier(s))),
                    );
                for (wa, wb) in renamed {
                    training.extend(first.map(|t| {
                        TrainingSentence(templates::instantiate(
                            t,
                            &[("<field2>", &wb), ("<field>", &wa)],
                            &slots,
                        ))
                    }));
                }
                intents.push(Intent {
                    name: format!("filter_by_{}_and_{}", a.name, b.name),
                    training_sentences: training,
                    parameters: vec![
                        param(&a.name, &value_entity_name(&a.name), format!("Which {}?", readable(a))),
                        param(&b.name, &value_entity_name(&b.name), format!("Which {}?", readable(b))),
                    ],
                    action: Action::Operation {
                        op: crud::read_by_name(&a.name),
                        filters: vec![
                            Condition::Equals {
                                field: a.name.clone(),
                                param: a.name.clone(),
                            },
                            Condition::Equals {
                                field: b.name.clone(),
                                param: b.name.clone(),
                            },
                        ],
                    },
                });
            }
        }
    }

    // H4
    intents.push(Intent {
        name: ROW_COUNT_INTENT.into(),
        training_sentences: sentences(templates::ROW_COUNT, &[], &[]),
        parameters: Vec::new(),
        action: Action::Operation {
            op: crud::COUNT.into(),
            filters: Vec::new(),
        },
    });
    intents.push(Intent {
        name: SHOW_SCHEMA_INTENT.into(),
        training_sentences: sentences(templates::SHOW_SCHEMA, &[], &[]),
        parameters: Vec::new(),
        action: Action::Help,
    });
    intents.push(Intent {
        name: FALLBACK_INTENT.into(),
        training_sentences: Vec::new(),
        parameters: Vec::new(),
        action: Action::Fallback,
    });

    Ok(IntentModel {
        intents,
        entities: entities.to_vec(),
        fallback: FALLBACK_INTENT.into(),
    })
}

fn check_inputs(schema: &DataSchema, ops: &OperationModel, entities: &[EntityType]) -> Result<(), ConversationError> {
    let inconsistent = |m: String| Err(ConversationError::InconsistentInputs(m));
    if ops.schema_name != schema.name {
        return inconsistent(format!(
            "operations are for `{}`, schema is `{}`",
            ops.schema_name, schema.name
        ));
    }
    let expected = build_entity_types(schema);
    for e in &expected {
        match entities.iter().find(|x| x.name == e.name) {
            None => return inconsistent(format!("missing entity `{}`", e.name)),
            Some(x) if x.kind != e.kind => return inconsistent(format!("entity `{}` has kind {:?}", e.name, x.kind)),
            _ => {}
        }
    }
    let expected_ops = crud::generate_crud(schema);
    for op in &expected_ops.ops {
        if ops.op(&op.name).is_none_or(|o| o.kind != op.kind) {
            return inconsistent(format!("missing operation `{}`", op.name));
        }
    }
    Ok(())
}

/// Checks a (possibly hand-edited) intent model against the operations and
/// schema it is meant to drive.
pub fn validate_intent_model(model: &IntentModel, ops: &OperationModel, schema: &DataSchema) -> Vec<Diagnostic> {
    let mut out = Vec::new();

    let mut entity_names = HashSet::new();
    for (i, e) in model.entities.iter().enumerate() {
        let path = format!("entities[{i}]");
        if !entity_names.insert(e.name.as_str()) {
            out.push(Diagnostic::new(
                Rule::DuplicateEntity,
                &e.name,
                &path,
                "entity name used twice",
            ));
        }
        match e.kind {
            EntityKind::CustomValues => {
                let mut values = HashSet::new();
                if e.entries.is_empty() {
                    out.push(Diagnostic::new(
                        Rule::InvalidEntity,
                        &e.name,
                        &path,
                        "custom entity has no entries",
                    ));
                }
                for (j, entry) in e.entries.iter().enumerate() {
                    if entry.value.trim().is_empty() || !values.insert(entry.value.to_lowercase()) {
                        out.push(Diagnostic::new(
                            Rule::InvalidEntity,
                            &e.name,
                            format!("{path}.entries[{j}]"),
                            format!("entry value `{}` is empty or repeated", entry.value),
                        ));
                    }
                }
            }
            EntityKind::NumberLiteral | EntityKind::DateLiteral => {
                if !e.entries.is_empty() {
                    out.push(Diagnostic::new(
                        Rule::InvalidEntity,
                        &e.name,
                        &path,
                        format!("{:?} entities take no entries", e.kind),
                    ));
                }
            }
        }
    }

    let fallbacks: Vec<_> = model.intents.iter().filter(|i| i.action == Action::Fallback).collect();
    if fallbacks.len() != 1 || fallbacks[0].name != model.fallback {
        out.push(Diagnostic::new(
            Rule::FallbackCount,
            &model.fallback,
            "fallback",
            format!(
                "expected exactly one fallback intent named `{}`, found {}",
                model.fallback,
                fallbacks.len()
            ),
        ));
    }

    let mut intent_names = HashSet::new();
    for (i, intent) in model.intents.iter().enumerate() {
        let path = format!("intents[{i}]");
        let mut diag =
            |rule, sub_path: String, detail: String| out.push(Diagnostic::new(rule, &intent.name, sub_path, detail));
        if !intent_names.insert(intent.name.as_str()) {
            diag(
                Rule::DuplicateIntent,
                path.clone(),
                format!("intent `{}` is defined twice", intent.name),
            );
        }
        let mut params: HashMap<&str, &Parameter> = HashMap::new();
        for (j, p) in intent.parameters.iter().enumerate() {
            if params.insert(p.name.as_str(), p).is_some() {
                diag(
                    Rule::DuplicateParameter,
                    format!("{path}.parameters[{j}]"),
                    format!("parameter `{}` declared twice", p.name),
                );
            }
            if model.entity(&p.entity).is_none() {
                diag(
                    Rule::UnknownEntity,
                    format!("{path}.parameters[{j}]"),
                    format!("entity `{}` does not exist", p.entity),
                );
            }
        }
        if intent.training_sentences.is_empty() && intent.action != Action::Fallback {
            diag(
                Rule::NoTrainingSentences,
                path.clone(),
                "intent has no training sentences".into(),
            );
        }
        for (j, s) in intent.training_sentences.iter().enumerate() {
            let spath = format!("{path}.training_sentences[{j}]");
            match s.segments() {
                Err(e) => diag(Rule::MalformedTemplate, spath, e),
                Ok(segs) => {
                    for seg in segs {
                        if let Segment::Slot(slot) = seg {
                            if !params.contains_key(slot) {
                                diag(
                                    Rule::UnboundSlot,
                                    spath.clone(),
                                    format!("slot {{{slot}}} has no parameter"),
                                );
                            }
                        }
                    }
                }
            }
        }

        match &intent.action {
            Action::Help | Action::Fallback => {}
            Action::Operation { op, filters } => {
                let Some(crud_op) = ops.op(op) else {
                    diag(
                        Rule::UnresolvedAction,
                        format!("{path}.action"),
                        format!("operation `{op}` does not exist"),
                    );
                    continue;
                };
                for (j, cond) in filters.iter().enumerate() {
                    let fpath = format!("{path}.action.filters[{j}]");
                    let Some(field) = schema.field(cond.field()) else {
                        diag(
                            Rule::UnknownField,
                            fpath,
                            format!("field `{}` does not exist", cond.field()),
                        );
                        continue;
                    };
                    let mut entities_ok = true;
                    for pname in cond.params() {
                        match params.get(pname) {
                            None => {
                                diag(
                                    Rule::InvalidFilter,
                                    fpath.clone(),
                                    format!("parameter `{pname}` is not declared"),
                                );
                                entities_ok = false;
                            }
                            Some(p) => {
                                let kind = model.entity(&p.entity).map(|e| e.kind);
                                let wanted = match cond {
                                    Condition::Equals { .. } => None,
                                    Condition::GreaterThan { .. } | Condition::LessThan { .. } => {
                                        Some((EntityKind::NumberLiteral, DataType::Numeric))
                                    }
                                    Condition::Between { .. } => Some((EntityKind::DateLiteral, DataType::DateTime)),
                                };
                                if let Some((ekind, dtype)) = wanted {
                                    if kind.is_some_and(|k| k != ekind) || field.datatype != dtype {
                                        diag(
                                            Rule::InvalidFilter,
                                            fpath.clone(),
                                            format!("comparison needs a {dtype:?} field and a {ekind:?} parameter"),
                                        );
                                        entities_ok = false;
                                    }
                                }
                            }
                        }
                    }
                    if let (Condition::Equals { param, .. }, true) = (cond, entities_ok) {
                        let entity = params.get(param.as_str()).and_then(|p| model.entity(&p.entity));
                        if let Some(e) = entity.filter(|e| e.kind == EntityKind::CustomValues && field.categorical) {
                            for entry in &e.entries {
                                if !field
                                    .category_values
                                    .iter()
                                    .any(|v| v.eq_ignore_ascii_case(&entry.value))
                                {
                                    diag(
                                        Rule::UnknownCategoryValue,
                                        fpath.clone(),
                                        format!("`{}` is not a value of field `{}`", entry.value, field.name),
                                    );
                                }
                            }
                        }
                    }
                }
                if crud_op.kind == CrudKind::ReadByField {
                    let target = crud_op.target_field.as_deref().unwrap_or_default();
                    let has_equals = filters
                        .iter()
                        .any(|c| matches!(c, Condition::Equals { field, .. } if field == target));
                    if !has_equals {
                        diag(
                            Rule::InvalidFilter,
                            format!("{path}.action"),
                            format!("`{op}` needs an equals filter on `{target}`"),
                        );
                    }
                }
            }
        }
    }
    out
}
