//! Validation findings for hand-editable models.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    // schema
    DuplicateField,
    CategoryMismatch,
    DuplicateSynonym,
    SelfSynonym,
    EmptyFieldName,
    TableMismatch,
    // operations
    DuplicateOp,
    UnknownField,
    TypeMismatch,
    MissingTargetField,
    MissingAggFn,
    UnexpectedAggFn,
    MutatingFlagMismatch,
    SchemaNameMismatch,
    // intents
    DuplicateIntent,
    DuplicateEntity,
    DuplicateParameter,
    NoTrainingSentences,
    UnboundSlot,
    MalformedTemplate,
    UnknownEntity,
    InvalidEntity,
    UnresolvedAction,
    InvalidFilter,
    FallbackCount,
    UnknownCategoryValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub rule: Rule,
    /// Name of the offending element (field, op, intent or entity).
    pub subject: String,
    /// Path to the element inside its model, e.g. `intents[3].training_sentences[0]`.
    pub path: String,
    /// Model file the element lives in, when known.
    pub file: Option<String>,
    pub detail: String,
}

impl Diagnostic {
    pub fn new(rule: Rule, subject: impl Into<String>, path: impl Into<String>, detail: impl Into<String>) -> Self {
        Diagnostic {
            rule,
            subject: subject.into(),
            path: path.into(),
            file: None,
            detail: detail.into(),
        }
    }

    pub fn in_file(mut self, file: &str) -> Self {
        self.file = Some(file.to_string());
        self
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(file) = &self.file {
            write!(f, "{file}: ")?;
        }
        write!(f, "{} ({}): {:?}: {}", self.path, self.subject, self.rule, self.detail)
    }
}
