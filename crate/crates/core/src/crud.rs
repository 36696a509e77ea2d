//! CRUD operation model derived from a flat data schema.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Diagnostic, Rule};
use crate::schema::{DataSchema, DataType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CrudKind {
    Create,
    ReadById,
    ReadByField,
    List,
    Update,
    Delete,
    Aggregate,
}

impl CrudKind {
    pub fn is_mutating(self) -> bool {
        matches!(self, CrudKind::Create | CrudKind::Update | CrudKind::Delete)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggFn {
    Count,
    Min,
    Max,
    Sum,
    Avg,
}

impl AggFn {
    pub const NUMERIC: [AggFn; 4] = [AggFn::Min, AggFn::Max, AggFn::Sum, AggFn::Avg];

    pub fn as_str(self) -> &'static str {
        match self {
            AggFn::Count => "count",
            AggFn::Min => "min",
            AggFn::Max => "max",
            AggFn::Sum => "sum",
            AggFn::Avg => "avg",
        }
    }

    pub fn needs_numeric(self) -> bool {
        self != AggFn::Count
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrudOp {
    pub name: String,
    pub kind: CrudKind,
    #[serde(default)]
    pub target_field: Option<String>,
    #[serde(default)]
    pub agg_fn: Option<AggFn>,
    pub mutating: bool,
}

impl CrudOp {
    fn plain(name: &str, kind: CrudKind) -> Self {
        CrudOp {
            name: name.to_string(),
            kind,
            target_field: None,
            agg_fn: None,
            mutating: kind.is_mutating(),
        }
    }

    pub fn read_by(field: &str) -> Self {
        CrudOp {
            target_field: Some(field.to_string()),
            ..CrudOp::plain(&read_by_name(field), CrudKind::ReadByField)
        }
    }

    pub fn aggregate(agg: AggFn, field: Option<&str>) -> Self {
        let name = match field {
            Some(f) => aggregate_name(agg, f),
            None => agg.as_str().to_string(),
        };
        CrudOp {
            target_field: field.map(str::to_string),
            agg_fn: Some(agg),
            ..CrudOp::plain(&name, CrudKind::Aggregate)
        }
    }
}

pub const CREATE_ROW: &str = "create_row";
pub const UPDATE_ROW: &str = "update_row";
pub const DELETE_ROW: &str = "delete_row";
pub const LIST_ROWS: &str = "list_rows";
pub const COUNT: &str = "count";

pub fn read_by_name(field: &str) -> String {
    format!("read_by_{field}")
}

pub fn aggregate_name(agg: AggFn, field: &str) -> String {
    format!("{}_{field}", agg.as_str())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationModel {
    pub schema_name: String,
    pub ops: Vec<CrudOp>,
}

impl OperationModel {
    pub fn op(&self, name: &str) -> Option<&CrudOp> {
        self.ops.iter().find(|o| o.name == name)
    }
}

/// Base set (create, update, delete, list, whole-table count), one
/// read-by-field per categorical field, and min/max/sum/avg per numeric field.
pub fn generate_crud(schema: &DataSchema) -> OperationModel {
    let mut ops = vec![
        CrudOp::plain(CREATE_ROW, CrudKind::Create),
        CrudOp::plain(UPDATE_ROW, CrudKind::Update),
        CrudOp::plain(DELETE_ROW, CrudKind::Delete),
        CrudOp::plain(LIST_ROWS, CrudKind::List),
        CrudOp::aggregate(AggFn::Count, None),
    ];
    ops.extend(
        schema
            .fields
            .iter()
            .filter(|f| f.categorical)
            .map(|f| CrudOp::read_by(&f.name)),
    );
    for f in schema.fields.iter().filter(|f| f.datatype == DataType::Numeric) {
        ops.extend(AggFn::NUMERIC.iter().map(|&agg| CrudOp::aggregate(agg, Some(&f.name))));
    }
    OperationModel {
        schema_name: schema.name.clone(),
        ops,
    }
}

pub fn validate_operation_model(model: &OperationModel, schema: &DataSchema) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if model.schema_name != schema.name {
        out.push(Diagnostic::new(
            Rule::SchemaNameMismatch,
            &model.schema_name,
            "schema_name",
            format!(
                "operations target schema `{}`, not `{}`",
                model.schema_name, schema.name
            ),
        ));
    }
    let mut names = HashSet::new();
    for (i, op) in model.ops.iter().enumerate() {
        let path = format!("ops[{i}]");
        let mut diag = |rule, detail: String| out.push(Diagnostic::new(rule, &op.name, &path, detail));
        if !names.insert(op.name.as_str()) {
            diag(
                Rule::DuplicateOp,
                format!("operation name `{}` is used more than once", op.name),
            );
        }
        if op.mutating != op.kind.is_mutating() {
            diag(
                Rule::MutatingFlagMismatch,
                format!(
                    "{:?} operations must have mutating = {}",
                    op.kind,
                    op.kind.is_mutating()
                ),
            );
        }
        match (op.kind, op.agg_fn) {
            (CrudKind::Aggregate, None) => diag(Rule::MissingAggFn, "aggregate operation without agg_fn".into()),
            (CrudKind::Aggregate, Some(_)) => {}
            (_, Some(_)) => diag(
                Rule::UnexpectedAggFn,
                format!("{:?} operation carries an agg_fn", op.kind),
            ),
            _ => {}
        }
        let needs_target = op.kind == CrudKind::ReadByField || op.agg_fn.is_some_and(AggFn::needs_numeric);
        let target = match &op.target_field {
            Some(t) => match schema.field(t) {
                Some(f) => Some(f),
                None => {
                    diag(Rule::UnknownField, format!("field `{t}` does not exist"));
                    continue;
                }
            },
            None => None,
        };
        match target {
            None if needs_target => diag(
                Rule::MissingTargetField,
                format!("{:?} operation needs a target field", op.kind),
            ),
            Some(f)
                if op.kind == CrudKind::Aggregate
                    && op.agg_fn.is_some_and(AggFn::needs_numeric)
                    && f.datatype != DataType::Numeric =>
            {
                diag(
                    Rule::TypeMismatch,
                    format!(
                        "`{}` needs a numeric field but `{}` is {:?}",
                        op.name, f.name, f.datatype
                    ),
                )
            }
            _ => {}
        }
    }
    out
}
