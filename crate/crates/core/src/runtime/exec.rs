//! Running a matched intent's operation over the table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::matcher::MatchResult;
use super::ner::EntityValue;
use super::{format_number, RuntimeConfig};
use crate::conversation::{parse_template, Action, Condition, EntityKind, Intent, IntentModel, Segment};
use crate::crud::{AggFn, CrudKind, CrudOp, OperationModel};
use crate::ingest::RawTable;
use crate::literal::{parse_date, parse_number};
use crate::schema::DataSchema;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReplyKind {
    Rows,
    Scalar,
    Prompt,
    Help,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowOut {
    pub index: usize,
    pub cells: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BotReply {
    pub kind: ReplyKind,
    pub rows: Option<Vec<RowOut>>,
    pub scalar: Option<ScalarValue>,
    pub text: String,
    /// Intent that produced the reply.
    pub intent: String,
    pub score: f64,
}

impl BotReply {
    pub(crate) fn text(kind: ReplyKind, text: impl Into<String>, intent: &str, score: f64) -> Self {
        BotReply {
            kind,
            rows: None,
            scalar: None,
            text: text.into(),
            intent: intent.to_string(),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("changing the data is disabled")]
    MutationDisabled,
    #[error("no data to compute {0}")]
    EmptyAggregate(String),
    #[error("intent `{0}` does not exist")]
    UnknownIntent(String),
    #[error("operation `{0}` does not exist")]
    UnknownOperation(String),
    #[error("field `{0}` does not exist")]
    UnknownField(String),
    #[error("parameter `{0}` is not bound")]
    Unbound(String),
}

/// Result of running an operation; mutating operations also return the
/// changed copy of the table.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub reply: BotReply,
    pub table: Option<RawTable>,
}

/// Borrowed view of everything an operation needs.
pub struct ExecContext<'a> {
    pub schema: &'a DataSchema,
    pub intents: &'a IntentModel,
    pub ops: &'a OperationModel,
    pub config: &'a RuntimeConfig,
}

const MAX_ROWS_IN_TEXT: usize = 20;

impl ExecContext<'_> {
    fn column(&self, field: &str) -> Result<usize, ExecError> {
        self.schema
            .field_index(field)
            .ok_or_else(|| ExecError::UnknownField(field.to_string()))
    }

    fn number_cell(&self, cell: &str) -> Option<f64> {
        parse_number(cell.trim(), self.config.decimal_separator)
    }

    fn bound<'r>(&self, result: &'r MatchResult, param: &str) -> Result<&'r EntityValue, ExecError> {
        result
            .bindings
            .get(param)
            .map(|m| &m.value)
            .ok_or_else(|| ExecError::Unbound(param.to_string()))
    }

    /// Indices of rows passing every condition.
    pub fn filter_rows(
        &self,
        table: &RawTable,
        filters: &[Condition],
        result: &MatchResult,
    ) -> Result<Vec<usize>, ExecError> {
        let mut rows: Vec<usize> = (0..table.row_count()).collect();
        for cond in filters {
            let col = self.column(cond.field())?;
            let cell = |i: usize| table.rows[i][col].as_str();
            match cond {
                Condition::Equals { param, .. } => {
                    let wanted = self.bound(result, param)?.as_text().to_lowercase();
                    rows.retain(|&i| cell(i).to_lowercase() == wanted);
                }
                Condition::GreaterThan { param, .. } | Condition::LessThan { param, .. } => {
                    let Some(bound) = number_of(self.bound(result, param)?) else {
                        return Err(ExecError::Unbound(param.clone()));
                    };
                    let greater = matches!(cond, Condition::GreaterThan { .. });
                    rows.retain(|&i| {
                        self.number_cell(cell(i))
                            .is_some_and(|v| if greater { v > bound } else { v < bound })
                    });
                }
                Condition::Between { from, to, .. } => {
                    let (EntityValue::Date(a), EntityValue::Date(b)) =
                        (self.bound(result, from)?, self.bound(result, to)?)
                    else {
                        return Err(ExecError::Unbound(from.clone()));
                    };
                    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                    rows.retain(|&i| {
                        parse_date(cell(i).trim(), &self.config.date_formats).is_some_and(|d| &d >= lo && &d <= hi)
                    });
                }
            }
        }
        Ok(rows)
    }

    pub fn execute(&self, result: &MatchResult, table: &RawTable) -> Result<Execution, ExecError> {
        let intent = self
            .intents
            .intent(&result.intent)
            .ok_or_else(|| ExecError::UnknownIntent(result.intent.clone()))?;
        let (name, score) = (intent.name.as_str(), result.score);
        let reply = match &intent.action {
            Action::Fallback => BotReply::text(ReplyKind::Fallback, FALLBACK_TEXT, name, score),
            Action::Help => BotReply::text(ReplyKind::Help, self.help_text(), name, score),
            Action::Operation { op, filters } => {
                let op = self.ops.op(op).ok_or_else(|| ExecError::UnknownOperation(op.clone()))?;
                return self.run_op(intent, op, filters, result, table);
            }
        };
        Ok(Execution { reply, table: None })
    }

    fn run_op(
        &self,
        intent: &Intent,
        op: &CrudOp,
        filters: &[Condition],
        result: &MatchResult,
        table: &RawTable,
    ) -> Result<Execution, ExecError> {
        let (name, score) = (intent.name.as_str(), result.score);
        if op.mutating && !self.config.enable_mutation {
            return Err(ExecError::MutationDisabled);
        }
        let mut rows = self.filter_rows(table, filters, result)?;
        if op.kind == CrudKind::ReadById {
            if let Some(EntityValue::Number(n)) = result.bindings.get("id").map(|m| &m.value) {
                rows.retain(|&i| i as f64 == *n);
            }
        }
        let scalar = |value: ScalarValue, text: String| {
            Ok(Execution {
                reply: BotReply {
                    kind: ReplyKind::Scalar,
                    rows: None,
                    scalar: Some(value),
                    text,
                    intent: name.to_string(),
                    score,
                },
                table: None,
            })
        };
        match op.kind {
            CrudKind::List | CrudKind::ReadByField | CrudKind::ReadById => Ok(Execution {
                reply: self.rows_reply(table, &rows, name, score),
                table: None,
            }),
            CrudKind::Aggregate => {
                let agg = op.agg_fn.unwrap_or(AggFn::Count);
                if agg == AggFn::Count {
                    let n = rows.len();
                    let what = if filters.is_empty() {
                        "rows in total"
                    } else {
                        "matching rows"
                    };
                    return scalar(ScalarValue::Number(n as f64), format!("There are {n} {what}."));
                }
                let field = op.target_field.as_deref().unwrap_or_default();
                let col = self.column(field)?;
                let values: Vec<f64> = rows
                    .iter()
                    .filter_map(|&i| self.number_cell(&table.rows[i][col]))
                    .collect();
                let label = match agg {
                    AggFn::Min => "minimum",
                    AggFn::Max => "maximum",
                    AggFn::Sum => "total",
                    AggFn::Avg => "average",
                    AggFn::Count => unreachable!(),
                };
                let value = match aggregate(agg, &values) {
                    Some(v) => v,
                    None => return Err(ExecError::EmptyAggregate(format!("the {label} {field}"))),
                };
                scalar(
                    ScalarValue::Number(value),
                    format!("The {label} {} is {}.", field.replace('_', " "), format_number(value)),
                )
            }
            CrudKind::Create | CrudKind::Update | CrudKind::Delete => {
                let mut copy = table.clone();
                let assigned: Vec<(usize, String)> = self
                    .schema
                    .fields
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| !filters.iter().any(|c| c.field() == f.name))
                    .filter_map(|(i, f)| result.bindings.get(&f.name).map(|m| (i, m.value.as_text())))
                    .collect();
                let affected = match op.kind {
                    CrudKind::Create => {
                        let mut row = vec![String::new(); copy.column_count()];
                        for (col, v) in assigned {
                            row[col] = v;
                        }
                        copy.rows.push(row);
                        1
                    }
                    CrudKind::Update => {
                        for &i in &rows {
                            for (col, v) in &assigned {
                                copy.rows[i][*col] = v.clone();
                            }
                        }
                        rows.len()
                    }
                    _ => {
                        let doomed: std::collections::HashSet<usize> = rows.iter().copied().collect();
                        let mut i = 0;
                        copy.rows.retain(|_| {
                            let keep = !doomed.contains(&i);
                            i += 1;
                            keep
                        });
                        rows.len()
                    }
                };
                Ok(Execution {
                    reply: BotReply {
                        kind: ReplyKind::Scalar,
                        rows: None,
                        scalar: Some(ScalarValue::Number(affected as f64)),
                        text: format!("{affected} row(s) changed."),
                        intent: name.to_string(),
                        score,
                    },
                    table: Some(copy),
                })
            }
        }
    }

    fn rows_reply(&self, table: &RawTable, rows: &[usize], intent: &str, score: f64) -> BotReply {
        let mut text = match rows.len() {
            0 => "No rows match.".to_string(),
            1 => "Found 1 row:".to_string(),
            n => format!("Found {n} rows:"),
        };
        for &i in rows.iter().take(MAX_ROWS_IN_TEXT) {
            let cells: Vec<String> = table
                .headers
                .iter()
                .zip(&table.rows[i])
                .map(|(h, c)| format!("{}: {c}", h.trim()))
                .collect();
            let _ = write!(text, "\n- {}", cells.join(", "));
        }
        if rows.len() > MAX_ROWS_IN_TEXT {
            let _ = write!(text, "\n... and {} more", rows.len() - MAX_ROWS_IN_TEXT);
        }
        BotReply {
            kind: ReplyKind::Rows,
            rows: Some(
                rows.iter()
                    .map(|&i| RowOut {
                        index: i,
                        cells: table.rows[i].clone(),
                    })
                    .collect(),
            ),
            scalar: None,
            text,
            intent: intent.to_string(),
            score,
        }
    }

    /// `template` with each slot filled by a plausible value.
    fn example(&self, intent: &Intent, template: &str) -> Option<String> {
        let segments = parse_template(template).ok()?;
        let mut out = String::new();
        for seg in segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(p) => {
                    let entity = self.intents.entity(&intent.parameter(p)?.entity)?;
                    match entity.kind {
                        EntityKind::CustomValues => out.push_str(&entity.entries.first()?.value),
                        EntityKind::NumberLiteral => out.push_str("10"),
                        EntityKind::DateLiteral => {
                            let day = chrono::NaiveDate::from_ymd_opt(2020, 1, 1)?.and_time(chrono::NaiveTime::MIN);
                            out.push_str(&self.config.date_formats.first()?.format(&day))
                        }
                    }
                }
            }
        }
        Some(out)
    }

    pub fn help_text(&self) -> String {
        let mut text = format!("I can answer questions about {}. Its fields are:", self.schema.name);
        for f in &self.schema.fields {
            let _ = write!(text, "\n- {} ({:?}", f.name, f.datatype);
            if f.categorical {
                let shown: Vec<&str> = f.category_values.iter().take(5).map(String::as_str).collect();
                let _ = write!(text, ", one of: {}", shown.join(", "));
                if f.category_values.len() > 5 {
                    text.push_str(", ...");
                }
            }
            text.push(')');
        }
        let examples: Vec<String> = self
            .intents
            .intents
            .iter()
            .filter_map(|i| Some((i, i.training_sentences.first()?)))
            .filter_map(|(i, s)| self.example(i, s.template()))
            .take(4)
            .collect();
        if !examples.is_empty() {
            text.push_str("\nTry for example:");
            for e in examples {
                let _ = write!(text, "\n- {e}");
            }
        }
        text
    }
}

pub(crate) const FALLBACK_TEXT: &str = "Sorry, I did not understand that. Type \"help\" to see what I can answer.";

fn number_of(v: &EntityValue) -> Option<f64> {
    match v {
        EntityValue::Number(n) => Some(*n),
        _ => None,
    }
}

/// `None` when there is nothing to aggregate; the sum of nothing is 0.
pub fn aggregate(agg: AggFn, values: &[f64]) -> Option<f64> {
    match agg {
        AggFn::Count => Some(values.len() as f64),
        AggFn::Sum => Some(values.iter().sum()),
        AggFn::Min => values.iter().copied().reduce(f64::min),
        AggFn::Max => values.iter().copied().reduce(f64::max),
        AggFn::Avg => {
            if values.is_empty() {
                None
            } else {
                Some(values.iter().sum::<f64>() / values.len() as f64)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aggregates() {
        assert_eq!(aggregate(AggFn::Avg, &[100.0, 300.0]), Some(200.0));
        assert_eq!(aggregate(AggFn::Min, &[3.0, -1.0, 2.0]), Some(-1.0));
        assert_eq!(aggregate(AggFn::Max, &[3.0, -1.0, 2.0]), Some(3.0));
        assert_eq!(aggregate(AggFn::Sum, &[]), Some(0.0));
        for agg in [AggFn::Min, AggFn::Max, AggFn::Avg] {
            assert_eq!(aggregate(agg, &[]), None);
        }
    }
}
