//! The bot back-end: entity recognition, intent matching, execution and
//! the single-clarification dialogue loop.

pub mod exec;
pub mod matcher;
pub mod ner;

use serde::{Deserialize, Serialize};

use crate::conversation::IntentModel;
use crate::crud::OperationModel;
use crate::ingest::RawTable;
use crate::literal::{default_date_formats, DateFormat};
use crate::schema::DataSchema;

pub use exec::{BotReply, ExecContext, ExecError, Execution, ReplyKind, RowOut, ScalarValue};
pub use matcher::{tokenize, MatchResult, Matcher};
pub use ner::{recognize_entities, EntityMatch, EntityValue, Recognizer};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuntimeConfig {
    /// A match must score strictly above this to beat the fallback.
    pub match_threshold: f64,
    pub enable_mutation: bool,
    pub date_formats: Vec<DateFormat>,
    pub decimal_separator: char,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        RuntimeConfig {
            match_threshold: 0.5,
            enable_mutation: false,
            date_formats: default_date_formats(),
            decimal_separator: '.',
        }
    }
}

pub(crate) fn format_number(n: f64) -> String {
    if n.fract() == 0.0 && n.abs() < 1e15 {
        format!("{}", n as i64)
    } else {
        format!("{n}")
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Pending {
    result: MatchResult,
    param: String,
    reprompted: bool,
}

/// Per-user dialogue state.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub id: String,
    pending: Option<Pending>,
    working: Option<RawTable>,
}

impl Session {
    pub fn new(id: impl Into<String>) -> Self {
        Session {
            id: id.into(),
            pending: None,
            working: None,
        }
    }

    /// Parameter the session is waiting for, if any.
    pub fn pending_parameter(&self) -> Option<&str> {
        self.pending.as_ref().map(|p| p.param.as_str())
    }

    /// This session's private copy of the table, once a mutation made one.
    pub fn working_table(&self) -> Option<&RawTable> {
        self.working.as_ref()
    }
}

/// A loaded bot: models, data and runtime settings. Immutable once built,
/// so one instance can serve any number of sessions.
pub struct Bot {
    pub schema: DataSchema,
    pub intents: IntentModel,
    pub ops: OperationModel,
    pub table: RawTable,
    pub config: RuntimeConfig,
    recognizer: Recognizer,
    matcher: Matcher,
}

impl Bot {
    pub fn new(
        schema: DataSchema,
        intents: IntentModel,
        ops: OperationModel,
        table: RawTable,
        config: RuntimeConfig,
    ) -> Self {
        let recognizer = Recognizer::new(&intents.entities, &config.date_formats, config.decimal_separator);
        let matcher = Matcher::new(
            &intents,
            config.match_threshold,
            &config.date_formats,
            config.decimal_separator,
        );
        Bot {
            schema,
            intents,
            ops,
            table,
            config,
            recognizer,
            matcher,
        }
    }

    pub fn context(&self) -> ExecContext<'_> {
        ExecContext {
            schema: &self.schema,
            intents: &self.intents,
            ops: &self.ops,
            config: &self.config,
        }
    }

    pub fn recognize(&self, utterance: &str) -> Vec<EntityMatch> {
        self.recognizer.recognize(utterance)
    }

    pub fn match_intent(&self, utterance: &str, matches: &[EntityMatch]) -> MatchResult {
        self.matcher.match_intent(utterance, matches)
    }

    pub fn execute(&self, result: &MatchResult, table: &RawTable) -> Result<Execution, ExecError> {
        self.context().execute(result, table)
    }

    fn fallback(&self) -> BotReply {
        BotReply::text(ReplyKind::Fallback, exec::FALLBACK_TEXT, &self.intents.fallback, 0.0)
    }

    fn prompt(&self, result: &MatchResult, param: &str) -> BotReply {
        let text = self
            .intents
            .intent(&result.intent)
            .and_then(|i| i.parameter(param))
            .map_or_else(|| format!("Which {param}?"), |p| p.prompt.clone());
        BotReply::text(ReplyKind::Prompt, text, &result.intent, result.score)
    }

    fn run(&self, session: &mut Session, result: &MatchResult) -> BotReply {
        let outcome = {
            let table = session.working.as_ref().unwrap_or(&self.table);
            self.execute(result, table)
        };
        match outcome {
            Ok(exec) => {
                if let Some(t) = exec.table {
                    session.working = Some(t);
                }
                exec.reply
            }
            Err(ExecError::EmptyAggregate(what)) => BotReply {
                kind: ReplyKind::Scalar,
                rows: None,
                scalar: Some(ScalarValue::Text("no data".into())),
                text: format!("There is no data to compute {what}."),
                intent: result.intent.clone(),
                score: result.score,
            },
            Err(ExecError::MutationDisabled) => BotReply::text(
                ReplyKind::Fallback,
                "Sorry, changing the data is disabled for this bot.",
                &result.intent,
                result.score,
            ),
            Err(e) => BotReply::text(
                ReplyKind::Fallback,
                format!("Sorry, I could not answer that ({e})."),
                &result.intent,
                result.score,
            ),
        }
    }

    /// Asks for the next missing parameter or runs the operation.
    fn advance(&self, session: &mut Session, result: MatchResult) -> BotReply {
        match result.missing_required.first().cloned() {
            Some(param) => {
                let reply = self.prompt(&result, &param);
                session.pending = Some(Pending {
                    result,
                    param,
                    reprompted: false,
                });
                reply
            }
            None => self.run(session, &result),
        }
    }

    /// One dialogue turn: recognize, match, prompt for a missing required
    /// parameter (at most one re-prompt), or execute.
    pub fn chat(&self, session: &mut Session, utterance: &str) -> BotReply {
        if utterance.trim().is_empty() {
            return self.fallback();
        }
        let matches = self.recognize(utterance);

        if let Some(mut pending) = session.pending.take() {
            let entity = self
                .intents
                .intent(&pending.result.intent)
                .and_then(|i| i.parameter(&pending.param))
                .map(|p| p.entity.clone())
                .unwrap_or_default();
            let fitting: Vec<EntityMatch> = matches.iter().filter_map(|m| self.matcher.coerce(m, &entity)).collect();
            if let [only] = fitting.as_slice() {
                let mut result = pending.result;
                result.bindings.insert(pending.param.clone(), only.clone());
                result.missing_required.retain(|p| p != &pending.param);
                return self.advance(session, result);
            }
            if pending.reprompted {
                return self.fallback();
            }
            pending.reprompted = true;
            let reply = self.prompt(&pending.result, &pending.param);
            session.pending = Some(pending);
            return reply;
        }

        let result = self.match_intent(utterance, &matches);
        if result.intent == self.intents.fallback {
            return self.fallback();
        }
        self.advance(session, result)
    }
}
