//! HTTP chat service over one loaded bundle.
//!
//! | route | method | body |
//! |-------|--------|------|
//! | `/chat` | POST | [`ChatRequest`] in, [`ChatResponse`] out |
//! | `/schema` | GET | the bundle's `DataSchema` |
//! | `/intents` | GET | `[{"name", "templates"}]` |
//! | `/health` | GET | `ok` |
//!
//! Sessions are created on first use and dropped after an idle period.
//! Requests for one session run one at a time; others run in parallel.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use tab2bot_core::runtime::{Bot, BotReply, ReplyKind, ScalarValue, Session};
use tower_http::catch_panic::CatchPanicLayer;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub const DEFAULT_IDLE_EXPIRY: Duration = Duration::from_secs(30 * 60);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub session_id: String,
    pub utterance: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub reply_kind: ReplyKind,
    pub text: String,
    pub rows: Option<Vec<Map<String, Value>>>,
    pub scalar: Option<ScalarValue>,
    pub matched_intent: String,
    pub score: f64,
}

impl ChatResponse {
    pub fn from_reply(reply: BotReply, headers: &[String]) -> Self {
        ChatResponse {
            reply_kind: reply.kind,
            rows: reply.rows.map(|rows| {
                rows.into_iter()
                    .map(|r| {
                        headers
                            .iter()
                            .zip(r.cells)
                            .map(|(h, c)| (h.clone(), Value::String(c)))
                            .collect()
                    })
                    .collect()
            }),
            scalar: reply.scalar,
            text: reply.text,
            matched_intent: reply.intent,
            score: reply.score,
        }
    }
}

struct Slot {
    session: tokio::sync::Mutex<Session>,
    last_used: Mutex<Instant>,
}

pub struct AppState {
    bot: Bot,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
    idle_expiry: Duration,
}

impl AppState {
    pub fn new(bot: Bot, idle_expiry: Duration) -> Self {
        AppState {
            bot,
            sessions: Mutex::new(HashMap::new()),
            idle_expiry,
        }
    }

    /// Fetches or creates the session, dropping any that have gone idle.
    fn slot(&self, id: &str) -> Arc<Slot> {
        let now = Instant::now();
        let mut sessions = self.sessions.lock().unwrap_or_else(|e| e.into_inner());
        sessions.retain(|_, s| {
            let last = *s.last_used.lock().unwrap_or_else(|e| e.into_inner());
            now.duration_since(last) < self.idle_expiry || Arc::strong_count(s) > 1
        });
        let slot = sessions
            .entry(id.to_string())
            .or_insert_with(|| {
                Arc::new(Slot {
                    session: tokio::sync::Mutex::new(Session::new(id)),
                    last_used: Mutex::new(now),
                })
            })
            .clone();
        *slot.last_used.lock().unwrap_or_else(|e| e.into_inner()) = now;
        slot
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

fn error(status: StatusCode, message: &str) -> Response {
    (status, Json(json!({ "error": message }))).into_response()
}

async fn chat(State(state): State<Arc<AppState>>, body: Bytes) -> Response {
    let request: ChatRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, &format!("malformed request: {e}")),
    };
    if request.utterance.trim().is_empty() {
        return error(StatusCode::BAD_REQUEST, "utterance must not be empty");
    }
    let slot = state.slot(&request.session_id);
    let mut session = slot.session.lock().await;
    let reply = state.bot.chat(&mut session, &request.utterance);
    drop(session);
    log::debug!("{} {:?} -> {}", request.session_id, request.utterance, reply.intent);
    Json(ChatResponse::from_reply(reply, &state.bot.table.headers)).into_response()
}

async fn schema(State(state): State<Arc<AppState>>) -> Response {
    Json(&state.bot.schema).into_response()
}

async fn intents(State(state): State<Arc<AppState>>) -> Response {
    let list: Vec<Value> = state
        .bot
        .intents
        .intents
        .iter()
        .map(|i| {
            json!({
                "name": i.name,
                "templates": i.training_sentences.iter().map(|s| s.template()).collect::<Vec<_>>(),
            })
        })
        .collect();
    Json(list).into_response()
}

async fn health() -> &'static str {
    "ok"
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "not found")
}

fn panic_response(_: Box<dyn std::any::Any + Send + 'static>) -> Response {
    log::error!("request handler panicked");
    error(StatusCode::INTERNAL_SERVER_ERROR, "internal error")
}

pub fn router(state: Arc<AppState>, allow_origin: Option<HeaderValue>) -> Router {
    let mut app = Router::new()
        .route("/chat", post(chat))
        .route("/schema", get(schema))
        .route("/intents", get(intents))
        .route("/health", get(health))
        .fallback(not_found)
        .with_state(state)
        .layer(CatchPanicLayer::custom(panic_response));
    if let Some(origin) = allow_origin {
        app = app.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::exact(origin))
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    app
}
