//! Turn a CSV file into a working chatbot through a chain of explicit,
//! hand-editable models:
//!
//! 1. [`ingest`] parses the table and profiles its columns;
//! 2. [`schema`] infers the data model (types, diversity, categorical
//!    fields), optionally enriched with [`thesaurus`] synonyms;
//! 3. [`crud`] derives the operations the bot can run;
//! 4. [`conversation`] derives entities and intents;
//! 5. [`bundle`] writes everything to disk and loads it back;
//! 6. [`runtime`] answers utterances against the loaded models.
//!
//! ```
//! use tab2bot_core::prelude::*;
//!
//! let csv = "city,pop\nParis,2100000\nMetz,120000\nParis,2100000\n";
//! let table = parse_table("cities", csv.as_bytes(), &ParseConfig::default()).unwrap();
//! let schema = infer_schema(&table, &InferenceConfig::default()).unwrap();
//! let ops = generate_crud(&schema);
//! let entities = build_entity_types(&schema);
//! let intents = generate_intents(&schema, &ops, &entities, &HeuristicConfig::default()).unwrap();
//!
//! let bot = Bot::new(schema, intents, ops, table, RuntimeConfig::default());
//! let mut session = Session::new("demo");
//! let reply = bot.chat(&mut session, "show rows where city is Paris");
//! assert_eq!(reply.kind, ReplyKind::Rows);
//! assert_eq!(reply.rows.unwrap().len(), 2);
//! ```

pub mod bundle;
pub mod config;
pub mod conversation;
pub mod crud;
pub mod diagnostics;
pub mod ingest;
pub mod literal;
pub mod runtime;
pub mod schema;
pub mod thesaurus;

pub mod prelude {
    pub use crate::bundle::{emit_bundle, load_bundle, BotConfig, BundleManifest, LoadedBundle};
    pub use crate::conversation::{
        build_entity_types, generate_intents, validate_intent_model, HeuristicConfig, IntentModel,
    };
    pub use crate::crud::{generate_crud, validate_operation_model, OperationModel};
    pub use crate::ingest::{column_profile, parse_table, ParseConfig, RawTable};
    pub use crate::runtime::{Bot, BotReply, ReplyKind, RuntimeConfig, ScalarValue, Session};
    pub use crate::schema::{infer_schema, DataSchema, DataType, InferenceConfig};
    pub use crate::thesaurus::{enrich_with_synonyms, Thesaurus};
}

// The guide's code blocks run as doc-tests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/ingest.md")]
    mod ingest {}
    #[doc = include_str!("../../../book/src/schema.md")]
    mod schema {}
    #[doc = include_str!("../../../book/src/operations.md")]
    mod operations {}
    #[doc = include_str!("../../../book/src/conversation.md")]
    mod conversation {}
    #[doc = include_str!("../../../book/src/runtime.md")]
    mod runtime {}
    #[doc = include_str!("../../../book/src/bundles.md")]
    mod bundles {}
}
