//! The `tab2bot` subcommands.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::http::HeaderValue;
use clap::{Args, Parser, Subcommand};
use tab2bot_core::bundle::{emit_bundle, load_bundle, to_canonical_json, BotConfig, BundleError, BundleWarning};
use tab2bot_core::config::ProjectConfig;
use tab2bot_core::conversation::{build_entity_types, generate_intents};
use tab2bot_core::crud::generate_crud;
use tab2bot_core::diagnostics::Diagnostic;
use tab2bot_core::ingest::{parse_table, IngestError};
use tab2bot_core::literal::DateFormat;
use tab2bot_core::runtime::{Bot, Session};
use tab2bot_core::schema::{infer_schema, validate_schema, DataSchema, SchemaError};
use tab2bot_core::thesaurus::{enrich_with_synonyms, Thesaurus};

use crate::service::{router, AppState, DEFAULT_IDLE_EXPIRY};

#[derive(Debug, Parser)]
#[command(name = "tab2bot", version, about = "Turn a CSV file into a chatbot")]
pub struct Cli {
    /// Default settings file (TOML); flags override it.
    #[arg(long, global = true, env = "TAB2BOT_CONFIG")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Infer a data model from a CSV file.
    Infer {
        input: PathBuf,
        #[arg(long, default_value = "schema.model")]
        out: PathBuf,
        #[command(flatten)]
        inference: InferenceFlags,
    },
    /// Generate a bot bundle from a data model and its table.
    Generate {
        schema: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        thesaurus: Option<PathBuf>,
        #[command(flatten)]
        inference: InferenceFlags,
    },
    /// Serve a bundle over HTTP.
    Serve {
        bundle: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Origin allowed to call the service from a browser.
        #[arg(long)]
        allow_origin: Option<String>,
        #[arg(long)]
        enable_mutation: bool,
    },
    /// Chat with a bundle in the terminal.
    Repl {
        bundle: PathBuf,
        #[arg(long)]
        enable_mutation: bool,
    },
}

#[derive(Debug, Args)]
pub struct InferenceFlags {
    /// Most distinct values a categorical field may have.
    #[arg(long)]
    threshold: Option<usize>,
    /// Fraction of cells allowed to break a column's type.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Date pattern such as `DD.MM.YYYY`; repeat for several.
    #[arg(long = "date-format")]
    date_formats: Vec<String>,
    /// Field delimiter of the input file.
    #[arg(long)]
    delimiter: Option<char>,
}

/// A failed command and the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: io::Error) -> Self {
        Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
    }

    fn validation(diags: &[Diagnostic]) -> Self {
        let mut message = String::from("validation failed:");
        for d in diags {
            let _ = write!(message, "\n  {d}");
        }
        Failure::new(EXIT_VALIDATION, message)
    }
}

impl From<BundleError> for Failure {
    fn from(e: BundleError) -> Self {
        let code = match &e {
            BundleError::Io { .. } | BundleError::ManifestMissing(_) => EXIT_IO,
            BundleError::ParseError { .. } | BundleError::UnsupportedVersion(_) => EXIT_PARSE,
            BundleError::ValidationFailed(_) => EXIT_VALIDATION,
        };
        Failure::new(code, e.to_string())
    }
}

fn ingest_failure(path: &Path, e: IngestError) -> Failure {
    let code = match e {
        IngestError::InvalidConfig(_) => EXIT_USAGE,
        _ => EXIT_PARSE,
    };
    Failure::new(code, format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::io(path, e))
}

fn project_config(path: Option<&Path>) -> Result<ProjectConfig, Failure> {
    let Some(path) = path else {
        return Ok(ProjectConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    ProjectConfig::from_toml(&text).map_err(|e| Failure::new(EXIT_USAGE, format!("{}: {e}", path.display())))
}

impl InferenceFlags {
    fn apply(&self, cfg: &mut ProjectConfig) -> Result<(), Failure> {
        if let Some(t) = self.threshold {
            cfg.inference.diversity_threshold = t;
        }
        if let Some(t) = self.tolerance {
            cfg.inference.type_tolerance = t;
        }
        if !self.date_formats.is_empty() {
            cfg.inference.date_formats = self
                .date_formats
                .iter()
                .map(|p| DateFormat::new(p))
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
        }
        if let Some(d) = self.delimiter {
            cfg.parse.delimiter = d;
        }
        Ok(())
    }
}

fn table_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "table".into())
}

/// Field, type, diversity and categorical flag, one row per field.
pub fn summary_table(schema: &DataSchema) -> String {
    let rows: Vec<[String; 4]> = schema
        .fields
        .iter()
        .map(|f| {
            [
                f.name.clone(),
                format!("{:?}", f.datatype),
                f.diversity.to_string(),
                if f.categorical { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();
    let head = ["field", "type", "diversity", "categorical"].map(String::from);
    let mut widths = head.clone().map(|h| h.len());
    for r in &rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    for r in std::iter::once(&head).chain(&rows) {
        let line: Vec<String> = r.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}

fn infer(config: ProjectConfig, input: &Path, out: &Path) -> Result<(), Failure> {
    let bytes = read(input)?;
    let table = parse_table(&table_name(input), &bytes, &config.parse).map_err(|e| ingest_failure(input, e))?;
    let mut schema = infer_schema(&table, &config.inference).map_err(|e| match e {
        SchemaError::InvalidConfig(m) => Failure::new(EXIT_USAGE, m),
        SchemaError::Ingest(e) => ingest_failure(input, e),
    })?;
    schema.provenance.source = input.display().to_string();
    fs::write(out, to_canonical_json(&schema)).map_err(|e| Failure::io(out, e))?;
    print!("{}", summary_table(&schema));
    println!("wrote {}", out.display());
    Ok(())
}

fn generate(
    config: ProjectConfig,
    schema_path: &Path,
    data: &Path,
    out: &Path,
    thesaurus: Option<&Path>,
) -> Result<(), Failure> {
    let schema_bytes = read(schema_path)?;
    let mut schema: DataSchema = serde_json::from_slice(&schema_bytes).map_err(|e| {
        Failure::new(
            EXIT_PARSE,
            format!("{}:{}:{}: {e}", schema_path.display(), e.line(), e.column()),
        )
    })?;
    let diags: Vec<Diagnostic> = validate_schema(&schema)
        .into_iter()
        .map(|d| d.in_file(&schema_path.display().to_string()))
        .collect();
    if !diags.is_empty() {
        return Err(Failure::validation(&diags));
    }
    if let Some(path) = thesaurus {
        let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let th = Thesaurus::parse(&text).map_err(|e| Failure::new(EXIT_PARSE, format!("{}: {e}", path.display())))?;
        schema = enrich_with_synonyms(&schema, &th);
    }

    let table = parse_table(&schema.name, &read(data)?, &config.parse).map_err(|e| ingest_failure(data, e))?;
    let ops = generate_crud(&schema);
    let intents = generate_intents(&schema, &ops, &build_entity_types(&schema), &config.heuristics)
        .map_err(|e| Failure::new(EXIT_VALIDATION, e.to_string()))?;

    let mut runtime = config.runtime;
    runtime.date_formats = config.inference.date_formats;
    runtime.decimal_separator = config.inference.decimal_separator;
    let bot_config = BotConfig {
        runtime,
        heuristics: config.heuristics,
    };
    emit_bundle(&schema, &intents, &ops, &table, &bot_config, out).map_err(|e| match e {
        BundleError::ValidationFailed(d) => Failure::validation(&d),
        e => e.into(),
    })?;
    println!(
        "wrote {} ({} operations, {} intents)",
        out.display(),
        ops.ops.len(),
        intents.intents.len()
    );
    Ok(())
}

fn load_bot(dir: &Path, enable_mutation: bool) -> Result<Bot, Failure> {
    let mut loaded = load_bundle(dir)?;
    for w in &loaded.warnings {
        match w {
            BundleWarning::FingerprintMismatch { expected, actual } => {
                log::warn!("data file changed since generation ({expected} != {actual})")
            }
        }
    }
    loaded.config.runtime.enable_mutation |= enable_mutation;
    Ok(loaded.into_bot())
}

fn serve(dir: &Path, port: u16, allow_origin: Option<&str>, enable_mutation: bool) -> Result<(), Failure> {
    let bot = load_bot(dir, enable_mutation)?;
    let origin = allow_origin
        .map(|o| HeaderValue::from_str(o).map_err(|_| Failure::new(EXIT_USAGE, format!("bad origin `{o}`"))))
        .transpose()?;
    let app = router(Arc::new(AppState::new(bot, DEFAULT_IDLE_EXPIRY)), origin);
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
            .await
            .map_err(|e| Failure::new(EXIT_IO, format!("port {port}: {e}")))?;
        let addr = listener
            .local_addr()
            .map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
        println!("listening on http://{addr}");
        let _ = io::stdout().flush();
        axum::serve(listener, app)
            .await
            .map_err(|e| Failure::new(EXIT_IO, e.to_string()))
    })
}

/// Runs the dialogue loop over `input`, writing replies to `output`.
pub fn repl_loop(bot: &Bot, input: impl BufRead, mut output: impl Write) -> io::Result<()> {
    let mut session = Session::new("repl");
    write!(output, "> ")?;
    output.flush()?;
    for line in input.lines() {
        let line = line?;
        match line.trim() {
            ":quit" => break,
            ":intents" => {
                for i in &bot.intents.intents {
                    writeln!(output, "{}", i.name)?;
                }
            }
            "" => {}
            utterance => writeln!(output, "{}", bot.chat(&mut session, utterance).text)?,
        }
        write!(output, "> ")?;
        output.flush()?;
    }
    writeln!(output)
}

fn repl(dir: &Path, enable_mutation: bool) -> Result<(), Failure> {
    let bot = load_bot(dir, enable_mutation)?;
    repl_loop(&bot, io::stdin().lock(), io::stdout().lock()).map_err(|e| Failure::new(EXIT_IO, e.to_string()))
}

pub fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = project_config(cli.config.as_deref())?;
    match cli.command {
        Command::Infer { input, out, inference } => {
            inference.apply(&mut config)?;
            infer(config, &input, &out)
        }
        Command::Generate {
            schema,
            data,
            out,
            thesaurus,
            inference,
        } => {
            inference.apply(&mut config)?;
            generate(config, &schema, &data, &out, thesaurus.as_deref())
        }
        Command::Serve {
            bundle,
            port,
            allow_origin,
            enable_mutation,
        } => serve(&bundle, port, allow_origin.as_deref(), enable_mutation),
        Command::Repl {
            bundle,
            enable_mutation,
        } => repl(&bundle, enable_mutation),
    }
}
