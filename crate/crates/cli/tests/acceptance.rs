//! Acceptance suite: one check per criterion, each printed as a PASS/FAIL
//! line with its timing. Exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use proptest::test_runner::{Config, TestCaseError, TestRunner};
use serde_json::Value;
use tab2bot_core::bundle::{
    emit_bundle, load_bundle, BotConfig, CONFIG_FILE, DATA_FILE, INTENTS_FILE, MANIFEST_FILE, OPERATIONS_FILE,
    SCHEMA_FILE,
};
use tab2bot_core::conversation::{
    build_entity_types, generate_intents, validate_intent_model, Action, Condition, HeuristicConfig, Intent,
    IntentModel, Parameter,
};
use tab2bot_core::crud::{aggregate_name, generate_crud, validate_operation_model, AggFn, OperationModel};
use tab2bot_core::ingest::{parse_table, write_table, ParseConfig, RawTable};
use tab2bot_core::runtime::{
    Bot, EntityMatch, EntityValue, MatchResult, ReplyKind, RuntimeConfig, ScalarValue, Session,
};
use tab2bot_core::schema::{infer_schema, DataSchema, DataType, InferenceConfig};
use tab2bot_core::thesaurus::{enrich_with_synonyms, Thesaurus};
use tab2bot_testkit as tk;

fn repo_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn sample_table() -> RawTable {
    parse_table(
        "museums",
        &fs::read(repo_file("museums.csv")).unwrap(),
        &ParseConfig::default(),
    )
    .unwrap()
}

fn sample_models() -> (DataSchema, OperationModel, IntentModel, RawTable) {
    let table = sample_table();
    let schema = infer_schema(&table, &InferenceConfig::default()).unwrap();
    let thesaurus = Thesaurus::parse(&fs::read_to_string(repo_file("thesaurus.txt")).unwrap()).unwrap();
    let schema = enrich_with_synonyms(&schema, &thesaurus);
    let ops = generate_crud(&schema);
    let intents = generate_intents(&schema, &ops, &build_entity_types(&schema), &HeuristicConfig::default()).unwrap();
    (schema, ops, intents, table)
}

fn type_name(t: DataType) -> &'static str {
    match t {
        DataType::Numeric => "Numeric",
        DataType::DateTime => "DateTime",
        DataType::Textual => "Textual",
        DataType::Unknown => "Unknown",
    }
}

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn schema_oracle() -> Outcome {
    let table = sample_table();
    let schema = infer_schema(&table, &InferenceConfig::default()).map_err(|e| e.to_string())?;
    for (col, f) in schema.fields.iter().enumerate() {
        let cells = tk::column(&table, col);
        let d = tk::brute_distinct(&cells);
        ensure(f.diversity == d, || {
            format!("{}: diversity {} != oracle {d}", f.name, f.diversity)
        })?;
        let expected = tk::expected_type(tk::tallies(&cells));
        ensure(type_name(f.datatype) == expected, || {
            format!("{}: type {:?} != oracle {expected}", f.name, f.datatype)
        })?;
    }
    let kinds: Vec<&str> = schema.fields.iter().map(|f| type_name(f.datatype)).collect();
    Ok(format!("{} fields {:?}", schema.fields.len(), kinds))
}

fn categorical_boundary() -> Outcome {
    let table = sample_table();
    let diversity: Vec<usize> = (0..table.column_count())
        .map(|c| tk::brute_distinct(&tk::column(&table, c)))
        .collect();
    let mut previous = vec![false; diversity.len()];
    for t in 1..=table.row_count() {
        let cfg = InferenceConfig {
            diversity_threshold: t,
            ..InferenceConfig::default()
        };
        let schema = infer_schema(&table, &cfg).map_err(|e| e.to_string())?;
        for (i, f) in schema.fields.iter().enumerate() {
            ensure(!previous[i] || f.categorical, || {
                format!("{} flipped back at {t}", f.name)
            })?;
            let expected = diversity[i] >= 1 && t >= diversity[i];
            ensure(f.categorical == expected, || {
                format!(
                    "{} at threshold {t}: categorical={} but diversity {}",
                    f.name, f.categorical, diversity[i]
                )
            })?;
            previous[i] = f.categorical;
        }
    }
    Ok(format!(
        "thresholds 1..={}, diversities {diversity:?}",
        table.row_count()
    ))
}

fn generator_coherence() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 100,
        failure_persistence: None,
        ..Config::default()
    });
    let strategy = (tk::table_seed(), 1usize..8);
    runner
        .run(&strategy, |(seed, threshold)| {
            let table = tk::random_table(seed, 5, 25);
            let cfg = InferenceConfig {
                diversity_threshold: threshold,
                ..InferenceConfig::default()
            };
            let schema = infer_schema(&table, &cfg).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let ops = generate_crud(&schema);
            let intents = generate_intents(&schema, &ops, &build_entity_types(&schema), &HeuristicConfig::default())
                .map_err(|e| TestCaseError::fail(e.to_string()))?;
            let diags: Vec<String> = validate_operation_model(&ops, &schema)
                .into_iter()
                .chain(validate_intent_model(&intents, &ops, &schema))
                .map(|d| d.to_string())
                .collect();
            if diags.is_empty() {
                Ok(())
            } else {
                Err(TestCaseError::fail(format!("seed {seed}: {diags:?}")))
            }
        })
        .map_err(|e| e.to_string())?;
    Ok("100 random schemas, 0 diagnostics".into())
}

fn self_match() -> Outcome {
    let (schema, ops, intents, table) = sample_models();
    let bot = Bot::new(schema, intents.clone(), ops, table, RuntimeConfig::default());
    let mut checked = 0usize;
    for intent in intents.intents.iter().filter(|i| i.name != intents.fallback) {
        for r in tk::render_all(&intents, intent) {
            let result = bot.match_intent(&r.utterance, &bot.recognize(&r.utterance));
            ensure(result.intent == intent.name, || {
                format!("{:?} matched {} instead of {}", r.utterance, result.intent, intent.name)
            })?;
            ensure(result.missing_required.is_empty(), || {
                format!("{:?} left {:?} unbound", r.utterance, result.missing_required)
            })?;
            for p in &intent.parameters {
                let bound = result.bindings.get(&p.name);
                let wanted = r.substitutions.get(&p.name);
                ensure(
                    bound
                        .zip(wanted)
                        .is_some_and(|(b, w)| b.surface.eq_ignore_ascii_case(w)),
                    || format!("{:?}: {} bound to {:?}", r.utterance, p.name, bound.map(|b| &b.surface)),
                )?;
            }
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} utterances over {} intents",
        intents.intents.len() - 1
    ))
}

/// Adds one aggregate intent per (categorical field, numeric field, agg)
/// whose action carries an equality filter, the way a hand-edited model
/// would.
fn with_filtered_aggregates(schema: &DataSchema, intents: &IntentModel) -> IntentModel {
    let mut model = intents.clone();
    for c in schema.fields.iter().filter(|f| f.categorical) {
        for n in schema.fields.iter().filter(|f| f.datatype == DataType::Numeric) {
            for agg in AggFn::NUMERIC {
                model.intents.push(Intent {
                    name: format!("{}_where_{}", aggregate_name(agg, &n.name), c.name),
                    training_sentences: Vec::new(),
                    parameters: vec![Parameter {
                        name: c.name.clone(),
                        entity: format!("{}_value", c.name),
                        required: true,
                        prompt: String::new(),
                    }],
                    action: Action::Operation {
                        op: aggregate_name(agg, &n.name),
                        filters: vec![Condition::Equals {
                            field: c.name.clone(),
                            param: c.name.clone(),
                        }],
                    },
                });
            }
        }
        model.intents.push(Intent {
            name: format!("count_where_{}", c.name),
            training_sentences: Vec::new(),
            parameters: Vec::new(),
            action: Action::Operation {
                op: "count".into(),
                filters: vec![Condition::Equals {
                    field: c.name.clone(),
                    param: c.name.clone(),
                }],
            },
        });
    }
    model
}

fn bound(intent: &str, param: &str, value: &str) -> MatchResult {
    MatchResult {
        intent: intent.into(),
        score: 1.0,
        bindings: BTreeMap::from([(
            param.to_string(),
            EntityMatch {
                entity: format!("{param}_value"),
                start: 0,
                len: value.len(),
                surface: value.into(),
                value: EntityValue::Text(value.into()),
            },
        )]),
        missing_required: Vec::new(),
    }
}

fn number(reply: &tab2bot_core::runtime::BotReply) -> Option<f64> {
    match reply.scalar {
        Some(ScalarValue::Number(n)) => Some(n),
        _ => None,
    }
}

fn query_oracle() -> Outcome {
    let (schema, ops, intents, table) = sample_models();
    let intents = with_filtered_aggregates(&schema, &intents);
    let bot = Bot::new(
        schema.clone(),
        intents.clone(),
        ops,
        table.clone(),
        RuntimeConfig::default(),
    );
    let mut session = Session::new("oracle");
    let mut pairs = 0;
    let mut aggregates = 0;
    for (c, cf) in schema.fields.iter().enumerate().filter(|(_, f)| f.categorical) {
        for value in &cf.category_values {
            pairs += 1;
            let expected = tk::scan_equals(&table, c, value);
            let reply = bot.chat(&mut session, &format!("show rows where {} is {value}", cf.name));
            let got: Vec<usize> = reply.rows.iter().flatten().map(|r| r.index).collect();
            ensure(got == expected, || {
                format!("{}={value}: rows {got:?} != oracle {expected:?}", cf.name)
            })?;

            let count = bot
                .execute(&bound(&format!("count_where_{}", cf.name), &cf.name, value), &table)
                .map_err(|e| e.to_string())?;
            ensure(number(&count.reply) == Some(expected.len() as f64), || {
                format!("count {}={value}: {:?}", cf.name, count.reply.scalar)
            })?;

            let subset = RawTable {
                rows: expected.iter().map(|&i| table.rows[i].clone()).collect(),
                ..table.clone()
            };
            for (n, nf) in schema
                .fields
                .iter()
                .enumerate()
                .filter(|(_, f)| f.datatype == DataType::Numeric)
            {
                let values = tk::scan_numbers(&subset, n);
                for agg in AggFn::NUMERIC {
                    aggregates += 1;
                    let name = format!("{}_where_{}", aggregate_name(agg, &nf.name), cf.name);
                    let got = bot
                        .execute(&bound(&name, &cf.name, value), &table)
                        .ok()
                        .and_then(|e| number(&e.reply));
                    let oracle = match agg {
                        AggFn::Min => tk::naive_min(&values),
                        AggFn::Max => tk::naive_max(&values),
                        AggFn::Sum => Some(tk::compensated_sum(&values)),
                        AggFn::Avg => (!values.is_empty()).then(|| tk::compensated_sum(&values) / values.len() as f64),
                        AggFn::Count => unreachable!(),
                    };
                    let ok = match (agg, got, oracle) {
                        (AggFn::Min | AggFn::Max, g, o) => g == o,
                        (_, Some(g), Some(o)) => tk::relative_close(g, o, 1e-9),
                        (_, g, o) => g == o,
                    };
                    ensure(ok, || format!("{name} for {value}: {got:?} != oracle {oracle:?}"))?;
                }
            }
        }
    }
    for (n, nf) in schema
        .fields
        .iter()
        .enumerate()
        .filter(|(_, f)| f.datatype == DataType::Numeric)
    {
        let values = tk::scan_numbers(&table, n);
        let max = bot.chat(&mut session, &format!("what is the maximum {}", nf.name));
        ensure(number(&max) == tk::naive_max(&values), || {
            format!("max {}: {:?}", nf.name, max.scalar)
        })?;
        let avg = bot.chat(&mut session, &format!("what is the average {}", nf.name));
        let oracle = tk::compensated_sum(&values) / values.len() as f64;
        ensure(
            number(&avg).is_some_and(|a| tk::relative_close(a, oracle, 1e-9)),
            || format!("avg {}: {:?} != {oracle}", nf.name, avg.scalar),
        )?;
    }
    let count = bot.chat(&mut session, "how many rows are there");
    ensure(number(&count) == Some(table.row_count() as f64), || {
        format!("row count {:?}", count.scalar)
    })?;
    Ok(format!(
        "{pairs} (field, value) filters, {aggregates} filtered aggregates"
    ))
}

const BUNDLE_FILES: [&str; 6] = [
    MANIFEST_FILE,
    SCHEMA_FILE,
    OPERATIONS_FILE,
    INTENTS_FILE,
    DATA_FILE,
    CONFIG_FILE,
];

fn round_trip() -> Outcome {
    let (schema, ops, intents, table) = sample_models();
    let first = tempfile::tempdir().map_err(|e| e.to_string())?;
    emit_bundle(&schema, &intents, &ops, &table, &BotConfig::default(), first.path()).map_err(|e| e.to_string())?;
    let loaded = load_bundle(first.path()).map_err(|e| e.to_string())?;
    ensure(loaded.schema == schema, || "schema differs".into())?;
    ensure(loaded.ops == ops, || "operations differ".into())?;
    ensure(loaded.intents == intents, || "intents differ".into())?;
    ensure(loaded.table == table, || "table differs".into())?;
    ensure(loaded.config == BotConfig::default(), || "config differs".into())?;
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    emit_bundle(
        &loaded.schema,
        &loaded.intents,
        &loaded.ops,
        &loaded.table,
        &loaded.config,
        second.path(),
    )
    .map_err(|e| e.to_string())?;
    let mut bytes = 0;
    for f in BUNDLE_FILES {
        let a = fs::read(first.path().join(f)).map_err(|e| e.to_string())?;
        let b = fs::read(second.path().join(f)).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("{f} differs after re-emit"))?;
        bytes += a.len();
    }
    Ok(format!("6 files, {bytes} bytes identical"))
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_tab2bot"))
        .args(args)
        .env_remove("TAB2BOT_CONFIG")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("tab2bot {args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn post_chat(addr: &str, body: &str) -> Result<Value, String> {
    let mut stream = TcpStream::connect(addr).map_err(|e| e.to_string())?;
    stream
        .set_read_timeout(Some(Duration::from_secs(5)))
        .map_err(|e| e.to_string())?;
    write!(
        stream,
        "POST /chat HTTP/1.1\r\nHost: {addr}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )
    .map_err(|e| e.to_string())?;
    let mut response = String::new();
    stream.read_to_string(&mut response).map_err(|e| e.to_string())?;
    let (head, payload) = response.split_once("\r\n\r\n").ok_or("no HTTP body")?;
    ensure(head.starts_with("HTTP/1.1 200"), || {
        format!("status line {:?}", head.lines().next())
    })?;
    serde_json::from_str(payload).map_err(|e| format!("{e}: {payload}"))
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let csv = repo_file("museums.csv");
    let schema_path = dir.path().join("schema.model");
    let bundle = dir.path().join("bot");
    let csv_arg = csv.to_str().unwrap();
    run_cli(&["infer", csv_arg, "--out", schema_path.to_str().unwrap()])?;
    run_cli(&[
        "generate",
        schema_path.to_str().unwrap(),
        "--data",
        csv_arg,
        "--out",
        bundle.to_str().unwrap(),
    ])?;

    let mut child = Command::new(env!("CARGO_BIN_EXE_tab2bot"))
        .args(["serve", bundle.to_str().unwrap(), "--port", "0"])
        .env_remove("TAB2BOT_CONFIG")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let stdout = child.stdout.take().ok_or("no stdout")?;
    let server = Server(child);
    let mut line = String::new();
    BufReader::new(stdout).read_line(&mut line).map_err(|e| e.to_string())?;
    let addr = line
        .trim()
        .strip_prefix("listening on http://")
        .ok_or_else(|| format!("unexpected banner {line:?}"))?
        .to_string();

    let table = sample_table();
    let schema = infer_schema(&table, &InferenceConfig::default()).map_err(|e| e.to_string())?;
    let ops = generate_crud(&schema);
    let intents = generate_intents(&schema, &ops, &build_entity_types(&schema), &HeuristicConfig::default()).unwrap();
    let mut requests = 0;
    for (col, f) in schema.fields.iter().enumerate().filter(|(_, f)| f.categorical) {
        let intent = intents
            .intent(&format!("filter_by_{}", f.name))
            .ok_or("missing H1 intent")?;
        let template = intent.training_sentences[0].template();
        for value in &f.category_values {
            let utterance = template.replace(&format!("{{{}}}", f.name), value);
            let body = serde_json::json!({ "session_id": format!("e2e-{requests}"), "utterance": utterance });
            let reply = post_chat(&addr, &body.to_string())?;
            requests += 1;
            ensure(reply["reply_kind"] == "Rows", || format!("{utterance:?}: {reply}"))?;
            let got: Vec<Vec<String>> = reply["rows"]
                .as_array()
                .ok_or("rows missing")?
                .iter()
                .map(|row| {
                    table
                        .headers
                        .iter()
                        .map(|h| row[h].as_str().unwrap_or("<missing>").to_string())
                        .collect()
                })
                .collect();
            let expected: Vec<Vec<String>> = tk::scan_equals(&table, col, value)
                .into_iter()
                .map(|i| table.rows[i].clone())
                .collect();
            ensure(got == expected, || {
                format!("{utterance:?}: {} rows != oracle {}", got.len(), expected.len())
            })?;
        }
    }
    drop(server);
    Ok(format!("{requests} H1 utterances over HTTP at {addr}"))
}

fn no_mutation() -> Outcome {
    let (schema, ops, intents, table) = sample_models();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    emit_bundle(&schema, &intents, &ops, &table, &BotConfig::default(), dir.path()).map_err(|e| e.to_string())?;
    let loaded = load_bundle(dir.path()).map_err(|e| e.to_string())?;
    ensure(!loaded.config.runtime.enable_mutation, || {
        "mutation enabled by default".into()
    })?;
    let bot = loaded.clone().into_bot();

    let mut pool: Vec<String> = intents
        .intents
        .iter()
        .flat_map(|i| tk::render_all(&intents, i))
        .map(|r| r.utterance)
        .collect();
    pool.extend(
        [
            "delete rows where city is Paris",
            "update rows where category is Art",
            "add a row with city Lyon",
            "show rows where city is",
            "Metz",
            "asdf qwer",
            "help",
        ]
        .map(String::from),
    );
    let mut rng = tk::SplitMix::new(0x5eed);
    let mut sessions: Vec<Session> = (0..4).map(|i| Session::new(format!("s{i}"))).collect();
    let mut kinds = BTreeMap::new();
    for _ in 0..100 {
        let s = rng.below(sessions.len());
        let reply = bot.chat(&mut sessions[s], &pool[rng.below(pool.len())]);
        *kinds.entry(format!("{:?}", reply.kind)).or_insert(0) += 1;
    }
    let written = write_table(&bot.table, &ParseConfig::default()).map_err(|e| e.to_string())?;
    let on_disk = fs::read(dir.path().join(DATA_FILE)).map_err(|e| e.to_string())?;
    ensure(written == on_disk, || "table no longer matches data.csv".into())?;
    ensure(sessions.iter().all(|s| s.working_table().is_none()), || {
        "a session holds a modified table".into()
    })?;
    ensure(kinds.contains_key(&format!("{:?}", ReplyKind::Rows)), || {
        "no turn returned rows".into()
    })?;
    Ok(format!("100 turns {kinds:?}, data.csv byte-identical"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("schema-inference oracle", Duration::from_secs(1), schema_oracle),
        ("categorical boundary", Duration::from_secs(1), categorical_boundary),
        ("generator coherence", Duration::MAX, generator_coherence),
        ("self-match completeness", Duration::from_secs(10), self_match),
        ("query/aggregate oracle", Duration::from_secs(5), query_oracle),
        ("bundle round-trip", Duration::MAX, round_trip),
        ("end-to-end CLI + HTTP", Duration::from_secs(10), end_to_end),
        ("no-mutation guarantee", Duration::MAX, no_mutation),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("acceptance PASS {name} ({elapsed:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("acceptance FAIL {name} ({elapsed:.2?}): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
