//! Independent oracles and random inputs for the tab2bot test suites.
//!
//! Nothing here calls into the code paths it is used to check: distinct
//! counts, parse tallies, row scans and aggregates are all recomputed from
//! raw cells with separate, deliberately naive code.

use std::collections::{BTreeMap, HashSet};
use std::sync::LazyLock;

use chrono::NaiveDate;
use proptest::prelude::*;
use regex::Regex;
use tab2bot_core::conversation::{EntityKind, Intent, IntentModel};
use tab2bot_core::ingest::RawTable;

pub const NULL_MARKERS: [&str; 4] = ["", "NA", "N/A", "null"];

pub fn is_empty_cell(cell: &str) -> bool {
    NULL_MARKERS.contains(&cell.trim())
}

/// Distinct non-empty cells, via a plain hash set.
pub fn brute_distinct(cells: &[&str]) -> usize {
    let mut seen = HashSet::new();
    for c in cells {
        if !is_empty_cell(c) {
            seen.insert(c.to_string());
        }
    }
    seen.len()
}

static NUMBER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[+-]?\d+(\.\d+)?$").unwrap());
static ISO: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{4})-(\d{2})-(\d{2})$").unwrap());
static STAMP: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})$").unwrap());
static EU: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^(\d{2})/(\d{2})/(\d{4})$").unwrap());
static SLOT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([A-Za-z0-9_]+)\}").unwrap());

pub fn looks_numeric(cell: &str) -> bool {
    NUMBER.is_match(cell.trim()) && cell.trim().chars().all(|c| c.is_ascii_digit() || "+-.".contains(c))
}

/// Accepts the three default layouts, checking the calendar by hand.
pub fn looks_datetime(cell: &str) -> bool {
    let t = cell.trim();
    let valid = |y: &str, m: &str, d: &str| {
        NaiveDate::from_ymd_opt(y.parse().unwrap(), m.parse().unwrap(), d.parse().unwrap()).is_some()
    };
    if let Some(c) = ISO.captures(t) {
        return valid(&c[1], &c[2], &c[3]);
    }
    if let Some(c) = STAMP.captures(t) {
        let (h, mi, s): (u32, u32, u32) = (c[4].parse().unwrap(), c[5].parse().unwrap(), c[6].parse().unwrap());
        return valid(&c[1], &c[2], &c[3]) && h < 24 && mi < 60 && s < 60;
    }
    if let Some(c) = EU.captures(t) {
        return valid(&c[3], &c[2], &c[1]);
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tallies {
    pub non_empty: usize,
    pub numeric: usize,
    pub datetime: usize,
}

pub fn tallies(cells: &[&str]) -> Tallies {
    let mut t = Tallies {
        non_empty: 0,
        numeric: 0,
        datetime: 0,
    };
    for c in cells.iter().filter(|c| !is_empty_cell(c)) {
        t.non_empty += 1;
        t.numeric += usize::from(looks_numeric(c));
        t.datetime += usize::from(looks_datetime(c));
    }
    t
}

/// Expected type name under numeric > date-time > textual precedence.
pub fn expected_type(t: Tallies) -> &'static str {
    if t.non_empty == 0 {
        "Unknown"
    } else if t.numeric == t.non_empty {
        "Numeric"
    } else if t.datetime == t.non_empty {
        "DateTime"
    } else {
        "Textual"
    }
}

pub fn column(table: &RawTable, col: usize) -> Vec<&str> {
    table.rows.iter().map(|r| r[col].as_str()).collect()
}

/// Rows whose cell equals `value` ignoring case, by full scan.
pub fn scan_equals(table: &RawTable, col: usize, value: &str) -> Vec<usize> {
    let mut out = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        if row[col].to_lowercase() == value.to_lowercase() {
            out.push(i);
        }
    }
    out
}

pub fn scan_numbers(table: &RawTable, col: usize) -> Vec<f64> {
    column(table, col)
        .into_iter()
        .filter(|c| looks_numeric(c))
        .map(|c| c.trim().parse::<f64>().unwrap())
        .collect()
}

pub fn naive_min(values: &[f64]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for &v in values {
        if best.is_none() || v < best.unwrap() {
            best = Some(v);
        }
    }
    best
}

pub fn naive_max(values: &[f64]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for &v in values {
        if best.is_none() || v > best.unwrap() {
            best = Some(v);
        }
    }
    best
}

/// Kahan-compensated sum, so it is not the same summation as the runtime's.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for &v in values {
        let y = v - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}

pub fn relative_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub const NUMBER_SAMPLES: [&str; 2] = ["42", "7.5"];
pub const DATE_SAMPLES: [&str; 2] = ["2021-03-04", "04/03/2021"];

/// A training sentence with every slot filled in.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub utterance: String,
    /// Parameter name to the surface text substituted for it.
    pub substitutions: BTreeMap<String, String>,
}

fn surfaces(model: &IntentModel, entity: &str) -> Vec<String> {
    let Some(e) = model.entity(entity) else {
        return Vec::new();
    };
    match e.kind {
        EntityKind::CustomValues => e
            .entries
            .iter()
            .flat_map(|x| std::iter::once(x.value.clone()).chain(x.synonyms.iter().cloned()))
            .collect(),
        EntityKind::NumberLiteral => NUMBER_SAMPLES.map(String::from).to_vec(),
        EntityKind::DateLiteral => DATE_SAMPLES.map(String::from).to_vec(),
    }
}

/// Every training sentence of `intent` under every combination of entity
/// substitutions.
pub fn render_all(model: &IntentModel, intent: &Intent) -> Vec<Rendered> {
    let mut out = Vec::new();
    for sentence in &intent.training_sentences {
        let template = sentence.template();
        let slots: Vec<String> = SLOT.captures_iter(template).map(|c| c[1].to_string()).collect();
        let mut partial = vec![(template.to_string(), BTreeMap::new())];
        for name in &slots {
            let entity = intent.parameter(name).map(|p| p.entity.as_str()).unwrap_or("");
            let choices = surfaces(model, entity);
            let mut next = Vec::new();
            for (text, subs) in &partial {
                for choice in &choices {
                    let mut subs: BTreeMap<String, String> = subs.clone();
                    subs.insert(name.clone(), choice.clone());
                    next.push((text.replacen(&format!("{{{name}}}"), choice, 1), subs));
                }
            }
            partial = next;
        }
        out.extend(partial.into_iter().map(|(utterance, substitutions)| Rendered {
            utterance,
            substitutions,
        }));
    }
    out
}

/// Small deterministic generator for table contents.
pub struct SplitMix(u64);

impl SplitMix {
    pub fn new(seed: u64) -> Self {
        SplitMix(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

const FIELD_POOL: [&str; 8] = ["city", "kind", "zone", "color", "price", "size", "day", "code"];
const VALUE_POOL: [&str; 10] = [
    "alpha",
    "beta",
    "gamma",
    "delta",
    "omega",
    "north",
    "south",
    "New York",
    "York",
    "Bleu-Vert",
];

/// Builds a random table of 1..=`max_cols` columns mixing low-diversity
/// text, numeric codes, free numbers, dates and unique labels.
pub fn random_table(seed: u64, max_cols: usize, max_rows: usize) -> RawTable {
    let mut rng = SplitMix::new(seed);
    let cols = 1 + rng.below(max_cols);
    let rows = rng.below(max_rows + 1);
    let mut names: Vec<&str> = FIELD_POOL.to_vec();
    let mut headers = Vec::new();
    let mut columns: Vec<Vec<String>> = Vec::new();
    for _ in 0..cols {
        let name = names.remove(rng.below(names.len()));
        headers.push(name.to_string());
        let kind = rng.below(5);
        let pool: Vec<&str> = {
            let k = 1 + rng.below(4);
            let start = rng.below(VALUE_POOL.len());
            (0..k).map(|i| VALUE_POOL[(start + i) % VALUE_POOL.len()]).collect()
        };
        let mut cells = Vec::new();
        for r in 0..rows {
            let cell = if rng.below(10) == 0 {
                String::new()
            } else {
                match kind {
                    0 => pool[rng.below(pool.len())].to_string(),
                    1 => (1 + rng.below(4)).to_string(),
                    2 => format!("{}.{}", rng.below(1000), rng.below(10)),
                    3 => format!(
                        "20{:02}-{:02}-{:02}",
                        rng.below(30),
                        1 + rng.below(12),
                        1 + rng.below(28)
                    ),
                    _ => format!("item{r}"),
                }
            };
            cells.push(cell);
        }
        columns.push(cells);
    }
    RawTable {
        name: "random".into(),
        headers,
        rows: (0..rows)
            .map(|r| columns.iter().map(|c| c[r].clone()).collect())
            .collect(),
    }
}

pub fn table_seed() -> impl Strategy<Value = u64> {
    any::<u64>()
}
