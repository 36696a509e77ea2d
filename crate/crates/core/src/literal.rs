//! Literal grammars shared by profiling and entity recognition: plain
//! decimal numbers and a small family of date/time patterns.

use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Parses `text` with the numeric grammar: optional sign, one or more
/// digits, optionally followed by exactly one `decimal_separator` and more
/// digits. Thousands separators and exponents are rejected.
pub fn parse_number(text: &str, decimal_separator: char) -> Option<f64> {
    let body = text.strip_prefix(['+', '-']).unwrap_or(text);
    let (int_part, frac_part) = match body.split_once(decimal_separator) {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    if int_part.is_empty() || !int_part.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if let Some(frac) = frac_part {
        if frac.is_empty() || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
    }
    let normalized: String = text
        .chars()
        .map(|c| if c == decimal_separator { '.' } else { c })
        .collect();
    normalized.parse().ok()
}

/// Regex source (unanchored) matching the numeric grammar.
pub(crate) fn number_pattern(decimal_separator: char) -> String {
    let sep = regex::escape(&decimal_separator.to_string());
    format!(r"[+-]?[0-9]+(?:{sep}[0-9]+)?")
}

/// A date or date-time pattern written with the placeholders `YYYY`, `MM`,
/// `DD`, `hh`, `mm` and `ss`; every other character is literal.
#[derive(Clone)]
pub struct DateFormat {
    pattern: String,
    chrono_format: String,
    has_time: bool,
    regex_source: String,
    anchored: Regex,
}

const PLACEHOLDERS: [(&str, &str, &str); 6] = [
    ("YYYY", "%Y", "[0-9]{4}"),
    ("MM", "%m", "[0-9]{2}"),
    ("DD", "%d", "[0-9]{2}"),
    ("hh", "%H", "[0-9]{2}"),
    ("mm", "%M", "[0-9]{2}"),
    ("ss", "%S", "[0-9]{2}"),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid date format `{pattern}`: {reason}")]
pub struct DateFormatError {
    pub pattern: String,
    pub reason: String,
}

impl DateFormat {
    pub fn new(pattern: &str) -> Result<Self, DateFormatError> {
        let err = |reason: &str| DateFormatError {
            pattern: pattern.to_string(),
            reason: reason.to_string(),
        };
        let mut chrono_format = String::new();
        let mut regex_source = String::new();
        let mut seen = Vec::new();
        let mut rest = pattern;
        'outer: while !rest.is_empty() {
            for (token, chrono_spec, re) in PLACEHOLDERS {
                if let Some(tail) = rest.strip_prefix(token) {
                    if seen.contains(&token) {
                        return Err(err("placeholder used twice"));
                    }
                    seen.push(token);
                    chrono_format.push_str(chrono_spec);
                    regex_source.push_str(re);
                    rest = tail;
                    continue 'outer;
                }
            }
            let c = rest.chars().next().expect("non-empty");
            if matches!(c, 'Y' | 'M' | 'D' | 'h' | 'm' | 's') {
                return Err(err("unknown placeholder"));
            }
            if c == '%' {
                chrono_format.push_str("%%");
            } else {
                chrono_format.push(c);
            }
            regex_source.push_str(&regex::escape(&c.to_string()));
            rest = &rest[c.len_utf8()..];
        }
        for required in ["YYYY", "MM", "DD"] {
            if !seen.contains(&required) {
                return Err(err("a date format needs YYYY, MM and DD"));
            }
        }
        let has_time = seen.iter().any(|t| matches!(*t, "hh" | "mm" | "ss"));
        if has_time && !(seen.contains(&"hh") && seen.contains(&"mm")) {
            return Err(err("a time needs at least hh and mm"));
        }
        let anchored = Regex::new(&format!("^{regex_source}$")).map_err(|e| err(&e.to_string()))?;
        Ok(DateFormat {
            pattern: pattern.to_string(),
            chrono_format,
            has_time,
            regex_source,
            anchored,
        })
    }

    pub fn pattern(&self) -> &str {
        &self.pattern
    }

    /// Unanchored regex source for scanning free text.
    pub(crate) fn regex_source(&self) -> &str {
        &self.regex_source
    }

    /// Parses the whole of `text`. Date-only formats yield midnight.
    pub fn parse(&self, text: &str) -> Option<NaiveDateTime> {
        if !self.anchored.is_match(text) {
            return None;
        }
        if self.has_time {
            if self.pattern.contains("ss") {
                NaiveDateTime::parse_from_str(text, &self.chrono_format).ok()
            } else {
                // chrono requires seconds for a full datetime
                NaiveDateTime::parse_from_str(&format!("{text}:00"), &format!("{}:%S", self.chrono_format)).ok()
            }
        } else {
            NaiveDate::parse_from_str(text, &self.chrono_format)
                .ok()
                .map(|d| d.and_time(NaiveTime::MIN))
        }
    }

    pub fn format(&self, value: &NaiveDateTime) -> String {
        value.format(&self.chrono_format).to_string()
    }
}

/// Tries each format in order.
pub fn parse_date(text: &str, formats: &[DateFormat]) -> Option<NaiveDateTime> {
    formats.iter().find_map(|f| f.parse(text))
}

impl fmt::Debug for DateFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("DateFormat").field(&self.pattern).finish()
    }
}

impl fmt::Display for DateFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pattern)
    }
}

impl PartialEq for DateFormat {
    fn eq(&self, other: &Self) -> bool {
        self.pattern == other.pattern
    }
}

impl Eq for DateFormat {}

impl FromStr for DateFormat {
    type Err = DateFormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DateFormat::new(s)
    }
}

impl Serialize for DateFormat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.pattern)
    }
}

impl<'de> Deserialize<'de> for DateFormat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        DateFormat::new(&s).map_err(serde::de::Error::custom)
    }
}

pub fn default_date_formats() -> Vec<DateFormat> {
    ["YYYY-MM-DD", "YYYY-MM-DDThh:mm:ss", "DD/MM/YYYY"]
        .iter()
        .map(|p| DateFormat::new(p).expect("built-in format"))
        .collect()
}
