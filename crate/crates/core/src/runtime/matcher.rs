//! Token-overlap intent matching.
//!
//! Recognized entity spans are replaced by placeholders before scoring, so
//! only the words around a value decide which intent is chosen. A template
//! scores `|shared tokens| / |template tokens|`, where a template slot is
//! shared with a placeholder whose entity can fill it.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::ner::{fold, EntityMatch, EntityValue};
use crate::conversation::{EntityKind, EntityType, Intent, IntentModel, Segment};
use crate::literal::{parse_date, parse_number, DateFormat};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub intent: String,
    pub score: f64,
    pub bindings: BTreeMap<String, EntityMatch>,
    pub missing_required: Vec<String>,
}

/// Lowercased alphanumeric runs; punctuation and `_` separate tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    fold(text)
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Clone)]
enum TemplateToken {
    Word(String),
    Slot { param: String, entity: String },
}

#[derive(Debug, Clone)]
struct CompiledIntent {
    name: String,
    templates: Vec<Vec<TemplateToken>>,
    required: Vec<String>,
}

/// Precompiled matcher over one intent model.
pub struct Matcher {
    intents: Vec<CompiledIntent>,
    entities: HashMap<String, EntityType>,
    fallback: String,
    threshold: f64,
    date_formats: Vec<DateFormat>,
    decimal_separator: char,
}

fn compile_intent(intent: &Intent) -> CompiledIntent {
    let templates = intent
        .training_sentences
        .iter()
        .filter_map(|s| s.segments().ok())
        .map(|segs| {
            segs.into_iter()
                .flat_map(|seg| match seg {
                    Segment::Text(t) => tokenize(t).into_iter().map(TemplateToken::Word).collect(),
                    Segment::Slot(p) => vec![TemplateToken::Slot {
                        param: p.to_string(),
                        entity: intent.parameter(p).map(|x| x.entity.clone()).unwrap_or_default(),
                    }],
                })
                .collect::<Vec<_>>()
        })
        .filter(|t| !t.is_empty())
        .collect();
    CompiledIntent {
        name: intent.name.clone(),
        templates,
        required: intent
            .parameters
            .iter()
            .filter(|p| p.required)
            .map(|p| p.name.clone())
            .collect(),
    }
}

enum UtteranceToken<'a> {
    Word(String),
    Entity(&'a EntityMatch),
}

struct Scored {
    score: f64,
    bindings: BTreeMap<String, EntityMatch>,
    bound_required: usize,
}

impl Matcher {
    pub fn new(model: &IntentModel, threshold: f64, date_formats: &[DateFormat], decimal_separator: char) -> Self {
        Matcher {
            intents: model
                .intents
                .iter()
                .filter(|i| i.name != model.fallback)
                .map(compile_intent)
                .collect(),
            entities: model.entities.iter().map(|e| (e.name.clone(), e.clone())).collect(),
            fallback: model.fallback.clone(),
            threshold,
            date_formats: date_formats.to_vec(),
            decimal_separator,
        }
    }

    /// Value `m` would take as an instance of `entity`, if it can be one.
    pub fn coerce(&self, m: &EntityMatch, entity: &str) -> Option<EntityMatch> {
        if m.entity == entity {
            return Some(m.clone());
        }
        let target = self.entities.get(entity)?;
        let value = match target.kind {
            EntityKind::CustomValues => {
                let surface = fold(m.surface.trim());
                target
                    .entries
                    .iter()
                    .find(|e| {
                        std::iter::once(&e.value)
                            .chain(&e.synonyms)
                            .any(|s| fold(s.trim()) == surface)
                    })
                    .map(|e| EntityValue::Text(e.value.clone()))?
            }
            EntityKind::NumberLiteral => EntityValue::Number(parse_number(m.surface.trim(), self.decimal_separator)?),
            EntityKind::DateLiteral => EntityValue::Date(parse_date(m.surface.trim(), &self.date_formats)?),
        };
        Some(EntityMatch {
            entity: entity.to_string(),
            value,
            ..m.clone()
        })
    }

    fn score_template(
        &self,
        template: &[TemplateToken],
        words: &HashMap<&str, usize>,
        matches: &[&EntityMatch],
        required: &[String],
    ) -> Scored {
        let mut shared = 0usize;
        let mut template_words: HashMap<&str, usize> = HashMap::new();
        for t in template {
            if let TemplateToken::Word(w) = t {
                *template_words.entry(w.as_str()).or_default() += 1;
            }
        }
        for (w, n) in template_words {
            shared += n.min(words.get(w).copied().unwrap_or(0));
        }

        let slots: Vec<(&str, &str)> = template
            .iter()
            .filter_map(|t| match t {
                TemplateToken::Slot { param, entity } => Some((param.as_str(), entity.as_str())),
                _ => None,
            })
            .collect();
        // Slots take matches in utterance order first; slots left open
        // after that may take any remaining match that fits.
        let mut used = vec![false; matches.len()];
        let mut bindings = BTreeMap::new();
        let mut open = Vec::new();
        let mut next = 0;
        for (param, entity) in &slots {
            if bindings.contains_key(*param) {
                continue;
            }
            let found = (next..matches.len())
                .filter(|&j| !used[j])
                .find_map(|j| self.coerce(matches[j], entity).map(|m| (j, m)));
            match found {
                Some((j, m)) => {
                    used[j] = true;
                    next = j + 1;
                    bindings.insert(param.to_string(), m);
                }
                None => open.push((*param, *entity)),
            }
        }
        for (param, entity) in open {
            let found = (0..matches.len())
                .filter(|&j| !used[j])
                .find_map(|j| self.coerce(matches[j], entity).map(|m| (j, m)));
            if let Some((j, m)) = found {
                used[j] = true;
                bindings.insert(param.to_string(), m);
            }
        }
        shared += slots.iter().filter(|(p, _)| bindings.contains_key(*p)).count();
        Scored {
            score: shared as f64 / template.len() as f64,
            bound_required: required.iter().filter(|r| bindings.contains_key(*r)).count(),
            bindings,
        }
    }

    pub fn match_intent(&self, utterance: &str, matches: &[EntityMatch]) -> MatchResult {
        let mut tokens = Vec::new();
        let mut cursor = 0;
        for m in matches {
            if m.start < cursor || m.end() > utterance.len() {
                continue;
            }
            tokens.extend(
                tokenize(&utterance[cursor..m.start])
                    .into_iter()
                    .map(UtteranceToken::Word),
            );
            tokens.push(UtteranceToken::Entity(m));
            cursor = m.end();
        }
        tokens.extend(tokenize(&utterance[cursor..]).into_iter().map(UtteranceToken::Word));

        let mut words: HashMap<&str, usize> = HashMap::new();
        let mut entity_matches = Vec::new();
        for t in &tokens {
            match t {
                UtteranceToken::Word(w) => *words.entry(w.as_str()).or_default() += 1,
                UtteranceToken::Entity(m) => entity_matches.push(*m),
            }
        }

        let mut best: Option<(&CompiledIntent, Scored)> = None;
        for intent in &self.intents {
            let mut intent_best: Option<Scored> = None;
            for template in &intent.templates {
                let s = self.score_template(template, &words, &entity_matches, &intent.required);
                let better = intent_best
                    .as_ref()
                    .is_none_or(|b| s.score > b.score || (s.score == b.score && s.bound_required > b.bound_required));
                if better {
                    intent_best = Some(s);
                }
            }
            let Some(s) = intent_best else { continue };
            let better = best.as_ref().is_none_or(|(bi, b)| {
                s.score > b.score
                    || (s.score == b.score
                        && (s.bound_required > b.bound_required
                            || (s.bound_required == b.bound_required && intent.name < bi.name)))
            });
            if better {
                best = Some((intent, s));
            }
        }

        match best {
            Some((intent, s)) if s.score > self.threshold => MatchResult {
                intent: intent.name.clone(),
                score: s.score,
                missing_required: intent
                    .required
                    .iter()
                    .filter(|r| !s.bindings.contains_key(*r))
                    .cloned()
                    .collect(),
                bindings: s.bindings,
            },
            _ => MatchResult {
                intent: self.fallback.clone(),
                score: 0.0,
                bindings: BTreeMap::new(),
                missing_required: Vec::new(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conversation::{build_entity_types, generate_intents, HeuristicConfig};
    use crate::crud::generate_crud;
    use crate::literal::default_date_formats;
    use crate::runtime::ner::recognize_entities;
    use crate::schema::{DataSchema, DataType, Field, Provenance};

    fn model() -> IntentModel {
        let s = DataSchema {
            name: "s".into(),
            fields: vec![
                Field {
                    name: "city".into(),
                    display_name: "City".into(),
                    datatype: DataType::Textual,
                    diversity: 2,
                    categorical: true,
                    category_values: vec!["Metz".into(), "Paris".into()],
                    synonyms: vec![],
                },
                Field {
                    name: "pop".into(),
                    display_name: "pop".into(),
                    datatype: DataType::Numeric,
                    diversity: 20,
                    categorical: false,
                    category_values: vec![],
                    synonyms: vec![],
                },
            ],
            row_count: 3,
            provenance: Provenance {
                source: "s".into(),
                config_fingerprint: String::new(),
            },
        };
        let ops = generate_crud(&s);
        generate_intents(&s, &ops, &build_entity_types(&s), &HeuristicConfig::default()).unwrap()
    }

    fn run(utterance: &str) -> MatchResult {
        let m = model();
        let formats = default_date_formats();
        let matches = recognize_entities(utterance, &m.entities, &formats, '.');
        Matcher::new(&m, 0.5, &formats, '.').match_intent(utterance, &matches)
    }

    #[test]
    fn tokens() {
        assert_eq!(tokenize("What's the pop_2020?"), ["what", "s", "the", "pop", "2020"]);
    }

    #[test]
    fn filter_by_city() {
        let r = run("show rows where city is Paris");
        assert_eq!(r.intent, "filter_by_city");
        assert_eq!(r.score, 1.0);
        assert_eq!(r.bindings["city"].value, EntityValue::Text("Paris".into()));
        assert!(r.missing_required.is_empty());
    }

    #[test]
    fn gibberish_falls_back() {
        let r = run("asdf qwer");
        assert_eq!((r.intent.as_str(), r.score), ("fallback", 0.0));
    }

    #[test]
    fn missing_value_is_reported() {
        let r = run("show rows where city is");
        assert_eq!(r.intent, "filter_by_city");
        assert_eq!(r.missing_required, ["city"]);
    }

    #[test]
    fn numeric_filter_binds_threshold() {
        let r = run("list rows with pop greater than 1000");
        assert_eq!(r.intent, "filter_pop_gt");
        assert_eq!(r.bindings["threshold"].value, EntityValue::Number(1000.0));
    }

    #[test]
    fn value_spelling_does_not_change_intent() {
        assert_eq!(run("show rows where city is PARIS").intent, "filter_by_city");
        assert_eq!(run("show rows where city is metz!").intent, "filter_by_city");
    }
}
