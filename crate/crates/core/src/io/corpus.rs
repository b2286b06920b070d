//! DialogRE-style corpus JSON: an array of `[turns, relations]` records.

use std::path::Path;

use serde_json::{json, Map, Value};

use super::{read_to_string, sidecar, write_atomic, FieldMap};
use crate::dialogue::{validate_with, ArgumentPair, Dialogue, Utterance, ValidationReport};
use crate::error::{Error, Result};
use crate::relations::RelationInventory;

/// Loads a corpus file and optional chain sidecar, then validates every
/// dialogue. Any violation fails the load with the full report attached.
pub fn load_corpus(path: &Path, sidecar_path: Option<&Path>, fields: &FieldMap, inventory: &RelationInventory) -> Result<Vec<Dialogue>> {
    let dialogues = load_corpus_unvalidated(path, sidecar_path, fields)?;
    let mut report = ValidationReport::default();
    for d in &dialogues {
        report.extend(validate_with(d, inventory));
    }
    if report.is_valid() {
        Ok(dialogues)
    } else {
        Err(Error::Validation(report))
    }
}

pub fn load_corpus_unvalidated(path: &Path, sidecar_path: Option<&Path>, fields: &FieldMap) -> Result<Vec<Dialogue>> {
    let text = read_to_string(path)?;
    let split = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("corpus")
        .to_string();
    let mut dialogues = parse_corpus(&text, &split, &path.display().to_string())?;
    if let Some(sp) = sidecar_path {
        let sc = sidecar::parse_sidecar(&read_to_string(sp)?, fields, &sp.display().to_string())?;
        sidecar::attach_sidecar(&mut dialogues, sc)?;
    }
    Ok(dialogues)
}

/// Parses corpus JSON text. Dialogue ids are `{split}-{position}`.
pub fn parse_corpus(text: &str, split: &str, context: &str) -> Result<Vec<Dialogue>> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: context.to_string(),
        message: e.to_string(),
    })?;
    let records = value.as_array().ok_or_else(|| schema(context, "top level must be an array"))?;
    records
        .iter()
        .enumerate()
        .map(|(i, r)| dialogue_from_record(r, format!("{split}-{i}"), &format!("{context}[{i}]")))
        .collect()
}

pub fn dialogue_from_record(record: &Value, id: String, context: &str) -> Result<Dialogue> {
    let parts = record
        .as_array()
        .filter(|a| a.len() == 2)
        .ok_or_else(|| schema(context, "record must be [turns, relations]"))?;
    let turns = parts[0]
        .as_array()
        .ok_or_else(|| schema(context, "turns must be an array of strings"))?;
    if turns.is_empty() {
        return Err(schema(context, "record has no turns"));
    }
    let mut utterances = Vec::with_capacity(turns.len());
    for (i, t) in turns.iter().enumerate() {
        let t = t
            .as_str()
            .ok_or_else(|| schema(context, &format!("turn {i} is not a string")))?;
        let (speaker, body) =
            split_turn(t).ok_or_else(|| schema(context, &format!("turn {i} lacks a speaker prefix: {t:?}")))?;
        utterances.push(Utterance::new(i, speaker, body));
    }
    let rels = parts[1]
        .as_array()
        .ok_or_else(|| schema(context, "relations must be an array"))?;
    if rels.is_empty() {
        return Err(schema(context, "record has no relation entries"));
    }
    let pairs = rels
        .iter()
        .enumerate()
        .map(|(i, r)| pair_from_value(r, &format!("{context}.relations[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dialogue {
        id,
        utterances,
        pairs,
        chains: Vec::new(),
    })
}

/// Splits `"S1: hello"` into `("S1", "hello")`.
fn split_turn(turn: &str) -> Option<(&str, &str)> {
    let (prefix, rest) = turn.split_once(':')?;
    let prefix = prefix.trim();
    if prefix.is_empty() || prefix.chars().count() > 64 {
        return None;
    }
    Some((prefix, rest.trim_start()))
}

fn pair_from_value(v: &Value, context: &str) -> Result<ArgumentPair> {
    let obj = v.as_object().ok_or_else(|| schema(context, "relation entry must be an object"))?;
    let string = |key: &str, required: bool| -> Result<String> {
        match obj.get(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            None if !required => Ok(String::new()),
            _ => Err(schema(context, &format!("missing or non-string field {key:?}"))),
        }
    };
    let strings = |key: &str, required: bool| -> Result<Vec<String>> {
        match obj.get(key) {
            Some(Value::Array(a)) => a
                .iter()
                .map(|x| {
                    x.as_str()
                        .map(String::from)
                        .ok_or_else(|| schema(context, &format!("{key:?} must hold strings")))
                })
                .collect(),
            None if !required => Ok(Vec::new()),
            _ => Err(schema(context, &format!("missing or non-array field {key:?}"))),
        }
    };
    let relation_ids = match obj.get("rid") {
        None => Vec::new(),
        Some(Value::Array(a)) => a
            .iter()
            .map(|x| {
                x.as_u64()
                    .map(|n| n as u32)
                    .ok_or_else(|| schema(context, "\"rid\" must hold non-negative integers"))
            })
            .collect::<Result<_>>()?,
        Some(_) => return Err(schema(context, "\"rid\" must be an array")),
    };
    Ok(ArgumentPair {
        subject: string("x", true)?,
        object: string("y", true)?,
        subject_type: string("x_type", false)?,
        object_type: string("y_type", false)?,
        relations: strings("r", true)?,
        relation_ids,
        triggers: strings("t", false)?,
    })
}

pub fn dialogue_to_record(d: &Dialogue) -> Value {
    let turns: Vec<Value> = d
        .utterances
        .iter()
        .map(|u| Value::String(format!("{}: {}", u.speaker_id, u.text)))
        .collect();
    let rels: Vec<Value> = d
        .pairs
        .iter()
        .map(|p| {
            let mut m = Map::new();
            m.insert("x".into(), json!(p.subject));
            m.insert("y".into(), json!(p.object));
            m.insert("x_type".into(), json!(p.subject_type));
            m.insert("y_type".into(), json!(p.object_type));
            m.insert("r".into(), json!(p.relations));
            m.insert("rid".into(), json!(p.relation_ids));
            m.insert("t".into(), json!(p.triggers));
            Value::Object(m)
        })
        .collect();
    Value::Array(vec![Value::Array(turns), Value::Array(rels)])
}

pub fn write_corpus(path: &Path, dialogues: &[Dialogue]) -> Result<()> {
    let v = Value::Array(dialogues.iter().map(dialogue_to_record).collect());
    let mut s = serde_json::to_string_pretty(&v).expect("corpus values serialize");
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

fn schema(context: &str, message: &str) -> Error {
    Error::Schema {
        context: context.to_string(),
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    const RECORD: &str = r#"[[["S1: Hey Pheebs.", "Speaker 2: Hey!"],
        [{"x": "Speaker 2", "y": "Pheebs", "x_type": "PER", "y_type": "PER",
          "r": ["per:alternate_names"], "rid": [30], "t": [""]}]]]"#;

    #[test]
    fn parses_turns_and_pairs() {
        let ds = parse_corpus(RECORD, "dev", "inline").unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].id, "dev-0");
        assert_eq!(ds[0].utterances[1].speaker_id, "Speaker 2");
        assert_eq!(ds[0].utterances[0].tokens, vec!["Hey", "Pheebs", "."]);
        assert_eq!(ds[0].pairs[0].relation_ids, vec![30]);
    }

    #[test]
    fn empty_list_is_empty_corpus() {
        assert!(parse_corpus("[]", "x", "inline").unwrap().is_empty());
    }

    #[test]
    fn malformed_json_is_parse_error() {
        assert!(matches!(parse_corpus("[[", "x", "inline"), Err(Error::Parse { .. })));
    }

    #[test]
    fn missing_field_is_schema_error() {
        let bad = r#"[[["S1: hi"], [{"x": "S1", "r": ["per:friends"]}]]]"#;
        assert!(matches!(parse_corpus(bad, "x", "inline"), Err(Error::Schema { .. })));
        let no_rel = r#"[[["S1: hi"], []]]"#;
        assert!(matches!(parse_corpus(no_rel, "x", "inline"), Err(Error::Schema { .. })));
    }

    #[test]
    fn record_round_trip() {
        let mut d = fixtures::frank_dialogue();
        d.chains.clear();
        let v = Value::Array(vec![dialogue_to_record(&d)]);
        let back = parse_corpus(&v.to_string(), "frank", "rt").unwrap();
        let mut expected = d.clone();
        expected.id = "frank-0".into();
        assert_eq!(back[0], expected);
    }
}
