//! Coreference chain sidecar files.
//!
//! ```json
//! [{"dialogue": "train-0",
//!   "chains": [{"type": "person", "head": "Frank",
//!               "mentions": [{"u": 2, "s": 3, "e": 4, "text": "your brother"}]}]}]
//! ```
//!
//! Released files may use other key names; a [`FieldMap`] renames them to
//! the canonical ones before decoding.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::write_atomic;
use crate::dialogue::{ChainType, CoreferenceChain, Dialogue, Mention};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MentionRecord {
    pub u: usize,
    pub s: usize,
    pub e: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainRecord {
    #[serde(rename = "type")]
    pub chain_type: String,
    pub head: String,
    pub mentions: Vec<MentionRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarEntry {
    pub dialogue: String,
    pub chains: Vec<ChainRecord>,
}

pub type SidecarFile = Vec<SidecarEntry>;

const CANONICAL: [&str; 9] = ["dialogue", "chains", "type", "head", "mentions", "u", "s", "e", "text"];

/// Maps canonical sidecar keys to the names used in a particular file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldMap {
    renames: BTreeMap<String, String>,
}

impl FieldMap {
    pub fn new(pairs: impl IntoIterator<Item = (String, String)>) -> Result<Self> {
        let renames: BTreeMap<String, String> = pairs.into_iter().collect();
        for k in renames.keys() {
            if !CANONICAL.contains(&k.as_str()) {
                return Err(Error::Config(format!("unknown sidecar field {k:?}")));
            }
        }
        Ok(Self { renames })
    }

    /// Parses `canonical=file_name` lines (or a JSON object with the same meaning).
    pub fn parse(text: &str) -> Result<Self> {
        if let Ok(obj) = serde_json::from_str::<BTreeMap<String, String>>(text) {
            return Self::new(obj);
        }
        let mut pairs = Vec::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("field map line {line:?} is not key=value")))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        Self::new(pairs)
    }

    fn inverse(&self) -> HashMap<&str, &str> {
        self.renames.iter().map(|(c, f)| (f.as_str(), c.as_str())).collect()
    }

    fn canonicalize(&self, v: &mut Value) {
        if self.renames.is_empty() {
            return;
        }
        let inv = self.inverse();
        rename_keys(v, &inv);
    }
}

fn rename_keys(v: &mut Value, inv: &HashMap<&str, &str>) {
    match v {
        Value::Array(a) => a.iter_mut().for_each(|x| rename_keys(x, inv)),
        Value::Object(m) => {
            let old = std::mem::take(m);
            for (k, mut val) in old {
                rename_keys(&mut val, inv);
                let key = inv.get(k.as_str()).map(|s| s.to_string()).unwrap_or(k);
                m.insert(key, val);
            }
        }
        _ => {}
    }
}

pub fn parse_sidecar(text: &str, fields: &FieldMap, context: &str) -> Result<SidecarFile> {
    let mut v: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: context.to_string(),
        message: e.to_string(),
    })?;
    fields.canonicalize(&mut v);
    serde_json::from_value(v).map_err(|e| Error::Schema {
        context: context.to_string(),
        message: e.to_string(),
    })
}

/// Attaches sidecar chains to dialogues by id, replacing existing chains.
pub fn attach_sidecar(dialogues: &mut [Dialogue], sidecar: SidecarFile) -> Result<()> {
    let index: HashMap<String, usize> = dialogues.iter().enumerate().map(|(i, d)| (d.id.clone(), i)).collect();
    for entry in sidecar {
        let &di = index.get(&entry.dialogue).ok_or_else(|| Error::Schema {
            context: "sidecar".into(),
            message: format!("unknown dialogue id {:?}", entry.dialogue),
        })?;
        dialogues[di].chains = entry
            .chains
            .into_iter()
            .map(|c| {
                let chain_type = ChainType::parse(&c.chain_type).ok_or_else(|| Error::Schema {
                    context: format!("sidecar {}", entry.dialogue),
                    message: format!("unknown chain type {:?}", c.chain_type),
                })?;
                Ok(CoreferenceChain {
                    chain_type,
                    head: c.head,
                    mentions: c
                        .mentions
                        .into_iter()
                        .map(|m| Mention::new(m.u, m.s, m.e, m.text))
                        .collect(),
                })
            })
            .collect::<Result<_>>()?;
    }
    Ok(())
}

pub fn sidecar_entry(d: &Dialogue) -> SidecarEntry {
    SidecarEntry {
        dialogue: d.id.clone(),
        chains: d
            .chains
            .iter()
            .map(|c| ChainRecord {
                chain_type: c.chain_type.as_str().to_string(),
                head: c.head.clone(),
                mentions: c
                    .mentions
                    .iter()
                    .map(|m| MentionRecord {
                        u: m.utterance_index,
                        s: m.token_start,
                        e: m.token_end,
                        text: m.surface.clone(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn sidecar_to_string(entries: &SidecarFile) -> String {
    let mut s = serde_json::to_string_pretty(entries).expect("sidecar serializes");
    s.push('\n');
    s
}

pub fn write_sidecar(path: &Path, dialogues: &[Dialogue]) -> Result<()> {
    let entries: SidecarFile = dialogues.iter().map(sidecar_entry).collect();
    write_atomic(path, sidecar_to_string(&entries).as_bytes())
}
