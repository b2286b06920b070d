//! In-memory dialogue model and annotation-scheme validation.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relations::RelationInventory;
use crate::tokenize::{normalize_ws, tokenize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub index: usize,
    pub speaker_id: String,
    /// Turn text with the speaker prefix removed, exactly as in the corpus.
    pub text: String,
    pub tokens: Vec<String>,
}

impl Utterance {
    pub fn new(index: usize, speaker_id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Self {
            index,
            speaker_id: speaker_id.into(),
            text,
            tokens,
        }
    }
}

/// A token span inside one utterance; both offsets inclusive.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mention {
    pub utterance_index: usize,
    pub token_start: usize,
    pub token_end: usize,
    pub surface: String,
}

impl Mention {
    pub fn new(utterance_index: usize, token_start: usize, token_end: usize, surface: impl Into<String>) -> Self {
        Self {
            utterance_index,
            token_start,
            token_end,
            surface: surface.into(),
        }
    }

    pub fn span(&self) -> (usize, usize, usize) {
        (self.utterance_index, self.token_start, self.token_end)
    }

    pub fn width(&self) -> usize {
        self.token_end - self.token_start + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainType {
    Speaker,
    Person,
    Location,
    Organization,
}

impl ChainType {
    pub const ALL: [ChainType; 4] = [
        ChainType::Speaker,
        ChainType::Person,
        ChainType::Location,
        ChainType::Organization,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChainType::Speaker => "speaker",
            ChainType::Person => "person",
            ChainType::Location => "location",
            ChainType::Organization => "organization",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for ChainType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreferenceChain {
    pub chain_type: ChainType,
    /// Canonical argument name or speaker label the chain resolves to.
    pub head: String,
    pub mentions: Vec<Mention>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgumentPair {
    pub subject: String,
    pub object: String,
    pub subject_type: String,
    pub object_type: String,
    pub relations: Vec<String>,
    /// Corpus relation ids, kept verbatim for round-tripping.
    pub relation_ids: Vec<u32>,
    pub triggers: Vec<String>,
}

impl ArgumentPair {
    pub fn new(subject: &str, object: &str, relations: &[&str]) -> Self {
        Self {
            subject: subject.into(),
            object: object.into(),
            subject_type: "PER".into(),
            object_type: "PER".into(),
            relations: relations.iter().map(|s| s.to_string()).collect(),
            relation_ids: Vec::new(),
            triggers: vec![String::new(); relations.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub utterances: Vec<Utterance>,
    pub pairs: Vec<ArgumentPair>,
    pub chains: Vec<CoreferenceChain>,
}

impl Dialogue {
    /// Builds a dialogue from `(speaker, text)` turns.
    pub fn from_turns(id: impl Into<String>, turns: &[(&str, &str)]) -> Self {
        Self {
            id: id.into(),
            utterances: turns
                .iter()
                .enumerate()
                .map(|(i, (s, t))| Utterance::new(i, *s, *t))
                .collect(),
            pairs: Vec::new(),
            chains: Vec::new(),
        }
    }

    /// Distinct speaker ids in order of first appearance.
    pub fn speakers(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for u in &self.utterances {
            if !seen.contains(&u.speaker_id.as_str()) {
                seen.push(u.speaker_id.as_str());
            }
        }
        seen
    }

    pub fn token_count(&self) -> usize {
        self.utterances.iter().map(|u| u.tokens.len()).sum()
    }

    /// Joined tokens of an inclusive span, if it is in range.
    pub fn span_text(&self, utterance: usize, start: usize, end: usize) -> Option<String> {
        let u = self.utterances.get(utterance)?;
        if start > end || end >= u.tokens.len() {
            return None;
        }
        Some(u.tokens[start..=end].join(" "))
    }

    pub fn mention(&self, utterance: usize, start: usize, end: usize) -> Option<Mention> {
        self.span_text(utterance, start, end)
            .map(|s| Mention::new(utterance, start, end, s))
    }

    /// Index of the chain whose head equals `arg`, after whitespace
    /// normalization. Errors when several chains share that head.
    pub fn chain_of(&self, arg: &str) -> Result<Option<usize>> {
        let key = normalize_ws(arg);
        let hits: Vec<usize> = self
            .chains
            .iter()
            .enumerate()
            .filter(|(_, c)| normalize_ws(&c.head) == key)
            .map(|(i, _)| i)
            .collect();
        match hits.len() {
            0 => Ok(None),
            1 => Ok(Some(hits[0])),
            _ => Err(Error::AmbiguousHead {
                argument: arg.to_string(),
                chains: hits,
            }),
        }
    }
}

/// Resolves an argument to its mentions: the chain headed by `arg` when one
/// exists, otherwise every exact surface occurrence in the dialogue tokens.
pub fn mentions_of_argument(d: &Dialogue, arg: &str) -> Result<Vec<Mention>> {
    match d.chain_of(arg)? {
        Some(ci) => Ok(d.chains[ci].mentions.clone()),
        None => Ok(surface_occurrences(d, arg)),
    }
}

/// Exact (case-sensitive) token-sequence matches of `arg`, in document order.
pub fn surface_occurrences(d: &Dialogue, arg: &str) -> Vec<Mention> {
    let needle = tokenize(arg);
    if needle.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for u in &d.utterances {
        if u.tokens.len() < needle.len() {
            continue;
        }
        for s in 0..=u.tokens.len() - needle.len() {
            if u.tokens[s..s + needle.len()] == needle[..] {
                let e = s + needle.len() - 1;
                out.push(Mention::new(u.index, s, e, u.tokens[s..=e].join(" ")));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Rule {
    SpanOutOfRange,
    SurfaceMismatch,
    EmptyChain,
    UnsortedMentions,
    DuplicateMention,
    UnknownSpeakerHead,
    EmptyHead,
    EmptySpeaker,
    NonContiguousIndex,
    EmptyRelations,
    UnknownRelation,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::SpanOutOfRange => "SPAN_OUT_OF_RANGE",
            Rule::SurfaceMismatch => "SURFACE_MISMATCH",
            Rule::EmptyChain => "EMPTY_CHAIN",
            Rule::UnsortedMentions => "UNSORTED_MENTIONS",
            Rule::DuplicateMention => "DUPLICATE_MENTION",
            Rule::UnknownSpeakerHead => "UNKNOWN_SPEAKER_HEAD",
            Rule::EmptyHead => "EMPTY_HEAD",
            Rule::EmptySpeaker => "EMPTY_SPEAKER",
            Rule::NonContiguousIndex => "NON_CONTIGUOUS_INDEX",
            Rule::EmptyRelations => "EMPTY_RELATIONS",
            Rule::UnknownRelation => "UNKNOWN_RELATION",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub dialogue_id: String,
    pub rule: Rule,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mention_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub utterance_index: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.dialogue_id, self.rule.as_str())?;
        if let Some(c) = self.chain_index {
            write!(f, " chain={c}")?;
        }
        if let Some(m) = self.mention_index {
            write!(f, " mention={m}")?;
        }
        if let Some(p) = self.pair_index {
            write!(f, " pair={p}")?;
        }
        if let Some(u) = self.utterance_index {
            write!(f, " utterance={u}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }

    pub fn extend(&mut self, other: ValidationReport) {
        self.violations.extend(other.violations);
    }
}

struct Reporter<'a> {
    id: &'a str,
    out: Vec<Violation>,
}

impl Reporter<'_> {
    fn push(&mut self, rule: Rule, chain: Option<usize>, mention: Option<usize>, detail: String) {
        self.out.push(Violation {
            dialogue_id: self.id.to_string(),
            rule,
            chain_index: chain,
            mention_index: mention,
            pair_index: None,
            utterance_index: None,
            detail,
        });
    }
}

/// Validates against the built-in relation inventory.
pub fn validate_dialogue(d: &Dialogue) -> ValidationReport {
    validate_with(d, &RelationInventory::default())
}

/// Checks every annotation-scheme invariant. Never fails; an empty report
/// means the dialogue is valid.
pub fn validate_with(d: &Dialogue, inventory: &RelationInventory) -> ValidationReport {
    let mut r = Reporter {
        id: &d.id,
        out: Vec::new(),
    };

    for (pos, u) in d.utterances.iter().enumerate() {
        if u.index != pos {
            r.out.push(Violation {
                utterance_index: Some(pos),
                ..violation(&d.id, Rule::NonContiguousIndex, format!("utterance at position {pos} has index {}", u.index))
            });
        }
        if u.speaker_id.trim().is_empty() {
            r.out.push(Violation {
                utterance_index: Some(pos),
                ..violation(&d.id, Rule::EmptySpeaker, "empty speaker label".into())
            });
        }
    }

    for (pi, p) in d.pairs.iter().enumerate() {
        if p.relations.is_empty() {
            r.out.push(Violation {
                pair_index: Some(pi),
                ..violation(&d.id, Rule::EmptyRelations, format!("pair ({}, {}) has no label", p.subject, p.object))
            });
        }
        for l in &p.relations {
            if !inventory.accepts(l) {
                r.out.push(Violation {
                    pair_index: Some(pi),
                    ..violation(&d.id, Rule::UnknownRelation, format!("label {l:?} not in inventory"))
                });
            }
        }
    }

    let speakers = d.speakers();
    // first owner of each span, for cross-chain duplicates
    let mut owner: HashMap<(usize, usize, usize), usize> = HashMap::new();
    for (ci, chain) in d.chains.iter().enumerate() {
        if chain.mentions.is_empty() {
            r.push(Rule::EmptyChain, Some(ci), None, "chain has no mentions".into());
        }
        if chain.head.trim().is_empty() {
            r.push(Rule::EmptyHead, Some(ci), None, "chain head is empty".into());
        } else if chain.chain_type == ChainType::Speaker && !speakers.contains(&chain.head.as_str()) {
            r.push(
                Rule::UnknownSpeakerHead,
                Some(ci),
                None,
                format!("speaker chain head {:?} is not a speaker of the dialogue", chain.head),
            );
        }
        for w in chain.mentions.windows(2).enumerate() {
            let (mi, pair) = w;
            if pair[0].span() > pair[1].span() {
                r.push(
                    Rule::UnsortedMentions,
                    Some(ci),
                    Some(mi + 1),
                    format!("mention {:?} sorts before its predecessor", pair[1].span()),
                );
            }
        }
        for (mi, m) in chain.mentions.iter().enumerate() {
            match d.span_text(m.utterance_index, m.token_start, m.token_end) {
                None => {
                    let len = d.utterances.get(m.utterance_index).map(|u| u.tokens.len());
                    r.push(
                        Rule::SpanOutOfRange,
                        Some(ci),
                        Some(mi),
                        match len {
                            Some(n) => format!(
                                "span [{}, {}] outside utterance {} of {n} tokens",
                                m.token_start, m.token_end, m.utterance_index
                            ),
                            None => format!(
                                "utterance {} does not exist ({} utterances)",
                                m.utterance_index,
                                d.utterances.len()
                            ),
                        },
                    );
                }
                Some(text) => {
                    if normalize_ws(&m.surface) != text {
                        r.push(
                            Rule::SurfaceMismatch,
                            Some(ci),
                            Some(mi),
                            format!("surface {:?} but tokens read {text:?}", m.surface),
                        );
                    }
                }
            }
            match owner.get(&m.span()) {
                Some(&first) => r.push(
                    Rule::DuplicateMention,
                    Some(ci),
                    Some(mi),
                    if first == ci {
                        format!("span {:?} repeated within the chain", m.span())
                    } else {
                        format!("span {:?} already belongs to chain {first}", m.span())
                    },
                ),
                None => {
                    owner.insert(m.span(), ci);
                }
            }
        }
    }
    ValidationReport { violations: r.out }
}

fn violation(id: &str, rule: Rule, detail: String) -> Violation {
    Violation {
        dialogue_id: id.to_string(),
        rule,
        chain_index: None,
        mention_index: None,
        pair_index: None,
        utterance_index: None,
        detail,
    }
}

/// A chain whose head text occurs in the dialogue but is not itself one of
/// the chain's mentions. Reported as an alignment note, not a violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HeadAlignmentNote {
    pub dialogue_id: String,
    pub chain_index: usize,
    pub head: String,
    pub occurrences: Vec<Mention>,
}

pub fn head_alignment_notes(d: &Dialogue) -> Vec<HeadAlignmentNote> {
    d.chains
        .iter()
        .enumerate()
        .filter_map(|(ci, c)| {
            let occ = surface_occurrences(d, &c.head);
            let missing: Vec<Mention> = occ
                .into_iter()
                .filter(|o| !c.mentions.iter().any(|m| m.span() == o.span()))
                .collect();
            (!missing.is_empty()).then(|| HeadAlignmentNote {
                dialogue_id: d.id.clone(),
                chain_index: ci,
                head: c.head.clone(),
                occurrences: missing,
            })
        })
        .collect()
}

/// Per-type chain counts, used by the statistics reporter.
pub fn chain_type_counts<'a>(dialogues: impl IntoIterator<Item = &'a Dialogue>) -> BTreeMap<ChainType, usize> {
    let mut m: BTreeMap<ChainType, usize> = ChainType::ALL.iter().map(|&t| (t, 0)).collect();
    for d in dialogues {
        for c in &d.chains {
            *m.entry(c.chain_type).or_default() += 1;
        }
    }
    m
}
