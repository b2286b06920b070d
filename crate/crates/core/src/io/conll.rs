//! CoNLL-style coreference export and import.
//!
//! One document per dialogue, one tab-separated row per token:
//! `doc_id  utterance_index  token_index  token  speaker_id  coref`.
//! The coref column uses the CoNLL-2012 bracket notation (`(k)`, `(k`, `k)`,
//! joined with `|`, `-` when empty), where `k` is the chain's index in the
//! dialogue. Chain types and heads ride along in `#chain` comment lines so
//! a round trip restores them.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use crate::dialogue::{ChainType, CoreferenceChain, Dialogue, Mention, Utterance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConllDocument {
    pub id: String,
    pub utterances: Vec<Utterance>,
    pub chains: Vec<CoreferenceChain>,
}

impl ConllDocument {
    pub fn into_dialogue(self) -> Dialogue {
        Dialogue {
            id: self.id,
            utterances: self.utterances,
            pairs: Vec::new(),
            chains: self.chains,
        }
    }
}

pub fn export_conll(dialogues: &[Dialogue]) -> String {
    let mut out = String::new();
    for d in dialogues {
        let _ = writeln!(out, "#begin document ({})", d.id);
        for (k, c) in d.chains.iter().enumerate() {
            let _ = writeln!(out, "#chain\t{k}\t{}\t{}", c.chain_type, c.head);
        }
        // (utterance, token) -> (opens, singles, closes)
        let mut marks: HashMap<(usize, usize), (Vec<(usize, usize)>, Vec<usize>, Vec<(usize, usize)>)> = HashMap::new();
        for (k, c) in d.chains.iter().enumerate() {
            for m in &c.mentions {
                if m.token_start == m.token_end {
                    marks.entry((m.utterance_index, m.token_start)).or_default().1.push(k);
                } else {
                    let w = m.width();
                    marks.entry((m.utterance_index, m.token_start)).or_default().0.push((w, k));
                    marks.entry((m.utterance_index, m.token_end)).or_default().2.push((w, k));
                }
            }
        }
        for u in &d.utterances {
            for (t, tok) in u.tokens.iter().enumerate() {
                let col = match marks.get_mut(&(u.index, t)) {
                    None => "-".to_string(),
                    Some((opens, singles, closes)) => {
                        // wider spans open first and close last
                        opens.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
                        singles.sort();
                        closes.sort();
                        let mut parts: Vec<String> = opens.iter().map(|(_, k)| format!("({k}")).collect();
                        parts.extend(singles.iter().map(|k| format!("({k})")));
                        parts.extend(closes.iter().map(|(_, k)| format!("{k})")));
                        parts.join("|")
                    }
                };
                let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", d.id, u.index, t, tok, u.speaker_id, col);
            }
            out.push('\n');
        }
        out.push_str("#end document\n");
    }
    out
}

fn err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        context: format!("conll line {}", line + 1),
        message: message.into(),
    }
}

pub fn import_conll(text: &str) -> Result<Vec<ConllDocument>> {
    let mut docs = Vec::new();
    let mut cur: Option<DocBuilder> = None;
    for (ln, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix("#begin document (") {
            let id = rest.split(')').next().unwrap_or("").to_string();
            cur = Some(DocBuilder::new(id));
            continue;
        }
        if line.starts_with("#end document") {
            let b = cur.take().ok_or_else(|| err(ln, "#end document without #begin"))?;
            docs.push(b.finish(ln)?);
            continue;
        }
        let Some(b) = cur.as_mut() else {
            if line.trim().is_empty() {
                continue;
            }
            return Err(err(ln, "row outside a document"));
        };
        if let Some(rest) = line.strip_prefix("#chain\t") {
            let f: Vec<&str> = rest.splitn(3, '\t').collect();
            if f.len() != 3 {
                return Err(err(ln, "malformed #chain line"));
            }
            let k: usize = f[0].parse().map_err(|_| err(ln, "bad chain id"))?;
            let t = ChainType::parse(f[1]).ok_or_else(|| err(ln, "bad chain type"))?;
            b.meta.insert(k, (t, f[2].to_string()));
            continue;
        }
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 6 {
            return Err(err(ln, format!("expected 6 columns, found {}", f.len())));
        }
        let u: usize = f[1].parse().map_err(|_| err(ln, "bad utterance index"))?;
        let t: usize = f[2].parse().map_err(|_| err(ln, "bad token index"))?;
        b.row(ln, u, t, f[3], f[4], f[5])?;
    }
    if cur.is_some() {
        return Err(err(text.lines().count(), "unterminated document"));
    }
    Ok(docs)
}

struct DocBuilder {
    id: String,
    turns: Vec<(String, Vec<String>)>,
    open: HashMap<usize, Vec<(usize, usize)>>,
    spans: BTreeMap<usize, Vec<(usize, usize, usize)>>,
    meta: HashMap<usize, (ChainType, String)>,
}

impl DocBuilder {
    fn new(id: String) -> Self {
        Self {
            id,
            turns: Vec::new(),
            open: HashMap::new(),
            spans: BTreeMap::new(),
            meta: HashMap::new(),
        }
    }

    fn row(&mut self, ln: usize, u: usize, t: usize, tok: &str, speaker: &str, col: &str) -> Result<()> {
        if u == self.turns.len() {
            self.turns.push((speaker.to_string(), Vec::new()));
        } else if u + 1 != self.turns.len() {
            return Err(err(ln, "utterance indices must be contiguous"));
        }
        let turn = &mut self.turns[u].1;
        if t != turn.len() {
            return Err(err(ln, "token indices must be contiguous"));
        }
        turn.push(tok.to_string());
        if col == "-" {
            return Ok(());
        }
        for part in col.split('|') {
            let opens = part.starts_with('(');
            let closes = part.ends_with(')');
            let k: usize = part
                .trim_start_matches('(')
                .trim_end_matches(')')
                .parse()
                .map_err(|_| err(ln, format!("bad coref entry {part:?}")))?;
            match (opens, closes) {
                (true, true) => self.spans.entry(k).or_default().push((u, t, t)),
                (true, false) => self.open.entry(k).or_default().push((u, t)),
                (false, true) => {
                    let (su, st) = self
                        .open
                        .get_mut(&k)
                        .and_then(Vec::pop)
                        .ok_or_else(|| err(ln, format!("close of chain {k} without open")))?;
                    if su != u {
                        return Err(err(ln, "mention crosses an utterance boundary"));
                    }
                    self.spans.entry(k).or_default().push((u, st, t));
                }
                (false, false) => return Err(err(ln, format!("bad coref entry {part:?}"))),
            }
        }
        Ok(())
    }

    fn finish(self, ln: usize) -> Result<ConllDocument> {
        if self.open.values().any(|v| !v.is_empty()) {
            return Err(err(ln, "unclosed mention at end of document"));
        }
        let utterances: Vec<Utterance> = self
            .turns
            .into_iter()
            .enumerate()
            .map(|(i, (speaker, tokens))| Utterance {
                index: i,
                speaker_id: speaker,
                text: tokens.join(" "),
                tokens,
            })
            .collect();
        let chains = self
            .spans
            .into_iter()
            .map(|(k, mut spans)| {
                spans.sort();
                let mentions: Vec<Mention> = spans
                    .into_iter()
                    .map(|(u, s, e)| Mention::new(u, s, e, utterances[u].tokens[s..=e].join(" ")))
                    .collect();
                let (chain_type, head) = self
                    .meta
                    .get(&k)
                    .cloned()
                    .unwrap_or_else(|| (ChainType::Person, mentions[0].surface.clone()));
                CoreferenceChain {
                    chain_type,
                    head,
                    mentions,
                }
            })
            .collect();
        Ok(ConllDocument {
            id: self.id,
            utterances,
            chains,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn coref_column(out: &str) -> Vec<(String, String)> {
        out.lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty())
            .map(|l| {
                let f: Vec<&str> = l.split('\t').collect();
                (f[3].to_string(), f[5].to_string())
            })
            .collect()
    }

    #[test]
    fn single_token_mention_is_parenthesized() {
        let out = export_conll(&[fixtures::location_dialogue()]);
        let col = coref_column(&out);
        assert!(col.contains(&("Uruguay".into(), "(0)".into())));
    }

    #[test]
    fn two_token_mention_opens_and_closes() {
        let out = export_conll(&[fixtures::frank_dialogue()]);
        let col = coref_column(&out);
        let i = col.iter().position(|(t, _)| t == "your").unwrap();
        assert_eq!(col[i].1, "(1");
        assert_eq!(col[i + 1], ("brother".to_string(), "1)".to_string()));
    }

    #[test]
    fn organization_chain_has_three_regions() {
        let out = export_conll(&[fixtures::organization_dialogue()]);
        let col = coref_column(&out);
        let marked: Vec<&(String, String)> = col.iter().filter(|(_, c)| c != "-").collect();
        let regions = marked.iter().filter(|(_, c)| c.starts_with('(')).count();
        assert_eq!(regions, 3);
        assert!(marked.iter().all(|(_, c)| c.contains('0')));
        assert_eq!(marked[0].0, "Paul's");
        assert_eq!(marked[1], &("Café".to_string(), "0)".to_string()));
    }

    #[test]
    fn round_trip_preserves_chains() {
        let ds = fixtures::all();
        let docs = import_conll(&export_conll(&ds)).unwrap();
        assert_eq!(docs.len(), ds.len());
        for (doc, d) in docs.iter().zip(&ds) {
            assert_eq!(doc.id, d.id);
            assert_eq!(doc.chains, d.chains);
            for (a, b) in doc.utterances.iter().zip(&d.utterances) {
                assert_eq!(a.tokens, b.tokens);
                assert_eq!(a.speaker_id, b.speaker_id);
            }
        }
    }

    #[test]
    fn nested_mentions_round_trip() {
        let mut d = fixtures::frank_dialogue();
        // "your" inside "your brother", as a mention of the speaker chain
        let your = d.mention(2, 3, 3).unwrap();
        d.chains[0].mentions.insert(1, your);
        let docs = import_conll(&export_conll(&[d.clone()])).unwrap();
        assert_eq!(docs[0].chains, d.chains);
    }

    #[test]
    fn unbalanced_brackets_rejected() {
        let bad = "#begin document (x)\nx\t0\t0\ta\tS1\t(0\n#end document\n";
        assert!(import_conll(bad).is_err());
    }
}
