//! Brat-style standoff import.
//!
//! Each dialogue is a pair `<id>.txt` / `<id>.ann`. The text file holds one
//! turn per line (`S1: ...`). Entities (`T` lines) carry character offsets
//! into the whole text and a label naming the chain type; coreference links
//! are either `R` relations whose type starts with `coref` or `*` equivalence
//! lines. An entity placed on a turn's speaker prefix marks that speaker as
//! the chain head instead of becoming a mention.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::read_to_string;
use super::sidecar::{ChainRecord, MentionRecord, SidecarEntry, SidecarFile};
use crate::dialogue::{ChainType, Dialogue};
use crate::error::{Error, Result};
use crate::lexicon;
use crate::tokenize::tokenize_with_offsets;
use crate::unionfind::UnionFind;

/// An entity whose character span does not coincide with token boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OffsetMisaligned {
    pub file: PathBuf,
    pub entity: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct StandoffImport {
    pub sidecar: SidecarFile,
    pub misaligned: Vec<OffsetMisaligned>,
}

/// Renders a dialogue as standoff text, one `speaker: text` line per turn.
pub fn standoff_text(d: &Dialogue) -> String {
    d.utterances
        .iter()
        .map(|u| format!("{}: {}\n", u.speaker_id, u.text))
        .collect()
}

/// Imports every `.ann` file in `ann_dir` whose `.txt` twin lives in `text_dir`.
/// Entries are ordered by dialogue id (the file stem).
pub fn import_standoff(text_dir: &Path, ann_dir: &Path) -> Result<StandoffImport> {
    let mut stems = Vec::new();
    for entry in fs::read_dir(ann_dir).map_err(|e| Error::io(ann_dir, e))? {
        let p = entry.map_err(|e| Error::io(ann_dir, e))?.path();
        if p.extension().and_then(|e| e.to_str()) == Some("ann") {
            if let Some(stem) = p.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    let mut out = StandoffImport::default();
    for stem in stems {
        let txt_path = text_dir.join(format!("{stem}.txt"));
        let ann_path = ann_dir.join(format!("{stem}.ann"));
        let text = read_to_string(&txt_path)?;
        let ann = read_to_string(&ann_path)?;
        let (entry, bad) = import_one(&stem, &text, &ann, &ann_path)?;
        out.sidecar.push(entry);
        out.misaligned.extend(bad);
    }
    Ok(out)
}

struct Line {
    start: usize,
    speaker: String,
    prefix_end: usize,
    /// (token char start, token char end, token text), absolute offsets
    tokens: Vec<(usize, usize, String)>,
}

fn index_lines(text: &str) -> Vec<Line> {
    let mut lines = Vec::new();
    let mut offset = 0;
    for raw in text.split('\n') {
        let len = raw.chars().count();
        if let Some(colon) = raw.chars().position(|c| c == ':') {
            let speaker: String = raw.chars().take(colon).collect::<String>().trim().to_string();
            let body: String = raw.chars().skip(colon + 1).collect();
            let body_start = offset + colon + 1;
            let tokens = tokenize_with_offsets(&body)
                .into_iter()
                .map(|t| (body_start + t.start, body_start + t.end, t.text))
                .collect();
            if !speaker.is_empty() {
                lines.push(Line {
                    start: offset,
                    speaker,
                    prefix_end: body_start,
                    tokens,
                });
            }
        }
        offset += len + 1;
    }
    lines
}

enum Anchor {
    Mention { u: usize, s: usize, e: usize, text: String },
    Speaker(String),
}

fn locate(lines: &[Line], start: usize, end: usize) -> Option<Anchor> {
    for (u, line) in lines.iter().enumerate() {
        if start >= line.start && end <= line.prefix_end {
            return Some(Anchor::Speaker(line.speaker.clone()));
        }
        let s = line.tokens.iter().position(|t| t.0 == start);
        let e = line.tokens.iter().position(|t| t.1 == end);
        if let (Some(s), Some(e)) = (s, e) {
            if s <= e {
                let text = line.tokens[s..=e].iter().map(|t| t.2.as_str()).collect::<Vec<_>>().join(" ");
                return Some(Anchor::Mention { u, s, e, text });
            }
        }
    }
    None
}

fn chain_type_of(label: &str) -> Option<ChainType> {
    let l = label.to_lowercase();
    if l.contains("speaker") {
        Some(ChainType::Speaker)
    } else if l.starts_with("per") {
        Some(ChainType::Person)
    } else if l.starts_with("loc") || l.starts_with("gpe") {
        Some(ChainType::Location)
    } else if l.starts_with("org") {
        Some(ChainType::Organization)
    } else {
        None
    }
}

fn import_one(stem: &str, text: &str, ann: &str, ann_path: &Path) -> Result<(SidecarEntry, Vec<OffsetMisaligned>)> {
    let lines = index_lines(text);

    let mut entities: BTreeMap<String, (ChainType, Anchor)> = BTreeMap::new();
    let mut links: Vec<(String, String)> = Vec::new();
    let mut misaligned = Vec::new();

    for (ln, line) in ann.lines().enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |msg: &str| Error::Schema {
            context: format!("{}:{}", ann_path.display(), ln + 1),
            message: msg.to_string(),
        };
        match fields.first().and_then(|f| f.chars().next()) {
            Some('T') => {
                let id = fields[0].to_string();
                let body = fields.get(1).ok_or_else(|| bad("entity line lacks type and offsets"))?;
                let mut parts = body.split_whitespace();
                let label = parts.next().ok_or_else(|| bad("entity lacks a label"))?;
                let offsets: Vec<&str> = parts.collect();
                let joined = offsets.join(" ");
                let Some(ct) = chain_type_of(label) else { continue };
                // discontinuous spans ("a b;c d") cannot map to one token span
                let (start, end) = match joined.split_once(' ') {
                    Some((a, b)) if !joined.contains(';') => (
                        a.parse::<usize>().map_err(|_| bad("bad start offset"))?,
                        b.parse::<usize>().map_err(|_| bad("bad end offset"))?,
                    ),
                    _ => {
                        misaligned.push(OffsetMisaligned {
                            file: ann_path.to_path_buf(),
                            entity: id,
                            start: 0,
                            end: 0,
                        });
                        continue;
                    }
                };
                match locate(&lines, start, end) {
                    Some(anchor) => {
                        entities.insert(id, (ct, anchor));
                    }
                    None => misaligned.push(OffsetMisaligned {
                        file: ann_path.to_path_buf(),
                        entity: id,
                        start,
                        end,
                    }),
                }
            }
            Some('R') => {
                let body = fields.get(1).ok_or_else(|| bad("relation line lacks arguments"))?;
                let mut parts = body.split_whitespace();
                let rtype = parts.next().unwrap_or("");
                if !rtype.to_lowercase().starts_with("coref") {
                    continue;
                }
                let args: Vec<String> = parts
                    .filter_map(|a| a.split_once(':').map(|(_, t)| t.to_string()))
                    .collect();
                if args.len() != 2 {
                    return Err(bad("coreference relation needs two arguments"));
                }
                links.push((args[0].clone(), args[1].clone()));
            }
            Some('*') => {
                let body = fields.get(1).ok_or_else(|| bad("equivalence line lacks members"))?;
                let mut parts = body.split_whitespace();
                if !parts.next().unwrap_or("").to_lowercase().starts_with("coref") {
                    continue;
                }
                let members: Vec<&str> = parts.collect();
                for w in members.windows(2) {
                    links.push((w[0].to_string(), w[1].to_string()));
                }
            }
            _ => {}
        }
    }

    let ids: Vec<&String> = entities.keys().collect();
    let pos: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect();
    let mut uf = UnionFind::new(ids.len());
    let mut linked = vec![false; ids.len()];
    for (a, b) in &links {
        // links to skipped entities are dropped with them
        if let (Some(&ia), Some(&ib)) = (pos.get(a.as_str()), pos.get(b.as_str())) {
            uf.union(ia, ib);
            linked[ia] = true;
            linked[ib] = true;
        }
    }

    let mut chains = Vec::new();
    for group in uf.groups(1) {
        if !group.iter().any(|&i| linked[i]) {
            continue;
        }
        let mut mentions: Vec<MentionRecord> = Vec::new();
        let mut speaker_head = None;
        let mut types = Vec::new();
        for &i in &group {
            let (ct, anchor) = &entities[ids[i]];
            match anchor {
                Anchor::Speaker(s) => speaker_head = Some(s.clone()),
                Anchor::Mention { u, s, e, text } => {
                    types.push((*u, *s, *ct));
                    mentions.push(MentionRecord {
                        u: *u,
                        s: *s,
                        e: *e,
                        text: text.clone(),
                    });
                }
            }
        }
        if mentions.is_empty() {
            continue;
        }
        mentions.sort_by_key(|m| (m.u, m.s, m.e));
        mentions.dedup_by_key(|m| (m.u, m.s, m.e));
        types.sort();
        let chain_type = if speaker_head.is_some() { ChainType::Speaker } else { types[0].2 };
        let head = speaker_head.unwrap_or_else(|| {
            if chain_type == ChainType::Speaker {
                if let Some(m) = mentions.iter().find(|m| lexicon::is_first_person(&m.text)) {
                    return lines[m.u].speaker.clone();
                }
            }
            let named = |m: &&MentionRecord| !lexicon::is_pronominal(&m.text);
            let capitalized = |m: &&MentionRecord| named(m) && m.text.starts_with(char::is_uppercase);
            mentions
                .iter()
                .find(capitalized)
                .or_else(|| mentions.iter().find(named))
                .unwrap_or(&mentions[0])
                .text
                .clone()
        });
        chains.push(ChainRecord {
            chain_type: chain_type.as_str().to_string(),
            head,
            mentions,
        });
    }
    chains.sort_by_key(|c| (c.mentions[0].u, c.mentions[0].s));
    Ok((
        SidecarEntry {
            dialogue: stem.to_string(),
            chains,
        },
        misaligned,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn char_offset(text: &str, needle: &str, nth: usize) -> (usize, usize) {
        let byte = text.match_indices(needle).nth(nth).unwrap().0;
        let start = text[..byte].chars().count();
        (start, start + needle.chars().count())
    }

    fn run(text: &str, ann: &str) -> (SidecarEntry, Vec<OffsetMisaligned>) {
        import_one("doc", text, ann, Path::new("doc.ann")).unwrap()
    }

    #[test]
    fn your_brother_maps_to_token_span() {
        let text = standoff_text(&fixtures::frank_dialogue());
        let (a, b) = char_offset(&text, "your brother", 0);
        let (c, d) = char_offset(&text, "Frank", 0);
        let ann = format!("T1\tPerson {a} {b}\tyour brother\nT2\tPerson {c} {d}\tFrank\nR1\tCoreference Arg1:T1 Arg2:T2\n");
        let (entry, bad) = run(&text, &ann);
        assert!(bad.is_empty());
        assert_eq!(entry.chains.len(), 1);
        let m = &entry.chains[0].mentions[0];
        assert_eq!((m.u, m.s, m.e, m.text.as_str()), (2, 3, 4, "your brother"));
        assert_eq!(entry.chains[0].head, "Frank");
    }

    #[test]
    fn pairwise_links_close_transitively() {
        let text = "S1: Ann met Bob and Cat.\n";
        let (a0, a1) = char_offset(text, "Ann", 0);
        let (b0, b1) = char_offset(text, "Bob", 0);
        let (c0, c1) = char_offset(text, "Cat", 0);
        let ann = format!(
            "T1\tPerson {a0} {a1}\tAnn\nT2\tPerson {b0} {b1}\tBob\nT3\tPerson {c0} {c1}\tCat\n\
             R1\tCoreference Arg1:T1 Arg2:T2\nR2\tCoreference Arg1:T2 Arg2:T3\n"
        );
        let (entry, _) = run(text, &ann);
        assert_eq!(entry.chains.len(), 1);
        assert_eq!(entry.chains[0].mentions.len(), 3);
    }

    #[test]
    fn no_relations_means_no_chains() {
        let text = "S1: Ann met Bob.\n";
        let (entry, bad) = run(text, "T1\tPerson 4 7\tAnn\n");
        assert!(entry.chains.is_empty());
        assert!(bad.is_empty());
    }

    #[test]
    fn mid_token_span_is_misaligned() {
        let text = "S1: Annabel met Bob.\n";
        let (b0, b1) = char_offset(text, "Bob", 0);
        let ann = format!("T1\tPerson 4 7\tAnn\nT2\tPerson {b0} {b1}\tBob\nR1\tCoreference Arg1:T1 Arg2:T2\n");
        let (entry, bad) = run(text, &ann);
        assert_eq!(bad.len(), 1);
        assert_eq!((bad[0].entity.as_str(), bad[0].start), ("T1", 4));
        // the surviving entity is no longer linked to anything
        assert!(entry.chains.is_empty());
    }

    #[test]
    fn speaker_prefix_sets_head() {
        let d = fixtures::speaker_dialogue();
        let text = standoff_text(&d);
        let (p0, p1) = char_offset(&text, "S3", 0);
        let (b0, b1) = char_offset(&text, "Bob", 0);
        let (h0, h1) = char_offset(&text, "he", 0);
        let ann = format!(
            "T1\tSpeaker {p0} {p1}\tS3\nT2\tSpeaker {b0} {b1}\tBob\nT3\tSpeaker {h0} {h1}\the\n\
             *\tCoreference T1 T2 T3\n"
        );
        let (entry, bad) = run(&text, &ann);
        assert!(bad.is_empty());
        assert_eq!(entry.chains[0].head, "S3");
        assert_eq!(entry.chains[0].chain_type, "speaker");
        assert_eq!(entry.chains[0].mentions.len(), 2);
    }

    #[test]
    fn reads_directory_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let text = "S1: Ann met Bob.\n";
        fs::write(dir.path().join("d1.txt"), text).unwrap();
        fs::write(
            dir.path().join("d1.ann"),
            "T1\tPerson 4 7\tAnn\nT2\tPerson 12 15\tBob\nR1\tCoref Arg1:T1 Arg2:T2\n",
        )
        .unwrap();
        let imp = import_standoff(dir.path(), dir.path()).unwrap();
        assert_eq!(imp.sidecar.len(), 1);
        assert_eq!(imp.sidecar[0].dialogue, "d1");
        assert_eq!(imp.sidecar[0].chains[0].head, "Ann");
    }
}
