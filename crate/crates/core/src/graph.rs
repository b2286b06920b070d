//! Coreference-enhanced dialogue graphs for the four backbone recipes, and
//! edge-class ablation.
//!
//! Node ids are positions in [`DialogueGraph::nodes`]; every node also has a
//! stable key derived from its kind and anchor (`U:3`, `M:2:3:4`, `A:subj`),
//! so two builds from the same input are identical. Edges are undirected,
//! stored once with `src < dst`, and sorted.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dialogue::{mentions_of_argument, surface_occurrences, ArgumentPair, Dialogue, Mention};
use crate::error::{Error, Result};
use crate::tokenize::normalize_ws;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NodeKind {
    Dialogue,
    Utterance,
    Speaker,
    Argument,
    Mention,
    Type,
    Word,
    Mdp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeKind {
    /// dialogue - utterance
    DU,
    /// adjacent utterances
    UU,
    /// argument - utterance where it is named or speaks
    AU,
    /// mention - containing utterance
    MU,
    /// mentions of one chain, fully connected
    CC,
    /// complete graph
    FULL,
    /// mentions of one entity
    IE,
    /// mentions co-occurring in one utterance
    IU,
    /// dialogue - mention
    DM,
    /// entities with co-occurring mentions
    EE,
    UW,
    UA,
    US,
    TW,
    TA,
    /// argument - words of its chain mentions
    CW,
    /// argument - its own speaker node
    CS,
    /// argument - utterances holding its chain mentions
    CU,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 18] = [
        EdgeKind::DU,
        EdgeKind::UU,
        EdgeKind::AU,
        EdgeKind::MU,
        EdgeKind::CC,
        EdgeKind::FULL,
        EdgeKind::IE,
        EdgeKind::IU,
        EdgeKind::DM,
        EdgeKind::EE,
        EdgeKind::UW,
        EdgeKind::UA,
        EdgeKind::US,
        EdgeKind::TW,
        EdgeKind::TA,
        EdgeKind::CW,
        EdgeKind::CS,
        EdgeKind::CU,
    ];

    pub fn code(self) -> &'static str {
        match self {
            EdgeKind::DU => "DU",
            EdgeKind::UU => "UU",
            EdgeKind::AU => "AU",
            EdgeKind::MU => "MU",
            EdgeKind::CC => "CC",
            EdgeKind::FULL => "FULL",
            EdgeKind::IE => "IE",
            EdgeKind::IU => "IU",
            EdgeKind::DM => "DM",
            EdgeKind::EE => "EE",
            EdgeKind::UW => "UW",
            EdgeKind::UA => "UA",
            EdgeKind::US => "US",
            EdgeKind::TW => "TW",
            EdgeKind::TA => "TA",
            EdgeKind::CW => "CW",
            EdgeKind::CS => "CS",
            EdgeKind::CU => "CU",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.code().eq_ignore_ascii_case(s.trim()))
    }

    /// Parses a comma-separated list such as `CC,MU`; the empty string is the
    /// empty set.
    pub fn parse_set(s: &str) -> Result<BTreeSet<EdgeKind>> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| {
                Self::parse(p).ok_or_else(|| Error::UnknownKind {
                    kind: p.to_string(),
                    recipe: "any".into(),
                })
            })
            .collect()
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Recipe {
    Tucore,
    Redialog,
    GainMention,
    GainEntity,
    Hgat,
}

impl Recipe {
    pub fn declared_kinds(self) -> &'static [EdgeKind] {
        use EdgeKind::*;
        match self {
            Recipe::Tucore => &[DU, UU, AU, MU, CC],
            Recipe::Redialog => &[FULL],
            Recipe::GainMention => &[IE, IU, DM],
            Recipe::GainEntity => &[EE],
            Recipe::Hgat => &[UW, UA, US, TW, TA, CW, CS, CU],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Recipe::Tucore => "TUCORE",
            Recipe::Redialog => "REDIALOG",
            Recipe::GainMention => "GAIN_MENTION",
            Recipe::GainEntity => "GAIN_ENTITY",
            Recipe::Hgat => "HGAT",
        }
    }

    /// Case-insensitive; `gain` means the mention-graph side.
    pub fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "tucore" => Some(Recipe::Tucore),
            "redialog" => Some(Recipe::Redialog),
            "gain" | "gain_mention" => Some(Recipe::GainMention),
            "gain_entity" => Some(Recipe::GainEntity),
            "hgat" => Some(Recipe::Hgat),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArgRole {
    Subject,
    Object,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Payload {
    Dialogue,
    Utterance {
        index: usize,
    },
    Speaker {
        label: String,
    },
    /// An argument (or, in the entity graph, an entity). `surface` holds the
    /// literal occurrences of `name`, found without consulting chains.
    Argument {
        name: String,
        roles: Vec<ArgRole>,
        surface: Vec<Mention>,
    },
    /// `owners` are the normalized names of the arguments or entities whose
    /// mention this is.
    Mention {
        mention: Mention,
        owners: Vec<String>,
    },
    Type {
        tag: String,
    },
    Word {
        word: String,
    },
    Mdp {
        utterance: usize,
        token: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: usize,
    pub kind: NodeKind,
    pub key: String,
    pub payload: Payload,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "warning", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GraphWarning {
    UnresolvedArgument { role: Option<ArgRole>, name: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DialogueGraph {
    pub recipe: Recipe,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<GraphWarning>,
}

/// Structural equality: recipe, nodes and edges. Warnings are advisory.
impl PartialEq for DialogueGraph {
    fn eq(&self, other: &Self) -> bool {
        self.recipe == other.recipe && self.nodes == other.nodes && self.edges == other.edges
    }
}

impl DialogueGraph {
    pub fn edge_kinds(&self) -> BTreeSet<EdgeKind> {
        self.edges.iter().map(|e| e.kind).collect()
    }

    pub fn count(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    pub fn count_nodes(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn node_by_key(&self, key: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.key == key)
    }

    /// Node carrying the given argument role.
    pub fn argument_node(&self, role: ArgRole) -> Option<usize> {
        self.nodes.iter().position(|n| match &n.payload {
            Payload::Argument { roles, .. } => roles.contains(&role),
            _ => false,
        })
    }

    pub fn degree(&self, node: usize) -> usize {
        self.edges.iter().filter(|e| e.src == node || e.dst == node).count()
    }

    pub fn neighbors(&self, node: usize, kind: EdgeKind) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|e| e.kind == kind)
            .filter_map(|e| {
                if e.src == node {
                    Some(e.dst)
                } else if e.dst == node {
                    Some(e.src)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("graph serializes");
        s.push('\n');
        s
    }

    /// Multiset of `(kind, key, key)` edge triples, independent of node ids.
    pub fn keyed_edges(&self) -> Vec<(EdgeKind, String, String)> {
        let mut out: Vec<_> = self
            .edges
            .iter()
            .map(|e| {
                let (a, b) = (&self.nodes[e.src].key, &self.nodes[e.dst].key);
                let (a, b) = if a <= b { (a, b) } else { (b, a) };
                (e.kind, a.clone(), b.clone())
            })
            .collect();
        out.sort();
        out
    }
}

/// Supplies tokens on the shortest dependency path between two mentions.
pub trait DependencyProvider {
    /// `(utterance, token)` positions on the path; empty when none exists.
    fn shortest_path(&self, d: &Dialogue, a: &Mention, b: &Mention) -> Vec<(usize, usize)>;
}

struct Builder {
    recipe: Recipe,
    nodes: Vec<Node>,
    keys: BTreeMap<String, usize>,
    edges: BTreeSet<(EdgeKind, usize, usize)>,
    warnings: Vec<GraphWarning>,
}

impl Builder {
    fn new(recipe: Recipe) -> Self {
        Self {
            recipe,
            nodes: Vec::new(),
            keys: BTreeMap::new(),
            edges: BTreeSet::new(),
            warnings: Vec::new(),
        }
    }

    fn node(&mut self, kind: NodeKind, key: String, payload: Payload) -> usize {
        if let Some(&id) = self.keys.get(&key) {
            return id;
        }
        let id = self.nodes.len();
        self.keys.insert(key.clone(), id);
        self.nodes.push(Node { id, kind, key, payload });
        id
    }

    fn edge(&mut self, kind: EdgeKind, a: usize, b: usize) {
        if a != b {
            self.edges.insert((kind, a.min(b), a.max(b)));
        }
    }

    fn finish(self) -> DialogueGraph {
        DialogueGraph {
            recipe: self.recipe,
            nodes: self.nodes,
            edges: self
                .edges
                .into_iter()
                .map(|(kind, src, dst)| Edge { src, dst, kind })
                .collect(),
            warnings: self.warnings,
        }
    }
}

fn mention_key(m: &Mention) -> String {
    format!("M:{}:{}:{}", m.utterance_index, m.token_start, m.token_end)
}

fn role_key(r: ArgRole) -> &'static str {
    match r {
        ArgRole::Subject => "A:subj",
        ArgRole::Object => "A:obj",
    }
}

fn roles_of(pair: &ArgumentPair) -> [(ArgRole, &str); 2] {
    [(ArgRole::Subject, &pair.subject), (ArgRole::Object, &pair.object)]
}

/// Turns where `arg` is named verbatim or is the speaker.
fn surface_turns(d: &Dialogue, arg: &str) -> BTreeSet<usize> {
    let mut t: BTreeSet<usize> = surface_occurrences(d, arg).iter().map(|m| m.utterance_index).collect();
    t.extend(d.utterances.iter().filter(|u| u.speaker_id == arg).map(|u| u.index));
    t
}

fn argument_payload(d: &Dialogue, name: &str, roles: Vec<ArgRole>) -> Payload {
    Payload::Argument {
        name: normalize_ws(name),
        roles,
        surface: surface_occurrences(d, name),
    }
}

fn warn_if_unresolved(b: &mut Builder, d: &Dialogue, role: Option<ArgRole>, name: &str) -> Result<Vec<Mention>> {
    let ms = mentions_of_argument(d, name)?;
    if ms.is_empty() {
        b.warnings.push(GraphWarning::UnresolvedArgument {
            role,
            name: name.to_string(),
        });
    }
    Ok(ms)
}

/// TUCORE-style graph: dialogue, utterance, argument and mention nodes with
/// DU, UU, AU, MU and CC edges. Only the chains headed by the pair's own
/// arguments contribute mention nodes; AU edges never consult chains, so
/// removing CC and MU yields exactly the chain-free build.
pub fn build_tucore(d: &Dialogue, pair: &ArgumentPair) -> Result<DialogueGraph> {
    let mut b = Builder::new(Recipe::Tucore);
    let dn = b.node(NodeKind::Dialogue, "D".into(), Payload::Dialogue);
    let utt: Vec<usize> = d
        .utterances
        .iter()
        .map(|u| b.node(NodeKind::Utterance, format!("U:{}", u.index), Payload::Utterance { index: u.index }))
        .collect();
    for w in utt.windows(2) {
        b.edge(EdgeKind::UU, w[0], w[1]);
    }
    for &u in &utt {
        b.edge(EdgeKind::DU, dn, u);
    }
    let mut chains = Vec::new();
    for (role, name) in roles_of(pair) {
        warn_if_unresolved(&mut b, d, Some(role), name)?;
        let a = b.node(NodeKind::Argument, role_key(role).into(), argument_payload(d, name, vec![role]));
        for t in surface_turns(d, name) {
            b.edge(EdgeKind::AU, a, utt[t]);
        }
        if let Some(ci) = d.chain_of(name)? {
            chains.push((normalize_ws(name), ci));
        }
    }
    add_chain_mentions(&mut b, d, &chains, |b, ms| {
        for &(m, ui) in ms {
            b.edge(EdgeKind::MU, m, utt[ui]);
        }
        for (i, &(x, _)) in ms.iter().enumerate() {
            for &(y, _) in &ms[i + 1..] {
                b.edge(EdgeKind::CC, x, y);
            }
        }
    });
    Ok(b.finish())
}

/// Adds mention nodes for `(owner, chain index)` entries, in span order, and
/// hands each chain's `(node, utterance)` list to `link`.
fn add_chain_mentions<F>(b: &mut Builder, d: &Dialogue, chains: &[(String, usize)], mut link: F)
where
    F: FnMut(&mut Builder, &[(usize, usize)]),
{
    let mut owners: BTreeMap<Mention, Vec<String>> = BTreeMap::new();
    for (owner, ci) in chains {
        for m in &d.chains[*ci].mentions {
            let o = owners.entry(m.clone()).or_default();
            if !o.contains(owner) {
                o.push(owner.clone());
            }
        }
    }
    for (m, o) in &owners {
        b.node(
            NodeKind::Mention,
            mention_key(m),
            Payload::Mention {
                mention: m.clone(),
                owners: o.clone(),
            },
        );
    }
    let mut seen = BTreeSet::new();
    for (_, ci) in chains {
        if !seen.insert(*ci) {
            continue;
        }
        let ms: Vec<(usize, usize)> = d.chains[*ci]
            .mentions
            .iter()
            .map(|m| (b.keys[&mention_key(m)], m.utterance_index))
            .collect();
        link(b, &ms);
    }
}

/// REDialog-style complete graph over the pair's argument nodes, their
/// mentions (chain mentions, or literal occurrences when unchained) and,
/// given a dependency provider, MDP token nodes.
pub fn build_redialog(d: &Dialogue, pair: &ArgumentPair, deps: Option<&dyn DependencyProvider>) -> Result<DialogueGraph> {
    let mut b = Builder::new(Recipe::Redialog);
    let mut owned: BTreeMap<Mention, Vec<String>> = BTreeMap::new();
    let mut per_role: Vec<Vec<Mention>> = Vec::new();
    for (role, name) in roles_of(pair) {
        let ms = warn_if_unresolved(&mut b, d, Some(role), name)?;
        b.node(NodeKind::Argument, role_key(role).into(), argument_payload(d, name, vec![role]));
        for m in &ms {
            let o = owned.entry(m.clone()).or_default();
            let n = normalize_ws(name);
            if !o.contains(&n) {
                o.push(n);
            }
        }
        per_role.push(ms);
    }
    for (m, o) in &owned {
        b.node(
            NodeKind::Mention,
            mention_key(m),
            Payload::Mention {
                mention: m.clone(),
                owners: o.clone(),
            },
        );
    }
    if let Some(p) = deps {
        let mut toks = BTreeSet::new();
        for a in &per_role[0] {
            for c in &per_role[1] {
                toks.extend(p.shortest_path(d, a, c));
            }
        }
        for (u, t) in toks {
            b.node(NodeKind::Mdp, format!("P:{u}:{t}"), Payload::Mdp { utterance: u, token: t });
        }
    }
    let n = b.nodes.len();
    for i in 0..n {
        for j in i + 1..n {
            b.edge(EdgeKind::FULL, i, j);
        }
    }
    Ok(b.finish())
}

/// GAIN-style mention graph and entity graph.
///
/// Entities are every argument of every pair in the dialogue plus every
/// annotated chain not headed by an argument. The mention graph links
/// mentions of one entity (IE), mentions sharing an utterance (IU), and each
/// mention to the dialogue node (DM). The entity graph links entities whose
/// mentions share an utterance (EE).
pub fn build_gain(d: &Dialogue, pair: &ArgumentPair) -> Result<(DialogueGraph, DialogueGraph)> {
    let mut mb = Builder::new(Recipe::GainMention);
    let mut eb = Builder::new(Recipe::GainEntity);

    // entity name -> mentions, in first-seen order
    let mut entities: Vec<(String, Vec<Mention>)> = Vec::new();
    let mut push_entity = |name: String, ms: Vec<Mention>| {
        if !entities.iter().any(|(n, _)| *n == name) {
            entities.push((name, ms));
        }
    };
    for (role, name) in roles_of(pair) {
        let ms = warn_if_unresolved(&mut mb, d, Some(role), name)?;
        push_entity(normalize_ws(name), ms);
    }
    for p in &d.pairs {
        for (_, name) in roles_of(p) {
            push_entity(normalize_ws(name), mentions_of_argument(d, name)?);
        }
    }
    for c in &d.chains {
        push_entity(normalize_ws(&c.head), c.mentions.clone());
    }

    let dn = mb.node(NodeKind::Dialogue, "D".into(), Payload::Dialogue);
    let mut owners: BTreeMap<Mention, Vec<String>> = BTreeMap::new();
    for (name, ms) in &entities {
        for m in ms {
            let o = owners.entry(m.clone()).or_default();
            if !o.contains(name) {
                o.push(name.clone());
            }
        }
    }
    for (m, o) in &owners {
        let id = mb.node(
            NodeKind::Mention,
            mention_key(m),
            Payload::Mention {
                mention: m.clone(),
                owners: o.clone(),
            },
        );
        mb.edge(EdgeKind::DM, dn, id);
    }
    let ids: Vec<(usize, &Mention, &Vec<String>)> = owners
        .iter()
        .map(|(m, o)| (mb.keys[&mention_key(m)], m, o))
        .collect();
    for (i, &(x, mx, ox)) in ids.iter().enumerate() {
        for &(y, my, oy) in &ids[i + 1..] {
            if ox.iter().any(|o| oy.contains(o)) {
                mb.edge(EdgeKind::IE, x, y);
            }
            if mx.utterance_index == my.utterance_index {
                mb.edge(EdgeKind::IU, x, y);
            }
        }
    }

    let subj = normalize_ws(&pair.subject);
    let obj = normalize_ws(&pair.object);
    let ent_ids: Vec<usize> = entities
        .iter()
        .map(|(name, _)| {
            let mut roles = Vec::new();
            if *name == subj {
                roles.push(ArgRole::Subject);
            }
            if *name == obj {
                roles.push(ArgRole::Object);
            }
            eb.node(NodeKind::Argument, format!("E:{name}"), argument_payload(d, name, roles))
        })
        .collect();
    for i in 0..entities.len() {
        let ui: BTreeSet<usize> = entities[i].1.iter().map(|m| m.utterance_index).collect();
        for j in i + 1..entities.len() {
            if entities[j].1.iter().any(|m| ui.contains(&m.utterance_index)) {
                eb.edge(EdgeKind::EE, ent_ids[i], ent_ids[j]);
            }
        }
    }
    Ok((mb.finish(), eb.finish()))
}

fn is_word(tok: &str) -> bool {
    !tok.chars().all(|c| c.is_ascii_punctuation())
}

/// HGAT-style graph with argument, utterance, speaker, type and word nodes.
/// Chains add CW, CS and CU edges for the arguments that head one.
pub fn build_hgat(d: &Dialogue, pair: &ArgumentPair) -> Result<DialogueGraph> {
    let mut b = Builder::new(Recipe::Hgat);
    let args: Vec<usize> = roles_of(pair)
        .into_iter()
        .map(|(role, name)| b.node(NodeKind::Argument, role_key(role).into(), argument_payload(d, name, vec![role])))
        .collect();
    let utt: Vec<usize> = d
        .utterances
        .iter()
        .map(|u| b.node(NodeKind::Utterance, format!("U:{}", u.index), Payload::Utterance { index: u.index }))
        .collect();
    let mut speakers = BTreeMap::new();
    for s in d.speakers() {
        let id = b.node(NodeKind::Speaker, format!("S:{s}"), Payload::Speaker { label: s.to_string() });
        speakers.insert(s.to_string(), id);
    }
    let mut types = BTreeMap::new();
    for t in [&pair.subject_type, &pair.object_type] {
        if !types.contains_key(t.as_str()) {
            let id = b.node(NodeKind::Type, format!("T:{t}"), Payload::Type { tag: t.clone() });
            types.insert(t.clone(), id);
        }
    }
    let vocab: BTreeSet<String> = d
        .utterances
        .iter()
        .flat_map(|u| u.tokens.iter())
        .filter(|t| is_word(t))
        .map(|t| t.to_lowercase())
        .collect();
    let mut words = BTreeMap::new();
    for w in vocab {
        let id = b.node(NodeKind::Word, format!("W:{w}"), Payload::Word { word: w.clone() });
        words.insert(w, id);
    }

    for u in &d.utterances {
        for t in u.tokens.iter().filter(|t| is_word(t)) {
            b.edge(EdgeKind::UW, utt[u.index], words[&t.to_lowercase()]);
        }
        b.edge(EdgeKind::US, utt[u.index], speakers[&u.speaker_id]);
    }
    for (k, ((role, name), tag)) in roles_of(pair)
        .into_iter()
        .zip([&pair.subject_type, &pair.object_type])
        .enumerate()
    {
        warn_if_unresolved(&mut b, d, Some(role), name)?;
        let a = args[k];
        for t in surface_turns(d, name) {
            b.edge(EdgeKind::UA, utt[t], a);
        }
        let ty = types[tag.as_str()];
        b.edge(EdgeKind::TA, ty, a);
        for w in crate::tokenize::tokenize(name).iter().filter(|t| is_word(t)) {
            if let Some(&wid) = words.get(&w.to_lowercase()) {
                b.edge(EdgeKind::TW, ty, wid);
            }
        }
        if let Some(ci) = d.chain_of(name)? {
            for m in &d.chains[ci].mentions {
                b.edge(EdgeKind::CU, a, utt[m.utterance_index]);
                for t in &d.utterances[m.utterance_index].tokens[m.token_start..=m.token_end] {
                    if let Some(&wid) = words.get(&t.to_lowercase()) {
                        b.edge(EdgeKind::CW, a, wid);
                    }
                }
            }
            if let Some(&sid) = speakers.get(name) {
                b.edge(EdgeKind::CS, a, sid);
            }
        }
    }
    Ok(b.finish())
}

/// Removes the given edge kinds and prunes mention nodes left isolated.
/// The input graph is untouched.
pub fn strip_edges(g: &DialogueGraph, kinds: &BTreeSet<EdgeKind>) -> Result<DialogueGraph> {
    let declared = g.recipe.declared_kinds();
    if let Some(k) = kinds.iter().find(|k| !declared.contains(k)) {
        return Err(Error::UnknownKind {
            kind: k.code().into(),
            recipe: g.recipe.name().into(),
        });
    }
    let kept: Vec<Edge> = g.edges.iter().copied().filter(|e| !kinds.contains(&e.kind)).collect();
    let mut degree = vec![0usize; g.nodes.len()];
    for e in &kept {
        degree[e.src] += 1;
        degree[e.dst] += 1;
    }
    let mut remap = vec![usize::MAX; g.nodes.len()];
    let mut nodes = Vec::new();
    for n in &g.nodes {
        if n.kind == NodeKind::Mention && degree[n.id] == 0 {
            continue;
        }
        remap[n.id] = nodes.len();
        nodes.push(Node {
            id: nodes.len(),
            ..n.clone()
        });
    }
    let mut edges: Vec<Edge> = kept
        .into_iter()
        .map(|e| Edge {
            src: remap[e.src],
            dst: remap[e.dst],
            kind: e.kind,
        })
        .collect();
    edges.sort_by_key(|e| (e.kind, e.src, e.dst));
    Ok(DialogueGraph {
        recipe: g.recipe,
        nodes,
        edges,
        warnings: g.warnings.clone(),
    })
}

/// Builds the graph(s) of `recipe`. GAIN yields the mention graph followed by
/// the entity graph; the others yield one graph.
pub fn build(recipe: Recipe, d: &Dialogue, pair: &ArgumentPair, deps: Option<&dyn DependencyProvider>) -> Result<Vec<DialogueGraph>> {
    Ok(match recipe {
        Recipe::Tucore => vec![build_tucore(d, pair)?],
        Recipe::Redialog => vec![build_redialog(d, pair, deps)?],
        Recipe::GainMention | Recipe::GainEntity => {
            let (m, e) = build_gain(d, pair)?;
            vec![m, e]
        }
        Recipe::Hgat => vec![build_hgat(d, pair)?],
    })
}

#[cfg(test)]
mod tests;
