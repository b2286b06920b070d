//! Graph-neural relation classifier.
//!
//! Words are embedded, a speaker embedding is added (concatenated for the
//! REDialog recipe), a BiLSTM runs over each turn and multi-head
//! self-attention restricted to that turn pools it into an utterance vector.
//! Node states are initialized from these vectors, refined by a relational
//! GCN with one transform per edge kind, and the subject and object states
//! feed 36 sigmoid outputs.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{sigmoid, Adam, Mat, ParamId, ParamStore, Tape, Var};
use crate::config::fingerprint;
use crate::coref::Resolver;
use crate::dialogue::{Dialogue, Mention};
use crate::error::{Error, Result};
use crate::eval::{score, F1Report};
use crate::graph::{self, ArgRole, DependencyProvider, DialogueGraph, EdgeKind, Payload, Recipe};
use crate::io::{attach_sidecar, read_to_string, write_atomic, SidecarFile};
use crate::nn::{load_word_vectors, BiLstm, Linear, SelfAttention, Vocab};
use crate::relations::{RelationInventory, NUM_RELATIONS};
use crate::tokenize::normalize_ws;

pub const MAX_SPEAKERS: usize = 10;
const CHECKPOINT_FORMAT: &str = "corefdre-dre/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChainSource {
    /// No chains: the backbone graph.
    None,
    /// Annotated chains.
    Gold,
    /// Chains from a trained resolver.
    Predicted,
    /// Chains loaded from an externally produced sidecar.
    External,
}

impl ChainSource {
    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Some(Self::None),
            "gold" => Some(Self::Gold),
            "predicted" => Some(Self::Predicted),
            "external" => Some(Self::External),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoder {
    /// Trainable word embeddings and a BiLSTM.
    Bilstm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DreConfig {
    pub recipe: Recipe,
    pub chain_source: ChainSource,
    pub encoder: Encoder,
    pub emb_dim: usize,
    /// LSTM width per direction; node states are twice this.
    pub hidden: usize,
    pub heads: usize,
    /// Speaker embedding width when concatenated (REDialog).
    pub speaker_dim: usize,
    pub speaker_embeddings: bool,
    pub gcn_layers: usize,
    /// Defaults to the recipe's rate, see [`default_lr`].
    pub lr: Option<f64>,
    pub epochs: usize,
    pub seed: u64,
    pub tau: f64,
    pub max_tokens: usize,
    /// Edge kinds removed from every graph (ablation).
    pub strip: BTreeSet<String>,
    pub word_vectors: Option<PathBuf>,
}

impl Default for DreConfig {
    fn default() -> Self {
        Self {
            recipe: Recipe::Tucore,
            chain_source: ChainSource::Gold,
            encoder: Encoder::Bilstm,
            emb_dim: 32,
            hidden: 16,
            heads: 2,
            speaker_dim: 8,
            speaker_embeddings: true,
            gcn_layers: 2,
            lr: None,
            epochs: 10,
            seed: 13,
            tau: 0.5,
            max_tokens: 512,
            strip: BTreeSet::new(),
            word_vectors: None,
        }
    }
}

/// Learning rate used by each backbone when the config leaves it unset.
pub fn default_lr(recipe: Recipe) -> f64 {
    match recipe {
        Recipe::Tucore => 3e-5,
        Recipe::Redialog => 1e-5,
        Recipe::GainMention | Recipe::GainEntity => 1e-3,
        Recipe::Hgat => 1e-4,
    }
}

impl DreConfig {
    pub fn lr(&self) -> f64 {
        self.lr.unwrap_or_else(|| default_lr(self.recipe))
    }

    pub fn strip_kinds(&self) -> Result<BTreeSet<EdgeKind>> {
        let kinds = EdgeKind::parse_set(&self.strip.iter().cloned().collect::<Vec<_>>().join(","))?;
        let declared = declared(self.recipe);
        if let Some(k) = kinds.iter().find(|k| !declared.contains(k)) {
            return Err(Error::UnknownKind {
                kind: k.code().into(),
                recipe: self.recipe.name().into(),
            });
        }
        Ok(kinds)
    }

    fn concat_speaker(&self) -> bool {
        self.recipe == Recipe::Redialog
    }

    pub fn state_dim(&self) -> usize {
        2 * self.hidden
    }
}

fn declared(recipe: Recipe) -> Vec<EdgeKind> {
    match recipe {
        Recipe::GainMention | Recipe::GainEntity => {
            let mut v = Recipe::GainMention.declared_kinds().to_vec();
            v.extend(Recipe::GainEntity.declared_kinds());
            v
        }
        r => r.declared_kinds().to_vec(),
    }
}

/// Replaces chains according to `source`.
pub fn apply_chain_source(
    ds: &mut [Dialogue],
    source: ChainSource,
    resolver: Option<&Resolver>,
    external: Option<SidecarFile>,
) -> Result<()> {
    match source {
        ChainSource::None => ds.iter_mut().for_each(|d| d.chains.clear()),
        ChainSource::Gold => {}
        ChainSource::Predicted => {
            let r = resolver.ok_or_else(|| Error::Config("chain_source = predicted needs a resolver".into()))?;
            for d in ds.iter_mut() {
                d.chains = r.predict_chains(d);
            }
        }
        ChainSource::External => {
            let sc = external.ok_or_else(|| Error::Config("chain_source = external needs a sidecar".into()))?;
            ds.iter_mut().for_each(|d| d.chains.clear());
            attach_sidecar(ds, sc)?;
        }
    }
    Ok(())
}

/// Drops trailing turns until at most `max_tokens` tokens remain, never
/// cutting a turn. Mentions in dropped turns go too.
pub fn truncate(d: &Dialogue, max_tokens: usize) -> Dialogue {
    let mut total = 0;
    let mut keep = 0;
    for u in &d.utterances {
        if total + u.tokens.len() > max_tokens && keep > 0 {
            break;
        }
        total += u.tokens.len();
        keep += 1;
    }
    if keep == d.utterances.len() {
        return d.clone();
    }
    log::warn!("dialogue {} truncated to {keep} of {} turns", d.id, d.utterances.len());
    let mut out = d.clone();
    out.utterances.truncate(keep);
    for c in &mut out.chains {
        c.mentions.retain(|m| m.utterance_index < keep);
    }
    out.chains.retain(|c| !c.mentions.is_empty());
    out
}

/// Per-token and per-turn vectors of one dialogue, on a tape.
#[derive(Debug, Clone)]
pub struct EncoderOutput {
    /// One `n_u x d` matrix per turn.
    pub tokens: Vec<Var>,
    /// `U x d`.
    pub utterances: Var,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct GcnLayer {
    self_loop: Linear,
    kinds: BTreeMap<EdgeKind, ParamId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Params {
    emb: ParamId,
    speaker: ParamId,
    lstm: BiLstm,
    attention: SelfAttention,
    speaker_proj: Linear,
    unknown_arg: ParamId,
    types: ParamId,
    gcn: Vec<GcnLayer>,
    entity_gcn: Vec<GcnLayer>,
    head: Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationPrediction {
    pub dialogue_id: String,
    pub pair_index: usize,
    pub probabilities: Vec<f64>,
    pub labels: Vec<String>,
}

/// Applies the threshold with argmax fallback; returns label indices.
pub fn decide(probs: &[f64], tau: f64) -> Vec<usize> {
    let picked: Vec<usize> = (0..probs.len()).filter(|&i| probs[i] >= tau).collect();
    if !picked.is_empty() {
        return picked;
    }
    let best = (0..probs.len()).fold(0, |b, i| if probs[i] > probs[b] { i } else { b });
    vec![best]
}

#[derive(Debug, Clone)]
pub struct DreModel {
    pub config: DreConfig,
    pub vocab: Vocab,
    pub type_tags: Vec<String>,
    pub inventory: RelationInventory,
    pub store: ParamStore,
    p: Params,
}

fn speaker_index(label: &str) -> usize {
    label
        .strip_prefix('S')
        .and_then(|n| n.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .map_or(0, |n| n.min(MAX_SPEAKERS - 1))
}

fn gcn_layers(store: &mut ParamStore, name: &str, n: usize, d: usize, kinds: &[EdgeKind], rng: &mut ChaCha8Rng) -> Vec<GcnLayer> {
    (0..n)
        .map(|l| GcnLayer {
            self_loop: Linear::new(store, &format!("{name}{l}.self"), d, d, true, rng),
            kinds: kinds
                .iter()
                .map(|&k| (k, store.add_glorot(format!("{name}{l}.{}", k.code()), d, d, rng)))
                .collect(),
        })
        .collect()
}

/// Symmetrically normalized adjacency of one edge kind:
/// `D^-1/2 A D^-1/2` with degrees counted within that kind.
pub fn normalized_adjacency(g: &DialogueGraph, kind: EdgeKind) -> Option<Mat> {
    let n = g.nodes.len();
    let mut a = Mat::zeros((n, n));
    let mut any = false;
    for e in g.edges.iter().filter(|e| e.kind == kind) {
        a[[e.src, e.dst]] = 1.0;
        a[[e.dst, e.src]] = 1.0;
        any = true;
    }
    if !any {
        return None;
    }
    let deg: Vec<f64> = a.rows().into_iter().map(|r| r.sum()).collect();
    for i in 0..n {
        for j in 0..n {
            if a[[i, j]] != 0.0 {
                a[[i, j]] /= (deg[i] * deg[j]).sqrt();
            }
        }
    }
    Some(a)
}

impl DreModel {
    pub fn new(config: DreConfig, vocab: Vocab, type_tags: Vec<String>, inventory: RelationInventory) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let c = &config;
        let d = c.state_dim();
        let emb = store.add_uniform("dre.emb", vocab.len(), c.emb_dim, 0.1, &mut rng);
        let sdim = if c.concat_speaker() { c.speaker_dim } else { c.emb_dim };
        let speaker = store.add_uniform("dre.speaker", MAX_SPEAKERS, sdim, 0.1, &mut rng);
        let lstm_in = if c.concat_speaker() { c.emb_dim + c.speaker_dim } else { c.emb_dim };
        let lstm = BiLstm::new(&mut store, "dre.lstm", lstm_in, c.hidden, &mut rng);
        let attention = SelfAttention::new(&mut store, "dre.attention", d, c.heads, &mut rng);
        let speaker_proj = Linear::new(&mut store, "dre.speaker_proj", sdim, d, true, &mut rng);
        let unknown_arg = store.add_uniform("dre.unknown_arg", 1, d, 0.1, &mut rng);
        let types = store.add_uniform("dre.types", type_tags.len() + 1, d, 0.1, &mut rng);
        let (gcn, entity_gcn) = match c.recipe {
            Recipe::GainMention | Recipe::GainEntity => (
                gcn_layers(&mut store, "dre.gcn", c.gcn_layers, d, Recipe::GainMention.declared_kinds(), &mut rng),
                gcn_layers(&mut store, "dre.entity_gcn", c.gcn_layers, d, Recipe::GainEntity.declared_kinds(), &mut rng),
            ),
            r => (gcn_layers(&mut store, "dre.gcn", c.gcn_layers, d, r.declared_kinds(), &mut rng), Vec::new()),
        };
        let head = Linear::new(&mut store, "dre.head", 2 * d, NUM_RELATIONS, true, &mut rng);
        Self {
            config,
            vocab,
            type_tags,
            inventory,
            store,
            p: Params {
                emb,
                speaker,
                lstm,
                attention,
                speaker_proj,
                unknown_arg,
                types,
                gcn,
                entity_gcn,
                head,
            },
        }
    }

    /// Builds vocabularies from a training split.
    pub fn for_corpus(config: DreConfig, train: &[Dialogue]) -> Result<Self> {
        let vocab = Vocab::from_dialogues(train);
        let tags: BTreeSet<String> = train
            .iter()
            .flat_map(|d| d.pairs.iter())
            .flat_map(|p| [p.subject_type.clone(), p.object_type.clone()])
            .collect();
        let wv = config.word_vectors.clone();
        let mut m = Self::new(config, vocab, tags.into_iter().collect(), RelationInventory::default());
        if let Some(p) = wv {
            let emb = m.p.emb;
            load_word_vectors(&p, &m.vocab, m.store.get_mut(emb))?;
        }
        Ok(m)
    }

    fn type_index(&self, tag: &str) -> usize {
        self.type_tags.iter().position(|t| t == tag).map_or(0, |i| i + 1)
    }

    pub fn encode(&self, t: &mut Tape, d: &Dialogue) -> Result<EncoderOutput> {
        if d.utterances.is_empty() || d.token_count() == 0 {
            return Err(Error::EmptyDialogue(d.id.clone()));
        }
        let mut tokens = Vec::with_capacity(d.utterances.len());
        let mut utts = Vec::with_capacity(d.utterances.len());
        for u in &d.utterances {
            let n = u.tokens.len();
            if n == 0 {
                // an empty turn still gets a (zero) vector
                let z = t.zeros(1, self.config.state_dim());
                tokens.push(t.zeros(0, self.config.state_dim()));
                utts.push(z);
                continue;
            }
            let ids = self.vocab.ids(&u.tokens);
            let mut x = t.embed(self.p.emb, &ids);
            let s = t.embed(self.p.speaker, &vec![speaker_index(&u.speaker_id); n]);
            if self.config.concat_speaker() {
                let s = if self.config.speaker_embeddings { s } else { t.zeros(n, self.config.speaker_dim) };
                x = t.concat_cols(&[x, s]);
            } else if self.config.speaker_embeddings {
                x = t.add(x, s);
            }
            let h = self.p.lstm.forward(t, x);
            let a = self.p.attention.forward(t, h);
            utts.push(t.mean_rows(a));
            tokens.push(h);
        }
        let utterances = t.concat_rows(&utts);
        Ok(EncoderOutput { tokens, utterances })
    }

    fn span_state(&self, t: &mut Tape, enc: &EncoderOutput, m: &Mention) -> Var {
        let idx: Vec<usize> = (m.token_start..=m.token_end).collect();
        let r = t.rows(enc.tokens[m.utterance_index], &idx);
        t.mean_rows(r)
    }

    fn speaker_state(&self, t: &mut Tape, label: &str) -> Var {
        let s = t.embed(self.p.speaker, &[speaker_index(label)]);
        self.p.speaker_proj.forward(t, s)
    }

    /// Initial node states (`N x d`). `mention_states` supplies already
    /// computed states for mentions keyed by span (the GAIN entity graph).
    pub fn init_states(
        &self,
        t: &mut Tape,
        d: &Dialogue,
        enc: &EncoderOutput,
        g: &DialogueGraph,
        mention_states: Option<&BTreeMap<(usize, usize, usize), (Var, Vec<String>)>>,
    ) -> Var {
        let mut rows: Vec<Option<Var>> = vec![None; g.nodes.len()];
        // mentions first: arguments average them
        let mut owned: BTreeMap<String, Vec<Var>> = BTreeMap::new();
        for n in &g.nodes {
            if let Payload::Mention { mention, owners } = &n.payload {
                let v = self.span_state(t, enc, mention);
                for o in owners {
                    owned.entry(o.clone()).or_default().push(v);
                }
                rows[n.id] = Some(v);
            }
        }
        if let Some(ms) = mention_states {
            for (v, owners) in ms.values() {
                for o in owners {
                    owned.entry(o.clone()).or_default().push(*v);
                }
            }
        }
        let speakers = d.speakers();
        for n in &g.nodes {
            let v = match &n.payload {
                Payload::Mention { .. } => continue,
                Payload::Dialogue => t.mean_rows(enc.utterances),
                Payload::Utterance { index } => t.row_at(enc.utterances, *index),
                Payload::Speaker { label } => self.speaker_state(t, label),
                Payload::Argument { name, surface, .. } => {
                    if let Some(vs) = owned.get(&normalize_ws(name)) {
                        let cat = t.concat_rows(vs);
                        t.mean_rows(cat)
                    } else if !surface.is_empty() {
                        let vs: Vec<Var> = surface.iter().map(|m| self.span_state(t, enc, m)).collect();
                        let cat = t.concat_rows(&vs);
                        t.mean_rows(cat)
                    } else if speakers.contains(&name.as_str()) {
                        self.speaker_state(t, name)
                    } else {
                        t.param(self.p.unknown_arg)
                    }
                }
                Payload::Type { tag } => t.embed(self.p.types, &[self.type_index(tag)]),
                Payload::Word { word } => {
                    let mut vs = Vec::new();
                    for u in &d.utterances {
                        for (i, tok) in u.tokens.iter().enumerate() {
                            if tok.to_lowercase() == *word {
                                vs.push(t.row_at(enc.tokens[u.index], i));
                            }
                        }
                    }
                    let cat = t.concat_rows(&vs);
                    t.mean_rows(cat)
                }
                Payload::Mdp { utterance, token } => t.row_at(enc.tokens[*utterance], *token),
            };
            rows[n.id] = Some(v);
        }
        let rows: Vec<Var> = rows.into_iter().map(|r| r.expect("every node initialized")).collect();
        t.concat_rows(&rows)
    }

    fn layers_for(&self, g: &DialogueGraph) -> &[GcnLayer] {
        if g.recipe == Recipe::GainEntity {
            &self.p.entity_gcn
        } else {
            &self.p.gcn
        }
    }

    /// `layers` rounds of relational message passing:
    /// `H' = tanh(H W_0 + b + Σ_k Â_k H W_k) + H`.
    pub fn propagate(&self, t: &mut Tape, g: &DialogueGraph, states: Var, layers: usize) -> Result<Var> {
        let n = t.shape(states).0;
        if n < g.nodes.len() {
            return Err(Error::MissingState(n));
        }
        let adj: Vec<(EdgeKind, Var)> = {
            let mut v = Vec::new();
            for k in g.recipe.declared_kinds() {
                if let Some(a) = normalized_adjacency(g, *k) {
                    v.push((*k, t.constant(a)));
                }
            }
            v
        };
        let mut h = states;
        for layer in self.layers_for(g).iter().take(layers) {
            let mut z = layer.self_loop.forward(t, h);
            for (k, a) in &adj {
                let w = t.param(layer.kinds[k]);
                let hw = t.matmul(h, w);
                let m = t.matmul(*a, hw);
                z = t.add(z, m);
            }
            let act = t.tanh(z);
            h = t.add(act, h);
        }
        Ok(h)
    }

    /// Relation logits (`1 x 36`) from subject and object states.
    pub fn classify(&self, t: &mut Tape, subject: Var, object: Var) -> Var {
        let x = t.concat_cols(&[subject, object]);
        self.p.head.forward(t, x)
    }

    /// Graphs used for pair `k` of `d`, with the configured strip set applied.
    pub fn graphs(&self, d: &Dialogue, k: usize, deps: Option<&dyn DependencyProvider>) -> Result<Vec<DialogueGraph>> {
        let strip = self.config.strip_kinds()?;
        graph::build(self.config.recipe, d, &d.pairs[k], deps)?
            .into_iter()
            .map(|g| {
                let own: BTreeSet<EdgeKind> = strip
                    .iter()
                    .copied()
                    .filter(|e| g.recipe.declared_kinds().contains(e))
                    .collect();
                graph::strip_edges(&g, &own)
            })
            .collect()
    }

    /// Logits for one pair from its graphs.
    pub fn pair_logits(&self, t: &mut Tape, d: &Dialogue, enc: &EncoderOutput, graphs: &[DialogueGraph]) -> Result<Var> {
        let layers = self.config.gcn_layers;
        let g = &graphs[0];
        let h0 = self.init_states(t, d, enc, g, None);
        let h = self.propagate(t, g, h0, layers)?;
        let (final_graph, h) = if let Some(eg) = graphs.get(1) {
            let mut ms = BTreeMap::new();
            for n in &g.nodes {
                if let Payload::Mention { mention, owners } = &n.payload {
                    ms.insert(mention.span(), (t.row_at(h, n.id), owners.clone()));
                }
            }
            let e0 = self.init_states(t, d, enc, eg, Some(&ms));
            (eg, self.propagate(t, eg, e0, layers)?)
        } else {
            (g, h)
        };
        let si = final_graph.argument_node(ArgRole::Subject).ok_or(Error::MissingState(0))?;
        let oi = final_graph.argument_node(ArgRole::Object).ok_or(Error::MissingState(0))?;
        let s = t.row_at(h, si);
        let o = t.row_at(h, oi);
        Ok(self.classify(t, s, o))
    }

    /// Summed binary cross-entropy over every pair of `d`.
    pub fn loss(&self, t: &mut Tape, d: &Dialogue) -> Result<Option<Var>> {
        if d.pairs.is_empty() {
            return Ok(None);
        }
        let d = truncate(d, self.config.max_tokens);
        let enc = self.encode(t, &d)?;
        let mut terms = Vec::new();
        for k in 0..d.pairs.len() {
            let graphs = self.graphs(&d, k, None)?;
            let logits = self.pair_logits(t, &d, &enc, &graphs)?;
            let target = self.inventory.encode(&d.pairs[k].relations);
            let target = Mat::from_shape_vec((1, NUM_RELATIONS), target).expect("target shape");
            terms.push(t.bce_with_logits(logits, target));
        }
        let cat = t.concat_rows(&terms);
        Ok(Some(t.sum(cat)))
    }

    pub fn predict(&self, d: &Dialogue) -> Result<Vec<RelationPrediction>> {
        if d.pairs.is_empty() {
            return Ok(Vec::new());
        }
        let d = truncate(d, self.config.max_tokens);
        let mut t = Tape::new(&self.store);
        let enc = self.encode(&mut t, &d)?;
        let mut out = Vec::with_capacity(d.pairs.len());
        for k in 0..d.pairs.len() {
            let graphs = self.graphs(&d, k, None)?;
            let logits = self.pair_logits(&mut t, &d, &enc, &graphs)?;
            let probabilities: Vec<f64> = t.value(logits).iter().map(|&x| sigmoid(x)).collect();
            let labels = decide(&probabilities, self.config.tau)
                .into_iter()
                .map(|i| self.inventory.label(i).to_string())
                .collect();
            out.push(RelationPrediction {
                dialogue_id: d.id.clone(),
                pair_index: k,
                probabilities,
                labels,
            });
        }
        Ok(out)
    }

    pub fn predict_all(&self, ds: &[Dialogue]) -> Result<Vec<RelationPrediction>> {
        let mut out = Vec::new();
        for d in ds {
            out.extend(self.predict(d)?);
        }
        Ok(out)
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&(&self.config, &self.vocab, &self.type_tags))
    }

    pub fn to_json(&self, log: &[DreEpoch]) -> String {
        let v = serde_json::json!({
            "format": CHECKPOINT_FORMAT,
            "recipe": self.config.recipe,
            "chain_source": self.config.chain_source,
            "fingerprint": self.fingerprint(),
            "config": self.config,
            "vocab": self.vocab,
            "type_tags": self.type_tags,
            "metric_log": log,
            "params": self.store.to_json(),
        });
        serde_json::to_string(&v).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<(Self, Vec<DreEpoch>)> {
        let bad = |m: String| Error::Checkpoint(m);
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if v["format"] != CHECKPOINT_FORMAT {
            return Err(bad(format!("not a relation-model checkpoint: {}", v["format"])));
        }
        let config: DreConfig = serde_json::from_value(v["config"].clone()).map_err(|e| bad(e.to_string()))?;
        let vocab: Vocab = serde_json::from_value(v["vocab"].clone()).map_err(|e| bad(e.to_string()))?;
        let tags: Vec<String> = serde_json::from_value(v["type_tags"].clone()).map_err(|e| bad(e.to_string()))?;
        let log: Vec<DreEpoch> = serde_json::from_value(v["metric_log"].clone()).map_err(|e| bad(e.to_string()))?;
        let mut m = Self::new(config, vocab, tags, RelationInventory::default());
        if v["fingerprint"] != m.fingerprint().as_str() {
            return Err(bad("fingerprint does not match config".into()));
        }
        m.store.load_json(&v["params"])?;
        Ok((m, log))
    }

    pub fn save(&self, path: &Path, log: &[DreEpoch]) -> Result<()> {
        write_atomic(path, self.to_json(log).as_bytes())
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<DreEpoch>)> {
        Self::from_json(&read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DreEpoch {
    pub epoch: usize,
    pub loss: f64,
    pub dev_precision: f64,
    pub dev_recall: f64,
    pub dev_f1: f64,
}

/// Renders a metric log as JSON lines.
pub fn metric_log_lines(fingerprint: &str, log: &[DreEpoch]) -> String {
    let mut s = String::new();
    for e in log {
        let mut v = serde_json::to_value(e).expect("epoch serializes");
        v["fingerprint"] = serde_json::Value::String(fingerprint.to_string());
        s.push_str(&serde_json::to_string(&v).expect("epoch serializes"));
        s.push('\n');
    }
    s
}

/// Trains on `train` (chains already chosen by the caller, or cleared when
/// the config says `none`) and keeps the parameters of the best dev epoch.
pub fn train_dre(train: &[Dialogue], dev: &[Dialogue], config: &DreConfig) -> Result<(DreModel, Vec<DreEpoch>)> {
    if train.iter().all(|d| d.pairs.is_empty()) {
        return Err(Error::EmptySplit("train".into()));
    }
    if dev.iter().all(|d| d.pairs.is_empty()) {
        return Err(Error::EmptySplit("dev".into()));
    }
    config.strip_kinds()?;
    let prep = |ds: &[Dialogue]| -> Vec<Dialogue> {
        let mut v = ds.to_vec();
        if config.chain_source == ChainSource::None {
            v.iter_mut().for_each(|d| d.chains.clear());
        }
        v
    };
    let (train, dev) = (prep(train), prep(dev));
    let mut model = DreModel::for_corpus(config.clone(), &train)?;
    let mut adam = Adam::new(config.lr());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xd1a1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::new();
    let mut best: Option<(f64, ParamStore)> = None;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, &k) in order.iter().enumerate() {
            let grads = {
                let mut t = Tape::new(&model.store);
                let Some(loss) = model.loss(&mut t, &train[k])? else { continue };
                let l = t.scalar(loss);
                if !l.is_finite() {
                    return Err(Error::NonFiniteLoss { loss: l, epoch, step });
                }
                total += l;
                t.backward(loss)
            };
            adam.step(&mut model.store, &grads);
        }
        let report: F1Report = score(&model.predict_all(&dev)?, &dev, &model.inventory)?;
        log::info!("dre epoch {epoch}: loss {total:.4} dev f1 {:.4}", report.f1);
        log.push(DreEpoch {
            epoch,
            loss: total / train.len() as f64,
            dev_precision: report.precision,
            dev_recall: report.recall,
            dev_f1: report.f1,
        });
        if best.as_ref().is_none_or(|(f, _)| report.f1 > *f) {
            best = Some((report.f1, model.store.clone()));
        }
    }
    if let Some((_, store)) = best {
        model.store = store;
    }
    Ok((model, log))
}
