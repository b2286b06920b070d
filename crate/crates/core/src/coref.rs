//! End-to-end span-ranking coreference.
//!
//! Every span of up to `max_width` tokens inside one utterance is a
//! candidate. A span's representation `g` concatenates the BiLSTM states at
//! its boundaries, an attention-weighted sum of its word embeddings and a
//! width embedding. Scores:
//!
//! ```text
//! s_m(i)   = w_m · FFNN_m(g_i)
//! s_a(i,j) = w_a · FFNN_a([g_i, g_j, g_i ∘ g_j, φ(i,j)])
//! s(i,j)   = s_m(i) + s_m(j) + s_a(i,j),    s(i,ε) = 0
//! ```
//!
//! The top `⌈λT⌉` spans by `s_m` survive pruning; each picks its best
//! antecedent among the previous `beam` survivors or the dummy `ε`, and the
//! resulting links are closed transitively into chains.

use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, Mat, ParamId, ParamStore, Tape, Var};
use crate::config::fingerprint;
use crate::dialogue::{ChainType, CoreferenceChain, Dialogue, Mention};
use crate::error::{Error, Result};
use crate::io::{read_to_string, sidecar_entry, write_atomic, SidecarEntry};
use crate::lexicon;
use crate::nn::{load_word_vectors, BiLstm, Scorer, Vocab};
use crate::unionfind::UnionFind;

pub const WIDTH_BUCKETS: usize = 8;
pub const DISTANCE_BUCKETS: usize = 10;
const CHECKPOINT_FORMAT: &str = "corefdre-resolver/1";
const MASKED: f64 = -1e30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorefConfig {
    pub seed: u64,
    pub emb_dim: usize,
    /// LSTM width per direction.
    pub hidden: usize,
    pub ffnn: usize,
    pub width_dim: usize,
    pub feature_dim: usize,
    pub lambda: f64,
    pub max_width: usize,
    pub beam: usize,
    pub lr: f64,
    pub epochs: usize,
    /// Weight of an auxiliary mention-detection loss on `s_m` (0 disables).
    pub mention_loss: f64,
    /// Optional GloVe-format text file used to initialize word embeddings.
    pub word_vectors: Option<PathBuf>,
}

impl Default for CorefConfig {
    fn default() -> Self {
        Self {
            seed: 13,
            emb_dim: 32,
            hidden: 32,
            ffnn: 64,
            width_dim: 8,
            feature_dim: 8,
            lambda: 0.4,
            max_width: 10,
            beam: 50,
            lr: 1e-3,
            epochs: 10,
            mention_loss: 1.0,
            word_vectors: None,
        }
    }
}

/// Width bucket: `⌊log2 w⌋`, capped at 7 (1, 2-3, 4-7, ..., 128+).
pub fn width_bucket(width: usize) -> usize {
    assert!(width >= 1);
    ((usize::BITS - 1 - width.leading_zeros()) as usize).min(WIDTH_BUCKETS - 1)
}

/// Distance bucket over {0, 1, 2, 3, 4, 5-7, 8-15, 16-31, 32-63, 64+}.
pub fn distance_bucket(d: usize) -> usize {
    match d {
        0..=4 => d,
        5..=7 => 5,
        8..=15 => 6,
        16..=31 => 7,
        32..=63 => 8,
        _ => 9,
    }
}

/// Every span of at most `max_width` tokens within one utterance, sorted by
/// (utterance, start, end).
pub fn enumerate_spans(d: &Dialogue, max_width: usize) -> Vec<Mention> {
    let mut out = Vec::new();
    for u in &d.utterances {
        let n = u.tokens.len();
        for s in 0..n {
            for e in s..n.min(s + max_width) {
                out.push(Mention::new(u.index, s, e, u.tokens[s..=e].join(" ")));
            }
        }
    }
    out
}

/// Indices of the `min(len, ⌈λT⌉)` highest scores, ties to the earlier
/// index, returned in ascending order.
pub fn prune_spans(scores: &[f64], lambda: f64, total_tokens: usize) -> Vec<usize> {
    assert!(lambda > 0.0 && lambda <= 1.0, "lambda must be in (0, 1]");
    let k = ((lambda * total_tokens as f64).ceil() as usize).min(scores.len());
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

/// `y_i` for every span: `None` is the dummy antecedent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AntecedentAssignment(Vec<Option<usize>>);

impl AntecedentAssignment {
    pub fn new(y: Vec<Option<usize>>) -> Result<Self> {
        for (i, a) in y.iter().enumerate() {
            if let Some(j) = *a {
                if j >= i {
                    return Err(Error::OrderViolation { span: i, antecedent: j });
                }
            }
        }
        Ok(Self(y))
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Connected components of the antecedent links, singletons dropped, each
/// sorted and ordered by first member.
pub fn decode_chains(a: &AntecedentAssignment) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(a.len());
    for (i, y) in a.as_slice().iter().enumerate() {
        if let Some(j) = *y {
            uf.union(i, j);
        }
    }
    uf.groups(2)
}

/// Types a predicted chain and picks its head.
///
/// SPEAKER when a member names a speaker or contains a first- or
/// second-person pronoun and a speaker can be identified: the named speaker,
/// else the speaker of a first-person turn, else the other party of a
/// second-person turn. Everything else is PERSON.
pub fn type_chain(d: &Dialogue, mentions: &[Mention]) -> (ChainType, String) {
    let speakers = d.speakers();
    let mut head = mentions
        .iter()
        .find(|m| speakers.contains(&m.surface.as_str()))
        .map(|m| m.surface.clone());
    if head.is_none() {
        head = mentions
            .iter()
            .find(|m| matches!(span_tokens(d, m), [t] if lexicon::is_first_person(t)))
            .map(|m| d.utterances[m.utterance_index].speaker_id.clone());
    }
    if head.is_none() {
        head = mentions
            .iter()
            .find(|m| matches!(span_tokens(d, m), [t] if lexicon::is_second_person(t)))
            .and_then(|m| addressee(d, m.utterance_index));
    }
    match head {
        Some(h) => (ChainType::Speaker, h),
        None => {
            let surfaces: Vec<&str> = mentions.iter().map(|m| m.surface.as_str()).collect();
            let h = lexicon::pick_head(&surfaces).map(|i| surfaces[i].to_string()).unwrap_or_default();
            (ChainType::Person, h)
        }
    }
}

fn span_tokens<'a>(d: &'a Dialogue, m: &Mention) -> &'a [String] {
    &d.utterances[m.utterance_index].tokens[m.token_start..=m.token_end]
}

/// The nearest other speaker, looking back first.
fn addressee(d: &Dialogue, u: usize) -> Option<String> {
    let me = &d.utterances[u].speaker_id;
    d.utterances[..u]
        .iter()
        .rev()
        .chain(d.utterances[u + 1..].iter())
        .find(|x| &x.speaker_id != me)
        .map(|x| x.speaker_id.clone())
}

/// Builds typed chains from span clusters.
pub fn chains_from_clusters(d: &Dialogue, spans: &[Mention], clusters: &[Vec<usize>]) -> Vec<CoreferenceChain> {
    clusters
        .iter()
        .map(|c| {
            let mentions: Vec<Mention> = c.iter().map(|&i| spans[i].clone()).collect();
            let (chain_type, head) = type_chain(d, &mentions);
            CoreferenceChain {
                chain_type,
                head,
                mentions,
            }
        })
        .collect()
}

/// The three stored components of `s(i,j)` for one candidate antecedent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    /// Index into `kept`.
    pub antecedent: usize,
    pub s_m_i: f64,
    pub s_m_j: f64,
    pub s_a: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorefPrediction {
    pub spans: Vec<Mention>,
    pub mention_scores: Vec<f64>,
    /// Indices into `spans` of the pruned candidates, ascending.
    pub kept: Vec<usize>,
    /// Per kept span, its candidate antecedents (earlier kept spans).
    pub antecedents: Vec<Vec<PairScore>>,
    /// Over kept spans.
    pub assignment: AntecedentAssignment,
    pub chains: Vec<CoreferenceChain>,
}

impl CorefPrediction {
    /// `s(i, j)` over kept indices; `j = None` is the dummy. Antecedents
    /// outside the beam score `-inf`.
    pub fn total_score(&self, i: usize, j: Option<usize>) -> Result<f64> {
        let Some(j) = j else { return Ok(0.0) };
        if j >= i {
            return Err(Error::OrderViolation { span: i, antecedent: j });
        }
        Ok(self.antecedents[i]
            .iter()
            .find(|p| p.antecedent == j)
            .map_or(f64::NEG_INFINITY, |p| p.total))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Params {
    emb: ParamId,
    lstm: BiLstm,
    head: ParamId,
    width: ParamId,
    distance: ParamId,
    same_speaker: ParamId,
    mention: Scorer,
    antecedent: Scorer,
}

/// A trainable resolver: configuration, vocabulary and parameters.
#[derive(Debug, Clone)]
pub struct Resolver {
    pub config: CorefConfig,
    pub vocab: Vocab,
    pub store: ParamStore,
    p: Params,
}

struct Forward {
    spans: Vec<Mention>,
    s_m: Var,
    kept: Vec<usize>,
    /// (i, j) over kept indices, grouped by i
    pairs: Vec<(usize, usize)>,
    first_pair: Vec<usize>,
    s_m_kept: Var,
    s_a: Var,
    total: Var,
}

impl Resolver {
    pub fn new(config: CorefConfig, vocab: Vocab) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let c = &config;
        let emb = store.add_uniform("coref.emb", vocab.len(), c.emb_dim, 0.1, &mut rng);
        let lstm = BiLstm::new(&mut store, "coref.lstm", c.emb_dim, c.hidden, &mut rng);
        let head = store.add_glorot("coref.head", 2 * c.hidden, 1, &mut rng);
        let width = store.add_uniform("coref.width", WIDTH_BUCKETS, c.width_dim, 0.1, &mut rng);
        let distance = store.add_uniform("coref.distance", DISTANCE_BUCKETS, c.feature_dim, 0.1, &mut rng);
        let same_speaker = store.add_uniform("coref.same_speaker", 2, c.feature_dim, 0.1, &mut rng);
        let g = 4 * c.hidden + c.emb_dim + c.width_dim;
        let mention = Scorer::new(&mut store, "coref.mention", g, &[c.ffnn], &mut rng);
        let antecedent = Scorer::new(&mut store, "coref.antecedent", 3 * g + 2 * c.feature_dim, &[c.ffnn], &mut rng);
        Self {
            config,
            vocab,
            store,
            p: Params {
                emb,
                lstm,
                head,
                width,
                distance,
                same_speaker,
                mention,
                antecedent,
            },
        }
    }

    /// Width of a span representation `g`.
    pub fn g_dim(&self) -> usize {
        4 * self.config.hidden + self.config.emb_dim + self.config.width_dim
    }

    pub fn feature_dim(&self) -> usize {
        2 * self.config.feature_dim
    }

    pub fn mention_params(&self) -> &Scorer {
        &self.p.mention
    }

    pub fn antecedent_params(&self) -> &Scorer {
        &self.p.antecedent
    }

    /// `s_m` for each row of `g`.
    pub fn mention_score(&self, t: &mut Tape, g: Var) -> Var {
        self.p.mention.forward(t, g)
    }

    /// `s_a` for each aligned row of `g_i`, `g_j`, `φ`.
    pub fn antecedent_score(&self, t: &mut Tape, gi: Var, gj: Var, phi: Var) -> Var {
        let prod = t.mul(gi, gj);
        let x = t.concat_cols(&[gi, gj, prod, phi]);
        self.p.antecedent.forward(t, x)
    }

    /// `φ(i,j)` rows for the given (token distance, same speaker) pairs.
    pub fn pair_features(&self, t: &mut Tape, feats: &[(usize, bool)]) -> Var {
        let d: Vec<usize> = feats.iter().map(|&(d, _)| distance_bucket(d)).collect();
        let s: Vec<usize> = feats.iter().map(|&(_, s)| s as usize).collect();
        let dv = t.embed(self.p.distance, &d);
        let sv = t.embed(self.p.same_speaker, &s);
        t.concat_cols(&[dv, sv])
    }

    /// Span representations for `spans` (all must lie in `d`).
    pub fn span_reprs(&self, t: &mut Tape, d: &Dialogue, spans: &[Mention]) -> Var {
        let mut by_utt: HashMap<usize, Vec<usize>> = HashMap::new();
        for (k, m) in spans.iter().enumerate() {
            by_utt.entry(m.utterance_index).or_default().push(k);
        }
        let mut pieces = Vec::new();
        let mut order = Vec::new();
        let mut us: Vec<usize> = by_utt.keys().copied().collect();
        us.sort_unstable();
        for u in us {
            let members = &by_utt[&u];
            let ids = self.vocab.ids(&d.utterances[u].tokens);
            let n = ids.len();
            let x = t.embed(self.p.emb, &ids);
            let h = self.p.lstm.forward(t, x);
            let hw = t.param(self.p.head);
            let a = t.matmul(h, hw);
            let at = t.transpose(a);
            let sp: Vec<&Mention> = members.iter().map(|&k| &spans[k]).collect();
            let ones = t.constant(crate::autodiff::Mat::ones((sp.len(), 1)));
            let logits = t.matmul(ones, at);
            let mask = crate::autodiff::Mat::from_shape_fn((sp.len(), n), |(r, c)| {
                if c >= sp[r].token_start && c <= sp[r].token_end {
                    0.0
                } else {
                    MASKED
                }
            });
            let mask = t.constant(mask);
            let logits = t.add(logits, mask);
            let alpha = t.softmax_rows(logits);
            let headv = t.matmul(alpha, x);
            let starts: Vec<usize> = sp.iter().map(|m| m.token_start).collect();
            let ends: Vec<usize> = sp.iter().map(|m| m.token_end).collect();
            let hs = t.rows(h, &starts);
            let he = t.rows(h, &ends);
            let wb: Vec<usize> = sp.iter().map(|m| width_bucket(m.width())).collect();
            let wv = t.embed(self.p.width, &wb);
            pieces.push(t.concat_cols(&[hs, he, headv, wv]));
            order.extend(members.iter().copied());
        }
        let g = t.concat_rows(&pieces);
        // back to the caller's span order
        let mut inv = vec![0; order.len()];
        for (row, &k) in order.iter().enumerate() {
            inv[k] = row;
        }
        t.rows(g, &inv)
    }

    /// With `gold` set, gold mentions survive pruning as well. Training uses
    /// this so the loss can never be satisfied by pruning every gold mention.
    fn forward(&self, t: &mut Tape, d: &Dialogue, gold: bool) -> Option<Forward> {
        let spans = enumerate_spans(d, self.config.max_width);
        if spans.is_empty() {
            return None;
        }
        let g = self.span_reprs(t, d, &spans);
        let s_m = self.mention_score(t, g);
        let scores: Vec<f64> = t.value(s_m).iter().copied().collect();
        let mut kept = prune_spans(&scores, self.config.lambda, d.token_count());
        if gold {
            let golds: BTreeSet<(usize, usize, usize)> = d.chains.iter().flat_map(|c| c.mentions.iter().map(Mention::span)).collect();
            let mut all: BTreeSet<usize> = kept.into_iter().collect();
            all.extend((0..spans.len()).filter(|&k| golds.contains(&spans[k].span())));
            kept = all.into_iter().collect();
        }
        let offsets: Vec<usize> = d
            .utterances
            .iter()
            .scan(0, |acc, u| {
                let o = *acc;
                *acc += u.tokens.len();
                Some(o)
            })
            .collect();
        let start = |m: &Mention| offsets[m.utterance_index] + m.token_start;
        let g_kept = t.rows(g, &kept);
        let s_m_kept = t.rows(s_m, &kept);
        let mut pairs = Vec::new();
        let mut first_pair = Vec::with_capacity(kept.len());
        for i in 0..kept.len() {
            first_pair.push(pairs.len());
            for j in i.saturating_sub(self.config.beam)..i {
                pairs.push((i, j));
            }
        }
        let (s_a, total) = if pairs.is_empty() {
            let z = t.zeros(0, 1);
            (z, z)
        } else {
            let is: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let js: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let feats: Vec<(usize, bool)> = pairs
                .iter()
                .map(|&(i, j)| {
                    let (a, b) = (&spans[kept[i]], &spans[kept[j]]);
                    let same = d.utterances[a.utterance_index].speaker_id == d.utterances[b.utterance_index].speaker_id;
                    (start(a) - start(b), same)
                })
                .collect();
            let gi = t.rows(g_kept, &is);
            let gj = t.rows(g_kept, &js);
            let phi = self.pair_features(t, &feats);
            let s_a = self.antecedent_score(t, gi, gj, phi);
            let smi = t.rows(s_m_kept, &is);
            let smj = t.rows(s_m_kept, &js);
            let sum = t.add(smi, smj);
            let total = t.add(sum, s_a);
            (s_a, total)
        };
        Some(Forward {
            spans,
            s_m,
            kept,
            pairs,
            first_pair,
            s_m_kept,
            s_a,
            total,
        })
    }

    /// Negative marginal log-likelihood of gold-consistent antecedents,
    /// summed over kept spans. `None` for a dialogue without tokens.
    pub fn loss(&self, t: &mut Tape, d: &Dialogue) -> Option<Var> {
        let f = self.forward(t, d, true)?;
        let mut cluster: HashMap<(usize, usize, usize), usize> = HashMap::new();
        for (c, ch) in d.chains.iter().enumerate() {
            for m in &ch.mentions {
                cluster.insert(m.span(), c);
            }
        }
        let zero = t.zeros(1, 1);
        let mut terms = Vec::new();
        for i in 0..f.kept.len() {
            let lo = f.first_pair[i];
            let hi = f.first_pair.get(i + 1).copied().unwrap_or(f.pairs.len());
            let ci = cluster.get(&f.spans[f.kept[i]].span());
            let gold: Vec<usize> = (lo..hi)
                .filter(|&p| {
                    let j = f.pairs[p].1;
                    ci.is_some() && cluster.get(&f.spans[f.kept[j]].span()) == ci
                })
                .collect();
            if hi == lo {
                // only the dummy: log 1 - log 1
                continue;
            }
            let cand = t.rows(f.total, &(lo..hi).collect::<Vec<_>>());
            let all = t.concat_rows(&[zero, cand]);
            let lse_all = t.logsumexp(all);
            let lse_gold = if gold.is_empty() {
                zero
            } else {
                let g = t.rows(f.total, &gold);
                t.logsumexp(g)
            };
            terms.push(t.sub(lse_all, lse_gold));
        }
        if self.config.mention_loss > 0.0 {
            let labels = Mat::from_shape_fn((f.spans.len(), 1), |(k, _)| cluster.contains_key(&f.spans[k].span()) as u8 as f64);
            let bce = t.bce_with_logits(f.s_m, labels);
            terms.push(t.scale(bce, self.config.mention_loss));
        }
        if terms.is_empty() {
            return Some(zero);
        }
        let stacked = t.concat_rows(&terms);
        Some(t.sum(stacked))
    }

    /// Scores, prunes and decodes one dialogue.
    pub fn predict(&self, d: &Dialogue) -> CorefPrediction {
        let mut t = Tape::new(&self.store);
        let Some(f) = self.forward(&mut t, d, false) else {
            return CorefPrediction {
                spans: Vec::new(),
                mention_scores: Vec::new(),
                kept: Vec::new(),
                antecedents: Vec::new(),
                assignment: AntecedentAssignment(Vec::new()),
                chains: Vec::new(),
            };
        };
        let smk: Vec<f64> = t.value(f.s_m_kept).iter().copied().collect();
        let sa: Vec<f64> = t.value(f.s_a).iter().copied().collect();
        let tot: Vec<f64> = t.value(f.total).iter().copied().collect();
        let mut antecedents = vec![Vec::new(); f.kept.len()];
        for (p, &(i, j)) in f.pairs.iter().enumerate() {
            antecedents[i].push(PairScore {
                antecedent: j,
                s_m_i: smk[i],
                s_m_j: smk[j],
                s_a: sa[p],
                total: tot[p],
            });
        }
        // argmax with the dummy first, so ties go to the earliest option
        let y: Vec<Option<usize>> = antecedents
            .iter()
            .map(|cands| {
                let mut best = (0.0, None);
                for c in cands {
                    if c.total > best.0 {
                        best = (c.total, Some(c.antecedent));
                    }
                }
                best.1
            })
            .collect();
        let assignment = AntecedentAssignment::new(y).expect("antecedents precede");
        let kept_spans: Vec<Mention> = f.kept.iter().map(|&k| f.spans[k].clone()).collect();
        let chains = chains_from_clusters(d, &kept_spans, &decode_chains(&assignment));
        CorefPrediction {
            mention_scores: t.value(f.s_m).iter().copied().collect(),
            spans: f.spans,
            kept: f.kept,
            antecedents,
            assignment,
            chains,
        }
    }

    pub fn predict_chains(&self, d: &Dialogue) -> Vec<CoreferenceChain> {
        self.predict(d).chains
    }

    /// Sidecar entry with predicted chains in place of any existing ones.
    pub fn predict_sidecar(&self, d: &Dialogue) -> SidecarEntry {
        let mut x = d.clone();
        x.chains = self.predict_chains(d);
        sidecar_entry(&x)
    }

    pub fn fingerprint(&self) -> String {
        fingerprint(&(&self.config, &self.vocab))
    }

    pub fn to_json(&self) -> String {
        let v = serde_json::json!({
            "format": CHECKPOINT_FORMAT,
            "fingerprint": self.fingerprint(),
            "config": self.config,
            "vocab": self.vocab,
            "params": self.store.to_json(),
        });
        serde_json::to_string(&v).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Checkpoint(m);
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        if v["format"] != CHECKPOINT_FORMAT {
            return Err(bad(format!("not a resolver checkpoint: {}", v["format"])));
        }
        let config: CorefConfig = serde_json::from_value(v["config"].clone()).map_err(|e| bad(e.to_string()))?;
        let vocab: Vocab = serde_json::from_value(v["vocab"].clone()).map_err(|e| bad(e.to_string()))?;
        let mut r = Self::new(config, vocab);
        if v["fingerprint"] != r.fingerprint().as_str() {
            return Err(bad("fingerprint does not match config".into()));
        }
        r.store.load_json(&v["params"])?;
        Ok(r)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorefEpoch {
    pub epoch: usize,
    /// Mean loss per dialogue.
    pub loss: f64,
}

/// Trains a resolver on the gold chains of `corpus`.
pub fn train_resolver(corpus: &[Dialogue], config: &CorefConfig) -> Result<(Resolver, Vec<CorefEpoch>)> {
    train_resolver_staged(&[corpus], config)
}

/// Trains on each corpus in turn for `config.epochs` epochs, e.g. a general
/// coreference corpus followed by in-domain dialogues. The vocabulary covers
/// every stage; the optimizer restarts at each stage. Epoch numbers in the
/// log run on across stages.
pub fn train_resolver_staged(stages: &[&[Dialogue]], config: &CorefConfig) -> Result<(Resolver, Vec<CorefEpoch>)> {
    if stages.iter().all(|c| c.iter().all(|d| d.chains.is_empty())) {
        return Err(Error::NoGoldChains);
    }
    let vocab = Vocab::from_dialogues(stages.iter().flat_map(|c| c.iter()));
    let mut r = Resolver::new(config.clone(), vocab);
    if let Some(p) = &config.word_vectors {
        let n = load_word_vectors(p, &r.vocab, r.store.get_mut(r.p.emb))?;
        log::info!("initialized {n} word vectors from {}", p.display());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut log = Vec::new();
    for corpus in stages {
        let mut adam = Adam::new(config.lr);
        let mut order: Vec<usize> = (0..corpus.len()).collect();
        for _ in 0..config.epochs {
            let epoch = log.len();
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for (step, &k) in order.iter().enumerate() {
                let grads = {
                    let mut t = Tape::new(&r.store);
                    let Some(loss) = r.loss(&mut t, &corpus[k]) else { continue };
                    let l = t.scalar(loss);
                    if !l.is_finite() {
                        return Err(Error::NonFiniteLoss { loss: l, epoch, step });
                    }
                    total += l;
                    t.backward(loss)
                };
                adam.step(&mut r.store, &grads);
            }
            let mean = total / corpus.len().max(1) as f64;
            log::info!("coref epoch {epoch}: loss {mean:.4}");
            log.push(CorefEpoch { epoch, loss: mean });
        }
    }
    Ok((r, log))
}
