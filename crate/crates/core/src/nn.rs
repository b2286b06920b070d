//! Layers built on the autodiff tape: linear maps, feed-forward scorers,
//! LSTMs and multi-head self-attention, plus the shared word vocabulary.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Mat, ParamId, ParamStore, Tape, Var};
use crate::dialogue::Dialogue;
use crate::error::{Error, Result};

pub const UNK: usize = 0;
const UNK_TOKEN: &str = "<unk>";

/// Lowercased word types; id 0 is the unknown word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { words, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.words
    }
}

impl Vocab {
    /// Sorted word types of the given dialogues.
    pub fn from_dialogues<'a>(ds: impl IntoIterator<Item = &'a Dialogue>) -> Self {
        let set: BTreeSet<String> = ds
            .into_iter()
            .flat_map(|d| d.utterances.iter())
            .flat_map(|u| u.tokens.iter())
            .map(|t| t.to_lowercase())
            .collect();
        let mut words = vec![UNK_TOKEN.to_string()];
        words.extend(set);
        words.into()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, tok: &str) -> usize {
        self.index.get(&tok.to_lowercase()).copied().unwrap_or(UNK)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn ids(&self, toks: &[String]) -> Vec<usize> {
        toks.iter().map(|t| self.id(t)).collect()
    }
}

/// Reads whitespace-separated `word v1 ... vdim` lines (GloVe text format)
/// and overwrites the matching rows of `table`. Returns the number of rows
/// filled.
pub fn load_word_vectors(path: &Path, vocab: &Vocab, table: &mut Mat) -> Result<usize> {
    let text = crate::io::read_to_string(path)?;
    let dim = table.ncols();
    let mut filled = 0;
    for (ln, line) in text.lines().enumerate() {
        let mut parts = line.split_whitespace();
        let Some(w) = parts.next() else { continue };
        let Some(&row) = vocab.index.get(&w.to_lowercase()) else {
            continue;
        };
        let vals: Vec<f64> = parts
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                context: format!("{}:{}", path.display(), ln + 1),
                message: format!("{e}"),
            })?;
        if vals.len() != dim {
            return Err(Error::Parse {
                context: format!("{}:{}", path.display(), ln + 1),
                message: format!("expected {dim} values, found {}", vals.len()),
            });
        }
        for (c, v) in vals.into_iter().enumerate() {
            table[[row, c]] = v;
        }
        filled += 1;
    }
    Ok(filled)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Linear {
    pub w: ParamId,
    pub b: Option<ParamId>,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, bias: bool, rng: &mut impl Rng) -> Self {
        let w = store.add_glorot(format!("{name}.w"), input, output, rng);
        let b = bias.then(|| store.add_zeros(format!("{name}.b"), 1, output));
        Self { w, b }
    }

    pub fn forward(&self, t: &mut Tape, x: Var) -> Var {
        let w = t.param(self.w);
        let y = t.matmul(x, w);
        match self.b {
            Some(b) => {
                let b = t.param(b);
                t.add_row(y, b)
            }
            None => y,
        }
    }
}

/// `w · FFNN(x)`: tanh hidden layers followed by a bias-free scoring vector,
/// so a zero scoring vector gives a zero score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scorer {
    pub hidden: Vec<Linear>,
    pub w: ParamId,
}

impl Scorer {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, widths: &[usize], rng: &mut impl Rng) -> Self {
        let mut hidden = Vec::new();
        let mut d = input;
        for (k, &h) in widths.iter().enumerate() {
            hidden.push(Linear::new(store, &format!("{name}.ffnn{k}"), d, h, true, rng));
            d = h;
        }
        let w = store.add_glorot(format!("{name}.w"), d, 1, rng);
        Self { hidden, w }
    }

    /// One score per input row (`n x 1`).
    pub fn forward(&self, t: &mut Tape, x: Var) -> Var {
        let mut h = x;
        for l in &self.hidden {
            let z = l.forward(t, h);
            h = t.tanh(z);
        }
        let w = t.param(self.w);
        t.matmul(h, w)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lstm {
    wx: ParamId,
    wh: ParamId,
    b: ParamId,
    hidden: usize,
}

impl Lstm {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let wx = store.add_glorot(format!("{name}.wx"), input, 4 * hidden, rng);
        let wh = store.add_glorot(format!("{name}.wh"), hidden, 4 * hidden, rng);
        // forget-gate bias starts at 1
        let mut bias = Mat::zeros((1, 4 * hidden));
        bias.slice_mut(ndarray::s![.., hidden..2 * hidden]).fill(1.0);
        let b = store.add(format!("{name}.b"), bias);
        Self { wx, wh, b, hidden }
    }

    /// Runs over the rows of `x` (in reverse when `reverse`), returning the
    /// hidden state for each row in the original order.
    pub fn forward(&self, t: &mut Tape, x: Var, reverse: bool) -> Var {
        let n = t.shape(x).0;
        let hd = self.hidden;
        let wx = t.param(self.wx);
        let wh = t.param(self.wh);
        let b = t.param(self.b);
        let xw = t.matmul(x, wx);
        let xw = t.add_row(xw, b);
        let mut h = t.zeros(1, hd);
        let mut c = t.zeros(1, hd);
        let mut out = vec![h; n];
        let order: Vec<usize> = if reverse { (0..n).rev().collect() } else { (0..n).collect() };
        for i in order {
            let xi = t.row_at(xw, i);
            let hh = t.matmul(h, wh);
            let z = t.add(xi, hh);
            let zi = t.cols(z, 0, hd);
            let zf = t.cols(z, hd, 2 * hd);
            let zg = t.cols(z, 2 * hd, 3 * hd);
            let zo = t.cols(z, 3 * hd, 4 * hd);
            let ig = t.sigmoid(zi);
            let fg = t.sigmoid(zf);
            let g = t.tanh(zg);
            let og = t.sigmoid(zo);
            let keep = t.mul(fg, c);
            let write = t.mul(ig, g);
            c = t.add(keep, write);
            let tc = t.tanh(c);
            h = t.mul(og, tc);
            out[i] = h;
        }
        t.concat_rows(&out)
    }
}

/// Forward and backward LSTMs with concatenated outputs (`n x 2h`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiLstm {
    fwd: Lstm,
    bwd: Lstm,
}

impl BiLstm {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        Self {
            fwd: Lstm::new(store, &format!("{name}.fwd"), input, hidden, rng),
            bwd: Lstm::new(store, &format!("{name}.bwd"), input, hidden, rng),
        }
    }

    pub fn output_dim(&self) -> usize {
        2 * self.fwd.hidden
    }

    pub fn forward(&self, t: &mut Tape, x: Var) -> Var {
        let f = self.fwd.forward(t, x, false);
        let b = self.bwd.forward(t, x, true);
        t.concat_cols(&[f, b])
    }
}

/// Scaled dot-product self-attention with `heads` heads over the rows of one
/// sequence. Callers apply it per utterance, which is the attention mask.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelfAttention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
    heads: usize,
    dim: usize,
}

impl SelfAttention {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, heads: usize, rng: &mut impl Rng) -> Self {
        assert!(heads > 0 && dim % heads == 0, "dim {dim} not divisible by {heads} heads");
        Self {
            q: Linear::new(store, &format!("{name}.q"), dim, dim, false, rng),
            k: Linear::new(store, &format!("{name}.k"), dim, dim, false, rng),
            v: Linear::new(store, &format!("{name}.v"), dim, dim, false, rng),
            o: Linear::new(store, &format!("{name}.o"), dim, dim, true, rng),
            heads,
            dim,
        }
    }

    pub fn forward(&self, t: &mut Tape, x: Var) -> Var {
        let q = self.q.forward(t, x);
        let k = self.k.forward(t, x);
        let v = self.v.forward(t, x);
        let hd = self.dim / self.heads;
        let scale = 1.0 / (hd as f64).sqrt();
        let mut outs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let (a, b) = (h * hd, (h + 1) * hd);
            let qh = t.cols(q, a, b);
            let kh = t.cols(k, a, b);
            let vh = t.cols(v, a, b);
            let kt = t.transpose(kh);
            let s = t.matmul(qh, kt);
            let s = t.scale(s, scale);
            let p = t.softmax_rows(s);
            outs.push(t.matmul(p, vh));
        }
        let cat = t.concat_cols(&outs);
        self.o.forward(t, cat)
    }
}
