//! A small reverse-mode automatic differentiation tape over dense `f64`
//! matrices. Every value is a 2-D array; row vectors are `1 x n`.
//!
//! The tape borrows a [`ParamStore`]; parameters enter as leaves and their
//! gradients come back from [`Tape::backward`] keyed by [`ParamId`].

use std::collections::{BTreeMap, HashMap};

use ndarray::{concatenate, s, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Named trainable matrices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Mat>,
    index: HashMap<String, ParamId>,
}

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Mat) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        let id = ParamId(self.values.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.values.push(value);
        id
    }

    /// Uniform Glorot initialization.
    pub fn add_glorot(&mut self, name: impl Into<String>, rows: usize, cols: usize, rng: &mut impl Rng) -> ParamId {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let v = Mat::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound));
        self.add(name, v)
    }

    pub fn add_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ParamId {
        self.add(name, Mat::zeros((rows, cols)))
    }

    pub fn add_uniform(&mut self, name: impl Into<String>, rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> ParamId {
        let v = Mat::from_shape_fn((rows, cols), |_| rng.gen_range(-scale..scale));
        self.add(name, v)
    }

    pub fn get(&self, id: ParamId) -> &Mat {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Mat {
        &mut self.values[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let recs: Vec<ParamRecord> = self
            .names
            .iter()
            .zip(&self.values)
            .map(|(n, v)| ParamRecord {
                name: n.clone(),
                rows: v.nrows(),
                cols: v.ncols(),
                data: v.iter().copied().collect(),
            })
            .collect();
        serde_json::to_value(recs).expect("parameters serialize")
    }

    /// Overwrites values from a serialized store; names and shapes must match.
    pub fn load_json(&mut self, v: &serde_json::Value) -> Result<()> {
        let recs: Vec<ParamRecord> =
            serde_json::from_value(v.clone()).map_err(|e| Error::Checkpoint(format!("bad parameter block: {e}")))?;
        if recs.len() != self.values.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} parameter matrices, found {}",
                self.values.len(),
                recs.len()
            )));
        }
        for (i, r) in recs.into_iter().enumerate() {
            let cur = &self.values[i];
            if r.name != self.names[i] || r.rows != cur.nrows() || r.cols != cur.ncols() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} is {}x{} in the model but {} is {}x{} in the checkpoint",
                    self.names[i],
                    cur.nrows(),
                    cur.ncols(),
                    r.name,
                    r.rows,
                    r.cols
                )));
            }
            self.values[i] = Mat::from_shape_vec((r.rows, r.cols), r.data)
                .map_err(|e| Error::Checkpoint(format!("parameter {}: {e}", r.name)))?;
        }
        Ok(())
    }
}

enum Op {
    Const,
    Param(ParamId),
    Embed(ParamId, Vec<usize>),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Rows(Var, Vec<usize>),
    Cols(Var, usize, usize),
    MeanRows(Var),
    Transpose(Var),
    SoftmaxRows(Var),
    Sum(Var),
    LogSumExp(Var),
    BceWithLogits(Var, Mat),
}

/// Parameter gradients produced by one backward pass.
#[derive(Debug, Default, Clone)]
pub struct Gradients {
    grads: BTreeMap<ParamId, Mat>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Mat> {
        self.grads.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamId, &Mat)> {
        self.grads.iter()
    }

    fn accumulate(&mut self, id: ParamId, g: Mat) {
        match self.grads.get_mut(&id) {
            Some(acc) => *acc += &g,
            None => {
                self.grads.insert(id, g);
            }
        }
    }

    /// Adds another pass's gradients into this one.
    pub fn merge(&mut self, other: Gradients) {
        for (id, g) in other.grads {
            self.accumulate(id, g);
        }
    }

    pub fn scale(&mut self, f: f64) {
        for g in self.grads.values_mut() {
            *g *= f;
        }
    }
}

pub struct Tape<'p> {
    store: &'p ParamStore,
    vals: Vec<Mat>,
    ops: Vec<Op>,
    param_vars: HashMap<ParamId, Var>,
}

impl<'p> Tape<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self {
            store,
            vals: Vec::new(),
            ops: Vec::new(),
            param_vars: HashMap::new(),
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    fn push(&mut self, v: Mat, op: Op) -> Var {
        self.vals.push(v);
        self.ops.push(op);
        Var(self.vals.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Mat {
        &self.vals[v.0]
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.vals[v.0][[0, 0]]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.vals[v.0].dim()
    }

    pub fn len(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn constant(&mut self, m: Mat) -> Var {
        self.push(m, Op::Const)
    }

    pub fn row(&mut self, data: &[f64]) -> Var {
        self.constant(Mat::from_shape_vec((1, data.len()), data.to_vec()).expect("row shape"))
    }

    pub fn zeros(&mut self, rows: usize, cols: usize) -> Var {
        self.constant(Mat::zeros((rows, cols)))
    }

    /// A parameter leaf; repeated calls within one tape share the node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_vars.get(&id) {
            return v;
        }
        let v = self.push(self.store.get(id).clone(), Op::Param(id));
        self.param_vars.insert(id, v);
        v
    }

    /// Gathers rows of an embedding table without copying the whole table.
    pub fn embed(&mut self, table: ParamId, rows: &[usize]) -> Var {
        let t = self.store.get(table);
        let v = t.select(Axis(0), rows);
        self.push(v, Op::Embed(table, rows.to_vec()))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.vals[a.0].dot(&self.vals[b.0]);
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "add shape mismatch");
        let v = &self.vals[a.0] + &self.vals[b.0];
        self.push(v, Op::Add(a, b))
    }

    /// `a (n x m) + b (1 x m)`, broadcasting `b` over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(b).0, 1);
        assert_eq!(self.shape(a).1, self.shape(b).1, "add_row width mismatch");
        let v = &self.vals[a.0] + &self.vals[b.0];
        self.push(v, Op::AddRow(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "sub shape mismatch");
        let v = &self.vals[a.0] - &self.vals[b.0];
        self.push(v, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.shape(a), self.shape(b), "mul shape mismatch");
        let v = &self.vals[a.0] * &self.vals[b.0];
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: Var, f: f64) -> Var {
        let v = &self.vals[a.0] * f;
        self.push(v, Op::Scale(a, f))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let v = self.vals[a.0].mapv(f64::tanh);
        self.push(v, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let v = self.vals[a.0].mapv(sigmoid);
        self.push(v, Op::Sigmoid(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.vals[p.0].view()).collect();
        let v = concatenate(Axis(1), &views).expect("concat_cols: row counts differ");
        self.push(v, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|p| self.vals[p.0].view()).collect();
        let v = concatenate(Axis(0), &views).expect("concat_rows: column counts differ");
        self.push(v, Op::ConcatRows(parts.to_vec()))
    }

    /// Gathers the listed rows (repeats allowed).
    pub fn rows(&mut self, a: Var, idx: &[usize]) -> Var {
        let v = self.vals[a.0].select(Axis(0), idx);
        self.push(v, Op::Rows(a, idx.to_vec()))
    }

    pub fn row_at(&mut self, a: Var, i: usize) -> Var {
        self.rows(a, &[i])
    }

    /// Columns `[start, end)`.
    pub fn cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let v = self.vals[a.0].slice(s![.., start..end]).to_owned();
        self.push(v, Op::Cols(a, start, end))
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let v = self.vals[a.0]
            .mean_axis(Axis(0))
            .expect("mean of zero rows")
            .insert_axis(Axis(0));
        self.push(v, Op::MeanRows(a))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let v = self.vals[a.0].t().to_owned();
        self.push(v, Op::Transpose(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut v = self.vals[a.0].clone();
        for mut r in v.rows_mut() {
            let m = r.fold(f64::NEG_INFINITY, |acc, &x| acc.max(x));
            r.mapv_inplace(|x| (x - m).exp());
            let z = r.sum();
            r.mapv_inplace(|x| x / z);
        }
        self.push(v, Op::SoftmaxRows(a))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = Mat::from_elem((1, 1), self.vals[a.0].sum());
        self.push(v, Op::Sum(a))
    }

    /// `log(sum(exp(a)))` over all entries.
    pub fn logsumexp(&mut self, a: Var) -> Var {
        let v = Mat::from_elem((1, 1), logsumexp(self.vals[a.0].iter().copied()));
        self.push(v, Op::LogSumExp(a))
    }

    /// Summed binary cross-entropy of `sigmoid(logits)` against `targets`.
    pub fn bce_with_logits(&mut self, logits: Var, targets: Mat) -> Var {
        assert_eq!(self.shape(logits), targets.dim(), "bce shape mismatch");
        let total: f64 = self.vals[logits.0]
            .iter()
            .zip(targets.iter())
            .map(|(&x, &y)| x.max(0.0) - x * y + (-x.abs()).exp().ln_1p())
            .sum();
        self.push(Mat::from_elem((1, 1), total), Op::BceWithLogits(logits, targets))
    }

    /// Gradients of the scalar `out` with respect to every parameter used.
    pub fn backward(&self, out: Var) -> Gradients {
        assert_eq!(self.shape(out), (1, 1), "backward needs a scalar output");
        let n = self.vals.len();
        let mut g: Vec<Option<Mat>> = (0..n).map(|_| None).collect();
        g[out.0] = Some(Mat::ones((1, 1)));
        let mut grads = Gradients::default();

        fn acc(g: &mut [Option<Mat>], v: Var, d: Mat) {
            match &mut g[v.0] {
                Some(x) => *x += &d,
                slot @ None => *slot = Some(d),
            }
        }

        for i in (0..=out.0).rev() {
            let Some(gi) = g[i].take() else { continue };
            match &self.ops[i] {
                Op::Const => {}
                Op::Param(id) => grads.accumulate(*id, gi),
                Op::Embed(id, rows) => {
                    let table = self.store.get(*id);
                    let mut full = Mat::zeros(table.dim());
                    for (k, &r) in rows.iter().enumerate() {
                        let mut dst = full.row_mut(r);
                        dst += &gi.row(k);
                    }
                    grads.accumulate(*id, full);
                }
                Op::MatMul(a, b) => {
                    let da = gi.dot(&self.vals[b.0].t());
                    let db = self.vals[a.0].t().dot(&gi);
                    acc(&mut g, *a, da);
                    acc(&mut g, *b, db);
                }
                Op::Add(a, b) => {
                    acc(&mut g, *a, gi.clone());
                    acc(&mut g, *b, gi);
                }
                Op::AddRow(a, b) => {
                    let db = gi.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(&mut g, *a, gi);
                    acc(&mut g, *b, db);
                }
                Op::Sub(a, b) => {
                    acc(&mut g, *b, -&gi);
                    acc(&mut g, *a, gi);
                }
                Op::Mul(a, b) => {
                    let da = &gi * &self.vals[b.0];
                    let db = &gi * &self.vals[a.0];
                    acc(&mut g, *a, da);
                    acc(&mut g, *b, db);
                }
                Op::Scale(a, f) => acc(&mut g, *a, gi * *f),
                Op::Tanh(a) => {
                    let y = &self.vals[i];
                    acc(&mut g, *a, gi * &y.mapv(|t| 1.0 - t * t));
                }
                Op::Sigmoid(a) => {
                    let y = &self.vals[i];
                    acc(&mut g, *a, gi * &y.mapv(|s| s * (1.0 - s)));
                }
                Op::ConcatCols(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.vals[p.0].ncols();
                        acc(&mut g, *p, gi.slice(s![.., off..off + w]).to_owned());
                        off += w;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let h = self.vals[p.0].nrows();
                        acc(&mut g, *p, gi.slice(s![off..off + h, ..]).to_owned());
                        off += h;
                    }
                }
                Op::Rows(a, idx) => {
                    let mut d = Mat::zeros(self.vals[a.0].dim());
                    for (k, &r) in idx.iter().enumerate() {
                        let mut dst = d.row_mut(r);
                        dst += &gi.row(k);
                    }
                    acc(&mut g, *a, d);
                }
                Op::Cols(a, start, end) => {
                    let mut d = Mat::zeros(self.vals[a.0].dim());
                    d.slice_mut(s![.., *start..*end]).assign(&gi);
                    acc(&mut g, *a, d);
                }
                Op::MeanRows(a) => {
                    let (r, c) = self.vals[a.0].dim();
                    let row = gi.row(0).to_owned();
                    let d = Mat::from_shape_fn((r, c), |(_, j)| row[j] / r as f64);
                    acc(&mut g, *a, d);
                }
                Op::Transpose(a) => acc(&mut g, *a, gi.t().to_owned()),
                Op::SoftmaxRows(a) => {
                    let y = &self.vals[i];
                    let mut d = Mat::zeros(y.dim());
                    for r in 0..y.nrows() {
                        let dot: f64 = y.row(r).iter().zip(gi.row(r).iter()).map(|(a, b)| a * b).sum();
                        for c in 0..y.ncols() {
                            d[[r, c]] = y[[r, c]] * (gi[[r, c]] - dot);
                        }
                    }
                    acc(&mut g, *a, d);
                }
                Op::Sum(a) => {
                    let s = gi[[0, 0]];
                    acc(&mut g, *a, Mat::from_elem(self.vals[a.0].dim(), s));
                }
                Op::LogSumExp(a) => {
                    let s = gi[[0, 0]];
                    let lse = self.vals[i][[0, 0]];
                    acc(&mut g, *a, self.vals[a.0].mapv(|x| s * (x - lse).exp()));
                }
                Op::BceWithLogits(a, t) => {
                    let s = gi[[0, 0]];
                    let mut d = self.vals[a.0].mapv(sigmoid);
                    d -= t;
                    acc(&mut g, *a, d * s);
                }
            }
        }
        grads
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logsumexp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Outcome of [`check_gradients`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub checked: usize,
    pub max_rel_err: f64,
    /// `name[r,c]` of the worst entry.
    pub worst: String,
}

/// Entries whose analytic and numeric gradients are both below this are
/// compared on an absolute scale; a relative error is meaningless there.
pub const GRAD_FLOOR: f64 = 1e-6;

/// Relative error `|a - n| / max(|a|, |n|, GRAD_FLOOR)`.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR)
}

/// Compares tape gradients of the scalar built by `f` against central finite
/// differences with step `h`, over `entries` (every scalar when `None`).
pub fn check_gradients<F>(store: &mut ParamStore, entries: Option<&[(ParamId, usize, usize)]>, h: f64, f: F) -> GradCheck
where
    F: Fn(&mut Tape) -> Var,
{
    let grads = {
        let mut t = Tape::new(store);
        let out = f(&mut t);
        t.backward(out)
    };
    let all: Vec<(ParamId, usize, usize)> = match entries {
        Some(e) => e.to_vec(),
        None => store
            .ids()
            .flat_map(|id| {
                let (r, c) = store.get(id).dim();
                (0..r).flat_map(move |i| (0..c).map(move |j| (id, i, j)))
            })
            .collect(),
    };
    let eval = |store: &ParamStore| {
        let mut t = Tape::new(store);
        let o = f(&mut t);
        t.scalar(o)
    };
    let mut report = GradCheck {
        checked: 0,
        max_rel_err: 0.0,
        worst: String::new(),
    };
    for (id, r, c) in all {
        let orig = store.get(id)[[r, c]];
        store.get_mut(id)[[r, c]] = orig + h;
        let up = eval(store);
        store.get_mut(id)[[r, c]] = orig - h;
        let down = eval(store);
        store.get_mut(id)[[r, c]] = orig;
        let num = (up - down) / (2.0 * h);
        let ana = grads.get(id).map(|g| g[[r, c]]).unwrap_or(0.0);
        let e = rel_err(ana, num);
        report.checked += 1;
        if e > report.max_rel_err || report.worst.is_empty() {
            report.max_rel_err = e;
            report.worst = format!("{}[{r},{c}] analytic {ana:e} numeric {num:e}", store.name(id));
        }
    }
    report
}

/// Adam with optional global-norm gradient clipping.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub clip_norm: Option<f64>,
    m: BTreeMap<ParamId, Mat>,
    v: BTreeMap<ParamId, Mat>,
    t: i32,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            clip_norm: Some(5.0),
            m: BTreeMap::new(),
            v: BTreeMap::new(),
            t: 0,
        }
    }

    pub fn step(&mut self, store: &mut ParamStore, grads: &Gradients) {
        self.t += 1;
        let norm: f64 = grads.iter().map(|(_, g)| g.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt();
        let factor = match self.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        let b1t = 1.0 - self.beta1.powi(self.t);
        let b2t = 1.0 - self.beta2.powi(self.t);
        for id in grads.grads.keys() {
            let g = &grads.grads[id] * factor;
            let m = self.m.entry(*id).or_insert_with(|| Mat::zeros(g.dim()));
            let v = self.v.entry(*id).or_insert_with(|| Mat::zeros(g.dim()));
            m.zip_mut_with(&g, |m, &g| *m = self.beta1 * *m + (1.0 - self.beta1) * g);
            v.zip_mut_with(&g, |v, &g| *v = self.beta2 * *v + (1.0 - self.beta2) * g * g);
            let (lr, eps) = (self.lr, self.eps);
            let p = store.get_mut(*id);
            ndarray::Zip::from(p).and(&*m).and(&*v).for_each(|p, &m, &v| {
                *p -= lr * (m / b1t) / ((v / b2t).sqrt() + eps);
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Central finite differences against the tape for every scalar of every
    /// parameter.
    fn check<F>(store: &mut ParamStore, f: F)
    where
        F: Fn(&mut Tape) -> Var,
    {
        let r = check_gradients(store, None, 1e-5, f);
        assert!(r.max_rel_err < 1e-5, "{r:?}");
    }

    fn store_with(shapes: &[(&str, usize, usize)]) -> ParamStore {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = ParamStore::new();
        for (n, r, c) in shapes {
            s.add_uniform(*n, *r, *c, 1.0, &mut rng);
        }
        s
    }

    #[test]
    fn grad_dense_ops() {
        let mut s = store_with(&[("a", 3, 4), ("b", 4, 2), ("r", 1, 2)]);
        check(&mut s, |t| {
            let a = t.param(ParamId(0));
            let b = t.param(ParamId(1));
            let r = t.param(ParamId(2));
            let m = t.matmul(a, b);
            let m = t.add_row(m, r);
            let th = t.tanh(m);
            let sg = t.sigmoid(m);
            let p = t.mul(th, sg);
            let q = t.sub(p, m);
            let q = t.scale(q, 0.7);
            t.sum(q)
        });
    }

    #[test]
    fn grad_shape_ops() {
        let mut s = store_with(&[("a", 3, 4), ("b", 2, 4)]);
        check(&mut s, |t| {
            let a = t.param(ParamId(0));
            let b = t.param(ParamId(1));
            let c = t.concat_rows(&[a, b]);
            let g = t.rows(c, &[4, 0, 0, 2]);
            let cc = t.concat_cols(&[g, g]);
            let sl = t.cols(cc, 2, 7);
            let tr = t.transpose(sl);
            let sm = t.softmax_rows(tr);
            let mr = t.mean_rows(sm);
            let w = t.mul(mr, mr);
            let l = t.logsumexp(w);
            let s2 = t.sum(sl);
            t.add(l, s2)
        });
    }

    #[test]
    fn grad_embedding_and_bce() {
        let mut s = store_with(&[("emb", 5, 3)]);
        check(&mut s, |t| {
            let e = t.embed(ParamId(0), &[1, 3, 1]);
            let y = Mat::from_shape_vec((3, 3), vec![1., 0., 1., 0., 0., 1., 1., 1., 0.]).unwrap();
            t.bce_with_logits(e, y)
        });
    }

    #[test]
    fn bce_matches_definition() {
        let s = ParamStore::new();
        let mut t = Tape::new(&s);
        let x = t.row(&[0.3, -2.0]);
        let l = t.bce_with_logits(x, Mat::from_shape_vec((1, 2), vec![1.0, 0.0]).unwrap());
        let want = -(sigmoid(0.3).ln()) - (1.0 - sigmoid(-2.0)).ln();
        assert!((t.scalar(l) - want).abs() < 1e-12);
    }

    #[test]
    fn adam_descends_quadratic() {
        let mut s = ParamStore::new();
        let id = s.add("x", Mat::from_elem((1, 1), 3.0));
        let mut opt = Adam::new(0.1);
        for _ in 0..300 {
            let g = {
                let mut t = Tape::new(&s);
                let x = t.param(id);
                let sq = t.mul(x, x);
                let o = t.sum(sq);
                t.backward(o)
            };
            opt.step(&mut s, &g);
        }
        assert!(s.get(id)[[0, 0]].abs() < 1e-2);
    }

    #[test]
    fn store_json_round_trip_and_mismatch() {
        let s = store_with(&[("a", 2, 3)]);
        let mut s2 = store_with(&[("a", 2, 3)]);
        s2.get_mut(ParamId(0)).fill(0.0);
        s2.load_json(&s.to_json()).unwrap();
        assert_eq!(s, s2);
        let mut s3 = store_with(&[("a", 3, 3)]);
        assert!(matches!(s3.load_json(&s.to_json()), Err(Error::Checkpoint(_))));
    }
}
