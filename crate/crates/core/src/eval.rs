//! Scoring, corpus statistics, analysis slices, ablation grids and plots.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::dialogue::{mentions_of_argument, surface_occurrences, ArgumentPair, ChainType, Dialogue};
use crate::dre::{train_dre, DreConfig, RelationPrediction};
use crate::error::{Error, PairKey, Result};
use crate::relations::RelationInventory;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.predicted)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.gold)
    }

    pub fn f1(&self) -> f64 {
        f1(self.precision(), self.recall())
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
    /// Number of gold (pair, label) instances, i.e. `counts.gold`.
    pub support: usize,
    pub per_relation: BTreeMap<String, Counts>,
}

impl F1Report {
    fn from_counts(counts: Counts, per_relation: BTreeMap<String, Counts>) -> Self {
        Self {
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            support: counts.gold,
            counts,
            per_relation,
        }
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "P {:.4}  R {:.4}  F1 {:.4}  (tp {}, predicted {}, gold {})\n",
            self.precision, self.recall, self.f1, self.counts.tp, self.counts.predicted, self.counts.gold
        );
        let _ = writeln!(s, "{:<32} {:>6} {:>6} {:>6} {:>8}", "relation", "tp", "pred", "gold", "f1");
        for (l, c) in &self.per_relation {
            let _ = writeln!(s, "{:<32} {:>6} {:>6} {:>6} {:>8.4}", l, c.tp, c.predicted, c.gold, c.f1());
        }
        s
    }
}

/// Micro precision, recall and F1 over (pair, label) instances, excluding
/// the no-relation label. Predictions for pairs outside `gold` are ignored.
pub fn score(preds: &[RelationPrediction], gold: &[Dialogue], inv: &RelationInventory) -> Result<F1Report> {
    let keys: Vec<PairKey> = gold
        .iter()
        .flat_map(|d| (0..d.pairs.len()).map(move |k| (d.id.clone(), k)))
        .collect();
    score_pairs(preds, gold, inv, &keys)
}

fn score_pairs(preds: &[RelationPrediction], gold: &[Dialogue], inv: &RelationInventory, keys: &[PairKey]) -> Result<F1Report> {
    let by_key: HashMap<(&str, usize), &RelationPrediction> =
        preds.iter().map(|p| ((p.dialogue_id.as_str(), p.pair_index), p)).collect();
    let dialogues: HashMap<&str, &Dialogue> = gold.iter().map(|d| (d.id.as_str(), d)).collect();
    let missing: Vec<PairKey> = keys
        .iter()
        .filter(|(d, k)| !by_key.contains_key(&(d.as_str(), *k)))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPrediction(missing));
    }
    let mut total = Counts::default();
    let mut per: BTreeMap<String, Counts> = BTreeMap::new();
    for (d, k) in keys {
        let g: BTreeSet<&str> = dialogues[d.as_str()].pairs[*k]
            .relations
            .iter()
            .map(String::as_str)
            .filter(|l| !inv.is_no_relation(l))
            .collect();
        let p: BTreeSet<&str> = by_key[&(d.as_str(), *k)]
            .labels
            .iter()
            .map(String::as_str)
            .filter(|l| !inv.is_no_relation(l))
            .collect();
        for l in &g {
            per.entry(l.to_string()).or_default().gold += 1;
        }
        for l in &p {
            per.entry(l.to_string()).or_default().predicted += 1;
        }
        for l in g.intersection(&p) {
            per.entry(l.to_string()).or_default().tp += 1;
        }
        total.gold += g.len();
        total.predicted += p.len();
        total.tp += g.intersection(&p).count();
    }
    Ok(F1Report::from_counts(total, per))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub slices: BTreeMap<String, F1Report>,
    /// Number of argument pairs in each slice.
    pub pairs: BTreeMap<String, usize>,
}

impl SliceReport {
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<8} {:>6} {:>8} {:>8} {:>8} {:>8}\n", "slice", "pairs", "support", "P", "R", "F1");
        for (k, r) in &self.slices {
            let _ = writeln!(
                s,
                "{:<8} {:>6} {:>8} {:>8.4} {:>8.4} {:>8.4}",
                k, self.pairs[k], r.support, r.precision, r.recall, r.f1
            );
        }
        s
    }
}

fn sliced(
    preds: &[RelationPrediction],
    corpus: &[Dialogue],
    inv: &RelationInventory,
    names: &[&str],
    key: impl Fn(&Dialogue, &ArgumentPair) -> Result<String>,
) -> Result<SliceReport> {
    let mut groups: BTreeMap<String, Vec<PairKey>> = names.iter().map(|n| (n.to_string(), Vec::new())).collect();
    for d in corpus {
        for (k, p) in d.pairs.iter().enumerate() {
            groups.entry(key(d, p)?).or_default().push((d.id.clone(), k));
        }
    }
    let mut slices = BTreeMap::new();
    let mut pairs = BTreeMap::new();
    for (name, keys) in groups {
        slices.insert(name.clone(), score_pairs(preds, corpus, inv, &keys)?);
        pairs.insert(name, keys.len());
    }
    Ok(SliceReport { slices, pairs })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceMode {
    /// Arguments located through their chains (literal occurrences when
    /// unchained).
    ChainAware,
    /// Literal occurrences of the argument strings only.
    NameOnly,
}

/// True when one utterance holds a mention of each argument.
pub fn is_intra(d: &Dialogue, p: &ArgumentPair, mode: SliceMode) -> Result<bool> {
    let locate = |a: &str| -> Result<BTreeSet<usize>> {
        let ms = match mode {
            SliceMode::ChainAware => mentions_of_argument(d, a)?,
            SliceMode::NameOnly => surface_occurrences(d, a),
        };
        Ok(ms.iter().map(|m| m.utterance_index).collect())
    };
    let (s, o) = (locate(&p.subject)?, locate(&p.object)?);
    Ok(!s.is_disjoint(&o))
}

pub fn slice_inter_intra(corpus: &[Dialogue], preds: &[RelationPrediction], inv: &RelationInventory, mode: SliceMode) -> Result<SliceReport> {
    sliced(preds, corpus, inv, &["inter", "intra"], |d, p| {
        Ok(if is_intra(d, p, mode)? { "intra" } else { "inter" }.to_string())
    })
}

pub const SPEAKER_BUCKETS: [&str; 4] = ["<=2", "3", "4", ">=5"];

pub fn speaker_bucket(n: usize) -> &'static str {
    match n {
        0..=2 => SPEAKER_BUCKETS[0],
        3 => SPEAKER_BUCKETS[1],
        4 => SPEAKER_BUCKETS[2],
        _ => SPEAKER_BUCKETS[3],
    }
}

pub fn slice_speakers(corpus: &[Dialogue], preds: &[RelationPrediction], inv: &RelationInventory) -> Result<SliceReport> {
    sliced(preds, corpus, inv, &SPEAKER_BUCKETS, |d, _| Ok(speaker_bucket(d.speakers().len()).to_string()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub speaker_chains: usize,
    pub person_chains: usize,
    pub location_chains: usize,
    pub organization_chains: usize,
    pub mentions: usize,
    pub chains: usize,
    pub dialogues: usize,
    pub utterances: usize,
    pub pairs: usize,
}

impl SplitStats {
    pub fn of(ds: &[Dialogue]) -> Self {
        let mut s = Self {
            dialogues: ds.len(),
            ..Self::default()
        };
        for d in ds {
            s.utterances += d.utterances.len();
            s.pairs += d.pairs.len();
            for c in &d.chains {
                s.chains += 1;
                s.mentions += c.mentions.len();
                match c.chain_type {
                    ChainType::Speaker => s.speaker_chains += 1,
                    ChainType::Person => s.person_chains += 1,
                    ChainType::Location => s.location_chains += 1,
                    ChainType::Organization => s.organization_chains += 1,
                }
            }
        }
        s
    }

    pub fn mentions_per_chain(&self) -> f64 {
        ratio(self.mentions, self.chains)
    }

    fn cells(&self) -> [(&'static str, usize); 9] {
        [
            ("speaker chains", self.speaker_chains),
            ("person chains", self.person_chains),
            ("location chains", self.location_chains),
            ("organization chains", self.organization_chains),
            ("mentions", self.mentions),
            ("chains", self.chains),
            ("dialogues", self.dialogues),
            ("utterances", self.utterances),
            ("argument pairs", self.pairs),
        ]
    }
}

impl Add for SplitStats {
    type Output = Self;

    fn add(self, o: Self) -> Self {
        Self {
            speaker_chains: self.speaker_chains + o.speaker_chains,
            person_chains: self.person_chains + o.person_chains,
            location_chains: self.location_chains + o.location_chains,
            organization_chains: self.organization_chains + o.organization_chains,
            mentions: self.mentions + o.mentions,
            chains: self.chains + o.chains,
            dialogues: self.dialogues + o.dialogues,
            utterances: self.utterances + o.utterances,
            pairs: self.pairs + o.pairs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    /// In the order the splits were given.
    pub splits: Vec<(String, SplitStats)>,
    pub total: SplitStats,
    pub mentions_per_chain: f64,
}

pub fn stats(splits: &[(&str, &[Dialogue])]) -> Stats {
    let splits: Vec<(String, SplitStats)> = splits.iter().map(|(n, ds)| (n.to_string(), SplitStats::of(ds))).collect();
    let total = splits.iter().fold(SplitStats::default(), |a, (_, s)| a + *s);
    Stats {
        mentions_per_chain: total.mentions_per_chain(),
        splits,
        total,
    }
}

impl Stats {
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<22}", "");
        for (n, _) in &self.splits {
            let _ = write!(s, "{n:>10}");
        }
        let _ = writeln!(s, "{:>10}", "total");
        let rows = SplitStats::default().cells().map(|(name, _)| name);
        for (r, name) in rows.iter().enumerate() {
            let _ = write!(s, "{name:<22}");
            for (_, st) in &self.splits {
                let _ = write!(s, "{:>10}", st.cells()[r].1);
            }
            let _ = writeln!(s, "{:>10}", self.total.cells()[r].1);
        }
        let _ = writeln!(s, "{:<22}{:>10.4}", "mentions per chain", self.mentions_per_chain);
        s
    }

    pub fn to_json(&self) -> String {
        let mut v = serde_json::Map::new();
        for (n, st) in &self.splits {
            v.insert(n.clone(), serde_json::to_value(st).expect("stats serialize"));
        }
        v.insert("total".into(), serde_json::to_value(self.total).expect("stats serialize"));
        v.insert("mentions_per_chain".into(), serde_json::json!(self.mentions_per_chain));
        let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(v)).expect("stats serialize");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub strip: Vec<String>,
    pub seeds: Vec<u64>,
    pub dev_f1: Vec<f64>,
    pub test_f1: Vec<f64>,
    pub dev_mean: f64,
    pub dev_std: f64,
    pub test_mean: f64,
    pub test_std: f64,
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub recipe: String,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<20} {:>16} {:>16}\n", "stripped", "dev F1", "test F1");
        for r in &self.rows {
            let name = if r.strip.is_empty() {
                "(full)".to_string()
            } else {
                format!("w/o {}", r.strip.join("+"))
            };
            let _ = writeln!(
                s,
                "{:<20} {:>8.4} ± {:<5.4} {:>8.4} ± {:<5.4}",
                name, r.dev_mean, r.dev_std, r.test_mean, r.test_std
            );
        }
        s
    }
}

/// Trains one model per (strip set, seed) and tabulates dev and test F1.
pub fn run_ablation(
    train: &[Dialogue],
    dev: &[Dialogue],
    test: &[Dialogue],
    base: &DreConfig,
    sets: &[BTreeSet<String>],
    seeds: &[u64],
) -> Result<AblationTable> {
    let mut rows = Vec::new();
    for set in sets {
        let (mut dev_f1, mut test_f1) = (Vec::new(), Vec::new());
        for &seed in seeds {
            let cfg = DreConfig {
                strip: set.clone(),
                seed,
                ..base.clone()
            };
            let (m, _) = train_dre(train, dev, &cfg)?;
            let prep = |ds: &[Dialogue]| {
                let mut v = ds.to_vec();
                if cfg.chain_source == crate::dre::ChainSource::None {
                    v.iter_mut().for_each(|d| d.chains.clear());
                }
                v
            };
            let (dv, tv) = (prep(dev), prep(test));
            dev_f1.push(score(&m.predict_all(&dv)?, &dv, &m.inventory)?.f1);
            test_f1.push(score(&m.predict_all(&tv)?, &tv, &m.inventory)?.f1);
        }
        let (dev_mean, dev_std) = mean_std(&dev_f1);
        let (test_mean, test_std) = mean_std(&test_f1);
        rows.push(AblationRow {
            strip: set.iter().cloned().collect(),
            seeds: seeds.to_vec(),
            dev_f1,
            test_f1,
            dev_mean,
            dev_std,
            test_mean,
            test_std,
        });
    }
    Ok(AblationTable {
        recipe: base.recipe.name().into(),
        rows,
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A horizontal bar chart of values in [0, 1] as a standalone SVG document.
pub fn bar_chart_svg(title: &str, bars: &[(String, f64)]) -> String {
    let (label_w, bar_w, row_h, top) = (240.0, 400.0, 22.0, 40.0);
    let height = top + row_h * bars.len() as f64 + 20.0;
    let width = label_w + bar_w + 80.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<text x="10" y="24" font-size="15">{}</text>"#, escape(title));
    for (i, (label, v)) in bars.iter().enumerate() {
        let y = top + row_h * i as f64;
        let w = bar_w * v.clamp(0.0, 1.0);
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            label_w - 6.0,
            y + 14.0,
            escape(label)
        );
        let _ = writeln!(
            s,
            r##"<rect x="{label_w}" y="{:.1}" width="{w:.1}" height="{:.1}" fill="#4c72b0"/>"##,
            y + 3.0,
            row_h - 6.0
        );
        let _ = writeln!(s, r#"<text x="{:.1}" y="{:.1}">{v:.3}</text>"#, label_w + w + 6.0, y + 14.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Per-relation F1 bars, in inventory order, for relations with support.
pub fn relation_chart(report: &F1Report, inv: &RelationInventory) -> String {
    let bars: Vec<(String, f64)> = inv
        .labels()
        .iter()
        .filter_map(|l| report.per_relation.get(l).filter(|c| c.gold > 0).map(|c| (l.clone(), c.f1())))
        .collect();
    bar_chart_svg("F1 by relation", &bars)
}

pub fn speaker_chart(report: &SliceReport) -> String {
    let bars: Vec<(String, f64)> = SPEAKER_BUCKETS
        .iter()
        .map(|b| (format!("{b} speakers"), report.slices.get(*b).map_or(0.0, |r| r.f1)))
        .collect();
    bar_chart_svg("F1 by number of speakers", &bars)
}
