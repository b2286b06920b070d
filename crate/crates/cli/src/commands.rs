use std::collections::BTreeSet;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use corefdre::config::RunConfig;
use corefdre::coref::{train_resolver_staged, Resolver};
use corefdre::dialogue::{head_alignment_notes, validate_with, HeadAlignmentNote, ValidationReport};
use corefdre::dre::{apply_chain_source, metric_log_lines, train_dre, ChainSource, DreConfig, DreModel};
use corefdre::eval::{self, SliceMode};
use corefdre::graph::{self, EdgeKind, Recipe};
use corefdre::io::{self, FieldMap, SidecarFile};
use corefdre::{Dialogue, Error, RelationInventory};
use serde_json::{json, Value};

use crate::{Cli, Command, DreFlags, Global};

pub struct Failure {
    pub code: u8,
    pub error: String,
}

impl Failure {
    fn config(msg: impl Display) -> Self {
        Self { code: 2, error: msg.to_string() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Validation(_) | Error::Parse { .. } | Error::Schema { .. } | Error::AmbiguousHead { .. } => 1,
            Error::Config(_) | Error::UnknownKind { .. } => 2,
            _ => 3,
        };
        let mut error = e.to_string();
        if let Error::Validation(report) = &e {
            for v in report.violations.iter().take(20) {
                error.push_str(&format!("\n  {v}"));
            }
        }
        Self { code, error }
    }
}

/// Stdout writes that tolerate a closed pipe (`corefdre stats | head`).
fn emit(s: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(s.as_bytes());
}

macro_rules! emit {
    ($($t:tt)*) => { emit(&format!($($t)*)) };
}

macro_rules! emitln {
    ($($t:tt)*) => { emit(&format!("{}\n", format!($($t)*))) };
}

type Out<T> = std::result::Result<T, Failure>;

/// Resolved run state: configuration after flag overrides, plus the
/// pieces every command needs.
struct Ctx {
    cfg: RunConfig,
    fields: FieldMap,
    inv: RelationInventory,
}

impl Ctx {
    fn new(g: &Global) -> Out<Self> {
        let mut cfg = match &g.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(d) = &g.data {
            cfg.data_dir = Some(d.clone());
        }
        if let Some(s) = &g.sidecars {
            cfg.sidecar_dir = Some(s.clone());
        } else if cfg.sidecar_dir.is_none() {
            cfg.sidecar_dir = cfg.data_dir.as_ref().map(|d| d.join("chains")).filter(|d| d.is_dir());
        }
        if let Some(o) = &g.out {
            cfg.out = o.clone();
        }
        if let Some(s) = g.seed {
            cfg.seed = s;
        }
        let fields = match &g.fields {
            Some(p) => FieldMap::parse(&io::read_to_string(p)?)?,
            None => FieldMap::new(cfg.sidecar_fields.clone())?,
        };
        Ok(Self {
            cfg: cfg.seeded(),
            fields,
            inv: RelationInventory::default(),
        })
    }

    fn fingerprint(&self) -> String {
        self.cfg.fingerprint()
    }

    fn corpus_path(&self, split: &str) -> Out<PathBuf> {
        self.cfg
            .split_path(split)
            .ok_or_else(|| Failure::config("no data directory: pass --data or set COREFDRE_DATA"))
    }

    fn sidecar(&self, split: &str) -> Option<PathBuf> {
        self.cfg.sidecar_path(split).filter(|p| p.is_file())
    }

    fn load(&self, split: &str) -> Out<Vec<Dialogue>> {
        let path = self.corpus_path(split)?;
        Ok(io::load_corpus(&path, self.sidecar(split).as_deref(), &self.fields, &self.inv)?)
    }

    fn splits(&self, asked: &[String]) -> Vec<String> {
        if asked.is_empty() {
            vec![self.cfg.train_split.clone(), self.cfg.dev_split.clone(), self.cfg.test_split.clone()]
        } else {
            asked.to_vec()
        }
    }

    fn out_path(&self, dir: &str, file: &str) -> PathBuf {
        self.cfg.out.join(dir).join(file)
    }

    fn write(&self, dir: &str, file: &str, contents: &str) -> Out<PathBuf> {
        let path = self.out_path(dir, file);
        io::write_atomic(&path, contents.as_bytes())?;
        Ok(path)
    }

    fn apply_dre_flags(&mut self, f: &DreFlags) -> Out<()> {
        let d = &mut self.cfg.dre;
        if let Some(r) = &f.recipe {
            d.recipe = Recipe::parse(r).ok_or_else(|| Failure::config(format!("unknown recipe {r:?}")))?;
        }
        if let Some(c) = &f.chain_source {
            d.chain_source = ChainSource::parse(c).ok_or_else(|| Failure::config(format!("unknown chain source {c:?}")))?;
        }
        if let Some(s) = &f.strip {
            d.strip = EdgeKind::parse_set(s)?.into_iter().map(|k| k.code().to_string()).collect();
        }
        if let Some(e) = f.epochs {
            d.epochs = e;
        }
        if f.lr.is_some() {
            d.lr = f.lr;
        }
        if let Some(t) = f.tau {
            d.tau = t;
        }
        // fail early on kinds the recipe does not declare
        d.strip_kinds()?;
        Ok(())
    }

    /// Replaces the chains of `ds` according to `source`.
    fn chains(&self, ds: &mut [Dialogue], split: &str, source: ChainSource, coref: Option<&Path>, external: Option<&Path>) -> Out<()> {
        let resolver = match source {
            ChainSource::Predicted => {
                let p = coref.map(Path::to_path_buf).unwrap_or_else(|| self.out_path("checkpoints", "coref.json"));
                Some(Resolver::load(&p)?)
            }
            _ => None,
        };
        let sidecar: Option<SidecarFile> = match source {
            ChainSource::External => {
                let dir = external.map(Path::to_path_buf).unwrap_or_else(|| self.cfg.out.join("sidecars"));
                let p = dir.join(format!("{split}.json"));
                Some(io::parse_sidecar(&io::read_to_string(&p)?, &self.fields, &p.display().to_string())?)
            }
            _ => None,
        };
        apply_chain_source(ds, source, resolver.as_ref(), sidecar)?;
        Ok(())
    }
}

fn stamped(fingerprint: &str, mut v: Value) -> String {
    if let Value::Object(m) = &mut v {
        m.insert("fingerprint".into(), Value::String(fingerprint.into()));
    }
    let mut s = serde_json::to_string_pretty(&v).expect("json renders");
    s.push('\n');
    s
}

pub fn run(cli: Cli) -> Out<ExitCode> {
    let mut ctx = Ctx::new(&cli.global)?;
    match cli.command {
        Command::Validate { splits, file, sidecar, json } => validate(&ctx, &splits, file, sidecar, json),
        Command::Stats { splits, json } => stats(&ctx, &splits, json),
        Command::BuildGraph { split, dialogue, pair, dre } => {
            ctx.apply_dre_flags(&dre)?;
            build_graph(&ctx, &split, &dialogue, pair, &dre)
        }
        Command::TrainCoref { regime, conll, epochs, lr } => {
            if let Some(e) = epochs {
                ctx.cfg.coref.epochs = e;
            }
            if let Some(l) = lr {
                ctx.cfg.coref.lr = l;
            }
            train_coref(&ctx, &regime, conll.as_deref())
        }
        Command::PredictCoref { checkpoint, splits } => predict_coref(&ctx, checkpoint, &splits),
        Command::TrainDre { dre } => {
            ctx.apply_dre_flags(&dre)?;
            train_dre_cmd(&ctx, &dre)
        }
        Command::EvalDre { checkpoint, split, coref_checkpoint, external } => {
            eval_dre(&ctx, checkpoint, &split, coref_checkpoint.as_deref(), external.as_deref())
        }
        Command::Ablate { dre, sets, seeds } => {
            ctx.apply_dre_flags(&dre)?;
            ablate(&mut ctx, &dre, sets.as_deref(), seeds.as_deref())
        }
    }
}

fn validate(ctx: &Ctx, splits: &[String], file: Option<PathBuf>, sidecar: Option<PathBuf>, json: bool) -> Out<ExitCode> {
    let targets: Vec<(String, PathBuf, Option<PathBuf>)> = match file {
        Some(f) => vec![(f.display().to_string(), f, sidecar)],
        None => ctx
            .splits(splits)
            .into_iter()
            .map(|s| Ok((s.clone(), ctx.corpus_path(&s)?, ctx.sidecar(&s))))
            .collect::<Out<_>>()?,
    };
    let mut all = ValidationReport::default();
    let mut notes: Vec<HeadAlignmentNote> = Vec::new();
    for (name, path, sc) in &targets {
        let ds = io::load_corpus_unvalidated(path, sc.as_deref(), &ctx.fields)?;
        let mut report = ValidationReport::default();
        ds.iter().for_each(|d| report.extend(validate_with(d, &ctx.inv)));
        // heads that occur in the text without being listed as mentions: not errors
        let own: Vec<HeadAlignmentNote> = ds.iter().flat_map(head_alignment_notes).collect();
        if !json {
            emitln!("{name}: {} dialogues, {} violations, {} head notes", ds.len(), report.violations.len(), own.len());
            report.violations.iter().for_each(|v| emitln!("  {v}"));
            for n in &own {
                let at: Vec<String> = n.occurrences.iter().map(|m| format!("{}:{}-{}", m.utterance_index, m.token_start, m.token_end)).collect();
                emitln!("  note: {} chain={} head {:?} also occurs unlisted at {}", n.dialogue_id, n.chain_index, n.head, at.join(", "));
            }
        }
        all.extend(report);
        notes.extend(own);
    }
    if json {
        let v = json!({ "violations": all.violations, "head_alignment": notes });
        emitln!("{}", serde_json::to_string_pretty(&v).expect("report serializes"));
    }
    Ok(if all.is_valid() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn stats(ctx: &Ctx, splits: &[String], json: bool) -> Out<ExitCode> {
    let names = ctx.splits(splits);
    let data: Vec<Vec<Dialogue>> = names.iter().map(|s| ctx.load(s)).collect::<Out<_>>()?;
    let pairs: Vec<(&str, &[Dialogue])> = names.iter().map(String::as_str).zip(data.iter().map(Vec::as_slice)).collect();
    let st = eval::stats(&pairs);
    let j = st.to_json();
    let v: Value = serde_json::from_str(&j).expect("stats json parses");
    ctx.write("reports", "stats.json", &stamped(&ctx.fingerprint(), v))?;
    if json {
        emit!("{j}");
    } else {
        emit!("{}", st.to_table());
    }
    Ok(ExitCode::SUCCESS)
}

fn build_graph(ctx: &Ctx, split: &str, id: &str, pair: usize, f: &DreFlags) -> Out<ExitCode> {
    let mut ds = ctx.load(split)?;
    let cfg = &ctx.cfg.dre;
    ctx.chains(&mut ds, split, cfg.chain_source, f.coref_checkpoint.as_deref(), f.external.as_deref())?;
    let d = ds
        .iter()
        .find(|d| d.id == id)
        .ok_or_else(|| Failure::config(format!("no dialogue {id:?} in split {split}")))?;
    let p = d
        .pairs
        .get(pair)
        .ok_or_else(|| Failure::config(format!("{id} has {} pairs, asked for {pair}", d.pairs.len())))?;
    let strip = cfg.strip_kinds()?;
    let graphs = graph::build(cfg.recipe, d, p, None)?
        .into_iter()
        .map(|g| {
            let own: BTreeSet<EdgeKind> = strip.iter().copied().filter(|k| g.recipe.declared_kinds().contains(k)).collect();
            graph::strip_edges(&g, &own)
        })
        .collect::<corefdre::Result<Vec<_>>>()?;
    for g in &graphs {
        for w in &g.warnings {
            eprintln!("warning: {}", serde_json::to_string(w).expect("warning serializes"));
        }
    }
    let dump = stamped(
        &ctx.fingerprint(),
        json!({
            "dialogue": id,
            "pair": pair,
            "recipe": cfg.recipe.name(),
            "chain_source": cfg.chain_source,
            "strip": cfg.strip,
            "graphs": graphs,
        }),
    );
    let path = ctx.write("graphs", &format!("{id}-{pair}-{}.json", cfg.recipe.name().to_ascii_lowercase()), &dump)?;
    emit!("{dump}");
    eprintln!("wrote {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn train_coref(ctx: &Ctx, regime: &str, conll: Option<&Path>) -> Out<ExitCode> {
    let load_conll = || -> Out<Vec<Dialogue>> {
        let p = conll.ok_or_else(|| Failure::config(format!("regime {regime} needs --conll")))?;
        let docs = io::import_conll(&io::read_to_string(p)?)?;
        Ok(docs.into_iter().map(|d| d.into_dialogue()).collect())
    };
    let stages: Vec<Vec<Dialogue>> = match regime {
        "dialogre" => vec![ctx.load(&ctx.cfg.train_split)?],
        "conll" => vec![load_conll()?],
        "sequential" => vec![load_conll()?, ctx.load(&ctx.cfg.train_split)?],
        other => return Err(Failure::config(format!("unknown regime {other:?} (dialogre, conll, sequential)"))),
    };
    let refs: Vec<&[Dialogue]> = stages.iter().map(Vec::as_slice).collect();
    let (r, log) = train_resolver_staged(&refs, &ctx.cfg.coref)?;
    let ckpt = ctx.out_path("checkpoints", "coref.json");
    r.save(&ckpt)?;
    let fp = ctx.fingerprint();
    let lines: String = log
        .iter()
        .map(|e| format!("{}\n", json!({"epoch": e.epoch, "loss": e.loss, "regime": regime, "fingerprint": fp})))
        .collect();
    ctx.write("reports", "coref-loss.jsonl", &lines)?;
    if let Some(last) = log.last() {
        emitln!("epoch {}: loss {:.4}", last.epoch, last.loss);
    }
    emitln!("wrote {}", ckpt.display());
    Ok(ExitCode::SUCCESS)
}

fn predict_coref(ctx: &Ctx, checkpoint: Option<PathBuf>, splits: &[String]) -> Out<ExitCode> {
    let ckpt = checkpoint.unwrap_or_else(|| ctx.out_path("checkpoints", "coref.json"));
    let r = Resolver::load(&ckpt)?;
    let names = ctx.splits(splits);
    for s in &names {
        let ds = ctx.load(s)?;
        let entries: SidecarFile = ds.iter().map(|d| r.predict_sidecar(d)).collect();
        let chains: usize = entries.iter().map(|e| e.chains.len()).sum();
        let path = ctx.write("sidecars", &format!("{s}.json"), &io::sidecar_to_string(&entries))?;
        emitln!("{s}: {chains} chains over {} dialogues -> {}", ds.len(), path.display());
    }
    // sidecar files keep the plain interchange format; provenance lives beside them
    let manifest = json!({ "resolver": r.fingerprint(), "checkpoint": ckpt, "splits": names });
    ctx.write("sidecars", "manifest.json", &stamped(&ctx.fingerprint(), manifest))?;
    Ok(ExitCode::SUCCESS)
}

fn train_dre_cmd(ctx: &Ctx, f: &DreFlags) -> Out<ExitCode> {
    let cfg = &ctx.cfg;
    let source = cfg.dre.chain_source;
    let mut train = ctx.load(&cfg.train_split)?;
    let mut dev = ctx.load(&cfg.dev_split)?;
    ctx.chains(&mut train, &cfg.train_split, source, f.coref_checkpoint.as_deref(), f.external.as_deref())?;
    ctx.chains(&mut dev, &cfg.dev_split, source, f.coref_checkpoint.as_deref(), f.external.as_deref())?;
    let (model, log) = train_dre(&train, &dev, &cfg.dre)?;
    let ckpt = ctx.out_path("checkpoints", "dre.json");
    model.save(&ckpt, &log)?;
    ctx.write("reports", "dre-metrics.jsonl", &metric_log_lines(&ctx.fingerprint(), &log))?;
    for e in &log {
        emitln!("epoch {:>3}  loss {:.4}  dev F1 {:.4}", e.epoch, e.loss, e.dev_f1);
    }
    emitln!("wrote {}", ckpt.display());
    Ok(ExitCode::SUCCESS)
}

fn eval_dre(ctx: &Ctx, checkpoint: Option<PathBuf>, split: &str, coref: Option<&Path>, external: Option<&Path>) -> Out<ExitCode> {
    let ckpt = checkpoint.unwrap_or_else(|| ctx.out_path("checkpoints", "dre.json"));
    let (model, _) = DreModel::load(&ckpt)?;
    let mut ds = ctx.load(split)?;
    ctx.chains(&mut ds, split, model.config.chain_source, coref, external)?;
    let preds = model.predict_all(&ds)?;
    let inv = &model.inventory;
    let report = eval::score(&preds, &ds, inv)?;
    // both readings of inter/intra are reported; they disagree when chains move evidence
    let inter_intra = eval::slice_inter_intra(&ds, &preds, inv, SliceMode::ChainAware)?;
    let name_only = eval::slice_inter_intra(&ds, &preds, inv, SliceMode::NameOnly)?;
    let moved = ds
        .iter()
        .flat_map(|d| d.pairs.iter().map(move |p| (d, p)))
        .map(|(d, p)| Ok(eval::is_intra(d, p, SliceMode::ChainAware)? != eval::is_intra(d, p, SliceMode::NameOnly)?))
        .collect::<corefdre::Result<Vec<bool>>>()?
        .into_iter()
        .filter(|&b| b)
        .count();
    let speakers = eval::slice_speakers(&ds, &preds, inv)?;
    let fp = ctx.fingerprint();
    let v = json!({
        "split": split,
        "model": model.fingerprint(),
        "overall": report,
        "inter_intra": inter_intra,
        "inter_intra_name_only": name_only,
        "slice_disagreements": moved,
        "speakers": speakers,
    });
    ctx.write("reports", &format!("eval-{split}.json"), &stamped(&fp, v))?;
    ctx.write("reports", &format!("predictions-{split}.json"), &stamped(&fp, json!({ "predictions": preds })))?;
    ctx.write("reports", &format!("relations-{split}.svg"), &eval::relation_chart(&report, inv))?;
    ctx.write("reports", &format!("speakers-{split}.svg"), &eval::speaker_chart(&speakers))?;
    emit!("{}", report.to_table());
    emit("
");
    emitln!("inter/intra, chain-aware:");
    emit!("{}", inter_intra.to_table());
    emitln!("inter/intra, names only ({moved} pairs change slice):");
    emit!("{}", name_only.to_table());
    emit("
");
    emit!("{}", speakers.to_table());
    Ok(ExitCode::SUCCESS)
}

fn ablate(ctx: &mut Ctx, f: &DreFlags, sets: Option<&str>, seeds: Option<&str>) -> Out<ExitCode> {
    if let Some(s) = sets {
        ctx.cfg.ablation.sets = s
            .split(';')
            .map(|part| Ok(EdgeKind::parse_set(part)?.into_iter().map(|k| k.code().to_string()).collect()))
            .collect::<Out<_>>()?;
    }
    if let Some(s) = seeds {
        ctx.cfg.ablation.seeds = s
            .split(',')
            .map(|x| x.trim().parse::<u64>().map_err(|_| Failure::config(format!("bad seed {x:?}"))))
            .collect::<Out<_>>()?;
    }
    let cfg = &ctx.cfg;
    for set in &cfg.ablation.sets {
        DreConfig { strip: set.clone(), ..cfg.dre.clone() }.strip_kinds()?;
    }
    let source = cfg.dre.chain_source;
    let mut splits = Vec::new();
    for s in [&cfg.train_split, &cfg.dev_split, &cfg.test_split] {
        let mut ds = ctx.load(s)?;
        ctx.chains(&mut ds, s, source, f.coref_checkpoint.as_deref(), f.external.as_deref())?;
        splits.push(ds);
    }
    let table = eval::run_ablation(&splits[0], &splits[1], &splits[2], &cfg.dre, &cfg.ablation.sets, &cfg.ablation.seeds)?;
    let v = serde_json::to_value(&table).expect("table serializes");
    ctx.write("reports", "ablation.json", &stamped(&ctx.fingerprint(), v))?;
    ctx.write("reports", "ablation.txt", &table.to_table())?;
    emit!("{}", table.to_table());
    Ok(ExitCode::SUCCESS)
}
