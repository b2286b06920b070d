//! Python bindings: corpus loading, validation, graph construction, the
//! coreference resolver and the relation model.
//!
//! Structured results (chains, graphs, reports) cross the boundary as plain
//! dicts and lists built from their JSON form.

use std::path::PathBuf;

use corefdre::coref::{train_resolver, CorefConfig, Resolver};
use corefdre::dialogue::{validate_with, ArgumentPair};
use corefdre::dre::{self, apply_chain_source, ChainSource, DreConfig};
use corefdre::graph::{self, EdgeKind, Recipe};
use corefdre::io::{self, FieldMap};
use corefdre::{eval, synth, Error, RelationInventory};
use pyo3::exceptions::{PyIOError, PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Validation(ref r) => {
            let lines: Vec<String> = r.violations.iter().map(|v| v.to_string()).collect();
            PyValueError::new_err(format!("{e}\n{}", lines.join("\n")))
        }
        Error::Parse { .. } | Error::Schema { .. } | Error::Config(_) | Error::UnknownKind { .. } | Error::AmbiguousHead { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Accepts recipe and chain-source names in any case in a config dict.
fn dre_config(config: Option<&Bound<'_, PyDict>>, seed: Option<u64>) -> PyResult<DreConfig> {
    let mut cfg: DreConfig = match config {
        None => DreConfig::default(),
        Some(d) => {
            let d = d.copy()?;
            if let Some(r) = d.get_item("recipe")? {
                let name: String = r.extract()?;
                let recipe = Recipe::parse(&name).ok_or_else(|| PyValueError::new_err(format!("unknown recipe {name:?}")))?;
                d.set_item("recipe", recipe.name())?;
            }
            if let Some(c) = d.get_item("chain_source")? {
                let name: String = c.extract()?;
                d.set_item("chain_source", name.to_ascii_lowercase())?;
            }
            from_py(d.as_any())?
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.strip_kinds().map_err(py_err)?;
    Ok(cfg)
}

/// One dialogue with its chains and argument pairs.
#[pyclass(name = "Dialogue", module = "pycorefdre", skip_from_py_object)]
#[derive(Clone)]
pub struct PyDialogue {
    pub inner: corefdre::Dialogue,
}

#[pymethods]
impl PyDialogue {
    /// Builds a dialogue from `(speaker, text)` turns; text is whitespace tokenized.
    #[staticmethod]
    fn from_turns(id: &str, turns: Vec<(String, String)>) -> Self {
        let refs: Vec<(&str, &str)> = turns.iter().map(|(s, t)| (s.as_str(), t.as_str())).collect();
        Self {
            inner: corefdre::Dialogue::from_turns(id, &refs),
        }
    }

    /// Parses the JSON produced by `to_json`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn speakers(&self) -> Vec<String> {
        self.inner.speakers().into_iter().map(String::from).collect()
    }

    #[getter]
    fn turns(&self) -> Vec<(String, Vec<String>)> {
        self.inner.utterances.iter().map(|u| (u.speaker_id.clone(), u.tokens.clone())).collect()
    }

    #[getter]
    fn chains<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.chains)
    }

    #[getter]
    fn pairs<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.pairs)
    }

    fn token_count(&self) -> usize {
        self.inner.token_count()
    }

    /// Adds an argument pair with its gold labels.
    #[pyo3(signature = (subject, object, relations))]
    fn add_pair(&mut self, subject: &str, object: &str, relations: Vec<String>) {
        let rels: Vec<&str> = relations.iter().map(String::as_str).collect();
        self.inner.pairs.push(ArgumentPair::new(subject, object, &rels));
    }

    /// Replaces chains from a list of `{"type", "head", "mentions": [[u, s, e], ...]}` dicts.
    fn set_chains(&mut self, chains: &Bound<'_, PyList>) -> PyResult<()> {
        let mut out = Vec::new();
        for c in chains.iter() {
            let kind: String = c.get_item("type")?.extract()?;
            let head: String = c.get_item("head")?.extract()?;
            let spans: Vec<Vec<usize>> = c.get_item("mentions")?.extract()?;
            let mentions = spans
                .iter()
                .map(|span| {
                    let &[u, s, e] = span.as_slice() else {
                        return Err(PyValueError::new_err(format!("mention {span:?} is not [utterance, start, end]")));
                    };
                    self.inner
                        .mention(u, s, e)
                        .ok_or_else(|| PyIndexError::new_err(format!("span ({u}, {s}, {e}) is out of range")))
                })
                .collect::<PyResult<_>>()?;
            out.push(corefdre::CoreferenceChain {
                chain_type: corefdre::ChainType::parse(&kind).ok_or_else(|| PyValueError::new_err(format!("unknown chain type {kind:?}")))?,
                head,
                mentions,
            });
        }
        self.inner.chains = out;
        Ok(())
    }

    /// Rule violations against the built-in relation inventory, as strings.
    fn validate(&self) -> Vec<String> {
        validate_with(&self.inner, &RelationInventory::default())
            .violations
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    fn to_json(&self) -> String {
        serde_json::to_string(&self.inner).expect("dialogue serializes")
    }

    fn __len__(&self) -> usize {
        self.inner.utterances.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Dialogue(id={:?}, turns={}, chains={}, pairs={})",
            self.inner.id,
            self.inner.utterances.len(),
            self.inner.chains.len(),
            self.inner.pairs.len()
        )
    }
}

fn unwrap_all(ds: &[PyRef<'_, PyDialogue>]) -> Vec<corefdre::Dialogue> {
    ds.iter().map(|d| d.inner.clone()).collect()
}

fn wrap_all(ds: Vec<corefdre::Dialogue>) -> Vec<PyDialogue> {
    ds.into_iter().map(|inner| PyDialogue { inner }).collect()
}

/// Loads and validates a corpus file, with an optional chain sidecar and field map.
#[pyfunction]
#[pyo3(signature = (path, sidecar=None, fields=None, validate=true))]
fn load_corpus(path: PathBuf, sidecar: Option<PathBuf>, fields: Option<&str>, validate: bool) -> PyResult<Vec<PyDialogue>> {
    let fm = match fields {
        Some(t) => FieldMap::parse(t).map_err(py_err)?,
        None => FieldMap::default(),
    };
    let ds = if validate {
        io::load_corpus(&path, sidecar.as_deref(), &fm, &RelationInventory::default())
    } else {
        io::load_corpus_unvalidated(&path, sidecar.as_deref(), &fm)
    }
    .map_err(py_err)?;
    Ok(wrap_all(ds))
}

#[pyfunction]
#[pyo3(signature = (path, dialogues, sidecar=None))]
fn write_corpus(path: PathBuf, dialogues: Vec<PyRef<'_, PyDialogue>>, sidecar: Option<PathBuf>) -> PyResult<()> {
    let ds = unwrap_all(&dialogues);
    io::write_corpus(&path, &ds).map_err(py_err)?;
    if let Some(p) = sidecar {
        io::write_sidecar(&p, &ds).map_err(py_err)?;
    }
    Ok(())
}

/// Statistics per named split plus totals.
#[pyfunction]
fn corpus_stats<'py>(py: Python<'py>, splits: Vec<(String, Vec<PyRef<'py, PyDialogue>>)>) -> PyResult<Bound<'py, PyAny>> {
    let owned: Vec<(String, Vec<corefdre::Dialogue>)> = splits.iter().map(|(n, ds)| (n.clone(), unwrap_all(ds))).collect();
    let refs: Vec<(&str, &[corefdre::Dialogue])> = owned.iter().map(|(n, ds)| (n.as_str(), ds.as_slice())).collect();
    py.import("json")?.call_method1("loads", (eval::stats(&refs).to_json(),))
}

/// Graph(s) of one argument pair; GAIN returns the mention and entity graphs.
#[pyfunction]
#[pyo3(signature = (dialogue, pair=0, recipe="tucore", strip=None))]
fn build_graph<'py>(
    py: Python<'py>,
    dialogue: PyRef<'py, PyDialogue>,
    pair: usize,
    recipe: &str,
    strip: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let d = &dialogue.inner;
    let p = d
        .pairs
        .get(pair)
        .ok_or_else(|| PyIndexError::new_err(format!("{} has {} pairs", d.id, d.pairs.len())))?;
    let mut cfg = DreConfig {
        recipe: Recipe::parse(recipe).ok_or_else(|| PyValueError::new_err(format!("unknown recipe {recipe:?}")))?,
        ..DreConfig::default()
    };
    if let Some(s) = strip {
        cfg.strip = EdgeKind::parse_set(&s.join(",")).map_err(py_err)?.into_iter().map(|k| k.code().to_string()).collect();
    }
    let kinds = cfg.strip_kinds().map_err(py_err)?;
    let graphs = graph::build(cfg.recipe, d, p, None)
        .and_then(|gs| {
            gs.iter()
                .map(|g| {
                    let own = kinds.iter().copied().filter(|k| g.recipe.declared_kinds().contains(k)).collect();
                    graph::strip_edges(g, &own)
                })
                .collect::<corefdre::Result<Vec<_>>>()
        })
        .map_err(py_err)?;
    to_py(py, &graphs)
}

/// Span-ranking coreference resolver.
#[pyclass(name = "CorefResolver", module = "pycorefdre")]
pub struct PyResolver {
    inner: Resolver,
    losses: Vec<f64>,
}

#[pymethods]
impl PyResolver {
    /// Trains on the gold chains of `dialogues`. `config` keys follow the
    /// `[coref]` table of a run configuration.
    #[staticmethod]
    #[pyo3(signature = (dialogues, config=None, seed=None))]
    fn train(py: Python<'_>, dialogues: Vec<PyRef<'_, PyDialogue>>, config: Option<&Bound<'_, PyDict>>, seed: Option<u64>) -> PyResult<Self> {
        let mut cfg: CorefConfig = match config {
            Some(d) => from_py(d.as_any())?,
            None => CorefConfig::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        let ds = unwrap_all(&dialogues);
        let (inner, log) = py.detach(|| train_resolver(&ds, &cfg)).map_err(py_err)?;
        Ok(Self {
            inner,
            losses: log.iter().map(|e| e.loss).collect(),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Resolver::load(&path).map_err(py_err)?,
            losses: Vec::new(),
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(py_err)
    }

    /// Mean training loss per epoch (empty for a loaded checkpoint).
    #[getter]
    fn losses(&self) -> Vec<f64> {
        self.losses.clone()
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    /// Predicted chains of one dialogue, as dicts.
    fn predict<'py>(&self, py: Python<'py>, dialogue: PyRef<'py, PyDialogue>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.predict_chains(&dialogue.inner))
    }

    /// A copy of `dialogue` with its chains replaced by predicted ones.
    fn resolve(&self, dialogue: PyRef<'_, PyDialogue>) -> PyDialogue {
        let mut inner = dialogue.inner.clone();
        inner.chains = self.inner.predict_chains(&inner);
        PyDialogue { inner }
    }
}

/// Graph-based dialogue relation classifier.
#[pyclass(name = "RelationModel", module = "pycorefdre")]
pub struct PyRelationModel {
    inner: dre::DreModel,
    log: Vec<dre::DreEpoch>,
}

impl PyRelationModel {
    /// Applies the model's chain source; predicted chains need `resolver`.
    fn prepare(&self, ds: &[PyRef<'_, PyDialogue>], resolver: Option<PyRef<'_, PyResolver>>) -> PyResult<Vec<corefdre::Dialogue>> {
        let mut v = unwrap_all(ds);
        let source = self.inner.config.chain_source;
        let r = resolver.as_ref().map(|r| &r.inner);
        // external chains are whatever the caller attached already
        let source = if source == ChainSource::External { ChainSource::Gold } else { source };
        apply_chain_source(&mut v, source, r, None).map_err(py_err)?;
        Ok(v)
    }
}

#[pymethods]
impl PyRelationModel {
    /// Trains on `train`, keeping the best dev epoch. `config` keys follow
    /// the `[dre]` table of a run configuration. With `chain_source =
    /// "predicted"` a resolver must be given.
    #[staticmethod]
    #[pyo3(signature = (train, dev, config=None, seed=None, resolver=None))]
    fn train(
        py: Python<'_>,
        train: Vec<PyRef<'_, PyDialogue>>,
        dev: Vec<PyRef<'_, PyDialogue>>,
        config: Option<&Bound<'_, PyDict>>,
        seed: Option<u64>,
        resolver: Option<PyRef<'_, PyResolver>>,
    ) -> PyResult<Self> {
        let cfg = dre_config(config, seed)?;
        let source = if cfg.chain_source == ChainSource::External { ChainSource::Gold } else { cfg.chain_source };
        let r = resolver.as_ref().map(|r| &r.inner);
        let (mut tr, mut dv) = (unwrap_all(&train), unwrap_all(&dev));
        apply_chain_source(&mut tr, source, r, None).map_err(py_err)?;
        apply_chain_source(&mut dv, source, r, None).map_err(py_err)?;
        let (inner, log) = py.detach(|| dre::train_dre(&tr, &dv, &cfg)).map_err(py_err)?;
        Ok(Self { inner, log })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (inner, log) = dre::DreModel::load(&path).map_err(py_err)?;
        Ok(Self { inner, log })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path, &self.log).map_err(py_err)
    }

    #[getter]
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    #[getter]
    fn config<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.config)
    }

    /// Per-epoch loss and dev scores.
    #[getter]
    fn history<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.log)
    }

    /// One dict per argument pair: dialogue id, pair index, probabilities, labels.
    #[pyo3(signature = (dialogues, resolver=None))]
    fn predict<'py>(
        &self,
        py: Python<'py>,
        dialogues: Vec<PyRef<'py, PyDialogue>>,
        resolver: Option<PyRef<'py, PyResolver>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let ds = self.prepare(&dialogues, resolver)?;
        let preds = py.detach(|| self.inner.predict_all(&ds)).map_err(py_err)?;
        to_py(py, &preds)
    }

    /// Micro-averaged scores with per-relation counts and the
    /// intra/inter-utterance and speaker-count slices.
    #[pyo3(signature = (dialogues, resolver=None))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        dialogues: Vec<PyRef<'py, PyDialogue>>,
        resolver: Option<PyRef<'py, PyResolver>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let ds = self.prepare(&dialogues, resolver)?;
        let inv = &self.inner.inventory;
        let preds = py.detach(|| self.inner.predict_all(&ds)).map_err(py_err)?;
        let overall = eval::score(&preds, &ds, inv).map_err(py_err)?;
        let slices = eval::slice_inter_intra(&ds, &preds, inv, eval::SliceMode::ChainAware).map_err(py_err)?;
        let speakers = eval::slice_speakers(&ds, &preds, inv).map_err(py_err)?;
        to_py(
            py,
            &serde_json::json!({ "overall": overall, "inter_intra": slices, "speakers": speakers }),
        )
    }
}

/// Dialogues about one man and one woman whose pronouns resolve by gender.
#[pyfunction]
fn planted_coref_corpus(n: usize, seed: u64) -> Vec<PyDialogue> {
    wrap_all(synth::planted_coref_corpus(n, seed))
}

/// Dialogues whose relations are stated only through pronouns.
#[pyfunction]
fn planted_relation_corpus(n: usize, seed: u64) -> Vec<PyDialogue> {
    wrap_all(synth::planted_relation_corpus(n, seed))
}

/// The built-in relation labels in corpus id order.
#[pyfunction]
fn relation_labels() -> Vec<String> {
    RelationInventory::default().labels().to_vec()
}

#[pymodule]
fn pycorefdre(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDialogue>()?;
    m.add_class::<PyResolver>()?;
    m.add_class::<PyRelationModel>()?;
    m.add_function(wrap_pyfunction!(load_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(write_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_stats, m)?)?;
    m.add_function(wrap_pyfunction!(build_graph, m)?)?;
    m.add_function(wrap_pyfunction!(planted_coref_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(planted_relation_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(relation_labels, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
