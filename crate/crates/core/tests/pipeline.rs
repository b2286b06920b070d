use std::path::{Path, PathBuf};

use corefdre::coref::{train_resolver, CorefConfig};
use corefdre::dre::{apply_chain_source, train_dre, ChainSource, DreConfig};
use corefdre::graph::Recipe;
use corefdre::io::{self, FieldMap};
use corefdre::{eval, synth, Dialogue, RelationInventory};

fn fixture(f: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/fixture_corpus").join(f)
}

fn load(split: &str) -> Vec<Dialogue> {
    let sidecar = fixture(&format!("chains/{split}.json"));
    io::load_corpus(&fixture(&format!("{split}.json")), Some(&sidecar), &FieldMap::default(), &RelationInventory::default()).unwrap()
}

#[test]
fn fixture_round_trips_through_corpus_and_sidecar_files() {
    let dir = tempfile::tempdir().unwrap();
    for split in ["train", "dev", "test"] {
        let ds = load(split);
        let (c, s) = (dir.path().join(format!("{split}.json")), dir.path().join(format!("{split}.chains.json")));
        io::write_corpus(&c, &ds).unwrap();
        io::write_sidecar(&s, &ds).unwrap();
        let back = io::load_corpus(&c, Some(&s), &FieldMap::default(), &RelationInventory::default()).unwrap();
        assert_eq!(back, ds, "{split}");
    }
}

#[test]
fn renamed_sidecar_fields_load_through_a_field_map() {
    let text = io::read_to_string(&fixture("chains/dev.json")).unwrap();
    let renamed = text.replace("\"mentions\"", "\"spans\"").replace("\"head\"", "\"canonical\"");
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("dev.chains.json");
    std::fs::write(&p, renamed).unwrap();
    let inv = RelationInventory::default();
    assert!(io::load_corpus(&fixture("dev.json"), Some(&p), &FieldMap::default(), &inv).is_err());
    let fields = FieldMap::parse("mentions = spans\nhead = canonical\n").unwrap();
    assert_eq!(io::load_corpus(&fixture("dev.json"), Some(&p), &fields, &inv).unwrap(), load("dev"));
}

#[test]
fn conll_export_keeps_chains() {
    let ds = load("train");
    let docs = io::import_conll(&io::export_conll(&ds)).unwrap();
    assert_eq!(docs.len(), ds.len());
    for (doc, d) in docs.iter().zip(&ds) {
        let spans = |cs: &[corefdre::CoreferenceChain]| {
            let mut v: Vec<Vec<_>> = cs.iter().map(|c| c.mentions.iter().map(|m| m.span()).collect()).collect();
            v.sort();
            v
        };
        assert_eq!(spans(&doc.chains), spans(&d.chains));
    }
}

#[test]
fn predicted_chains_feed_the_relation_model() {
    let coref_cfg = CorefConfig {
        emb_dim: 16,
        hidden: 16,
        ffnn: 32,
        lr: 5e-3,
        epochs: 4,
        ..CorefConfig::default()
    };
    let (resolver, _) = train_resolver(&synth::planted_coref_corpus(40, 1), &coref_cfg).unwrap();
    let (mut train, mut dev, mut test) = synth::split3(synth::planted_relation_corpus(40, 3), 24, 8);
    for ds in [&mut train, &mut dev, &mut test] {
        apply_chain_source(ds, ChainSource::Predicted, Some(&resolver), None).unwrap();
    }
    let cfg = DreConfig {
        recipe: Recipe::Hgat,
        chain_source: ChainSource::Predicted,
        lr: Some(3e-3),
        epochs: 2,
        ..DreConfig::default()
    };
    let (model, log) = train_dre(&train, &dev, &cfg).unwrap();
    assert_eq!(log.len(), 2);
    let preds = model.predict_all(&test).unwrap();
    let report = eval::score(&preds, &test, &model.inventory).unwrap();
    assert_eq!(report.support, 16);
    assert!((0.0..=1.0).contains(&report.f1));
}
