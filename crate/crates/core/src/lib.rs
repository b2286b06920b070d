//! Coreference-enhanced dialogue relation extraction.

pub mod autodiff;
pub mod config;
pub mod coref;
pub mod dialogue;
pub mod dre;
pub mod error;
pub mod eval;
pub mod fixtures;
pub mod graph;
pub mod io;
pub mod lexicon;
pub mod nn;
pub mod relations;
pub mod synth;
pub mod tokenize;
pub mod unionfind;

pub use dialogue::{
    mentions_of_argument, validate_dialogue, ArgumentPair, ChainType, CoreferenceChain, Dialogue, Mention, Utterance,
    ValidationReport,
};
pub use error::{Error, Result};
pub use relations::RelationInventory;
