//! Run configuration files and their fingerprints.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coref::CorefConfig;
use crate::dre::DreConfig;
use crate::error::{Error, Result};

/// Stable hash of a value's canonical JSON form (object keys sorted).
pub fn fingerprint<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("config serializes");
    // serde_json's map is ordered by key, so this rendering is canonical
    let text = serde_json::to_string(&v).expect("value serializes");
    let digest = Sha256::digest(text.as_bytes());
    hex::encode(&digest[..8])
}

/// Everything a CLI run needs. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data_dir: Option<PathBuf>,
    pub train_split: String,
    pub dev_split: String,
    pub test_split: String,
    /// Directory of `{split}.json` chain sidecars, when chains are separate.
    pub sidecar_dir: Option<PathBuf>,
    /// Key renames for released sidecars (`canonical = "file_key"`).
    pub sidecar_fields: std::collections::BTreeMap<String, String>,
    pub out: PathBuf,
    pub seed: u64,
    pub dre: DreConfig,
    pub coref: CorefConfig,
    pub ablation: AblationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data_dir: None,
            train_split: "train".into(),
            dev_split: "dev".into(),
            test_split: "test".into(),
            sidecar_dir: None,
            sidecar_fields: Default::default(),
            out: PathBuf::from("out"),
            seed: 13,
            dre: DreConfig::default(),
            coref: CorefConfig::default(),
            ablation: AblationConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    /// Edge-kind sets to strip, one run per set; `[]` is the full graph.
    pub sets: Vec<BTreeSet<String>>,
    pub seeds: Vec<u64>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        let set = |ks: &[&str]| ks.iter().map(|k| k.to_string()).collect();
        Self {
            sets: vec![set(&[]), set(&["CC"]), set(&["MU"]), set(&["CC", "MU"])],
            seeds: vec![1, 2, 3, 4, 5],
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&crate::io::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fingerprint of the configuration. The seed is part of it; the output
    /// directory is not, so a run repeated elsewhere writes identical bytes.
    pub fn fingerprint(&self) -> String {
        fingerprint(&Self {
            out: PathBuf::new(),
            ..self.clone()
        })
    }

    pub fn split_path(&self, split: &str) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join(format!("{split}.json")))
    }

    pub fn sidecar_path(&self, split: &str) -> Option<PathBuf> {
        self.sidecar_dir.as_ref().map(|d| d.join(format!("{split}.json")))
    }

    /// Copies the run seed into every component so one number controls all
    /// randomness.
    pub fn seeded(mut self) -> Self {
        self.dre.seed = self.seed;
        self.coref.seed = self.seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::parse("seed = 3\n").is_ok());
        assert!(matches!(RunConfig::parse("sed = 3\n"), Err(Error::Config(_))));
        assert!(RunConfig::parse("[dre]\nlearning_rate = 0.1\n").is_err());
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.seed += 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
        let round = RunConfig::parse(&a.to_toml()).unwrap();
        assert_eq!(round.fingerprint(), a.fingerprint());
        let elsewhere = RunConfig {
            out: PathBuf::from("/tmp/other"),
            ..a.clone()
        };
        assert_eq!(elsewhere.fingerprint(), a.fingerprint());
    }

    #[test]
    fn one_seed_reaches_every_component() {
        let c = RunConfig::parse("seed = 99\n[dre]\nseed = 1\n").unwrap().seeded();
        assert_eq!((c.dre.seed, c.coref.seed), (99, 99));
    }
}
