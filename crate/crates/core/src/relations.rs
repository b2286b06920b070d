//! The closed relation inventory.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Label reserved for pairs without a relation. It is accepted on gold pairs
/// but is never a model output and is excluded from scoring.
pub const NO_RELATION: &str = "unanswerable";

pub const NUM_RELATIONS: usize = 36;

/// DialogRE relation types, in corpus `rid` order (rid = index + 1).
pub const DIALOGRE_LABELS: [&str; NUM_RELATIONS] = [
    "per:positive_impression",
    "per:negative_impression",
    "per:acquaintance",
    "per:alumni",
    "per:boss",
    "per:subordinate",
    "per:client",
    "per:dates",
    "per:friends",
    "per:girl/boyfriend",
    "per:neighbor",
    "per:roommate",
    "per:children",
    "per:other_family",
    "per:parents",
    "per:siblings",
    "per:spouse",
    "per:place_of_residence",
    "per:place_of_birth",
    "per:visited_place",
    "per:origin",
    "per:employee_or_member_of",
    "per:schools_attended",
    "per:works",
    "per:age",
    "per:date_of_birth",
    "per:major",
    "per:place_of_work",
    "per:title",
    "per:alternate_names",
    "per:pet",
    "gpe:residents_of_place",
    "gpe:births_in_place",
    "gpe:visitors_of_place",
    "org:employees_or_members",
    "org:students",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationInventory {
    labels: Vec<String>,
    no_relation: String,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Default for RelationInventory {
    fn default() -> Self {
        Self::new(DIALOGRE_LABELS.iter().map(|s| s.to_string()).collect(), NO_RELATION)
            .expect("built-in inventory is well formed")
    }
}

impl RelationInventory {
    pub fn new(labels: Vec<String>, no_relation: &str) -> Result<Self> {
        if labels.len() != NUM_RELATIONS {
            return Err(Error::Config(format!(
                "relation inventory must have {NUM_RELATIONS} labels, got {}",
                labels.len()
            )));
        }
        let mut index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if l == no_relation || index.insert(l.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate or reserved label {l:?}")));
            }
        }
        Ok(Self {
            labels,
            no_relation: no_relation.to_string(),
            index,
        })
    }

    /// One label per line; blank lines and `#` comments are skipped.
    pub fn from_lines(text: &str) -> Result<Self> {
        let labels = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
        Self::new(labels, NO_RELATION)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn no_relation(&self) -> &str {
        &self.no_relation
    }

    pub fn is_no_relation(&self, label: &str) -> bool {
        label == self.no_relation
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, idx: usize) -> &str {
        &self.labels[idx]
    }

    /// True for inventory labels and the no-relation label.
    pub fn accepts(&self, label: &str) -> bool {
        self.is_no_relation(label) || self.index.contains_key(label)
    }

    /// Multi-hot target vector; the no-relation label maps to all zeros.
    pub fn encode(&self, labels: &[String]) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        for l in labels {
            if let Some(i) = self.index_of(l) {
                v[i] = 1.0;
            }
        }
        v
    }
}
