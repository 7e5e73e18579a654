//! Intent classification, entity extraction and the speech-recognition noise model.

mod gazetteer;
mod model;
mod noise;

use serde::{Deserialize, Serialize};

pub use gazetteer::{EntityKind, Gazetteer, GazetteerFile};
pub use model::{accuracy, example_correct, split_clauses, CorpusExample, NluError, NluModel};
pub use noise::{corrupt_transcript, ConfusionTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Intent {
    Greet,
    ObjectGoal,
    LocationGoal,
    Affirm,
    Deny,
    Describe,
    Ask,
    Pause,
    Resume,
    Accelerate,
    Decelerate,
    Unknown,
}

impl Intent {
    pub const ALL: [Intent; 12] = [
        Intent::Greet,
        Intent::ObjectGoal,
        Intent::LocationGoal,
        Intent::Affirm,
        Intent::Deny,
        Intent::Describe,
        Intent::Ask,
        Intent::Pause,
        Intent::Resume,
        Intent::Accelerate,
        Intent::Decelerate,
        Intent::Unknown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_goal(self) -> bool {
        matches!(self, Intent::ObjectGoal | Intent::LocationGoal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Entities {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default)]
    pub attributes: Vec<String>,
}

impl Entities {
    pub fn is_empty(&self) -> bool {
        self.object.is_none() && self.location.is_none() && self.attributes.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentResult {
    /// Non-empty, confidence non-increasing; `Unknown` only appears alone.
    pub intents: Vec<(Intent, f64)>,
    pub entities: Entities,
    pub raw_text: String,
}

impl IntentResult {
    pub fn top(&self) -> Intent {
        self.intents[0].0
    }

    pub fn has(&self, i: Intent) -> bool {
        self.intents.iter().any(|&(j, _)| j == i)
    }

    pub fn intent_set(&self) -> Vec<Intent> {
        let mut v: Vec<Intent> = self.intents.iter().map(|x| x.0).collect();
        v.sort();
        v
    }
}

/// Lowercase, drop apostrophes, turn other punctuation into spaces, split on whitespace.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|&c| c != '\'' && c != '’')
        .map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    cleaned.split_whitespace().map(str::to_owned).collect()
}
