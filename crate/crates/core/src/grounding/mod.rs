//! Landmark recognition: embedding similarity, the detector-count baseline, prompts and
//! disambiguation questions.

mod embedding;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::nlu::{tokenize, Entities};
use crate::world::Landmark;

pub use embedding::{
    lexicon_embed, ConceptLexicon, Embedding, EmbeddingProvider, FileProvider, LexiconProvider,
};

pub const DEFAULT_MARGIN: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GroundingError {
    #[error("request has no object to look for")]
    MissingObject,
    #[error("bad lexicon or embedding file: {0}")]
    Lexicon(String),
    #[error("embedding for {id:?} has dimension {got}, expected {want}")]
    Dimension { id: String, got: usize, want: usize },
    #[error("unknown recognition method {0:?} (expected clip or detector)")]
    UnknownMethod(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: String,
    pub phrases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecognitionOutcome {
    Chosen { id: String, score: f64 },
    /// Two or more candidates, ordered by landmark id.
    Ambiguous { candidates: Vec<Candidate> },
    NoMatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Embedding similarity (lexicon or file provider).
    #[serde(alias = "lexicon")]
    Clip,
    /// Count of mentioned objects in each landmark's fixed detector vocabulary.
    Detector,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Clip, Method::Detector];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Clip => "clip",
            Method::Detector => "detector",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = GroundingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "clip" | "lexicon" => Ok(Method::Clip),
            "detector" => Ok(Method::Detector),
            _ => Err(GroundingError::UnknownMethod(s.to_owned())),
        }
    }
}

fn candidates(landmarks: &[Landmark], ids: &BTreeSet<&str>) -> Vec<Candidate> {
    let mut out: Vec<Candidate> = landmarks
        .iter()
        .filter(|l| ids.contains(l.id.as_str()))
        .map(|l| Candidate { id: l.id.clone(), phrases: l.canonical_phrases.clone() })
        .collect();
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out.dedup_by(|a, b| a.id == b.id);
    out
}

/// Cosine similarity between the query and every landmark. A unique winner needs to beat the
/// runner-up by more than `margin`; otherwise everything within `margin` of the top is returned.
pub fn recognize_clip(
    provider: &dyn EmbeddingProvider,
    landmarks: &[Landmark],
    query: &str,
    margin: f64,
) -> RecognitionOutcome {
    let q = provider.embed_text(query);
    if q.zero || landmarks.is_empty() {
        return RecognitionOutcome::NoMatch;
    }
    let scored: Vec<(f64, &Landmark)> =
        landmarks.iter().map(|l| (q.cosine(&provider.embed_landmark(l)), l)).collect();
    select(&scored, margin, landmarks)
}

fn select(scored: &[(f64, &Landmark)], margin: f64, landmarks: &[Landmark]) -> RecognitionOutcome {
    let top = scored.iter().map(|s| s.0).fold(f64::NEG_INFINITY, f64::max);
    if !(top > 0.0) {
        return RecognitionOutcome::NoMatch;
    }
    let near: BTreeSet<&str> = scored.iter().filter(|s| s.0 >= top - margin).map(|s| s.1.id.as_str()).collect();
    if near.len() == 1 {
        let id = near.into_iter().next().expect("one").to_owned();
        return RecognitionOutcome::Chosen { id, score: top };
    }
    RecognitionOutcome::Ambiguous { candidates: candidates(landmarks, &near) }
}

/// Detector baseline: exact-string overlap between query tokens and each landmark's classes.
pub fn recognize_detector<S: AsRef<str>>(landmarks: &[Landmark], query_tokens: &[S]) -> RecognitionOutcome {
    let q: BTreeSet<&str> = query_tokens.iter().map(AsRef::as_ref).collect();
    let counts: Vec<(usize, &Landmark)> = landmarks
        .iter()
        .map(|l| (l.detector_classes.iter().filter(|c| q.contains(c.as_str())).count(), l))
        .collect();
    let best = counts.iter().map(|c| c.0).max().unwrap_or(0);
    if best == 0 {
        return RecognitionOutcome::NoMatch;
    }
    let winners: BTreeSet<&str> = counts.iter().filter(|c| c.0 == best).map(|c| c.1.id.as_str()).collect();
    if winners.len() == 1 {
        return RecognitionOutcome::Chosen { id: winners.into_iter().next().expect("one").to_owned(), score: best as f64 };
    }
    RecognitionOutcome::Ambiguous { candidates: candidates(landmarks, &winners) }
}

/// "a {attributes} {object}[ in the {location}]"
pub fn compose_prompt(e: &Entities) -> Result<String, GroundingError> {
    let object = e.object.as_deref().ok_or(GroundingError::MissingObject)?;
    let mut s = String::from("a");
    for a in &e.attributes {
        s.push(' ');
        s.push_str(a);
    }
    s.push(' ');
    s.push_str(object);
    if let Some(loc) = &e.location {
        s.push_str(" in the ");
        s.push_str(loc);
    }
    Ok(s)
}

pub fn with_article(phrase: &str) -> String {
    let an = phrase.chars().next().is_some_and(|c| "aeiouAEIOU".contains(c));
    format!("{} {phrase}", if an { "an" } else { "a" })
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// Joins with commas and a final ", or" (Oxford comma, also for two items).
pub fn oxford_or(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{}, or {last}", init.join(", ")),
    }
}

/// Picks for each candidate the phrase naming `object` (else its first phrase).
pub fn candidate_phrase<'a>(c: &'a Candidate, object: Option<&str>) -> &'a str {
    let first = c.phrases.first().map_or(c.id.as_str(), String::as_str);
    object
        .and_then(|w| c.phrases.iter().find(|p| p.split_whitespace().any(|t| t == w)))
        .map_or(first, String::as_str)
}

pub fn disambiguation_question(cands: &[Candidate], entities: &Entities) -> String {
    let object = entities.object.as_deref();
    let opts: Vec<String> = cands.iter().map(|c| with_article(candidate_phrase(c, object))).collect();
    let head = match object {
        Some(o) => format!("What kind of {o} are you looking for?"),
        None => "Which one are you looking for?".to_owned(),
    };
    format!("{head} {}?", capitalize(&oxford_or(&opts)))
}

pub fn location_hint(location: &str) -> String {
    format!("What object are you looking for in the {location}?")
}

/// Recognition strategy plus its embedding provider.
pub struct Grounder {
    pub method: Method,
    pub provider: Box<dyn EmbeddingProvider>,
    pub margin: f64,
}

impl Grounder {
    pub fn new(method: Method, provider: Box<dyn EmbeddingProvider>) -> Self {
        Self { method, provider, margin: DEFAULT_MARGIN }
    }

    /// Clip composes a prompt from all entities; the detector only sees the object's tokens.
    pub fn recognize(&self, landmarks: &[Landmark], e: &Entities) -> Result<RecognitionOutcome, GroundingError> {
        let object = e.object.as_deref().ok_or(GroundingError::MissingObject)?;
        Ok(match self.method {
            Method::Clip => recognize_clip(self.provider.as_ref(), landmarks, &compose_prompt(e)?, self.margin),
            Method::Detector => recognize_detector(landmarks, &tokenize(object)),
        })
    }
}
