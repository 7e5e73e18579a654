use std::collections::{BTreeMap, BTreeSet};

use serde::Deserialize;

use crate::nlu::tokenize;
use crate::world::Landmark;

use super::GroundingError;

/// Unit vector, or the zero sentinel when no input token was known.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f64>,
    pub zero: bool,
}

impl Embedding {
    pub fn from_raw(values: Vec<f64>) -> Self {
        let n = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n == 0.0 {
            return Embedding { values, zero: true };
        }
        Embedding { values: values.iter().map(|v| v / n).collect(), zero: false }
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Cosine similarity; zero if either side is the sentinel.
    pub fn cosine(&self, o: &Embedding) -> f64 {
        if self.zero || o.zero {
            return 0.0;
        }
        self.values.iter().zip(&o.values).map(|(a, b)| a * b).sum()
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed_text(&self, text: &str) -> Embedding;
    fn embed_landmark(&self, landmark: &Landmark) -> Embedding;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConceptLexicon {
    pub concepts: Vec<String>,
    /// token → (concept index, weight)
    pub tokens: BTreeMap<String, (usize, f64)>,
}

#[derive(Deserialize)]
struct LexiconFile {
    concepts: Vec<String>,
    tokens: BTreeMap<String, TokenEntry>,
}

#[derive(Deserialize)]
struct TokenEntry {
    concept: String,
    weight: f64,
}

impl ConceptLexicon {
    pub fn from_json(text: &str) -> Result<Self, GroundingError> {
        let f: LexiconFile = serde_json::from_str(text).map_err(|e| GroundingError::Lexicon(e.to_string()))?;
        let index: BTreeMap<&str, usize> = f.concepts.iter().enumerate().map(|(k, c)| (c.as_str(), k)).collect();
        if index.len() != f.concepts.len() {
            return Err(GroundingError::Lexicon("duplicate concept".into()));
        }
        let mut tokens = BTreeMap::new();
        let mut reached = BTreeSet::new();
        for (tok, e) in f.tokens {
            let Some(&k) = index.get(e.concept.as_str()) else {
                return Err(GroundingError::Lexicon(format!("token {tok:?} maps to unknown concept {:?}", e.concept)));
            };
            if !(e.weight > 0.0) {
                return Err(GroundingError::Lexicon(format!("token {tok:?} has non-positive weight")));
            }
            reached.insert(k);
            tokens.insert(tok, (k, e.weight));
        }
        if let Some(c) = (0..f.concepts.len()).find(|k| !reached.contains(k)) {
            return Err(GroundingError::Lexicon(format!("concept {:?} has no token", f.concepts[c])));
        }
        Ok(Self { concepts: f.concepts, tokens })
    }

    pub fn dimension(&self) -> usize {
        self.concepts.len()
    }
}

/// Weighted sum of concept one-hots over known tokens, L2-normalised.
pub fn lexicon_embed<S: AsRef<str>>(lex: &ConceptLexicon, tokens: &[S]) -> Embedding {
    let mut v = vec![0.0; lex.dimension()];
    for t in tokens {
        if let Some(&(k, w)) = lex.tokens.get(t.as_ref()) {
            v[k] += w;
        }
    }
    Embedding::from_raw(v)
}

#[derive(Debug, Clone)]
pub struct LexiconProvider {
    pub lexicon: ConceptLexicon,
}

impl LexiconProvider {
    pub fn new(lexicon: ConceptLexicon) -> Self {
        Self { lexicon }
    }

    pub fn lexicon(&self) -> &ConceptLexicon {
        &self.lexicon
    }
}

impl EmbeddingProvider for LexiconProvider {
    fn dimension(&self) -> usize {
        self.lexicon.dimension()
    }

    fn embed_text(&self, text: &str) -> Embedding {
        lexicon_embed(&self.lexicon, &tokenize(text))
    }

    /// A landmark's own `embedding` takes precedence over its description tokens.
    fn embed_landmark(&self, l: &Landmark) -> Embedding {
        match &l.embedding {
            Some(e) if e.len() == self.dimension() => Embedding::from_raw(e.clone()),
            _ => lexicon_embed(&self.lexicon, &l.description_tokens),
        }
    }
}

/// Precomputed landmark vectors (`{"A": [...], ...}`); text still goes through an inner provider
/// of the same dimension.
pub struct FileProvider<P> {
    pub vectors: BTreeMap<String, Vec<f64>>,
    pub text: P,
}

impl<P: EmbeddingProvider> FileProvider<P> {
    pub fn from_json(text: &str, inner: P) -> Result<Self, GroundingError> {
        let vectors: BTreeMap<String, Vec<f64>> =
            serde_json::from_str(text).map_err(|e| GroundingError::Lexicon(e.to_string()))?;
        for (id, v) in &vectors {
            if v.len() != inner.dimension() {
                return Err(GroundingError::Dimension { id: id.clone(), got: v.len(), want: inner.dimension() });
            }
        }
        Ok(Self { vectors, text: inner })
    }
}

impl<P: EmbeddingProvider> EmbeddingProvider for FileProvider<P> {
    fn dimension(&self) -> usize {
        self.text.dimension()
    }

    fn embed_text(&self, text: &str) -> Embedding {
        self.text.embed_text(text)
    }

    fn embed_landmark(&self, l: &Landmark) -> Embedding {
        match self.vectors.get(&l.id) {
            Some(v) => Embedding::from_raw(v.clone()),
            None => self.text.embed_landmark(l),
        }
    }
}
