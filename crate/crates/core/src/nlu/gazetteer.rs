use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{tokenize, Entities};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityKind {
    Object,
    Location,
    Attribute,
}

impl EntityKind {
    pub fn placeholder(self) -> &'static str {
        match self {
            EntityKind::Object => "__object__",
            EntityKind::Location => "__location__",
            EntityKind::Attribute => "__attribute__",
        }
    }
}

/// Shipped synonym groups per kind; each group's first member is its canonical form.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct GazetteerFile {
    #[serde(default)]
    pub object: Vec<Vec<String>>,
    #[serde(default)]
    pub location: Vec<Vec<String>>,
    #[serde(default)]
    pub attribute: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
struct Term {
    kind: EntityKind,
    canonical: String,
}

/// Phrase → entity kind map with longest-match lookup.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Gazetteer {
    terms: BTreeMap<String, Term>,
    max_len: usize,
}

impl Gazetteer {
    pub fn from_groups(file: &GazetteerFile) -> Self {
        let mut g = Gazetteer::default();
        for (kind, groups) in [
            (EntityKind::Object, &file.object),
            (EntityKind::Location, &file.location),
            (EntityKind::Attribute, &file.attribute),
        ] {
            for group in groups {
                let Some(canon) = group.first() else { continue };
                for t in group {
                    g.insert(t, kind, canon);
                }
            }
        }
        g
    }

    /// Adds a term; an existing term keeps its first-registered kind.
    pub fn insert(&mut self, phrase: &str, kind: EntityKind, canonical: &str) {
        let key = tokenize(phrase).join(" ");
        if key.is_empty() || self.terms.contains_key(&key) {
            return;
        }
        self.max_len = self.max_len.max(key.split(' ').count());
        self.terms.insert(key, Term { kind, canonical: tokenize(canonical).join(" ") });
    }

    pub fn kind_of(&self, phrase: &str) -> Option<EntityKind> {
        self.terms.get(phrase).map(|t| t.kind)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Synonym-group canonical form of a phrase (itself if unknown).
    pub fn canonical<'a>(&'a self, phrase: &'a str) -> &'a str {
        self.terms.get(phrase).map_or(phrase, |t| t.canonical.as_str())
    }

    /// Longest-match tagging. Returns the token stream with entity spans replaced by placeholders,
    /// and the entities in surface form (first object/location wins).
    pub fn tag(&self, tokens: &[String]) -> (Vec<String>, Entities) {
        let mut out = Vec::with_capacity(tokens.len());
        let mut ents = Entities::default();
        let mut i = 0;
        while i < tokens.len() {
            let mut hit: Option<(String, EntityKind, usize)> = None;
            for n in (1..=self.max_len.min(tokens.len() - i)).rev() {
                let cand = tokens[i..i + n].join(" ");
                if let Some(t) = self.terms.get(&cand) {
                    hit = Some((cand, t.kind, n));
                    break;
                }
                if n == 1 {
                    if let Some(stem) = cand.strip_suffix('s') {
                        if self.kind_of(stem) == Some(EntityKind::Object) {
                            hit = Some((cand, EntityKind::Object, 1));
                        }
                    }
                }
            }
            match hit {
                Some((phrase, kind, n)) => {
                    out.push(kind.placeholder().to_owned());
                    match kind {
                        EntityKind::Attribute => ents.attributes.push(phrase),
                        EntityKind::Object => {
                            ents.object.get_or_insert(phrase);
                        }
                        EntityKind::Location => {
                            ents.location.get_or_insert(phrase);
                        }
                    }
                    i += n;
                }
                None => {
                    out.push(tokens[i].clone());
                    i += 1;
                }
            }
        }
        (out, ents)
    }
}
