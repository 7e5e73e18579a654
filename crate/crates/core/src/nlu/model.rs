use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::gazetteer::{EntityKind, Gazetteer, GazetteerFile};
use super::{tokenize, Entities, Intent, IntentResult};

const N: usize = Intent::ALL.len();

/// Pairs of intents that cannot both be emitted; the more confident one survives.
const EXCLUSIVE: [(Intent, Intent); 5] = [
    (Intent::ObjectGoal, Intent::LocationGoal),
    (Intent::Affirm, Intent::Deny),
    (Intent::Pause, Intent::Resume),
    (Intent::Accelerate, Intent::Decelerate),
    (Intent::Describe, Intent::Ask),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusExample {
    pub text: String,
    pub intents: Vec<Intent>,
    #[serde(default)]
    pub entities: Entities,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NluError {
    #[error("training corpus has no example for intent {0:?}")]
    MissingIntentCoverage(Intent),
    #[error("malformed corpus: {0}")]
    Corpus(String),
}

/// Per-intent token weights (smoothed log-likelihood ratios) plus the entity gazetteer.
#[derive(Debug, Clone, PartialEq)]
pub struct NluModel {
    weights: BTreeMap<String, [f64; N]>,
    pub gazetteer: Gazetteer,
    /// Secondary intents need at least this fraction of the top confidence.
    pub secondary_threshold: f64,
    /// Clause scores below this are ignored; nothing left means `Unknown`.
    pub floor: f64,
    pub smoothing: f64,
}

impl NluModel {
    pub const DEFAULT_SMOOTHING: f64 = 0.25;
    pub const DEFAULT_SECONDARY: f64 = 0.65;
    pub const FLOOR_FRACTION: f64 = 0.5;

    pub fn parse_corpus(text: &str) -> Result<Vec<CorpusExample>, NluError> {
        serde_json::from_str(text).map_err(|e| NluError::Corpus(e.to_string()))
    }

    pub fn fit(corpus: &[CorpusExample], groups: &GazetteerFile) -> Result<NluModel, NluError> {
        Self::fit_with(corpus, groups, Self::DEFAULT_SMOOTHING)
    }

    pub fn fit_with(corpus: &[CorpusExample], groups: &GazetteerFile, alpha: f64) -> Result<NluModel, NluError> {
        let covered: BTreeSet<Intent> = corpus.iter().flat_map(|e| e.intents.iter().copied()).collect();
        if let Some(&missing) = Intent::ALL.iter().find(|i| !covered.contains(i)) {
            return Err(NluError::MissingIntentCoverage(missing));
        }
        let mut gazetteer = Gazetteer::from_groups(groups);
        for ex in corpus {
            let e = &ex.entities;
            if let Some(o) = &e.object {
                gazetteer.insert(o, EntityKind::Object, o);
            }
            if let Some(l) = &e.location {
                gazetteer.insert(l, EntityKind::Location, l);
            }
            for a in &e.attributes {
                gazetteer.insert(a, EntityKind::Attribute, a);
            }
        }

        let mut counts: BTreeMap<String, [u64; N]> = BTreeMap::new();
        let mut totals = [0u64; N];
        for ex in corpus {
            let (toks, _) = gazetteer.tag(&tokenize(&ex.text));
            let labels: BTreeSet<Intent> = ex.intents.iter().copied().collect();
            for i in labels {
                for t in &toks {
                    counts.entry(t.clone()).or_insert([0; N])[i.index()] += 1;
                    totals[i.index()] += 1;
                }
            }
        }
        let v = counts.len() as f64;
        let all: u64 = totals.iter().sum();
        let weights = counts
            .iter()
            .map(|(tok, c)| {
                let row_total: u64 = c.iter().sum();
                let mut w = [0.0; N];
                for k in 0..N {
                    let (cin, nin) = (c[k] as f64, totals[k] as f64);
                    let (cout, nout) = ((row_total - c[k]) as f64, (all - totals[k]) as f64);
                    w[k] = ((cin + alpha) / (nin + alpha * v)).ln() - ((cout + alpha) / (nout + alpha * v)).ln();
                }
                (tok.clone(), w)
            })
            .collect();

        let mut model = NluModel {
            weights,
            gazetteer,
            secondary_threshold: Self::DEFAULT_SECONDARY,
            floor: 0.0,
            smoothing: alpha,
        };
        let mut in_class: Vec<f64> = corpus
            .iter()
            .filter(|e| e.intents.len() == 1 && e.intents[0] != Intent::Unknown)
            .map(|e| model.scores(&model.gazetteer.tag(&tokenize(&e.text)).0)[e.intents[0].index()])
            .collect();
        in_class.sort_by(f64::total_cmp);
        if !in_class.is_empty() {
            let p5 = in_class[((in_class.len() - 1) as f64 * 0.05) as usize];
            model.floor = Self::FLOOR_FRACTION * p5;
        }
        Ok(model)
    }

    pub fn weight(&self, token: &str, intent: Intent) -> Option<f64> {
        self.weights.get(token).map(|w| w[intent.index()])
    }

    pub fn vocabulary_size(&self) -> usize {
        self.weights.len()
    }

    /// Sum of token weights per intent over an already tagged token stream.
    pub fn scores(&self, tagged: &[String]) -> [f64; N] {
        let mut s = [0.0; N];
        for t in tagged {
            if let Some(w) = self.weights.get(t) {
                for k in 0..N {
                    s[k] += w[k];
                }
            }
        }
        s
    }

    pub fn understand(&self, text: &str) -> IntentResult {
        let (_, entities) = self.gazetteer.tag(&tokenize(text));
        let mut found: BTreeMap<Intent, f64> = BTreeMap::new();
        for clause in split_clauses(text) {
            let s = self.scores(&self.gazetteer.tag(&clause).0);
            let top = Intent::ALL
                .iter()
                .copied()
                .max_by(|a, b| s[a.index()].total_cmp(&s[b.index()]).then(b.index().cmp(&a.index())))
                .expect("non-empty");
            let top_score = s[top.index()];
            if top == Intent::Unknown || top_score < self.floor {
                continue;
            }
            let z: f64 = s.iter().map(|x| (x - top_score).exp()).sum();
            let conf = 1.0 / z;
            let e = found.entry(top).or_insert(0.0);
            *e = e.max(conf);
        }
        let mut ranked: Vec<(Intent, f64)> = found.into_iter().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.index().cmp(&b.0.index())));
        let intents = match ranked.first() {
            None => vec![(Intent::Unknown, 1.0)],
            Some(&(_, top_conf)) => {
                let mut kept: Vec<(Intent, f64)> = Vec::new();
                for (k, &(i, c)) in ranked.iter().enumerate() {
                    let blocked = EXCLUSIVE
                        .iter()
                        .any(|&(a, b)| kept.iter().any(|&(j, _)| (i == a && j == b) || (i == b && j == a)));
                    if k == 0 || (!blocked && c >= self.secondary_threshold * top_conf) {
                        kept.push((i, c));
                    }
                }
                kept
            }
        };
        IntentResult { intents, entities, raw_text: text.to_owned() }
    }
}

/// Splits on `, ; . ! ?` and on the words "and" / "then"; returns non-empty token lists.
pub fn split_clauses(text: &str) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for part in text.split([',', ';', '.', '!', '?']) {
        let mut cur = Vec::new();
        for t in tokenize(part) {
            if t == "and" || t == "then" {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
            } else {
                cur.push(t);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

/// Intent sets must match exactly; object/location compare by synonym group, attributes as sets.
pub fn example_correct(model: &NluModel, ex: &CorpusExample, text: &str) -> bool {
    let r = model.understand(text);
    let mut want = ex.intents.clone();
    want.sort();
    want.dedup();
    if r.intent_set() != want {
        return false;
    }
    let g = &model.gazetteer;
    let canon = |x: &Option<String>| x.as_deref().map(|s| g.canonical(s).to_owned());
    if canon(&ex.entities.object) != canon(&r.entities.object) {
        return false;
    }
    if canon(&ex.entities.location) != canon(&r.entities.location) {
        return false;
    }
    let mut a = ex.entities.attributes.clone();
    let mut b = r.entities.attributes.clone();
    a.sort();
    b.sort();
    a == b
}

/// Fraction of examples classified correctly, with an optional per-example text rewrite.
pub fn accuracy<F: FnMut(usize, &str) -> String>(model: &NluModel, corpus: &[CorpusExample], mut rewrite: F) -> f64 {
    if corpus.is_empty() {
        return 0.0;
    }
    let ok = corpus
        .iter()
        .enumerate()
        .filter(|(k, ex)| example_correct(model, ex, &rewrite(*k, &ex.text)))
        .count();
    ok as f64 / corpus.len() as f64
}
