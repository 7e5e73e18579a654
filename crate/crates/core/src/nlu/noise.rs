use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Token → phonetically confusable replacements. Keys starting with `_` are notes, not entries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfusionTable {
    pub entries: BTreeMap<String, Vec<String>>,
}

impl ConfusionTable {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        Ok(Self {
            entries: raw.into_iter().filter(|(k, v)| !k.starts_with('_') && !v.is_empty()).collect(),
        })
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a [&'a str])>) -> Self {
        Self {
            entries: pairs
                .into_iter()
                .map(|(k, v)| (k.to_owned(), v.iter().map(|s| (*s).to_owned()).collect()))
                .collect(),
        }
    }
}

/// Replaces each word independently with probability `rate` by a uniform pick from its confusion
/// set. Words without an entry, punctuation and spacing are left as they are.
pub fn corrupt_transcript(text: &str, table: &ConfusionTable, rate: f64, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rate = rate.clamp(0.0, 1.0);
    let mut out = String::with_capacity(text.len());
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut String, rng: &mut ChaCha8Rng| {
        if word.is_empty() {
            return;
        }
        let key: String = word.chars().filter(|&c| c != '\'' && c != '’').collect::<String>().to_lowercase();
        let draw: f64 = rng.random();
        match table.entries.get(&key) {
            Some(alts) if draw < rate => {
                let k = rng.random_range(0..alts.len());
                out.push_str(&alts[k]);
            }
            _ => out.push_str(word),
        }
        word.clear();
    };
    for c in text.chars() {
        if c.is_alphanumeric() || c == '\'' || c == '’' {
            word.push(c);
        } else {
            flush(&mut word, &mut out, &mut rng);
            out.push(c);
        }
    }
    flush(&mut word, &mut out, &mut rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> ConfusionTable {
        ConfusionTable::from_pairs([("sink", &["think", "sync"][..])])
    }

    #[test]
    fn zero_rate_is_identity() {
        let t = "Take me to the sink, please!";
        assert_eq!(corrupt_transcript(t, &table(), 0.0, 7), t);
    }

    #[test]
    fn full_rate_forces_substitution() {
        let out = corrupt_transcript("take me to the sink", &table(), 1.0, 7);
        let last = out.split(' ').next_back().unwrap();
        assert!(last == "think" || last == "sync", "{out}");
        assert!(out.starts_with("take me to the "));
    }

    #[test]
    fn deterministic_per_seed() {
        let t = "sink sink sink sink sink sink sink sink";
        assert_eq!(corrupt_transcript(t, &table(), 0.5, 3), corrupt_transcript(t, &table(), 0.5, 3));
    }

    #[test]
    fn notes_are_skipped() {
        let t = ConfusionTable::from_json(r#"{"_notes": ["x"], "door": ["floor"]}"#).unwrap();
        assert_eq!(t.entries.len(), 1);
        assert_eq!(t.entries["door"], ["floor"]);
    }
}
