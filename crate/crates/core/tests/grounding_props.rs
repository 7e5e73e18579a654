use proptest::prelude::*;
use wayfinder_core::data::{concept_lexicon, reference_scene};
use wayfinder_core::nlu::tokenize;
use wayfinder_core::grounding::{
    lexicon_embed, recognize_clip, recognize_detector, LexiconProvider, RecognitionOutcome, DEFAULT_MARGIN,
};

const WORDS: &[&str] = &[
    "door", "exit", "gate", "glass", "sofa", "couch", "coach", "chair", "fabric", "thermostat", "sink",
    "think", "faucet", "soap", "towel", "dining", "table", "office", "desk", "kitchen", "blue", "big",
];

fn query() -> impl Strategy<Value = Vec<&'static str>> {
    prop::collection::vec(prop::sample::select(WORDS), 1..4)
}

fn swap(w: &str) -> &str {
    match w {
        "couch" | "coach" => "sofa",
        "think" => "sink",
        "exit" | "gate" => "door",
        other => other,
    }
}

fn lexicon_vector(tokens: &[String]) -> Vec<f64> {
    let lex = concept_lexicon();
    let mut v = vec![0.0; lex.dimension()];
    for t in tokens {
        if let Some(&(k, w)) = lex.tokens.get(t) {
            v[k] += w;
        }
    }
    v
}

proptest! {
    #[test]
    fn scaling_a_landmark_vector_keeps_the_choice(q in query(), k in 0usize..5, s in 0.1f64..10.0) {
        let scene = reference_scene();
        let p = LexiconProvider::new(concept_lexicon());
        let text = q.join(" ");
        let before = recognize_clip(&p, &scene.landmarks, &text, DEFAULT_MARGIN);
        let mut lms = scene.landmarks.clone();
        let raw: Vec<f64> = lexicon_vector(&lms[k].description_tokens).iter().map(|x| x * s).collect();
        let n = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        lms[k].embedding = Some(raw.iter().map(|x| x / n).collect());
        let after = recognize_clip(&p, &lms, &text, DEFAULT_MARGIN);
        let id = |o: &RecognitionOutcome| match o {
            RecognitionOutcome::Chosen { id, .. } => Some(id.clone()),
            _ => None,
        };
        prop_assert_eq!(id(&before), id(&after));
    }

    #[test]
    fn landmark_order_is_irrelevant(q in query(), rot in 0usize..5) {
        let scene = reference_scene();
        let p = LexiconProvider::new(concept_lexicon());
        let text = q.join(" ");
        let mut lms = scene.landmarks.clone();
        lms.rotate_left(rot);
        lms.swap(0, 4 - rot.min(4));
        prop_assert_eq!(
            recognize_clip(&p, &scene.landmarks, &text, DEFAULT_MARGIN),
            recognize_clip(&p, &lms, &text, DEFAULT_MARGIN)
        );
        let toks: Vec<String> = q.iter().map(|s| s.to_string()).collect();
        prop_assert_eq!(recognize_detector(&scene.landmarks, &toks), recognize_detector(&lms, &toks));
    }

    #[test]
    fn synonyms_give_identical_outcomes(q in query()) {
        let scene = reference_scene();
        let p = LexiconProvider::new(concept_lexicon());
        let a = q.join(" ");
        let b = q.iter().map(|w| swap(w)).collect::<Vec<_>>().join(" ");
        prop_assert_eq!(lexicon_embed(p.lexicon(), &tokenize(&a)), lexicon_embed(p.lexicon(), &tokenize(&b)));
        prop_assert_eq!(
            recognize_clip(&p, &scene.landmarks, &a, DEFAULT_MARGIN),
            recognize_clip(&p, &scene.landmarks, &b, DEFAULT_MARGIN)
        );
    }

    #[test]
    fn detector_ignores_out_of_vocabulary_tokens(q in query(), extra in prop::collection::vec("[a-z]{3,8}x", 0..4)) {
        let scene = reference_scene();
        let base: Vec<String> = q.iter().map(|s| s.to_string()).collect();
        let mut more = base.clone();
        more.extend(extra);
        prop_assert_eq!(recognize_detector(&scene.landmarks, &base), recognize_detector(&scene.landmarks, &more));
    }
}
