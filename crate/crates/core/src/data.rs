//! Data files shipped with the crate (corpora, lexicon, scenes, suite, reply templates).

pub const NLU_TRAIN: &str = include_str!("../../../data/nlu_train.json");
pub const NLU_EVAL: &str = include_str!("../../../data/nlu_eval.json");
pub const GAZETTEER: &str = include_str!("../../../data/gazetteer.json");
pub const CONFUSION: &str = include_str!("../../../data/confusion.json");

use crate::nlu::{ConfusionTable, CorpusExample, GazetteerFile, NluModel};

pub fn train_corpus() -> Vec<CorpusExample> {
    NluModel::parse_corpus(NLU_TRAIN).expect("shipped training corpus parses")
}

pub fn eval_corpus() -> Vec<CorpusExample> {
    NluModel::parse_corpus(NLU_EVAL).expect("shipped evaluation corpus parses")
}

pub fn gazetteer_groups() -> GazetteerFile {
    serde_json::from_str(GAZETTEER).expect("shipped gazetteer parses")
}

pub fn confusion_table() -> ConfusionTable {
    ConfusionTable::from_json(CONFUSION).expect("shipped confusion table parses")
}

/// Model fitted on the shipped training corpus.
pub fn shipped_nlu() -> NluModel {
    NluModel::fit(&train_corpus(), &gazetteer_groups()).expect("shipped corpus covers every intent")
}

pub const LEXICON: &str = include_str!("../../../data/lexicon.json");

pub fn concept_lexicon() -> crate::grounding::ConceptLexicon {
    crate::grounding::ConceptLexicon::from_json(LEXICON).expect("shipped lexicon parses")
}

pub const DRAGON_LAB: &str = include_str!("../../../data/dragon_lab.json");
pub const NARROW_CORRIDOR: &str = include_str!("../../../data/narrow_corridor.json");

/// Built-in scenes by id.
pub fn builtin_scene(id: &str) -> Option<crate::world::Scene> {
    let text = match id {
        "dragon_lab" => DRAGON_LAB,
        "narrow_corridor" => NARROW_CORRIDOR,
        _ => return None,
    };
    Some(crate::world::Scene::from_json(text).expect("shipped scene is valid"))
}

pub fn reference_scene() -> crate::world::Scene {
    builtin_scene("dragon_lab").expect("reference scene is shipped")
}

pub const TEMPLATES: &str = include_str!("../../../data/templates.json");

pub fn templates() -> crate::dialogue::Templates {
    crate::dialogue::Templates::from_json(TEMPLATES).expect("shipped templates are complete")
}

/// Grounder for `method` backed by the shipped lexicon.
pub fn shipped_grounder(method: crate::grounding::Method) -> crate::grounding::Grounder {
    let provider = crate::grounding::LexiconProvider::new(concept_lexicon());
    crate::grounding::Grounder::new(method, Box::new(provider))
}

/// Scene plus the shipped NLU model, templates and lexicon grounder.
pub fn shipped_resources(scene: crate::world::Scene, method: crate::grounding::Method) -> crate::sim::Resources {
    shipped_resources_with(scene, method, shipped_nlu())
}

/// As [`shipped_resources`] but reusing an already fitted NLU model.
pub fn shipped_resources_with(
    scene: crate::world::Scene,
    method: crate::grounding::Method,
    nlu: NluModel,
) -> crate::sim::Resources {
    let radius = crate::planner::DwaConfig::default().robot_radius;
    crate::sim::Resources::new(scene, nlu, templates(), shipped_grounder(method), radius)
}

pub const SUITE: &str = include_str!("../../../data/suite.json");
