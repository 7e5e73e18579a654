//! Session state machine: intent dispatch, landmark selection with confirmation, navigation
//! preferences and replies.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::grounding::{
    compose_prompt, disambiguation_question, with_article, Grounder, GroundingError, RecognitionOutcome,
};
use crate::nlu::{Entities, Intent, IntentResult, NluModel};
use crate::perception::{answer_question, describe, simulate_detections, DescriptionConfig, DetectorNoise};
use crate::planner::GoalManager;
use crate::world::{visible_from, Landmark, Pose2D, SceneObject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DialogueMode {
    Idle,
    AwaitingDisambiguation,
    AwaitingConfirmation,
    Navigating,
    Paused,
}

impl DialogueMode {
    pub const ALL: [DialogueMode; 5] = [
        DialogueMode::Idle,
        DialogueMode::AwaitingDisambiguation,
        DialogueMode::AwaitingConfirmation,
        DialogueMode::Navigating,
        DialogueMode::Paused,
    ];

    fn selecting(self) -> bool {
        matches!(self, DialogueMode::AwaitingDisambiguation | DialogueMode::AwaitingConfirmation)
    }
}

impl fmt::Display for DialogueMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    User,
    Robot,
}

/// Side effects for the planner / simulator. A goal is only ever dispatched by `DispatchGoal`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "effect", rename_all = "snake_case")]
pub enum Effect {
    DispatchGoal { landmark: String, pose: Pose2D, rounds: u32 },
    CancelGoal,
    PauseGoal,
    ResumeGoal { pose: Pose2D },
    SetSpeed { v_limit: f64, omega_limit: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub t: f64,
    pub speaker: Speaker,
    pub text: String,
    pub mode: DialogueMode,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DialogueError {
    #[error("illegal in mode {0}")]
    IllegalState(DialogueMode),
    #[error("bad template file: {0}")]
    Templates(String),
}

/// Reply sentences keyed by name; `{placeholder}` fields are filled at render time.
#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    map: BTreeMap<String, String>,
}

impl Templates {
    pub const KEYS: [&'static str; 20] = [
        "greet",
        "confirm",
        "navigate",
        "arrival",
        "no_match",
        "ask_object",
        "location_hint",
        "deny",
        "nothing_to_confirm",
        "acknowledge",
        "pause",
        "not_moving",
        "resume",
        "nothing_to_resume",
        "faster",
        "fastest",
        "slower",
        "slowest",
        "preempt",
        "no_path",
    ];

    pub fn from_json(text: &str) -> Result<Self, DialogueError> {
        let map: BTreeMap<String, String> =
            serde_json::from_str(text).map_err(|e| DialogueError::Templates(e.to_string()))?;
        if let Some(k) = Self::KEYS.iter().find(|k| !map.contains_key(**k)) {
            return Err(DialogueError::Templates(format!("missing template {k:?}")));
        }
        Ok(Self { map })
    }

    pub fn render(&self, key: &str, args: &[(&str, &str)]) -> String {
        let mut s = self.map.get(key).cloned().unwrap_or_default();
        for (k, v) in args {
            s = s.replace(&format!("{{{k}}}"), v);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub mode: DialogueMode,
    pub pending_entities: Entities,
    /// Set exactly while awaiting confirmation.
    pub pending_landmark: Option<String>,
    /// Phrase used when the pending/active landmark was proposed.
    pub pending_phrase: Option<String>,
    pub active_landmark: Option<String>,
    pub active_phrase: Option<String>,
    pub rounds_for_current_goal: u32,
    pub goals: GoalManager,
    pub transcript: Vec<TranscriptEntry>,
}

impl Default for SessionState {
    fn default() -> Self {
        Self {
            mode: DialogueMode::Idle,
            pending_entities: Entities::default(),
            pending_landmark: None,
            pending_phrase: None,
            active_landmark: None,
            active_phrase: None,
            rounds_for_current_goal: 0,
            goals: GoalManager::default(),
            transcript: Vec::new(),
        }
    }
}

/// What the dialogue needs from the rest of the system for one turn.
pub struct DialogueDeps<'a> {
    pub nlu: &'a NluModel,
    pub grounder: &'a Grounder,
    pub landmarks: &'a [Landmark],
    pub objects: &'a [SceneObject],
    pub templates: &'a Templates,
    /// Forward camera used for descriptions and questions.
    pub camera: Pose2D,
    pub camera_fov: f64,
    pub camera_range: f64,
    pub detector: DetectorNoise,
    pub description: DescriptionConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Turn {
    pub reply: String,
    pub mode: DialogueMode,
    pub effects: Vec<Effect>,
}

/// Greet first, then the rest in confidence order.
fn dispatch_order(r: &IntentResult) -> Vec<Intent> {
    let mut v: Vec<Intent> = r.intents.iter().map(|x| x.0).collect();
    v.sort_by_key(|&i| i != Intent::Greet);
    v
}

impl SessionState {
    pub fn new() -> Self {
        Self::default()
    }

    fn log(&mut self, t: f64, speaker: Speaker, text: &str, effects: Vec<Effect>) {
        self.transcript.push(TranscriptEntry { t, speaker, text: text.to_owned(), mode: self.mode, effects });
    }

    pub fn handle_utterance(&mut self, text: &str, t: f64, deps: &DialogueDeps) -> Turn {
        let r = deps.nlu.understand(text);
        self.handle_intents(&r, t, deps)
    }

    pub fn handle_intents(&mut self, r: &IntentResult, t: f64, deps: &DialogueDeps) -> Turn {
        self.log(t, Speaker::User, &r.raw_text, Vec::new());
        let answers = self.mode.selecting() && (r.has(Intent::Affirm) || r.has(Intent::Deny));
        if answers || r.intents.iter().any(|x| x.0.is_goal()) {
            self.rounds_for_current_goal += 1;
        }
        let mut replies = Vec::new();
        let mut effects = Vec::new();
        let order = dispatch_order(r);
        let mut goal_handled = false;
        for intent in order {
            // Object and location requests in one sentence are a single selection step.
            if intent.is_goal() {
                if goal_handled {
                    continue;
                }
                goal_handled = true;
            }
            let (reply, mut fx) = self.apply_intent(intent, r, deps);
            if !reply.is_empty() {
                replies.push(reply);
            }
            effects.append(&mut fx);
        }
        let reply = replies.join(" ");
        if !reply.is_empty() || !effects.is_empty() {
            self.log(t, Speaker::Robot, &reply, effects.clone());
        }
        Turn { reply, mode: self.mode, effects }
    }

    /// Applies one intent in the current mode. Defined for every (mode, intent) pair.
    pub fn apply_intent(&mut self, intent: Intent, r: &IntentResult, deps: &DialogueDeps) -> (String, Vec<Effect>) {
        use DialogueMode::*;
        let tpl = deps.templates;
        match intent {
            Intent::Unknown => (String::new(), Vec::new()),
            Intent::Greet => (tpl.render("greet", &[]), Vec::new()),
            Intent::ObjectGoal | Intent::LocationGoal => self.select_goal(&r.entities, deps),
            Intent::Affirm => match self.mode {
                AwaitingConfirmation => {
                    let id = self.pending_landmark.take().expect("pending landmark while awaiting confirmation");
                    let phrase = self.pending_phrase.take().unwrap_or_default();
                    let pose = deps.landmarks.iter().find(|l| l.id == id).map_or(Pose2D::identity(), |l| l.pose);
                    let rounds = self.rounds_for_current_goal;
                    self.rounds_for_current_goal = 0;
                    self.pending_entities = Entities::default();
                    self.goals.set_goal(pose);
                    self.active_landmark = Some(id.clone());
                    self.active_phrase = Some(phrase.clone());
                    self.mode = Navigating;
                    (tpl.render("navigate", &[("phrase", &phrase)]), vec![Effect::DispatchGoal { landmark: id, pose, rounds }])
                }
                Idle | AwaitingDisambiguation => (tpl.render("nothing_to_confirm", &[]), Vec::new()),
                Navigating | Paused => (tpl.render("acknowledge", &[]), Vec::new()),
            },
            Intent::Deny => match self.mode {
                AwaitingConfirmation | AwaitingDisambiguation => {
                    self.pending_landmark = None;
                    self.pending_phrase = None;
                    self.pending_entities = Entities::default();
                    self.mode = Idle;
                    (tpl.render("deny", &[]), Vec::new())
                }
                Idle | Navigating | Paused => (tpl.render("acknowledge", &[]), Vec::new()),
            },
            Intent::Describe => (self.describe_view(deps), Vec::new()),
            Intent::Ask => {
                let visible = visible_from(deps.objects, &deps.camera, deps.camera_fov, deps.camera_range);
                (answer_question(&r.raw_text, &visible, &deps.camera), Vec::new())
            }
            Intent::Pause => match self.mode {
                Navigating => {
                    self.goals.pause().expect("navigating has an active goal");
                    self.mode = Paused;
                    (tpl.render("pause", &[]), vec![Effect::PauseGoal])
                }
                _ => (tpl.render("not_moving", &[]), Vec::new()),
            },
            Intent::Resume => match self.mode {
                Paused => {
                    self.goals.resume().expect("paused has a stored goal");
                    self.mode = Navigating;
                    let pose = self.goals.active_goal.expect("resumed goal");
                    (tpl.render("resume", &[]), vec![Effect::ResumeGoal { pose }])
                }
                _ => (tpl.render("nothing_to_resume", &[]), Vec::new()),
            },
            Intent::Accelerate | Intent::Decelerate => {
                let up = intent == Intent::Accelerate;
                if self.goals.adjust_speed(if up { 1 } else { -1 }) {
                    let fx = Effect::SetSpeed { v_limit: self.goals.v_limit(), omega_limit: self.goals.omega_limit() };
                    (tpl.render(if up { "faster" } else { "slower" }, &[]), vec![fx])
                } else {
                    (tpl.render(if up { "fastest" } else { "slowest" }, &[]), Vec::new())
                }
            }
        }
    }

    fn describe_view(&self, deps: &DialogueDeps) -> String {
        let visible = visible_from(deps.objects, &deps.camera, deps.camera_fov, deps.camera_range);
        let seed = deps.seed ^ (self.transcript.len() as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
        describe(&simulate_detections(&visible, &deps.camera, &deps.detector, seed), &deps.description)
    }

    fn merged_entities(&self, e: &Entities) -> Entities {
        if self.mode != DialogueMode::AwaitingDisambiguation {
            return e.clone();
        }
        let mut m = self.pending_entities.clone();
        if e.object.is_some() {
            m.object = e.object.clone();
            m.attributes.clear();
        }
        m.attributes.extend(e.attributes.iter().cloned());
        if e.location.is_some() {
            m.location = e.location.clone();
        }
        m
    }

    fn select_goal(&mut self, e: &Entities, deps: &DialogueDeps) -> (String, Vec<Effect>) {
        let tpl = deps.templates;
        let mut effects = Vec::new();
        let mut prefix = String::new();
        if matches!(self.mode, DialogueMode::Navigating | DialogueMode::Paused) {
            self.goals.cancel();
            self.active_landmark = None;
            self.active_phrase = None;
            self.mode = DialogueMode::Idle;
            effects.push(Effect::CancelGoal);
            prefix = tpl.render("preempt", &[]) + " ";
        }
        let merged = self.merged_entities(e);
        self.pending_landmark = None;
        self.pending_phrase = None;
        self.pending_entities = merged.clone();
        let reply = match deps.grounder.recognize(deps.landmarks, &merged) {
            Err(GroundingError::MissingObject) => {
                self.mode = DialogueMode::AwaitingDisambiguation;
                match &merged.location {
                    Some(loc) => tpl.render("location_hint", &[("location", loc)]),
                    None => tpl.render("ask_object", &[]),
                }
            }
            Err(_) | Ok(RecognitionOutcome::NoMatch) => {
                self.mode = DialogueMode::AwaitingDisambiguation;
                let prompt = compose_prompt(&merged).unwrap_or_default();
                tpl.render("no_match", &[("prompt", &prompt)])
            }
            Ok(RecognitionOutcome::Ambiguous { candidates }) => {
                self.mode = DialogueMode::AwaitingDisambiguation;
                disambiguation_question(&candidates, &merged)
            }
            Ok(RecognitionOutcome::Chosen { id, .. }) => {
                let lm = deps.landmarks.iter().find(|l| l.id == id).expect("chosen landmark exists");
                let phrase = lm.phrase_for(merged.object.as_deref()).to_owned();
                self.mode = DialogueMode::AwaitingConfirmation;
                self.pending_landmark = Some(id);
                let r = tpl.render("confirm", &[("target", &with_article(&phrase))]);
                self.pending_phrase = Some(phrase);
                r
            }
        };
        (prefix + &reply, effects)
    }

    /// Called by the simulator when the active goal is reached.
    pub fn notify_arrival(&mut self, t: f64, templates: &Templates) -> Result<String, DialogueError> {
        if self.mode != DialogueMode::Navigating {
            return Err(DialogueError::IllegalState(self.mode));
        }
        let phrase = self.active_phrase.take().unwrap_or_default();
        self.active_landmark = None;
        self.goals.cancel();
        self.mode = DialogueMode::Idle;
        self.rounds_for_current_goal = 0;
        let reply = templates.render("arrival", &[("phrase", &phrase)]);
        self.log(t, Speaker::Robot, &reply, Vec::new());
        Ok(reply)
    }

    /// Called when the dispatched goal cannot be planned to; returns to Idle.
    pub fn abort_navigation(&mut self, t: f64, templates: &Templates) -> String {
        let phrase = self.active_phrase.take().unwrap_or_default();
        self.active_landmark = None;
        self.goals.cancel();
        self.mode = DialogueMode::Idle;
        let reply = templates.render("no_path", &[("phrase", &phrase)]);
        self.log(t, Speaker::Robot, &reply, vec![Effect::CancelGoal]);
        reply
    }

    /// One JSON object per transcript entry.
    pub fn transcript_jsonl(&self) -> String {
        transcript_jsonl(&self.transcript)
    }
}

pub fn transcript_jsonl(entries: &[TranscriptEntry]) -> String {
    let mut s = String::new();
    for e in entries {
        s.push_str(&serde_json::to_string(e).expect("transcript entry serializes"));
        s.push('\n');
    }
    s
}
