use wayfinder_core::data;
use wayfinder_core::dialogue::{DialogueDeps, DialogueError, DialogueMode, Effect, SessionState, Speaker, Templates};
use wayfinder_core::grounding::{Grounder, Method};
use wayfinder_core::nlu::{Entities, Intent, IntentResult, NluModel};
use wayfinder_core::perception::{DescriptionConfig, DetectorNoise};
use wayfinder_core::world::{Pose2D, Scene};

struct Fixture {
    scene: Scene,
    nlu: NluModel,
    grounder: Grounder,
    templates: Templates,
}

impl Fixture {
    fn new(method: Method) -> Self {
        Fixture {
            scene: data::reference_scene(),
            nlu: data::shipped_nlu(),
            grounder: data::shipped_grounder(method),
            templates: data::templates(),
        }
    }

    fn deps(&self) -> DialogueDeps<'_> {
        let fov = std::f64::consts::FRAC_PI_2;
        DialogueDeps {
            nlu: &self.nlu,
            grounder: &self.grounder,
            landmarks: &self.scene.landmarks,
            objects: &self.scene.objects,
            templates: &self.templates,
            camera: Pose2D::new(9.7, 9.0, std::f64::consts::FRAC_PI_2),
            camera_fov: fov,
            camera_range: 4.0,
            detector: DetectorNoise { fov, ..DetectorNoise::default() },
            description: DescriptionConfig::default(),
            seed: 7,
        }
    }

    fn say(&self, s: &mut SessionState, lines: &[&str]) -> String {
        let deps = self.deps();
        let mut last = String::new();
        for (k, l) in lines.iter().enumerate() {
            last = s.handle_utterance(l, k as f64, &deps).reply;
        }
        last
    }

    fn session_in(&self, mode: DialogueMode) -> SessionState {
        let mut s = SessionState::new();
        let lines: &[&str] = match mode {
            DialogueMode::Idle => &[],
            DialogueMode::AwaitingDisambiguation => &["take me to the chair"],
            DialogueMode::AwaitingConfirmation => &["take me to the couch"],
            DialogueMode::Navigating => &["take me to the couch", "yes"],
            DialogueMode::Paused => &["take me to the couch", "yes", "stop"],
        };
        self.say(&mut s, lines);
        assert_eq!(s.mode, mode, "{:?}", s.transcript);
        s
    }

    fn landmark_pose(&self, id: &str) -> Pose2D {
        self.scene.landmark(id).unwrap().pose
    }
}

fn dispatches(s: &SessionState) -> Vec<&Effect> {
    s.transcript.iter().flat_map(|e| &e.effects).filter(|e| matches!(e, Effect::DispatchGoal { .. })).collect()
}

#[test]
fn couch_asks_for_the_sofa() {
    let f = Fixture::new(Method::Clip);
    let mut s = SessionState::new();
    let reply = f.say(&mut s, &["take me to the couch"]);
    assert_eq!(reply, "Do you wish to go to a sofa?");
    assert_eq!(s.mode, DialogueMode::AwaitingConfirmation);
    assert_eq!(s.pending_landmark.as_deref(), Some("B"));
    assert!(dispatches(&s).is_empty());
}

#[test]
fn yes_dispatches_the_pending_landmark() {
    let f = Fixture::new(Method::Clip);
    let mut s = f.session_in(DialogueMode::AwaitingConfirmation);
    let turn = s.handle_utterance("yes", 1.0, &f.deps());
    assert_eq!(turn.mode, DialogueMode::Navigating);
    assert_eq!(turn.effects, vec![Effect::DispatchGoal { landmark: "B".into(), pose: f.landmark_pose("B"), rounds: 2 }]);
    assert_eq!(s.rounds_for_current_goal, 0);
    assert!(s.pending_landmark.is_none());
}

#[test]
fn pause_then_resume_keeps_the_goal() {
    let f = Fixture::new(Method::Clip);
    let mut s = f.session_in(DialogueMode::Navigating);
    let goal = s.goals.active_goal;
    let turn = s.handle_utterance("stop", 2.0, &f.deps());
    assert_eq!((turn.mode, turn.effects), (DialogueMode::Paused, vec![Effect::PauseGoal]));
    assert!(s.goals.active_goal.is_none());
    let turn = s.handle_utterance("continue", 3.0, &f.deps());
    assert_eq!(turn.mode, DialogueMode::Navigating);
    assert_eq!(turn.effects, vec![Effect::ResumeGoal { pose: f.landmark_pose("B") }]);
    assert_eq!(s.goals.active_goal, goal);
}

#[test]
fn deny_discards_the_candidate() {
    let f = Fixture::new(Method::Clip);
    let mut s = f.session_in(DialogueMode::AwaitingConfirmation);
    let reply = f.say(&mut s, &["no"]);
    assert_eq!(reply, "Okay, please tell me another destination.");
    assert_eq!(s.mode, DialogueMode::Idle);
    assert!(s.pending_landmark.is_none());
}

#[test]
fn ambiguous_object_asks_a_question() {
    let f = Fixture::new(Method::Clip);
    let mut s = SessionState::new();
    let reply = f.say(&mut s, &["take me to the chair"]);
    assert_eq!(s.mode, DialogueMode::AwaitingDisambiguation);
    assert!(reply.ends_with('?'), "{reply}");
    // Naming an attribute narrows the candidates down.
    f.say(&mut s, &["the dining one"]);
    assert_eq!(s.mode, DialogueMode::AwaitingConfirmation, "{:?}", s.transcript);
    assert_eq!(s.pending_landmark.as_deref(), Some("D"));
}

#[test]
fn detector_cannot_find_the_door() {
    let f = Fixture::new(Method::Detector);
    let mut s = SessionState::new();
    let reply = f.say(&mut s, &["take me to the door"]);
    assert_eq!(s.mode, DialogueMode::AwaitingDisambiguation);
    assert!(reply.starts_with("Sorry, I could not find"), "{reply}");
}

#[test]
fn new_goal_while_navigating_preempts() {
    let f = Fixture::new(Method::Clip);
    let mut s = f.session_in(DialogueMode::Navigating);
    let turn = s.handle_utterance("take me to the sink", 5.0, &f.deps());
    assert_eq!(turn.effects, vec![Effect::CancelGoal]);
    assert_eq!(turn.mode, DialogueMode::AwaitingConfirmation);
    assert!(turn.reply.starts_with("Okay, I have cancelled the current trip."));
    assert_eq!(s.pending_landmark.as_deref(), Some("C"));
}

#[test]
fn arrival_message_and_counter_reset() {
    let f = Fixture::new(Method::Clip);
    let mut s = f.session_in(DialogueMode::Navigating);
    s.rounds_for_current_goal = 3;
    let reply = s.notify_arrival(10.0, &f.templates).unwrap();
    assert_eq!(reply, "We have arrived at the sofa.");
    assert_eq!(s.mode, DialogueMode::Idle);
    assert_eq!(s.rounds_for_current_goal, 0);
    assert!(matches!(s.notify_arrival(11.0, &f.templates), Err(DialogueError::IllegalState(DialogueMode::Idle))));
}

#[test]
fn speed_changes_saturate() {
    let f = Fixture::new(Method::Clip);
    let mut s = f.session_in(DialogueMode::Navigating);
    let mut replies = Vec::new();
    for _ in 0..6 {
        replies.push(s.handle_utterance("go faster", 1.0, &f.deps()).reply);
    }
    assert_eq!(replies.first().unwrap(), "Okay, I will go faster.");
    assert_eq!(replies.last().unwrap(), "This is already the fastest speed.");
    let turn = s.handle_utterance("slow down", 2.0, &f.deps());
    assert!(matches!(turn.effects.as_slice(), [Effect::SetSpeed { .. }]));
}

#[test]
fn describe_and_ask_keep_the_mode() {
    let f = Fixture::new(Method::Clip);
    for mode in DialogueMode::ALL {
        let mut s = f.session_in(mode);
        for q in ["what do you see", "is there a sofa in front of me"] {
            let turn = s.handle_utterance(q, 1.0, &f.deps());
            assert_eq!(turn.mode, mode);
            assert!(!turn.reply.is_empty());
            assert!(turn.effects.is_empty());
        }
    }
}

fn synthetic(intent: Intent) -> IntentResult {
    let entities = match intent {
        Intent::ObjectGoal => Entities { object: Some("sofa".into()), ..Entities::default() },
        Intent::LocationGoal => Entities { location: Some("kitchen".into()), ..Entities::default() },
        _ => Entities::default(),
    };
    IntentResult { intents: vec![(intent, 1.0)], entities, raw_text: format!("<{intent:?}>") }
}

#[test]
fn every_mode_intent_pair_is_defined() {
    let f = Fixture::new(Method::Clip);
    let deps = f.deps();
    for mode in DialogueMode::ALL {
        for intent in Intent::ALL {
            let mut s = f.session_in(mode);
            let before = s.clone();
            let turn = s.handle_intents(&synthetic(intent), 9.0, &deps);
            assert_eq!(turn.mode, s.mode);
            assert_eq!(s.pending_landmark.is_some(), s.mode == DialogueMode::AwaitingConfirmation, "{mode:?} {intent:?}");
            let dispatched = turn.effects.iter().any(|e| matches!(e, Effect::DispatchGoal { .. }));
            assert_eq!(dispatched, mode == DialogueMode::AwaitingConfirmation && intent == Intent::Affirm, "{mode:?} {intent:?}");
            if intent == Intent::Unknown {
                assert_eq!(turn.reply, "");
                assert!(turn.effects.is_empty());
                assert_eq!(s.mode, before.mode);
                assert_eq!(s.pending_landmark, before.pending_landmark);
                assert_eq!(s.goals, before.goals);
            }
        }
    }
}

#[test]
fn unknown_text_is_ignored() {
    let f = Fixture::new(Method::Clip);
    for mode in DialogueMode::ALL {
        let mut s = f.session_in(mode);
        let turn = s.handle_utterance("", 1.0, &f.deps());
        assert_eq!((turn.reply.as_str(), turn.mode), ("", mode));
        assert!(turn.effects.is_empty());
    }
}

#[test]
fn transcript_replay_is_deterministic() {
    let f = Fixture::new(Method::Clip);
    let lines = [
        "hello",
        "take me to the chair",
        "the dining one",
        "no",
        "what do you see",
        "take me to the think",
        "yes",
        "go faster",
        "stop",
        "how many chairs are there",
        "continue",
    ];
    let mut a = SessionState::new();
    f.say(&mut a, &lines);
    let users: Vec<String> = a.transcript.iter().filter(|e| e.speaker == Speaker::User).map(|e| e.text.clone()).collect();
    let users: Vec<&str> = users.iter().map(String::as_str).collect();
    assert_eq!(users, lines);
    let mut b = SessionState::new();
    f.say(&mut b, &users);
    assert_eq!(a.transcript_jsonl(), b.transcript_jsonl());
    assert_eq!(dispatches(&a).len(), 1);
    let times: Vec<f64> = a.transcript.iter().map(|e| e.t).collect();
    assert!(times.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn transcript_lines_are_json_objects() {
    let f = Fixture::new(Method::Clip);
    let s = f.session_in(DialogueMode::Navigating);
    for line in s.transcript_jsonl().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for k in ["t", "speaker", "text", "mode", "effects"] {
            assert!(v.get(k).is_some(), "{k} missing in {line}");
        }
    }
}
