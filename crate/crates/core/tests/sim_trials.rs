use std::sync::Arc;

use wayfinder_core::data;
use wayfinder_core::dialogue::{Effect, Speaker};
use wayfinder_core::grounding::Method;
use wayfinder_core::sim::{run_trial, Engine, ScriptItem, SimConfig, TrialEnd, TrialError, TrialOptions, TrialOutcome};
use wayfinder_core::world::{Pose2D, Scene};

fn script(lines: &[&str]) -> Vec<ScriptItem> {
    lines.iter().map(|l| ScriptItem::from(*l)).collect()
}

fn run(scene: Scene, method: Method, route: usize, lines: &[&str], cfg: &SimConfig) -> TrialOutcome {
    let route = scene.routes[route].clone();
    let res = Arc::new(data::shipped_resources(scene, method));
    run_trial(res, &route, &script(lines), cfg, TrialOptions::default()).unwrap()
}

fn open_room() -> Scene {
    let rows = vec!["..........".to_owned(); 10];
    let v = serde_json::json!({
        "name": "open",
        "grid": {"width": 10, "height": 10, "resolution": 0.5, "origin": [0, 0, 0], "rows": rows},
        "landmarks": [{"id": "A", "pose": [2.5, 2.5, 0.0], "description_tokens": ["door"],
                       "canonical_phrases": ["door"], "detector_classes": ["poster"]}],
        "routes": [{"start": [2.5, 2.5, 0.0], "goal_landmark": "A"}]
    });
    Scene::from_json(&v.to_string()).unwrap()
}

#[test]
fn door_route_with_the_lexicon() {
    let o = run(data::reference_scene(), Method::Clip, 0, &["take me to the door", "yes"], &SimConfig::default());
    let m = &o.metrics;
    assert!(m.lr_success && m.nav_success, "{m:?}");
    assert_eq!(m.end, TrialEnd::Arrived);
    assert_eq!(m.dialogue_rounds, 2);
    assert_eq!(m.confirmed_landmark.as_deref(), Some("A"));
    assert!(m.final_distance <= 0.3);
    assert_eq!((m.robot_collisions, m.user_collisions), (0, 0));
    assert!(m.steps < SimConfig::default().max_steps);
    let last = o.transcript.last().unwrap();
    assert_eq!((last.speaker, last.text.as_str()), (Speaker::Robot, "We have arrived at the glass door."));
}

#[test]
fn door_route_with_the_detector() {
    let o = run(data::reference_scene(), Method::Detector, 0, &["take me to the door", "yes"], &SimConfig::default());
    assert!(!o.metrics.lr_success && !o.metrics.nav_success);
    assert_eq!(o.metrics.end, TrialEnd::ScriptExhausted);
    assert!(o.metrics.confirmed_landmark.is_none());
}

#[test]
fn goal_at_start_arrives_at_once() {
    let o = run(open_room(), Method::Clip, 0, &["take me to the door", "yes"], &SimConfig::default());
    assert!(o.metrics.nav_success);
    assert!(o.metrics.traversal_time < 1e-9);
    assert!(o.metrics.steps <= 1);
}

#[test]
fn invalid_trials() {
    let scene = data::reference_scene();
    let mut route = scene.routes[0].clone();
    let res = Arc::new(data::shipped_resources(scene, Method::Clip));
    let cfg = SimConfig::default();
    assert_eq!(run_trial(res.clone(), &route, &[], &cfg, TrialOptions::default()).unwrap_err(), TrialError::EmptyScript);
    route.goal_landmark = "Z".into();
    let err = run_trial(res, &route, &script(&["hi"]), &cfg, TrialOptions::default()).unwrap_err();
    assert_eq!(err, TrialError::UnknownGoal("Z".into()));
}

#[test]
fn timeout_is_reported() {
    let cfg = SimConfig { max_steps: 50, ..SimConfig::default() };
    let o = run(data::reference_scene(), Method::Clip, 0, &["take me to the door", "yes"], &cfg);
    assert_eq!(o.metrics.end, TrialEnd::Timeout);
    assert!(o.metrics.lr_success && !o.metrics.nav_success);
}

#[test]
fn auto_confirm_answers_the_question() {
    let scene = data::reference_scene();
    let route = scene.routes[1].clone();
    let res = Arc::new(data::shipped_resources(scene, Method::Clip));
    let o = run_trial(res, &route, &script(&["take me to the couch"]), &SimConfig::default(), TrialOptions { auto_confirm: true })
        .unwrap();
    assert!(o.metrics.nav_success);
    assert_eq!(o.metrics.dialogue_rounds, 2);
}

#[test]
fn paused_robot_stands_still() {
    let lines = vec![
        ScriptItem::from("take me to the sofa"),
        ScriptItem::from("yes"),
        ScriptItem::Timed { at: 5.0, text: "stop".into() },
        ScriptItem::Timed { at: 12.0, text: "continue".into() },
    ];
    let scene = data::reference_scene();
    let route = scene.routes[1].clone();
    let res = Arc::new(data::shipped_resources(scene, Method::Clip));
    let o = run_trial(res, &route, &lines, &SimConfig::default(), TrialOptions::default()).unwrap();
    assert!(o.metrics.nav_success);
    let fx: Vec<&Effect> = o.transcript.iter().flat_map(|e| &e.effects).collect();
    assert!(matches!(fx.as_slice(), [Effect::DispatchGoal { .. }, Effect::PauseGoal, Effect::ResumeGoal { .. }]));
    // Once decelerated, the robot does not move until the resume.
    let still: Vec<_> = o.log.iter().filter(|r| r.t > 7.0 + 1e-9 && r.t < 12.0 - 1e-9).collect();
    assert!(!still.is_empty());
    assert!(still.windows(2).all(|w| w[0].robot == w[1].robot), "robot moved while paused");
}

#[test]
fn motion_respects_the_speed_limit_and_tether() {
    let cfg = SimConfig::default();
    let scene = data::reference_scene();
    let start = scene.routes[2].start;
    let o = run(scene, Method::Clip, 2, &["take me to the sink", "yes"], &cfg);
    assert!(o.metrics.nav_success);
    let mut robots = vec![start; cfg.lag_steps() + 1];
    robots.extend(o.log.iter().map(|r| r.robot));
    let lag = cfg.lag_steps();
    for (k, rec) in o.log.iter().enumerate() {
        let prev = robots[k + lag];
        assert!(prev.position().distance(rec.robot.position()) <= cfg.dwa.v_max * cfg.dt + 1e-9, "step {k}");
        assert!(rec.cmd[0] >= -1e-12 && rec.cmd[0] <= cfg.dwa.v_max + 1e-12);
        let held = robots[k + 1].compose(&Pose2D::new(-cfg.handle_offset, 0.0, 0.0));
        assert!(held.position().distance(rec.user.position()) < 1e-9, "step {k}");
        assert!((rec.t - (k + 1) as f64 * cfg.dt).abs() < 1e-9);
    }
}

#[test]
fn trials_are_deterministic() {
    let go = || {
        let o = run(data::reference_scene(), Method::Clip, 1, &["hello", "take me to the coach", "yes"], &SimConfig::default());
        serde_json::to_string(&o).unwrap()
    };
    assert_eq!(go(), go());
}

#[test]
fn step_log_is_json_lines() {
    let scene = data::reference_scene();
    let route = scene.routes[1].clone();
    let mut eng = Engine::new(Arc::new(data::shipped_resources(scene, Method::Clip)), SimConfig::default(), route.start);
    eng.utterance("take me to the sofa");
    eng.utterance("yes");
    for _ in 0..5 {
        eng.tick();
    }
    let text = eng.log_jsonl();
    assert_eq!(text.lines().count(), 5);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["robot"].as_array().unwrap().len(), 3);
        assert_eq!(v["user"].as_array().unwrap().len(), 3);
        assert_eq!(v["cmd"].as_array().unwrap().len(), 2);
        assert!(v["t"].is_number());
    }
}

fn corridor(user_polygon: bool, seed: u64) -> TrialOutcome {
    let cfg = SimConfig { user_polygon, seed, ..SimConfig::default() };
    run(data::builtin_scene("narrow_corridor").unwrap(), Method::Clip, 0, &["take me to the door", "yes"], &cfg)
}

#[test]
fn user_polygon_prevents_user_collisions() {
    for seed in [1, 7] {
        let on = corridor(true, seed);
        assert!(on.metrics.nav_success, "seed {seed}: {:?}", on.metrics);
        assert_eq!(on.metrics.user_collisions, 0, "seed {seed}");
        let off = corridor(false, seed);
        assert!(off.metrics.user_collisions >= 1, "seed {seed}: {:?}", off.metrics);
    }
}
