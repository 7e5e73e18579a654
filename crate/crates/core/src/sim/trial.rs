use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Engine, Resources, SimConfig, StepRecord};
use crate::dialogue::{DialogueMode, Effect, TranscriptEntry};
use crate::world::Route;

/// A scripted user line: said as soon as the robot waits for input, or at a fixed sim time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScriptItem {
    Line(String),
    Timed { at: f64, text: String },
}

impl From<&str> for ScriptItem {
    fn from(s: &str) -> Self {
        ScriptItem::Line(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrialOptions {
    /// Answer confirmation questions automatically: "yes" for the route goal, "no" otherwise.
    pub auto_confirm: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialEnd {
    Arrived,
    /// The robot waited for input after the last scripted line.
    ScriptExhausted,
    Timeout,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub lr_success: bool,
    /// Arrived at the confirmed landmark, and that landmark was the right one.
    pub nav_success: bool,
    pub traversal_time: f64,
    pub dialogue_rounds: u32,
    pub robot_collisions: u32,
    pub user_collisions: u32,
    pub confirmed_landmark: Option<String>,
    /// Distance from the confirmed landmark (or the route goal if none) at the end.
    pub final_distance: f64,
    pub steps: u64,
    pub end: TrialEnd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub metrics: TrialMetrics,
    pub transcript: Vec<TranscriptEntry>,
    pub log: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrialError {
    #[error("script is empty")]
    EmptyScript,
    #[error("route goal {0:?} is not a landmark of the scene")]
    UnknownGoal(String),
}

pub fn run_trial(
    res: Arc<Resources>,
    route: &Route,
    script: &[ScriptItem],
    cfg: &SimConfig,
    opts: TrialOptions,
) -> Result<TrialOutcome, TrialError> {
    if script.is_empty() {
        return Err(TrialError::EmptyScript);
    }
    let goal_pose = res
        .scene
        .landmark(&route.goal_landmark)
        .map(|l| l.pose)
        .ok_or_else(|| TrialError::UnknownGoal(route.goal_landmark.clone()))?;
    let mut lines: VecDeque<String> = VecDeque::new();
    let mut timed: Vec<(f64, String)> = Vec::new();
    for item in script {
        match item {
            ScriptItem::Line(s) => lines.push_back(s.clone()),
            ScriptItem::Timed { at, text } => timed.push((*at, text.clone())),
        }
    }
    timed.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut timed: VecDeque<(f64, String)> = timed.into();

    let mut eng = Engine::new(res, cfg.clone(), route.start);
    let mut confirmed: Option<String> = None;
    let mut rounds = 0;
    let mut arrived_at: Option<f64> = None;
    let say = |eng: &mut Engine, text: &str, confirmed: &mut Option<String>, rounds: &mut u32| {
        let turn = eng.utterance(text);
        for fx in &turn.effects {
            if let Effect::DispatchGoal { landmark, rounds: r, .. } = fx {
                *confirmed = Some(landmark.clone());
                *rounds = *r;
            }
        }
    };

    let end = loop {
        if eng.state.step >= cfg.max_steps {
            break TrialEnd::Timeout;
        }
        while timed.front().is_some_and(|(at, _)| *at <= eng.state.time + 1e-9) {
            let (_, text) = timed.pop_front().expect("checked");
            say(&mut eng, &text, &mut confirmed, &mut rounds);
        }
        match eng.mode() {
            DialogueMode::Navigating | DialogueMode::Paused => {
                if eng.tick().is_some() {
                    arrived_at = Some(eng.state.time);
                    break TrialEnd::Arrived;
                }
            }
            DialogueMode::AwaitingConfirmation if opts.auto_confirm => {
                let yes = eng.session.pending_landmark.as_deref() == Some(route.goal_landmark.as_str());
                say(&mut eng, if yes { "yes" } else { "no" }, &mut confirmed, &mut rounds);
            }
            _ => {
                if let Some(text) = lines.pop_front() {
                    say(&mut eng, &text, &mut confirmed, &mut rounds);
                } else if !timed.is_empty() {
                    eng.tick();
                } else {
                    break TrialEnd::ScriptExhausted;
                }
            }
        }
        if eng.unreachable {
            break TrialEnd::Unreachable;
        }
    };

    if confirmed.is_none() {
        rounds = eng.session.rounds_for_current_goal;
    }
    let lr_success = confirmed.as_deref() == Some(route.goal_landmark.as_str());
    let arrived = end == TrialEnd::Arrived;
    let traversal_time = match (arrived_at, eng.dispatched_at) {
        (Some(a), Some(d)) => a - d,
        _ => 0.0,
    };
    let final_distance = confirmed
        .as_ref()
        .and_then(|id| eng.res.scene.landmark(id))
        .map(|l| l.pose.position().distance(eng.state.robot.position()))
        .unwrap_or_else(|| goal_pose.position().distance(eng.state.robot.position()));
    let metrics = TrialMetrics {
        lr_success,
        nav_success: arrived && lr_success,
        traversal_time,
        dialogue_rounds: rounds,
        robot_collisions: eng.counters.robot_collisions,
        user_collisions: eng.counters.user_collisions,
        confirmed_landmark: confirmed,
        final_distance,
        steps: eng.state.step,
        end,
    };
    Ok(TrialOutcome { metrics, transcript: eng.session.transcript.clone(), log: eng.log.clone() })
}
