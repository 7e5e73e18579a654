//! Wire types: the full session view and the per-batch frames pushed over the stream.

use serde::{Deserialize, Serialize};
use wayfinder_core::dialogue::{DialogueMode, Effect, TranscriptEntry};
use wayfinder_core::grounding::Method;
use wayfinder_core::sim::{user_rectangle, Engine};
use wayfinder_core::world::{Point2, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LiveMetrics {
    pub robot_collisions: u32,
    pub user_collisions: u32,
    pub recoveries: u32,
    pub arrivals: u32,
}

/// Everything that changes as the simulation runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimView {
    /// Frame sequence number; strictly increasing per session.
    pub seq: u64,
    /// Simulation step; never decreases.
    pub step: u64,
    pub time: f64,
    pub mode: DialogueMode,
    pub robot: Pose2D,
    pub user: Pose2D,
    /// `[v, omega]` of the last command.
    pub velocity: [f64; 2],
    pub v_limit: f64,
    pub goal: Option<String>,
    /// Remaining global path, world frame.
    pub path: Vec<Point2>,
    /// The user's footprint, world frame.
    pub user_rect: [Point2; 4],
    pub metrics: LiveMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionView {
    pub id: u64,
    pub scene: String,
    pub method: Method,
    pub seed: u64,
    #[serde(flatten)]
    pub sim: SimView,
    pub transcript: Vec<TranscriptEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    #[serde(flatten)]
    pub sim: SimView,
    /// Transcript entries added since the previous frame.
    pub transcript: Vec<TranscriptEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Frame {
    Snapshot(SessionView),
    Delta(Delta),
    Closed { reason: String },
}

impl SessionView {
    pub fn apply(&mut self, d: &Delta) {
        self.sim = d.sim.clone();
        self.transcript.extend(d.transcript.iter().cloned());
    }
}

pub fn sim_view(eng: &Engine, seq: u64) -> SimView {
    let c = &eng.counters;
    SimView {
        seq,
        step: eng.state.step,
        time: eng.state.time,
        mode: eng.mode(),
        robot: eng.state.robot,
        user: eng.state.user,
        velocity: [eng.state.robot_vel.v, eng.state.robot_vel.omega],
        v_limit: eng.cfg.dwa.v_max,
        goal: eng.session.active_landmark.clone(),
        path: eng.remaining_path(),
        user_rect: user_rectangle(&eng.state.user, &eng.cfg.torso),
        metrics: LiveMetrics {
            robot_collisions: c.robot_collisions,
            user_collisions: c.user_collisions,
            recoveries: c.recoveries,
            arrivals: c.arrivals,
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceReply {
    pub reply: String,
    pub mode: DialogueMode,
    pub effects: Vec<Effect>,
}
