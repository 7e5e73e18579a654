use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::world::{normalize_angle, CollisionMap, Point2, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VelocityCommand {
    pub v: f64,
    pub omega: f64,
}

impl VelocityCommand {
    pub const STOP: VelocityCommand = VelocityCommand { v: 0.0, omega: 0.0 };

    pub fn new(v: f64, omega: f64) -> Self {
        Self { v, omega }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DwaWeights {
    pub heading: f64,
    pub clearance: f64,
    pub velocity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DwaConfig {
    /// Current translational limit (the goal manager rescales this).
    pub v_max: f64,
    pub omega_max: f64,
    pub accel_v: f64,
    pub accel_omega: f64,
    pub dt: f64,
    pub horizon: f64,
    pub samples_v: usize,
    pub samples_omega: usize,
    pub weights: DwaWeights,
    pub robot_radius: f64,
    /// Clearance above this counts as fully clear.
    pub clearance_cap: f64,
}

impl Default for DwaConfig {
    fn default() -> Self {
        Self {
            v_max: 0.4,
            omega_max: 1.0,
            accel_v: 0.5,
            accel_omega: 2.0,
            dt: 0.1,
            horizon: 1.5,
            samples_v: 7,
            samples_omega: 15,
            weights: DwaWeights { heading: 0.8, clearance: 0.1, velocity: 0.1 },
            robot_radius: 0.25,
            clearance_cap: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub v: (f64, f64),
    pub omega: (f64, f64),
}

impl Window {
    pub fn contains(&self, c: VelocityCommand) -> bool {
        let eps = 1e-12;
        c.v >= self.v.0 - eps && c.v <= self.v.1 + eps && c.omega >= self.omega.0 - eps && c.omega <= self.omega.1 + eps
    }
}

/// Velocities reachable within one control period; `v` never goes below zero.
pub fn dynamic_window(current: VelocityCommand, cfg: &DwaConfig) -> Window {
    let v_hi = cfg.v_max.min(current.v + cfg.accel_v * cfg.dt);
    let v_lo = (current.v - cfg.accel_v * cfg.dt).max(0.0);
    let w_hi = cfg.omega_max.min(current.omega + cfg.accel_omega * cfg.dt);
    let w_lo = (-cfg.omega_max).max(current.omega - cfg.accel_omega * cfg.dt);
    // After a speed-limit drop the limit may sit below what braking can reach; brake as hard as allowed.
    let (v_lo, v_hi) = if v_hi < v_lo { (v_lo, v_lo) } else { (v_lo, v_hi) };
    let (w_lo, w_hi) = if w_hi < w_lo { (w_lo, w_lo) } else { (w_lo, w_hi) };
    Window { v: (v_lo, v_hi), omega: (w_lo, w_hi) }
}

/// Exact unicycle update: an arc when `ω ≠ 0`, otherwise a straight segment.
pub fn integrate(p: &Pose2D, cmd: VelocityCommand, dt: f64) -> Pose2D {
    let th = p.theta;
    if cmd.omega.abs() < 1e-12 {
        Pose2D::new(p.x + cmd.v * dt * th.cos(), p.y + cmd.v * dt * th.sin(), th)
    } else {
        let r = cmd.v / cmd.omega;
        let th2 = th + cmd.omega * dt;
        Pose2D::new(p.x + r * (th2.sin() - th.sin()), p.y - r * (th2.cos() - th.cos()), th2)
    }
}

pub fn rollout(start: &Pose2D, cmd: VelocityCommand, cfg: &DwaConfig) -> Vec<Pose2D> {
    let steps = (cfg.horizon / cfg.dt).round().max(1.0) as usize;
    let mut out = Vec::with_capacity(steps);
    let mut p = *start;
    for _ in 0..steps {
        p = integrate(&p, cmd, cfg.dt);
        out.push(p);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrajectoryScore {
    Reject,
    Score(f64),
}

impl TrajectoryScore {
    pub fn value(self) -> Option<f64> {
        match self {
            TrajectoryScore::Reject => None,
            TrajectoryScore::Score(s) => Some(s),
        }
    }
}

/// True if the robot disc or the user polygon (robot frame, rigidly attached) hits an occupied cell at `pose`.
pub fn footprint_hits(pose: &Pose2D, map: &CollisionMap, user_poly: Option<&[Point2]>, robot_radius: f64) -> bool {
    if map.disc_hits(pose.position(), robot_radius) {
        return true;
    }
    match user_poly {
        Some(poly) if !poly.is_empty() => {
            let world: Vec<Point2> = poly.iter().map(|&c| pose.apply(c)).collect();
            map.polygon_hits(&world)
        }
        _ => false,
    }
}

/// Approximate free distance around the whole footprint: the disc edge and the user polygon outline
/// (vertices and edge midpoints), measured to the nearest occupied cell face.
pub fn footprint_clearance(pose: &Pose2D, map: &CollisionMap, user_poly: Option<&[Point2]>, robot_radius: f64) -> f64 {
    let half = map.grid().resolution / 2.0;
    let mut c = map.clearance(pose.position()) - robot_radius - half;
    if let Some(poly) = user_poly {
        for (k, &v) in poly.iter().enumerate() {
            let a = pose.apply(v);
            let b = pose.apply(poly[(k + 1) % poly.len()]);
            c = c.min(map.clearance(a) - half).min(map.clearance((a + b) * 0.5) - half);
        }
    }
    c.max(0.0)
}

pub fn score_trajectory(
    poses: &[Pose2D],
    cmd: VelocityCommand,
    goal: Point2,
    map: &CollisionMap,
    user_poly: Option<&[Point2]>,
    cfg: &DwaConfig,
) -> TrajectoryScore {
    let mut clearance = f64::INFINITY;
    for p in poses {
        if footprint_hits(p, map, user_poly, cfg.robot_radius) {
            return TrajectoryScore::Reject;
        }
        clearance = clearance.min(footprint_clearance(p, map, user_poly, cfg.robot_radius));
    }
    let Some(end) = poses.last() else {
        return TrajectoryScore::Reject;
    };
    let to_goal = goal - end.position();
    let heading = if to_goal.norm() < 1e-9 {
        1.0
    } else {
        1.0 - normalize_angle(to_goal.y.atan2(to_goal.x) - end.theta).abs() / PI
    };
    let clear = (clearance.min(cfg.clearance_cap) / cfg.clearance_cap).clamp(0.0, 1.0);
    let vel = if cfg.v_max > 0.0 { (cmd.v / cfg.v_max).clamp(0.0, 1.0) } else { 0.0 };
    let w = cfg.weights;
    TrajectoryScore::Score(w.heading * heading + w.clearance * clear + w.velocity * vel)
}

fn linspace(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |k| if n == 1 { lo } else { lo + (hi - lo) * k as f64 / (n - 1) as f64 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DwaDecision {
    pub cmd: VelocityCommand,
    pub recovery: bool,
    pub score: Option<f64>,
}

/// Best-scoring sample of the window (ties → lowest sample index); rotate-in-place recovery when
/// every sample is rejected.
pub fn dwa_step(
    robot: &Pose2D,
    current: VelocityCommand,
    local_goal: Point2,
    map: &CollisionMap,
    user_poly: Option<&[Point2]>,
    cfg: &DwaConfig,
) -> DwaDecision {
    let win = dynamic_window(current, cfg);
    let mut best: Option<(f64, VelocityCommand)> = None;
    for v in linspace(win.v.0, win.v.1, cfg.samples_v) {
        for w in linspace(win.omega.0, win.omega.1, cfg.samples_omega) {
            let cmd = VelocityCommand::new(v, w);
            let poses = rollout(robot, cmd, cfg);
            if let TrajectoryScore::Score(s) = score_trajectory(&poses, cmd, local_goal, map, user_poly, cfg) {
                if best.is_none_or(|(b, _)| s > b) {
                    best = Some((s, cmd));
                }
            }
        }
    }
    if let Some((s, cmd)) = best {
        return DwaDecision { cmd, recovery: false, score: Some(s) };
    }
    let d = local_goal - robot.position();
    let bearing = normalize_angle(d.y.atan2(d.x) - robot.theta);
    let dir = if bearing >= 0.0 { 1.0 } else { -1.0 };
    DwaDecision {
        cmd: VelocityCommand::new(win.v.0, (dir * cfg.omega_max).clamp(win.omega.0, win.omega.1)),
        recovery: true,
        score: None,
    }
}
