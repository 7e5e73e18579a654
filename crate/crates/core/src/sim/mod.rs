//! Fixed-timestep simulation: unicycle robot, tethered user, torso sensing, planning and
//! collision bookkeeping.

mod trial;

use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dialogue::{DialogueDeps, DialogueMode, Effect, SessionState, Templates, TranscriptEntry, Turn};
use crate::grounding::Grounder;
use crate::nlu::NluModel;
use crate::perception::{DescriptionConfig, DetectorNoise};
use crate::planner::{
    dwa_step, integrate, plan_cells, DwaConfig, Path, PlanError, VelocityCommand, GOAL_TOLERANCE, INFLATION_MARGIN,
    LOOKAHEAD,
};
use crate::user_pose::{
    estimate_user_pose, rectangle, synthesize_torso, user_footprint_polygon, DEFAULT_HALF_DEPTH, DEFAULT_HALF_WIDTH,
};
use crate::world::{inflate_grid, transform_to_frame, CollisionMap, OccupancyGrid, Point2, Pose2D, Scene};

pub use trial::{run_trial, ScriptItem, TrialEnd, TrialError, TrialMetrics, TrialOptions, TrialOutcome};

/// Rear torso camera in the robot frame: 0.2 m behind the centre, looking backwards.
/// Inflation of the comfort grid: user half-width plus a margin on top of the robot disc.
pub const COMFORT_INFLATION: f64 = 0.6;
/// How far (m) the path may go to reach the comfort grid at either end.
pub const COMFORT_REACH: f64 = 1.0;
/// A comfort path is used unless it is this many times longer than the tight one (plus 1 m).
pub const COMFORT_DETOUR: f64 = 1.5;

/// Ticks of a zero command while navigating before the stall breaker kicks in.
const STALL_TICKS: u32 = 10;
const SHRINK_STEP: f64 = 0.025;
const SHRINK_STEPS: usize = 8;

pub const CAMERA_IN_ROBOT: Pose2D = Pose2D { x: -0.2, y: 0.0, theta: FRAC_PI_2 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorsoSensor {
    pub half_width: f64,
    pub half_depth: f64,
    pub pixel_ratio: f64,
    pub n_cols: usize,
    pub noise_sd: f64,
}

impl Default for TorsoSensor {
    fn default() -> Self {
        Self {
            half_width: DEFAULT_HALF_WIDTH,
            half_depth: DEFAULT_HALF_DEPTH,
            pixel_ratio: 0.005,
            n_cols: 64,
            noise_sd: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dt: f64,
    pub max_steps: u64,
    pub seed: u64,
    /// Distance from the robot centre back to the user's centre.
    pub handle_offset: f64,
    pub user_lag: f64,
    pub camera_fov: f64,
    pub camera_range: f64,
    /// Feed the estimated user rectangle to the local planner.
    pub user_polygon: bool,
    /// Safety margin added around the estimated user rectangle (the real user lags the rigid model).
    pub user_margin: f64,
    pub torso: TorsoSensor,
    pub dwa: DwaConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            max_steps: 3000,
            seed: 7,
            handle_offset: 0.6,
            user_lag: 0.3,
            camera_fov: FRAC_PI_2,
            camera_range: 4.0,
            user_polygon: true,
            user_margin: 0.1,
            torso: TorsoSensor::default(),
            dwa: DwaConfig::default(),
        }
    }
}

impl SimConfig {
    /// Number of steps the user trails the robot by.
    pub fn lag_steps(&self) -> usize {
        (self.user_lag / self.dt).round().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub robot: Pose2D,
    pub robot_vel: VelocityCommand,
    pub user: Pose2D,
    pub time: f64,
    pub step: u64,
    /// Recent robot poses, oldest first; the user follows the oldest.
    pub history: VecDeque<Pose2D>,
}

fn user_behind(robot: &Pose2D, offset: f64) -> Pose2D {
    robot.compose(&Pose2D::new(-offset, 0.0, 0.0))
}

impl SimState {
    pub fn new(robot: Pose2D, cfg: &SimConfig) -> Self {
        let history = std::iter::repeat_n(robot, cfg.lag_steps() + 1).collect();
        Self { robot, robot_vel: VelocityCommand::STOP, user: user_behind(&robot, cfg.handle_offset), time: 0.0, step: 0, history }
    }

    /// The robot pose the user currently follows.
    pub fn lagged_robot(&self) -> Pose2D {
        *self.history.front().unwrap_or(&self.robot)
    }
}

/// Exact unicycle update; the user trails the robot pose from `user_lag` ago by `handle_offset`.
pub fn step(state: &SimState, cmd: VelocityCommand, cfg: &SimConfig) -> SimState {
    let robot = integrate(&state.robot, cmd, cfg.dt);
    let mut history = state.history.clone();
    history.push_back(robot);
    while history.len() > cfg.lag_steps() + 1 {
        history.pop_front();
    }
    let lagged = *history.front().expect("history is never empty");
    let step = state.step + 1;
    SimState {
        robot,
        robot_vel: cmd,
        user: user_behind(&lagged, cfg.handle_offset),
        time: step as f64 * cfg.dt,
        step,
        history,
    }
}

/// The user's body rectangle in world coordinates (width across the shoulders).
pub fn user_rectangle(user: &Pose2D, torso: &TorsoSensor) -> [Point2; 4] {
    let body = Pose2D::new(user.x, user.y, user.theta + FRAC_PI_2);
    rectangle(&body, torso.half_width, torso.half_depth)
}

/// Estimated user rectangle in the robot frame, from a synthetic torso strip seen by the rear camera.
pub fn sense_user_polygon(robot: &Pose2D, user: &Pose2D, torso: &TorsoSensor, seed: u64) -> Option<[Point2; 4]> {
    let camera = robot.compose(&CAMERA_IN_ROBOT);
    let body = Pose2D::new(user.x, user.y, user.theta + FRAC_PI_2);
    let in_cam = transform_to_frame(&body, &camera);
    let obs = synthesize_torso(&in_cam, torso.half_width, torso.pixel_ratio, torso.n_cols, torso.noise_sd, seed);
    let est = estimate_user_pose(&obs, torso.half_width, torso.half_depth).ok()?;
    Some(user_footprint_polygon(&est, &CAMERA_IN_ROBOT.inverse()))
}

/// Everything immutable a session needs: the scene, its planning/collision maps and the models.
pub struct Resources {
    pub scene: Scene,
    pub plan_grid: OccupancyGrid,
    /// Wider inflation used first so paths keep room for the user beside the robot.
    pub comfort_grid: OccupancyGrid,
    pub collision: CollisionMap,
    pub nlu: NluModel,
    pub templates: Templates,
    pub grounder: Grounder,
}

impl Resources {
    pub fn new(scene: Scene, nlu: NluModel, templates: Templates, grounder: Grounder, robot_radius: f64) -> Self {
        let plan_grid = inflate_grid(&scene.grid, robot_radius + INFLATION_MARGIN);
        let comfort_grid = inflate_grid(&scene.grid, COMFORT_INFLATION);
        let collision = CollisionMap::new(scene.grid.clone());
        Self { scene, plan_grid, comfort_grid, collision, nlu, templates, grounder }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub robot: Pose2D,
    pub user: Pose2D,
    pub cmd: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Counters {
    pub robot_collisions: u32,
    pub user_collisions: u32,
    pub recoveries: u32,
    pub arrivals: u32,
}

/// One live session: dialogue, planner and simulator advanced together.
pub struct Engine {
    pub res: Arc<Resources>,
    pub cfg: SimConfig,
    pub state: SimState,
    pub session: SessionState,
    pub path: Option<Path>,
    progress: usize,
    goal: Option<Pose2D>,
    pub counters: Counters,
    robot_hit: bool,
    user_hit: bool,
    stalled: u32,
    pub log: Vec<StepRecord>,
    /// Estimated user polygon (robot frame) used at the last tick.
    pub user_polygon: Option<[Point2; 4]>,
    pub dispatched_at: Option<f64>,
    pub last_arrival: Option<(String, f64)>,
    /// Set when a dispatched goal could not be planned to.
    pub unreachable: bool,
}

impl Engine {
    pub fn new(res: Arc<Resources>, cfg: SimConfig, start: Pose2D) -> Self {
        let state = SimState::new(start, &cfg);
        let mut session = SessionState::new();
        session.goals.omega_reference = cfg.dwa.omega_max;
        session.goals.v_reference = cfg.dwa.v_max;
        Self {
            res,
            state,
            session,
            path: None,
            progress: 0,
            goal: None,
            counters: Counters::default(),
            robot_hit: false,
            user_hit: false,
            stalled: 0,
            log: Vec::new(),
            user_polygon: None,
            dispatched_at: None,
            last_arrival: None,
            unreachable: false,
            cfg,
        }
    }

    pub fn mode(&self) -> DialogueMode {
        self.session.mode
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.session.transcript
    }

    pub fn goal(&self) -> Option<Pose2D> {
        self.goal
    }

    /// Remaining global path from the current progress point.
    pub fn remaining_path(&self) -> Vec<Point2> {
        self.path.as_ref().map_or_else(Vec::new, |p| p.waypoints[self.progress.min(p.waypoints.len())..].to_vec())
    }

    pub fn utterance(&mut self, text: &str) -> Turn {
        let res = Arc::clone(&self.res);
        let camera = self.state.robot;
        let deps = DialogueDeps {
            nlu: &res.nlu,
            grounder: &res.grounder,
            landmarks: &res.scene.landmarks,
            objects: &res.scene.objects,
            templates: &res.templates,
            camera,
            camera_fov: self.cfg.camera_fov,
            camera_range: self.cfg.camera_range,
            detector: DetectorNoise { fov: self.cfg.camera_fov, ..DetectorNoise::default() },
            description: DescriptionConfig::default(),
            seed: self.cfg.seed,
        };
        let mut turn = self.session.handle_utterance(text, self.state.time, &deps);
        let extra = self.apply_effects(&turn.effects);
        if let Some(msg) = extra {
            turn.reply = if turn.reply.is_empty() { msg } else { format!("{} {msg}", turn.reply) };
            turn.mode = self.session.mode;
        }
        turn
    }

    fn apply_effects(&mut self, effects: &[Effect]) -> Option<String> {
        for fx in effects {
            match fx {
                Effect::DispatchGoal { pose, .. } => {
                    self.dispatched_at = Some(self.state.time);
                    if self.start_goal(*pose).is_err() {
                        return Some(self.unreachable());
                    }
                }
                Effect::ResumeGoal { pose } => {
                    if self.start_goal(*pose).is_err() {
                        return Some(self.unreachable());
                    }
                }
                Effect::CancelGoal => self.clear_goal(),
                Effect::PauseGoal => {}
                Effect::SetSpeed { v_limit, omega_limit } => {
                    self.cfg.dwa.v_max = *v_limit;
                    self.cfg.dwa.omega_max = *omega_limit;
                }
            }
        }
        None
    }

    fn unreachable(&mut self) -> String {
        self.clear_goal();
        self.unreachable = true;
        let t = self.state.time;
        self.session.abort_navigation(t, &self.res.templates)
    }

    fn clear_goal(&mut self) {
        self.goal = None;
        self.path = None;
        self.progress = 0;
    }

    fn start_goal(&mut self, goal: Pose2D) -> Result<(), PlanError> {
        let path = route_path(&self.res, self.state.robot.position(), goal.position())?;
        self.path = Some(path);
        self.progress = 0;
        self.goal = Some(goal);
        Ok(())
    }

    fn moving(&self) -> bool {
        self.session.mode == DialogueMode::Navigating && self.goal.is_some()
    }

    pub fn at_goal(&self) -> bool {
        self.goal.is_some_and(|g| g.position().distance(self.state.robot.position()) <= GOAL_TOLERANCE)
    }

    /// One simulation step. Returns the arrival announcement when the goal is reached.
    pub fn tick(&mut self) -> Option<String> {
        if self.moving() && self.at_goal() {
            return Some(self.arrive());
        }
        let seed = self.cfg.seed ^ self.state.step.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        self.user_polygon = sense_user_polygon(&self.state.robot, &self.state.user, &self.cfg.torso, seed);
        let cmd = if self.moving() {
            let p = self.state.robot.position();
            let path = self.path.as_ref().expect("moving implies a path");
            self.progress = path.progress_index(self.progress, p, 30);
            let last = path.carrot_index(self.progress, p, LOOKAHEAD);
            let map = &self.res.collision;
            let r = self.cfg.dwa.robot_radius;
            let k = (self.progress..=last)
                .rev()
                .find(|&k| segment_clear(map, p, path.waypoints[k], r))
                .unwrap_or(self.progress);
            let carrot = path.waypoints[k];
            let local = if carrot.distance(p) < 1e-9 { self.goal.expect("goal").position() } else { carrot };
            let robot = self.state.robot;
            let clear = |q: &[Point2; 4]| !map.polygon_hits(&q.map(|v| robot.apply(v)));
            // Drop the safety margin if it already touches a wall. If even the bare estimate does,
            // use the largest shrunken copy that is clear so the user can still be steered out.
            let margin = self.cfg.user_margin;
            let poly = self.user_polygon.filter(|_| self.cfg.user_polygon).and_then(|q| {
                [grow_polygon(&q, margin), q]
                    .into_iter()
                    .chain((1..=SHRINK_STEPS).map(|k| grow_polygon(&q, -(k as f64) * SHRINK_STEP)))
                    .find(|q| clear(q))
            });
            let poly = poly.as_ref().map(|p| &p[..]);
            let robot = &self.state.robot;
            let mut d = dwa_step(robot, self.state.robot_vel, local, map, poly, &self.cfg.dwa);
            let idle = !d.recovery && d.cmd.v.abs() < 1e-3 && d.cmd.omega.abs() < 1e-3;
            self.stalled = if idle { self.stalled + 1 } else { 0 };
            if self.stalled >= STALL_TICKS {
                // Standing still is the local optimum; drop the clearance preference so that any
                // admissible motion wins.
                let mut cfg = self.cfg.dwa.clone();
                cfg.weights.velocity += cfg.weights.clearance;
                cfg.weights.clearance = 0.0;
                d = dwa_step(robot, self.state.robot_vel, local, map, poly, &cfg);
                self.counters.recoveries += 1;
            }
            if d.recovery {
                self.counters.recoveries += 1;
            }
            d.cmd
        } else {
            let v = (self.state.robot_vel.v - self.cfg.dwa.accel_v * self.cfg.dt).max(0.0);
            VelocityCommand::new(v, 0.0)
        };
        self.state = step(&self.state, cmd, &self.cfg);
        self.count_collisions();
        self.log.push(StepRecord {
            t: self.state.time,
            robot: self.state.robot,
            user: self.state.user,
            cmd: [cmd.v, cmd.omega],
        });
        None
    }

    fn count_collisions(&mut self) {
        let map = &self.res.collision;
        let r = map.disc_hits(self.state.robot.position(), self.cfg.dwa.robot_radius);
        let u = map.polygon_hits(&user_rectangle(&self.state.user, &self.cfg.torso));
        if r && !self.robot_hit {
            self.counters.robot_collisions += 1;
        }
        if u && !self.user_hit {
            self.counters.user_collisions += 1;
        }
        self.robot_hit = r;
        self.user_hit = u;
    }

    fn arrive(&mut self) -> String {
        let landmark = self.session.active_landmark.clone().unwrap_or_default();
        let t = self.state.time;
        let reply = self.session.notify_arrival(t, &self.res.templates).expect("arrival while navigating");
        self.clear_goal();
        self.counters.arrivals += 1;
        self.last_arrival = Some((landmark, t));
        self.state.robot_vel = VelocityCommand::STOP;
        reply
    }

    /// Step-log as JSON lines.
    pub fn log_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.log {
            s.push_str(&serde_json::to_string(r).expect("step record serializes"));
            s.push('\n');
        }
        s
    }
}

/// True if a disc of radius `r` can slide from `a` to `b` without touching an occupied cell.
pub fn segment_clear(map: &CollisionMap, a: Point2, b: Point2, r: f64) -> bool {
    let step = map.grid().resolution / 2.0;
    let n = (a.distance(b) / step).ceil().max(1.0) as usize;
    (1..=n).all(|k| {
        let t = k as f64 / n as f64;
        !map.disc_hits(a + (b - a) * t, r)
    })
}

/// Moves every vertex of a rectangle `margin` further from its centre along the rectangle's own
/// axes, so it grows by `margin` on every side (a negative margin shrinks it).
pub fn grow_polygon(poly: &[Point2; 4], margin: f64) -> [Point2; 4] {
    let c = (poly[0] + poly[2]) * 0.5;
    let u = poly[0] - poly[1];
    let v = poly[1] - poly[2];
    let (un, vn) = (u.norm(), v.norm());
    if un < 1e-12 || vn < 1e-12 {
        return *poly;
    }
    let (u, v) = (u * (1.0 / un), v * (1.0 / vn));
    poly.map(|p| {
        let d = p - c;
        let a = d.dot(u);
        let b = d.dot(v);
        c + u * ((a.abs() + margin).max(0.0) * a.signum()) + v * ((b.abs() + margin).max(0.0) * b.signum())
    })
}

/// Plans through the comfort grid, with short tight-grid legs to reach it from `s` and to leave it
/// for `t`. None if either end is far from the comfort grid or it does not connect them.
/// The global path the robot follows from `from` to `goal`: the comfort path unless it is a
/// long detour, else the plain shortest path.
pub fn route_path(res: &Resources, from: Point2, goal: Point2) -> Result<Path, PlanError> {
    let g = &res.plan_grid;
    let s = nearest_free(g, g.world_to_cell(from)).ok_or(PlanError::StartOccupied)?;
    let t = g.world_to_cell(goal);
    if g.occupied(t.0, t.1) {
        return Err(PlanError::GoalOccupied);
    }
    let tight = plan_cells(g, s, t)?;
    Ok(match comfort_path(res, s, t) {
        Some(c) if c.cost <= COMFORT_DETOUR * tight.cost + 1.0 => c,
        _ => tight,
    })
}

fn comfort_path(res: &Resources, s: (i64, i64), t: (i64, i64)) -> Option<Path> {
    let (tight, wide) = (&res.plan_grid, &res.comfort_grid);
    let reach = (COMFORT_REACH / wide.resolution).ceil() as i64;
    let sw = nearest_free_within(wide, s, reach)?;
    let tw = nearest_free_within(wide, t, reach)?;
    let legs = [plan_cells(tight, s, sw).ok()?, plan_cells(wide, sw, tw).ok()?, plan_cells(tight, tw, t).ok()?];
    if legs[0].cost > 2.0 * COMFORT_REACH || legs[2].cost > 2.0 * COMFORT_REACH {
        return None;
    }
    Some(join_paths(&legs))
}

fn join_paths(parts: &[Path]) -> Path {
    let mut out = Path { cells: Vec::new(), waypoints: Vec::new(), cost: 0.0, straight_steps: 0, diagonal_steps: 0 };
    for p in parts {
        let skip = usize::from(out.cells.last().is_some() && out.cells.last() == p.cells.first());
        out.cells.extend_from_slice(&p.cells[skip..]);
        out.waypoints.extend_from_slice(&p.waypoints[skip..]);
        out.cost += p.cost;
        out.straight_steps += p.straight_steps;
        out.diagonal_steps += p.diagonal_steps;
    }
    out
}

/// Closest free cell by breadth-first search (the start may sit inside the inflation band).
fn nearest_free(g: &OccupancyGrid, c: (i64, i64)) -> Option<(i64, i64)> {
    nearest_free_within(g, c, i64::MAX)
}

/// Breadth-first search for the closest free cell no more than `limit` cells away (Chebyshev).
fn nearest_free_within(g: &OccupancyGrid, c: (i64, i64), limit: i64) -> Option<(i64, i64)> {
    if !g.in_bounds(c.0, c.1) {
        return None;
    }
    if !g.occupied(c.0, c.1) {
        return Some(c);
    }
    let mut seen = vec![false; g.width * g.height];
    let mut queue = VecDeque::from([c]);
    seen[g.index(c.0 as usize, c.1 as usize)] = true;
    while let Some((i, j)) = queue.pop_front() {
        for (di, dj) in crate::planner::MOVES {
            let (ni, nj) = (i + di, j + dj);
            if !g.in_bounds(ni, nj)
                || seen[g.index(ni as usize, nj as usize)]
                || (ni - c.0).abs().max((nj - c.1).abs()) > limit
            {
                continue;
            }
            if !g.occupied(ni, nj) {
                return Some((ni, nj));
            }
            seen[g.index(ni as usize, nj as usize)] = true;
            queue.push_back((ni, nj));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn straight_step() {
        let cfg = SimConfig::default();
        let s = step(&SimState::new(Pose2D::identity(), &cfg), VelocityCommand::new(1.0, 0.0), &cfg);
        assert!((s.robot.x - 0.1).abs() < 1e-12 && s.robot.y.abs() < 1e-12);
        assert!((s.time - 0.1).abs() < 1e-12);
    }

    #[test]
    fn pure_rotation() {
        let cfg = SimConfig { dt: 1.0, ..SimConfig::default() };
        let s = step(&SimState::new(Pose2D::identity(), &cfg), VelocityCommand::new(0.0, PI), &cfg);
        assert!((s.robot.theta.abs() - PI).abs() < 1e-12);
        assert!(s.robot.x.abs() < 1e-12 && s.robot.y.abs() < 1e-12);
    }

    #[test]
    fn quarter_arc() {
        let cfg = SimConfig { dt: FRAC_PI_2, ..SimConfig::default() };
        let s = step(&SimState::new(Pose2D::identity(), &cfg), VelocityCommand::new(1.0, 1.0), &cfg);
        assert!((s.robot.x - 1.0).abs() < 1e-12 && (s.robot.y - 1.0).abs() < 1e-12);
        assert!((s.robot.theta - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn user_trails_the_lagged_pose() {
        let cfg = SimConfig::default();
        let mut s = SimState::new(Pose2D::identity(), &cfg);
        for _ in 0..20 {
            s = step(&s, VelocityCommand::new(0.4, 0.3), &cfg);
            let lag = s.lagged_robot();
            let expect = lag.apply(Point2::new(-cfg.handle_offset, 0.0));
            assert!(s.user.position().distance(expect) < 1e-12);
            assert!((lag.position().distance(s.user.position()) - cfg.handle_offset).abs() < 1e-12);
        }
        // Three-step lag at dt 0.1.
        assert_eq!(s.history.len(), 4);
    }

    #[test]
    fn sensed_polygon_matches_truth_without_noise() {
        let torso = TorsoSensor { noise_sd: 0.0, ..TorsoSensor::default() };
        let robot = Pose2D::new(2.0, 1.0, 0.4);
        let user = robot.compose(&Pose2D::new(-0.6, 0.05, 0.2));
        let poly = sense_user_polygon(&robot, &user, &torso, 1).unwrap();
        let truth = user_rectangle(&user, &torso);
        for (a, b) in poly.iter().zip(truth) {
            assert!(robot.apply(*a).distance(b) < 1e-9, "{a:?} {b:?}");
        }
    }
}
