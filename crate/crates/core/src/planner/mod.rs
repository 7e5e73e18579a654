//! Global A*, DWA local planning with a user-aware footprint, and the goal manager.

mod astar;
mod dwa;
mod goal;

pub use astar::{neighbors, plan_cells, plan_global, Path, PlanError, StepCount, MOVES};
pub use dwa::{
    dwa_step, dynamic_window, footprint_clearance, footprint_hits, integrate, rollout, score_trajectory, DwaConfig, DwaDecision,
    DwaWeights, TrajectoryScore, VelocityCommand, Window,
};
pub use goal::{GoalError, GoalManager};

/// Arrival tolerance around a landmark pose, metres.
pub const GOAL_TOLERANCE: f64 = 0.3;
/// Carrot distance along the global path, metres.
pub const LOOKAHEAD: f64 = 1.0;
/// Extra margin added to the robot radius when inflating for A*.
pub const INFLATION_MARGIN: f64 = 0.05;
