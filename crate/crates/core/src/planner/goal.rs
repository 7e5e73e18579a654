use serde::{Deserialize, Serialize};

use crate::world::Pose2D;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GoalError {
    #[error("there is no active goal to pause")]
    NothingToPause,
    #[error("there is no stored goal to resume")]
    NothingToResume,
}

/// Goal lifecycle and speed limit. Speeds are integer steps above `v_floor` so repeated
/// adjustments never accumulate rounding error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalManager {
    pub active_goal: Option<Pose2D>,
    pub stored_goal: Option<Pose2D>,
    pub speed_level: u32,
    pub v_floor: f64,
    pub v_ceiling: f64,
    pub delta: f64,
    /// Angular limit at `v_reference`; scaled proportionally with the translational limit.
    pub omega_reference: f64,
    pub v_reference: f64,
}

impl Default for GoalManager {
    fn default() -> Self {
        Self::new(0.2, 0.6, 0.1, 0.4, 1.0)
    }
}

impl GoalManager {
    pub fn new(v_floor: f64, v_ceiling: f64, delta: f64, v_start: f64, omega_at_start: f64) -> Self {
        let mut g = Self {
            active_goal: None,
            stored_goal: None,
            speed_level: 0,
            v_floor,
            v_ceiling,
            delta,
            omega_reference: omega_at_start,
            v_reference: v_start,
        };
        g.speed_level = g.level_for(v_start);
        g
    }

    fn max_level(&self) -> u32 {
        ((self.v_ceiling - self.v_floor) / self.delta + 1e-9).floor() as u32
    }

    fn level_for(&self, v: f64) -> u32 {
        (((v - self.v_floor) / self.delta).round().max(0.0) as u32).min(self.max_level())
    }

    pub fn v_limit(&self) -> f64 {
        (self.v_floor + self.speed_level as f64 * self.delta).min(self.v_ceiling)
    }

    pub fn omega_limit(&self) -> f64 {
        self.omega_reference * self.v_limit() / self.v_reference
    }

    pub fn set_goal(&mut self, g: Pose2D) {
        self.active_goal = Some(g);
        self.stored_goal = None;
    }

    pub fn cancel(&mut self) {
        self.active_goal = None;
        self.stored_goal = None;
    }

    pub fn pause(&mut self) -> Result<(), GoalError> {
        let g = self.active_goal.take().ok_or(GoalError::NothingToPause)?;
        self.stored_goal = Some(g);
        Ok(())
    }

    pub fn resume(&mut self) -> Result<(), GoalError> {
        let g = self.stored_goal.take().ok_or(GoalError::NothingToResume)?;
        self.active_goal = Some(g);
        Ok(())
    }

    /// Moves the limit by `steps` increments, saturating at the bounds. Returns whether it changed.
    pub fn adjust_speed(&mut self, steps: i32) -> bool {
        let target = (self.speed_level as i64 + steps as i64).clamp(0, self.max_level() as i64) as u32;
        let changed = target != self.speed_level;
        self.speed_level = target;
        changed
    }

    pub fn at_ceiling(&self) -> bool {
        self.speed_level == self.max_level()
    }

    pub fn at_floor(&self) -> bool {
        self.speed_level == 0
    }
}
