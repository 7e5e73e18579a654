//! Core algorithms for a dialogue-driven indoor guide robot.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dialogue;
pub mod eval;
pub mod grounding;
pub mod nlu;
pub mod perception;
pub mod planner;
pub mod sim;
pub mod user_pose;
pub mod world;
