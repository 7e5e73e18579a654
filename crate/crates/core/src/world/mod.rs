//! Map, scene objects, landmarks, frames and the scene file format.

mod collision;
mod grid;
mod pose;
mod scene;
mod visibility;

pub use collision::{convex_overlaps_cell, CollisionMap};
pub use grid::{dist_to_cell, inflate_grid, GridError, GridFile, OccupancyGrid};
pub use pose::{normalize_angle, point_to_frame, transform_from_frame, transform_to_frame, Point2, Pose2D};
pub use scene::{load_scene, save_scene, Landmark, Route, Scene, SceneError, SceneObject};
pub use visibility::{visible_from, visible_objects};
