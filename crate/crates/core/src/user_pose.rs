//! Guided-user pose from a segmented torso depth strip.
//!
//! Camera frame convention: `x` is lateral (image columns), `y` is depth. A facing angle of 0
//! means the torso is fronto-parallel to the image plane.

use std::f64::consts::FRAC_PI_3;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::world::{transform_to_frame, Point2, Pose2D};

pub const DEFAULT_HALF_WIDTH: f64 = 0.3;
pub const DEFAULT_HALF_DEPTH: f64 = 0.25;
pub const DEFAULT_CENTER_PIXEL: f64 = 320.0;
pub const MAX_FACING: f64 = FRAC_PI_3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorsoObservation {
    /// `(pixel_u, depth)` per torso column.
    pub columns: Vec<(f64, f64)>,
    pub center_pixel: f64,
    /// Metres per pixel at the torso.
    pub pixel_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserPoseEstimate {
    pub pose: Pose2D,
    pub rectangle: [Point2; 4],
    pub half_width: f64,
    pub half_depth: f64,
    /// Set when the fitted facing angle exceeded ±π/3 and was clamped.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PoseError {
    #[error("torso observation needs at least two columns with positive depth and ratio")]
    InvalidObservation,
    #[error("all torso columns share one pixel coordinate")]
    DegenerateFit,
}

/// Samples the front face of the user's box at `true_user` (camera frame).
pub fn synthesize_torso(
    true_user: &Pose2D,
    half_width: f64,
    pixel_ratio: f64,
    n_cols: usize,
    noise_sd: f64,
    seed: u64,
) -> TorsoObservation {
    let n = n_cols.max(2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd.max(0.0)).expect("finite sd");
    let (s, c) = true_user.theta.sin_cos();
    let columns = (0..n)
        .map(|k| {
            let along = -half_width + 2.0 * half_width * k as f64 / (n - 1) as f64;
            let x = true_user.x + along * c;
            let y = true_user.y + along * s;
            let eps = if noise_sd > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            (DEFAULT_CENTER_PIXEL + x / pixel_ratio, y + eps)
        })
        .collect();
    TorsoObservation {
        columns,
        center_pixel: DEFAULT_CENTER_PIXEL,
        pixel_ratio,
    }
}

/// Least-squares fit of depth against lateral offset; facing = atan(slope), position = column means.
pub fn estimate_user_pose(
    obs: &TorsoObservation,
    half_width: f64,
    half_depth: f64,
) -> Result<UserPoseEstimate, PoseError> {
    if obs.columns.len() < 2 || !(obs.pixel_ratio > 0.0) || obs.columns.iter().any(|c| !(c.1 > 0.0)) {
        return Err(PoseError::InvalidObservation);
    }
    let n = obs.columns.len() as f64;
    let xs: Vec<f64> = obs
        .columns
        .iter()
        .map(|&(u, _)| (u - obs.center_pixel) * obs.pixel_ratio)
        .collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = obs.columns.iter().map(|c| c.1).sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 1e-18 {
        return Err(PoseError::DegenerateFit);
    }
    let sxy: f64 = xs.iter().zip(&obs.columns).map(|(x, c)| (x - mx) * (c.1 - my)).sum();
    let mut theta = (sxy / sxx).atan();
    let clamped = theta.abs() > MAX_FACING;
    if clamped {
        theta = theta.signum() * MAX_FACING;
    }
    let pose = Pose2D::new(mx, my, theta);
    Ok(UserPoseEstimate {
        pose,
        rectangle: rectangle(&pose, half_width, half_depth),
        half_width,
        half_depth,
        clamped,
    })
}

/// Corners `c + R(θ)(±hw, ±hd)`, counter-clockwise starting at `(+hw, +hd)`.
pub fn rectangle(pose: &Pose2D, half_width: f64, half_depth: f64) -> [Point2; 4] {
    [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
        .map(|(a, b)| pose.apply(Point2::new(a * half_width, b * half_depth)))
}

/// The estimate's rectangle expressed in the robot frame. `robot_in_camera` is the robot's pose
/// in camera coordinates.
pub fn user_footprint_polygon(est: &UserPoseEstimate, robot_in_camera: &Pose2D) -> [Point2; 4] {
    est.rectangle.map(|c| transform_to_frame(&Pose2D::new(c.x, c.y, 0.0), robot_in_camera).position())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn fronto_parallel_has_constant_depth() {
        let obs = synthesize_torso(&Pose2D::new(0.0, 2.0, 0.0), 0.3, 0.005, 20, 0.0, 1);
        assert!(obs.columns.iter().all(|c| (c.1 - 2.0).abs() < 1e-12));
    }

    #[test]
    fn rotated_45_has_unit_slope() {
        let obs = synthesize_torso(&Pose2D::new(0.0, 2.0, FRAC_PI_4), 0.3, 0.005, 11, 0.0, 1);
        // Plane oracle: depth − 2 equals the lateral offset for a 45° face.
        for &(u, d) in &obs.columns {
            let x = (u - obs.center_pixel) * obs.pixel_ratio;
            assert!((d - 2.0 - x).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_observation() {
        let p = Pose2D::new(0.1, 1.2, 0.2);
        assert_eq!(synthesize_torso(&p, 0.3, 0.004, 30, 0.01, 9), synthesize_torso(&p, 0.3, 0.004, 30, 0.01, 9));
        assert_ne!(synthesize_torso(&p, 0.3, 0.004, 30, 0.01, 9), synthesize_torso(&p, 0.3, 0.004, 30, 0.01, 10));
    }

    #[test]
    fn constant_depth_centered_gives_origin_pose() {
        let obs = TorsoObservation {
            columns: (0..9).map(|k| (316.0 + k as f64, 2.0)).collect(),
            center_pixel: 320.0,
            pixel_ratio: 0.01,
        };
        let e = estimate_user_pose(&obs, 0.3, 0.25).unwrap();
        assert!(e.pose.x.abs() < 1e-12 && (e.pose.y - 2.0).abs() < 1e-12 && e.pose.theta.abs() < 1e-12);
        assert!(!e.clamped);
    }

    #[test]
    fn noise_free_round_trip() {
        let truth = Pose2D::new(0.3, 1.5, 0.4);
        let e = estimate_user_pose(&synthesize_torso(&truth, 0.3, 0.004, 40, 0.0, 3), 0.3, 0.25).unwrap();
        assert!(e.pose.distance(&truth) < 1e-6 && (e.pose.theta - truth.theta).abs() < 1e-6);
    }

    #[test]
    fn grazing_angle_is_clamped() {
        let e = estimate_user_pose(&synthesize_torso(&Pose2D::new(0.0, 2.0, 1.3), 0.3, 0.004, 40, 0.0, 3), 0.3, 0.25)
            .unwrap();
        assert!(e.clamped);
        assert!((e.pose.theta - MAX_FACING).abs() < 1e-12);
    }

    #[test]
    fn degenerate_and_invalid_inputs() {
        let same_u = TorsoObservation { columns: vec![(320.0, 1.0), (320.0, 1.2)], center_pixel: 320.0, pixel_ratio: 0.01 };
        assert_eq!(estimate_user_pose(&same_u, 0.3, 0.25), Err(PoseError::DegenerateFit));
        let one = TorsoObservation { columns: vec![(320.0, 1.0)], center_pixel: 320.0, pixel_ratio: 0.01 };
        assert_eq!(estimate_user_pose(&one, 0.3, 0.25), Err(PoseError::InvalidObservation));
        let neg = TorsoObservation { columns: vec![(320.0, 1.0), (321.0, -1.0)], center_pixel: 320.0, pixel_ratio: 0.01 };
        assert_eq!(estimate_user_pose(&neg, 0.3, 0.25), Err(PoseError::InvalidObservation));
    }

    fn estimate_at(pose: Pose2D, hw: f64, hd: f64) -> UserPoseEstimate {
        UserPoseEstimate { pose, rectangle: rectangle(&pose, hw, hd), half_width: hw, half_depth: hd, clamped: false }
    }

    fn sorted(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts
    }

    #[test]
    fn footprint_hand_geometry() {
        // Width runs along the torso face; a user whose face line lies along robot-x has θ = π/2.
        let est = estimate_at(Pose2D::new(-0.6, 0.0, FRAC_PI_2), 0.3, 0.2);
        let poly = user_footprint_polygon(&est, &Pose2D::identity());
        let got = sorted(poly.iter().map(|p| ((p.x * 1e9).round() / 1e9, (p.y * 1e9).round() / 1e9)).collect());
        assert_eq!(got, sorted(vec![(-0.4, 0.3), (-0.4, -0.3), (-0.8, 0.3), (-0.8, -0.3)]));
    }

    #[test]
    fn zero_box_collapses_to_center() {
        let est = estimate_at(Pose2D::new(-0.6, 0.1, 0.3), 0.0, 0.0);
        for p in user_footprint_polygon(&est, &Pose2D::identity()) {
            assert!((p.x + 0.6).abs() < 1e-12 && (p.y - 0.1).abs() < 1e-12);
        }
    }
}
