use std::f64::consts::PI;
use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

/// Wraps an angle into (−π, π].
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn rotate(self, theta: f64) -> Point2 {
        let (s, c) = theta.sin_cos();
        Point2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

/// Planar pose. Serialized as `[x, y, theta]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: normalize_angle(theta),
        }
    }

    pub const fn identity() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            theta: 0.0,
        }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// `self ⊕ other`: `other` is expressed in the frame `self`; the result is in the parent frame.
    pub fn compose(&self, other: &Pose2D) -> Pose2D {
        let p = self.position() + other.position().rotate(self.theta);
        Pose2D::new(p.x, p.y, self.theta + other.theta)
    }

    pub fn inverse(&self) -> Pose2D {
        let p = (self.position() * -1.0).rotate(-self.theta);
        Pose2D::new(p.x, p.y, -self.theta)
    }

    /// Maps a point given in this frame into the parent frame.
    pub fn apply(&self, p: Point2) -> Point2 {
        self.position() + p.rotate(self.theta)
    }

    pub fn distance(&self, o: &Pose2D) -> f64 {
        self.position().distance(o.position())
    }
}

/// Expresses `p` (given in the parent frame) in the coordinates of `frame`.
pub fn transform_to_frame(p: &Pose2D, frame: &Pose2D) -> Pose2D {
    let d = (p.position() - frame.position()).rotate(-frame.theta);
    Pose2D::new(d.x, d.y, p.theta - frame.theta)
}

/// Inverse of [`transform_to_frame`].
pub fn transform_from_frame(p: &Pose2D, frame: &Pose2D) -> Pose2D {
    frame.compose(p)
}

pub fn point_to_frame(p: Point2, frame: &Pose2D) -> Point2 {
    (p - frame.position()).rotate(-frame.theta)
}

impl Serialize for Pose2D {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y, self.theta].serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose2D {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y, theta] = <[f64; 3]>::deserialize(d)?;
        Ok(Pose2D::new(x, y, theta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn normalize_keeps_pi_and_wraps_minus_pi() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-9);
        assert!((normalize_angle(-FRAC_PI_2) + FRAC_PI_2).abs() < 1e-12);
        assert_eq!(normalize_angle(0.0), 0.0);
    }

    #[test]
    fn identity_frame_is_noop() {
        let p = Pose2D::new(1.0, 0.0, 0.0);
        assert_eq!(transform_to_frame(&p, &Pose2D::identity()), p);
    }

    #[test]
    fn quarter_turn_frame_matches_rotation_matrix() {
        // Oracle: R(-φ) = [[cos φ, sin φ], [-sin φ, cos φ]] applied to (p - t).
        let p = Pose2D::new(1.0, 0.0, 0.0);
        let f = Pose2D::new(0.0, 0.0, FRAC_PI_2);
        let (c, s) = (FRAC_PI_2.cos(), FRAC_PI_2.sin());
        let expect = (c * 1.0 + s * 0.0, -s * 1.0 + c * 0.0);
        let got = transform_to_frame(&p, &f);
        assert!((got.x - expect.0).abs() < 1e-12 && (got.x - 0.0).abs() < 1e-12);
        assert!((got.y - expect.1).abs() < 1e-12 && (got.y + 1.0).abs() < 1e-12);
        assert!((got.theta + FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn pose_serializes_as_array() {
        let p = Pose2D::new(1.5, -2.0, 0.25);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, "[1.5,-2.0,0.25]");
        let back: Pose2D = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
