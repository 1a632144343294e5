//! Planar poses and angle helpers.

use std::f64::consts::PI;

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Signed shortest angular difference `a - b`.
pub fn angle_diff(a: f64, b: f64) -> f64 {
    normalize_angle(a - b)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Planar robot pose `(x, y, θ)` in meters and radians.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    /// Same pose with the heading wrapped into `(-π, π]`.
    pub fn normalized(self) -> Self {
        Self {
            theta: normalize_angle(self.theta),
            ..self
        }
    }

    /// Pose composition `self ⊕ rhs` (rhs expressed in the frame of `self`).
    pub fn compose(&self, rhs: &Pose2D) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D {
            x: self.x + c * rhs.x - s * rhs.y,
            y: self.y + s * rhs.x + c * rhs.y,
            theta: normalize_angle(self.theta + rhs.theta),
        }
    }

    pub fn inverse(&self) -> Pose2D {
        let (s, c) = self.theta.sin_cos();
        Pose2D {
            x: -c * self.x - s * self.y,
            y: s * self.x - c * self.y,
            theta: normalize_angle(-self.theta),
        }
    }

    /// Maps a point from this pose's local frame into the parent frame.
    pub fn transform_point(&self, p: Point2) -> Point2 {
        let (s, c) = self.theta.sin_cos();
        Point2::new(self.x + c * p.x - s * p.y, self.y + s * p.x + c * p.y)
    }

    pub fn distance(&self, other: &Pose2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn angular_distance(&self, other: &Pose2D) -> f64 {
        angle_diff(self.theta, other.theta).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn normalize_range_edges() {
        assert_relative_eq!(normalize_angle(PI), PI);
        assert_relative_eq!(normalize_angle(-PI), PI);
        assert_relative_eq!(normalize_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_relative_eq!(normalize_angle(0.5), 0.5);
    }

    #[test]
    fn wraparound_difference() {
        assert_relative_eq!(angle_diff(-3.1, 3.1), 2.0 * PI - 6.2, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(
            x in -50.0..50.0f64, y in -50.0..50.0f64, t in -4.0..4.0f64,
        ) {
            let p = Pose2D::new(x, y, t);
            let id = p.compose(&p.inverse());
            prop_assert!(id.x.abs() < 1e-9 && id.y.abs() < 1e-9 && id.theta.abs() < 1e-9);
        }

        #[test]
        fn normalized_angle_in_half_open_range(a in -100.0..100.0f64) {
            let n = normalize_angle(a);
            prop_assert!(n > -PI && n <= PI);
            prop_assert!((n.sin() - a.sin()).abs() < 1e-9 && (n.cos() - a.cos()).abs() < 1e-9);
        }
    }
}
