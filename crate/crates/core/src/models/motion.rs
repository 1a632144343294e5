use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{ensure, ConfigError};
use crate::geometry::{normalize_angle, Pose2D};
use crate::rng::Rng;

/// Velocity command or odometry reading over one interval.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OdometryInput {
    /// Forward velocity, m/s.
    pub v: f64,
    /// Lateral velocity, m/s (omni drive only).
    pub v_y: f64,
    /// Angular velocity, rad/s.
    pub omega: f64,
    /// Interval, s.
    pub dt: f64,
}

impl OdometryInput {
    pub fn new(v: f64, omega: f64, dt: f64) -> Self {
        Self { v, v_y: 0.0, omega, dt }
    }

    /// Translational and angular displacement magnitudes.
    pub fn displacement(&self) -> (f64, f64) {
        (self.v.hypot(self.v_y).abs() * self.dt, self.omega.abs() * self.dt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Drive {
    #[default]
    Differential,
    Omni,
}

/// Noise coefficients map squared velocities to variances:
/// `var(v) = a1·v² + a2·ω²`, `var(ω) = a3·v² + a4·ω²` and, for omni drive,
/// `var(v_y) = a5·v_y² + a6·ω²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionConfig {
    pub drive: Drive,
    pub a: [f64; 6],
}

impl Default for MotionConfig {
    fn default() -> Self {
        Self {
            drive: Drive::Differential,
            a: [0.04, 0.01, 0.01, 0.04, 0.04, 0.01],
        }
    }
}

impl MotionConfig {
    pub fn noiseless(drive: Drive) -> Self {
        Self { drive, a: [0.0; 6] }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for (i, a) in self.a.iter().enumerate() {
            ensure(a.is_finite() && *a >= 0.0, &format!("motion.a{}", i + 1), || {
                format!("must be finite and >= 0, got {a}")
            })?;
        }
        Ok(())
    }
}

/// Exact constant-twist integration of body-frame velocities.
pub fn integrate(pose: &Pose2D, v: f64, v_y: f64, omega: f64, dt: f64) -> Pose2D {
    let dth = omega * dt;
    // ∫ R(ω t) dt applied to (v, v_y)
    let (bx, by) = if dth.abs() < 1e-6 {
        (v * dt, v_y * dt)
    } else {
        let (s, c) = dth.sin_cos();
        let (sa, ca) = (s / omega, (1.0 - c) / omega);
        (sa * v - ca * v_y, ca * v + sa * v_y)
    };
    let (s, c) = pose.theta.sin_cos();
    Pose2D {
        x: pose.x + c * bx - s * by,
        y: pose.y + s * bx + c * by,
        theta: normalize_angle(pose.theta + dth),
    }
}

fn gauss(rng: &mut Rng, var: f64) -> f64 {
    if var <= 0.0 {
        return 0.0;
    }
    let n: f64 = rng.sample(StandardNormal);
    n * var.sqrt()
}

pub fn sample_motion(pose: &Pose2D, u: &OdometryInput, cfg: &MotionConfig, rng: &mut Rng) -> Pose2D {
    let [a1, a2, a3, a4, a5, a6] = cfg.a;
    let (v2, w2) = (u.v * u.v, u.omega * u.omega);
    match cfg.drive {
        Drive::Differential => {
            let v = u.v + gauss(rng, a1 * v2 + a2 * w2);
            let w = u.omega + gauss(rng, a3 * v2 + a4 * w2);
            integrate(pose, v, 0.0, w, u.dt)
        }
        Drive::Omni => {
            let vy2 = u.v_y * u.v_y;
            let v = u.v + gauss(rng, a1 * v2 + a2 * w2);
            let vy = u.v_y + gauss(rng, a5 * vy2 + a6 * w2);
            let w = u.omega + gauss(rng, a3 * (v2 + vy2) + a4 * w2);
            integrate(pose, v, vy, w, u.dt)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn noiseless_straight_and_rotation() {
        let cfg = MotionConfig::noiseless(Drive::Differential);
        let mut r = rng::stream(0, &[]);
        let p = sample_motion(&Pose2D::default(), &OdometryInput::new(1.0, 0.0, 1.0), &cfg, &mut r);
        assert_relative_eq!(p.x, 1.0);
        assert_relative_eq!(p.y, 0.0);
        let p = sample_motion(&Pose2D::default(), &OdometryInput::new(0.0, FRAC_PI_2, 1.0), &cfg, &mut r);
        assert_relative_eq!(p.x, 0.0);
        assert_relative_eq!(p.theta, FRAC_PI_2);
    }

    #[test]
    fn quarter_arc_lands_on_circle() {
        // radius 1 m, quarter turn to the left
        let p = integrate(&Pose2D::default(), FRAC_PI_2, 0.0, FRAC_PI_2, 1.0);
        assert_relative_eq!(p.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn omni_lateral_motion() {
        let p = integrate(&Pose2D::new(0.0, 0.0, FRAC_PI_2), 0.0, 1.0, 0.0, 2.0);
        assert_relative_eq!(p.x, -2.0, epsilon = 1e-12);
        assert_relative_eq!(p.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let cfg = MotionConfig {
            a: [0.1, 0.0, 0.0, 0.0, 0.0, 0.0],
            ..Default::default()
        };
        let u = OdometryInput::new(0.5, 0.2, 0.1);
        let run = || {
            let mut r = rng::stream(7, &[3]);
            let mut p = Pose2D::default();
            (0..50).map(|_| {
                p = sample_motion(&p, &u, &cfg, &mut r);
                p
            }).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn rejects_negative_coefficient() {
        let cfg = MotionConfig { a: [0.0, -1.0, 0.0, 0.0, 0.0, 0.0], ..Default::default() };
        assert_eq!(cfg.validate().unwrap_err().field, "motion.a2");
    }
}
