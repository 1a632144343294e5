use crate::geometry::{normalize_angle, Pose2D};
use crate::models::OdometryInput;

/// Timestamp differences below this reuse the previous velocities, s.
pub const DT_MIN: f64 = 1e-3;

/// Constant-twist velocities that carry `p0` to `p1` over `t1 - t0`; the
/// exact inverse of arc integration for differential-drive motion.
/// Intervals shorter than `dt_min` return `prev` with the new interval.
pub fn derive_velocities(p0: &Pose2D, t0: f64, p1: &Pose2D, t1: f64, prev: &OdometryInput, dt_min: f64) -> OdometryInput {
    let dt = t1 - t0;
    if dt < dt_min {
        return OdometryInput { dt: dt.max(0.0), ..*prev };
    }
    let dth = normalize_angle(p1.theta - p0.theta);
    let (dx, dy) = (p1.x - p0.x, p1.y - p0.y);
    let chord = dx.hypot(dy);
    // chord points along the mid-arc heading; its sign gives the direction
    let mid = p0.theta + 0.5 * dth;
    let sign = if dx * mid.cos() + dy * mid.sin() < 0.0 { -1.0 } else { 1.0 };
    let half = 0.5 * dth;
    let arc = if half.abs() < 1e-9 { chord } else { chord * half / half.sin() };
    OdometryInput::new(sign * arc / dt, dth / dt, dt)
}

/// Streams odometry poses into velocity inputs.
#[derive(Debug, Clone, Default)]
pub struct VelocityDeriver {
    pub dt_min: f64,
    last: Option<(Pose2D, f64)>,
    prev: OdometryInput,
}

impl VelocityDeriver {
    pub fn new(dt_min: f64) -> Self {
        Self {
            dt_min,
            last: None,
            prev: OdometryInput::default(),
        }
    }

    /// `None` for the first pose.
    pub fn push(&mut self, pose: Pose2D, t: f64) -> Option<OdometryInput> {
        let out = self.last.map(|(p0, t0)| derive_velocities(&p0, t0, &pose, t, &self.prev, self.dt_min));
        if let Some(u) = out {
            if u.dt >= self.dt_min {
                self.prev = u;
            }
        }
        // a skipped interval keeps its start so time is not lost
        if out.is_none_or(|u| u.dt >= self.dt_min) {
            self.last = Some((pose, t));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::integrate;
    use approx::assert_relative_eq;

    #[test]
    fn straight_unit_step() {
        let u = derive_velocities(&Pose2D::default(), 0.0, &Pose2D::new(1.0, 0.0, 0.0), 1.0, &OdometryInput::default(), DT_MIN);
        assert_relative_eq!(u.v, 1.0);
        assert_relative_eq!(u.omega, 0.0);
    }

    #[test]
    fn heading_wrap() {
        let u = derive_velocities(
            &Pose2D::new(0.0, 0.0, 3.1),
            0.0,
            &Pose2D::new(0.0, 0.0, -3.1),
            1.0,
            &OdometryInput::default(),
            DT_MIN,
        );
        assert_relative_eq!(u.omega, 2.0 * std::f64::consts::PI - 6.2, epsilon = 1e-12);
    }

    #[test]
    fn tiny_interval_reuses_previous() {
        let prev = OdometryInput::new(0.4, 0.2, 0.1);
        let u = derive_velocities(&Pose2D::default(), 5.0, &Pose2D::new(1.0, 0.0, 0.0), 5.0, &prev, DT_MIN);
        assert_eq!((u.v, u.omega), (0.4, 0.2));
    }

    #[test]
    fn backwards_motion_is_negative() {
        let u = derive_velocities(&Pose2D::default(), 0.0, &Pose2D::new(-0.5, 0.0, 0.0), 0.5, &OdometryInput::default(), DT_MIN);
        assert_relative_eq!(u.v, -1.0);
    }

    #[test]
    fn inverts_arc_integration() {
        let p0 = Pose2D::new(1.0, -2.0, 0.3);
        for &(v, w) in &[(0.7, 0.9), (-0.4, 1.7), (0.2, -2.5), (1.0, 1e-12)] {
            let p1 = integrate(&p0, v, 0.0, w, 0.4);
            let u = derive_velocities(&p0, 0.0, &p1, 0.4, &OdometryInput::default(), DT_MIN);
            assert_relative_eq!(u.v, v, epsilon = 1e-9);
            assert_relative_eq!(u.omega, w, epsilon = 1e-9);
        }
    }

    #[test]
    fn deriver_skips_duplicate_stamps() {
        let mut d = VelocityDeriver::new(DT_MIN);
        assert!(d.push(Pose2D::default(), 0.0).is_none());
        let a = d.push(Pose2D::new(0.5, 0.0, 0.0), 1.0).unwrap();
        assert_relative_eq!(a.v, 0.5);
        let b = d.push(Pose2D::new(0.5, 0.0, 0.0), 1.0).unwrap();
        assert_eq!((b.v, b.dt), (0.5, 0.0));
        let c = d.push(Pose2D::new(1.5, 0.0, 0.0), 2.0).unwrap();
        assert_relative_eq!(c.v, 1.0);
    }
}
