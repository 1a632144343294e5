use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{ensure, ConfigError};
use crate::geometry::{Point2, Pose2D};
use crate::map::OccupancyGrid;
use crate::models::{integrate, OdometryInput, Scan};
use crate::rng::Rng;
use crate::sim::raycast::{cast_ray, sensor_pose, Shape};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LidarConfig {
    pub fov: f64,
    pub angle_increment: f64,
    pub range_min: f64,
    pub range_max: f64,
    /// Range noise std-dev, m.
    pub sigma_r: f64,
    pub offset: Pose2D,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            fov: 270f64.to_radians(),
            angle_increment: 0.25f64.to_radians(),
            range_min: 0.05,
            range_max: 30.0,
            sigma_r: 0.01,
            offset: Pose2D::default(),
        }
    }
}

impl LidarConfig {
    pub fn n_beams(&self) -> usize {
        (self.fov / self.angle_increment).round() as usize + 1
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(self.fov > 0.0, "lidar.fov", || "must be > 0".into())?;
        ensure(self.angle_increment > 0.0, "lidar.angle_increment", || "must be > 0".into())?;
        ensure(self.range_max > self.range_min && self.range_min >= 0.0, "lidar.range_max", || {
            "need 0 <= range_min < range_max".into()
        })?;
        ensure(self.sigma_r >= 0.0, "lidar.sigma_r", || "must be >= 0".into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeKind {
    Disc { radius: f64 },
    /// Segment centered on the pose, along its heading.
    Segment { length: f64 },
}

/// An obstacle that moves at constant velocity from `start` during
/// `[t_start, t_end]` and is absent outside that window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObstacleScript {
    pub kind: ShapeKind,
    pub start: Pose2D,
    pub vx: f64,
    pub vy: f64,
    pub t_start: f64,
    pub t_end: f64,
}

impl ObstacleScript {
    pub fn stationary_disc(center: Point2, radius: f64) -> Self {
        Self {
            kind: ShapeKind::Disc { radius },
            start: Pose2D::new(center.x, center.y, 0.0),
            vx: 0.0,
            vy: 0.0,
            t_start: f64::NEG_INFINITY,
            t_end: f64::INFINITY,
        }
    }

    pub fn stationary_segment(center: Pose2D, length: f64) -> Self {
        Self {
            kind: ShapeKind::Segment { length },
            start: center,
            vx: 0.0,
            vy: 0.0,
            t_start: f64::NEG_INFINITY,
            t_end: f64::INFINITY,
        }
    }

    pub fn shape_at(&self, t: f64) -> Option<Shape> {
        if t < self.t_start || t > self.t_end {
            return None;
        }
        let dt = if self.t_start.is_finite() { t - self.t_start } else { 0.0 };
        let c = Point2::new(self.start.x + self.vx * dt, self.start.y + self.vy * dt);
        Some(match self.kind {
            ShapeKind::Disc { radius } => Shape::Disc { center: c, radius },
            ShapeKind::Segment { length } => {
                let (s, co) = self.start.theta.sin_cos();
                let h = 0.5 * length;
                Shape::Segment {
                    a: Point2::new(c.x - h * co, c.y - h * s),
                    b: Point2::new(c.x + h * co, c.y + h * s),
                }
            }
        })
    }
}

/// Odometry corruption: piecewise-constant scale factors plus white noise.
#[derive(Debug, Clone, PartialEq)]
pub struct OdometryNoise {
    /// `(t_start, scale_v, scale_ω)`, sorted by `t_start`.
    pub schedule: Vec<(f64, f64, f64)>,
    pub sigma_v: f64,
    pub sigma_omega: f64,
}

impl Default for OdometryNoise {
    fn default() -> Self {
        Self {
            schedule: Vec::new(),
            sigma_v: 0.0,
            sigma_omega: 0.0,
        }
    }
}

impl OdometryNoise {
    pub fn scale_at(&self, t: f64) -> (f64, f64) {
        self.schedule
            .iter()
            .rev()
            .find(|(t0, _, _)| *t0 <= t)
            .map(|&(_, sv, sw)| (sv, sw))
            .unwrap_or((1.0, 1.0))
    }
}

/// Footprint radius used to drop obstacles that would overlap the robot, m.
pub const ROBOT_RADIUS: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct WorldState {
    pub gt_pose: Pose2D,
    pub map: Arc<OccupancyGrid>,
    pub obstacles: Vec<ObstacleScript>,
    pub time: f64,
    pub noise: OdometryNoise,
}

impl WorldState {
    pub fn new(map: Arc<OccupancyGrid>, gt_pose: Pose2D) -> Self {
        Self {
            gt_pose,
            map,
            obstacles: Vec::new(),
            time: 0.0,
            noise: OdometryNoise::default(),
        }
    }

    /// Obstacles active now, excluding any overlapping the robot footprint.
    pub fn shapes(&self) -> Vec<Shape> {
        let c = self.gt_pose.position();
        self.obstacles
            .iter()
            .filter_map(|o| o.shape_at(self.time))
            .filter(|s| !s.contains(c, ROBOT_RADIUS))
            .collect()
    }

    /// Advances the ground truth by `u` (stopping at walls) and returns the
    /// corrupted odometry the robot would report.
    pub fn step(&mut self, u: &OdometryInput, rng: &mut Rng) -> OdometryInput {
        assert!(u.dt > 0.0, "step_world requires dt > 0");
        // march in small sub-steps so the robot never crosses a wall
        let span = u.v.hypot(u.v_y).abs() * u.dt;
        let n = ((span / (0.5 * self.map.resolution())).ceil() as usize).max(1);
        let h = u.dt / n as f64;
        let mut moved = 0.0;
        for _ in 0..n {
            let next = integrate(&self.gt_pose, u.v, u.v_y, u.omega, h);
            if !self.map.is_free_at(next.position()) {
                break;
            }
            self.gt_pose = next;
            moved += h;
        }
        self.time += u.dt;
        let (sv, sw) = self.noise.scale_at(self.time);
        let nv: f64 = rng.sample(StandardNormal);
        let nw: f64 = rng.sample(StandardNormal);
        let frac = moved / u.dt;
        OdometryInput {
            v: frac * u.v * sv + self.noise.sigma_v * nv,
            v_y: frac * u.v_y * sv,
            omega: frac * u.omega * sw + self.noise.sigma_omega * nw,
            dt: u.dt,
        }
    }

    pub fn cast_scan(&self, lidar: &LidarConfig, rng: &mut Rng) -> Scan {
        cast_scan_at(&self.map, &self.shapes(), &self.gt_pose, lidar, rng)
    }
}

/// Simulated scan from `pose`; beams without a hit read `range_max`.
pub fn cast_scan_at(
    grid: &OccupancyGrid,
    shapes: &[Shape],
    pose: &Pose2D,
    lidar: &LidarConfig,
    rng: &mut Rng,
) -> Scan {
    let s = sensor_pose(pose, &lidar.offset);
    let angle_min = -0.5 * lidar.fov;
    let n = lidar.n_beams();
    let ranges = (0..n)
        .map(|k| {
            let a = s.theta + angle_min + k as f64 * lidar.angle_increment;
            match cast_ray(grid, shapes, s.position(), a, lidar.range_max) {
                Some(r) => {
                    let noise = if lidar.sigma_r > 0.0 {
                        lidar.sigma_r * rng.sample::<f64, _>(StandardNormal)
                    } else {
                        0.0
                    };
                    (r + noise).clamp(lidar.range_min, lidar.range_max)
                }
                None => lidar.range_max,
            }
        })
        .collect();
    Scan {
        ranges,
        angle_min,
        angle_increment: lidar.angle_increment,
        range_min: lidar.range_min,
        range_max: lidar.range_max,
        sensor_offset: lidar.offset,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::CellState;
    use crate::rng;
    use crate::sim::maps::fill_rect;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn open_box() -> Arc<OccupancyGrid> {
        let mut g = OccupancyGrid::new(200, 200, 0.05, Pose2D::default(), CellState::Occupied).unwrap();
        fill_rect(&mut g, 0.5, 0.5, 9.5, 9.5, CellState::Free);
        Arc::new(g)
    }

    #[test]
    fn clean_odometry_passes_through() {
        let mut w = WorldState::new(open_box(), Pose2D::new(2.0, 2.0, 0.0));
        let mut r = rng::stream(1, &[]);
        let u = OdometryInput::new(0.5, 0.1, 0.1);
        let rep = w.step(&u, &mut r);
        assert_relative_eq!(rep.v, 0.5, epsilon = 1e-12);
        assert_relative_eq!(rep.omega, 0.1, epsilon = 1e-12);
        w.noise.schedule.push((0.0, 1.5, 1.5));
        let rep = w.step(&u, &mut r);
        assert_relative_eq!(rep.v, 0.75, epsilon = 1e-12);
        assert_relative_eq!(rep.omega, 0.15, epsilon = 1e-12);
    }

    #[test]
    fn square_path_closes() {
        let mut w = WorldState::new(open_box(), Pose2D::new(2.0, 2.0, 0.0));
        let mut r = rng::stream(1, &[]);
        for _ in 0..4 {
            for _ in 0..10 {
                w.step(&OdometryInput::new(0.4, 0.0, 0.1), &mut r);
            }
            for _ in 0..10 {
                w.step(&OdometryInput::new(0.0, FRAC_PI_2, 0.1), &mut r);
            }
        }
        assert!(w.gt_pose.distance(&Pose2D::new(2.0, 2.0, 0.0)) < 1e-6);
        assert!(w.gt_pose.angular_distance(&Pose2D::new(2.0, 2.0, 0.0)) < 1e-9);
    }

    #[test]
    fn robot_stops_at_wall() {
        let mut w = WorldState::new(open_box(), Pose2D::new(9.0, 5.0, 0.0));
        let mut r = rng::stream(1, &[]);
        for _ in 0..50 {
            w.step(&OdometryInput::new(1.0, 0.0, 0.1), &mut r);
            assert!(w.map.is_free_at(w.gt_pose.position()));
        }
        assert!(w.gt_pose.x < 9.5 && w.gt_pose.x > 9.4);
    }

    #[test]
    fn moving_disc_window() {
        let o = ObstacleScript {
            kind: ShapeKind::Disc { radius: 0.3 },
            start: Pose2D::new(1.0, 1.0, 0.0),
            vx: 1.0,
            vy: 0.0,
            t_start: 2.0,
            t_end: 4.0,
        };
        assert!(o.shape_at(1.0).is_none());
        assert_eq!(o.shape_at(3.0), Some(Shape::Disc { center: Point2::new(2.0, 1.0), radius: 0.3 }));
    }

    #[test]
    fn scan_geometry() {
        let w = WorldState::new(open_box(), Pose2D::new(5.0, 5.0, 0.0));
        let lidar = LidarConfig { sigma_r: 0.0, ..Default::default() };
        let s = w.cast_scan(&lidar, &mut rng::stream(0, &[]));
        assert_eq!(s.len(), 1081);
        // beam index 540 looks straight ahead to the wall face at x = 9.5
        assert_relative_eq!(s.beam_angle(540), 0.0, epsilon = 1e-12);
        assert!((s.ranges[540] - 4.5).abs() <= 0.025 + 1e-9);
    }
}
