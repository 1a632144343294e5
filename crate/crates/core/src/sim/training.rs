use std::sync::Arc;

use rand::Rng as _;

use crate::geometry::{Point2, Pose2D};
use crate::map::{DistanceField, OccupancyGrid, DEFAULT_CLAMP};
use crate::models::{Scan, TrainingScene};
use crate::rng::Rng;
use crate::sim::raycast::Shape;
use crate::sim::{cast_scan_at, LidarConfig};

/// Simulated world used to train the decision model. Optionally drops a
/// few random unmapped discs near the robot for each sample so the
/// success histogram reflects cluttered scans.
pub struct SimScene {
    pub grid: Arc<OccupancyGrid>,
    pub df: DistanceField,
    pub lidar: LidarConfig,
    pub clutter_max: usize,
    candidates: Vec<(usize, usize)>,
}

impl SimScene {
    /// `margin` is the minimum wall clearance of sampled poses.
    pub fn new(grid: Arc<OccupancyGrid>, lidar: LidarConfig, margin: f64, clutter_max: usize) -> Self {
        let df = DistanceField::build(&grid, DEFAULT_CLAMP);
        let candidates = grid
            .free_cells()
            .filter(|&(x, y)| df.at(x, y) >= margin)
            .collect();
        Self {
            grid,
            df,
            lidar,
            clutter_max,
            candidates,
        }
    }

    pub fn has_free_space(&self) -> bool {
        !self.candidates.is_empty()
    }
}

impl TrainingScene for SimScene {
    fn distance_field(&self) -> &DistanceField {
        &self.df
    }

    fn sample_free_pose(&self, rng: &mut Rng) -> Pose2D {
        let (cx, cy) = self.candidates[rng.random_range(0..self.candidates.len())];
        let c = self.grid.cell_center(cx, cy);
        let h = 0.5 * self.grid.resolution();
        Pose2D::new(
            c.x + rng.random_range(-h..h),
            c.y + rng.random_range(-h..h),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        )
    }

    fn scan_at(&self, pose: &Pose2D, rng: &mut Rng) -> Scan {
        let n = if self.clutter_max > 0 { rng.random_range(0..=self.clutter_max) } else { 0 };
        let mut shapes = Vec::with_capacity(n);
        while shapes.len() < n {
            let d = rng.random_range(0.8..5.0);
            let a = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let c = Point2::new(pose.x + d * a.cos(), pose.y + d * a.sin());
            let radius = rng.random_range(0.1..0.3);
            if self.grid.is_free_at(c) {
                shapes.push(Shape::Disc { center: c, radius });
            }
        }
        cast_scan_at(&self.grid, &shapes, pose, &self.lidar, rng)
    }
}
