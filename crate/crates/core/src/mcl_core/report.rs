use std::fmt::Write as _;

use crate::geometry::Pose2D;
use crate::mcl_core::FusionStats;

pub const CSV_HEADER: &str =
    "cycle,time_s,est_x,est_y,est_yaw,gt_x,gt_y,gt_yaw,reliability,mae,n_global_samples,n_unknown_beams";

#[derive(Debug, Clone, PartialEq)]
pub struct CycleReport {
    pub cycle: u64,
    pub time_s: f64,
    pub estimate: Pose2D,
    pub ground_truth: Option<Pose2D>,
    pub reliability: f64,
    /// MAE of the ML particle.
    pub mae: Option<f64>,
    pub n_global_samples: usize,
    /// Scan indices classified as unmapped obstacles.
    pub unknown_beams: Vec<usize>,
    pub ml_pose: Pose2D,
    pub resampled: bool,
    pub fusion: FusionStats,
}

impl CycleReport {
    pub fn position_error(&self) -> Option<f64> {
        self.ground_truth.map(|g| g.distance(&self.estimate))
    }

    pub fn angular_error(&self) -> Option<f64> {
        self.ground_truth.map(|g| g.angular_distance(&self.estimate))
    }

    /// One CSV row matching [`CSV_HEADER`].
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let e = &self.estimate;
        let _ = write!(s, "{},{:.3},{:.6},{:.6},{:.6},", self.cycle, self.time_s, e.x, e.y, e.theta);
        match self.ground_truth {
            Some(g) => {
                let _ = write!(s, "{:.6},{:.6},{:.6},", g.x, g.y, g.theta);
            }
            None => s.push_str(",,,"),
        }
        let _ = write!(s, "{:.6},", self.reliability);
        if let Some(m) = self.mae {
            let _ = write!(s, "{m:.6}");
        }
        let _ = write!(s, ",{},{}", self.n_global_samples, self.unknown_beams.len());
        s
    }
}
