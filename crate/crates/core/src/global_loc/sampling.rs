use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::geometry::{normalize_angle, Point2, Pose2D};
use crate::global_loc::FeatureMatch;
use crate::map::{DistanceField, OccupancyGrid};
use crate::models::BeamSet;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalSample {
    pub pose: Pose2D,
    pub matching_rate: f64,
}

/// Map-frame pose implied by matching a local keypoint pose `l` (odometry
/// frame) to a global keypoint pose `g`, for the odometry pose `o`.
pub fn candidate_pose(g: &Pose2D, l: &Pose2D, o: &Pose2D) -> Pose2D {
    let phi = g.theta - l.theta;
    let (s, c) = phi.sin_cos();
    let (dx, dy) = (o.x - l.x, o.y - l.y);
    Pose2D::new(
        g.x + c * dx - s * dy,
        g.y + s * dx + c * dy,
        normalize_angle(o.theta + phi),
    )
}

/// Fraction of the non-max-range beams whose endpoint residual is at most
/// `max_residual`.
pub fn matching_rate(beams: &BeamSet, pose: &Pose2D, df: &DistanceField, max_residual: f64) -> f64 {
    let (s, c) = pose.theta.sin_cos();
    let (mut n, mut ok) = (0usize, 0usize);
    for b in beams.beams.iter().filter(|b| !b.max_range) {
        let p = Point2::new(pose.x + c * b.end.x - s * b.end.y, pose.y + s * b.end.x + c * b.end.y);
        n += 1;
        if df.lookup(p) <= max_residual {
            ok += 1;
        }
    }
    if n == 0 {
        0.0
    } else {
        ok as f64 / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingConfig {
    pub sigma_xy: f64,
    pub sigma_theta: f64,
    pub n_per_match: usize,
    pub rate_min: f64,
    pub match_residual: f64,
}

/// Perturbed samples around each match's candidate and its π-rotated twin,
/// keeping only those on free cells that explain the scan well enough.
pub fn sample_candidate_poses(
    matches: &[FeatureMatch],
    odom_pose: &Pose2D,
    beams: &BeamSet,
    grid: &OccupancyGrid,
    df: &DistanceField,
    cfg: &SamplingConfig,
    rng: &mut Rng,
) -> Vec<GlobalSample> {
    let mut out = Vec::new();
    for m in matches {
        let g = m.global_kp.pose();
        let l = m.local_kp.pose();
        let flipped = Pose2D::new(g.x, g.y, g.theta + PI);
        for base in [candidate_pose(&g, &l, odom_pose), candidate_pose(&flipped, &l, odom_pose)] {
            for _ in 0..cfg.n_per_match {
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                let nt: f64 = rng.sample(StandardNormal);
                let pose = Pose2D::new(
                    base.x + cfg.sigma_xy * nx,
                    base.y + cfg.sigma_xy * ny,
                    normalize_angle(base.theta + cfg.sigma_theta * nt),
                );
                if !grid.is_free_at(pose.position()) {
                    continue;
                }
                let rate = matching_rate(beams, &pose, df, cfg.match_residual);
                if rate >= cfg.rate_min {
                    out.push(GlobalSample { pose, matching_rate: rate });
                }
            }
        }
    }
    out
}
