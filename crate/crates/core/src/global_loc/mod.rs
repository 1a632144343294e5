//! Global localization from free-space features of the distance field.

mod cache;
mod features;
mod local_map;
mod matching;
mod sampling;

pub use cache::{load_keypoints, save_keypoints, CacheError};
pub use features::{
    gaussian_smooth, CriticalPoint, FeatureField, Keypoint, KeypointKind, DESCRIPTOR_BINS,
    ORIENTATION_BINS, ORIENTATION_BIN_WIDTH,
};
pub use local_map::{build_local_map, ScanHistory};
pub use matching::{descriptor_distance, match_features, FeatureMatch};
pub use sampling::{candidate_pose, matching_rate, sample_candidate_poses, GlobalSample, SamplingConfig};

use crate::error::{ensure, ConfigError};
use crate::geometry::Pose2D;
use crate::map::{DistanceField, OccupancyGrid};
use crate::models::BeamSet;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalLocConfig {
    /// Cell size of the grids features are extracted from, m.
    pub feature_resolution: f64,
    pub sigma_smooth: f64,
    pub window: f64,
    pub grad_eps: f64,
    /// Minimum Hessian eigenvalue magnitude of a keypoint, 1/m.
    pub hess_eps: f64,
    pub avg_df_threshold: f64,
    pub ratio_const: f64,
    pub sigma_xy: f64,
    pub sigma_theta: f64,
    pub n_per_match: usize,
    pub rate_min: f64,
    pub match_residual: f64,
    pub n_acc: usize,
    /// Radius around each scan used for the local map, m.
    pub local_range: f64,
    /// Run global localization every this many cycles.
    pub interval: usize,
}

impl Default for GlobalLocConfig {
    fn default() -> Self {
        Self {
            feature_resolution: 0.1,
            sigma_smooth: 0.5,
            window: 2.0,
            grad_eps: 0.01,
            hess_eps: 0.05,
            avg_df_threshold: 0.3,
            ratio_const: 1.25,
            sigma_xy: 0.5,
            sigma_theta: 15f64.to_radians(),
            n_per_match: 10,
            rate_min: 0.6,
            match_residual: 0.2,
            n_acc: 10,
            local_range: 10.0,
            interval: 1,
        }
    }
}

impl GlobalLocConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let pos = |v: f64, f: &str| ensure(v > 0.0 && v.is_finite(), f, || format!("must be > 0, got {v}"));
        pos(self.feature_resolution, "global.feature_resolution")?;
        pos(self.sigma_smooth, "global.sigma_smooth")?;
        pos(self.window, "global.window")?;
        pos(self.local_range, "global.local_range")?;
        ensure(self.grad_eps >= 0.0, "global.grad_eps", || "must be >= 0".into())?;
        ensure(self.hess_eps >= 0.0, "global.hess_eps", || "must be >= 0".into())?;
        ensure(self.avg_df_threshold >= 0.0, "global.avg_df_threshold", || "must be >= 0".into())?;
        ensure(self.ratio_const >= 1.0, "global.ratio_const", || "must be >= 1".into())?;
        ensure(self.sigma_xy >= 0.0, "global.sigma_xy", || "must be >= 0".into())?;
        ensure(self.sigma_theta >= 0.0, "global.sigma_theta", || "must be >= 0".into())?;
        ensure((0.0..=1.0).contains(&self.rate_min), "global.rate_min", || "must lie in [0, 1]".into())?;
        ensure(self.match_residual > 0.0, "global.match_residual", || "must be > 0".into())?;
        ensure(self.n_acc >= 1, "global.n_acc", || "must be >= 1".into())?;
        ensure(self.interval >= 1, "global.interval", || "must be >= 1".into())
    }

    /// Integer block factor taking `resolution` to the feature grid.
    pub fn feature_factor(&self, resolution: f64) -> usize {
        ((self.feature_resolution / resolution).round() as usize).max(1)
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig {
            sigma_xy: self.sigma_xy,
            sigma_theta: self.sigma_theta,
            n_per_match: self.n_per_match,
            rate_min: self.rate_min,
            match_residual: self.match_residual,
        }
    }
}

/// Global-map keypoints plus the per-cycle proposal pipeline.
#[derive(Debug, Clone)]
pub struct GlobalLocalizer {
    pub cfg: GlobalLocConfig,
    pub keypoints: Vec<Keypoint>,
    history: ScanHistory,
}

impl GlobalLocalizer {
    pub fn new(grid: &OccupancyGrid, cfg: GlobalLocConfig) -> Self {
        let coarse = grid.downsample(cfg.feature_factor(grid.resolution()));
        let keypoints = FeatureField::from_grid(&coarse, cfg.sigma_smooth).keypoints(cfg.hess_eps, cfg.window, cfg.grad_eps);
        Self::with_keypoints(keypoints, cfg)
    }

    pub fn with_keypoints(keypoints: Vec<Keypoint>, cfg: GlobalLocConfig) -> Self {
        Self {
            cfg,
            keypoints,
            history: ScanHistory::new(cfg.n_acc),
        }
    }

    pub fn history(&self) -> &ScanHistory {
        &self.history
    }

    pub fn observe(&mut self, odom_pose: Pose2D, scan: crate::models::Scan) {
        self.history.push(odom_pose, scan);
    }

    pub fn reset(&mut self) {
        self.history.clear();
    }

    /// Keypoints of the current local map in the odometry frame.
    pub fn local_keypoints(&self, resolution: f64) -> Option<(Vec<Keypoint>, Pose2D)> {
        let (local, odom) = build_local_map(&self.history, resolution, self.cfg.local_range)?;
        let kps = FeatureField::from_grid(&local, self.cfg.sigma_smooth).keypoints(
            self.cfg.hess_eps,
            self.cfg.window,
            self.cfg.grad_eps,
        );
        Some((kps, odom))
    }

    /// Candidate map-frame poses for the latest scan.
    pub fn propose(&self, beams: &BeamSet, grid: &OccupancyGrid, df: &DistanceField, rng: &mut Rng) -> Vec<GlobalSample> {
        let res = grid.resolution() * self.cfg.feature_factor(grid.resolution()) as f64;
        let Some((local, odom)) = self.local_keypoints(res) else {
            return Vec::new();
        };
        let matches = match_features(&local, &self.keypoints, self.cfg.avg_df_threshold, self.cfg.ratio_const);
        sample_candidate_poses(&matches, &odom, beams, grid, df, &self.cfg.sampling(), rng)
    }
}
