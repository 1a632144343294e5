use crate::geometry::Pose2D;
use crate::global_loc::{GlobalLocalizer, GlobalSample};
use crate::mcl_core::{CycleReport, Filter};
use crate::models::{integrate, BeamSet, OdometryInput, Scan};
use crate::rng::{label, stream};

/// A filter plus the odometry-frame bookkeeping that feeds global
/// localization.
#[derive(Debug, Clone)]
pub struct Localizer {
    pub filter: Filter,
    pub global: Option<GlobalLocalizer>,
    /// Samples fused in the most recent cycle.
    pub last_samples: Vec<GlobalSample>,
    odom_pose: Pose2D,
}

impl Localizer {
    pub fn new(filter: Filter, global: Option<GlobalLocalizer>) -> Self {
        Self {
            filter,
            global,
            last_samples: Vec::new(),
            odom_pose: Pose2D::default(),
        }
    }

    /// Dead-reckoned pose in the odometry frame.
    pub fn odom_pose(&self) -> Pose2D {
        self.odom_pose
    }

    /// Runs one cycle; `extra` samples are fused alongside generated ones.
    pub fn step(&mut self, u: &OdometryInput, scan: &Scan, extra: &[GlobalSample]) -> CycleReport {
        self.odom_pose = integrate(&self.odom_pose, u.v, u.v_y, u.omega, u.dt);
        let cycle = self.filter.state.cycle;
        let mut samples = Vec::new();
        if let Some(gl) = self.global.as_mut() {
            gl.observe(self.odom_pose, scan.clone());
            if cycle.is_multiple_of(gl.cfg.interval as u64) {
                let beams = BeamSet::new(scan, self.filter.cfg.measurement.beam_stride);
                let mut rng = stream(self.filter.seed(), &[label::GLOBAL, cycle]);
                samples = gl.propose(&beams, &self.filter.grid, &self.filter.df, &mut rng);
            }
        }
        samples.extend_from_slice(extra);
        let r = self.filter.step(u, scan, &samples);
        self.last_samples = samples;
        r
    }
}
