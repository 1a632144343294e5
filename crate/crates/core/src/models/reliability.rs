use crate::error::{ensure, ConfigError};
use crate::models::DecisionModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReliabilityConfig {
    /// Decay per squared translational displacement, 1/m².
    pub alpha_trans: f64,
    /// Decay per squared angular displacement, 1/rad².
    pub alpha_rot: f64,
    pub r_floor: f64,
    pub r_ceil: f64,
    pub initial: f64,
}

impl Default for ReliabilityConfig {
    fn default() -> Self {
        Self {
            alpha_trans: 0.0,
            alpha_rot: 0.0,
            r_floor: 0.01,
            r_ceil: 0.99,
            initial: 0.5,
        }
    }
}

impl ReliabilityConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(self.alpha_trans >= 0.0, "reliability.alpha_trans", || "must be >= 0".into())?;
        ensure(self.alpha_rot >= 0.0, "reliability.alpha_rot", || "must be >= 0".into())?;
        ensure(
            0.0 < self.r_floor && self.r_floor < self.r_ceil && self.r_ceil < 1.0,
            "reliability.r_floor",
            || format!("need 0 < r_floor < r_ceil < 1, got [{}, {}]", self.r_floor, self.r_ceil),
        )?;
        ensure((0.0..=1.0).contains(&self.initial), "reliability.initial", || {
            "must lie in [0, 1]".into()
        })
    }

    pub fn clamp(&self, r: f64) -> f64 {
        r.clamp(self.r_floor, self.r_ceil)
    }
}

/// Reliability prior after moving `(Δd, Δθ)`.
pub fn transit_reliability(r_prev: f64, delta_d: f64, delta_theta: f64, cfg: &ReliabilityConfig) -> f64 {
    let decay = cfg.alpha_trans * delta_d * delta_d + cfg.alpha_rot * delta_theta * delta_theta;
    cfg.clamp(r_prev * (1.0 - decay))
}

/// Bayes update of the reliability with MAE evidence `d`.
pub fn update_reliability(r_hat: f64, d: Option<f64>, dm: &DecisionModel, cfg: &ReliabilityConfig) -> f64 {
    let (ps, pf) = dm.likelihoods(d);
    let num = ps * r_hat;
    cfg.clamp(num / (num + pf * (1.0 - r_hat)))
}
