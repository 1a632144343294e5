//! The particle filter: prediction, dual-set weighting with global-sample
//! fusion, estimation and resampling.

mod filter;
mod localizer;
mod report;

pub use filter::{predictive_density, resample_indices, Filter, FilterState, FusionStats, Particle};
pub use localizer::Localizer;
pub use report::{CycleReport, CSV_HEADER};

use crate::error::{ensure, ConfigError};
use crate::models::{MeasurementConfig, MotionConfig, ReliabilityConfig};

/// How a global sample's proposal density is replaced by a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GlobalScale {
    /// Weight `CCMM · decision · p_pred` (unit proposal mass per atom).
    #[default]
    Unit,
    /// Weight additionally multiplied by the number of global samples.
    Count,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionConfig {
    pub beta: f64,
    /// Std-devs `(σx, σy, σθ)` of the predictive mixture kernel.
    pub pred_sigma: [f64; 3],
    /// Uniform floor density; `None` derives `1 / (free area · 2π)`.
    pub unif_value: Option<f64>,
    pub chi: f64,
    pub resample_ess_ratio: f64,
    pub global_scale: GlobalScale,
    /// Replace the predictive factor with 1 (ablation).
    pub ablate_predictive: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            beta: 0.9,
            pred_sigma: [0.3, 0.3, 10f64.to_radians()],
            unif_value: None,
            chi: 0.9,
            resample_ess_ratio: 0.5,
            global_scale: GlobalScale::Unit,
            ablate_predictive: false,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure((0.0..=1.0).contains(&self.beta), "fusion.beta", || "must lie in [0, 1]".into())?;
        for (i, s) in self.pred_sigma.iter().enumerate() {
            ensure(*s > 0.0, &format!("fusion.pred_sigma_{}", ["x", "y", "theta"][i]), || {
                "must be > 0".into()
            })?;
        }
        if let Some(u) = self.unif_value {
            ensure(u > 0.0, "fusion.unif_value", || "must be > 0".into())?;
        }
        ensure(self.chi > 0.0 && self.chi < 1.0, "fusion.chi", || "must lie in (0, 1)".into())?;
        ensure(
            self.resample_ess_ratio > 0.0 && self.resample_ess_ratio <= 1.0,
            "fusion.resample_ess_ratio",
            || "must lie in (0, 1]".into(),
        )
    }
}

/// Weighting scheme of the tracking set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterMode {
    #[default]
    Proposed,
    /// Likelihood field plus random-particle injection on likelihood drops.
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub alpha_slow: f64,
    pub alpha_fast: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            alpha_slow: 0.001,
            alpha_fast: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig {
    pub n_particles: usize,
    /// Initial cloud std-devs `(σx, σy, σθ)`.
    pub init_spread: [f64; 3],
    pub motion: MotionConfig,
    pub measurement: MeasurementConfig,
    pub reliability: ReliabilityConfig,
    pub fusion: FusionConfig,
    pub mode: FilterMode,
    /// Class-conditional model; `false` weights with the plain likelihood field.
    pub use_ccmm: bool,
    pub baseline: BaselineConfig,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            n_particles: 500,
            init_spread: [0.3, 0.3, 10f64.to_radians()],
            motion: MotionConfig::default(),
            measurement: MeasurementConfig::default(),
            reliability: ReliabilityConfig::default(),
            fusion: FusionConfig::default(),
            mode: FilterMode::Proposed,
            use_ccmm: true,
            baseline: BaselineConfig::default(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        ensure(self.n_particles >= 1, "filter.n_particles", || "must be >= 1".into())?;
        for (i, s) in self.init_spread.iter().enumerate() {
            ensure(*s >= 0.0, &format!("filter.init_sigma_{}", ["x", "y", "theta"][i]), || {
                "must be >= 0".into()
            })?;
        }
        ensure(
            (0.0..=1.0).contains(&self.baseline.alpha_slow) && (0.0..=1.0).contains(&self.baseline.alpha_fast),
            "baseline.alpha_slow",
            || "smoothing rates must lie in [0, 1]".into(),
        )?;
        self.motion.validate()?;
        self.measurement.validate()?;
        self.reliability.validate()?;
        self.fusion.validate()
    }
}
