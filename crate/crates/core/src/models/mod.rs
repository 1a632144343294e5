//! Motion, measurement, decision and reliability models.

mod decision;
mod measurement;
mod motion;
mod reliability;
mod scan;

pub use decision::{
    train_decision_model, DecisionModel, LocState, TrainingConfig, TrainingScene, TrainingSummary,
    FLOOR_DENSITY,
};
pub use measurement::{
    class_conditional_beams, class_conditional_likelihood, compute_mae, evaluate_pose,
    known_likelihood, mae_of_beams, mae_of_residuals, unknown_likelihood, CcmmEval,
    MeasurementConfig, MeasurementMode, PoseEval,
};
pub use motion::{integrate, sample_motion, Drive, MotionConfig, OdometryInput};
pub use reliability::{transit_reliability, update_reliability, ReliabilityConfig};
pub use scan::{Beam, BeamSet, Scan};

use crate::error::ConfigError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("decision model training failed: {0}")]
    Training(String),
    #[error("decision model line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
