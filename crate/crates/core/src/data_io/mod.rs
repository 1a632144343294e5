//! Log parsing, velocity derivation and likelihood-grid export.

mod carmen;
mod likelihood;
mod velocity;

pub use carmen::{
    parse_carmen, parse_carmen_str, CarmenError, CarmenLog, FlaserConvention, LaserRecord, LogRecord, OdomRecord,
};
pub use likelihood::{grid_offsets, likelihood_grid, LikelihoodGrid};
pub use velocity::{derive_velocities, VelocityDeriver, DT_MIN};
