//! Occupancy grids, distance fields and map files.

mod distance;
mod grid;
pub mod io;

use std::path::PathBuf;

pub use distance::{DistanceField, DEFAULT_CLAMP};
pub use grid::{CellState, OccupancyGrid};
pub use io::{load_map, load_map_from_meta, save_map, MapMetadata};

#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed PGM {0}")]
    Pgm(String),
    #[error("map metadata missing required key `{0}`")]
    MissingKey(&'static str),
    #[error("map metadata key `{key}` has invalid value {value:?}")]
    BadValue { key: String, value: String },
    #[error("dimensions mismatch: expected {expected} cells, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid grid geometry: {0}")]
    InvalidGeometry(String),
}
