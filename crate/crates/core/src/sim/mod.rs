//! Deterministic 2D world simulator.

mod contaminated;
pub mod maps;
pub mod raycast;
mod scenario;
mod training;
mod world;

pub use scenario::{
    build_localizer, run_scenario, run_scenario_with, MapSource, RunSetup, Scenario, ScenarioError, ScenarioRun,
    WaypointController,
};
pub use contaminated::{contaminated_scene, contaminated_scene_at, ContaminatedScene};
pub use training::SimScene;
pub use world::{cast_scan_at, LidarConfig, ObstacleScript, OdometryNoise, ShapeKind, WorldState, ROBOT_RADIUS};
