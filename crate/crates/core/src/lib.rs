//! Reliability-aware Monte Carlo localization.

pub mod cli;
pub mod data_io;
pub mod error;
pub mod geometry;
pub mod global_loc;
pub mod map;
pub mod mcl_core;
pub mod models;
pub mod rng;
pub mod sim;
