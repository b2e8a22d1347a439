//! Navigation for a nano-UAV that fuses an 8×8 time-of-flight depth map
//! (local perception) with a lane-following steering signal (global
//! perception) through a small lookup table, plus a deterministic 2D corridor
//! simulator and trial harness to evaluate the three pipeline variants.

pub mod config;
pub mod depth;
pub mod error;
pub mod fusion;
pub mod geometry;
pub mod global;
pub mod harness;
pub mod sim;
pub mod telemetry;

pub use error::{Error, Result};
