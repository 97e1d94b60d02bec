//! Configuration, Monte Carlo estimation and parameter sweeps on top of
//! [`aoi_grr_core`].

pub mod config;
pub mod mc;
pub mod sweep;

pub use aoi_grr_core as core;
