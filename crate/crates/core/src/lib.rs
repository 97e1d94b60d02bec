//! Simulation and large-deviation bounds for peak Age of Information under
//! generalized round-robin scheduling.
//!
//! The crate is `no_std` (it needs `alloc`). Sampling is generic over any
//! [`rand::Rng`], so callers choose and seed the generator.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod dist;
pub mod model;
pub mod rate;
pub mod schedule;
pub mod sim;

pub use bounds::{BoundError, BoundReport, Exponent, Query};
pub use dist::{DistError, ServiceLaw};
pub use model::{GroupSpec, ModelError, NScaling, SourceId, SystemSpec};
pub use rate::{sup_rate, RateError, Stability, Supremum};
pub use schedule::{IterationSchedule, ScheduleError};
pub use sim::{Discipline, Engine, PeakAgeTrace, SimError, Slot};
