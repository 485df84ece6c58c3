//! Simulation core for agile Earth-observation constellation scheduling.
//!
//! Covers orbit and attitude physics, scenario generation, the step-wise
//! simulator, baseline schedulers, evaluation metrics and file formats.

pub mod astro;
pub mod attitude;
pub mod error;
pub mod io;
pub mod metrics;
pub mod rng;
pub mod scengen;
pub mod schedulers;
pub mod sim;

pub use error::{AstroError, AttitudeError, FormatError, GenError, MetricsError, SimError};
