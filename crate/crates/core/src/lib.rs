//! Quantifying chaotic vs. regular dynamics in the dimensionless double
//! pendulum with Lagrangian-descriptor chaos indicators.
//!
//! The pipeline: sample initial conditions on the fixed-energy Poincaré
//! section ([`section`]), accumulate the Lagrangian descriptor along each
//! trajectory and its four stencil neighbors ([`integrate`], [`ld`]),
//! separate chaotic from regular motion with a histogram-valley threshold
//! ([`classify`]), sweep the `(alpha, sigma, energy)` parameter space
//! ([`sweep`]) and fit the growth/decay of the chaotic fraction ([`fit`]).

pub mod error;
pub mod integrate;
pub mod ld;
pub mod model;
pub mod section;

pub use error::Error;
pub use model::{ModelParams, PhaseState};
