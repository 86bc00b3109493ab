//! Infection-age SEI model with a general nonlinear incidence `f(S, J)`.
//!
//! The crate integrates the model along characteristics, computes the basic
//! reproduction number and equilibria, and evaluates the two Lyapunov
//! functionals (disease-free and endemic) together with boundedness and
//! persistence diagnostics on simulated trajectories.

pub mod analysis;
pub mod discretize;
pub mod error;
pub mod lyapunov;
pub mod model;
pub mod output;
pub mod report;
pub mod scenario;
pub mod simulator;

pub use error::{Error, Result};
