//! Model parameters, incidence families, and age kernels.

pub mod hypotheses;
mod incidence;
mod kernels;
mod params;

pub use hypotheses::{check_hypotheses, CheckStatus, HypothesisCheck, HypothesisReport, SampleBox};
pub use incidence::{CustomIncidence, Evaluator, IncidenceFunction, LipschitzBound};
pub use kernels::{AgeFunction, AgeKernels, TRUNCATION_TOL};
pub use params::ModelParams;
