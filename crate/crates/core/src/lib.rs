//! Discrete-choice estimation for travel-mode data: trip recoding, weather
//! fusion, multinomial and random-parameters logit by maximum simulated
//! likelihood with Halton draws, and marginal-effects reporting.
//!
//! # Module map
//!
//! - [`data`] — trip ingestion, filters, and covariate recoding
//! - [`weather`] — nearest-station / nearest-time weather fusion
//! - [`halton`] — quasi-random standard-normal draw matrices
//! - [`spec`] — model specifications and the flat parameter layout
//! - [`likelihood`] — choice probabilities, log-likelihood, gradients
//! - [`estimate`] — BFGS maximization, standard errors, stepwise retention
//! - [`effects`] — average marginal effects and sign-share diagnostics
//! - [`synthetic`] — seeded data generators for recovery tests
//! - [`report`] — deterministic text/CSV rendering

mod error;

pub mod data;
pub mod effects;
pub mod estimate;
pub mod halton;
pub mod likelihood;
pub mod report;
pub mod spec;
pub mod stats;
pub mod synthetic;
pub mod weather;

pub use data::{Alternative, ChoiceObservation, RawTripRecord};
pub use error::{Error, Result};
pub use estimate::{EstimationOptions, EstimationResult};
pub use halton::DrawMatrix;
pub use spec::{ModelSpecification, Term, TermKind};
