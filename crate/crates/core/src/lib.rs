//! Beyond-diagonal RIS scattering-matrix design for integrated sensing and
//! communication.
//!
//! The crate synthesizes a scenario ([`channel`]), expresses the radar and
//! communication SNRs as quadratic forms in the scattering-matrix parameters
//! ([`model`]), and maximizes their weighted sum under symmetry, unit-modulus,
//! alphabet and unitarity constraints with a penalty-based alternating
//! scheme ([`optimizer`]). [`baselines`] provides the diagonal-RIS, no-RIS
//! and random comparison points; [`cli`] drives experiments.

pub mod baselines;
pub mod channel;
pub mod cli;
pub mod config;
pub mod error;
pub mod linalg;
pub mod model;
pub mod optimizer;

pub use error::{Error, Result};
