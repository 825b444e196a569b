//! Model and estimation toolkit for AI research production.
//!
//! The crate has two halves that share one production function:
//!
//! * **Forward model**: a two-input CES aggregator of research compute and
//!   cognitive labor ([`ces`]), fed into the algorithm-quality law of motion
//!   `dA/dt = theta A^phi F(.)^lambda` with AI labor feeding back through
//!   effective labor. [`dynamics`] integrates the law of motion, detects
//!   finite-time blow-up, and classifies parameter regions analytically and
//!   numerically.
//!
//! * **Estimation**: the elasticity of substitution `sigma` is recovered
//!   from a firm-year panel by regressing the log compute/labor ratio on the
//!   log relative price, with firm fixed effects, cluster-robust and
//!   bootstrap standard errors, and an optional instrumental-variable stage
//!   ([`econometrics`]). [`panel`] ingests delimited panel files and applies
//!   the data-construction conventions (deflation to 2023 USD, research
//!   compute as a fixed share of training compute, salary-to-compensation
//!   imputation). [`synth`] generates panels from known parameters and holds
//!   the independent brute-force oracles used to validate the estimators.

pub mod ces;
pub mod dynamics;
pub mod econometrics;
pub mod error;
pub mod panel;
pub mod synth;

pub use error::{Error, Result};
