//! Timely top-k data retrieval with content-based wake-up (CoWu).
//!
//! - [`model`]: scenario parameters, age-cost functions, per-episode k-QAoI.
//! - [`codec`]: threshold to wake-up frame length mapping.
//! - [`analytic`]: closed-form expected k-QAoI and energy for CoWu and the baselines.
//! - [`simulator`]: slot-level Monte-Carlo of the same schemes.
//! - [`optimizer`]: grid searches over the analytic model.
//! - [`figures`]: parameter presets for the evaluation figures.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod codec;
pub mod error;
pub mod figures;
pub mod model;
pub mod optimizer;
mod prob;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{AgeCost, ScenarioParams, SchemeSpec};
