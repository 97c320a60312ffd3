//! Reference differential-privacy mechanisms and a benchmarking harness that
//! measures what they cost.
//!
//! The crate has two halves. The mechanism half holds noisy statistical
//! queries (count, sum, average, histogram) built on the Laplace mechanism,
//! and linear regression trained with DP-SGD together with a Rényi-DP
//! accountant that calibrates the noise multiplier for a target `(ε, δ)`.
//! The harness half runs every task twice per repetition, once privately and
//! once without protection, on the same subsample, and records wall time and
//! peak resident memory for both critical sections. Records are aggregated
//! into RMSPE utility loss, runtime RMSPE and worst-case memory overhead per
//! `(task, ε, size)` cell, and emitted as plot-ready grids.
//!
//! Module map:
//!
//! - [`data`]: datasets, column metadata, CSV ingestion, subsampling,
//!   neighbouring datasets and synthetic generators.
//! - [`mechanisms`]: noise samplers, clamping, the Laplace mechanism and the
//!   sequential-composition budget ledger.
//! - [`queries`]: the four aggregate queries in private and exact form.
//! - [`dpml`]: DP-SGD linear regression and the RDP accountant.
//! - [`metrics`]: RMSPE, trimming and overhead percentages.
//! - [`harness`]: experiment plans, probes, execution and record files.
//! - [`report`]: aggregation into summaries and plot-data emission.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod dpml;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod metrics;
pub mod queries;
pub mod report;
pub mod rng;

pub use error::{Error, Result};

/// Privacy budgets swept by default.
pub const EPSILON_GRID: [f64; 13] = [
    0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0,
];

/// Default dataset sizes for a categorical survey-shaped dataset.
pub const SURVEY_SIZES: [usize; 10] = [1000, 2000, 3000, 4000, 5000, 6000, 7000, 8000, 9000, 9358];

/// Default dataset sizes for a continuous clinical-shaped dataset.
pub const CLINICAL_SIZES: [usize; 6] = [1000, 2000, 3000, 4000, 5000, 5499];
