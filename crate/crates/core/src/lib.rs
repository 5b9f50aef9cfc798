//! Dynamic-systems analysis of project-driven production processes.
//!
//! A process is described by a productivity function `P(t)` (an impulse gain
//! plus a sum of real exponential modes) relating its input `U(t)` to its
//! output `Y(t) = P(t) * U(t)`. The crate evaluates step responses and
//! settling times, statistical process-control indices, variability
//! propagation along a process chain, and fits productivity functions from
//! recorded runs.

// `!(x > 0.0)` is used on purpose throughout: it rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod flowchain;
pub mod identify;
pub mod model;
pub mod report;
pub mod spc;
pub mod transient;

pub use error::{Error, Result};
pub use model::{ExponentialMode, ProcessRun, ProductivityFunction, TimeSeries};
