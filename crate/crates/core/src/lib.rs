//! Multi-fidelity estimation of extreme ship pitch response.
//!
//! The crate builds the whole chain used to correct a cheap seakeeping
//! simulation toward a more expensive one near its largest events:
//!
//! * [`seaway`] synthesizes irregular head-sea elevation records from a
//!   Bretschneider spectrum.
//! * [`hydro`] provides a high- and low-fidelity pitch/heave simulator pair
//!   driven by the same wave record.
//! * [`snippets`] finds low-fidelity pitch peaks and cuts fixed windows around
//!   them for training and inference.
//! * [`lstm`] is a from-scratch stacked LSTM with exact backpropagation
//!   through time, Adam updates and patience-based early stopping.
//! * [`evalstats`] scores per-realization maxima (correlation, R², kernel
//!   density, most probable maximum, percentiles).
//! * [`pipeline`] wires the stages into a reproducible on-disk experiment.

pub mod evalstats;
pub mod hydro;
pub mod lstm;
pub mod pipeline;
pub mod seaway;
pub mod snippets;
pub mod timeseries;

pub use timeseries::TimeSeries;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;
