//! Cardiorespiratory parameter extraction and time-independent causal
//! structure discovery.
//!
//! The pipeline turns ECG and impedance-pneumography recordings (or a
//! precomputed parameter table) into ten per-recording parameters, screens
//! pairwise associations, runs several causal structure-search methods per
//! body position, tallies a consensus graph and tests selected mediation
//! paths.

pub mod association;
pub mod cardio;
pub mod consensus;
pub mod dsp;
pub mod error;
pub mod features;
pub mod graph;
pub mod mediation;
pub mod pipeline;
pub mod record_io;
pub mod resp;
pub mod search;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use record_io::{ParameterName, ParameterTable, Position, SignalRecord};
