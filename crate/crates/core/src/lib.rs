//! Spiking neural network laboratory: IF/LIF dynamics, noisy Poisson encoding,
//! surrogate-gradient training, and frequency-domain analysis.

pub mod analysis;
pub mod coherence;
pub mod dataset;
pub mod encoding;
pub mod error;
pub mod experiment;
pub mod io;
pub mod network;
pub mod neuron;
pub mod training;

pub use error::{Result, SnnError};
