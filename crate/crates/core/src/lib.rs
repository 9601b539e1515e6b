//! Imbalanced time-series anomaly detection through waveform images.
//!
//! The pipeline renders each series as a grayscale waveform ([`s2i`]),
//! rebalances the training set by cluster-aware minority oversampling
//! ([`crd`]), and trains a small convolutional classifier ([`nn`]) with a
//! loss whose class weights follow the running variance of the model's
//! true-class probabilities ([`vbl`]). [`eval`] scores predictions and runs
//! the ablation grid; [`pipeline`] wires the stages to on-disk artifacts.

pub mod config;
pub mod crd;
pub mod data;
pub mod error;
pub mod eval;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod s2i;
pub mod vbl;

pub use error::{GtdaError, Result};
