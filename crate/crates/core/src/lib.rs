//! Polarisation-aware RFI flagging with spiking neural networks.
//!
//! The pipeline turns complex visibility spectrograms into per-pixel RFI
//! flags: magnitudes (or a degree-of-polarisation reduction) are
//! divisively normalised, scaled to the unit interval, tiled into patches,
//! latency-encoded into spike trains, and classified by a feed-forward
//! leaky integrate-and-fire network trained with surrogate-gradient
//! backpropagation through time. Detection quality is scored per pixel
//! (accuracy, AUROC, AUPRC, F1) and deployment cost is estimated with a
//! synaptic-operation energy model for Xylo-scale neuromorphic hardware.

pub mod config;
pub mod data;
pub mod encoding;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod preprocess;
pub mod report;
pub mod snn;

pub use error::{Error, Result};
