//! Low-voltage feeder fault simulation, non-contact magnetic current sensing
//! and high-impedance fault (HIF) detection.
//!
//! The pipeline runs: [`line_network`] builds pi-sections from conductor
//! geometry, [`feeder_sim`] integrates the feeder with loads and a
//! [`fault_models`] branch, [`mag_sensing`] maps conductor currents to
//! magnetometer readings, [`current_inverse`] recovers the currents,
//! [`signal_features`] turns windows into feature vectors and
//! [`fault_detector`] labels them. [`io`] holds the file and stream formats.

pub mod config;
pub mod current_inverse;
pub mod error;
pub mod fault_detector;
pub mod fault_models;
pub mod io;
pub mod feeder_sim;
pub mod line_network;
pub mod mag_sensing;
pub mod signal_features;
pub mod waveform;

pub use error::{Error, Result};
pub use waveform::{ChannelInfo, ChannelRole, WaveformRecord};
