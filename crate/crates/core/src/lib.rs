//! LoRa chirp-spread-spectrum detection laboratory.
//!
//! The crate covers the whole receive chain used to compare classical and
//! learned LoRa symbol detectors under co-channel LoRa interference:
//!
//! - [`phy`]: CSS modulation, dechirping, FFT and STFT.
//! - [`channel`]: target + delayed interferer + AWGN mixtures at a given INR/SINR.
//! - [`classic`]: coherent and noncoherent FFT detectors.
//! - [`nn`]: a small CPU CNN engine (conv, batch norm, pooling, dropout, dense, SGDM).
//! - [`models`]: the IQ/STFT/FFT CNNs, the interference detector and HybNet switching.
//! - [`dataset`]: labelled corpus generation and the `LDS1` container.
//! - [`bench`]: Monte-Carlo BER sweeps, envelope checks, cost and timing.

mod binio;
pub mod bench;
pub mod channel;
pub mod classic;
pub mod dataset;
pub mod error;
pub mod models;
pub mod nn;
pub mod phy;
pub mod rng;

pub use error::{Error, Result};
