//! Link-level simulator and detector suite for index-modulation-aided
//! MIMO-OFDM: frame mapping, stochastic channels, classical and learned
//! detectors, training, and Monte-Carlo BER/timing harnesses.

pub mod channel;
pub mod config;
pub mod detect;
pub mod error;
pub mod linalg;
pub mod mapping;
pub mod nn;
pub mod rng;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
pub use mapping::{BitBudget, ImConfig, ImFrame, ImMapper, SignalMatrix};
