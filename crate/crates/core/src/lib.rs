//! Frequency-domain link simulator for 802.11g OFDM packets hit by a
//! Bluetooth HV1 interferer, with symbol-erasure mitigation at the receiver.
//!
//! The crate is `no_std` (it needs `alloc`) and contains no IO. Everything a
//! Monte Carlo trial touches is a pure function of its inputs and an explicit
//! seeded random stream, so results depend only on configuration and seed.
//!
//! Module map:
//!
//! - [`codec`]: K=7 convolutional code, puncturing, bit interleaver and a
//!   soft-decision Viterbi decoder that accepts erased positions.
//! - [`ofdm`]: rate table, Gray constellations, max-log demapper and packet
//!   assembly onto the 64-slot subcarrier grid.
//! - [`channel`]: exponential-profile Rayleigh block fading and AWGN.
//! - [`bluetooth`]: GFSK burst generation, spectral footprint on the OFDM
//!   subcarriers, hop/slot timeline and injection into the grid.
//! - [`erasure`]: per-symbol erasure masks around the interferer carrier.
//! - [`engine`]: one packet transaction and the PER estimator.
#![no_std]

extern crate alloc;

pub mod bluetooth;
pub mod channel;
pub mod codec;
pub mod engine;
pub mod erasure;
mod error;
pub mod ofdm;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;
