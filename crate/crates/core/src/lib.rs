//! Compressed channel estimation for high-speed-train SIMO-OFDM with
//! position-based ICI elimination and low-coherence pilot design.
//!
//! Module map:
//! - [`config`]: system parameters and the TOML config loader
//! - [`geometry`]: position → Doppler → dominant BEM index
//! - [`bem`]: CE-BEM bases, channel synthesis, banded channel matrices
//! - [`phy`]: OFDM symbol assembly, channel/noise, ZF combining, BER
//! - [`ici`]: receive-pattern permutation and ICI-free pilot extraction
//! - [`pilot`]: average coherence and pilot pattern search
//! - [`sparse`]: OMP, BP, LS estimators
//! - [`experiment`]: seeded Monte Carlo sweeps and CSV/SVG output

pub mod bem;
pub mod config;
pub mod dft;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod ici;
pub mod phy;
pub mod pilot;
pub mod sparse;

pub use error::{Error, Result};
