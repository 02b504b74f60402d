//! Link-level simulation of a low-complexity terahertz baseband.
//!
//! The crate models the full chain used to study parallel short-code
//! processing with pseudo-soft information (PSI):
//!
//! - [`chanmod`]: synthetic frequency-selective MIMO channels with spreading
//!   and molecular absorption loss.
//! - [`phymap`]: QPSK and the mapping of short codewords onto
//!   layer/subcarrier/time resource cells.
//! - [`detect`]: ZF, MMSE, chase, punctured chase and subspace detectors,
//!   each reporting per-layer PSI and a multiply-accumulate tally.
//! - [`fec`]: CRC, CA-polar with SC-List, GRAND/ORBGRAND and an 8-state
//!   rate-1/3 turbo code.
//! - [`simcore`]: deterministic, worker-count independent Monte Carlo BLER
//!   sweeps and complexity accounting.
//! - [`config`] and [`emit`]: experiment configuration and result files.

pub mod chanmod;
pub mod config;
pub mod detect;
pub mod emit;
mod error;
pub mod fec;
pub mod phymap;
pub mod rng;
pub mod simcore;

pub use error::{Error, Result};

/// A single bit stored as `0` or `1`.
pub type Bit = u8;

/// Complex baseband sample.
pub type Complex = num_complex::Complex64;
