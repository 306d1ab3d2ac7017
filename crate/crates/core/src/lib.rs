//! Desk-scale simulator and analysis toolkit for a cavity-coupled
//! quantum-dot single-photon source.
//!
//! The crate is split along the physical pipeline:
//!
//! * [`optics`] builds excitation pulses and applies the Fourier-plane slit
//!   and the Lorentzian cavity-mode response.
//! * [`emitter`] integrates the driven two-level emitter (density matrix,
//!   photon-number resolved master equation and quantum jumps).
//! * [`photonstream`] turns per-pulse emissions into detector timestamp
//!   streams through loss, beamsplitters and detectors.
//! * [`analysis`] measures squeezing, consecutive-photon runs, g²(0) and
//!   two-photon interference visibility from those streams.
//! * [`budget`] keeps the efficiency ledger and computes Bragg mirror
//!   reflectivities.
//!
//! Units: time in picoseconds, frequency in GHz, decay rates in ns⁻¹, unless a
//! field name says otherwise.

pub mod analysis;
pub mod budget;
pub mod emitter;
mod error;
pub mod optics;
pub mod photonstream;
pub mod rng;
pub mod units;

pub use error::{Error, Result};
