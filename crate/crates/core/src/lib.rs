//! Floquet analysis of a single particle tunneling in a periodically driven
//! optical double-well lattice.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: static potential, drive waveforms, linearized and exact drive forms
//! * [`stationary`]: plane-wave eigenproblem and the lowest doublet
//! * [`floquet`]: one-period propagator, extended-space oracle, scans and crossings
//! * [`twomode`]: Bessel-renormalized two-level approximation
//! * [`dynamics`]: time traces, momentum orders and sinusoidal fits
//!
//! Energies are in recoil units `E_r`, times in `ħ/E_r`, positions in `1/k`.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod floquet;
pub mod lattice;
pub mod linalg;
pub mod presets;
pub mod stationary;
pub mod twomode;
pub mod units;

pub use error::{Error, Result};
