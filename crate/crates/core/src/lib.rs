//! Numerical protective measurements.
//!
//! A von Neumann pointer is coupled weakly and adiabatically to a single
//! quantum system whose state is protected, either by an energy gap or by
//! frequent projections, so that the final pointer position reads the
//! expectation value of the measured observable. The crate also covers the
//! contrasting weak-measurement regime, weak values under pre- and
//! post-selection, wave-function tomography on a single system and recovery
//! of a trap potential from its ground state.

pub mod dynamics;
pub mod error;
pub mod pointer;
pub mod protocols;
pub mod quantum;
pub mod reconstruction;
pub mod schedule;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
