//! Truncated Fock-space simulation of polarization and parity entangled
//! light: state factories, optical elements, composite circuits, and the
//! analysis routines used to quantify their entanglement.

pub mod analysis;
pub mod circuits;
pub mod elements;
pub mod error;
pub mod fock;
pub mod optimize;
pub mod runner;
pub mod states;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
