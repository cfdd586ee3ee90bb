//! Transmission spectra of a driven transmon qutrit read out through a
//! dispersively coupled cavity: simulation, spectral fitting and
//! discrimination between electromagnetically induced transparency (EIT) and
//! Autler-Townes splitting (ATS).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod dispersive;
pub mod error;
pub mod fitting;
pub mod harness;
pub mod io;
pub mod lindblad;
pub mod model_selection;
pub mod spectra;
pub mod transmon;
pub mod units;

pub use error::{Error, Result};
