//! Nonlinear least-squares estimation for spectra and time traces.

mod lm;
mod models;

pub use lm::{
    nlls_minimize, Dataset, FitResult, LmOptions, NamedValue, Param, Termination, Transform,
};
pub use models::*;
