//! Conversions between file-facing frequencies (MHz, GHz) and the internal
//! angular unit (rad/s).

use std::f64::consts::TAU;

/// Angular frequency (rad/s) of `f` MHz.
pub fn mhz(f: f64) -> f64 {
    TAU * f * 1e6
}

/// Inverse of [`mhz`].
pub fn to_mhz(omega: f64) -> f64 {
    omega / (TAU * 1e6)
}

pub fn hz(f: f64) -> f64 {
    TAU * f
}

pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}
