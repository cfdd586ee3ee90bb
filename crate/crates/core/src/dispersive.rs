//! Dispersive cavity readout: state-dependent cavity pulls, single-mode
//! transmission and the population-weighted composite signal.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lindblad::DensityMatrix3;

/// `|g/Delta|` above which the dispersive expansion is flagged.
pub const DISPERSIVE_LIMIT: f64 = 0.1;

/// Smallest `|T2 - T0|` accepted by [`normalize`].
pub const NORMALIZATION_FLOOR: f64 = 1e-30;

/// All frequencies in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavitySpec {
    /// Bare cavity frequency.
    pub omega_cavity: f64,
    pub q_loaded: f64,
    /// Coupling to the 0-1 transition.
    pub g1: f64,
    /// Coupling to the 1-2 transition; `None` means `sqrt(2) g1`.
    pub g2: Option<f64>,
}

impl CavitySpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_cavity > 0.0 && self.omega_cavity.is_finite()) {
            return Err(Error::validation("cavity.frequency", "must be positive"));
        }
        if !(self.q_loaded > 0.0 && self.q_loaded.is_finite()) {
            return Err(Error::validation("cavity.q_loaded", "must be positive"));
        }
        if !self.g1.is_finite() || self.g2.is_some_and(|g| !g.is_finite()) {
            return Err(Error::validation("cavity.g1", "coupling must be finite"));
        }
        Ok(())
    }

    /// Loaded linewidth `omega / Q`.
    pub fn kappa(&self) -> f64 {
        self.omega_cavity / self.q_loaded
    }

    pub fn g2(&self) -> f64 {
        self.g2.unwrap_or(std::f64::consts::SQRT_2 * self.g1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersiveShifts {
    pub chi1: f64,
    pub chi2: f64,
    /// Cavity frequency offset with the transmon in level 0, 1, 2 (rad/s).
    pub pull_0: f64,
    pub pull_1: f64,
    pub pull_2: f64,
    /// `|g/Delta|` exceeded [`DISPERSIVE_LIMIT`] for one of the transitions.
    pub outside_dispersive: bool,
}

impl DispersiveShifts {
    pub fn pulls(&self) -> [f64; 3] {
        [self.pull_0, self.pull_1, self.pull_2]
    }
}

/// Second-order cavity pulls for transmon transitions `nu10`, `nu21` (rad/s).
///
/// With `chi1 = -g1/D10`, `chi2 = -g2/D21` and `Dij = omega_cavity - nu_ij`,
/// the cavity term is `-[g1 chi1 P0 - (g1 chi1 - g2 chi2) P1 - g2 chi2 P2] a+a`.
pub fn dispersive_shifts(cavity: &CavitySpec, nu10: f64, nu21: f64) -> Result<DispersiveShifts> {
    cavity.validate()?;
    let d10 = cavity.omega_cavity - nu10;
    let d21 = cavity.omega_cavity - nu21;
    if d10 == 0.0 || d21 == 0.0 {
        return Err(Error::ZeroDetuning);
    }
    let (g1, g2) = (cavity.g1, cavity.g2());
    let chi1 = -g1 / d10;
    let chi2 = -g2 / d21;
    Ok(DispersiveShifts {
        chi1,
        chi2,
        pull_0: -g1 * chi1,
        pull_1: g1 * chi1 - g2 * chi2,
        pull_2: g2 * chi2,
        outside_dispersive: chi1.abs() >= DISPERSIVE_LIMIT || chi2.abs() >= DISPERSIVE_LIMIT,
    })
}

/// Single-mode transmission amplitude `(k/2) / (k/2 + i(w_probe - w_state))`.
pub fn cavity_lorentzian(omega_probe: f64, omega_state: f64, kappa: f64) -> Complex64 {
    let half = 0.5 * kappa;
    Complex64::new(half, 0.0) / Complex64::new(half, omega_probe - omega_state)
}

/// Transmission with the transmon parked in each level, probed at the
/// ground-state-pulled cavity frequency.
pub fn state_transmissions(
    cavity: &CavitySpec,
    shifts: &DispersiveShifts,
) -> Result<[Complex64; 3]> {
    cavity.validate()?;
    let kappa = cavity.kappa();
    let probe = cavity.omega_cavity + shifts.pull_0;
    Ok(shifts
        .pulls()
        .map(|p| cavity_lorentzian(probe, cavity.omega_cavity + p, kappa)))
}

/// `rho00 T0 + rho11 T1 + rho22 T2`.
pub fn composite_transmission(rho: &DensityMatrix3, t: &[Complex64; 3]) -> Complex64 {
    (0..3).map(|k| t[k] * rho.population(k)).sum()
}

/// `(T - T0) / (T2 - T0)`.
pub fn normalize(t: Complex64, t0: Complex64, t2: Complex64) -> Result<Complex64> {
    let span = t2 - t0;
    if span.norm() < NORMALIZATION_FLOOR {
        return Err(Error::DegenerateNormalization);
    }
    Ok((t - t0) / span)
}
