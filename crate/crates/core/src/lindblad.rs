//! Driven qutrit under the Born-Markov master equation.
//!
//! Levels `|0>, |1>, |2>`; the control field couples `|1> <-> |2>` on
//! resonance and the probe couples `|0> <-> |2>` with detuning `delta`. In the
//! doubly rotating frame both excited levels sit at `delta`. All rates and
//! drive strengths are angular (rad/s).
//!
//! Dissipators use `D[O] rho = 2 O rho O^+ - O^+ O rho - rho O^+ O` with
//! prefactor `Gamma/2` for relaxation and `gamma_phi` for dephasing.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat3 = Matrix3<Complex64>;

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThreeLevelRates {
    pub gamma_10: f64,
    pub gamma_20: f64,
    pub gamma_21: f64,
    pub dephasing_00: f64,
    pub dephasing_11: f64,
    pub dephasing_22: f64,
}

impl ThreeLevelRates {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("Gamma10", self.gamma_10),
            ("Gamma20", self.gamma_20),
            ("Gamma21", self.gamma_21),
            ("gamma_phi00", self.dephasing_00),
            ("gamma_phi11", self.dephasing_11),
            ("gamma_phi22", self.dephasing_22),
        ];
        for (name, v) in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::validation(
                    name,
                    format!("rate must be finite and non-negative, got {v}"),
                ));
            }
        }
        Ok(())
    }

    /// Decay rate of `rho_10`.
    pub fn coherence_10(&self) -> f64 {
        0.5 * self.gamma_10 + self.dephasing_00 + self.dephasing_11
    }

    /// Decay rate of `rho_20`.
    pub fn coherence_20(&self) -> f64 {
        0.5 * (self.gamma_20 + self.gamma_21) + self.dephasing_00 + self.dephasing_22
    }

    /// Decay rate of `rho_21`: every relaxation channel out of `|1>` or `|2>`
    /// plus their dephasing.
    pub fn coherence_21(&self) -> f64 {
        0.5 * (self.gamma_10 + self.gamma_20 + self.gamma_21)
            + self.dephasing_11
            + self.dephasing_22
    }

    pub fn max_rate(&self) -> f64 {
        [
            self.gamma_10,
            self.gamma_20,
            self.gamma_21,
            self.dephasing_00,
            self.dephasing_11,
            self.dephasing_22,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn is_dissipationless(&self) -> bool {
        self.max_rate() == 0.0
    }

    pub fn scaled(&self, k: f64) -> Self {
        ThreeLevelRates {
            gamma_10: k * self.gamma_10,
            gamma_20: k * self.gamma_20,
            gamma_21: k * self.gamma_21,
            dephasing_00: k * self.dephasing_00,
            dephasing_11: k * self.dephasing_11,
            dephasing_22: k * self.dephasing_22,
        }
    }
}

/// Ratio `Omega_p / Omega_c` above which the weak-probe closed forms are
/// flagged as unreliable.
pub const WEAK_PROBE_RATIO: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriveConfig {
    pub omega_c: f64,
    pub omega_p: f64,
    pub delta: f64,
}

impl DriveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_c >= 0.0) || !self.omega_c.is_finite() {
            return Err(Error::validation(
                "omega_c",
                "control drive must be finite and non-negative",
            ));
        }
        if !(self.omega_p >= 0.0) || !self.omega_p.is_finite() {
            return Err(Error::validation(
                "omega_p",
                "probe drive must be finite and non-negative",
            ));
        }
        if !self.delta.is_finite() {
            return Err(Error::validation("delta", "detuning must be finite"));
        }
        Ok(())
    }

    /// False when the probe is too strong for the weak-probe closed forms.
    pub fn is_weak_probe(&self) -> bool {
        self.omega_p <= WEAK_PROBE_RATIO * self.omega_c
    }

    pub fn with_delta(&self, delta: f64) -> Self {
        DriveConfig { delta, ..*self }
    }
}

/// Tolerances a valid state must satisfy.
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix3(pub Mat3);

impl DensityMatrix3 {
    pub fn pure(level: usize) -> Self {
        let mut m = Mat3::zeros();
        m[(level, level)] = c(1.0);
        DensityMatrix3(m)
    }

    pub fn ground() -> Self {
        Self::pure(0)
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn population(&self, level: usize) -> f64 {
        self.0[(level, level)].re
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (self.0 - self.0.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.0 + self.0.adjoint()) * c(0.5);
        SymmetricEigen::new(herm)
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::invalid(format!(
                "density matrix not Hermitian (error {herm:.3e})"
            )));
        }
        let tr = self.trace();
        if (tr - c(1.0)).norm() > TRACE_TOL {
            return Err(Error::invalid(format!(
                "density matrix trace {tr} differs from 1"
            )));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Error::invalid(format!(
                "density matrix has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(())
    }
}

fn ket_bra(i: usize, j: usize) -> Mat3 {
    let mut m = Mat3::zeros();
    m[(i, j)] = c(1.0);
    m
}

/// `delta (|1><1| + |2><2|) - (Omega_c |2><1| + Omega_p |2><0| + h.c.)`.
pub fn rotating_frame_hamiltonian(drive: &DriveConfig) -> Mat3 {
    let mut h = Mat3::zeros();
    h[(1, 1)] = c(drive.delta);
    h[(2, 2)] = c(drive.delta);
    h[(2, 1)] = c(-drive.omega_c);
    h[(1, 2)] = c(-drive.omega_c);
    h[(2, 0)] = c(-drive.omega_p);
    h[(0, 2)] = c(-drive.omega_p);
    h
}

/// Jump operators paired with the coefficient multiplying `D[O]`.
fn dissipators(rates: &ThreeLevelRates) -> [(f64, Mat3); 6] {
    [
        (0.5 * rates.gamma_10, ket_bra(0, 1)),
        (0.5 * rates.gamma_20, ket_bra(0, 2)),
        (0.5 * rates.gamma_21, ket_bra(1, 2)),
        (rates.dephasing_00, ket_bra(0, 0)),
        (rates.dephasing_11, ket_bra(1, 1)),
        (rates.dephasing_22, ket_bra(2, 2)),
    ]
}

/// Master-equation generator for a fixed Hamiltonian and rate set.
#[derive(Debug, Clone)]
pub struct Generator {
    hamiltonian: Mat3,
    channels: Vec<(f64, Mat3, Mat3)>,
}

impl Generator {
    pub fn new(rates: &ThreeLevelRates, drive: &DriveConfig) -> Self {
        let channels = dissipators(rates)
            .into_iter()
            .filter(|(k, _)| *k != 0.0)
            .map(|(k, o)| {
                let odo = o.adjoint() * o;
                (k, o, odo)
            })
            .collect();
        Generator {
            hamiltonian: rotating_frame_hamiltonian(drive),
            channels,
        }
    }

    /// `d rho / dt`.
    pub fn apply(&self, rho: &Mat3) -> Mat3 {
        let h = &self.hamiltonian;
        let mut out = (h * rho - rho * h) * (-I);
        for (k, o, odo) in &self.channels {
            out += (o * rho * o.adjoint() * c(2.0) - odo * rho - rho * odo) * c(*k);
        }
        out
    }

    /// 9x9 superoperator acting on row-major `vec(rho)`.
    pub fn superoperator(&self) -> DMatrix<Complex64> {
        let mut l = DMatrix::<Complex64>::zeros(9, 9);
        for col in 0..9 {
            let mut basis = Mat3::zeros();
            basis[(col / 3, col % 3)] = c(1.0);
            let image = self.apply(&basis);
            for row in 0..9 {
                l[(row, col)] = image[(row / 3, row % 3)];
            }
        }
        l
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Integration step (s). `None` picks `1 / (200 max(rates, drives))`.
    pub step: Option<f64>,
    /// Record every `stride`-th step (the initial and final states are always kept).
    pub stride: usize,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            step: None,
            stride: 1,
        }
    }
}

/// Largest trace drift tolerated during integration.
pub const TRACE_DRIFT_LIMIT: f64 = 1e-6;

pub fn default_step(rates: &ThreeLevelRates, drive: &DriveConfig) -> f64 {
    let scale = rates
        .max_rate()
        .max(drive.omega_c)
        .max(drive.omega_p)
        .max(drive.delta.abs());
    if scale > 0.0 {
        1.0 / (200.0 * scale)
    } else {
        1.0
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix3>,
    pub step: f64,
}

impl Trajectory {
    pub fn last(&self) -> &DensityMatrix3 {
        self.states
            .last()
            .expect("trajectory always holds the initial state")
    }
}

fn rk4_step(g: &Generator, rho: &Mat3, dt: f64) -> Mat3 {
    let half = c(0.5 * dt);
    let k1 = g.apply(rho);
    let k2 = g.apply(&(rho + k1 * half));
    let k3 = g.apply(&(rho + k2 * half));
    let k4 = g.apply(&(rho + k3 * c(dt)));
    rho + (k1 + k2 * c(2.0) + k3 * c(2.0) + k4) * c(dt / 6.0)
}

/// Fixed-step fourth-order Runge-Kutta integration of the master equation.
pub fn evolve(
    rho0: &DensityMatrix3,
    rates: &ThreeLevelRates,
    drive: &DriveConfig,
    duration: f64,
    options: EvolveOptions,
) -> Result<Trajectory> {
    rates.validate()?;
    drive.validate()?;
    rho0.validate()?;
    let step = options.step.unwrap_or_else(|| default_step(rates, drive));
    if !(step > 0.0) || !step.is_finite() {
        return Err(Error::invalid("step must be positive"));
    }
    if !(duration >= step) {
        return Err(Error::invalid("duration must be at least one step"));
    }
    let stride = options.stride.max(1);
    let g = Generator::new(rates, drive);
    let n_steps = (duration / step).round() as usize;
    let dt = duration / n_steps as f64;

    let mut rho = rho0.0;
    let mut times = vec![0.0];
    let mut states = vec![*rho0];
    for k in 1..=n_steps {
        rho = rk4_step(&g, &rho, dt);
        // Hermitian part only; the integrator preserves it to round-off.
        rho = (rho + rho.adjoint()) * c(0.5);
        let t = k as f64 * dt;
        let drift = (rho.trace() - c(1.0)).norm();
        if drift > TRACE_DRIFT_LIMIT {
            return Err(Error::TraceDrift {
                drift,
                time: t,
                step: dt,
            });
        }
        if k % stride == 0 || k == n_steps {
            times.push(t);
            states.push(DensityMatrix3(rho));
        }
    }
    Ok(Trajectory {
        times,
        states,
        step: dt,
    })
}

/// Relative threshold below which a singular value of the Liouvillian counts
/// as zero.
const NULL_SPACE_TOL: f64 = 1e-12;

/// Steady state from the null space of the 9x9 Liouvillian, normalized to
/// unit trace.
pub fn steady_state(rates: &ThreeLevelRates, drive: &DriveConfig) -> Result<DensityMatrix3> {
    rates.validate()?;
    drive.validate()?;
    if rates.is_dissipationless() {
        return Err(Error::NoUniqueSteadyState(3));
    }
    let l = Generator::new(rates, drive).superoperator();
    let scale = l.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let svd = l.clone().svd(false, false);
    let null_dim = svd
        .singular_values
        .iter()
        .filter(|s| **s <= NULL_SPACE_TOL * scale)
        .count();
    if null_dim > 1 {
        return Err(Error::NoUniqueSteadyState(null_dim));
    }

    // Replace the generator with the trace condition appended and solve in the
    // least-squares sense; with a one-dimensional null space this is exact.
    let mut a = DMatrix::<Complex64>::zeros(10, 9);
    a.view_mut((0, 0), (9, 9)).copy_from(&(l / c(scale)));
    for k in [0, 4, 8] {
        a[(9, k)] = c(1.0);
    }
    let mut b = DVector::<Complex64>::zeros(10);
    b[9] = c(1.0);
    let x = a
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::invalid(format!("steady-state solve failed: {e}")))?;
    let mut rho = Mat3::from_fn(|i, j| x[3 * i + j]);
    rho = (rho + rho.adjoint()) * c(0.5);
    let tr = rho.trace();
    Ok(DensityMatrix3(rho / tr))
}

/// Weak-probe steady-state coherence
/// `Omega_p / (delta - i gamma20 - Omega_c^2 / (delta - i gamma10))`.
pub fn coherence_rho20_analytic(rates: &ThreeLevelRates, drive: &DriveConfig) -> Result<Complex64> {
    let g10 = rates.coherence_10();
    let g20 = rates.coherence_20();
    let inner = Complex64::new(drive.delta, -g10);
    if drive.omega_c > 0.0 && inner.norm() < 1e-30 {
        return Err(Error::PoleAtOrigin);
    }
    let mut denom = Complex64::new(drive.delta, -g20);
    if drive.omega_c > 0.0 {
        denom -= c(drive.omega_c * drive.omega_c) / inner;
    }
    if denom.norm() < 1e-30 {
        return Err(Error::PoleAtOrigin);
    }
    Ok(c(drive.omega_p) / denom)
}

/// Weak-probe steady-state populations `(rho_11, rho_22)` to second order in
/// the probe.
///
/// Balances the population equations against the `rho_21` coherence, whose
/// source includes both the control-driven population difference and the
/// probe acting on `rho_01`:
///
/// ```text
/// (Gamma10 gamma21 + 2 Omega_c^2) rho11 - (Gamma21 gamma21 + 2 Omega_c^2) rho22 = -2 Omega_c Omega_p Re(rho10)
///  Gamma10 rho11 + Gamma20 rho22 = 2 Omega_p Im(rho20)
/// ```
///
/// with `rho10 = i Omega_c rho20 / (gamma10 + i delta)`.
pub fn populations_analytic(rates: &ThreeLevelRates, drive: &DriveConfig) -> Result<(f64, f64)> {
    let rho20 = coherence_rho20_analytic(rates, drive)?;
    let g10 = rates.coherence_10();
    let g21 = rates.coherence_21();
    let oc2 = drive.omega_c * drive.omega_c;
    let rho10 = I * c(drive.omega_c) * rho20 / Complex64::new(g10, drive.delta);

    let a = rates.gamma_10 * g21 + 2.0 * oc2;
    let b = rates.gamma_21 * g21 + 2.0 * oc2;
    let src_21 = -2.0 * drive.omega_c * drive.omega_p * rho10.re;
    let src_pop = 2.0 * drive.omega_p * rho20.im;
    let det = a * rates.gamma_20 + b * rates.gamma_10;
    if det.abs() < 1e-300 || !det.is_finite() {
        return Err(Error::DegenerateDenominator);
    }
    let rho11 = (src_21 * rates.gamma_20 + b * src_pop) / det;
    let rho22 = (a * src_pop - rates.gamma_10 * src_21) / det;
    Ok((rho11, rho22))
}

/// Population closed form in its `C1, C2` shorthand, evaluated literally:
/// `rho11 = 2 C1 Omega_p Im(rho20) / (C1 Gamma20 + C2 Gamma10)` with
/// `C1 = gamma21 (Gamma10 gamma21 - 2 Omega_c^2)` and
/// `C2 = gamma21 (Gamma21 gamma21 - 2 Omega_c^2)`.
///
/// Kept for comparison only: it does not satisfy the steady-state balance
/// `Gamma10 rho11 + Gamma20 rho22 = 2 Omega_p Im(rho20)` unless
/// `Gamma10 = Gamma20`. Use [`populations_analytic`].
pub fn populations_c1c2_form(
    rates: &ThreeLevelRates,
    drive: &DriveConfig,
    im_rho20: f64,
) -> Result<(f64, f64)> {
    let g21 = rates.coherence_21();
    let oc2 = drive.omega_c * drive.omega_c;
    let c1 = g21 * (rates.gamma_10 * g21 - 2.0 * oc2);
    let c2 = g21 * (rates.gamma_21 * g21 - 2.0 * oc2);
    let denom = c1 * rates.gamma_20 + c2 * rates.gamma_10;
    if denom.abs() < 1e-300 {
        return Err(Error::DegenerateDenominator);
    }
    let k = 2.0 * drive.omega_p * im_rho20 / denom;
    Ok((c1 * k, c2 * k))
}

/// Excited-state population `rho_22(t)` for a probe drive resonant with
/// `|0> <-> |2>` and the control off, starting in the ground state.
pub fn rabi_trace(rates: &ThreeLevelRates, drive: &DriveConfig, times: &[f64]) -> Result<Vec<f64>> {
    if drive.omega_c != 0.0 {
        return Err(Error::invalid("Rabi trace requires the control drive off"));
    }
    if times.is_empty() {
        return Ok(Vec::new());
    }
    if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "times must be non-negative and strictly increasing",
        ));
    }
    rates.validate()?;
    drive.validate()?;
    let g = Generator::new(rates, drive);
    let max_step = default_step(rates, drive);
    let mut rho = DensityMatrix3::ground().0;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let span = t - now;
        if span > 0.0 {
            let n = (span / max_step).ceil().max(1.0) as usize;
            let dt = span / n as f64;
            for _ in 0..n {
                rho = rk4_step(&g, &rho, dt);
            }
            rho = (rho + rho.adjoint()) * c(0.5);
            let drift = (rho.trace() - c(1.0)).norm();
            if drift > TRACE_DRIFT_LIMIT {
                return Err(Error::TraceDrift {
                    drift,
                    time: t,
                    step: dt,
                });
            }
        }
        now = t;
        out.push(rho[(2, 2)].re);
    }
    Ok(out)
}
