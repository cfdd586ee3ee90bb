//! Flux-tunable transmon in the truncated charge basis.
//!
//! The Hamiltonian `4 E_C (n - n_g)^2 - E_J cos(phi)` is tridiagonal in the
//! charge states `|m>`, `m = -N..=N`: `cos(phi)` shifts the charge by one
//! Cooper pair, `n` is diagonal. All energies are frequencies in Hz.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative eigenfrequency change tolerated when the cutoff grows by
/// [`CUTOFF_CHECK_STEP`].
pub const CUTOFF_TOLERANCE: f64 = 1e-9;
pub const CUTOFF_CHECK_STEP: usize = 5;
pub const DEFAULT_CUTOFF: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmonSpec {
    /// Charging energy E_C/h (Hz).
    pub e_c: f64,
    /// Per-junction Josephson energy E_J0/h (Hz).
    pub e_j0: f64,
    /// Static flux through the SQUID loop in units of the flux quantum.
    pub flux_ratio: f64,
    /// Offset charge in Cooper pairs.
    pub n_g: f64,
    /// Basis spans `m = -charge_cutoff..=charge_cutoff`.
    pub charge_cutoff: usize,
    pub num_levels: usize,
    /// Re-diagonalize at `charge_cutoff + 5` and compare.
    pub check_convergence: bool,
}

impl TransmonSpec {
    /// Parameters with a given total E_J at zero flux.
    pub fn from_ratio(e_c: f64, ej_over_ec: f64, n_g: f64) -> Self {
        TransmonSpec {
            e_c,
            e_j0: 0.5 * ej_over_ec * e_c,
            flux_ratio: 0.0,
            n_g,
            charge_cutoff: DEFAULT_CUTOFF,
            num_levels: 3,
            check_convergence: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e_c > 0.0) || !self.e_c.is_finite() {
            return Err(Error::validation("E_C", "charging energy must be positive"));
        }
        if !(self.e_j0 >= 0.0) || !self.e_j0.is_finite() {
            return Err(Error::validation(
                "E_J0",
                "Josephson energy must be non-negative",
            ));
        }
        if !self.flux_ratio.is_finite() || !self.n_g.is_finite() {
            return Err(Error::validation(
                "flux_ratio",
                "flux and offset charge must be finite",
            ));
        }
        if self.charge_cutoff < 5 {
            return Err(Error::validation("charge_cutoff", "must be at least 5"));
        }
        if self.num_levels == 0 || self.num_levels > 2 * self.charge_cutoff + 1 {
            return Err(Error::validation(
                "num_levels",
                format!("must lie in 1..={}", 2 * self.charge_cutoff + 1),
            ));
        }
        Ok(())
    }

    /// Flux folded into the canonical range [-0.5, 0.5].
    pub fn folded_flux(&self) -> f64 {
        self.flux_ratio - self.flux_ratio.round()
    }
}

/// `E_J = 2 E_J0 cos(pi Phi_x / Phi_0)`. Negative for unfolded flux beyond
/// half a quantum; [`diagonalize`] uses the magnitude.
pub fn effective_josephson(spec: &TransmonSpec) -> f64 {
    2.0 * spec.e_j0 * (PI * spec.flux_ratio).cos()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmonSolution {
    /// Level frequencies (Hz) above the ground state, ascending.
    pub eigen_frequencies: Vec<f64>,
    /// `|<i|n|j>|`, row-major `num_levels x num_levels`.
    pub n_elements: Vec<Vec<f64>>,
    /// `|<i|cos(phi)|j>|`.
    pub cosphi_elements: Vec<Vec<f64>>,
    pub ej_over_ec: f64,
}

impl TransmonSolution {
    pub fn num_levels(&self) -> usize {
        self.eigen_frequencies.len()
    }

    /// `omega_ij = omega_i - omega_j` in Hz.
    pub fn transition(&self, i: usize, j: usize) -> f64 {
        self.eigen_frequencies[i] - self.eigen_frequencies[j]
    }

    pub fn n_element(&self, i: usize, j: usize) -> f64 {
        self.n_elements[i][j]
    }

    pub fn cosphi_element(&self, i: usize, j: usize) -> f64 {
        self.cosphi_elements[i][j]
    }
}

fn hamiltonian(e_c: f64, e_j: f64, n_g: f64, cutoff: usize) -> DMatrix<f64> {
    let dim = 2 * cutoff + 1;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim {
        let m = k as f64 - cutoff as f64;
        h[(k, k)] = 4.0 * e_c * (m - n_g).powi(2);
        if k + 1 < dim {
            h[(k, k + 1)] = -0.5 * e_j;
            h[(k + 1, k)] = -0.5 * e_j;
        }
    }
    h
}

struct Eigenpairs {
    values: Vec<f64>,
    vectors: DMatrix<f64>,
}

fn solve(spec: &TransmonSpec, cutoff: usize) -> Result<Eigenpairs> {
    let e_j = effective_josephson(spec).abs();
    let h = hamiltonian(spec.e_c, e_j, spec.n_g, cutoff);
    let dim = h.nrows();
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 10_000).ok_or(Error::EigenNonConvergence)?;
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = DMatrix::from_fn(dim, dim, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Eigenpairs { values, vectors })
}

/// Diagonalize the transmon and return the lowest `num_levels` levels with
/// their charge and `cos(phi)` matrix elements.
pub fn diagonalize(spec: &TransmonSpec) -> Result<TransmonSolution> {
    spec.validate()?;
    let cutoff = spec.charge_cutoff;
    let levels = spec.num_levels;
    let pairs = solve(spec, cutoff)?;
    let ground = pairs.values[0];
    let eigen_frequencies: Vec<f64> = pairs.values[..levels].iter().map(|v| v - ground).collect();

    if spec.check_convergence {
        let wider = solve(spec, cutoff + CUTOFF_CHECK_STEP)?;
        let g = wider.values[0];
        let scale = eigen_frequencies
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()))
            .max(spec.e_c);
        let change = eigen_frequencies
            .iter()
            .zip(&wider.values)
            .map(|(a, b)| (a - (b - g)).abs() / scale)
            .fold(0.0_f64, f64::max);
        if change > CUTOFF_TOLERANCE {
            return Err(Error::CutoffNotConverged {
                cutoff,
                change,
                tolerance: CUTOFF_TOLERANCE,
            });
        }
    }

    let dim = 2 * cutoff + 1;
    let v = &pairs.vectors;
    let mut n_elements = vec![vec![0.0; levels]; levels];
    let mut cosphi_elements = vec![vec![0.0; levels]; levels];
    for i in 0..levels {
        for j in i..levels {
            let mut n_ij = 0.0;
            let mut c_ij = 0.0;
            for k in 0..dim {
                let m = k as f64 - cutoff as f64;
                n_ij += v[(k, i)] * m * v[(k, j)];
                if k + 1 < dim {
                    c_ij += 0.5 * (v[(k, i)] * v[(k + 1, j)] + v[(k + 1, i)] * v[(k, j)]);
                }
            }
            n_elements[i][j] = n_ij.abs();
            n_elements[j][i] = n_ij.abs();
            cosphi_elements[i][j] = c_ij.abs();
            cosphi_elements[j][i] = c_ij.abs();
        }
    }

    Ok(TransmonSolution {
        eigen_frequencies,
        n_elements,
        cosphi_elements,
        ej_over_ec: effective_josephson(spec).abs() / spec.e_c,
    })
}

/// One row of a selection-rule sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub ratio: f64,
    pub e01: f64,
    pub e02: f64,
    pub e12: f64,
    pub m01: f64,
    pub m02: f64,
    pub m12: f64,
}

/// Electric (`n`) and magnetic (`cos phi`) dipole elements among the lowest
/// three levels for each `E_J/E_C` in `ratios`. The template's flux bias is
/// kept and `E_J0` rescaled to hit each ratio.
pub fn selection_rule_sweep(template: &TransmonSpec, ratios: &[f64]) -> Result<Vec<SelectionRow>> {
    if let Some(bad) = ratios.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::invalid(format!(
            "E_J/E_C grid values must be positive, got {bad}"
        )));
    }
    let cos_flux = (PI * template.flux_ratio).cos().abs();
    if cos_flux < 1e-12 {
        return Err(Error::invalid("template flux bias suppresses E_J entirely"));
    }
    ratios
        .par_iter()
        .map(|&ratio| {
            let spec = TransmonSpec {
                e_j0: ratio * template.e_c / (2.0 * cos_flux),
                num_levels: template.num_levels.max(3),
                ..*template
            };
            let sol = diagonalize(&spec)?;
            Ok(SelectionRow {
                ratio,
                e01: sol.n_element(0, 1),
                e02: sol.n_element(0, 2),
                e12: sol.n_element(1, 2),
                m01: sol.cosphi_element(0, 1),
                m02: sol.cosphi_element(0, 2),
                m12: sol.cosphi_element(1, 2),
            })
        })
        .collect()
}

/// Flux-drive coupling `(2 pi E_J0 / Phi_0) sin(pi Phi_x/Phi_0) |<i|cos phi|j>|`
/// in Hz per flux quantum of drive amplitude.
pub fn circulating_current_coupling(
    spec: &TransmonSpec,
    sol: &TransmonSolution,
    i: usize,
    j: usize,
) -> Result<f64> {
    if i == j {
        return Err(Error::invalid("coupling needs two distinct levels"));
    }
    if i >= sol.num_levels() || j >= sol.num_levels() {
        return Err(Error::invalid(format!(
            "levels ({i}, {j}) outside the {} computed",
            sol.num_levels()
        )));
    }
    Ok((2.0 * PI * spec.e_j0 * (PI * spec.flux_ratio).sin()).abs() * sol.cosphi_element(i, j))
}
