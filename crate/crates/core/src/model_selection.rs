//! Akaike information criterion for choosing between the EIT and ATS line
//! shapes, plus the synthetic weight sweep and its 0.5 crossing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{fit_ats_model, fit_eit_model, Dataset, FitOptions, FitResult};
use crate::spectra::{
    tprime_exact_curve, uniform_grid, ExactModelParams, Spectrum, SpectrumMeta, DEFAULT_POINTS,
};
use crate::units::{mhz, to_mhz};

/// `N ln(R/N) + 2k`. An exact fit (`R == 0`) is reported as
/// [`Error::NonPositiveResidual`]; callers that want the sentinel use
/// [`information_loss`].
pub fn aic(n: usize, residual: f64, k: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("AIC needs at least one point"));
    }
    if !(residual > 0.0) || !residual.is_finite() {
        return Err(Error::NonPositiveResidual(residual));
    }
    let n = n as f64;
    Ok(n * (residual / n).ln() + 2.0 * k as f64)
}

/// Like [`aic`] but maps an exact fit to `-inf`.
pub fn information_loss(n: usize, residual: f64, k: usize) -> Result<f64> {
    match aic(n, residual, k) {
        Err(Error::NonPositiveResidual(0.0)) => Ok(f64::NEG_INFINITY),
        other => other,
    }
}

/// Normalized weights `exp(-Ibar/2)` for the two models, evaluated after
/// subtracting the smaller loss. A single `-inf` takes all the weight.
pub fn per_point_weights(ibar_eit: f64, ibar_ats: f64) -> (f64, f64) {
    let w_eit = match (ibar_eit == f64::NEG_INFINITY, ibar_ats == f64::NEG_INFINITY) {
        (true, true) => 0.5,
        (true, false) => 1.0,
        (false, true) => 0.0,
        (false, false) => {
            // logistic in the gap; the exponent is never positive
            let gap = 0.5 * (ibar_eit - ibar_ats);
            if gap >= 0.0 {
                let e = (-gap).exp();
                e / (1.0 + e)
            } else {
                1.0 / (1.0 + gap.exp())
            }
        }
    };
    (w_eit, 1.0 - w_eit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct AicReport {
    pub I_eit: f64,
    pub I_ats: f64,
    pub Ibar_eit: f64,
    pub Ibar_ats: f64,
    pub w_eit: f64,
    pub w_ats: f64,
    pub N: usize,
    pub k_eit: usize,
    pub k_ats: usize,
}

impl AicReport {
    pub fn from_residuals(
        n: usize,
        r_eit: f64,
        k_eit: usize,
        r_ats: f64,
        k_ats: usize,
    ) -> Result<Self> {
        let i_eit = information_loss(n, r_eit, k_eit)?;
        let i_ats = information_loss(n, r_ats, k_ats)?;
        let nf = n as f64;
        let (ibar_eit, ibar_ats) = (i_eit / nf, i_ats / nf);
        let (w_eit, w_ats) = per_point_weights(ibar_eit, ibar_ats);
        Ok(AicReport {
            I_eit: i_eit,
            I_ats: i_ats,
            Ibar_eit: ibar_eit,
            Ibar_ats: ibar_ats,
            w_eit,
            w_ats,
            N: n,
            k_eit,
            k_ats,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrimination {
    pub report: AicReport,
    pub eit: FitResult,
    pub ats: FitResult,
}

/// Fit both shapes to one spectrum and weigh them.
pub fn discriminate(spectrum: &Spectrum, options: &FitOptions) -> Result<Discrimination> {
    let data = Dataset::new(spectrum.detunings.clone(), spectrum.values.clone())?;
    let eit = fit_eit_model(&data, options)?;
    let ats = fit_ats_model(&data, options)?;
    let report = AicReport::from_residuals(
        data.len(),
        eit.residual_sum,
        eit.n_params,
        ats.residual_sum,
        ats.n_params,
    )?;
    Ok(Discrimination { report, eit, ats })
}

/// Generator for synthetic spectra: the closed-form curve on a uniform grid
/// plus Gaussian noise whose standard deviation is `noise_sigma` times the
/// noiseless peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub gamma_10: f64,
    pub gamma_20: f64,
    /// `A * Omega_p` (rad/s).
    pub amplitude: f64,
    /// Half-span of the detuning grid (rad/s).
    pub span: f64,
    pub n_points: usize,
    pub noise_sigma: f64,
}

impl SynthSpec {
    /// Defaults: 61 points over +-25 MHz, 3% noise.
    pub fn new(gamma_10: f64, gamma_20: f64) -> Self {
        SynthSpec {
            gamma_10,
            gamma_20,
            amplitude: 1.0,
            span: mhz(25.0),
            n_points: DEFAULT_POINTS,
            noise_sigma: 0.03,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_10 > 0.0 && self.gamma_20 > 0.0) {
            return Err(Error::validation(
                "rates",
                "coherence rates must be positive",
            ));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::validation("amplitude", "must be positive"));
        }
        if !(self.span > 0.0 && self.span.is_finite()) {
            return Err(Error::validation("span", "must be positive"));
        }
        if self.n_points < 2 {
            return Err(Error::validation("points", "need at least two points"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::validation("sigma", "must be non-negative"));
        }
        Ok(())
    }

    pub fn exact_params(&self, omega_c: f64) -> ExactModelParams {
        ExactModelParams {
            amplitude: self.amplitude,
            omega_p: 1.0,
            omega_c,
            gamma_10: self.gamma_10,
            gamma_20: self.gamma_20,
        }
    }
}

/// Noise generator for one `(omega_c, seed)` cell: ChaCha8 seeded with `seed`
/// on the stream given by the bit pattern of `omega_c`, so a cell draws the
/// same numbers whatever grid or thread it belongs to.
pub fn cell_rng(omega_c: f64, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(omega_c.to_bits());
    rng
}

pub fn synthetic_spectrum(spec: &SynthSpec, omega_c: f64, seed: u64) -> Result<Spectrum> {
    spec.validate()?;
    // built in MHz so the grid survives a round trip through a spectrum file
    let grid: Vec<f64> = uniform_grid(to_mhz(spec.span), spec.n_points)
        .into_iter()
        .map(mhz)
        .collect();
    let params = spec.exact_params(omega_c);
    params.validate()?;
    let mut values = tprime_exact_curve(&grid, &params);
    if spec.noise_sigma > 0.0 {
        let peak = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let normal =
            Normal::new(0.0, spec.noise_sigma * peak).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = cell_rng(omega_c, seed);
        for v in values.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let meta = SpectrumMeta {
        source: "synthetic".into(),
        seed: Some(seed),
        omega_c: Some(omega_c),
        noise_sigma: Some(spec.noise_sigma),
    };
    Spectrum::new(grid, values, meta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub synth: SynthSpec,
    /// Ascending control drives (rad/s).
    pub omega_c: Vec<f64>,
    pub n_seeds: usize,
    pub base_seed: u64,
}

pub const DEFAULT_SEEDS: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub omega_c: f64,
    /// Seed-averaged weights over the cells that succeeded.
    pub w_eit: f64,
    pub w_ats: f64,
    pub w_eit_min: f64,
    pub w_eit_max: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSweep {
    pub points: Vec<SweepPoint>,
    pub seeds: Vec<u64>,
    /// `cells[i][s]`: w_eit for drive `i` and seed `s`, `None` if a fit failed.
    pub cells: Vec<Vec<Option<f64>>>,
    /// Messages of failed cells, as `(drive index, seed, message)`.
    pub errors: Vec<(usize, u64, String)>,
}

impl WeightSweep {
    pub fn omega_c(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.omega_c).collect()
    }

    pub fn mean_w_eit(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.w_eit).collect()
    }

    /// The w_eit curve of a single seed (failed cells dropped).
    pub fn seed_curve(&self, s: usize) -> (Vec<f64>, Vec<f64>) {
        self.points
            .iter()
            .zip(&self.cells)
            .filter_map(|(p, row)| row[s].map(|w| (p.omega_c, w)))
            .unzip()
    }
}

pub fn weight_sweep(config: &SweepConfig, options: &FitOptions) -> Result<WeightSweep> {
    config.synth.validate()?;
    if config.omega_c.is_empty() {
        return Err(Error::validation("omega_c", "empty grid"));
    }
    if config.omega_c.windows(2).any(|w| !(w[1] > w[0])) || config.omega_c[0] < 0.0 {
        return Err(Error::validation(
            "omega_c",
            "grid must be non-negative and ascending",
        ));
    }
    if config.n_seeds == 0 {
        return Err(Error::validation("seeds", "need at least one seed"));
    }
    let seeds: Vec<u64> = (0..config.n_seeds as u64)
        .map(|s| config.base_seed.wrapping_add(s))
        .collect();
    let n_seeds = seeds.len();
    let cells: Vec<std::result::Result<f64, String>> = (0..config.omega_c.len() * n_seeds)
        .into_par_iter()
        .map(|idx| {
            let omega_c = config.omega_c[idx / n_seeds];
            let seed = seeds[idx % n_seeds];
            synthetic_spectrum(&config.synth, omega_c, seed)
                .and_then(|s| discriminate(&s, options))
                .map(|d| d.report.w_eit)
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut points = Vec::with_capacity(config.omega_c.len());
    let mut grid_cells = Vec::with_capacity(config.omega_c.len());
    let mut errors = Vec::new();
    for (i, &omega_c) in config.omega_c.iter().enumerate() {
        let row: Vec<Option<f64>> = cells[i * n_seeds..(i + 1) * n_seeds]
            .iter()
            .zip(&seeds)
            .map(|(c, &seed)| match c {
                Ok(w) => Some(*w),
                Err(msg) => {
                    errors.push((i, seed, msg.clone()));
                    None
                }
            })
            .collect();
        let ok: Vec<f64> = row.iter().flatten().copied().collect();
        let (mean, lo, hi) = if ok.is_empty() {
            (f64::NAN, f64::NAN, f64::NAN)
        } else {
            (
                ok.iter().sum::<f64>() / ok.len() as f64,
                ok.iter().cloned().fold(f64::INFINITY, f64::min),
                ok.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )
        };
        points.push(SweepPoint {
            omega_c,
            w_eit: mean,
            w_ats: 1.0 - mean,
            w_eit_min: lo,
            w_eit_max: hi,
            failures: n_seeds - ok.len(),
        });
        grid_cells.push(row);
    }
    Ok(WeightSweep {
        points,
        seeds,
        cells: grid_cells,
        errors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    /// Interpolated drive where w_eit falls through 0.5 (rad/s).
    pub omega_aic: f64,
    /// The curve crosses 0.5 more than once; `omega_aic` is the lowest.
    pub multiple: bool,
}

/// Locate where `w_eit` crosses 0.5 by linear interpolation between the
/// bracketing grid points. NaN entries are skipped.
pub fn crossing_threshold(omega_c: &[f64], w_eit: &[f64]) -> Result<Crossing> {
    if omega_c.len() != w_eit.len() {
        return Err(Error::invalid("grid and weights differ in length"));
    }
    let pts: Vec<(f64, f64)> = omega_c
        .iter()
        .zip(w_eit)
        .filter(|(_, w)| w.is_finite())
        .map(|(&o, &w)| (o, w))
        .collect();
    let mut found = Vec::new();
    for pair in pts.windows(2) {
        let ((x0, w0), (x1, w1)) = (pair[0], pair[1]);
        let (a, b) = (w0 - 0.5, w1 - 0.5);
        if a == 0.0 {
            found.push(x0);
        } else if a * b < 0.0 {
            found.push(x0 + (x1 - x0) * a / (a - b));
        }
    }
    if let Some(&(x, w)) = pts.last() {
        if w == 0.5 && found.last() != Some(&x) {
            found.push(x);
        }
    }
    match found.first() {
        Some(&omega_aic) => Ok(Crossing {
            omega_aic,
            multiple: found.len() > 1,
        }),
        None => Err(Error::NoCrossing),
    }
}
