//! Normalized cavity transmission `T'` of the weak-probe qutrit and its two
//! reduced line shapes: a difference of centred Lorentzians (EIT) and a sum
//! of shifted equal-width Lorentzians (ATS).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the closed-form transmission. `amplitude * omega_p` is the
/// only combination that is observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactModelParams {
    pub amplitude: f64,
    pub omega_p: f64,
    pub omega_c: f64,
    pub gamma_10: f64,
    pub gamma_20: f64,
}

impl ExactModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_10 > 0.0 && self.gamma_20 > 0.0) {
            return Err(Error::invalid("coherence rates must be positive"));
        }
        if !(self.amplitude > 0.0) {
            return Err(Error::invalid("amplitude must be positive"));
        }
        if !(self.omega_c >= 0.0 && self.omega_p >= 0.0) {
            return Err(Error::invalid("drive strengths must be non-negative"));
        }
        Ok(())
    }
}

/// `A Omega_p (g20 + Oc^2 g10/(d^2+g10^2)) / [(d - Oc^2 d/(d^2+g10^2))^2 + (g20 + Oc^2 g10/(d^2+g10^2))^2]`.
pub fn tprime_exact(delta: f64, p: &ExactModelParams) -> f64 {
    let oc2 = p.omega_c * p.omega_c;
    let lor = delta * delta + p.gamma_10 * p.gamma_10;
    let width = p.gamma_20 + oc2 * p.gamma_10 / lor;
    let shift = delta - oc2 * delta / lor;
    p.amplitude * p.omega_p * width / (shift * shift + width * width)
}

pub fn tprime_exact_curve(detunings: &[f64], p: &ExactModelParams) -> Vec<f64> {
    detunings.iter().map(|&d| tprime_exact(d, p)).collect()
}

/// Upper EIT bound `(gamma20 - gamma10) / 2`: below it both poles are
/// purely imaginary.
pub fn eit_threshold(gamma_10: f64, gamma_20: f64) -> f64 {
    0.5 * (gamma_20 - gamma_10)
}

/// Pole half-widths `gamma_plus >= gamma_minus`.
pub fn gamma_pm(gamma_10: f64, gamma_20: f64, omega_c: f64) -> Result<(f64, f64)> {
    let disc = (gamma_20 - gamma_10).powi(2) - 4.0 * omega_c * omega_c;
    if disc < 0.0 {
        return Err(Error::ComplexRoots {
            omega_c,
            bound: eit_threshold(gamma_10, gamma_20).abs(),
        });
    }
    let root = disc.sqrt();
    let sum = gamma_20 + gamma_10;
    let plus = 0.5 * (sum + root);
    // product form avoids cancellation when the root is close to the sum
    let minus = if plus > 0.0 {
        (gamma_10 * gamma_20 + omega_c * omega_c) / plus
    } else {
        0.5 * (sum - root)
    };
    Ok((plus, minus))
}

/// Half-splitting `delta_0 = sqrt(4 Oc^2 - (g20 - g10)^2) / 2` of the doublet.
pub fn delta0(gamma_10: f64, gamma_20: f64, omega_c: f64) -> Result<f64> {
    let arg = 4.0 * omega_c * omega_c - (gamma_20 - gamma_10).powi(2);
    if arg < 0.0 {
        return Err(Error::ImaginarySplitting {
            omega_c,
            bound: eit_threshold(gamma_10, gamma_20).abs(),
        });
    }
    Ok(0.5 * arg.sqrt())
}

/// Poles of the coherence in the complex detuning plane: roots of
/// `d^2 - i (g10 + g20) d - (g10 g20 + Oc^2)`.
pub fn coherence_poles(gamma_10: f64, gamma_20: f64, omega_c: f64) -> [Complex64; 2] {
    let b = Complex64::new(0.0, -(gamma_10 + gamma_20));
    let c = Complex64::new(-(gamma_10 * gamma_20 + omega_c * omega_c), 0.0);
    let root = (b * b - 4.0 * c).sqrt();
    [(-b + root) / 2.0, (-b - root) / 2.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EitModelParams {
    pub cplus_sq: f64,
    pub cminus_sq: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtsModelParams {
    pub c_sq: f64,
    pub gamma: f64,
    pub delta0: f64,
}

/// `C+^2/(d^2+g+^2) - C-^2/(d^2+g-^2)`.
pub fn eit_model(delta: f64, p: &EitModelParams) -> f64 {
    let d2 = delta * delta;
    p.cplus_sq / (d2 + p.gamma_plus * p.gamma_plus)
        - p.cminus_sq / (d2 + p.gamma_minus * p.gamma_minus)
}

/// `C^2/((d-d0)^2+g^2) + C^2/((d+d0)^2+g^2)`.
pub fn ats_model(delta: f64, p: &AtsModelParams) -> f64 {
    let g2 = p.gamma * p.gamma;
    p.c_sq / ((delta - p.delta0).powi(2) + g2) + p.c_sq / ((delta + p.delta0).powi(2) + g2)
}

/// Exact partial-fraction split of the transmission into the EIT form.
///
/// Writing the coherence as `Omega_p (d - i g10) / ((d - i g+)(d - i g-))`,
/// the residues give `C+^2 = A Omega_p g+ (g+ - g10)/(g+ - g-)` and
/// `C-^2 = A Omega_p g- (g- - g10)/(g+ - g-)`, both non-negative since
/// `g- >= g10`.
pub fn eit_decomposition(p: &ExactModelParams) -> Result<EitModelParams> {
    p.validate()?;
    let bound = eit_threshold(p.gamma_10, p.gamma_20);
    if !(p.omega_c < bound) {
        return Err(Error::ComplexRoots {
            omega_c: p.omega_c,
            bound,
        });
    }
    let (gp, gm) = gamma_pm(p.gamma_10, p.gamma_20, p.omega_c)?;
    let scale = p.amplitude * p.omega_p / (gp - gm);
    Ok(EitModelParams {
        cplus_sq: scale * gp * (gp - p.gamma_10),
        cminus_sq: scale * gm * (gm - p.gamma_10),
        gamma_plus: gp,
        gamma_minus: gm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EitWindow {
    pub lower: f64,
    pub upper: f64,
    pub feasible: bool,
}

/// Range of control strengths that opens a dark-state transparency window.
/// Feasible only when `gamma20 > 2 gamma10`.
pub fn eit_window(gamma_10: f64, gamma_20: f64) -> Result<EitWindow> {
    if !(gamma_10 > 0.0 && gamma_20 > 0.0) {
        return Err(Error::invalid("coherence rates must be positive"));
    }
    Ok(EitWindow {
        lower: gamma_10 * (gamma_10 / (2.0 * gamma_10 + gamma_20)).sqrt(),
        upper: eit_threshold(gamma_10, gamma_20),
        feasible: gamma_20 > 2.0 * gamma_10,
    })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub source: String,
    pub seed: Option<u64>,
    /// Control drive used to generate synthetic data (rad/s).
    pub omega_c: Option<f64>,
    pub noise_sigma: Option<f64>,
}

/// Sampled `T'(delta)` with detunings in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub detunings: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: SpectrumMeta,
}

impl Spectrum {
    pub fn new(detunings: Vec<f64>, values: Vec<f64>, meta: SpectrumMeta) -> Result<Self> {
        if detunings.len() != values.len() {
            return Err(Error::invalid(format!(
                "{} detunings but {} values",
                detunings.len(),
                values.len()
            )));
        }
        if detunings.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("detunings must be strictly increasing"));
        }
        if values.iter().chain(&detunings).any(|v| !v.is_finite()) {
            return Err(Error::invalid("spectrum contains non-finite values"));
        }
        Ok(Spectrum {
            detunings,
            values,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Default sampling: 61 points per spectrum.
pub const DEFAULT_POINTS: usize = 61;

/// `n` evenly spaced detunings on `[-span, span]`.
pub fn uniform_grid(span: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n)
            .map(|k| -span + 2.0 * span * k as f64 / (n - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{mhz, to_mhz};
    use approx::assert_relative_eq;

    const G10: f64 = 1.76;
    const G20: f64 = 6.90;

    fn params(oc_mhz: f64) -> ExactModelParams {
        ExactModelParams {
            amplitude: 1.0,
            omega_p: 1.0,
            omega_c: mhz(oc_mhz),
            gamma_10: mhz(G10),
            gamma_20: mhz(G20),
        }
    }

    #[test]
    fn undriven_is_lorentzian() {
        let p = params(0.0);
        for d in [-3.0, 0.0, 0.4, 12.0] {
            let d = mhz(d);
            let g = p.gamma_20;
            assert_relative_eq!(
                tprime_exact(d, &p),
                g / (d * d + g * g),
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn line_centre_value() {
        // in 2 pi MHz units: 1 / (6.90 + 2.06^2 / 1.76)
        let p = ExactModelParams {
            amplitude: 1.0,
            omega_p: 1.0,
            omega_c: 2.06,
            gamma_10: G10,
            gamma_20: G20,
        };
        assert_relative_eq!(
            tprime_exact(0.0, &p),
            1.0 / 9.311_136_363_636_364,
            max_relative = 1e-12
        );
        assert!((tprime_exact(0.0, &p) - 0.1074).abs() < 5e-5);
    }

    #[test]
    fn pole_widths() {
        let (gp, gm) = gamma_pm(mhz(G10), mhz(G20), 0.0).unwrap();
        assert_relative_eq!(gp, mhz(G20), max_relative = 1e-14);
        assert_relative_eq!(gm, mhz(G10), max_relative = 1e-14);

        let edge = eit_threshold(mhz(G10), mhz(G20));
        let (gp, gm) = gamma_pm(mhz(G10), mhz(G20), edge).unwrap();
        assert_relative_eq!(gp, 0.5 * mhz(G10 + G20), max_relative = 1e-12);
        assert_relative_eq!(gm, 0.5 * mhz(G10 + G20), max_relative = 1e-12);

        let (gp, gm) = gamma_pm(mhz(G10), mhz(G20), mhz(2.06)).unwrap();
        assert!((to_mhz(gp) - 5.867).abs() < 5e-4);
        assert!((to_mhz(gm) - 2.793).abs() < 5e-4);
        assert_relative_eq!(gp + gm, mhz(G10 + G20), max_relative = 1e-13);
        assert_relative_eq!(
            gp * gm,
            mhz(G10) * mhz(G20) + mhz(2.06).powi(2),
            max_relative = 1e-13
        );

        assert!(matches!(
            gamma_pm(mhz(G10), mhz(G20), mhz(2.6)),
            Err(Error::ComplexRoots { .. })
        ));
    }

    #[test]
    fn doublet_splitting() {
        let edge = eit_threshold(mhz(G10), mhz(G20));
        assert_eq!(delta0(mhz(G10), mhz(G20), edge).unwrap(), 0.0);
        assert!((to_mhz(delta0(mhz(G10), mhz(G20), mhz(19.7)).unwrap()) - 19.53).abs() < 5e-3);
        let strong = 50.0 * edge;
        let d0 = delta0(mhz(G10), mhz(G20), strong).unwrap();
        assert!((strong - d0) / strong < 0.01);
        assert!(matches!(
            delta0(mhz(G10), mhz(G20), mhz(1.0)),
            Err(Error::ImaginarySplitting { .. })
        ));
    }

    #[test]
    fn poles_match_closed_forms() {
        for oc in [5.29, 19.7, 40.0] {
            let poles = coherence_poles(mhz(G10), mhz(G20), mhz(oc));
            let d0 = delta0(mhz(G10), mhz(G20), mhz(oc)).unwrap();
            let mut re: Vec<f64> = poles.iter().map(|z| z.re).collect();
            re.sort_by(f64::total_cmp);
            assert_relative_eq!(re[0], -d0, max_relative = 1e-10);
            assert_relative_eq!(re[1], d0, max_relative = 1e-10);
            for z in poles {
                assert_relative_eq!(z.im, 0.5 * mhz(G10 + G20), max_relative = 1e-10);
            }
        }
        let poles = coherence_poles(mhz(G10), mhz(G20), mhz(2.06));
        let (gp, gm) = gamma_pm(mhz(G10), mhz(G20), mhz(2.06)).unwrap();
        assert!(poles.iter().all(|z| z.re.abs() < 1e-6));
        assert_relative_eq!(poles[0].im.max(poles[1].im), gp, max_relative = 1e-10);
        assert_relative_eq!(poles[0].im.min(poles[1].im), gm, max_relative = 1e-10);
    }

    #[test]
    fn decomposition_limits() {
        let p = params(1e-4);
        let e = eit_decomposition(&p).unwrap();
        assert!(e.cminus_sq / e.cplus_sq < 1e-8);
        assert!(eit_decomposition(&params(2.6)).is_err());
        let edge = ExactModelParams {
            omega_c: eit_threshold(mhz(G10), mhz(G20)),
            ..params(0.0)
        };
        assert!(eit_decomposition(&edge).is_err());
    }

    #[test]
    fn reduced_models() {
        let a = AtsModelParams {
            c_sq: 2.0,
            gamma: 1.5,
            delta0: 3.0,
        };
        assert_relative_eq!(
            ats_model(3.0, &a),
            ats_model(-3.0, &a),
            max_relative = 1e-15
        );
        let gp: f64 = 4.0;
        let gm: f64 = 1.0;
        let e = EitModelParams {
            cplus_sq: 3.0 * gp * gp,
            cminus_sq: 3.0 * gm * gm,
            gamma_plus: gp,
            gamma_minus: gm,
        };
        assert_eq!(eit_model(0.0, &e), 0.0);
    }

    #[test]
    fn window() {
        let w = eit_window(mhz(G10), mhz(G20)).unwrap();
        assert!(w.feasible);
        assert_relative_eq!(to_mhz(w.upper), 2.57, max_relative = 1e-12);
        assert!((to_mhz(w.lower) - 0.723).abs() < 5e-4);
        let edge = eit_window(1.0, 2.0).unwrap();
        assert!(!edge.feasible);
    }

    #[test]
    fn spectrum_validation() {
        assert!(Spectrum::new(vec![0.0, 1.0], vec![1.0], SpectrumMeta::default()).is_err());
        assert!(Spectrum::new(vec![0.0, 0.0], vec![1.0, 2.0], SpectrumMeta::default()).is_err());
        assert!(Spectrum::new(vec![0.0, 1.0], vec![1.0, 2.0], SpectrumMeta::default()).is_ok());
        let g = uniform_grid(mhz(25.0), 61);
        assert_eq!(g.len(), 61);
        assert_eq!(g[0], -mhz(25.0));
        assert_eq!(g[60], mhz(25.0));
        assert!(g[30].abs() < 1e-6);
    }
}
