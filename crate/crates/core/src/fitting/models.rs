//! Model-specific fits built on [`nlls_minimize`].
//!
//! Every fit rescales the data so that `max|x| = max|y| = 1` before
//! optimizing and maps the parameters back afterwards, so the optimizer only
//! sees order-one numbers whether detunings are in rad/s or times in s.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::lm::{nlls_minimize, Dataset, FitResult, LmOptions, NamedValue, Param};
use crate::error::{Error, Result};
use crate::spectra::{
    ats_model, eit_model, tprime_exact, AtsModelParams, EitModelParams, ExactModelParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub lm: LmOptions,
    /// Add a constant baseline parameter to spectral models.
    pub offset: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Exact,
    Eit,
    Ats,
    Lorentzian,
    DampedSinusoid,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Exact => "exact",
            ModelKind::Eit => "eit",
            ModelKind::Ats => "ats",
            ModelKind::Lorentzian => "lorentzian",
            ModelKind::DampedSinusoid => "damped_sinusoid",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ModelKind::Exact),
            "eit" => Ok(ModelKind::Eit),
            "ats" => Ok(ModelKind::Ats),
            "lorentzian" => Ok(ModelKind::Lorentzian),
            "damped_sinusoid" | "rabi" => Ok(ModelKind::DampedSinusoid),
            other => Err(Error::validation(
                "model",
                format!("unknown model `{other}`"),
            )),
        }
    }
}

/// Number of free parameters of the EIT and ATS shapes (without baseline).
pub const EIT_PARAMS: usize = 4;
pub const ATS_PARAMS: usize = 3;

struct Scaled {
    data: Dataset,
    xs: f64,
    ys: f64,
}

fn scaled(data: &Dataset) -> Scaled {
    let xs = data.x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let ys = data.y.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let xs = if xs > 0.0 { xs } else { 1.0 };
    let ys = if ys > 0.0 { ys } else { 1.0 };
    Scaled {
        data: Dataset {
            x: data.x.iter().map(|v| v / xs).collect(),
            y: data.y.iter().map(|v| v / ys).collect(),
            weights: data.weights.clone(),
        },
        xs,
        ys,
    }
}

/// Rebuild a result in original units; `factors[i]` multiplies parameter `i`.
fn unscale(mut fit: FitResult, factors: &[f64], ys: f64) -> FitResult {
    for (p, f) in fit.parameters.iter_mut().zip(factors) {
        p.value *= f;
    }
    fit.residual_sum *= ys * ys;
    fit
}

fn offset_term(p: &[f64], n_shape: usize) -> f64 {
    p.get(n_shape).copied().unwrap_or(0.0)
}

fn is_flat(y: &[f64]) -> bool {
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let scale = lo.abs().max(hi.abs());
    hi - lo <= 1e-12 * scale.max(f64::MIN_POSITIVE)
}

/// Run several starts and keep the lowest residual. Fails only when every
/// start fails, returning the first error.
fn best_of<F>(
    model: F,
    data: &Dataset,
    starts: Vec<Vec<Param>>,
    lm: &LmOptions,
) -> Result<FitResult>
where
    F: Fn(f64, &[f64]) -> f64 + Copy,
{
    let mut best: Option<FitResult> = None;
    let mut first_err = None;
    for init in starts {
        match nlls_minimize(model, data, &init, lm) {
            Ok(fit) => {
                let better = match &best {
                    None => true,
                    Some(b) => fit.residual_sum < b.residual_sum,
                };
                if better {
                    best = Some(fit);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or_else(|| Error::invalid("no starting points")))
}

/// Initial guess for the closed-form fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactInit {
    /// Control drive (rad/s).
    pub omega_c: f64,
    /// Product `A * Omega_p` (rad/s).
    pub amplitude: f64,
}

/// Fit the closed-form transmission with the coherence rates held fixed.
/// Free parameters: `omega_c` and `amplitude` (= `A * Omega_p`).
pub fn fit_exact_tprime(
    data: &Dataset,
    gamma_10: f64,
    gamma_20: f64,
    init: ExactInit,
    options: &FitOptions,
) -> Result<FitResult> {
    if !(gamma_10 > 0.0 && gamma_20 > 0.0) {
        return Err(Error::invalid("fixed coherence rates must be positive"));
    }
    if !(init.omega_c > 0.0 && init.amplitude > 0.0) {
        return Err(Error::invalid(
            "initial omega_c and amplitude must be positive",
        ));
    }
    data.validate(2)?;
    if is_flat(&data.y) {
        // a constant carries no information about the drive
        return Err(Error::SingularJacobian("omega_c".into()));
    }
    let s = scaled(data);
    let (g10, g20) = (gamma_10 / s.xs, gamma_20 / s.xs);
    let model = move |x: f64, p: &[f64]| {
        let m = ExactModelParams {
            amplitude: p[1],
            omega_p: 1.0,
            omega_c: p[0],
            gamma_10: g10,
            gamma_20: g20,
        };
        tprime_exact(x, &m) + offset_term(p, 2)
    };
    let mut start = vec![
        Param::positive("omega_c", init.omega_c / s.xs),
        Param::positive("amplitude", init.amplitude / (s.xs * s.ys)),
    ];
    if options.offset {
        start.push(Param::linear("offset", 0.0));
    }
    let fit = nlls_minimize(model, &s.data, &start, &options.lm)?;
    Ok(unscale(fit, &[s.xs, s.xs * s.ys, s.ys], s.ys))
}

/// Parameters of an EIT fit in original units.
pub fn eit_params(fit: &FitResult) -> EitModelParams {
    EitModelParams {
        cplus_sq: fit.get("cplus_sq").unwrap_or(0.0),
        cminus_sq: fit.get("cminus_sq").unwrap_or(0.0),
        gamma_plus: fit.get("gamma_plus").unwrap_or(0.0),
        gamma_minus: fit.get("gamma_minus").unwrap_or(0.0),
    }
}

pub fn ats_params(fit: &FitResult) -> AtsModelParams {
    AtsModelParams {
        c_sq: fit.get("c_sq").unwrap_or(0.0),
        gamma: fit.get("gamma").unwrap_or(0.0),
        delta0: fit.get("delta0").unwrap_or(0.0),
    }
}

/// Sample index nearest to `x = 0`.
fn centre_index(x: &[f64]) -> usize {
    (0..x.len())
        .min_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs()))
        .unwrap_or(0)
}

fn argmax(y: &[f64]) -> usize {
    (0..y.len())
        .max_by(|&a, &b| y[a].total_cmp(&y[b]))
        .unwrap_or(0)
}

/// Three-point running mean; damps single-sample noise when hunting maxima.
fn smooth(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(1);
            let hi = (k + 1).min(n - 1);
            y[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Half-width of the outer envelope at half the maximum.
fn outer_half_width(x: &[f64], y: &[f64]) -> f64 {
    let peak = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let above: Vec<usize> = (0..y.len()).filter(|&k| y[k] >= 0.5 * peak).collect();
    let span = x[x.len() - 1] - x[0];
    match (above.first(), above.last()) {
        (Some(&l), Some(&r)) if r > l => 0.5 * (x[r] - x[l]),
        _ => span / x.len() as f64,
    }
}

fn local_maxima(y: &[f64]) -> Vec<usize> {
    let n = y.len();
    (1..n.saturating_sub(1))
        .filter(|&k| y[k] > y[k - 1] && y[k] >= y[k + 1])
        .collect()
}

/// Starting points for the EIT fit on scaled data: the broad width from the
/// outer half-maximum envelope, the narrow width from the dip, amplitudes
/// from the peak height and dip depth.
fn eit_starts(data: &Dataset, offset: bool) -> Vec<Vec<Param>> {
    let (x, y) = (&data.x, smooth(&data.y));
    let peak = y[argmax(&y)].max(1e-6);
    let centre = y[centre_index(x)];
    let dx = (x[x.len() - 1] - x[0]) / (x.len() - 1).max(1) as f64;
    let broad = outer_half_width(x, &y).max(2.0 * dx);
    let peak_pos = x[argmax(&y)].abs();
    let narrow = if peak_pos > dx {
        peak_pos
    } else {
        0.25 * broad
    }
    .max(0.5 * dx);

    let mut starts = Vec::new();
    for gp in [broad, 1.5 * broad] {
        for gm in [narrow, 0.5 * narrow, 2.0 * narrow] {
            if gm >= gp {
                continue;
            }
            let height = 1.2 * peak;
            let depth = (height - centre).max(0.05 * peak);
            let mut p = vec![
                Param::positive("cplus_sq", height * gp * gp),
                Param::positive("cminus_sq", depth * gm * gm),
                Param::positive("gamma_plus", gp),
                Param::positive("gamma_minus", gm),
            ];
            if offset {
                p.push(Param::linear("offset", 0.0));
            }
            starts.push(p);
        }
    }
    starts
}

/// Fit the four-parameter EIT shape (difference of centred Lorentzians).
///
/// The fitted curve may dip below zero; that is reported, not clamped.
pub fn fit_eit_model(data: &Dataset, options: &FitOptions) -> Result<FitResult> {
    data.validate(EIT_PARAMS + options.offset as usize)?;
    let s = scaled(data);
    let model = |x: f64, p: &[f64]| {
        let e = EitModelParams {
            cplus_sq: p[0],
            cminus_sq: p[1],
            gamma_plus: p[2],
            gamma_minus: p[3],
        };
        eit_model(x, &e) + offset_term(p, EIT_PARAMS)
    };
    let starts = eit_starts(&s.data, options.offset);
    let fit = best_of(model, &s.data, starts, &options.lm)?;
    let x2y = s.xs * s.xs * s.ys;
    Ok(unscale(fit, &[x2y, x2y, s.xs, s.xs, s.ys], s.ys))
}

/// Starting points for the ATS fit: the splitting from the two tallest local
/// maxima, the width from the outer flank of the taller one.
fn ats_starts(data: &Dataset, offset: bool) -> Vec<Vec<Param>> {
    let (x, y) = (&data.x, smooth(&data.y));
    let n = x.len();
    let peak = y[argmax(&y)].max(1e-6);
    let dx = (x[n - 1] - x[0]) / (n - 1).max(1) as f64;
    let envelope = outer_half_width(x, &y).max(2.0 * dx);

    let mut maxima = local_maxima(&y);
    maxima.sort_by(|&a, &b| y[b].total_cmp(&y[a]));
    let (split, width) = match maxima.as_slice() {
        [a, b, ..] => {
            let split = 0.5 * (x[*a] - x[*b]).abs();
            // flank: from the taller peak outward to half its height
            let k = *a;
            let outward: Box<dyn Iterator<Item = usize>> = if x[k] >= 0.0 {
                Box::new(k..n)
            } else {
                Box::new((0..=k).rev())
            };
            let mut w = 0.5 * split;
            for j in outward {
                if y[j] <= 0.5 * y[k] {
                    w = (x[j] - x[k]).abs();
                    break;
                }
            }
            (split, w.max(dx))
        }
        _ => (0.0, envelope),
    };

    let mut starts = Vec::new();
    let mut push = |d0: f64, g: f64| {
        let overlap = if d0 < g { 0.5 } else { 1.0 };
        let mut p = vec![
            Param::positive("c_sq", overlap * peak * g * g),
            Param::positive("gamma", g),
            Param::linear("delta0", d0).bounded(Some(0.0), None),
        ];
        if offset {
            p.push(Param::linear("offset", 0.0));
        }
        starts.push(p);
    };
    for g in [width, 0.5 * width, envelope] {
        push(split, g);
    }
    for frac in [0.25, 0.5, 1.0] {
        push(frac * envelope, 0.5 * envelope);
    }
    push(0.0, envelope);
    starts
}

/// Fit the three-parameter ATS shape (two equal-width Lorentzians at
/// `+-delta0`).
pub fn fit_ats_model(data: &Dataset, options: &FitOptions) -> Result<FitResult> {
    data.validate(ATS_PARAMS + options.offset as usize)?;
    let s = scaled(data);
    let model = |x: f64, p: &[f64]| {
        let a = AtsModelParams {
            c_sq: p[0],
            gamma: p[1],
            delta0: p[2],
        };
        ats_model(x, &a) + offset_term(p, ATS_PARAMS)
    };
    let starts = ats_starts(&s.data, options.offset);
    let fit = best_of(model, &s.data, starts, &options.lm)?;
    let x2y = s.xs * s.xs * s.ys;
    Ok(unscale(fit, &[x2y, s.xs, s.xs, s.ys], s.ys))
}

/// `offset + amplitude * w^2 / ((x - centre)^2 + w^2)`: `amplitude` is the
/// peak height above the baseline and `w` the half-width at half-maximum.
pub fn lorentzian(x: f64, centre: f64, half_width: f64, amplitude: f64, offset: f64) -> f64 {
    let w2 = half_width * half_width;
    offset + amplitude * w2 / ((x - centre).powi(2) + w2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianInit {
    pub centre: f64,
    pub half_width: f64,
    pub amplitude: f64,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub fit: FitResult,
    /// Peak height indistinguishable from the residual scatter.
    pub low_signal: bool,
}

fn lorentzian_guess(data: &Dataset) -> LorentzianInit {
    let mut sorted = data.y.clone();
    sorted.sort_by(f64::total_cmp);
    let offset = sorted[sorted.len() / 2];
    let k = (0..data.y.len())
        .max_by(|&a, &b| {
            (data.y[a] - offset)
                .abs()
                .total_cmp(&(data.y[b] - offset).abs())
        })
        .unwrap_or(0);
    let amplitude = data.y[k] - offset;
    let half = offset + 0.5 * amplitude;
    let n = data.x.len();
    let mut width = (data.x[n - 1] - data.x[0]) / 10.0;
    for j in (k..n).chain((0..k).rev()) {
        if (data.y[j] - offset).abs() <= (half - offset).abs() {
            width = (data.x[j] - data.x[k]).abs().max(1e-12);
            break;
        }
    }
    LorentzianInit {
        centre: data.x[k],
        half_width: width,
        amplitude,
        offset,
    }
}

/// Fit a single Lorentzian line on a constant baseline (always fitted;
/// `options.offset` is ignored). Without `init`, a guess is taken from the
/// largest excursion away from the median.
pub fn fit_lorentzian(
    data: &Dataset,
    init: Option<LorentzianInit>,
    options: &FitOptions,
) -> Result<LorentzianFit> {
    let n_params = 4;
    data.validate(n_params)?;
    let s = scaled(data);
    let guess = match init {
        Some(i) => LorentzianInit {
            centre: i.centre / s.xs,
            half_width: i.half_width / s.xs,
            amplitude: i.amplitude / s.ys,
            offset: i.offset / s.ys,
        },
        None => lorentzian_guess(&s.data),
    };
    if !(guess.half_width > 0.0) {
        return Err(Error::invalid("initial half-width must be positive"));
    }
    let mut amplitude = guess.amplitude;
    if amplitude == 0.0 {
        amplitude = 1e-3;
    }
    let model = |x: f64, p: &[f64]| lorentzian(x, p[0], p[1], p[2], offset_term(p, 3));
    let start = vec![
        Param::linear("centre", guess.centre),
        Param::positive("half_width", guess.half_width),
        Param::linear("amplitude", amplitude),
        Param::linear("offset", guess.offset),
    ];
    let fit = match nlls_minimize(model, &s.data, &start, &options.lm) {
        Ok(f) => f,
        Err(Error::SingularJacobian(_)) if is_flat(&s.data.y) => {
            return Ok(flat_lorentzian(data));
        }
        Err(e) => return Err(e),
    };
    let fit = unscale(fit, &[s.xs, s.xs, s.ys, s.ys], s.ys);
    // height as sampled, so a line narrower than the grid spacing cannot
    // pass a single noise spike off as signal
    let (c, w, a) = (
        fit.get("centre").unwrap_or(0.0),
        fit.get("half_width").unwrap_or(1.0),
        fit.get("amplitude").unwrap_or(0.0),
    );
    let amp = data
        .x
        .iter()
        .map(|&x| lorentzian(x, c, w, a, 0.0).abs())
        .fold(0.0, f64::max);
    let scatter = fit.residual_per_point().sqrt();
    let y_max = data.y.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    Ok(LorentzianFit {
        low_signal: amp <= (5.0 * scatter).max(1e-9 * y_max),
        fit,
    })
}

fn flat_lorentzian(data: &Dataset) -> LorentzianFit {
    let mean = data.y.iter().sum::<f64>() / data.len() as f64;
    let span = data.x[data.len() - 1] - data.x[0];
    let parameters = vec![
        NamedValue {
            name: "centre".into(),
            value: 0.5 * (data.x[0] + data.x[data.len() - 1]),
        },
        NamedValue {
            name: "half_width".into(),
            value: 0.1 * span,
        },
        NamedValue {
            name: "amplitude".into(),
            value: 0.0,
        },
        NamedValue {
            name: "offset".into(),
            value: mean,
        },
    ];
    LorentzianFit {
        fit: FitResult {
            n_params: parameters.len(),
            parameters,
            residual_sum: 0.0,
            n_points: data.len(),
            converged: false,
            iterations: 0,
            termination: super::lm::Termination::ExactFit,
            gradient_norm: 0.0,
        },
        low_signal: true,
    }
}

/// `baseline + amplitude * exp(-t / decay) * cos(2 pi t / period + phase)`.
pub fn damped_sinusoid(
    t: f64,
    baseline: f64,
    amplitude: f64,
    decay: f64,
    period: f64,
    phase: f64,
) -> f64 {
    baseline + amplitude * (-t / decay).exp() * (TAU * t / period + phase).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinusoidInit {
    pub baseline: f64,
    pub amplitude: f64,
    pub decay: f64,
    pub period: f64,
    pub phase: f64,
}

/// Guess by scanning trial periods for the strongest Fourier component of
/// the mean-subtracted trace.
fn sinusoid_guess(data: &Dataset) -> SinusoidInit {
    let n = data.len();
    let t = &data.x;
    let span = t[n - 1] - t[0];
    let mean = data.y.iter().sum::<f64>() / n as f64;
    let dt = span / (n - 1) as f64;
    let mut best = (0.0, span, 0.0);
    let trials = 400;
    for k in 0..trials {
        // log-spaced from 2 dt to 2 span
        let frac = k as f64 / (trials - 1) as f64;
        let period = 2.0 * dt * (span / dt).powf(frac);
        let (mut re, mut im) = (0.0, 0.0);
        for j in 0..n {
            let arg = TAU * t[j] / period;
            re += (data.y[j] - mean) * arg.cos();
            im += (data.y[j] - mean) * arg.sin();
        }
        let power = re * re + im * im;
        if power > best.0 {
            best = (power, period, (-im).atan2(re));
        }
    }
    let (lo, hi) = data
        .y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    SinusoidInit {
        baseline: mean,
        amplitude: 0.5 * (hi - lo),
        decay: span,
        period: best.1,
        phase: best.2,
    }
}

/// Fit an exponentially damped cosine, returning `baseline`, `amplitude`,
/// `decay`, `period` and `phase`.
pub fn fit_damped_sinusoid(
    data: &Dataset,
    init: Option<SinusoidInit>,
    options: &FitOptions,
) -> Result<FitResult> {
    data.validate(5)?;
    if is_flat(&data.y) {
        return Err(Error::SingularJacobian("amplitude".into()));
    }
    let s = scaled(data);
    let guesses = match init {
        Some(i) => vec![SinusoidInit {
            baseline: i.baseline / s.ys,
            amplitude: i.amplitude / s.ys,
            decay: i.decay / s.xs,
            period: i.period / s.xs,
            phase: i.phase,
        }],
        None => {
            let g = sinusoid_guess(&s.data);
            vec![
                g,
                SinusoidInit {
                    decay: 0.3 * g.decay,
                    ..g
                },
                SinusoidInit {
                    decay: 3.0 * g.decay,
                    ..g
                },
            ]
        }
    };
    let starts = guesses
        .into_iter()
        .filter(|g| g.decay > 0.0 && g.period > 0.0)
        .map(|g| {
            vec![
                Param::linear("baseline", g.baseline),
                Param::linear(
                    "amplitude",
                    if g.amplitude != 0.0 {
                        g.amplitude
                    } else {
                        1e-3
                    },
                ),
                Param::positive("decay", g.decay),
                Param::positive("period", g.period),
                Param::linear("phase", g.phase),
            ]
        })
        .collect();
    let model = |t: f64, p: &[f64]| damped_sinusoid(t, p[0], p[1], p[2], p[3], p[4]);
    let fit = best_of(model, &s.data, starts, &options.lm)?;
    let mut fit = unscale(fit, &[s.ys, s.ys, s.xs, s.xs, 1.0], s.ys);
    // canonical sign: positive amplitude, phase in (-pi, pi]
    let amp = fit.get("amplitude").unwrap_or(0.0);
    for p in fit.parameters.iter_mut() {
        match p.name.as_str() {
            "amplitude" if amp < 0.0 => p.value = -p.value,
            "phase" => {
                let shifted = if amp < 0.0 { p.value + PI } else { p.value };
                p.value = shifted - TAU * ((shifted + PI) / TAU).ceil() + TAU;
            }
            _ => {}
        }
    }
    Ok(fit)
}
