//! Command pipelines behind the `eitats` binary. Each command reads an
//! [`ExperimentConfig`], writes its outputs into a directory and returns the
//! paths it wrote.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::dispersive::{
    composite_transmission, dispersive_shifts, normalize, state_transmissions,
};
use crate::error::{Error, Result};
use crate::fitting::{
    eit_params, fit_ats_model, fit_damped_sinusoid, fit_eit_model, fit_exact_tprime, Dataset,
    ExactInit, FitOptions, FitResult, ModelKind,
};
use crate::io::{
    read_spectrum_csv, table_csv, write_atomic, write_json, write_spectrum_csv, Provenance,
};
use crate::lindblad::{rabi_trace, steady_state, DriveConfig};
use crate::model_selection::{
    cell_rng, crossing_threshold, discriminate, synthetic_spectrum, weight_sweep, SweepConfig,
    SynthSpec,
};
use crate::spectra::{eit_model, eit_threshold, tprime_exact_curve, Spectrum};
use crate::transmon::{diagonalize, selection_rule_sweep, TransmonSolution};
use crate::units::{mhz, to_mhz};

/// Command-line overrides shared by all subcommands.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub model: Option<ModelKind>,
    /// Control drive override (rad/s).
    pub omega_c: Option<f64>,
}

impl RunOptions {
    fn out_dir(&self, cfg: &ExperimentConfig) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("."))
    }

    fn seed(&self, cfg: &ExperimentConfig) -> u64 {
        self.seed.unwrap_or(cfg.noise.seed)
    }
}

fn synth_spec(cfg: &ExperimentConfig) -> Result<SynthSpec> {
    let (gamma_10, gamma_20) = cfg.require_rates()?.coherence();
    let drive = cfg.require_drive()?;
    Ok(SynthSpec {
        gamma_10,
        gamma_20,
        amplitude: drive.amplitude * drive.omega_p,
        span: drive.span,
        n_points: drive.points,
        noise_sigma: cfg.noise.sigma,
    })
}

fn control_drive(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<f64> {
    opts.omega_c
        .or(cfg.drive.as_ref().and_then(|d| d.omega_c))
        .ok_or_else(|| Error::validation("drive.omega_c", "missing (or pass --omega-c)"))
}

/// Closed-form spectrum on the configured grid plus seeded noise.
pub fn synth_spectrum(cfg: &ExperimentConfig, omega_c: f64, seed: u64) -> Result<Spectrum> {
    synthetic_spectrum(&synth_spec(cfg)?, omega_c, seed)
}

/// The configured input file, or a synthetic spectrum.
fn load_spectrum(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Spectrum> {
    match &cfg.input {
        Some(path) => read_spectrum_csv(path),
        None => synth_spectrum(cfg, control_drive(cfg, opts)?, opts.seed(cfg)),
    }
}

fn provenance(command: &str, cfg: &ExperimentConfig, seed: Option<u64>) -> Provenance {
    Provenance::new(command, &cfg.hash, seed)
}

pub fn cmd_simulate(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    cfg.require_rates()?;
    let drive = cfg.require_drive()?;
    let omega_c = control_drive(cfg, opts)?;
    let seed = opts.seed(cfg);
    let dir = opts.out_dir(cfg);
    let prov = provenance("simulate", cfg, Some(seed));
    let spectrum = synth_spectrum(cfg, omega_c, seed)?;
    let mut written = vec![dir.join("spectrum.csv")];
    write_spectrum_csv(&written[0], &spectrum, &prov)?;

    // density-matrix pipeline needs the individual rates
    if let Some(rates) = cfg.rates.as_ref().and_then(|r| r.full()) {
        let transmissions = match &cfg.cavity {
            Some(c) => Some(state_transmissions(
                &c.spec,
                &dispersive_shifts(&c.spec, c.nu10, c.nu21)?,
            )?),
            None => None,
        };
        let mut header = vec!["detuning_mhz", "im_rho20", "rho11", "rho22"];
        if transmissions.is_some() {
            header.extend(["tprime_re", "tprime_im"]);
        }
        let mut rows = Vec::with_capacity(spectrum.len());
        for &delta in &spectrum.detunings {
            let d = DriveConfig {
                omega_c,
                omega_p: drive.omega_p,
                delta,
            };
            let rho = steady_state(rates, &d)?;
            let mut row = vec![
                to_mhz(delta),
                rho.get(2, 0).im,
                rho.population(1),
                rho.population(2),
            ];
            if let Some(t) = &transmissions {
                let tp = normalize(composite_transmission(&rho, t), t[0], t[2])?;
                row.extend([tp.re, tp.im]);
            }
            rows.push(row);
        }
        let path = dir.join("steady_state.csv");
        write_atomic(&path, table_csv(&header, &rows, &prov).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub model: ModelKind,
    /// Unit of frequency-like parameters.
    pub units: &'static str,
    pub fit: FitResult,
    pub omega_c_mhz: Option<f64>,
    pub warnings: Vec<String>,
}

/// Exact-model fit started from a ladder of control drives, keeping the best.
pub fn fit_exact_multistart(
    data: &Dataset,
    gamma_10: f64,
    gamma_20: f64,
    hint: Option<f64>,
    options: &FitOptions,
) -> Result<FitResult> {
    let peak = data.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(peak > 0.0) {
        return Err(Error::invalid("spectrum has no positive peak"));
    }
    let mut starts: Vec<f64> = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0]
        .iter()
        .map(|&f| mhz(f))
        .collect();
    starts.extend(hint);
    let mut best: Option<FitResult> = None;
    let mut first_err = None;
    for omega_c in starts {
        let unit = crate::spectra::ExactModelParams {
            amplitude: 1.0,
            omega_p: 1.0,
            omega_c,
            gamma_10,
            gamma_20,
        };
        let unit_peak = tprime_exact_curve(&data.x, &unit)
            .into_iter()
            .fold(f64::MIN_POSITIVE, f64::max);
        let init = ExactInit {
            omega_c,
            amplitude: peak / unit_peak,
        };
        match fit_exact_tprime(data, gamma_10, gamma_20, init, options) {
            Ok(fit) => {
                if best
                    .as_ref()
                    .is_none_or(|b| fit.residual_sum < b.residual_sum)
                {
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

pub fn fit_spectrum(
    spectrum: &Spectrum,
    model: ModelKind,
    coherence: Option<(f64, f64)>,
    hint: Option<f64>,
    options: &FitOptions,
) -> Result<FitReport> {
    let data = Dataset::new(spectrum.detunings.clone(), spectrum.values.clone())?;
    let mut warnings = Vec::new();
    let fit = match model {
        ModelKind::Exact => {
            let (g10, g20) = coherence
                .ok_or_else(|| Error::validation("rates", "exact model needs coherence rates"))?;
            fit_exact_multistart(&data, g10, g20, hint, options)?
        }
        ModelKind::Eit => {
            let fit = fit_eit_model(&data, options)?;
            let p = eit_params(&fit);
            let lowest = data
                .x
                .iter()
                .map(|&x| eit_model(x, &p))
                .fold(f64::INFINITY, f64::min);
            if lowest < 0.0 {
                warnings.push(format!(
                    "fitted EIT curve goes negative (min {lowest:.3e}); the spectrum is probably not in the EIT regime"
                ));
            }
            if (p.gamma_plus - p.gamma_minus).abs() < 0.05 * p.gamma_plus {
                warnings.push(
                    "EIT fit collapsed to nearly equal widths; the spectrum is probably split"
                        .into(),
                );
            }
            fit
        }
        ModelKind::Ats => {
            let fit = fit_ats_model(&data, options)?;
            let (d0, g) = (
                fit.get("delta0").unwrap_or(0.0),
                fit.get("gamma").unwrap_or(1.0),
            );
            if d0 < 0.5 * g {
                warnings.push(
                    "ATS peaks overlap within one width; the spectrum is probably not split".into(),
                );
            }
            fit
        }
        other => {
            return Err(Error::validation(
                "model",
                format!("`{}` is not a spectral model", other.name()),
            ))
        }
    };
    if !fit.converged {
        warnings.push(format!(
            "optimizer stopped after {} iterations without converging",
            fit.iterations
        ));
    }
    let omega_c_mhz = fit.get("omega_c").map(to_mhz);
    if let (Some(oc), Some((g10, g20))) = (fit.get("omega_c"), coherence) {
        if oc >= eit_threshold(g10, g20) {
            warnings.push(format!(
                "fitted control drive {:.4} MHz is above the EIT bound {:.4} MHz",
                to_mhz(oc),
                to_mhz(eit_threshold(g10, g20))
            ));
        }
    }
    Ok(FitReport {
        model,
        units: "rad/s",
        fit,
        omega_c_mhz,
        warnings,
    })
}

pub fn cmd_fit(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let model = opts.model.unwrap_or(ModelKind::Exact);
    let spectrum = load_spectrum(cfg, opts)?;
    let coherence = cfg.rates.as_ref().map(|r| r.coherence());
    let hint = opts.omega_c.or(cfg.drive.as_ref().and_then(|d| d.omega_c));
    let report = fit_spectrum(&spectrum, model, coherence, hint, &FitOptions::default())?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let path = opts.out_dir(cfg).join(format!("fit_{}.json", model.name()));
    write_json(&path, &report, &provenance("fit", cfg, spectrum.meta.seed))?;
    Ok(vec![path])
}

pub fn cmd_discriminate(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let spectrum = load_spectrum(cfg, opts)?;
    let d = discriminate(&spectrum, &FitOptions::default())?;
    let path = opts.out_dir(cfg).join("aic.json");
    write_json(
        &path,
        &d,
        &provenance("discriminate", cfg, spectrum.meta.seed),
    )?;
    Ok(vec![path])
}

#[derive(Debug, Clone, Serialize)]
struct SweepSummary {
    omega_aic_mhz: Option<f64>,
    multiple_crossings: bool,
    omega_eit_mhz: f64,
    /// Crossing of each seed's own curve, `None` where it never crosses.
    seed_crossings_mhz: Vec<Option<f64>>,
    failed_cells: Vec<(usize, u64, String)>,
}

pub fn cmd_sweep(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let synth = synth_spec(cfg)?;
    let grid = cfg
        .require_drive()?
        .grid()
        .ok_or_else(|| Error::validation("drive.omega_c_start", "sweep needs an omega_c grid"))?;
    let sweep_cfg = SweepConfig {
        synth,
        omega_c: grid,
        n_seeds: cfg.noise.seeds,
        base_seed: opts.seed(cfg),
    };
    let sweep = weight_sweep(&sweep_cfg, &FitOptions::default())?;
    let dir = opts.out_dir(cfg);
    let prov = provenance("sweep", cfg, Some(sweep_cfg.base_seed));

    let rows: Vec<Vec<f64>> = sweep
        .points
        .iter()
        .map(|p| {
            vec![
                to_mhz(p.omega_c),
                p.w_eit,
                p.w_ats,
                p.w_eit_min,
                p.w_eit_max,
            ]
        })
        .collect();
    let csv = dir.join("sweep.csv");
    write_atomic(
        &csv,
        table_csv(
            &["omega_c_mhz", "w_eit", "w_ats", "w_eit_min", "w_eit_max"],
            &rows,
            &prov,
        )
        .as_bytes(),
    )?;

    let crossing = crossing_threshold(&sweep.omega_c(), &sweep.mean_w_eit()).ok();
    let summary = SweepSummary {
        omega_aic_mhz: crossing.map(|c| to_mhz(c.omega_aic)),
        multiple_crossings: crossing.is_some_and(|c| c.multiple),
        omega_eit_mhz: to_mhz(eit_threshold(synth.gamma_10, synth.gamma_20)),
        seed_crossings_mhz: (0..sweep.seeds.len())
            .map(|s| {
                let (x, w) = sweep.seed_curve(s);
                crossing_threshold(&x, &w).ok().map(|c| to_mhz(c.omega_aic))
            })
            .collect(),
        failed_cells: sweep.errors.clone(),
    };
    let json = dir.join("sweep.json");
    write_json(&json, &summary, &prov)?;
    Ok(vec![csv, json])
}

#[derive(Debug, Clone, Serialize)]
struct LevelsReport<'a> {
    e_c_hz: f64,
    e_j0_hz: f64,
    flux_ratio: f64,
    n_g: f64,
    charge_cutoff: usize,
    solution: &'a TransmonSolution,
    omega_10_mhz: f64,
    omega_21_mhz: f64,
}

pub fn cmd_transmon(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let block = cfg.require_transmon()?;
    let dir = opts.out_dir(cfg);
    let prov = provenance("transmon", cfg, None);
    let sol = diagonalize(&block.spec)?;
    let pick = |i: usize, j: usize| {
        if sol.num_levels() > i.max(j) {
            sol.transition(i, j) / 1e6
        } else {
            f64::NAN
        }
    };
    let report = LevelsReport {
        e_c_hz: block.spec.e_c,
        e_j0_hz: block.spec.e_j0,
        flux_ratio: block.spec.flux_ratio,
        n_g: block.spec.n_g,
        charge_cutoff: block.spec.charge_cutoff,
        solution: &sol,
        omega_10_mhz: pick(0, 1),
        omega_21_mhz: pick(1, 2),
    };
    let json = dir.join("levels.json");
    write_json(&json, &report, &prov)?;
    let mut written = vec![json];
    if !block.ratios.is_empty() {
        let rows: Vec<Vec<f64>> = selection_rule_sweep(&block.spec, &block.ratios)?
            .into_iter()
            .map(|r| vec![r.ratio, r.e01, r.e02, r.e12, r.m01, r.m02, r.m12])
            .collect();
        let csv = dir.join("selection.csv");
        write_atomic(
            &csv,
            table_csv(
                &["ratio", "e01", "e02", "e12", "m01", "m02", "m12"],
                &rows,
                &prov,
            )
            .as_bytes(),
        )?;
        written.push(csv);
    }
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
struct RabiReport {
    fit: FitResult,
    period_ns: f64,
    decay_ns: f64,
}

pub fn cmd_rabi(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    use rand_distr::{Distribution, Normal};

    let rates = cfg.require_full_rates()?;
    let rabi = cfg.require_rabi()?;
    let seed = opts.seed(cfg);
    let n = rabi.samples;
    let times: Vec<f64> = (0..n)
        .map(|k| rabi.duration * k as f64 / (n - 1) as f64)
        .collect();
    let drive = DriveConfig {
        omega_c: 0.0,
        omega_p: rabi.omega,
        delta: 0.0,
    };
    let mut trace = rabi_trace(rates, &drive, &times)?;
    if cfg.noise.sigma > 0.0 {
        let peak = trace.iter().cloned().fold(0.0, f64::max);
        let normal =
            Normal::new(0.0, cfg.noise.sigma * peak).map_err(|e| Error::invalid(e.to_string()))?;
        let mut rng = cell_rng(rabi.omega, seed);
        for v in trace.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    let fit = fit_damped_sinusoid(
        &Dataset::new(times.clone(), trace.clone())?,
        None,
        &FitOptions::default(),
    )?;
    let p = fit.values();
    let dir = opts.out_dir(cfg);
    let prov = provenance("rabi", cfg, Some(seed));
    let rows: Vec<Vec<f64>> = times
        .iter()
        .zip(&trace)
        .map(|(&t, &y)| {
            vec![
                t * 1e9,
                y,
                crate::fitting::damped_sinusoid(t, p[0], p[1], p[2], p[3], p[4]),
            ]
        })
        .collect();
    let csv = dir.join("rabi.csv");
    write_atomic(
        &csv,
        table_csv(&["time_ns", "population", "fit"], &rows, &prov).as_bytes(),
    )?;
    let report = RabiReport {
        period_ns: fit.get("period").unwrap_or(f64::NAN) * 1e9,
        decay_ns: fit.get("decay").unwrap_or(f64::NAN) * 1e9,
        fit,
    };
    let json = dir.join("rabi.json");
    write_json(&json, &report, &prov)?;
    Ok(vec![csv, json])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fit,
    Discriminate,
    Sweep,
    Transmon,
    Rabi,
}

pub fn run(command: Command, config: &Path, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    let cfg = crate::config::load_config(config)?;
    match command {
        Command::Simulate => cmd_simulate(&cfg, opts),
        Command::Fit => cmd_fit(&cfg, opts),
        Command::Discriminate => cmd_discriminate(&cfg, opts),
        Command::Sweep => cmd_sweep(&cfg, opts),
        Command::Transmon => cmd_transmon(&cfg, opts),
        Command::Rabi => cmd_rabi(&cfg, opts),
    }
}

/// Process exit status for a command outcome.
pub fn exit_code(result: &Result<Vec<PathBuf>>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_validation() => 1,
        Err(_) => 2,
    }
}
