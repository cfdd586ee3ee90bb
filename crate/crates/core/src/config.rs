//! Line-oriented experiment configuration.
//!
//! ```text
//! # comment
//! units = MHz
//! rates.coherence10 = 1.76
//! rates.coherence20 = 6.90 MHz
//! drive.omega_c = 2.06
//! noise.sigma = 0.03
//! ```
//!
//! Frequencies are cyclic (`omega / 2 pi`) and take an optional `Hz`, `kHz`,
//! `MHz` or `GHz` suffix, defaulting to the top-level `units`. Transmon
//! energies are kept in Hz; every other frequency becomes rad/s. Durations
//! take `s`, `ms`, `us` or `ns` (default ns).

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dispersive::CavitySpec;
use crate::error::{Error, Result};
use crate::lindblad::ThreeLevelRates;
use crate::transmon::{TransmonSpec, DEFAULT_CUTOFF};
use crate::units::{mhz, to_mhz};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreqUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FreqUnit {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "Hz" => Some(FreqUnit::Hz),
            "kHz" => Some(FreqUnit::KHz),
            "MHz" => Some(FreqUnit::MHz),
            "GHz" => Some(FreqUnit::GHz),
            _ => None,
        }
    }

    pub fn scale(&self) -> f64 {
        match self {
            FreqUnit::Hz => 1.0,
            FreqUnit::KHz => 1e3,
            FreqUnit::MHz => 1e6,
            FreqUnit::GHz => 1e9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmonBlock {
    pub spec: TransmonSpec,
    /// `E_J/E_C` values for the selection-rule table.
    pub ratios: Vec<f64>,
}

/// Either the full relaxation/dephasing set or just the two coherence
/// rates the spectral models need (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RatesBlock {
    Full(ThreeLevelRates),
    Coherence { gamma_10: f64, gamma_20: f64 },
}

impl RatesBlock {
    pub fn coherence(&self) -> (f64, f64) {
        match self {
            RatesBlock::Full(r) => (r.coherence_10(), r.coherence_20()),
            RatesBlock::Coherence { gamma_10, gamma_20 } => (*gamma_10, *gamma_20),
        }
    }

    pub fn full(&self) -> Option<&ThreeLevelRates> {
        match self {
            RatesBlock::Full(r) => Some(r),
            RatesBlock::Coherence { .. } => None,
        }
    }
}

/// Drive settings (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriveBlock {
    pub omega_c: Option<f64>,
    /// `(start, stop, step)` for sweeps.
    pub omega_c_grid: Option<(f64, f64, f64)>,
    pub omega_p: f64,
    /// Dimensionless `A` in `T' = A Im(rho20)`.
    pub amplitude: f64,
    /// Half-span of the detuning grid.
    pub span: f64,
    pub points: usize,
}

impl DriveBlock {
    /// Grid points `start, start+step, ...` up to `stop` (inclusive within
    /// half a step).
    pub fn grid(&self) -> Option<Vec<f64>> {
        let (start, stop, step) = self.omega_c_grid?;
        let n = ((stop - start) / step + 0.5).floor() as usize + 1;
        // stepped in MHz and rounded to 1 mHz, so each point is bit-identical
        // to the same drive written out as a decimal (and draws the same noise)
        let (start, step) = (to_mhz(start), to_mhz(step));
        Some(
            (0..n)
                .map(|k| mhz(((start + step * k as f64) * 1e9).round() / 1e9))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityBlock {
    pub spec: CavitySpec,
    /// Transmon transitions seen by the cavity (rad/s).
    pub nu10: f64,
    pub nu21: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseBlock {
    /// Standard deviation as a fraction of the noiseless peak.
    pub sigma: f64,
    pub seeds: usize,
    pub seed: u64,
}

impl Default for NoiseBlock {
    fn default() -> Self {
        NoiseBlock {
            sigma: 0.0,
            seeds: crate::model_selection::DEFAULT_SEEDS,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiBlock {
    /// Drive on the 0-2 transition (rad/s).
    pub omega: f64,
    /// Trace length (s).
    pub duration: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub units: FreqUnit,
    pub transmon: Option<TransmonBlock>,
    pub rates: Option<RatesBlock>,
    pub drive: Option<DriveBlock>,
    pub cavity: Option<CavityBlock>,
    pub noise: NoiseBlock,
    pub rabi: Option<RabiBlock>,
    /// Spectrum CSV to analyze instead of synthesizing one.
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    /// SHA-256 of the source text.
    pub hash: String,
}

impl ExperimentConfig {
    pub fn require_rates(&self) -> Result<&RatesBlock> {
        self.rates
            .as_ref()
            .ok_or_else(|| Error::validation("rates", "block required"))
    }

    pub fn require_full_rates(&self) -> Result<&ThreeLevelRates> {
        self.require_rates()?.full().ok_or_else(|| {
            Error::validation(
                "rates",
                "relaxation and dephasing rates required, not coherence rates",
            )
        })
    }

    pub fn require_drive(&self) -> Result<&DriveBlock> {
        self.drive
            .as_ref()
            .ok_or_else(|| Error::validation("drive", "block required"))
    }

    pub fn require_transmon(&self) -> Result<&TransmonBlock> {
        self.transmon
            .as_ref()
            .ok_or_else(|| Error::validation("transmon", "block required"))
    }

    pub fn require_rabi(&self) -> Result<&RabiBlock> {
        self.rabi
            .as_ref()
            .ok_or_else(|| Error::validation("rabi", "block required"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    /// Cyclic frequency to rad/s.
    Freq,
    /// Energy over h, kept in Hz.
    Energy,
    Time,
    Number,
    Count,
    List,
    Text,
}

const KEYS: &[(&str, Kind)] = &[
    ("transmon.e_c", Kind::Energy),
    ("transmon.e_j0", Kind::Energy),
    ("transmon.ej_over_ec", Kind::Number),
    ("transmon.flux_ratio", Kind::Number),
    ("transmon.n_g", Kind::Number),
    ("transmon.cutoff", Kind::Count),
    ("transmon.levels", Kind::Count),
    ("transmon.ratios", Kind::List),
    ("rates.gamma10", Kind::Freq),
    ("rates.gamma20", Kind::Freq),
    ("rates.gamma21", Kind::Freq),
    ("rates.dephasing00", Kind::Freq),
    ("rates.dephasing11", Kind::Freq),
    ("rates.dephasing22", Kind::Freq),
    ("rates.coherence10", Kind::Freq),
    ("rates.coherence20", Kind::Freq),
    ("drive.omega_c", Kind::Freq),
    ("drive.omega_c_start", Kind::Freq),
    ("drive.omega_c_stop", Kind::Freq),
    ("drive.omega_c_step", Kind::Freq),
    ("drive.omega_p", Kind::Freq),
    ("drive.amplitude", Kind::Number),
    ("drive.span", Kind::Freq),
    ("drive.points", Kind::Count),
    ("cavity.frequency", Kind::Freq),
    ("cavity.q_loaded", Kind::Number),
    ("cavity.g1", Kind::Freq),
    ("cavity.g2", Kind::Freq),
    ("cavity.nu10", Kind::Freq),
    ("cavity.nu21", Kind::Freq),
    ("noise.sigma", Kind::Number),
    ("noise.seeds", Kind::Count),
    ("noise.seed", Kind::Count),
    ("rabi.omega", Kind::Freq),
    ("rabi.duration", Kind::Time),
    ("rabi.samples", Kind::Count),
    ("input.spectrum", Kind::Text),
    ("output.dir", Kind::Text),
];

#[derive(Debug, Clone, PartialEq)]
enum Value {
    Num(f64),
    Count(u64),
    List(Vec<f64>),
    Text(String),
}

/// Split `"-1.5 MHz"` / `"-1.5MHz"` into number and suffix.
fn split_unit(raw: &str) -> (&str, &str) {
    let end = raw
        .char_indices()
        .find(|&(i, ch)| ch.is_ascii_alphabetic() && !is_exponent(raw, i))
        .map(|(i, _)| i)
        .unwrap_or(raw.len());
    (raw[..end].trim(), raw[end..].trim())
}

fn is_exponent(raw: &str, i: usize) -> bool {
    let bytes = raw.as_bytes();
    matches!(bytes[i], b'e' | b'E')
        && i > 0
        && bytes[i - 1].is_ascii_digit()
        && bytes
            .get(i + 1)
            .is_some_and(|b| b.is_ascii_digit() || *b == b'-' || *b == b'+')
}

fn parse_value(kind: Kind, raw: &str, units: FreqUnit, line: usize) -> Result<Value> {
    let perr = |message: String| Error::Parse { line, message };
    let number = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| perr(format!("`{s}` is not a number")))
    };
    match kind {
        Kind::Text => {
            if raw.is_empty() {
                return Err(perr("empty value".into()));
            }
            Ok(Value::Text(raw.to_string()))
        }
        Kind::List => raw
            .split(',')
            .map(|s| number(s.trim()))
            .collect::<Result<Vec<_>>>()
            .map(Value::List),
        Kind::Count => raw
            .parse::<u64>()
            .map(Value::Count)
            .map_err(|_| perr(format!("`{raw}` is not a non-negative integer"))),
        Kind::Number => {
            let (num, unit) = split_unit(raw);
            if !unit.is_empty() {
                return Err(perr(format!(
                    "dimensionless value takes no unit, got `{unit}`"
                )));
            }
            Ok(Value::Num(number(num)?))
        }
        Kind::Freq | Kind::Energy => {
            let (num, unit) = split_unit(raw);
            let unit = if unit.is_empty() {
                units
            } else {
                FreqUnit::parse(unit)
                    .ok_or_else(|| perr(format!("unknown frequency unit `{unit}`")))?
            };
            let hz = number(num)? * unit.scale();
            Ok(Value::Num(if kind == Kind::Freq { TAU * hz } else { hz }))
        }
        Kind::Time => {
            let (num, unit) = split_unit(raw);
            let scale = match unit {
                "" | "ns" => 1e-9,
                "us" => 1e-6,
                "ms" => 1e-3,
                "s" => 1.0,
                other => return Err(perr(format!("unknown time unit `{other}`"))),
            };
            Ok(Value::Num(number(num)? * scale))
        }
    }
}

struct Entries {
    map: BTreeMap<String, (Value, usize)>,
}

impl Entries {
    fn has_section(&self, section: &str) -> bool {
        let prefix = format!("{section}.");
        self.map.keys().any(|k| k.starts_with(&prefix))
    }

    fn num(&self, key: &str) -> Option<f64> {
        match self.map.get(key) {
            Some((Value::Num(v), _)) => Some(*v),
            _ => None,
        }
    }

    fn count(&self, key: &str) -> Option<u64> {
        match self.map.get(key) {
            Some((Value::Count(v), _)) => Some(*v),
            _ => None,
        }
    }

    fn list(&self, key: &str) -> Option<Vec<f64>> {
        match self.map.get(key) {
            Some((Value::List(v), _)) => Some(v.clone()),
            _ => None,
        }
    }

    fn text(&self, key: &str) -> Option<String> {
        match self.map.get(key) {
            Some((Value::Text(v), _)) => Some(v.clone()),
            _ => None,
        }
    }

    fn need(&self, key: &str) -> Result<f64> {
        self.num(key)
            .ok_or_else(|| Error::validation(key, "missing"))
    }
}

fn non_negative(key: &str, v: f64) -> Result<f64> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::validation(
            key,
            format!("must be non-negative, got {v}"),
        ))
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::validation(key, format!("must be positive, got {v}")))
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = parse_config(&text)?;
    // relative paths are taken from the config's directory
    let base = path.parent().unwrap_or(Path::new(""));
    if let Some(p) = cfg.input.as_mut() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if let Some(p) = cfg.output_dir.as_mut() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut units = FreqUnit::MHz;
    let mut raw: Vec<(usize, String, String)> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            message: "expected `key = value`".into(),
        })?;
        let (key, value) = (key.trim(), value.trim());
        if key == "units" {
            units = FreqUnit::parse(value).ok_or_else(|| Error::Parse {
                line: line_no,
                message: format!("unknown unit `{value}`"),
            })?;
            continue;
        }
        raw.push((line_no, key.to_string(), value.to_string()));
    }

    let mut map = BTreeMap::new();
    for (line, key, value) in raw {
        let kind = KEYS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, kind)| *kind)
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("unknown key `{key}`"),
            })?;
        let parsed = parse_value(kind, &value, units, line)?;
        if map.insert(key.clone(), (parsed, line)).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    let e = Entries { map };

    let transmon = if e.has_section("transmon") {
        Some(transmon_block(&e)?)
    } else {
        None
    };
    let rates = if e.has_section("rates") {
        Some(rates_block(&e)?)
    } else {
        None
    };
    let drive = if e.has_section("drive") {
        Some(drive_block(&e)?)
    } else {
        None
    };
    let cavity = if e.has_section("cavity") {
        Some(cavity_block(&e)?)
    } else {
        None
    };
    let rabi = if e.has_section("rabi") {
        Some(rabi_block(&e)?)
    } else {
        None
    };
    let defaults = NoiseBlock::default();
    let noise = NoiseBlock {
        sigma: non_negative(
            "noise.sigma",
            e.num("noise.sigma").unwrap_or(defaults.sigma),
        )?,
        seeds: match e.count("noise.seeds") {
            Some(0) => return Err(Error::validation("noise.seeds", "need at least one seed")),
            Some(n) => n as usize,
            None => defaults.seeds,
        },
        seed: e.count("noise.seed").unwrap_or(defaults.seed),
    };

    Ok(ExperimentConfig {
        units,
        transmon,
        rates,
        drive,
        cavity,
        noise,
        rabi,
        input: e.text("input.spectrum").map(PathBuf::from),
        output_dir: e.text("output.dir").map(PathBuf::from),
        hash: sha256_hex(text.as_bytes()),
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn transmon_block(e: &Entries) -> Result<TransmonBlock> {
    let e_c = positive("transmon.e_c", e.need("transmon.e_c")?)?;
    let flux_ratio = e.num("transmon.flux_ratio").unwrap_or(0.0);
    let mut spec = TransmonSpec::from_ratio(e_c, 1.0, e.num("transmon.n_g").unwrap_or(0.0));
    spec.flux_ratio = flux_ratio;
    spec.e_j0 = match (e.num("transmon.e_j0"), e.num("transmon.ej_over_ec")) {
        (Some(_), Some(_)) => {
            return Err(Error::validation(
                "transmon.e_j0",
                "give e_j0 or ej_over_ec, not both",
            ));
        }
        (Some(e_j0), None) => non_negative("transmon.e_j0", e_j0)?,
        // ratio of the effective (flux-tuned) E_J to E_C
        (None, Some(r)) => {
            let r = non_negative("transmon.ej_over_ec", r)?;
            let tune = (std::f64::consts::PI * flux_ratio).cos().abs();
            if tune < 1e-12 {
                return Err(Error::validation(
                    "transmon.ej_over_ec",
                    "undefined at half a flux quantum",
                ));
            }
            r * e_c / (2.0 * tune)
        }
        (None, None) => {
            return Err(Error::validation(
                "transmon.e_j0",
                "missing (or give ej_over_ec)",
            ))
        }
    };
    spec.charge_cutoff = e
        .count("transmon.cutoff")
        .map(|c| c as usize)
        .unwrap_or(DEFAULT_CUTOFF);
    spec.num_levels = e.count("transmon.levels").map(|c| c as usize).unwrap_or(3);
    spec.validate().map_err(|err| match err {
        Error::InvalidInput(m) => Error::validation("transmon", m),
        other => other,
    })?;
    let ratios = e.list("transmon.ratios").unwrap_or_default();
    if let Some(bad) = ratios.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::validation(
            "transmon.ratios",
            format!("ratios must be positive, got {bad}"),
        ));
    }
    Ok(TransmonBlock { spec, ratios })
}

fn rates_block(e: &Entries) -> Result<RatesBlock> {
    const FULL: [&str; 6] = [
        "rates.gamma10",
        "rates.gamma20",
        "rates.gamma21",
        "rates.dephasing00",
        "rates.dephasing11",
        "rates.dephasing22",
    ];
    for key in FULL
        .iter()
        .chain(&["rates.coherence10", "rates.coherence20"])
    {
        if let Some(v) = e.num(key) {
            non_negative(key, v)?;
        }
    }
    let any_full = FULL.iter().any(|k| e.num(k).is_some());
    let any_coh = e.num("rates.coherence10").is_some() || e.num("rates.coherence20").is_some();
    match (any_full, any_coh) {
        (true, true) => Err(Error::validation(
            "rates",
            "give relaxation/dephasing rates or coherence rates, not both",
        )),
        (false, _) => Ok(RatesBlock::Coherence {
            gamma_10: positive("rates.coherence10", e.need("rates.coherence10")?)?,
            gamma_20: positive("rates.coherence20", e.need("rates.coherence20")?)?,
        }),
        (true, false) => {
            let r = ThreeLevelRates {
                gamma_10: e.num(FULL[0]).unwrap_or(0.0),
                gamma_20: e.num(FULL[1]).unwrap_or(0.0),
                gamma_21: e.num(FULL[2]).unwrap_or(0.0),
                dephasing_00: e.num(FULL[3]).unwrap_or(0.0),
                dephasing_11: e.num(FULL[4]).unwrap_or(0.0),
                dephasing_22: e.num(FULL[5]).unwrap_or(0.0),
            };
            r.validate()
                .map_err(|err| Error::validation("rates", err.to_string()))?;
            Ok(RatesBlock::Full(r))
        }
    }
}

fn drive_block(e: &Entries) -> Result<DriveBlock> {
    let omega_c = e
        .num("drive.omega_c")
        .map(|v| non_negative("drive.omega_c", v))
        .transpose()?;
    let grid_keys = [
        "drive.omega_c_start",
        "drive.omega_c_stop",
        "drive.omega_c_step",
    ];
    let grid = match grid_keys.map(|k| e.num(k)) {
        [None, None, None] => None,
        [Some(a), Some(b), Some(s)] => {
            let a = non_negative(grid_keys[0], a)?;
            let s = positive(grid_keys[2], s)?;
            if b < a {
                return Err(Error::validation(
                    grid_keys[1],
                    "must not be below omega_c_start",
                ));
            }
            Some((a, b, s))
        }
        _ => {
            return Err(Error::validation(
                "drive.omega_c_start",
                "grid needs start, stop and step",
            ))
        }
    };
    let points = e
        .count("drive.points")
        .unwrap_or(crate::spectra::DEFAULT_POINTS as u64) as usize;
    if points < 2 {
        return Err(Error::validation(
            "drive.points",
            "need at least two points",
        ));
    }
    Ok(DriveBlock {
        omega_c,
        omega_c_grid: grid,
        omega_p: positive("drive.omega_p", e.num("drive.omega_p").unwrap_or(mhz(0.01)))?,
        amplitude: positive("drive.amplitude", e.num("drive.amplitude").unwrap_or(1.0))?,
        span: positive("drive.span", e.num("drive.span").unwrap_or(mhz(25.0)))?,
        points,
    })
}

fn cavity_block(e: &Entries) -> Result<CavityBlock> {
    let spec = CavitySpec {
        omega_cavity: positive("cavity.frequency", e.need("cavity.frequency")?)?,
        q_loaded: positive("cavity.q_loaded", e.need("cavity.q_loaded")?)?,
        g1: non_negative("cavity.g1", e.need("cavity.g1")?)?,
        g2: e
            .num("cavity.g2")
            .map(|g| non_negative("cavity.g2", g))
            .transpose()?,
    };
    Ok(CavityBlock {
        spec,
        nu10: positive("cavity.nu10", e.need("cavity.nu10")?)?,
        nu21: positive("cavity.nu21", e.need("cavity.nu21")?)?,
    })
}

fn rabi_block(e: &Entries) -> Result<RabiBlock> {
    let samples = e.count("rabi.samples").unwrap_or(201) as usize;
    if samples < 6 {
        return Err(Error::validation(
            "rabi.samples",
            "need at least six samples",
        ));
    }
    Ok(RabiBlock {
        omega: positive("rabi.omega", e.need("rabi.omega")?)?,
        duration: positive("rabi.duration", e.need("rabi.duration")?)?,
        samples,
    })
}
