//! File formats: spectrum CSV, generic numeric tables and versioned JSON
//! reports. All writes go through a temporary file in the target directory
//! followed by a rename.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectra::{Spectrum, SpectrumMeta};
use crate::units::{mhz, to_mhz};

pub const SCHEMA_VERSION: u32 = 1;
pub const SPECTRUM_HEADER: &str = "detuning_mhz,tprime";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(command: &str, config_sha256: &str, seed: Option<u64>) -> Self {
        Provenance {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: config_sha256.into(),
            seed,
        }
    }

    fn comment_lines(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# tool = {} {}", self.tool, self.version);
        let _ = writeln!(s, "# command = {}", self.command);
        let _ = writeln!(s, "# config_sha256 = {}", self.config_sha256);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "# seed = {seed}");
        }
        s
    }
}

/// Seventeen significant digits: enough to reproduce any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// MHz value that converts back to exactly `omega`, when one exists within a
/// few ulps of the plain conversion.
fn exact_mhz(omega: f64) -> f64 {
    let guess = to_mhz(omega);
    let mut lo = guess;
    let mut hi = guess;
    for _ in 0..4 {
        if mhz(lo) == omega {
            return lo;
        }
        if mhz(hi) == omega {
            return hi;
        }
        lo = lo.next_down();
        hi = hi.next_up();
    }
    guess
}

pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

pub fn spectrum_csv(spectrum: &Spectrum, prov: &Provenance) -> String {
    let mut s = prov.comment_lines();
    let meta = &spectrum.meta;
    let _ = writeln!(s, "# source = {}", meta.source);
    if let Some(oc) = meta.omega_c {
        let _ = writeln!(s, "# omega_c_mhz = {}", fmt_f64(exact_mhz(oc)));
    }
    if let Some(sigma) = meta.noise_sigma {
        let _ = writeln!(s, "# noise_sigma = {}", fmt_f64(sigma));
    }
    s.push_str(SPECTRUM_HEADER);
    s.push('\n');
    for (d, v) in spectrum.detunings.iter().zip(&spectrum.values) {
        let _ = writeln!(s, "{},{}", fmt_f64(exact_mhz(*d)), fmt_f64(*v));
    }
    s
}

pub fn write_spectrum_csv(path: &Path, spectrum: &Spectrum, prov: &Provenance) -> Result<()> {
    write_atomic(path, spectrum_csv(spectrum, prov).as_bytes())
}

fn parse_field(line: usize, field: &str) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("`{}` is not a number", field.trim()),
    })
}

pub fn parse_spectrum_csv(text: &str) -> Result<Spectrum> {
    let mut meta = SpectrumMeta {
        source: "file".into(),
        ..Default::default()
    };
    let mut header_seen = false;
    let (mut detunings, mut values) = (Vec::new(), Vec::new());
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once('=') {
                let v = v.trim();
                match k.trim() {
                    "source" => meta.source = v.to_string(),
                    "seed" => meta.seed = v.parse().ok(),
                    "omega_c_mhz" => meta.omega_c = v.parse().ok().map(mhz),
                    "noise_sigma" => meta.noise_sigma = v.parse().ok(),
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            if trimmed != SPECTRUM_HEADER {
                return Err(Error::Parse {
                    line,
                    message: format!("expected header `{SPECTRUM_HEADER}`"),
                });
            }
            header_seen = true;
            continue;
        }
        let (d, v) = trimmed.split_once(',').ok_or_else(|| Error::Parse {
            line,
            message: "expected two columns".into(),
        })?;
        detunings.push(mhz(parse_field(line, d)?));
        values.push(parse_field(line, v)?);
    }
    if !header_seen {
        return Err(Error::Parse {
            line: 1,
            message: "missing header".into(),
        });
    }
    Spectrum::new(detunings, values, meta)
}

pub fn read_spectrum_csv(path: &Path) -> Result<Spectrum> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_spectrum_csv(&text)
}

/// Numeric table with a provenance header.
pub fn table_csv(header: &[&str], rows: &[Vec<f64>], prov: &Provenance) -> String {
    let mut s = prov.comment_lines();
    s.push_str(&header.join(","));
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    schema_version: u32,
    provenance: &'a Provenance,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with `schema_version` and `provenance` at the top level.
pub fn json_report<T: Serialize>(body: &T, prov: &Provenance) -> Result<String> {
    let env = Envelope {
        schema_version: SCHEMA_VERSION,
        provenance: prov,
        body,
    };
    let mut s = serde_json::to_string_pretty(&env).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, body: &T, prov: &Provenance) -> Result<()> {
    write_atomic(path, json_report(body, prov)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectra::uniform_grid;

    fn prov() -> Provenance {
        Provenance::new("test", "abc", Some(3))
    }

    #[test]
    fn spectrum_roundtrip_is_exact() {
        let x: Vec<f64> = uniform_grid(25.0, 61).into_iter().map(mhz).collect();
        let y: Vec<f64> = x.iter().map(|v| (v * 1e-8).sin() / 3.0).collect();
        let meta = SpectrumMeta {
            source: "synthetic".into(),
            seed: Some(3),
            omega_c: Some(mhz(2.06)),
            noise_sigma: Some(0.03),
        };
        let s = Spectrum::new(x, y, meta).unwrap();
        let back = parse_spectrum_csv(&spectrum_csv(&s, &prov())).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn bad_rows_report_line() {
        let text = "# c\ndetuning_mhz,tprime\n1,2\n2,x\n";
        assert!(matches!(
            parse_spectrum_csv(text),
            Err(Error::Parse { line: 4, .. })
        ));
        assert!(matches!(
            parse_spectrum_csv("a,b\n"),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn json_envelope() {
        let s = json_report(&serde_json::json!({"w_eit": 0.5}), &prov()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert_eq!(v["provenance"]["seed"], 3);
        assert_eq!(v["w_eit"], 0.5);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/out.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
    }
}
