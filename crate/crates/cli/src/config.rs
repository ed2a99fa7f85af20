//! Flat `key = value` run configuration.
//!
//! Lines are `section.key = value`; `#` starts a comment. Every key is
//! checked against [`KEYS`] and every value parsed and range-checked before
//! any computation starts.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use attoshape::grid::TemporalGrid;
use attoshape::optimize::{FinalPlate, ObjectiveKind, Param};
use attoshape::physics::Setup;
use attoshape::propagation::{ModulationScheme, PhasePlate};
use num_complex::Complex64;

/// Recognized keys with their defaults (empty: no default).
pub const KEYS: &[(&str, &str)] = &[
    ("beam.energy_ev", "120000"),
    ("drive.wavelength_m", "8e-7"),
    ("grid.samples", "4096"),
    ("talbot.strength", "4"),
    ("scheme.stages", ""),
    ("propagate.z_start", "0"),
    ("propagate.z_end", ""),
    ("propagate.z_points", "201"),
    ("propagate.moments", "5"),
    ("optimize.template", "dual"),
    ("optimize.main_strength", "4"),
    ("optimize.final_plate", "harmonic"),
    ("optimize.objective", "max_bunching"),
    ("optimize.order", "1"),
    ("optimize.budget", "2000"),
    ("optimize.coarse_points", "16"),
    ("optimize.seeds", "3"),
    ("optimize.g_values", ""),
    ("optimize.scan_end", ""),
    ("optimize.scan_points", "161"),
    ("optimize.bounds.g1", ""),
    ("optimize.bounds.d1", ""),
    ("optimize.bounds.g2", ""),
    ("optimize.bounds.d2", ""),
    ("optimize.fixed.g1", ""),
    ("optimize.fixed.d1", ""),
    ("optimize.fixed.g2", ""),
    ("optimize.fixed.d2", ""),
    ("figure.z_points", "201"),
    ("figure.t_points", ""),
    ("figure.moment_points", "1001"),
    ("figure.wigner_samples", "128"),
    ("figure.fig2_g_values", "1, 2, 3, 4, 6, 8"),
    ("figure.fig2_parabolic", "true"),
    ("figure.fig2_budget", "2000"),
    ("figure.trajectories", "48"),
    ("figure.delays", "128"),
    ("figure.energy_window", "40"),
    ("figure.field_a", "0.2@0, 0.2@0, 0.2@0"),
    ("figure.field_b", "0.2@1.5707963267948966, 0.1@1.5707963267948966, 0.0667@1.5707963267948966"),
];

/// A distance along the beam, either in Talbot lengths or metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distance {
    Zeta(f64),
    Metres(f64),
}

impl Distance {
    fn parse(s: &str) -> Result<Self> {
        let mut parts = s.split_whitespace();
        let value: f64 = parts
            .next()
            .ok_or_else(|| anyhow!("missing distance"))?
            .parse()
            .with_context(|| format!("bad distance '{s}'"))?;
        let d = match parts.next() {
            None | Some("zeta") => Distance::Zeta(value),
            Some("m") => Distance::Metres(value),
            Some("mm") => Distance::Metres(value * 1e-3),
            Some(u) => bail!("unknown distance unit '{u}' (use zeta, m or mm)"),
        };
        if parts.next().is_some() {
            bail!("trailing text in distance '{s}'");
        }
        if !value.is_finite() || value < 0.0 {
            bail!("distance must be finite and non-negative, got '{s}'");
        }
        Ok(d)
    }

    pub fn zeta(&self, setup: &Setup) -> f64 {
        match *self {
            Distance::Zeta(z) => z,
            Distance::Metres(m) => setup.metres_to_zeta(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageSpec {
    Harmonic { strength: f64, phase: f64 },
    Parabolic { strength: f64 },
    Drift(Distance),
}

impl StageSpec {
    fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) = s.split_once(char::is_whitespace).unwrap_or((s, ""));
        let numbers = |rest: &str| -> Result<Vec<f64>> {
            rest.split_whitespace()
                .map(|t| t.parse::<f64>().with_context(|| format!("bad number '{t}' in stage '{s}'")))
                .collect()
        };
        let spec = match kind {
            "harmonic" => match numbers(rest)?.as_slice() {
                [g] => StageSpec::Harmonic { strength: *g, phase: 0.0 },
                [g, p] => StageSpec::Harmonic { strength: *g, phase: *p },
                _ => bail!("'harmonic' takes a strength and an optional phase: '{s}'"),
            },
            "parabolic" => match numbers(rest)?.as_slice() {
                [g] => StageSpec::Parabolic { strength: *g },
                _ => bail!("'parabolic' takes one strength: '{s}'"),
            },
            "drift" => StageSpec::Drift(Distance::parse(rest)?),
            _ => bail!("unknown stage '{kind}' (use harmonic, parabolic or drift)"),
        };
        match spec {
            StageSpec::Harmonic { strength, phase } if !strength.is_finite() || !phase.is_finite() => {
                bail!("stage values must be finite: '{s}'")
            }
            StageSpec::Parabolic { strength } if !strength.is_finite() => bail!("stage values must be finite: '{s}'"),
            _ => Ok(spec),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateKind {
    Single,
    Dual,
    Triple,
}

impl TemplateKind {
    pub fn plates(self) -> usize {
        match self {
            TemplateKind::Single => 1,
            TemplateKind::Dual => 2,
            TemplateKind::Triple => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeConfig {
    pub template: TemplateKind,
    pub main_strength: f64,
    pub final_plate: FinalPlate,
    pub objective: ObjectiveKind,
    pub budget: usize,
    pub coarse_points: usize,
    pub seeds: usize,
    pub g_values: Option<Vec<f64>>,
    /// Focus scan end (ζ after the main plate); default derived from `g`.
    pub scan_end: Option<f64>,
    pub scan_points: usize,
    pub bounds: Vec<(Param, f64, f64)>,
    pub fixed: Vec<(Param, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureConfig {
    pub z_points: usize,
    /// Time columns kept in density maps (every k-th grid sample).
    pub t_points: usize,
    pub moment_points: usize,
    pub wigner_samples: usize,
    pub fig2_g_values: Vec<f64>,
    pub fig2_parabolic: bool,
    pub fig2_budget: usize,
    pub trajectories: usize,
    pub delays: usize,
    pub energy_window: i64,
    pub field_a: Vec<Complex64>,
    pub field_b: Vec<Complex64>,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub setup: Setup,
    pub energy_ev: f64,
    pub wavelength: f64,
    pub grid: TemporalGrid,
    pub talbot_strength: f64,
    pub stages: Vec<StageSpec>,
    pub z_start: Distance,
    pub z_end: Option<Distance>,
    pub z_points: usize,
    pub moments: u32,
    pub optimize: OptimizeConfig,
    pub figure: FigureConfig,
    /// Every key with its effective value, for the manifest.
    pub resolved: BTreeMap<String, String>,
}

/// Error location inside a config file.
#[derive(Debug)]
struct KeyError {
    key: String,
    message: String,
}

impl fmt::Display for KeyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

impl std::error::Error for KeyError {}

fn parse_lines(text: &str) -> Result<BTreeMap<String, String>> {
    let mut values = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected 'key = value', got '{raw}'", i + 1))?;
        let key = key.trim();
        if !KEYS.iter().any(|(k, _)| *k == key) {
            bail!("line {}: unknown key '{key}'", i + 1);
        }
        if values.insert(key.to_string(), value.trim().to_string()).is_some() {
            bail!("line {}: duplicate key '{key}'", i + 1);
        }
    }
    Ok(values)
}

struct Reader {
    values: BTreeMap<String, String>,
}

impl Reader {
    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        let v = self.raw(key).ok_or_else(|| KeyError {
            key: key.into(),
            message: "value required".into(),
        })?;
        v.parse::<T>().map_err(|e| {
            KeyError {
                key: key.into(),
                message: format!("cannot parse '{v}': {e}"),
            }
            .into()
        })
    }

    fn positive(&self, key: &str) -> Result<f64> {
        let v: f64 = self.get(key)?;
        check(key, v.is_finite() && v > 0.0, || format!("must be positive, got {v}"))?;
        Ok(v)
    }

    fn count(&self, key: &str, min: usize) -> Result<usize> {
        let v: usize = self.get(key)?;
        check(key, v >= min, || format!("must be at least {min}, got {v}"))?;
        Ok(v)
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(|t| {
                        t.trim().parse::<f64>().map_err(|e| {
                            KeyError {
                                key: key.into(),
                                message: format!("bad number '{}': {e}", t.trim()),
                            }
                            .into()
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    fn field(&self, key: &str) -> Result<Vec<Complex64>> {
        let v = self.raw(key).ok_or_else(|| anyhow!("{key}: value required"))?;
        v.split(',')
            .map(|term| {
                let (m, p) = term.trim().split_once('@').unwrap_or((term.trim(), "0"));
                let m: f64 = m.trim().parse().with_context(|| format!("{key}: bad magnitude '{m}'"))?;
                let p: f64 = p.trim().parse().with_context(|| format!("{key}: bad phase '{p}'"))?;
                check(key, m.is_finite() && p.is_finite() && m >= 0.0, || {
                    format!("harmonic terms are 'magnitude@phase' with magnitude >= 0, got '{}'", term.trim())
                })?;
                Ok(Complex64::from_polar(m, p))
            })
            .collect()
    }
}

fn check(key: &str, ok: bool, message: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(KeyError {
            key: key.into(),
            message: message(),
        }
        .into())
    }
}

fn param_of(suffix: &str) -> Param {
    Param::parse(suffix).expect("known parameter key")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("invalid config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let given = parse_lines(text)?;
        let mut values: BTreeMap<String, String> =
            KEYS.iter().map(|(k, d)| (k.to_string(), d.to_string())).collect();
        values.extend(given);
        let mut r = Reader { values };

        let energy_ev = r.positive("beam.energy_ev")?;
        let wavelength = r.positive("drive.wavelength_m")?;
        let setup = Setup::new(energy_ev, wavelength).map_err(|e| anyhow!("beam/drive: {e}"))?;
        let samples: usize = r.get("grid.samples")?;
        let grid = TemporalGrid::new(samples).map_err(|e| anyhow!("grid.samples: {e}"))?;

        let stages = match r.raw("scheme.stages") {
            Some(v) => v
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(StageSpec::parse)
                .collect::<Result<Vec<_>>>()
                .context("scheme.stages")?,
            None => Vec::new(),
        };

        let z_start = Distance::parse(r.raw("propagate.z_start").unwrap_or("0")).context("propagate.z_start")?;
        let z_end = r
            .raw("propagate.z_end")
            .map(Distance::parse)
            .transpose()
            .context("propagate.z_end")?;

        let template = match r.raw("optimize.template").unwrap_or("") {
            "single" => TemplateKind::Single,
            "dual" => TemplateKind::Dual,
            "triple" => TemplateKind::Triple,
            other => bail!("optimize.template: expected single, dual or triple, got '{other}'"),
        };
        let final_plate = match r.raw("optimize.final_plate").unwrap_or("") {
            "harmonic" => FinalPlate::Harmonic,
            "parabolic" => FinalPlate::Parabolic,
            other => bail!("optimize.final_plate: expected harmonic or parabolic, got '{other}'"),
        };
        let order = r.count("optimize.order", 1)? as u32;
        let objective = match r.raw("optimize.objective").unwrap_or("") {
            "max_bunching" => ObjectiveKind::MaxBunching { order },
            "min_rms_duration" => ObjectiveKind::MinRmsDuration,
            other => bail!("optimize.objective: expected max_bunching or min_rms_duration, got '{other}'"),
        };
        let mut bounds = Vec::new();
        let mut fixed = Vec::new();
        for suffix in ["g1", "d1", "g2", "d2"] {
            let param = param_of(suffix);
            let key = format!("optimize.bounds.{suffix}");
            if let Some(list) = r.list(&key)? {
                match list.as_slice() {
                    [lo, hi] if lo <= hi => bounds.push((param, *lo, *hi)),
                    _ => bail!("{key}: expected 'lower, upper' with lower <= upper"),
                }
            }
            let key = format!("optimize.fixed.{suffix}");
            if r.raw(&key).is_some() {
                fixed.push((param, r.get::<f64>(&key)?));
            }
        }
        let g_values = r.list("optimize.g_values")?;
        if let Some(gs) = &g_values {
            check("optimize.g_values", !gs.is_empty() && gs.iter().all(|g| g.is_finite() && *g > 0.0), || {
                "must be a non-empty list of positive strengths".into()
            })?;
        }
        let optimize = OptimizeConfig {
            template,
            main_strength: r.positive("optimize.main_strength")?,
            final_plate,
            objective,
            budget: r.count("optimize.budget", 1)?,
            coarse_points: r.count("optimize.coarse_points", 2)?,
            seeds: r.count("optimize.seeds", 1)?,
            g_values,
            scan_end: r.raw("optimize.scan_end").map(|_| r.positive("optimize.scan_end")).transpose()?,
            scan_points: r.count("optimize.scan_points", 3)?,
            bounds,
            fixed,
        };

        let fig2_g_values = r.list("figure.fig2_g_values")?.unwrap_or_default();
        check(
            "figure.fig2_g_values",
            !fig2_g_values.is_empty() && fig2_g_values.iter().all(|g| g.is_finite() && *g > 0.0),
            || "must be a non-empty list of positive strengths".into(),
        )?;
        let wigner_samples = r.count("figure.wigner_samples", 8)?;
        check("figure.wigner_samples", wigner_samples.is_power_of_two(), || {
            format!("must be a power of two, got {wigner_samples}")
        })?;
        let t_points = match r.raw("figure.t_points") {
            Some(_) => r.count("figure.t_points", 2)?,
            None => {
                let t = samples.min(512);
                r.values.insert("figure.t_points".into(), t.to_string());
                t
            }
        };
        check("figure.t_points", t_points.is_power_of_two() && t_points <= samples, || {
            format!("must be a power of two not above grid.samples, got {t_points}")
        })?;
        let figure = FigureConfig {
            z_points: r.count("figure.z_points", 2)?,
            t_points,
            moment_points: r.count("figure.moment_points", 2)?,
            wigner_samples,
            fig2_g_values,
            fig2_parabolic: r.get("figure.fig2_parabolic")?,
            fig2_budget: r.count("figure.fig2_budget", 1)?,
            trajectories: r.count("figure.trajectories", 1)?,
            delays: r.count("figure.delays", 2)?,
            energy_window: r.count("figure.energy_window", 1)? as i64,
            field_a: r.field("figure.field_a")?,
            field_b: r.field("figure.field_b")?,
        };

        let config = RunConfig {
            setup,
            energy_ev,
            wavelength,
            grid,
            talbot_strength: r.positive("talbot.strength")?,
            stages,
            z_start,
            z_end,
            z_points: r.count("propagate.z_points", 2)?,
            moments: r.count("propagate.moments", 1)? as u32,
            optimize,
            figure,
            resolved: r.values,
        };
        config.scheme()?;
        Ok(config)
    }

    /// The configured stages as a scheme with drifts in Talbot lengths.
    pub fn scheme(&self) -> Result<ModulationScheme> {
        let mut scheme = ModulationScheme::new();
        for stage in &self.stages {
            scheme = match *stage {
                StageSpec::Harmonic { strength, phase } => {
                    scheme.plate(PhasePlate::from_coupling(Complex64::from_polar(strength, phase)))
                }
                StageSpec::Parabolic { strength } => scheme.plate(PhasePlate::parabolic(strength)),
                StageSpec::Drift(d) => scheme.drift(d.zeta(&self.setup)).map_err(|e| anyhow!("scheme.stages: {e}"))?,
            };
        }
        Ok(scheme)
    }
}
