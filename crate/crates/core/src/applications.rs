//! Uses of shaped electron states: energy streaking of periodic fields and
//! excitation of a two-level system.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::grid::WaveState;
use crate::metrics::moments;
use crate::propagation::{apply_phase_plate, PhasePlate, SampledPhase};

/// Periodic streak field as the energy gain it imparts, in units of `ħω`:
/// `F(θ) = Σ_{n≠0} c_n e^{inθ}` with `c_{−n} = c_n*`. Only `n ≥ 1` is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct StreakField {
    coefficients: Vec<Complex64>,
}

impl StreakField {
    /// `coefficients[k]` is `c_{k+1}`.
    pub fn new(coefficients: Vec<Complex64>) -> Result<Self> {
        if coefficients.is_empty() {
            return domain("streak field needs at least one harmonic");
        }
        if coefficients.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return domain("streak coefficients must be finite");
        }
        Ok(Self { coefficients })
    }

    /// Harmonics `1..=n` of equal magnitude and zero phase.
    pub fn equal_harmonics(n: usize, magnitude: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(magnitude, 0.0); n])
    }

    /// Three harmonics of magnitude 0.2, inside the weak-field regime.
    pub fn default_profile() -> Self {
        Self::equal_harmonics(3, 0.2).expect("valid")
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn harmonics(&self) -> usize {
        self.coefficients.len()
    }

    /// Energy gain `F(θ) = −dΦ/dθ`, i.e. `−ħΦ′(t)` in units of `ħω`.
    pub fn energy_gain(&self, theta: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| 2.0 * (c * Complex64::from_polar(1.0, (k + 1) as f64 * theta)).re)
            .sum()
    }

    /// Streak phase `Φ(θ) = Σ 2 Re{i c_n e^{inθ} / n}`.
    pub fn phase(&self, theta: f64) -> f64 {
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let n = (k + 1) as f64;
                2.0 * (Complex64::i() * c * Complex64::from_polar(1.0, n * theta) / n).re
            })
            .sum()
    }

    /// The field as a sampled phase plate delayed by `delay` radians.
    pub fn plate(&self, n_samples: usize, delay: f64) -> Result<PhasePlate> {
        Ok(PhasePlate::Sampled(SampledPhase::from_fn(n_samples, |t| {
            self.phase(t + delay)
        })?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreakSpectrogram {
    /// Delays `τ` as phases `ωτ` over one period.
    pub delays: Vec<f64>,
    /// Sideband indices, ascending.
    pub energies: Vec<i64>,
    /// `intensity[i][p]`: population of `energies[p]` at `delays[i]`.
    pub intensity: Vec<Vec<f64>>,
    /// Mean energy per delay in units of `ħω`.
    pub mean_energy: Vec<f64>,
    /// Moments `⟨bⁿ⟩` of the probe for the field's harmonics.
    pub probe_moments: Vec<Complex64>,
    pub probe_energy: f64,
    pub field: StreakField,
}

impl StreakSpectrogram {
    /// Columns restricted to `|n| ≤ window`.
    pub fn cropped(&self, window: i64) -> (Vec<i64>, Vec<Vec<f64>>) {
        let keep: Vec<usize> = (0..self.energies.len())
            .filter(|&p| self.energies[p].abs() <= window)
            .collect();
        (
            keep.iter().map(|&p| self.energies[p]).collect(),
            self.intensity
                .iter()
                .map(|row| keep.iter().map(|&p| row[p]).collect())
                .collect(),
        )
    }
}

/// Delay scan of `state` through the streak field: for each delay the field
/// acts as a phase plate at `θ + τ` and the sideband populations are
/// recorded.
pub fn streak(state: &WaveState, field: &StreakField, n_delays: usize) -> Result<StreakSpectrogram> {
    if n_delays < 2 {
        return domain("streaking needs at least two delays");
    }
    let n = state.n_samples();
    let delays: Vec<f64> = (0..n_delays)
        .map(|i| -PI + 2.0 * PI * i as f64 / n_delays as f64)
        .collect();
    let energies = state.grid().sideband_indices();
    let columns: Vec<(Vec<f64>, f64)> = delays
        .par_iter()
        .map(|&tau| {
            let streaked = apply_phase_plate(state, &field.plate(n, tau)?)?;
            let pops = streaked.sideband_populations();
            let mean = energies.iter().zip(&pops).map(|(&e, p)| e as f64 * p).sum();
            Ok((pops, mean))
        })
        .collect::<Result<_>>()?;
    let (intensity, mean_energy) = columns.into_iter().unzip();
    Ok(StreakSpectrogram {
        delays,
        energies,
        intensity,
        mean_energy,
        probe_moments: moments(state, field.harmonics() as u32).values,
        probe_energy: state.mean_energy(),
        field: field.clone(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub delays: Vec<f64>,
    /// `Σ_n n p_n(τ)` from the spectrogram.
    pub simulated: Vec<f64>,
    /// `E₀ + Σ_{n≠0} ⟨bⁿ⟩ c_n e^{inτ}`.
    pub predicted: Vec<f64>,
    /// Streak field energy gain `−ħΦ′(τ)` for reference.
    pub field: Vec<f64>,
}

impl EnergyTrace {
    /// Complex Fourier component `(1/M) Σ_i E(τ_i) e^{−inτ_i}` of the
    /// simulated trace; equals `⟨bⁿ⟩ c_n` under the linear mapping.
    pub fn harmonic(&self, n: u32) -> Complex64 {
        let m = self.delays.len() as f64;
        self.delays
            .iter()
            .zip(&self.simulated)
            .map(|(&t, &e)| e * Complex64::from_polar(1.0, -(n as f64) * t))
            .sum::<Complex64>()
            / m
    }

    pub fn max_deviation(&self) -> f64 {
        self.simulated
            .iter()
            .zip(&self.predicted)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn mean_energy_trace(spectrogram: &StreakSpectrogram) -> EnergyTrace {
    let field = &spectrogram.field;
    let predicted = spectrogram
        .delays
        .iter()
        .map(|&tau| {
            spectrogram.probe_energy
                + field
                    .coefficients()
                    .iter()
                    .zip(&spectrogram.probe_moments)
                    .enumerate()
                    .map(|(k, (c, b))| {
                        2.0 * (c * b * Complex64::from_polar(1.0, (k + 1) as f64 * tau)).re
                    })
                    .sum::<f64>()
        })
        .collect();
    EnergyTrace {
        delays: spectrogram.delays.clone(),
        simulated: spectrogram.mean_energy.clone(),
        predicted,
        field: spectrogram.delays.iter().map(|&t| field.energy_gain(t)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TlsExcitation {
    pub bunching: Complex64,
    pub rotation_angle: f64,
    pub bloch_vector: [f64; 3],
    pub transition_probability: f64,
    pub purity: f64,
}

/// Rotates the ground-state Bloch vector `a = −ẑ` by `θ` about
/// `n̂ = (cos φ, sin φ, 0)`, `φ = arg⟨b⟩`, with the transverse part scaled
/// by `|⟨b⟩|`: `a(θ) = a cos θ + |⟨b⟩| (n̂ × a) sin θ`.
pub fn tls_excite(bunching: Complex64, rotation_angle: f64) -> Result<TlsExcitation> {
    let modulus = bunching.norm();
    if !(modulus <= 1.0 + 1e-12) {
        return domain(format!("|<b>| must not exceed 1, got {modulus}"));
    }
    if !(0.0..=PI).contains(&rotation_angle) {
        return domain(format!("rotation angle must lie in [0, π], got {rotation_angle}"));
    }
    let modulus = modulus.min(1.0);
    let phi = if modulus > 0.0 { bunching.arg() } else { 0.0 };
    let (s, c) = rotation_angle.sin_cos();
    // n̂ × (−ẑ) = (−sin φ, cos φ, 0)
    let bloch_vector = [-modulus * phi.sin() * s, modulus * phi.cos() * s, -c];
    Ok(TlsExcitation {
        bunching,
        rotation_angle,
        bloch_vector,
        transition_probability: (0.5 * rotation_angle).sin().powi(2),
        purity: 1.0 + 0.5 * (modulus * modulus - 1.0) * s * s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildupRegime {
    Coherent,
    /// `⟨b⟩ = 0`: the electrons carry no phase reference.
    Incoherent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentBuildup {
    pub electrons: u64,
    pub effective_angle: f64,
    pub transition_probability: f64,
    /// `N |θ| ≤ π/2`.
    pub small_angle_valid: bool,
    pub regime: BuildupRegime,
}

/// Accumulated excitation by `N` electrons with a common phase reference:
/// effective angle `N |⟨b⟩| θ`, `P₂ = sin²(N|⟨b⟩|θ / 2)`.
pub fn coherent_buildup(single_angle: f64, bunching: Complex64, electrons: u64) -> Result<CoherentBuildup> {
    if electrons == 0 {
        return domain("need at least one electron");
    }
    let modulus = bunching.norm();
    if !(modulus <= 1.0 + 1e-12) {
        return domain(format!("|<b>| must not exceed 1, got {modulus}"));
    }
    let effective_angle = electrons as f64 * modulus * single_angle;
    Ok(CoherentBuildup {
        electrons,
        effective_angle,
        transition_probability: (0.5 * effective_angle).sin().powi(2),
        small_angle_valid: electrons as f64 * single_angle.abs() <= 0.5 * PI,
        regime: if modulus == 0.0 {
            BuildupRegime::Incoherent
        } else {
            BuildupRegime::Coherent
        },
    })
}
