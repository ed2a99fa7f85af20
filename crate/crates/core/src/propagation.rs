//! Temporal phase plates, Fresnel drift and execution of modulation schemes.
//!
//! A phase plate multiplies the temporal wavefunction by `e^{iΦ(θ)}`. Free
//! propagation over `ζ = z / l_T` multiplies sideband `n` by
//! `e^{−i2πn²ζ}`, which makes drift over a full Talbot distance the
//! identity. Extended interaction regions are handled by the symmetric
//! split step `U(h/2) e^{iΦ} U(h/2)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::grid::{TemporalGrid, WaveState};
use crate::metrics::saw_phase;
use crate::physics::{BeamParameters, OpticalDrive, CONSTANTS};

/// A real periodic phase given by samples on a uniform grid, evaluated
/// between samples by trigonometric interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPhase {
    values: Vec<f64>,
    // Fourier coefficients, FFT order, with φ(θ) = Σ a_n e^{−inθ}.
    coefficients: Vec<Complex64>,
    grid: TemporalGrid,
}

impl SampledPhase {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let grid = TemporalGrid::new(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return domain("sampled phase contains non-finite values");
        }
        let complex: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let coefficients = grid.to_sidebands(&complex);
        Ok(Self {
            values,
            coefficients,
            grid,
        })
    }

    /// Builds the samples from a closure evaluated on the grid phases.
    pub fn from_fn(n_samples: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = TemporalGrid::new(n_samples)?;
        Self::new(grid.phases().into_iter().map(f).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_samples(&self) -> usize {
        self.values.len()
    }

    /// `d^order φ / dθ^order` at an arbitrary phase. The Nyquist term is
    /// kept as a cosine for `order = 0` and dropped for derivatives.
    pub fn evaluate(&self, theta: f64, order: u32) -> f64 {
        let n_total = self.values.len();
        let mut sum = 0.0;
        for (k, a) in self.coefficients.iter().enumerate() {
            let n = self.grid.sideband_of_slot(k);
            if n == -(n_total as i64 / 2) {
                if order == 0 {
                    // at the samples this equals a·e^{iNθ/2}; use the real interpolant
                    sum += a.re * ((n_total / 2) as f64 * (theta + PI)).cos();
                }
                continue;
            }
            let nf = n as f64;
            // d^k/dθ^k e^{−inθ} = (−in)^k e^{−inθ}
            let factor = Complex64::new(0.0, -nf).powu(order);
            sum += (a * factor * Complex64::from_polar(1.0, -nf * theta)).re;
        }
        sum
    }

    fn on_grid(&self, grid: &TemporalGrid) -> Result<Vec<f64>> {
        let n = grid.n_samples();
        if n == self.values.len() {
            return Ok(self.values.clone());
        }
        if n < self.values.len() {
            return Err(Error::GridMismatch {
                expected: n,
                found: self.values.len(),
            });
        }
        Ok(grid.phases().into_iter().map(|t| self.evaluate(t, 0)).collect())
    }
}

/// An instantaneous temporal phase modulation.
#[derive(Debug, Clone, PartialEq)]
pub enum PhasePlate {
    /// `Φ = 2g cos(θ − phase_offset)`, i.e. `2 Re{g e^{−iθ}}` for a complex
    /// coupling of modulus `g` and argument `phase_offset`.
    Harmonic { strength: f64, phase_offset: f64 },
    /// `Φ = −g s²(θ)` with `s` the saw function in radians.
    Parabolic { strength: f64 },
    Sampled(SampledPhase),
}

impl PhasePlate {
    pub fn harmonic(strength: f64) -> Self {
        PhasePlate::Harmonic {
            strength,
            phase_offset: 0.0,
        }
    }

    /// Harmonic plate from a complex coupling constant.
    pub fn from_coupling(g: Complex64) -> Self {
        PhasePlate::Harmonic {
            strength: g.norm(),
            phase_offset: g.arg(),
        }
    }

    pub fn parabolic(strength: f64) -> Self {
        PhasePlate::Parabolic { strength }
    }

    pub fn sampled(values: Vec<f64>) -> Result<Self> {
        Ok(PhasePlate::Sampled(SampledPhase::new(values)?))
    }

    /// `d^order Φ / dθ^order` at phase `θ`.
    pub fn phase_derivative(&self, theta: f64, order: u32) -> f64 {
        match self {
            PhasePlate::Harmonic {
                strength,
                phase_offset,
            } => {
                let x = theta - phase_offset;
                let base = match order % 4 {
                    0 => x.cos(),
                    1 => -x.sin(),
                    2 => -x.cos(),
                    _ => x.sin(),
                };
                2.0 * strength * base
            }
            PhasePlate::Parabolic { strength } => {
                let s = saw_phase(theta);
                match order {
                    0 => -strength * s * s,
                    1 => -2.0 * strength * s,
                    2 => -2.0 * strength,
                    _ => 0.0,
                }
            }
            PhasePlate::Sampled(p) => p.evaluate(theta, order),
        }
    }

    pub fn phase(&self, theta: f64) -> f64 {
        self.phase_derivative(theta, 0)
    }

    /// True when the plate imprints no phase at all.
    pub fn is_trivial(&self) -> bool {
        match self {
            PhasePlate::Harmonic { strength, .. } | PhasePlate::Parabolic { strength } => {
                *strength == 0.0
            }
            PhasePlate::Sampled(p) => p.values.iter().all(|&v| v == 0.0),
        }
    }

    /// Phase values on the sample points of `grid`.
    pub fn values_on(&self, grid: &TemporalGrid) -> Result<Vec<f64>> {
        match self {
            PhasePlate::Sampled(p) => p.on_grid(grid),
            _ => Ok(grid.phases().into_iter().map(|t| self.phase(t)).collect()),
        }
    }

    // The parabolic profile has a kink at the repelling point; its sideband
    // tails are resolved by the grid only algebraically.
    fn band_limited(&self) -> bool {
        !matches!(self, PhasePlate::Parabolic { .. })
    }
}

/// Free propagation over `distance` Talbot lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftSegment {
    distance: f64,
}

impl DriftSegment {
    pub fn new(distance: f64) -> Result<Self> {
        if !distance.is_finite() || distance < 0.0 {
            return domain(format!("drift distance must be >= 0, got {distance}"));
        }
        Ok(Self { distance })
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Plate(PhasePlate),
    Drift(DriftSegment),
}

/// Ordered sequence of phase plates and drifts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModulationScheme {
    stages: Vec<Stage>,
}

impl ModulationScheme {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_stages(stages: Vec<Stage>) -> Self {
        Self { stages }
    }

    pub fn plate(mut self, plate: PhasePlate) -> Self {
        self.stages.push(Stage::Plate(plate));
        self
    }

    pub fn drift(mut self, distance: f64) -> Result<Self> {
        self.stages.push(Stage::Drift(DriftSegment::new(distance)?));
        Ok(self)
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn is_empty(&self) -> bool {
        self.stages.is_empty()
    }

    /// The same scheme with consecutive drifts merged into one.
    pub fn merged(&self) -> Self {
        let mut stages: Vec<Stage> = Vec::with_capacity(self.stages.len());
        for stage in &self.stages {
            match (stages.last_mut(), stage) {
                (Some(Stage::Drift(a)), Stage::Drift(b)) => a.distance += b.distance,
                _ => stages.push(stage.clone()),
            }
        }
        Self { stages }
    }

    pub fn total_drift(&self) -> f64 {
        self.stages
            .iter()
            .map(|s| match s {
                Stage::Drift(d) => d.distance,
                Stage::Plate(_) => 0.0,
            })
            .sum()
    }

    /// Plates with their positions relative to the scheme start.
    pub fn plate_positions(&self) -> Vec<(f64, &PhasePlate)> {
        let mut z = 0.0;
        let mut out = Vec::new();
        for stage in &self.stages {
            match stage {
                Stage::Drift(d) => z += d.distance,
                Stage::Plate(p) => out.push((z, p)),
            }
        }
        out
    }
}

/// Multiplies the state by `e^{iΦ(θ)}`.
pub fn apply_phase_plate(state: &WaveState, plate: &PhasePlate) -> Result<WaveState> {
    if plate.is_trivial() {
        return Ok(state.clone());
    }
    let phases = plate.values_on(state.grid())?;
    let out = state.map_amplitudes(|j, a| a * Complex64::from_polar(1.0, phases[j]));
    if plate.band_limited() {
        state.grid().check_overflow(&state.sidebands(), &out.sidebands())?;
    }
    Ok(out)
}

/// Sideband-space drift phase `e^{−i2πn²ζ}`; `n²ζ` is reduced modulo one
/// so that integer Talbot multiples are exact.
pub(crate) fn drift_factor(n: i64, zeta: f64) -> Complex64 {
    let n2 = (n * n) as f64;
    let cycles = (n2 * zeta).rem_euclid(1.0);
    Complex64::from_polar(1.0, -2.0 * PI * cycles)
}

pub(crate) fn drift_sidebands(grid: &TemporalGrid, sidebands: &[Complex64], zeta: f64) -> Vec<Complex64> {
    sidebands
        .iter()
        .enumerate()
        .map(|(k, &c)| c * drift_factor(grid.sideband_of_slot(k), zeta))
        .collect()
}

pub fn drift(state: &WaveState, segment: DriftSegment) -> WaveState {
    let zeta = segment.distance;
    if zeta == 0.0 {
        return state.clone();
    }
    let grid = state.grid();
    let sb = drift_sidebands(grid, &state.sidebands(), zeta);
    WaveState::from_sidebands(grid.clone(), &sb, state.position() + zeta)
        .expect("sideband vector matches its grid")
}

/// Applies the stages of `scheme` in order, merging consecutive drifts.
pub fn propagate_scheme(initial: &WaveState, scheme: &ModulationScheme) -> Result<WaveState> {
    let mut state = initial.clone();
    for stage in scheme.merged().stages {
        state = match stage {
            Stage::Plate(p) => apply_phase_plate(&state, &p)?,
            Stage::Drift(d) => drift(&state, d),
        };
    }
    Ok(state)
}

/// State at absolute position `z`: stages up to `z` are applied, a plate
/// sitting exactly at `z` included, and the remainder is free drift.
pub fn state_at(initial: &WaveState, scheme: &ModulationScheme, z: f64) -> Result<WaveState> {
    if !(z >= initial.position()) {
        return domain(format!(
            "position {z} lies before the initial position {}",
            initial.position()
        ));
    }
    let mut state = initial.clone();
    // nominal position of the next stage
    let mut at = initial.position();
    for stage in scheme.merged().stages {
        if at > z + 1e-15 {
            break;
        }
        match stage {
            Stage::Plate(p) => state = apply_phase_plate(&state, &p)?,
            Stage::Drift(d) => {
                at += d.distance;
                let step = at.min(z) - state.position();
                if step > 0.0 {
                    state = drift(&state, DriftSegment::new(step)?);
                }
            }
        }
    }
    let rest = z - state.position();
    if rest > 0.0 {
        state = drift(&state, DriftSegment::new(rest)?);
    }
    Ok(state)
}

/// Densities `ρ(ζ, θ)` on a regular `ζ` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMap {
    /// Absolute positions in Talbot lengths.
    pub positions: Vec<f64>,
    /// Phases `θ_j` of the temporal samples.
    pub phases: Vec<f64>,
    /// One row per position; each row has unit mean.
    pub rows: Vec<Vec<f64>>,
}

/// Density evolution through `scheme` sampled at `n_z` evenly spaced absolute
/// positions in `[z_start, z_end]`. Positions past the end of the scheme
/// continue with free drift; a plate located exactly at a sample position
/// is applied before that row is recorded.
pub fn density_map(
    initial: &WaveState,
    scheme: &ModulationScheme,
    z_start: f64,
    z_end: f64,
    n_z: usize,
) -> Result<DensityMap> {
    if n_z < 2 {
        return domain("density map needs at least two z samples");
    }
    if !(z_end > z_start) || z_start < initial.position() {
        return domain(format!(
            "z range [{z_start}, {z_end}] must be increasing and start at or after the initial position {}",
            initial.position()
        ));
    }
    let grid = initial.grid().clone();

    // State just after each plate group, with its position and sidebands.
    let mut checkpoints: Vec<(f64, Vec<Complex64>)> = Vec::new();
    let mut state = initial.clone();
    checkpoints.push((state.position(), state.sidebands()));
    for stage in scheme.merged().stages {
        match stage {
            Stage::Plate(p) => {
                state = apply_phase_plate(&state, &p)?;
                let entry = (state.position(), state.sidebands());
                if checkpoints.last().map(|c| c.0) == Some(state.position()) {
                    *checkpoints.last_mut().unwrap() = entry;
                } else {
                    checkpoints.push(entry);
                }
            }
            Stage::Drift(d) => state = drift(&state, d),
        }
    }

    let step = (z_end - z_start) / (n_z - 1) as f64;
    let positions: Vec<f64> = (0..n_z).map(|i| z_start + step * i as f64).collect();
    let rows = positions
        .par_iter()
        .map(|&z| {
            let idx = checkpoints
                .iter()
                .rposition(|(p, _)| *p <= z + 1e-15)
                .unwrap_or(0);
            let (p, sb) = &checkpoints[idx];
            let drifted = drift_sidebands(&grid, sb, (z - p).max(0.0));
            grid.from_sidebands(&drifted)
                .iter()
                .map(|a| a.norm_sqr())
                .collect()
        })
        .collect();
    Ok(DensityMap {
        positions,
        phases: grid.phases(),
        rows,
    })
}

/// Complex longitudinal field amplitude `E_0z(z)` sampled along the beam.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldProfile {
    positions: Vec<f64>,
    amplitudes: Vec<Complex64>,
}

impl FieldProfile {
    pub fn new(positions: Vec<f64>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if positions.len() != amplitudes.len() {
            return domain("field profile positions and amplitudes differ in length");
        }
        if positions.windows(2).any(|w| !(w[1] > w[0])) {
            return domain("field profile positions must be strictly increasing");
        }
        Ok(Self {
            positions,
            amplitudes,
        })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    fn interpolate(&self, z: f64) -> Complex64 {
        let p = &self.positions;
        if z <= p[0] {
            return self.amplitudes[0];
        }
        if z >= p[p.len() - 1] {
            return self.amplitudes[p.len() - 1];
        }
        let i = p.partition_point(|&x| x <= z) - 1;
        let w = (z - p[i]) / (p[i + 1] - p[i]);
        self.amplitudes[i] * (1.0 - w) + self.amplitudes[i + 1] * w
    }
}

fn phase_matched_integral(points: &[(f64, Complex64)], k: f64) -> Complex64 {
    points
        .windows(2)
        .map(|w| {
            let (z0, e0) = w[0];
            let (z1, e1) = w[1];
            let f0 = e0 * Complex64::from_polar(1.0, -k * z0);
            let f1 = e1 * Complex64::from_polar(1.0, -k * z1);
            (f0 + f1) * (0.5 * (z1 - z0))
        })
        .sum()
}

/// Coupling constant `g = (e / 2ħω) ∫ E_0z(z) e^{−iωz/v} dz` by the
/// trapezoidal rule over the sampled profile.
pub fn coupling_from_field(
    profile: &FieldProfile,
    beam: &BeamParameters,
    drive: &OpticalDrive,
) -> Result<Complex64> {
    if profile.positions.is_empty() {
        return domain("empty field profile");
    }
    if beam.velocity <= 0.0 {
        return domain("coupling requires a moving beam");
    }
    let points: Vec<(f64, Complex64)> = profile
        .positions
        .iter()
        .copied()
        .zip(profile.amplitudes.iter().copied())
        .collect();
    let k = drive.omega / beam.velocity;
    let prefactor = CONSTANTS.elementary_charge / (2.0 * CONSTANTS.reduced_planck * drive.omega);
    Ok(phase_matched_integral(&points, k) * prefactor)
}

/// Splits a field profile into `n_slices` equal slices and returns one
/// harmonic plate per slice together with the slice thickness in metres.
pub fn slices_from_field(
    profile: &FieldProfile,
    beam: &BeamParameters,
    drive: &OpticalDrive,
    n_slices: usize,
) -> Result<(Vec<PhasePlate>, f64)> {
    if profile.positions.len() < 2 {
        return domain("slicing needs a profile with at least two samples");
    }
    if n_slices == 0 {
        return domain("need at least one slice");
    }
    let start = profile.positions[0];
    let end = *profile.positions.last().unwrap();
    let h = (end - start) / n_slices as f64;
    let k = drive.omega / beam.velocity;
    let prefactor = CONSTANTS.elementary_charge / (2.0 * CONSTANTS.reduced_planck * drive.omega);
    let plates = (0..n_slices)
        .map(|i| {
            let a = start + h * i as f64;
            let b = if i + 1 == n_slices { end } else { a + h };
            let mut pts = vec![(a, profile.interpolate(a))];
            pts.extend(
                profile
                    .positions
                    .iter()
                    .zip(&profile.amplitudes)
                    .filter(|(z, _)| **z > a && **z < b)
                    .map(|(z, e)| (*z, *e)),
            );
            pts.push((b, profile.interpolate(b)));
            PhasePlate::from_coupling(phase_matched_integral(&pts, k) * prefactor)
        })
        .collect();
    Ok((plates, h))
}

/// One symmetric split step `U(h/2) e^{iΦ} U(h/2)` over a slice of
/// thickness `thickness` (Talbot lengths).
pub fn multislice_step(state: &WaveState, slice_phase: &PhasePlate, thickness: f64) -> Result<WaveState> {
    if !(thickness > 0.0) || !thickness.is_finite() {
        return domain(format!("slice thickness must be positive, got {thickness}"));
    }
    let half = DriftSegment::new(0.5 * thickness)?;
    let s = drift(state, half);
    let s = apply_phase_plate(&s, slice_phase)?;
    Ok(drift(&s, half))
}

/// Steps through consecutive slices of equal thickness.
pub fn propagate_extended(state: &WaveState, slices: &[PhasePlate], thickness: f64) -> Result<WaveState> {
    slices
        .iter()
        .try_fold(state.clone(), |s, p| multislice_step(&s, p, thickness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::uniform_state;
    use crate::special::bessel_j;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(n: usize) -> TemporalGrid {
        TemporalGrid::new(n).unwrap()
    }

    #[test]
    fn state_at_matches_density_map() {
        let s0 = uniform_state(&grid(256));
        let scheme = ModulationScheme::new()
            .plate(PhasePlate::harmonic(0.4))
            .drift(0.2)
            .unwrap()
            .plate(PhasePlate::harmonic(2.0));
        let map = density_map(&s0, &scheme, 0.0, 0.3, 7).unwrap();
        for (z, row) in map.positions.iter().zip(&map.rows) {
            let s = state_at(&s0, &scheme, *z).unwrap();
            assert!((s.position() - z).abs() < 1e-14);
            for (a, b) in s.density().iter().zip(row) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let end = propagate_scheme(&s0, &scheme).unwrap();
        assert!(max_diff(&state_at(&s0, &scheme, 0.2).unwrap(), &end) < 1e-13);
        assert!(state_at(&s0.with_position(0.1), &scheme, 0.05).is_err());
        // a plate beyond z must not act
        let before = state_at(&s0, &scheme, 0.1).unwrap();
        let first = apply_phase_plate(&s0, &PhasePlate::harmonic(0.4)).unwrap();
        assert!(max_diff(&before, &drift(&first, DriftSegment::new(0.1).unwrap())) < 1e-13);
    }

    fn max_diff(a: &WaveState, b: &WaveState) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_strength_plate_is_identity() {
        let s = uniform_state(&grid(64));
        let s = apply_phase_plate(&s, &PhasePlate::harmonic(0.7)).unwrap();
        let s = drift(&s, DriftSegment::new(0.03).unwrap());
        for plate in [PhasePlate::harmonic(0.0), PhasePlate::parabolic(0.0)] {
            assert_eq!(apply_phase_plate(&s, &plate).unwrap(), s);
        }
    }

    #[test]
    fn jacobi_anger_sidebands() {
        let g = grid(512);
        for strength in [0.5, 2.0, 4.0] {
            let s = apply_phase_plate(&uniform_state(&g), &PhasePlate::harmonic(strength)).unwrap();
            let sb = s.sidebands();
            for n in -40i64..=40 {
                let expected = Complex64::i().powi(n as i32) * bessel_j(n as i32, 2.0 * strength);
                let got = sb[g.slot_of_sideband(n)];
                assert!((got - expected).norm() < 1e-8, "g={strength} n={n}");
            }
            let pops = s.sideband_populations();
            let zero = 256;
            for n in 1..40 {
                assert_relative_eq!(pops[zero + n], pops[zero - n], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn plate_preserves_density() {
        let g = grid(128);
        let s = drift(
            &apply_phase_plate(&uniform_state(&g), &PhasePlate::harmonic(1.0)).unwrap(),
            DriftSegment::new(0.05).unwrap(),
        );
        let t = apply_phase_plate(&s, &PhasePlate::harmonic(0.3)).unwrap();
        for (a, b) in s.density().iter().zip(t.density()) {
            assert_relative_eq!(*a, b, epsilon = 1e-12);
        }
        assert_eq!(t.position(), s.position());
    }

    #[test]
    fn overflow_detected() {
        let s = uniform_state(&grid(64));
        let err = apply_phase_plate(&s, &PhasePlate::harmonic(20.0)).unwrap_err();
        assert!(matches!(err, Error::GridTooSmall { .. }));
    }

    #[test]
    fn sampled_plate_grid_rules() {
        let s = uniform_state(&grid(64));
        let coarse = PhasePlate::Sampled(SampledPhase::from_fn(32, |t| 0.8 * t.cos()).unwrap());
        let exact = apply_phase_plate(&s, &PhasePlate::harmonic(0.4)).unwrap();
        let interp = apply_phase_plate(&s, &coarse).unwrap();
        assert!(max_diff(&exact, &interp) < 1e-12);
        let fine = PhasePlate::Sampled(SampledPhase::from_fn(128, |t| 0.8 * t.cos()).unwrap());
        assert!(matches!(
            apply_phase_plate(&s, &fine),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn sampled_phase_derivatives() {
        let p = SampledPhase::from_fn(64, |t| 0.3 * (2.0 * t).sin() + 1.1 * (t - 0.4).cos()).unwrap();
        for &t in &[-2.9, -0.1, 0.0, 0.77, 3.0] {
            assert_relative_eq!(
                p.evaluate(t, 0),
                0.3 * (2.0 * t).sin() + 1.1 * (t - 0.4).cos(),
                epsilon = 1e-12
            );
            assert_relative_eq!(
                p.evaluate(t, 1),
                0.6 * (2.0 * t).cos() - 1.1 * (t - 0.4).sin(),
                epsilon = 1e-12
            );
            assert_relative_eq!(
                p.evaluate(t, 2),
                -1.2 * (2.0 * t).sin() - 1.1 * (t - 0.4).cos(),
                epsilon = 1e-11
            );
        }
    }

    #[test]
    fn drift_identities() {
        let g = grid(256);
        let s = apply_phase_plate(&uniform_state(&g), &PhasePlate::harmonic(3.0)).unwrap();
        assert_eq!(drift(&s, DriftSegment::new(0.0).unwrap()), s);
        let full = drift(&s, DriftSegment::new(1.0).unwrap());
        assert!(max_diff(&full, &s) < 1e-12);
        assert_eq!(full.position(), 1.0);
        // half Talbot: density shifted by half a period
        let s = drift(&s, DriftSegment::new(0.013).unwrap());
        let half = drift(&s, DriftSegment::new(0.5).unwrap());
        let (a, b) = (s.density(), half.density());
        for j in 0..256 {
            assert!((b[j] - a[(j + 128) % 256]).abs() < 1e-10);
        }
    }

    #[test]
    fn attracting_point_at_zero_for_positive_strength() {
        let g = grid(256);
        let s = apply_phase_plate(&uniform_state(&g), &PhasePlate::harmonic(1.0)).unwrap();
        let s = drift(&s, DriftSegment::new(0.02).unwrap());
        let rho = s.density();
        let peak = (0..256).max_by(|&a, &b| rho[a].total_cmp(&rho[b])).unwrap();
        assert_eq!(peak, 128); // θ = 0
    }

    #[test]
    fn phase_offset_shifts_density() {
        let g = grid(256);
        let phi = 0.9;
        let scheme = |offset| {
            ModulationScheme::new()
                .plate(PhasePlate::Harmonic {
                    strength: 2.0,
                    phase_offset: offset,
                })
                .drift(0.031)
                .unwrap()
        };
        let a = propagate_scheme(&uniform_state(&g), &scheme(0.0)).unwrap();
        let b = propagate_scheme(&uniform_state(&g), &scheme(phi)).unwrap();
        let shifted = a.time_shift(phi);
        for (x, y) in shifted.density().iter().zip(b.density()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn scheme_merging_and_positions() {
        let scheme = ModulationScheme::new()
            .plate(PhasePlate::harmonic(0.4))
            .drift(0.1)
            .unwrap()
            .drift(0.15)
            .unwrap()
            .plate(PhasePlate::harmonic(4.0));
        let merged = scheme.merged();
        assert_eq!(merged.stages().len(), 3);
        assert_relative_eq!(merged.total_drift(), 0.25, epsilon = 1e-15);
        let pos: Vec<f64> = scheme.plate_positions().iter().map(|p| p.0).collect();
        assert_relative_eq!(pos[1], 0.25, epsilon = 1e-15);
        assert!(ModulationScheme::new().drift(-0.1).is_err());
    }

    #[test]
    fn empty_scheme_is_identity() {
        let s = uniform_state(&grid(32));
        assert_eq!(propagate_scheme(&s, &ModulationScheme::new()).unwrap(), s);
    }

    #[test]
    fn scheme_position_accumulates() {
        let s = uniform_state(&grid(64)).with_position(0.1);
        let scheme = ModulationScheme::new()
            .plate(PhasePlate::harmonic(0.3))
            .drift(0.2)
            .unwrap()
            .plate(PhasePlate::harmonic(0.5))
            .drift(0.05)
            .unwrap();
        let out = propagate_scheme(&s, &scheme).unwrap();
        assert_relative_eq!(out.position(), 0.35, epsilon = 1e-15);
    }

    #[test]
    fn density_map_rows() {
        let g = grid(128);
        let s = uniform_state(&g);
        let flat = density_map(&s, &ModulationScheme::new(), 0.0, 0.5, 5).unwrap();
        for row in &flat.rows {
            assert!(row.iter().all(|&r| (r - 1.0).abs() < 1e-13));
        }
        let scheme = ModulationScheme::new()
            .plate(PhasePlate::harmonic(0.4))
            .drift(0.2)
            .unwrap()
            .plate(PhasePlate::harmonic(2.0));
        let map = density_map(&s, &scheme, 0.0, 0.3, 31).unwrap();
        for row in &map.rows {
            let mean: f64 = row.iter().sum::<f64>() / row.len() as f64;
            assert_relative_eq!(mean, 1.0, epsilon = 1e-12);
        }
        // row at ζ = 0.25 equals direct propagation
        let direct = propagate_scheme(&s, &scheme.clone().drift(0.05).unwrap()).unwrap();
        for (a, b) in map.rows[25].iter().zip(direct.density()) {
            assert!((a - b).abs() < 1e-11);
        }
        assert!(density_map(&s, &scheme, 0.0, 0.3, 1).is_err());
    }

    #[test]
    fn coupling_of_simple_profiles() {
        let beam = crate::physics::derive_beam(120e3).unwrap();
        let drive = OpticalDrive::from_wavelength(800e-9).unwrap();
        let zero = FieldProfile::new(vec![0.0, 1e-6], vec![Complex64::new(0.0, 0.0); 2]).unwrap();
        assert_eq!(coupling_from_field(&zero, &beam, &drive).unwrap(), Complex64::new(0.0, 0.0));

        let v = beam.velocity;
        let k = drive.omega / v;
        let e0 = 1e7;
        let slab = |length: f64, points: usize| {
            let z: Vec<f64> = (0..=points).map(|i| length * i as f64 / points as f64).collect();
            FieldProfile::new(z, vec![Complex64::new(e0, 0.0); points + 1]).unwrap()
        };
        let length = 0.37 * 2.0 * PI / k;
        let g = coupling_from_field(&slab(length, 20_000), &beam, &drive).unwrap();
        let closed = CONSTANTS.elementary_charge.abs() * e0 * v
            / (2.0 * CONSTANTS.reduced_planck * drive.omega * drive.omega)
            * (Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, -k * length)).norm();
        assert_relative_eq!(g.norm(), closed, max_relative = 1e-6);

        let g_full = coupling_from_field(&slab(2.0 * PI / k, 1000), &beam, &drive).unwrap();
        assert!(g_full.norm() < 1e-12 * closed);

        let empty = FieldProfile::new(vec![], vec![]).unwrap();
        assert!(coupling_from_field(&empty, &beam, &drive).is_err());
        assert!(FieldProfile::new(vec![1.0, 0.0], vec![Complex64::new(0.0, 0.0); 2]).is_err());
    }

    #[test]
    fn slices_sum_to_total_coupling() {
        let beam = crate::physics::derive_beam(120e3).unwrap();
        let drive = OpticalDrive::from_wavelength(800e-9).unwrap();
        let k = drive.omega / beam.velocity;
        let z: Vec<f64> = (0..=4000).map(|i| 3e-6 * i as f64 / 4000.0).collect();
        let e: Vec<Complex64> = z
            .iter()
            .map(|&z| Complex64::from_polar(1e7 * (-(z - 1.5e-6f64).powi(2) / 1e-12).exp(), k * z))
            .collect();
        let profile = FieldProfile::new(z, e).unwrap();
        let total = coupling_from_field(&profile, &beam, &drive).unwrap();
        let (plates, h) = slices_from_field(&profile, &beam, &drive, 7).unwrap();
        assert_relative_eq!(h * 7.0, 3e-6, max_relative = 1e-12);
        let sum: Complex64 = plates
            .iter()
            .map(|p| match p {
                PhasePlate::Harmonic {
                    strength,
                    phase_offset,
                } => Complex64::from_polar(*strength, *phase_offset),
                _ => unreachable!(),
            })
            .sum();
        assert!((sum - total).norm() < 1e-6 * total.norm());
    }

    #[test]
    fn multislice_limits() {
        let g = grid(128);
        let s = apply_phase_plate(&uniform_state(&g), &PhasePlate::harmonic(0.5)).unwrap();
        let pure = multislice_step(&s, &PhasePlate::harmonic(0.0), 0.04).unwrap();
        assert!(max_diff(&pure, &drift(&s, DriftSegment::new(0.04).unwrap())) < 1e-12);
        let thin = multislice_step(&s, &PhasePlate::harmonic(1.0), 1e-12).unwrap();
        let plate = apply_phase_plate(&s, &PhasePlate::harmonic(1.0)).unwrap();
        assert!(max_diff(&thin, &plate) < 1e-8);
        assert!(multislice_step(&s, &PhasePlate::harmonic(1.0), 0.0).is_err());
    }

    proptest! {
        #[test]
        fn drift_composition(z1 in 0.0f64..0.7, z2 in 0.0f64..0.7) {
            let g = grid(128);
            let s = apply_phase_plate(&uniform_state(&g), &PhasePlate::harmonic(1.3)).unwrap();
            let a = drift(&drift(&s, DriftSegment::new(z1).unwrap()), DriftSegment::new(z2).unwrap());
            let b = drift(&s, DriftSegment::new(z1 + z2).unwrap());
            prop_assert!(max_diff(&a, &b) < 1e-12);
            prop_assert!((a.norm() - 1.0).abs() < 1e-12);
        }
    }
}
