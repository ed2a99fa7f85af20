//! Periodic temporal grids and the wave state sampled on them.
//!
//! A grid of `N` samples covers one optical period, `θ_j = −π + 2πj/N`.
//! Sideband `n` carries energy `nħω` and the time dependence `e^{−inθ}`,
//! so that `ψ(θ) = Σ_n c_n e^{−inθ}`. Sideband vectors are kept in FFT
//! order: slot `k` holds sideband `k` for `k < N/2` and `k − N` otherwise.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{domain, Error, Result};
use crate::physics::OpticalDrive;

pub const DEFAULT_SAMPLES: usize = 4096;

/// Populations above this in the outermost 5% of sidebands abort a run.
pub const OVERFLOW_THRESHOLD: f64 = 1e-12;

#[derive(Clone)]
pub struct TemporalGrid {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for TemporalGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TemporalGrid").field("n_samples", &self.n).finish()
    }
}

impl PartialEq for TemporalGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
    }
}

impl TemporalGrid {
    pub fn new(n_samples: usize) -> Result<Self> {
        if n_samples < 4 || !n_samples.is_power_of_two() {
            return domain(format!(
                "grid size must be a power of two >= 4, got {n_samples}"
            ));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            n: n_samples,
            forward: planner.plan_fft_forward(n_samples),
            inverse: planner.plan_fft_inverse(n_samples),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    /// Sample spacing in units of the phase `θ`.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    pub fn phase(&self, j: usize) -> f64 {
        -PI + self.spacing() * j as f64
    }

    /// Sample phases `θ_j` covering `[−π, π)`.
    pub fn phases(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.phase(j)).collect()
    }

    /// Sample times in seconds covering `[−T/2, T/2)`.
    pub fn sample_times(&self, drive: &OpticalDrive) -> Vec<f64> {
        self.phases().into_iter().map(|p| drive.time_of(p)).collect()
    }

    /// Sideband index stored at FFT slot `k`.
    pub fn sideband_of_slot(&self, k: usize) -> i64 {
        if k < self.n / 2 {
            k as i64
        } else {
            k as i64 - self.n as i64
        }
    }

    pub fn slot_of_sideband(&self, n: i64) -> usize {
        n.rem_euclid(self.n as i64) as usize
    }

    /// Sideband indices in ascending order, `[−N/2, N/2)`.
    pub fn sideband_indices(&self) -> Vec<i64> {
        let half = (self.n / 2) as i64;
        (-half..half).collect()
    }

    /// Time samples to sideband amplitudes (FFT order).
    pub fn to_sidebands(&self, samples: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(samples.len(), self.n);
        let mut buf = samples.to_vec();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        for (k, c) in buf.iter_mut().enumerate() {
            let sign = if k % 2 == 0 { scale } else { -scale };
            *c *= sign;
        }
        buf
    }

    /// Sideband amplitudes (FFT order) to time samples.
    pub fn from_sidebands(&self, sidebands: &[Complex64]) -> Vec<Complex64> {
        debug_assert_eq!(sidebands.len(), self.n);
        let mut buf: Vec<Complex64> = sidebands
            .iter()
            .enumerate()
            .map(|(k, &c)| if k % 2 == 0 { c } else { -c })
            .collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Total population in the outermost 5% of sideband indices.
    pub fn edge_population(&self, sidebands: &[Complex64]) -> f64 {
        let cutoff = (0.475 * self.n as f64).floor() as i64;
        sidebands
            .iter()
            .enumerate()
            .filter(|(k, _)| self.sideband_of_slot(*k).abs() > cutoff)
            .map(|(_, c)| c.norm_sqr())
            .sum()
    }

    /// Fails when the edge population grew from `before` to `after` by at
    /// least the threshold and at least doubled. A tail already left at the
    /// edge by a non-band-limited plate is only reshuffled by later plates.
    pub(crate) fn check_overflow(&self, before: &[Complex64], after: &[Complex64]) -> Result<()> {
        let previous = self.edge_population(before);
        let population = self.edge_population(after);
        if population - previous >= OVERFLOW_THRESHOLD && population >= 2.0 * previous {
            return Err(Error::GridTooSmall {
                population,
                threshold: OVERFLOW_THRESHOLD,
                n_samples: self.n,
            });
        }
        Ok(())
    }
}

/// Periodic temporal wavefunction on one optical period, tagged with its
/// longitudinal position `ζ = z / l_T`.
///
/// Normalization: the mean of `|ψ|²` over the samples is one, so a flat
/// state has unit amplitude everywhere and the sideband populations sum
/// to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    amplitudes: Vec<Complex64>,
    position: f64,
    grid: TemporalGrid,
}

impl WaveState {
    pub fn new(grid: TemporalGrid, amplitudes: Vec<Complex64>, position: f64) -> Result<Self> {
        if amplitudes.len() != grid.n_samples() {
            return Err(Error::GridMismatch {
                expected: grid.n_samples(),
                found: amplitudes.len(),
            });
        }
        Ok(Self {
            amplitudes,
            position,
            grid,
        })
    }

    /// Like [`WaveState::new`] but rescaled to unit norm.
    pub fn normalized(grid: TemporalGrid, amplitudes: Vec<Complex64>, position: f64) -> Result<Self> {
        let state = Self::new(grid, amplitudes, position)?;
        let norm = state.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return domain("cannot normalize a zero-norm state");
        }
        let scale = 1.0 / norm.sqrt();
        Ok(state.map_amplitudes(|_, a| a * scale))
    }

    pub fn from_sidebands(grid: TemporalGrid, sidebands: &[Complex64], position: f64) -> Result<Self> {
        if sidebands.len() != grid.n_samples() {
            return Err(Error::GridMismatch {
                expected: grid.n_samples(),
                found: sidebands.len(),
            });
        }
        let amplitudes = grid.from_sidebands(sidebands);
        Ok(Self {
            amplitudes,
            position,
            grid,
        })
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn position(&self) -> f64 {
        self.position
    }

    pub fn grid(&self) -> &TemporalGrid {
        &self.grid
    }

    pub fn n_samples(&self) -> usize {
        self.grid.n_samples()
    }

    pub fn with_position(&self, position: f64) -> Self {
        Self {
            position,
            ..self.clone()
        }
    }

    pub(crate) fn map_amplitudes(&self, f: impl Fn(usize, Complex64) -> Complex64) -> Self {
        Self {
            amplitudes: self
                .amplitudes
                .iter()
                .enumerate()
                .map(|(j, &a)| f(j, a))
                .collect(),
            position: self.position,
            grid: self.grid.clone(),
        }
    }

    /// Mean of `|ψ|²` over the period (1 for a normalized state).
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() / self.n_samples() as f64
    }

    /// Probability density `ρ_j = |ψ_j|²`.
    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Sideband amplitudes in FFT order.
    pub fn sidebands(&self) -> Vec<Complex64> {
        self.grid.to_sidebands(&self.amplitudes)
    }

    /// Sideband populations in ascending index order `[−N/2, N/2)`.
    pub fn sideband_populations(&self) -> Vec<f64> {
        let sb = self.sidebands();
        self.grid
            .sideband_indices()
            .into_iter()
            .map(|n| sb[self.grid.slot_of_sideband(n)].norm_sqr())
            .collect()
    }

    /// Mean energy in units of `ħω`.
    pub fn mean_energy(&self) -> f64 {
        let sb = self.sidebands();
        sb.iter()
            .enumerate()
            .map(|(k, c)| self.grid.sideband_of_slot(k) as f64 * c.norm_sqr())
            .sum()
    }

    /// Delays the state by `shift` radians: the result at `θ` equals the
    /// input at `θ − shift`. Spectrally exact for band-limited states.
    pub fn time_shift(&self, shift: f64) -> Self {
        let mut sb = self.sidebands();
        for (k, c) in sb.iter_mut().enumerate() {
            let n = self.grid.sideband_of_slot(k) as f64;
            *c *= Complex64::from_polar(1.0, n * shift);
        }
        Self {
            amplitudes: self.grid.from_sidebands(&sb),
            position: self.position,
            grid: self.grid.clone(),
        }
    }

    /// Trigonometric interpolation onto a grid of another size. Truncating
    /// to a smaller grid is refused when it would drop population above
    /// the overflow threshold.
    pub fn resample(&self, n_samples: usize) -> Result<Self> {
        let target = TemporalGrid::new(n_samples)?;
        let sb = self.sidebands();
        let mut out = vec![Complex64::new(0.0, 0.0); n_samples];
        let half = (n_samples / 2) as i64;
        let mut dropped = 0.0;
        for (k, c) in sb.iter().enumerate() {
            let n = self.grid.sideband_of_slot(k);
            if n >= -half && n < half {
                out[target.slot_of_sideband(n)] = *c;
            } else {
                dropped += c.norm_sqr();
            }
        }
        if dropped >= OVERFLOW_THRESHOLD {
            return Err(Error::GridTooSmall {
                population: dropped,
                threshold: OVERFLOW_THRESHOLD,
                n_samples,
            });
        }
        Self::from_sidebands(target, &out, self.position)
    }
}

/// A flat state of unit norm at `ζ = 0`.
pub fn uniform_state(grid: &TemporalGrid) -> WaveState {
    WaveState {
        amplitudes: vec![Complex64::new(1.0, 0.0); grid.n_samples()],
        position: 0.0,
        grid: grid.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn grid(n: usize) -> TemporalGrid {
        TemporalGrid::new(n).unwrap()
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(TemporalGrid::new(0).is_err());
        assert!(TemporalGrid::new(2).is_err());
        assert!(TemporalGrid::new(100).is_err());
        assert!(TemporalGrid::new(64).is_ok());
    }

    #[test]
    fn grid_covers_one_period() {
        let g = grid(8);
        let p = g.phases();
        assert_eq!(p[0], -PI);
        assert_relative_eq!(p[7] + g.spacing(), PI, epsilon = 1e-15);
        let d = OpticalDrive::from_wavelength(800e-9).unwrap();
        let t = g.sample_times(&d);
        assert_relative_eq!(t[0], -d.period / 2.0, max_relative = 1e-14);
        assert_eq!(g.sideband_indices(), vec![-4, -3, -2, -1, 0, 1, 2, 3]);
    }

    #[test]
    fn uniform_state_is_normalized() {
        let s = uniform_state(&grid(8));
        assert_eq!(s.norm(), 1.0);
        assert!(s.amplitudes().iter().all(|&a| a == s.amplitudes()[0]));
        assert_eq!(s.position(), 0.0);
        let pops = s.sideband_populations();
        assert_relative_eq!(pops[4], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn single_sideband_has_expected_time_dependence() {
        let g = grid(16);
        let mut sb = vec![Complex64::new(0.0, 0.0); 16];
        sb[g.slot_of_sideband(3)] = Complex64::new(1.0, 0.0);
        let s = WaveState::from_sidebands(g.clone(), &sb, 0.0).unwrap();
        for (j, a) in s.amplitudes().iter().enumerate() {
            let expected = Complex64::from_polar(1.0, -3.0 * g.phase(j));
            assert!((a - expected).norm() < 1e-13);
        }
        assert_relative_eq!(s.mean_energy(), 3.0, epsilon = 1e-13);
    }

    #[test]
    fn time_shift_delays_state() {
        let g = grid(64);
        let s = WaveState::normalized(
            g.clone(),
            g.phases().iter().map(|&t| Complex64::new((t.cos() * 1.5).exp(), 0.0)).collect(),
            0.0,
        )
        .unwrap();
        let shifted = s.time_shift(4.0 * g.spacing());
        for j in 0..64 {
            let src = (j + 64 - 4) % 64;
            assert!((shifted.amplitudes()[j] - s.amplitudes()[src]).norm() < 1e-12);
        }
    }

    #[test]
    fn resample_preserves_band_limited_state() {
        let g = grid(64);
        let s = WaveState::normalized(
            g.clone(),
            g.phases().iter().map(|&t| Complex64::from_polar(1.0, 0.7 * t.cos())).collect(),
            0.25,
        )
        .unwrap();
        let up = s.resample(256).unwrap();
        assert_relative_eq!(up.norm(), 1.0, epsilon = 1e-12);
        assert_eq!(up.position(), 0.25);
        let back = up.resample(64).unwrap();
        for (a, b) in back.amplitudes().iter().zip(s.amplitudes()) {
            assert!((a - b).norm() < 1e-12);
        }
        // 16 samples cannot hold sidebands of a 0.7-rad harmonic phase to 1e-12.
        assert!(matches!(s.resample(8), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn length_mismatch() {
        let r = WaveState::new(grid(8), vec![Complex64::new(1.0, 0.0); 4], 0.0);
        assert_eq!(r.unwrap_err(), Error::GridMismatch { expected: 8, found: 4 });
    }

    proptest! {
        #[test]
        fn transform_round_trip(values in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 64)) {
            let g = grid(64);
            let amps: Vec<Complex64> = values.iter().map(|&(r, i)| Complex64::new(r, i)).collect();
            let back = g.from_sidebands(&g.to_sidebands(&amps));
            for (a, b) in amps.iter().zip(&back) {
                prop_assert!((a - b).norm() < 1e-12);
            }
            // Parseval with the mean-normalized convention
            let mean: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>() / 64.0;
            let total: f64 = g.to_sidebands(&amps).iter().map(|c| c.norm_sqr()).sum();
            prop_assert!((mean - total).abs() < 1e-12);
        }
    }
}
