//! Quality measures of shaped states.
//!
//! Durations use the fixed window `[−T/2, T/2)` centred on the attracting
//! point `t₀ = 0`; states focused elsewhere should be re-centred with
//! [`WaveState::time_shift`] first.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{domain, Result};
use crate::grid::WaveState;
use crate::physics::OpticalDrive;
use crate::special::bessel_j;

/// Periodic saw `s(t) = ((t + T/2) mod T) − T/2`, in seconds.
pub fn saw(t: f64, drive: &OpticalDrive) -> f64 {
    let period = drive.period;
    (t + 0.5 * period).rem_euclid(period) - 0.5 * period
}

/// Saw function on the phase, with values in `[−π, π)`.
pub fn saw_phase(theta: f64) -> f64 {
    (theta + PI).rem_euclid(2.0 * PI) - PI
}

/// Rms duration in units of the optical period.
pub fn rms_width(state: &WaveState) -> Result<f64> {
    let grid = state.grid();
    let rho = state.density();
    let total: f64 = rho.iter().sum();
    if !(total > 0.0) {
        return domain("rms duration of a zero-norm state");
    }
    let second: f64 = rho
        .iter()
        .enumerate()
        .map(|(j, r)| {
            let s = saw_phase(grid.phase(j));
            s * s * r
        })
        .sum();
    Ok((second / total).sqrt() / (2.0 * PI))
}

/// Rms duration `Δt = sqrt(∫ s² ρ dt / ∫ ρ dt)` in seconds.
pub fn rms_duration(state: &WaveState, drive: &OpticalDrive) -> Result<f64> {
    Ok(rms_width(state)? * drive.period)
}

/// `⟨bⁿ⟩ = ∫ ρ(t) e^{inωt} dt / ∫ ρ dt`.
pub fn bunching_moment(state: &WaveState, n: u32) -> Complex64 {
    let grid = state.grid();
    let rho = state.density();
    let total: f64 = rho.iter().sum();
    let sum: Complex64 = rho
        .iter()
        .enumerate()
        .map(|(j, &r)| r * Complex64::from_polar(1.0, n as f64 * grid.phase(j)))
        .sum();
    sum / total
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub orders: Vec<u32>,
    pub values: Vec<Complex64>,
    pub position: f64,
}

impl MomentSet {
    pub fn get(&self, order: u32) -> Option<Complex64> {
        self.orders
            .iter()
            .position(|&o| o == order)
            .map(|i| self.values[i])
    }
}

/// Moments of orders `1..=max_order` from the discrete Fourier coefficients
/// of the density.
pub fn moments(state: &WaveState, max_order: u32) -> MomentSet {
    let n = state.n_samples();
    let mut rho: Vec<Complex64> = state
        .density()
        .into_iter()
        .map(|r| Complex64::new(r, 0.0))
        .collect();
    let total: f64 = rho.iter().map(|c| c.re).sum();
    FftPlanner::new().plan_fft_inverse(n).process(&mut rho);
    let orders: Vec<u32> = (1..=max_order).collect();
    let values = orders
        .iter()
        .map(|&k| {
            // θ_0 = −π contributes the factor (−1)^k
            let c = rho[k as usize % n] / total;
            if k % 2 == 0 {
                c
            } else {
                -c
            }
        })
        .collect();
    MomentSet {
        orders,
        values,
        position: state.position(),
    }
}

/// Closed-form single-plate moment `J_n[4g sin(2πnζ)]`.
pub fn analytic_single_moment(strength: f64, n: u32, zeta: f64) -> f64 {
    bessel_j(n as i32, 4.0 * strength * (2.0 * PI * n as f64 * zeta).sin())
}

/// Discrete Wigner distribution `W(θ, n)` over one period.
///
/// Energies are integer sideband indices in units of `ħω`. `values[j][p]`
/// is the weight at phase `phases[j]` and energy `energies[p]`; summing over
/// energy gives `ρ(θ_j)` and averaging over time gives the sideband
/// populations.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerMap {
    pub phases: Vec<f64>,
    pub energies: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl WignerMap {
    pub fn time_axis(&self, drive: &OpticalDrive) -> Vec<f64> {
        self.phases.iter().map(|&p| drive.time_of(p)).collect()
    }

    /// `Σ_E W(θ_j, E)` per time sample.
    pub fn time_marginal(&self) -> Vec<f64> {
        self.values.iter().map(|row| row.iter().sum()).collect()
    }

    /// Time average of `W` per energy bin.
    pub fn energy_marginal(&self) -> Vec<f64> {
        let n = self.values.len() as f64;
        (0..self.energies.len())
            .map(|p| self.values.iter().map(|row| row[p]).sum::<f64>() / n)
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.energy_marginal().iter().sum()
    }

    /// Integrated magnitude of the negative regions.
    pub fn negative_mass(&self) -> f64 {
        let n = self.values.len() as f64;
        self.values
            .iter()
            .flat_map(|row| row.iter())
            .filter(|&&w| w < 0.0)
            .map(|w| -w)
            .sum::<f64>()
            / n
    }
}

/// Wigner distribution from the autocorrelation `ψ*(t+τ/2) ψ(t−τ/2)`
/// with `τ` running over one period. Half steps fall on a grid of twice the
/// resolution. Cost is `O(N² log N)`; resample band-limited states to a
/// smaller grid first.
pub fn wigner(state: &WaveState) -> Result<WignerMap> {
    let n = state.n_samples();
    let fine = state.resample(2 * n)?;
    let scale = 1.0 / state.norm();
    let psi = fine.amplitudes();
    let m = 2 * n;
    let fft = FftPlanner::new().plan_fft_forward(n);

    let values = (0..n)
        .map(|j| {
            let centre = 2 * j;
            // slot i holds lag k = i for i < N/2 and k = i − N above
            let mut r: Vec<Complex64> = (0..n)
                .map(|i| {
                    let k = if i < n / 2 { i } else { m + i - n };
                    psi[(centre + k) % m].conj() * psi[(centre + m - k) % m]
                })
                .collect();
            fft.process(&mut r);
            (0..n)
                .map(|i| {
                    let p = i as i64 - (n / 2) as i64;
                    r[p.rem_euclid(n as i64) as usize].re * scale / n as f64
                })
                .collect()
        })
        .collect();
    Ok(WignerMap {
        phases: state.grid().phases(),
        energies: (0..n).map(|i| i as f64 - (n / 2) as f64).collect(),
        values,
    })
}

/// `(e^{−iπ/4}/√2)[ψ(θ) + iψ(θ + π)]`: the state after a quarter Talbot
/// distance, written as two replicas half a period apart.
pub fn quarter_talbot_superposition(state: &WaveState) -> WaveState {
    let n = state.n_samples();
    let a = state.amplitudes();
    let prefactor = Complex64::from_polar(FRAC_1_SQRT_2, -FRAC_PI_4);
    let out: Vec<Complex64> = (0..n)
        .map(|j| prefactor * (a[j] + Complex64::i() * a[(j + n / 2) % n]))
        .collect();
    WaveState::new(state.grid().clone(), out, state.position() + 0.25)
        .expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{uniform_state, TemporalGrid};
    use crate::propagation::{apply_phase_plate, drift, DriftSegment, PhasePlate};
    use approx::assert_relative_eq;

    fn drive() -> OpticalDrive {
        OpticalDrive::from_wavelength(800e-9).unwrap()
    }

    fn single(g: f64, zeta: f64, n: usize) -> WaveState {
        let grid = TemporalGrid::new(n).unwrap();
        let s = apply_phase_plate(&uniform_state(&grid), &PhasePlate::harmonic(g)).unwrap();
        drift(&s, DriftSegment::new(zeta).unwrap())
    }

    #[test]
    fn saw_values() {
        let d = drive();
        let t = d.period;
        assert_eq!(saw(0.0, &d), 0.0);
        assert!(saw(t, &d).abs() < 1e-30);
        assert_relative_eq!(saw(0.75 * t, &d), -0.25 * t, max_relative = 1e-12);
        assert_relative_eq!(saw(-0.5 * t, &d), -0.5 * t, max_relative = 1e-12);
        assert_relative_eq!(saw_phase(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn uniform_rms_duration() {
        let s = uniform_state(&TemporalGrid::new(4096).unwrap());
        let d = drive();
        let dt = rms_duration(&s, &d).unwrap();
        assert_relative_eq!(dt, d.period / 12f64.sqrt(), max_relative = 1e-6);
        assert!((dt * 1e15 - 0.770).abs() < 1e-3);
    }

    #[test]
    fn delta_rms_duration() {
        let grid = TemporalGrid::new(256).unwrap();
        let mut amps = vec![Complex64::new(0.0, 0.0); 256];
        amps[128] = Complex64::new(16.0, 0.0);
        let s = WaveState::new(grid.clone(), amps, 0.0).unwrap();
        assert_eq!(rms_width(&s).unwrap(), 0.0);
        let zero = WaveState::new(grid, vec![Complex64::new(0.0, 0.0); 256], 0.0).unwrap();
        assert!(rms_width(&zero).is_err());
    }

    #[test]
    fn uniform_and_phase_only_moments_vanish() {
        let grid = TemporalGrid::new(128).unwrap();
        let u = uniform_state(&grid);
        let p = apply_phase_plate(&u, &PhasePlate::harmonic(2.5)).unwrap();
        for n in 1..6 {
            assert!(bunching_moment(&u, n).norm() < 1e-14);
            assert!(bunching_moment(&p, n).norm() < 1e-13);
        }
    }

    #[test]
    fn moments_agree_with_direct_sum() {
        let s = single(1.0, 0.07, 512);
        let set = moments(&s, 6);
        for n in 1..=6 {
            assert!((set.get(n).unwrap() - bunching_moment(&s, n)).norm() < 1e-13);
        }
        assert_eq!(set.position, 0.07);
    }

    #[test]
    fn single_plate_moment_oracle() {
        for &g in &[0.2, 1.0, 4.0] {
            for &zeta in &[0.0, 1.0 / 16.0, 0.125, 0.25, 0.031] {
                let s = single(g, zeta, 1024);
                for n in 1..=5 {
                    let b = bunching_moment(&s, n);
                    let exact = analytic_single_moment(g, n, zeta);
                    assert!((b - Complex64::new(exact, 0.0)).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn analytic_moment_values() {
        for n in 1..5 {
            assert_eq!(analytic_single_moment(3.0, n, 0.0), 0.0);
        }
        let zeta = (1.8412f64 / 4.0).asin() / (2.0 * PI);
        assert!((analytic_single_moment(1.0, 1, zeta) - 0.5819).abs() < 1e-4);
        assert_relative_eq!(
            analytic_single_moment(4.0, 1, 0.125),
            bessel_j(1, 16.0 / 2f64.sqrt()),
            epsilon = 1e-14
        );
    }

    /// `W(θ, p) = (1/N) Σ_τ ψ*(θ+τ/2) ψ(θ−τ/2) e^{−ipτ}` with `ψ` summed
    /// from its sidebands at arbitrary phase.
    fn wigner_direct(state: &WaveState, theta: f64, p: f64) -> f64 {
        let grid = state.grid();
        let sb = state.sidebands();
        let n = state.n_samples();
        let psi = |x: f64| -> Complex64 {
            sb.iter()
                .enumerate()
                .map(|(k, c)| c * Complex64::from_polar(1.0, -(grid.sideband_of_slot(k) as f64) * x))
                .sum()
        };
        let sum: Complex64 = (0..n)
            .map(|i| {
                let tau = 2.0 * PI * (i as f64 - (n / 2) as f64) / n as f64;
                psi(theta + 0.5 * tau).conj()
                    * psi(theta - 0.5 * tau)
                    * Complex64::from_polar(1.0, -p * tau)
            })
            .sum();
        sum.re / n as f64
    }

    #[test]
    fn wigner_matches_direct_sum() {
        let s = single(1.5, 0.02, 64);
        let w = wigner(&s).unwrap();
        for &j in &[0usize, 13, 32, 50] {
            for &p in &[10usize, 31, 32, 33, 40, 50] {
                let direct = wigner_direct(&s, w.phases[j], w.energies[p]);
                assert!((w.values[j][p] - direct).abs() < 1e-12, "j={j} p={p}");
            }
        }
    }

    #[test]
    fn wigner_of_uniform_state() {
        let s = uniform_state(&TemporalGrid::new(32).unwrap());
        let w = wigner(&s).unwrap();
        let zero = w.energies.iter().position(|&e| e == 0.0).unwrap();
        for row in &w.values {
            for (p, &v) in row.iter().enumerate() {
                let expected = if p == zero { 1.0 } else { 0.0 };
                assert!((v - expected).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn wigner_marginals() {
        let s = single(4.0, 0.012, 256);
        let w = wigner(&s).unwrap();
        for (a, b) in w.time_marginal().iter().zip(s.density()) {
            assert!((a - b).abs() < 1e-8);
        }
        let pops = s.sideband_populations();
        let em = w.energy_marginal();
        assert_eq!(em.len(), pops.len());
        for (a, b) in em.iter().zip(&pops) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((w.total() - 1.0).abs() < 1e-10);
        assert!(w.negative_mass() > 0.0);
    }

    #[test]
    fn quarter_talbot_identity() {
        let grid = TemporalGrid::new(512).unwrap();
        for g1 in [0.0, 0.2, PI / 8.0, 1.3] {
            let s = apply_phase_plate(&uniform_state(&grid), &PhasePlate::harmonic(g1)).unwrap();
            let sup = quarter_talbot_superposition(&s);
            let prop = drift(&s, DriftSegment::new(0.25).unwrap());
            for (a, b) in sup.amplitudes().iter().zip(prop.amplitudes()) {
                assert!((a - b).norm() < 1e-10);
            }
            for (j, r) in sup.density().iter().enumerate() {
                let expected = 1.0 + (4.0 * g1 * grid.phase(j).cos()).sin();
                assert!((r - expected).abs() < 1e-10);
            }
        }
        let s = apply_phase_plate(&uniform_state(&grid), &PhasePlate::harmonic(PI / 8.0)).unwrap();
        let rho = quarter_talbot_superposition(&s).density();
        assert!(rho[0] < 1e-20);
    }
}
