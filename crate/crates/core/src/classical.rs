//! Classical limit of a temporal phase plate: velocity kicks, arrival-time
//! map and the fixed points that seed density peaks and background.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::physics::{talbot_distance, BeamParameters, OpticalDrive, CONSTANTS};
use crate::propagation::PhasePlate;

/// Points used to bracket zeros of the kick over one period.
pub const BRACKET_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixedPointKind {
    Attracting,
    Repelling,
    /// Tangential zero; excluded from focus computations.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    /// Seconds, within `[−T/2, T/2)`.
    pub time: f64,
    pub kind: FixedPointKind,
    /// `Δv′(t₀)` in m/s².
    pub kick_slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoints {
    pub points: Vec<FixedPoint>,
    /// Set when the kick vanishes identically.
    pub trivial_plate: bool,
}

fn kick_scale(beam: &BeamParameters) -> f64 {
    CONSTANTS.reduced_planck / beam.longitudinal_momentum_scale()
}

/// `Δv(t) = −ħ Φ′(t) / (γ³ m v)` in m/s.
pub fn velocity_kick(plate: &PhasePlate, beam: &BeamParameters, drive: &OpticalDrive, t: f64) -> f64 {
    let dphi_dt = drive.omega * plate.phase_derivative(drive.phase_of(t), 1);
    -kick_scale(beam) * dphi_dt
}

/// `Δv′(t)` in m/s².
pub fn velocity_kick_slope(plate: &PhasePlate, beam: &BeamParameters, drive: &OpticalDrive, t: f64) -> f64 {
    let d2phi = drive.omega * drive.omega * plate.phase_derivative(drive.phase_of(t), 2);
    -kick_scale(beam) * d2phi
}

/// Arrival time `t(z) = t − Δv(t) z / v²` of an electron launched at `t`.
pub fn trajectory_map(
    plate: &PhasePlate,
    beam: &BeamParameters,
    drive: &OpticalDrive,
    t: f64,
    z: f64,
) -> Result<f64> {
    if z < 0.0 {
        return domain(format!("propagation distance must be >= 0, got {z}"));
    }
    let v = beam.velocity;
    Ok(t - velocity_kick(plate, beam, drive, t) * z / (v * v))
}

/// Zeros of `Δv` within one period, classified by the sign of `Δv′`.
///
/// The period is bracketed on [`BRACKET_POINTS`] samples and each sign
/// change refined by bisection to `10⁻¹²` of a period. Sign changes across
/// a discontinuity of the kick (the parabolic profile at `±T/2`) are not
/// zeros and are dropped.
pub fn find_fixed_points(plate: &PhasePlate, beam: &BeamParameters, drive: &OpticalDrive) -> FixedPoints {
    let m = BRACKET_POINTS;
    let kick = |theta: f64| -plate.phase_derivative(theta, 1);
    let slope = |theta: f64| -plate.phase_derivative(theta, 2);
    let thetas: Vec<f64> = (0..=m).map(|k| -PI + 2.0 * PI * k as f64 / m as f64).collect();
    let values: Vec<f64> = thetas.iter().map(|&t| kick(t)).collect();
    let scale = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 {
        return FixedPoints {
            points: Vec::new(),
            trivial_plate: true,
        };
    }
    let zero_tol = 1e-12 * scale;
    let slope_scale = thetas.iter().fold(0.0f64, |a, &t| a.max(slope(t).abs()));

    let mut roots = Vec::new();
    for k in 0..m {
        let (a, b) = (thetas[k], thetas[k + 1]);
        let (fa, fb) = (values[k], values[k + 1]);
        if fa.abs() <= zero_tol {
            roots.push(a);
            continue;
        }
        if fb.abs() <= zero_tol || fa.signum() == fb.signum() {
            continue;
        }
        let (mut lo, mut hi, mut flo) = (a, b, fa);
        while hi - lo > 2.0 * PI * 1e-12 {
            let mid = 0.5 * (lo + hi);
            let fm = kick(mid);
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        if kick(root).abs() <= 1e-6 * scale {
            roots.push(root);
        }
    }

    let to_si = drive.omega * drive.omega * kick_scale(beam);
    let points = roots
        .into_iter()
        .map(|theta| {
            let theta = crate::metrics::saw_phase(theta);
            let s = slope(theta);
            let kind = if s.abs() <= 1e-9 * slope_scale {
                FixedPointKind::Degenerate
            } else if s > 0.0 {
                FixedPointKind::Attracting
            } else {
                FixedPointKind::Repelling
            };
            FixedPoint {
                time: drive.time_of(theta),
                kind,
                kick_slope: s * to_si,
            }
        })
        .collect();
    FixedPoints {
        points,
        trivial_plate: false,
    }
}

/// Paraxial focal length `l_f = v² / Δv′(t₀)` of a harmonic plate, in
/// metres. Equals `l_T / (8πg)`.
pub fn paraxial_focus(plate: &PhasePlate, beam: &BeamParameters, drive: &OpticalDrive) -> Result<f64> {
    let (strength, offset) = match plate {
        PhasePlate::Harmonic {
            strength,
            phase_offset,
        } => (*strength, *phase_offset),
        _ => return domain("paraxial focus is defined for harmonic plates"),
    };
    if !(strength > 0.0) {
        return domain(format!("paraxial focus needs strength > 0, got {strength}"));
    }
    let t0 = drive.time_of(offset);
    let slope = velocity_kick_slope(plate, beam, drive, t0);
    Ok(beam.velocity * beam.velocity / slope)
}

/// `l_T / (8πg)` in Talbot lengths.
pub fn paraxial_focus_zeta(strength: f64) -> f64 {
    1.0 / (8.0 * PI * strength)
}

/// Paraxial focus directly from the closed form, in metres.
pub fn paraxial_focus_closed_form(strength: f64, beam: &BeamParameters, drive: &OpticalDrive) -> f64 {
    talbot_distance(beam, drive) * paraxial_focus_zeta(strength)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::derive_beam;
    use crate::propagation::SampledPhase;
    use approx::assert_relative_eq;

    fn setup() -> (BeamParameters, OpticalDrive) {
        (
            derive_beam(120e3).unwrap(),
            OpticalDrive::from_wavelength(800e-9).unwrap(),
        )
    }

    #[test]
    fn harmonic_kick() {
        let (b, d) = setup();
        let g = 1.7;
        let plate = PhasePlate::harmonic(g);
        let amp = 2.0 * g * CONSTANTS.reduced_planck * d.omega
            / (b.gamma.powi(3) * CONSTANTS.electron_rest_mass * b.velocity);
        for &frac in &[-0.4, -0.1, 0.0, 0.25, 0.33] {
            let t = frac * d.period;
            assert_relative_eq!(
                velocity_kick(&plate, &b, &d, t),
                amp * (d.omega * t).sin(),
                epsilon = 1e-12 * amp
            );
        }
        // sampled route through the spectral derivative
        let sampled = PhasePlate::Sampled(SampledPhase::from_fn(64, |t| 2.0 * g * t.cos()).unwrap());
        for &frac in &[-0.4, 0.1, 0.25] {
            let t = frac * d.period;
            let a = velocity_kick(&plate, &b, &d, t);
            let s = velocity_kick(&sampled, &b, &d, t);
            assert!((a - s).abs() < 1e-8 * amp);
        }
        assert_eq!(velocity_kick(&plate, &b, &d, 0.0), 0.0);
        let peak = velocity_kick(&plate, &b, &d, d.period / 4.0);
        assert_relative_eq!(peak, amp, max_relative = 1e-14);
    }

    #[test]
    fn parabolic_kick_is_linear() {
        let (b, d) = setup();
        let g = 0.8;
        let plate = PhasePlate::parabolic(g);
        for &frac in &[-0.45, -0.2, 0.05, 0.3, 0.49] {
            let t = frac * d.period;
            let expected = 2.0 * g * d.omega * d.omega * CONSTANTS.reduced_planck * t
                / (b.gamma.powi(3) * CONSTANTS.electron_rest_mass * b.velocity);
            assert_relative_eq!(velocity_kick(&plate, &b, &d, t), expected, max_relative = 1e-10);
        }
    }

    #[test]
    fn trajectory_limits() {
        let (b, d) = setup();
        let plate = PhasePlate::harmonic(4.0);
        let t = 0.1 * d.period;
        assert_eq!(trajectory_map(&plate, &b, &d, t, 0.0).unwrap(), t);
        assert_eq!(
            trajectory_map(&PhasePlate::harmonic(0.0), &b, &d, t, 1.0).unwrap(),
            t
        );
        assert!(trajectory_map(&plate, &b, &d, t, -1.0).is_err());
    }

    #[test]
    fn paraxial_rays_meet_at_focus() {
        let (b, d) = setup();
        let plate = PhasePlate::harmonic(4.0);
        let lf = paraxial_focus(&plate, &b, &d).unwrap();
        // residual is cubic in launch time: t − sin(ωt)/ω ≈ ω² t³ / 6
        for &frac in &[1e-3, 2e-3, 4e-3] {
            let t = frac * d.period;
            let arrival = trajectory_map(&plate, &b, &d, t, lf).unwrap();
            let cubic = d.omega * d.omega * t.powi(3) / 6.0;
            assert_relative_eq!(arrival, cubic, max_relative = 1e-3);
        }
    }

    #[test]
    fn harmonic_fixed_points() {
        let (b, d) = setup();
        let fp = find_fixed_points(&PhasePlate::harmonic(0.9), &b, &d);
        assert!(!fp.trivial_plate);
        assert_eq!(fp.points.len(), 2);
        let attracting: Vec<_> = fp.points.iter().filter(|p| p.kind == FixedPointKind::Attracting).collect();
        let repelling: Vec<_> = fp.points.iter().filter(|p| p.kind == FixedPointKind::Repelling).collect();
        assert_eq!((attracting.len(), repelling.len()), (1, 1));
        assert!(attracting[0].time.abs() < 1e-12 * d.period);
        assert!((repelling[0].time + 0.5 * d.period).abs() < 1e-12 * d.period);
        assert!(attracting[0].kick_slope > 0.0);
    }

    #[test]
    fn shifted_fixed_points() {
        let (b, d) = setup();
        let phi = 0.7;
        let plate = PhasePlate::Harmonic {
            strength: 2.0,
            phase_offset: phi,
        };
        let fp = find_fixed_points(&plate, &b, &d);
        let att = fp.points.iter().find(|p| p.kind == FixedPointKind::Attracting).unwrap();
        let rep = fp.points.iter().find(|p| p.kind == FixedPointKind::Repelling).unwrap();
        assert!((att.time - phi / d.omega).abs() < 1e-12 * d.period);
        assert!((rep.time - (phi - PI) / d.omega).abs() < 1e-12 * d.period);
    }

    #[test]
    fn parabolic_single_attractor() {
        let (b, d) = setup();
        let fp = find_fixed_points(&PhasePlate::parabolic(1.0), &b, &d);
        assert_eq!(fp.points.len(), 1);
        assert_eq!(fp.points[0].kind, FixedPointKind::Attracting);
        assert!(fp.points[0].time.abs() < 1e-12 * d.period);
    }

    #[test]
    fn kinds_alternate_for_multi_harmonic_kick() {
        let (b, d) = setup();
        let plate = PhasePlate::Sampled(
            SampledPhase::from_fn(128, |t| 0.8 * t.cos() + 0.5 * (3.0 * t + 0.3).cos()).unwrap(),
        );
        let fp = find_fixed_points(&plate, &b, &d);
        assert!(fp.points.len() >= 4);
        assert_eq!(fp.points.len() % 2, 0);
        for w in fp.points.windows(2) {
            assert_ne!(w[0].kind, w[1].kind);
        }
    }

    #[test]
    fn trivial_plate_flagged() {
        let (b, d) = setup();
        let fp = find_fixed_points(&PhasePlate::harmonic(0.0), &b, &d);
        assert!(fp.trivial_plate && fp.points.is_empty());
    }

    #[test]
    fn focus_values() {
        let (b, d) = setup();
        let lt = talbot_distance(&b, &d);
        let lf = paraxial_focus(&PhasePlate::harmonic(4.0), &b, &d).unwrap();
        assert_relative_eq!(lf / lt, 1.0 / (32.0 * PI), max_relative = 1e-12);
        assert!((lf / lt - 9.947e-3).abs() < 1e-6);
        assert!((lf - 1.99e-3).abs() < 0.03e-3);
        let unit = paraxial_focus(&PhasePlate::harmonic(1.0 / (8.0 * PI)), &b, &d).unwrap();
        assert_relative_eq!(unit, lt, max_relative = 1e-12);
        for g in [0.1, 0.5, 2.0, 9.0] {
            let lf = paraxial_focus(&PhasePlate::harmonic(g), &b, &d).unwrap();
            assert_relative_eq!(lf * g, lt / (8.0 * PI), max_relative = 1e-12);
            assert_relative_eq!(lf, paraxial_focus_closed_form(g, &b, &d), max_relative = 1e-12);
        }
        assert!(paraxial_focus(&PhasePlate::harmonic(0.0), &b, &d).is_err());
        assert!(paraxial_focus(&PhasePlate::harmonic(-1.0), &b, &d).is_err());
        assert!(paraxial_focus(&PhasePlate::parabolic(1.0), &b, &d).is_err());
    }
}
