//! Physical constants and the derived kinematics of the electron beam and
//! the optical drive.
//!
//! Everything downstream works in dimensionless coordinates: the phase
//! `θ = ωt` over one optical period and the propagation distance
//! `ζ = z / l_T` in units of the Talbot distance. The types here are the
//! bridge between those coordinates and SI units.

use std::f64::consts::PI;

use crate::error::{domain, Result};

/// CODATA 2018 values. Fixed at build time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// kg
    pub electron_rest_mass: f64,
    /// C, signed: the electron charge is negative.
    pub elementary_charge: f64,
    /// J s
    pub reduced_planck: f64,
    /// m/s
    pub light_speed: f64,
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    electron_rest_mass: 9.109_383_701_5e-31,
    elementary_charge: -1.602_176_634e-19,
    reduced_planck: 1.054_571_817e-34,
    light_speed: 299_792_458.0,
};

impl PhysicalConstants {
    /// Electron rest energy `m c²` in eV.
    pub fn rest_energy_ev(&self) -> f64 {
        self.electron_rest_mass * self.light_speed * self.light_speed
            / self.elementary_charge.abs()
    }
}

/// Relativistic kinematics of an electron beam of given kinetic energy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParameters {
    pub kinetic_energy: f64,
    pub gamma: f64,
    pub beta: f64,
    pub velocity: f64,
}

/// Derives `γ`, `β` and `v` from the kinetic energy in eV.
pub fn derive_beam(kinetic_energy: f64) -> Result<BeamParameters> {
    if !kinetic_energy.is_finite() || kinetic_energy < 0.0 {
        return domain(format!(
            "kinetic energy must be finite and non-negative, got {kinetic_energy} eV"
        ));
    }
    let gamma = 1.0 + kinetic_energy / CONSTANTS.rest_energy_ev();
    let beta = (1.0 - 1.0 / (gamma * gamma)).sqrt();
    Ok(BeamParameters {
        kinetic_energy,
        gamma,
        beta,
        velocity: beta * CONSTANTS.light_speed,
    })
}

impl BeamParameters {
    /// `γ³ m v`, the longitudinal effective mass times velocity.
    pub fn longitudinal_momentum_scale(&self) -> f64 {
        self.gamma.powi(3) * CONSTANTS.electron_rest_mass * self.velocity
    }
}

/// A monochromatic optical drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalDrive {
    pub wavelength: f64,
    pub omega: f64,
    pub period: f64,
}

impl OpticalDrive {
    pub fn from_wavelength(wavelength: f64) -> Result<Self> {
        if !wavelength.is_finite() || wavelength <= 0.0 {
            return domain(format!("wavelength must be positive, got {wavelength} m"));
        }
        let omega = 2.0 * PI * CONSTANTS.light_speed / wavelength;
        Ok(Self {
            wavelength,
            omega,
            period: 2.0 * PI / omega,
        })
    }

    /// Converts a time in seconds to the phase `θ = ωt`.
    pub fn phase_of(&self, t: f64) -> f64 {
        self.omega * t
    }

    pub fn time_of(&self, phase: f64) -> f64 {
        phase / self.omega
    }
}

/// Talbot distance `l_T = 4π m γ³ v³ / (ħ ω²)` in metres.
pub fn talbot_distance(beam: &BeamParameters, drive: &OpticalDrive) -> f64 {
    let v = beam.velocity;
    4.0 * PI * CONSTANTS.electron_rest_mass * beam.gamma.powi(3) * v * v * v
        / (CONSTANTS.reduced_planck * drive.omega * drive.omega)
}

/// Beam and drive together, with the Talbot distance cached for unit
/// conversion at the I/O boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setup {
    pub beam: BeamParameters,
    pub drive: OpticalDrive,
    pub talbot_length: f64,
}

impl Setup {
    pub fn new(kinetic_energy: f64, wavelength: f64) -> Result<Self> {
        let beam = derive_beam(kinetic_energy)?;
        if beam.velocity <= 0.0 {
            return domain("beam at rest has no Talbot distance");
        }
        let drive = OpticalDrive::from_wavelength(wavelength)?;
        Ok(Self {
            beam,
            drive,
            talbot_length: talbot_distance(&beam, &drive),
        })
    }

    pub fn zeta_to_metres(&self, zeta: f64) -> f64 {
        zeta * self.talbot_length
    }

    pub fn metres_to_zeta(&self, z: f64) -> f64 {
        z / self.talbot_length
    }
}
