//! Attosecond shaping of free-electron wavefunctions by periodic phase
//! modulation and free drift.
//!
//! Time is measured as the dimensionless phase `θ = ωt` of the optical drive
//! and propagation distance as `ζ = z / l_T`, the fraction of a Talbot length.
//! A state is sampled on one period of `θ`; sideband `n` carries energy
//! `n ħω`.

pub mod applications;
pub mod classical;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod optimize;
pub mod physics;
pub mod propagation;
pub mod simplex;
pub mod special;

pub use applications::{
    coherent_buildup, mean_energy_trace, streak, tls_excite, StreakField, StreakSpectrogram,
};
pub use classical::{find_fixed_points, paraxial_focus, trajectory_map, FixedPointKind};
pub use error::{Error, Result};
pub use grid::{uniform_state, TemporalGrid, WaveState};
pub use metrics::{bunching_moment, moments, rms_duration, rms_width, wigner};
pub use optimize::{optimize_scheme, scan_focus, Objective, ObjectiveKind, SchemeTemplate};
pub use physics::{derive_beam, talbot_distance, OpticalDrive, Setup};
pub use propagation::{
    apply_phase_plate, drift, propagate_scheme, DriftSegment, ModulationScheme, PhasePlate,
};
