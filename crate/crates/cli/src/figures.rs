//! Data bundles for the figures: density evolution and duration curves
//! (fig2), moment evolution and Wigner maps (fig3), streaking spectrograms
//! (fig4) and full density maps (figS1).

use std::path::Path;

use anyhow::{bail, Result};
use attoshape::applications::{mean_energy_trace, streak, StreakField};
use attoshape::classical::velocity_kick;
use attoshape::grid::{uniform_state, WaveState};
use attoshape::metrics::{moments, rms_width, saw_phase, wigner};
use attoshape::optimize::{
    duration_curve, scan_focus, FinalPlate, Objective, ObjectiveKind, OptimizeOptions, Param, SchemeTemplate,
};
use attoshape::physics::Setup;
use attoshape::propagation::{drift, propagate_scheme, state_at, DriftSegment, ModulationScheme, PhasePlate, Stage};

use crate::commands::{fixed_scheme, mm, period_fs, plate_rows, quantum_ev, time_axis_fs, PLATE_HEADER};
use crate::config::RunConfig;
use crate::output::{Axis, Bundle, Cell};

const MAIN: f64 = 4.0;
/// Precompression `(g, d)` pairs quoted for the density maps.
const DUAL_MAP: [(f64, f64); 1] = [(0.426, 0.242)];
const TRIPLE_MAP: [(f64, f64); 2] = [(0.386, 0.207), (0.519, 0.077)];
/// Strengths quoted for the moment figure, distances from the maximum
/// bunching optimization.
const DUAL_MOMENTS: [(f64, f64); 1] = [(0.44, 0.24)];
const TRIPLE_MOMENTS: [(f64, f64); 2] = [(0.39, 0.207), (0.52, 0.077)];
/// Range shown past the main plate, Talbot lengths.
const PAST_MAIN: f64 = 0.03;
const ORDERS: u32 = 5;

pub fn run(id: &str, config: &RunConfig, out: &Path) -> Result<()> {
    let mut b = Bundle::create(out, &format!("figure {id}"))?;
    match id {
        "fig2" => fig2(config, &mut b)?,
        "fig3" => fig3(config, &mut b)?,
        "fig4" => fig4(config, &mut b)?,
        "figS1" => fig_s1(config, &mut b)?,
        _ => bail!("unknown figure '{id}' (use fig2, fig3, fig4 or figS1)"),
    }
    let path = b.finish(&config.resolved)?;
    println!("figure {id}: manifest {}", path.display());
    Ok(())
}

fn harmonic_scheme(pre: &[(f64, f64)]) -> Result<ModulationScheme> {
    fixed_scheme(pre, PhasePlate::harmonic(MAIN))
}

fn focus(state: &WaveState, kind: ObjectiveKind) -> Result<WaveState> {
    let scan = scan_focus(state, &Objective::with_default_scan(kind, MAIN));
    Ok(drift(state, DriftSegment::new(scan.zeta)?))
}

fn after_main(config: &RunConfig, scheme: &ModulationScheme) -> Result<WaveState> {
    Ok(propagate_scheme(&uniform_state(&config.grid), scheme)?)
}

fn decimate(row: &[f64], keep: usize) -> Vec<f64> {
    let stride = row.len() / keep;
    row.iter().step_by(stride).copied().collect()
}

/// Density (or magnitude) map between absolute positions `z0` and `z1`.
fn write_map(
    b: &mut Bundle,
    config: &RunConfig,
    name: &str,
    what: &str,
    scheme: &ModulationScheme,
    (z0, z1): (f64, f64),
    magnitude: bool,
) -> Result<()> {
    let s = &config.setup;
    let f = &config.figure;
    let initial = uniform_state(&config.grid);
    let map = attoshape::propagation::density_map(&initial, scheme, z0, z1, f.z_points)?;
    let rows: Vec<Vec<f64>> = map
        .rows
        .iter()
        .map(|r| {
            let r = decimate(r, f.t_points);
            if magnitude {
                r.iter().map(|v| v.sqrt()).collect()
            } else {
                r
            }
        })
        .collect();
    let phases = decimate(&map.phases, f.t_points);
    b.grid(
        name,
        what,
        Axis::new("zeta", map.positions.clone()).with("z_mm", map.positions.iter().map(|&z| mm(s, z)).collect()),
        Axis::new("t_fs", time_axis_fs(s, &phases)).with("phase_rad", phases),
        &rows,
    )?;
    b.table(
        &format!("{name}_plates"),
        "phase plate positions and strengths",
        &PLATE_HEADER,
        plate_rows(s, scheme),
    )
}

/// Classical arrival phase after the whole scheme and a further drift
/// `zeta` past the main plate, for launch phase `theta0`.
fn classical_arrival(setup: &Setup, scheme: &ModulationScheme, theta0: f64, zeta: f64) -> f64 {
    let v = setup.beam.velocity;
    let mut t = setup.drive.time_of(theta0);
    let mut kick = 0.0;
    let stages = scheme.stages();
    for stage in stages {
        match stage {
            Stage::Plate(p) => kick += velocity_kick(p, &setup.beam, &setup.drive, t),
            Stage::Drift(d) => {
                t -= kick * setup.zeta_to_metres(d.distance()) / (v * v);
            }
        }
    }
    t -= kick * setup.zeta_to_metres(zeta) / (v * v);
    setup.drive.phase_of(t)
}

fn trajectories(
    b: &mut Bundle,
    config: &RunConfig,
    name: &str,
    scheme: &ModulationScheme,
    zetas: &[f64],
    focus_zeta: f64,
    focus_width: f64,
) -> Result<()> {
    let s = &config.setup;
    let k = config.figure.trajectories;
    let main = scheme.total_drift();
    let mut rows = Vec::new();
    for i in 0..k {
        let theta0 = -std::f64::consts::PI + 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / k as f64;
        let at_focus = saw_phase(classical_arrival(s, scheme, theta0, focus_zeta));
        let class = if at_focus.abs() <= 2.0 * 2.0 * std::f64::consts::PI * focus_width {
            "peak"
        } else {
            "background"
        };
        for &z in zetas {
            let theta = saw_phase(classical_arrival(s, scheme, theta0, z - main));
            rows.push(vec![
                Cell::from(i),
                Cell::from(s.drive.time_of(theta0) * 1e15),
                Cell::from(class),
                Cell::from(z),
                Cell::from(mm(s, z)),
                Cell::from(s.drive.time_of(theta) * 1e15),
            ]);
        }
    }
    b.table(
        name,
        "classical trajectories launched uniformly over one period before the first plate; arrival times wrapped into \
         one period; class 'peak' if the arrival at the rms focus lies within two rms durations of t = 0",
        &["trajectory", "launch_t_fs", "class", "zeta", "z_mm", "t_fs"],
        rows,
    )
}

fn fig2(config: &RunConfig, b: &mut Bundle) -> Result<()> {
    let s = &config.setup;
    let f = &config.figure;
    let period = period_fs(s);
    let mut focus_densities = Vec::new();
    for (panel, label, pre) in [("fig2a", "single", &[][..]), ("fig2b", "triple", &TRIPLE_MOMENTS[..])] {
        let scheme = harmonic_scheme(pre)?;
        let main = scheme.total_drift();
        let range = (main, main + PAST_MAIN);
        write_map(
            b,
            config,
            &format!("{panel}_magnitude"),
            &format!("{label} interaction: |psi| past the main plate"),
            &scheme,
            range,
            true,
        )?;
        let state = after_main(config, &scheme)?;
        let scan = scan_focus(&state, &Objective::with_default_scan(ObjectiveKind::MinRmsDuration, MAIN));
        let step = (range.1 - range.0) / (f.z_points - 1) as f64;
        let zetas: Vec<f64> = (0..f.z_points).map(|i| range.0 + step * i as f64).collect();
        trajectories(b, config, &format!("{panel}_trajectories"), &scheme, &zetas, scan.zeta, scan.value)?;
        b.result(&format!("{panel}_rms_focus_zeta"), scan.zeta);
        b.result(&format!("{panel}_rms_focus_dt_fs"), scan.value * period);
        focus_densities.push(drift(&state, DriftSegment::new(scan.zeta)?).density());
    }

    let phases = config.grid.phases();
    b.table(
        "fig2d_focus_density",
        "density (unit mean) in the rms focus for the single and triple schemes of panels a and b",
        &["t_fs", "single", "triple"],
        (0..phases.len()).map(|j| vec![s.drive.time_of(phases[j]) * 1e15, focus_densities[0][j], focus_densities[1][j]]),
    )?;

    let options = OptimizeOptions {
        n_samples: config.grid.n_samples(),
        budget: f.fig2_budget,
        ..OptimizeOptions::default()
    };
    let finals: &[FinalPlate] = if f.fig2_parabolic {
        &[FinalPlate::Harmonic, FinalPlate::Parabolic]
    } else {
        &[FinalPlate::Harmonic]
    };
    let mut columns = Vec::new();
    let mut param_rows = Vec::new();
    for &fin in finals {
        for (name, plates) in [("single", 1), ("dual", 2), ("triple", 3)] {
            let template = SchemeTemplate::new(plates, f.fig2_g_values[0], fin)?;
            let curve = duration_curve(&template, &f.fig2_g_values, &options)?;
            let suffix = if fin == FinalPlate::Parabolic { "_parabolic" } else { "" };
            for p in &curve {
                let mut row = vec![Cell::from(format!("{name}{suffix}").as_str()), Cell::from(p.main_strength)];
                for param in Param::ALL {
                    row.push(Cell::from(p.result.best_parameters.get(param).unwrap_or(f64::NAN)));
                }
                row.push(Cell::from(p.width * period));
                row.push(Cell::from(p.result.focus_position));
                row.push(Cell::from(if p.result.budget_exhausted { 1i64 } else { 0 }));
                param_rows.push(row);
            }
            columns.push((format!("{name}{suffix}_fs"), curve.iter().map(|p| p.width * period).collect::<Vec<_>>()));
        }
    }
    let mut header = vec!["g".to_string()];
    header.extend(columns.iter().map(|c| c.0.clone()));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    b.table(
        "fig2c_durations",
        "optimized rms duration (fs) versus main compression strength",
        &header,
        f.fig2_g_values.iter().enumerate().map(|(i, &g)| {
            let mut row = vec![g];
            row.extend(columns.iter().map(|c| c.1[i]));
            row
        }),
    )?;
    b.table(
        "fig2c_parameters",
        "optimized parameters per curve point (NaN: not part of the template); focus measured from the main plate",
        &["scheme", "g", "g1", "d1", "g2", "d2", "dt_fs", "focus_zeta", "budget_exhausted"],
        param_rows,
    )
}

fn moment_evolution(config: &RunConfig, scheme: &ModulationScheme, first: &ModulationScheme, z1: f64) -> Result<Vec<Vec<f64>>> {
    let s = &config.setup;
    let n = config.figure.moment_points;
    let initial = uniform_state(&config.grid);
    (0..n)
        .map(|i| {
            let z = z1 * i as f64 / (n - 1) as f64;
            let mut row = vec![z, mm(s, z)];
            for sch in [scheme, first] {
                row.extend(moments(&state_at(&initial, sch, z)?, ORDERS).values.iter().map(|b| b.norm()));
            }
            Ok(row)
        })
        .collect()
}

fn fig3(config: &RunConfig, b: &mut Bundle) -> Result<()> {
    let s = &config.setup;
    let quantum = quantum_ev(s);
    let mut header = vec!["zeta".to_string(), "z_mm".into()];
    header.extend((1..=ORDERS).map(|n| format!("b{n}_abs")));
    header.extend((1..=ORDERS).map(|n| format!("b{n}_abs_first_only")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();

    let single = after_main(config, &harmonic_scheme(&[])?)?;
    let mut at_focus = vec![focus(&single, ObjectiveKind::MaxBunching { order: 1 })?];
    for (panel, label, pre) in [("fig3a", "dual", &DUAL_MOMENTS[..]), ("fig3b", "triple", &TRIPLE_MOMENTS[..])] {
        let scheme = harmonic_scheme(pre)?;
        let first = ModulationScheme::new().plate(PhasePlate::harmonic(pre[0].0));
        let rows = moment_evolution(config, &scheme, &first, scheme.total_drift() + PAST_MAIN)?;
        b.table(
            &format!("{panel}_moments"),
            &format!("{label} scheme: |<b^n>| versus position, full scheme and first interaction only"),
            &header,
            rows,
        )?;
        b.table(&format!("{panel}_plates"), "phase plate positions", &PLATE_HEADER, plate_rows(s, &scheme))?;
        at_focus.push(focus(&after_main(config, &scheme)?, ObjectiveKind::MaxBunching { order: 1 })?);
    }

    let m: Vec<Vec<f64>> = at_focus
        .iter()
        .map(|st| moments(st, ORDERS).values.iter().map(|b| b.norm()).collect())
        .collect();
    b.table(
        "fig3c_focus_moments",
        "|<b^n>| at the position of maximum <b>",
        &["n", "single", "dual", "triple"],
        (0..ORDERS as usize).map(|i| vec![(i + 1) as f64, m[0][i], m[1][i], m[2][i]]),
    )?;

    for (name, label, st) in [
        ("fig3_wigner_single", "single", &at_focus[0]),
        ("fig3d_wigner", "dual", &at_focus[1]),
        ("fig3e_wigner", "triple", &at_focus[2]),
    ] {
        let small = st.resample(config.figure.wigner_samples)?;
        let w = wigner(&small)?;
        b.grid(
            name,
            &format!("{label} scheme: Wigner distribution at maximum <b>; energy in photon quanta"),
            Axis::new("t_fs", time_axis_fs(s, &w.phases)).with("phase_rad", w.phases.clone()),
            Axis::new("energy_n", w.energies.clone()).with("energy_ev", w.energies.iter().map(|e| e * quantum).collect()),
            &w.values,
        )?;
        b.result(&format!("{name}_negative_mass"), w.negative_mass());
    }
    Ok(())
}

fn fig4(config: &RunConfig, b: &mut Bundle) -> Result<()> {
    let s = &config.setup;
    let f = &config.figure;
    let quantum = quantum_ev(s);
    let period = period_fs(s);
    let fields = [("a", StreakField::new(f.field_a.clone())?), ("b", StreakField::new(f.field_b.clone())?)];
    let states = [
        ("single", focus(&after_main(config, &harmonic_scheme(&[])?)?, ObjectiveKind::MinRmsDuration)?),
        ("triple", focus(&after_main(config, &harmonic_scheme(&TRIPLE_MOMENTS)?)?, ObjectiveKind::MinRmsDuration)?),
    ];
    for (fname, field) in &fields {
        for (sname, state) in &states {
            let spec = streak(state, field, f.delays)?;
            let (energies, intensity) = spec.cropped(f.energy_window);
            let delays_fs: Vec<f64> = spec.delays.iter().map(|d| d / (2.0 * std::f64::consts::PI) * period).collect();
            let name = format!("fig4_{sname}_field_{fname}");
            let energies: Vec<f64> = energies.iter().map(|&e| e as f64).collect();
            b.grid(
                &format!("{name}_spectrogram"),
                &format!("{sname} rms-focus state streaked by field {fname}: sideband populations versus delay"),
                Axis::new("delay_fs", delays_fs.clone()),
                Axis::new("energy_n", energies.clone()).with("energy_ev", energies.iter().map(|e| e * quantum).collect()),
                &intensity,
            )?;
            let trace = mean_energy_trace(&spec);
            b.table(
                &format!("{name}_traces"),
                "streak field -hbar Phi'(tau) and mean energy E(tau), in photon quanta and eV; predicted: linear mapping \
                 from the probe moments",
                &[
                    "delay_fs",
                    "field_n",
                    "field_ev",
                    "mean_energy_n",
                    "mean_energy_ev",
                    "predicted_n",
                ],
                (0..delays_fs.len()).map(|i| {
                    vec![
                        delays_fs[i],
                        trace.field[i],
                        trace.field[i] * quantum,
                        trace.simulated[i],
                        trace.simulated[i] * quantum,
                        trace.predicted[i],
                    ]
                }),
            )?;
            b.result(&format!("{name}_rms_dt_fs"), rms_width(state)? * period);
        }
    }
    for (fname, field) in &fields {
        b.table(
            &format!("fig4_field_{fname}"),
            "streak field harmonics c_n (energy gain in photon quanta)",
            &["n", "re", "im"],
            field
                .coefficients()
                .iter()
                .enumerate()
                .map(|(k, c)| vec![(k + 1) as f64, c.re, c.im]),
        )?;
    }
    Ok(())
}

fn fig_s1(config: &RunConfig, b: &mut Bundle) -> Result<()> {
    for (panel, label, pre) in [
        ("figS1a", "single interaction", &[][..]),
        ("figS1b", "dual interaction", &DUAL_MAP[..]),
        ("figS1c", "triple interaction", &TRIPLE_MAP[..]),
    ] {
        let scheme = harmonic_scheme(pre)?;
        let end = scheme.total_drift() + PAST_MAIN;
        write_map(
            b,
            config,
            &format!("{panel}_density"),
            &format!("{label}: probability density (unit mean) from the first plate past the focus"),
            &scheme,
            (0.0, end),
            false,
        )?;
    }
    Ok(())
}
