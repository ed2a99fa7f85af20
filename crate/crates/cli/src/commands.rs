//! `talbot`, `propagate` and `optimize` subcommands.

use std::path::Path;

use anyhow::{anyhow, Result};
use attoshape::classical::paraxial_focus_zeta;
use attoshape::grid::{uniform_state, WaveState};
use attoshape::metrics::{moments, rms_width};
use attoshape::optimize::{
    optimize_scheme, Objective, ObjectiveKind, OptimizationResult, OptimizeOptions, Param, SchemeTemplate, ZScan,
};
use attoshape::physics::{Setup, CONSTANTS};
use attoshape::propagation::{density_map, state_at, ModulationScheme, PhasePlate};

use crate::config::RunConfig;
use crate::output::{Axis, Bundle, Cell};

pub fn period_fs(setup: &Setup) -> f64 {
    setup.drive.period * 1e15
}

/// `ħω` in eV.
pub fn quantum_ev(setup: &Setup) -> f64 {
    CONSTANTS.reduced_planck * setup.drive.omega / CONSTANTS.elementary_charge.abs()
}

pub fn mm(setup: &Setup, zeta: f64) -> f64 {
    setup.zeta_to_metres(zeta) * 1e3
}

pub fn time_axis_fs(setup: &Setup, phases: &[f64]) -> Vec<f64> {
    phases.iter().map(|&p| setup.drive.time_of(p) * 1e15).collect()
}

pub fn talbot(config: &RunConfig, out: Option<&Path>) -> Result<()> {
    let s = &config.setup;
    let g = config.talbot_strength;
    let lf = paraxial_focus_zeta(g);
    let rows = [
        ("talbot_distance", 1.0),
        ("quarter_talbot_distance", 0.25),
        ("paraxial_focus", lf),
    ];
    println!(
        "beam {} eV (gamma {:.6}, beta {:.6}), wavelength {} m, period {:.4} fs",
        config.energy_ev,
        s.beam.gamma,
        s.beam.beta,
        config.wavelength,
        period_fs(s)
    );
    for (name, zeta) in rows {
        let label = if name == "paraxial_focus" {
            format!("{name} (g = {g})")
        } else {
            name.to_string()
        };
        println!("{label:<28} zeta = {zeta:<12.6} z = {:.6e} m = {:.4} mm", s.zeta_to_metres(zeta), mm(s, zeta));
    }
    if let Some(dir) = out {
        let mut b = Bundle::create(dir, "talbot")?;
        b.table(
            "talbot",
            "characteristic distances; zeta in Talbot lengths, z in m and mm",
            &["quantity", "zeta", "z_m", "z_mm"],
            rows.iter().map(|&(name, zeta)| {
                vec![
                    Cell::from(name),
                    Cell::from(zeta),
                    Cell::from(s.zeta_to_metres(zeta)),
                    Cell::from(mm(s, zeta)),
                ]
            }),
        )?;
        b.result("talbot_distance_m", s.talbot_length);
        b.result("paraxial_focus_zeta", lf);
        b.finish(&config.resolved)?;
    }
    Ok(())
}

/// Plate positions with their kind and strength.
pub fn plate_rows(setup: &Setup, scheme: &ModulationScheme) -> Vec<Vec<Cell>> {
    scheme
        .plate_positions()
        .into_iter()
        .map(|(z, p)| {
            let (kind, strength) = match p {
                PhasePlate::Harmonic { strength, .. } => ("harmonic", *strength),
                PhasePlate::Parabolic { strength } => ("parabolic", *strength),
                PhasePlate::Sampled(_) => ("sampled", f64::NAN),
            };
            vec![Cell::from(z), Cell::from(mm(setup, z)), Cell::from(kind), Cell::from(strength)]
        })
        .collect()
}

pub const PLATE_HEADER: [&str; 4] = ["zeta", "z_mm", "kind", "strength"];

/// Density map plus per-position duration and moments.
pub struct Evolution {
    pub positions: Vec<f64>,
    pub phases: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub states: Vec<WaveState>,
}

pub fn evolve(initial: &WaveState, scheme: &ModulationScheme, z_start: f64, z_end: f64, n_z: usize) -> Result<Evolution> {
    let map = density_map(initial, scheme, z_start, z_end, n_z)?;
    let states = map
        .positions
        .iter()
        .map(|&z| state_at(initial, scheme, z))
        .collect::<attoshape::Result<Vec<_>>>()?;
    Ok(Evolution {
        positions: map.positions,
        phases: map.phases,
        rows: map.rows,
        states,
    })
}

pub fn write_evolution(b: &mut Bundle, name: &str, what: &str, setup: &Setup, ev: &Evolution, orders: u32) -> Result<()> {
    b.grid(
        &format!("{name}_density"),
        &format!("{what}: probability density (unit mean) versus position and time"),
        Axis::new("zeta", ev.positions.clone()).with("z_mm", ev.positions.iter().map(|&z| mm(setup, z)).collect()),
        Axis::new("t_fs", time_axis_fs(setup, &ev.phases)).with("phase_rad", ev.phases.clone()),
        &ev.rows,
    )?;
    let mut header = vec!["zeta".to_string(), "z_mm".into(), "dt_fs".into()];
    for n in 1..=orders {
        header.push(format!("b{n}_abs"));
        header.push(format!("b{n}_arg"));
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let period = period_fs(setup);
    let rows = ev
        .positions
        .iter()
        .zip(&ev.states)
        .map(|(&z, s)| {
            let mut row = vec![z, mm(setup, z), rms_width(s)? * period];
            for b in moments(s, orders).values {
                row.push(b.norm());
                row.push(b.arg());
            }
            Ok(row)
        })
        .collect::<attoshape::Result<Vec<_>>>()?;
    b.table(
        &format!("{name}_metrics"),
        &format!("{what}: rms duration (fs) and bunching moments <b^n> (modulus, argument in rad)"),
        &header,
        rows,
    )
}

pub fn propagate(config: &RunConfig, out: &Path) -> Result<()> {
    let s = &config.setup;
    let scheme = config.scheme()?;
    let z_start = config.z_start.zeta(s);
    let z_end = match config.z_end {
        Some(d) => d.zeta(s),
        None => scheme.total_drift() + 0.02,
    };
    if !(z_end > z_start) {
        return Err(anyhow!("propagate.z_end ({z_end} zeta) must exceed propagate.z_start ({z_start} zeta)"));
    }
    let initial = uniform_state(&config.grid);
    let ev = evolve(&initial, &scheme, z_start, z_end, config.z_points)?;
    let mut b = Bundle::create(out, "propagate")?;
    write_evolution(&mut b, "propagate", "configured scheme", s, &ev, config.moments)?;
    b.table("plates", "phase plate positions", &PLATE_HEADER, plate_rows(s, &scheme))?;
    let (best, dt) = ev
        .states
        .iter()
        .zip(&ev.positions)
        .map(|(st, &z)| (z, rms_width(st).unwrap_or(f64::INFINITY)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    b.result("min_dt_fs", dt * period_fs(s));
    b.result("min_dt_zeta", best);
    b.result("min_dt_mm", mm(s, best));
    let path = b.finish(&config.resolved)?;
    println!(
        "propagated {} stages over zeta [{z_start}, {z_end}]; minimum rms duration {:.4} fs at zeta {best:.6}; manifest {}",
        scheme.stages().len(),
        dt * period_fs(s),
        path.display()
    );
    Ok(())
}

pub fn template_of(config: &RunConfig, main_strength: f64) -> Result<SchemeTemplate> {
    let o = &config.optimize;
    let mut t = SchemeTemplate::new(o.template.plates(), main_strength, o.final_plate)?;
    let free: Vec<Param> = t.free_parameters().iter().map(|f| f.0).collect();
    for &(p, lo, hi) in &o.bounds {
        if !free.contains(&p) {
            return Err(anyhow!("optimize.bounds.{p}: not a parameter of the {:?} template", o.template));
        }
        t = t.with_bounds(p, lo, hi)?;
    }
    for &(p, v) in &o.fixed {
        if !free.contains(&p) {
            return Err(anyhow!("optimize.fixed.{p}: not a parameter of the {:?} template", o.template));
        }
        t = t.fixed(p, v)?;
    }
    Ok(t)
}

fn objective_of(config: &RunConfig, main_strength: f64) -> Result<Objective> {
    let o = &config.optimize;
    let default = ZScan::default_for(main_strength);
    let scan = ZScan::new(0.0, o.scan_end.unwrap_or(default.end), o.scan_points)?;
    Ok(Objective::new(o.objective, scan))
}

fn options_of(config: &RunConfig) -> OptimizeOptions {
    OptimizeOptions {
        n_samples: config.grid.n_samples(),
        budget: config.optimize.budget,
        coarse_points: config.optimize.coarse_points,
        seeds: config.optimize.seeds,
    }
}

/// Objective value in output units: fs for durations, |<b^n>| otherwise.
pub fn objective_out(setup: &Setup, kind: ObjectiveKind, value: f64) -> f64 {
    match kind {
        ObjectiveKind::MinRmsDuration => value * period_fs(setup),
        ObjectiveKind::MaxBunching { .. } => value,
    }
}

fn objective_label(kind: ObjectiveKind) -> String {
    match kind {
        ObjectiveKind::MinRmsDuration => "dt_fs".into(),
        ObjectiveKind::MaxBunching { order } => format!("b{order}_abs"),
    }
}

fn trace_rows(setup: &Setup, r: &OptimizationResult, g: Option<f64>) -> Vec<Vec<f64>> {
    r.trace
        .iter()
        .map(|e| {
            let mut row: Vec<f64> = g.into_iter().collect();
            row.push(e.evaluation as f64);
            row.extend(&e.parameters);
            row.push(objective_out(setup, r.objective_kind, e.objective));
            row.push(e.focus);
            row
        })
        .collect()
}

pub fn optimize(config: &RunConfig, out: &Path) -> Result<()> {
    let s = &config.setup;
    let o = &config.optimize;
    let label = objective_label(o.objective);
    // validate every strength before the first optimization runs
    let strengths = o.g_values.clone().unwrap_or_else(|| vec![o.main_strength]);
    let jobs = strengths
        .iter()
        .map(|&g| Ok((g, template_of(config, g)?, objective_of(config, g)?)))
        .collect::<Result<Vec<_>>>()?;
    let options = options_of(config);

    let mut b = Bundle::create(out, "optimize")?;
    let mut exhausted = Vec::new();
    let mut results = Vec::new();
    for (g, template, objective) in &jobs {
        let r = optimize_scheme(template, objective, &options)?;
        if r.budget_exhausted {
            exhausted.push(*g);
        }
        results.push((*g, template.clone(), r));
    }

    let names: Vec<String> = results[0].2.free_parameters.iter().map(|p| p.name().to_string()).collect();
    let mut header = vec!["evaluation".to_string()];
    header.extend(names.iter().cloned());
    header.push(label.clone());
    header.push("focus_zeta".into());
    if o.g_values.is_some() {
        header.insert(0, "g".into());
    }
    let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
    let trace: Vec<Vec<f64>> = results
        .iter()
        .flat_map(|(g, _, r)| trace_rows(s, r, o.g_values.as_ref().map(|_| *g)))
        .collect();
    b.table(
        "trace",
        "every objective evaluation in order; focus_zeta is the drift after the main plate",
        &header_ref,
        trace,
    )?;

    let all_params = Param::ALL.iter().map(|p| p.name());
    let mut best_header = vec!["g"];
    best_header.extend(all_params);
    best_header.extend([label.as_str(), "focus_zeta", "focus_mm", "evaluations", "budget_exhausted"]);
    let best_rows: Vec<Vec<f64>> = results
        .iter()
        .map(|(g, _, r)| {
            let mut row = vec![*g];
            row.extend(Param::ALL.iter().map(|&p| r.best_parameters.get(p).unwrap_or(f64::NAN)));
            row.push(objective_out(s, r.objective_kind, r.best_objective));
            row.push(r.focus_position);
            row.push(mm(s, r.focus_position));
            row.push(r.evaluations() as f64);
            row.push(if r.budget_exhausted { 1.0 } else { 0.0 });
            row
        })
        .collect();
    b.table(
        "best",
        "best parameters per main strength (NaN: not part of the template); focus measured from the main plate",
        &best_header,
        best_rows,
    )?;

    for (g, _, r) in &results {
        let params: Vec<String> = r.best_parameters.0.iter().map(|(p, v)| format!("{p} = {v:.6}")).collect();
        println!(
            "g = {g}: {label} = {:.6}, focus zeta = {:.6} ({:.4} mm), {}, {} evaluations",
            objective_out(s, r.objective_kind, r.best_objective),
            r.focus_position,
            mm(s, r.focus_position),
            if params.is_empty() { "no free parameters".into() } else { params.join(", ") },
            r.evaluations()
        );
    }
    if let [(_, _, r)] = results.as_slice() {
        b.result(&label, objective_out(s, r.objective_kind, r.best_objective));
        b.result("focus_zeta", r.focus_position);
        for (p, v) in &r.best_parameters.0 {
            b.result(p.name(), v);
        }
    }
    if !exhausted.is_empty() {
        let list: Vec<String> = exhausted.iter().map(|g| g.to_string()).collect();
        eprintln!("warning: evaluation budget exhausted before convergence for g = {}", list.join(", "));
        b.result("warning", format!("budget exhausted before convergence for g = {}", list.join(", ")));
    }
    b.finish(&config.resolved)?;
    Ok(())
}

/// Template scheme for explicit parameters, as used by the figures.
pub fn fixed_scheme(g1d1: &[(f64, f64)], main: PhasePlate) -> Result<ModulationScheme> {
    let mut s = ModulationScheme::new();
    for &(g, d) in g1d1 {
        s = s.plate(PhasePlate::harmonic(g)).drift(d)?;
    }
    Ok(s.plate(main))
}
