//! Optimization of scheme parameters against rms duration or bunching.
//!
//! Every candidate scheme is scored at its best focus: the state after the
//! final plate is drifted over a `ζ` scan and the best sample is refined by
//! golden-section search. The outer search is a coarse grid over the free
//! parameters followed by Nelder-Mead refinement from the best grid points.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::classical::paraxial_focus_zeta;
use crate::error::{domain, Result};
use crate::grid::{uniform_state, TemporalGrid, WaveState, DEFAULT_SAMPLES};
use crate::metrics::{bunching_moment, rms_width};
use crate::propagation::{drift_sidebands, propagate_scheme, ModulationScheme, PhasePlate};
use crate::simplex::{self, SimplexOptions};

/// Golden-section stopping width in `ζ`.
pub const FOCUS_TOLERANCE: f64 = 1e-6;
/// Coarse-scan values closer than this count as ties.
pub const TIE_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_BUDGET: usize = 2000;
pub const DEFAULT_COARSE_POINTS: usize = 16;

const BAND_TAIL: f64 = 1e-16;
const MAX_COMPACT_BAND: i64 = 256;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ObjectiveKind {
    MinRmsDuration,
    MaxBunching { order: u32 },
}

impl ObjectiveKind {
    /// Loss to minimize for an objective value.
    fn loss(&self, value: f64) -> f64 {
        match self {
            ObjectiveKind::MinRmsDuration => value,
            ObjectiveKind::MaxBunching { .. } => -value,
        }
    }
}

/// Drift distances (Talbot lengths, relative to the last plate) scanned for
/// the focus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZScan {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl ZScan {
    pub fn new(start: f64, end: f64, points: usize) -> Result<Self> {
        if !(start >= 0.0) || !(end > start) || !end.is_finite() {
            return domain(format!("invalid z scan [{start}, {end}]"));
        }
        if points < 3 {
            return domain("z scan needs at least three points");
        }
        Ok(Self { start, end, points })
    }

    /// `[0, 4 l_f]` for main strength `g`, capped at half a Talbot length
    /// but never shorter than `2 l_f`.
    pub fn default_for(main_strength: f64) -> Self {
        let lf = paraxial_focus_zeta(main_strength.abs().max(1e-6));
        let end = if 4.0 * lf <= 0.5 {
            4.0 * lf
        } else {
            (2.0 * lf).max(0.5)
        };
        Self {
            start: 0.0,
            end,
            points: 161,
        }
    }

    fn covers_focus_of(&self, main_strength: f64) -> bool {
        let lf = paraxial_focus_zeta(main_strength.abs());
        self.start <= 1e-12 && self.end >= 2.0 * lf * (1.0 - 1e-12)
    }

    fn samples(&self) -> Vec<f64> {
        let step = (self.end - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + step * i as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub z_scan: ZScan,
}

impl Objective {
    pub fn new(kind: ObjectiveKind, z_scan: ZScan) -> Self {
        Self { kind, z_scan }
    }

    pub fn with_default_scan(kind: ObjectiveKind, main_strength: f64) -> Self {
        Self {
            kind,
            z_scan: ZScan::default_for(main_strength),
        }
    }
}

/// Evaluates the objective of a state after an extra drift `ζ`.
///
/// Works on the occupied sideband band when it is narrow: bunching in
/// `O(K)` and the rms width from the density's Fourier series in `O(K²)`.
/// Wide spectra (parabolic plates) fall back to the full grid.
pub struct FocusEvaluator {
    kind: ObjectiveKind,
    mode: Mode,
}

enum Mode {
    Band {
        lowest: i64,
        coefficients: Vec<Complex64>,
    },
    Grid {
        state: WaveState,
        sidebands: Vec<Complex64>,
    },
}

impl FocusEvaluator {
    pub fn new(state: &WaveState, kind: ObjectiveKind) -> Self {
        let grid = state.grid();
        let sb = state.sidebands();
        let norm: f64 = sb.iter().map(|c| c.norm_sqr()).sum();
        let half = (grid.n_samples() / 2) as i64;
        // smallest symmetric band holding all but BAND_TAIL of the population
        let mut by_radius = vec![0.0; half as usize + 1];
        for (k, c) in sb.iter().enumerate() {
            let r = grid.sideband_of_slot(k).unsigned_abs() as usize;
            by_radius[r.min(half as usize)] += c.norm_sqr() / norm;
        }
        let mut tail = 0.0;
        let mut radius = half;
        while radius > 0 && tail + by_radius[radius as usize] < BAND_TAIL {
            tail += by_radius[radius as usize];
            radius -= 1;
        }
        let mode = if radius <= MAX_COMPACT_BAND && radius < half {
            let scale = 1.0 / norm.sqrt();
            Mode::Band {
                lowest: -radius,
                coefficients: (-radius..=radius)
                    .map(|n| sb[grid.slot_of_sideband(n)] * scale)
                    .collect(),
            }
        } else {
            Mode::Grid {
                state: state.clone(),
                sidebands: sb,
            }
        };
        Self { kind, mode }
    }

    /// Objective value: rms width in periods, or `|⟨bⁿ⟩|`.
    pub fn value(&self, zeta: f64) -> f64 {
        match &self.mode {
            Mode::Band {
                lowest,
                coefficients,
            } => {
                let drifted: Vec<Complex64> = coefficients
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| c * crate::propagation::drift_factor(lowest + i as i64, zeta))
                    .collect();
                match self.kind {
                    ObjectiveKind::MaxBunching { order } => density_coefficient(&drifted, order as usize).norm(),
                    ObjectiveKind::MinRmsDuration => {
                        // ⟨θ²⟩ = π²/3 + 4 Σ_k (−1)^k Re r_k / k²
                        let mut second = PI * PI / 3.0;
                        for k in 1..drifted.len() {
                            let r = density_coefficient(&drifted, k).re;
                            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                            second += 4.0 * sign * r / (k * k) as f64;
                        }
                        second.max(0.0).sqrt() / (2.0 * PI)
                    }
                }
            }
            Mode::Grid { state, sidebands } => {
                let grid = state.grid();
                let sb = drift_sidebands(grid, sidebands, zeta);
                let s = WaveState::from_sidebands(grid.clone(), &sb, state.position() + zeta)
                    .expect("same grid");
                match self.kind {
                    ObjectiveKind::MaxBunching { order } => bunching_moment(&s, order).norm(),
                    ObjectiveKind::MinRmsDuration => rms_width(&s).expect("normalized state"),
                }
            }
        }
    }
}

/// `r_k = Σ_m d_{m+k} d_m*`, the k-th Fourier coefficient of the density.
fn density_coefficient(d: &[Complex64], k: usize) -> Complex64 {
    if k >= d.len() {
        return Complex64::new(0.0, 0.0);
    }
    d[k..]
        .iter()
        .zip(d.iter())
        .map(|(a, b)| a * b.conj())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusScan {
    /// Drift from the input state to the focus, Talbot lengths.
    pub zeta: f64,
    /// Absolute position of the focus.
    pub position: f64,
    pub value: f64,
    /// Golden-section refinement left the grid optimum; grid best returned.
    pub multimodal: bool,
    /// Objective constant over the scan.
    pub degenerate: bool,
    pub evaluations: usize,
}

/// Scans the objective over `objective.z_scan` and refines the best
/// bracket by golden-section search.
pub fn scan_focus(state: &WaveState, objective: &Objective) -> FocusScan {
    let evaluator = FocusEvaluator::new(state, objective.kind);
    scan_with(&evaluator, state.position(), objective)
}

fn scan_with(evaluator: &FocusEvaluator, origin: f64, objective: &Objective) -> FocusScan {
    let kind = objective.kind;
    let zs = objective.z_scan.samples();
    let values: Vec<f64> = zs.iter().map(|&z| evaluator.value(z)).collect();
    let losses: Vec<f64> = values.iter().map(|&v| kind.loss(v)).collect();
    let mut evaluations = zs.len();

    let mut best = 0;
    for (i, &l) in losses.iter().enumerate() {
        if l < losses[best] {
            best = i;
        }
    }
    let (lo, hi) = losses
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &l| (a.min(l), b.max(l)));
    if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
        return FocusScan {
            zeta: zs[0],
            position: origin + zs[0],
            value: values[0],
            multimodal: false,
            degenerate: true,
            evaluations,
        };
    }

    let mut a = zs[best.saturating_sub(1)];
    let mut b = zs[(best + 1).min(zs.len() - 1)];
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = kind.loss(evaluator.value(c));
    let mut fd = kind.loss(evaluator.value(d));
    evaluations += 2;
    while b - a > FOCUS_TOLERANCE {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = kind.loss(evaluator.value(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = kind.loss(evaluator.value(d));
        }
        evaluations += 1;
    }
    let (z_ref, l_ref) = if fc <= fd { (c, fc) } else { (d, fd) };
    if l_ref <= losses[best] {
        FocusScan {
            zeta: z_ref,
            position: origin + z_ref,
            value: kind.loss(l_ref),
            multimodal: false,
            degenerate: false,
            evaluations,
        }
    } else {
        FocusScan {
            zeta: zs[best],
            position: origin + zs[best],
            value: values[best],
            multimodal: true,
            degenerate: false,
            evaluations,
        }
    }
}

/// Precompression parameters of a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Param {
    G1,
    D1,
    G2,
    D2,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::G1, Param::D1, Param::G2, Param::D2];

    pub fn name(&self) -> &'static str {
        match self {
            Param::G1 => "g1",
            Param::D1 => "d1",
            Param::G2 => "g2",
            Param::D2 => "d2",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Param::ALL.into_iter().find(|p| p.name() == name)
    }

    fn is_strength(&self) -> bool {
        matches!(self, Param::G1 | Param::G2)
    }

    /// Admissible range: strengths in `[0, 1.5]`, distances in `[0, 0.5]`.
    pub fn limits(&self) -> (f64, f64) {
        if self.is_strength() {
            (0.0, 1.5)
        } else {
            (0.0, 0.5)
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinalPlate {
    Harmonic,
    /// The main compression is an ideal parabolic phase instead of the
    /// harmonic one.
    Parabolic,
}

/// One, two or three plates: `[g1, d1, g2, d2,] g` with the main strength
/// fixed. Each precompression parameter has bounds; equal bounds fix it.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeTemplate {
    n_plates: usize,
    main_strength: f64,
    final_plate: FinalPlate,
    bounds: Vec<(Param, f64, f64)>,
}

impl SchemeTemplate {
    pub fn new(n_plates: usize, main_strength: f64, final_plate: FinalPlate) -> Result<Self> {
        if !(1..=3).contains(&n_plates) {
            return domain(format!("templates have 1 to 3 plates, got {n_plates}"));
        }
        if !(main_strength > 0.0) || !main_strength.is_finite() {
            return domain(format!("main strength must be positive, got {main_strength}"));
        }
        let bounds = Self::params_for(n_plates)
            .iter()
            .map(|&p| {
                let (lo, hi) = p.limits();
                (p, lo, hi)
            })
            .collect();
        Ok(Self {
            n_plates,
            main_strength,
            final_plate,
            bounds,
        })
    }

    pub fn single(main_strength: f64) -> Result<Self> {
        Self::new(1, main_strength, FinalPlate::Harmonic)
    }

    pub fn dual(main_strength: f64) -> Result<Self> {
        Self::new(2, main_strength, FinalPlate::Harmonic)
    }

    pub fn triple(main_strength: f64) -> Result<Self> {
        Self::new(3, main_strength, FinalPlate::Harmonic)
    }

    fn params_for(n_plates: usize) -> &'static [Param] {
        match n_plates {
            1 => &[],
            2 => &[Param::G1, Param::D1],
            _ => &[Param::G1, Param::D1, Param::G2, Param::D2],
        }
    }

    /// Restricts a parameter to `[lower, upper]` within its admissible range.
    pub fn with_bounds(mut self, param: Param, lower: f64, upper: f64) -> Result<Self> {
        let (lo, hi) = param.limits();
        if !(lower >= lo && upper <= hi && lower <= upper) {
            return domain(format!(
                "bounds [{lower}, {upper}] for {param} must lie within [{lo}, {hi}]"
            ));
        }
        match self.bounds.iter_mut().find(|b| b.0 == param) {
            Some(b) => {
                b.1 = lower;
                b.2 = upper;
                Ok(self)
            }
            None => domain(format!("{param} is not a parameter of a {}-plate template", self.n_plates)),
        }
    }

    pub fn fixed(self, param: Param, value: f64) -> Result<Self> {
        self.with_bounds(param, value, value)
    }

    pub fn n_plates(&self) -> usize {
        self.n_plates
    }

    pub fn main_strength(&self) -> f64 {
        self.main_strength
    }

    pub fn final_plate(&self) -> FinalPlate {
        self.final_plate
    }

    pub fn with_main_strength(&self, main_strength: f64) -> Result<Self> {
        let mut t = Self::new(self.n_plates, main_strength, self.final_plate)?;
        t.bounds = self.bounds.clone();
        Ok(t)
    }

    pub fn bounds(&self) -> &[(Param, f64, f64)] {
        &self.bounds
    }

    pub fn free_parameters(&self) -> Vec<(Param, f64, f64)> {
        self.bounds.iter().copied().filter(|b| b.2 > b.1).collect()
    }

    fn main_plate(&self) -> PhasePlate {
        match self.final_plate {
            FinalPlate::Harmonic => PhasePlate::harmonic(self.main_strength),
            FinalPlate::Parabolic => PhasePlate::parabolic(self.main_strength),
        }
    }

    /// Scheme up to and including the main plate (no trailing drift).
    pub fn scheme(&self, values: &ParameterSet) -> Result<ModulationScheme> {
        let get = |p: Param| values.get(p).unwrap_or(0.0);
        let mut s = ModulationScheme::new();
        if self.n_plates >= 2 {
            s = s.plate(PhasePlate::harmonic(get(Param::G1))).drift(get(Param::D1))?;
        }
        if self.n_plates == 3 {
            s = s.plate(PhasePlate::harmonic(get(Param::G2))).drift(get(Param::D2))?;
        }
        Ok(s.plate(self.main_plate()))
    }

    fn assemble(&self, free: &[(Param, f64, f64)], x: &[f64]) -> ParameterSet {
        let mut values: Vec<(Param, f64)> = self.bounds.iter().map(|b| (b.0, b.1)).collect();
        for ((p, _, _), &v) in free.iter().zip(x) {
            values.iter_mut().find(|e| e.0 == *p).unwrap().1 = v;
        }
        ParameterSet(values)
    }
}

/// Named parameter values.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet(pub Vec<(Param, f64)>);

impl ParameterSet {
    pub fn get(&self, p: Param) -> Option<f64> {
        self.0.iter().find(|e| e.0 == p).map(|e| e.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOptions {
    pub n_samples: usize,
    /// Maximum number of candidate evaluations (propagation + focus scan).
    pub budget: usize,
    /// Coarse grid points per free dimension; reduced when the grid would
    /// use more than half the budget.
    pub coarse_points: usize,
    /// Simplex refinements started from the best coarse points.
    pub seeds: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            n_samples: DEFAULT_SAMPLES,
            budget: DEFAULT_BUDGET,
            coarse_points: DEFAULT_COARSE_POINTS,
            seeds: 3,
        }
    }
}

impl OptimizeOptions {
    fn points_per_dimension(&self, dims: usize) -> usize {
        if dims == 0 {
            return 1;
        }
        let mut p = self.coarse_points.max(2);
        while p > 2 && p.pow(dims as u32) > self.budget / 2 {
            p -= 1;
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub evaluation: usize,
    /// Values of the free parameters, in template order.
    pub parameters: Vec<f64>,
    pub objective: f64,
    pub focus: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult {
    pub objective_kind: ObjectiveKind,
    pub free_parameters: Vec<Param>,
    pub best_parameters: ParameterSet,
    pub best_objective: f64,
    /// Drift from the main plate to the focus, Talbot lengths.
    pub focus_position: f64,
    pub trace: Vec<TraceEntry>,
    pub budget_exhausted: bool,
}

impl OptimizationResult {
    pub fn evaluations(&self) -> usize {
        self.trace.len()
    }
}

struct Evaluation {
    loss: f64,
    value: f64,
    focus: f64,
}

fn evaluate(
    template: &SchemeTemplate,
    objective: &Objective,
    grid: &TemporalGrid,
    values: &ParameterSet,
) -> Result<Evaluation> {
    let scheme = template.scheme(values)?;
    let state = propagate_scheme(&uniform_state(grid), &scheme)?;
    let evaluator = FocusEvaluator::new(&state, objective.kind);
    let scan = scan_with(&evaluator, state.position(), objective);
    Ok(Evaluation {
        loss: objective.kind.loss(scan.value),
        value: scan.value,
        focus: scan.zeta,
    })
}

/// Coarse grid over the free parameters, then Nelder-Mead refinement.
/// Deterministic for fixed inputs.
pub fn optimize_scheme(
    template: &SchemeTemplate,
    objective: &Objective,
    options: &OptimizeOptions,
) -> Result<OptimizationResult> {
    if !objective.z_scan.covers_focus_of(template.main_strength) {
        return domain(format!(
            "z scan [{}, {}] must cover [0, 2 l_f] = [0, {}]",
            objective.z_scan.start,
            objective.z_scan.end,
            2.0 * paraxial_focus_zeta(template.main_strength)
        ));
    }
    if options.budget == 0 {
        return domain("optimization budget must be positive");
    }
    let grid = TemporalGrid::new(options.n_samples)?;
    let free = template.free_parameters();
    let dims = free.len();
    let mut trace: Vec<TraceEntry> = Vec::new();

    // coarse grid, lexicographic order
    let p = options.points_per_dimension(dims);
    let total = p.pow(dims as u32);
    let candidates: Vec<Vec<f64>> = (0..total)
        .map(|mut idx| {
            let mut x = vec![0.0; dims];
            for d in (0..dims).rev() {
                x[d] = if p > 1 { (idx % p) as f64 / (p - 1) as f64 } else { 0.0 };
                idx /= p;
            }
            x
        })
        .collect();
    let to_values = |x: &[f64]| -> Vec<f64> {
        free.iter()
            .zip(x)
            .map(|(&(_, lo, hi), &u)| lo + u * (hi - lo))
            .collect()
    };
    let evaluations: Vec<Evaluation> = candidates
        .par_iter()
        .map(|x| evaluate(template, objective, &grid, &template.assemble(&free, &to_values(x))))
        .collect::<Result<_>>()?;
    for (x, e) in candidates.iter().zip(&evaluations) {
        trace.push(TraceEntry {
            evaluation: trace.len(),
            parameters: to_values(x),
            objective: e.value,
            focus: e.focus,
        });
    }

    // seeds: best losses, ties resolved towards the smallest parameter vector
    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| {
        let (la, lb) = (evaluations[a].loss, evaluations[b].loss);
        if (la - lb).abs() <= TIE_TOLERANCE {
            a.cmp(&b)
        } else {
            la.total_cmp(&lb)
        }
    });
    let best_loss = evaluations[order[0]].loss;
    let head = order
        .iter()
        .copied()
        .filter(|&i| evaluations[i].loss <= best_loss + TIE_TOLERANCE)
        .min()
        .unwrap();
    let mut seeds = vec![head];
    seeds.extend(order.iter().copied().filter(|&i| i != head).take(options.seeds.saturating_sub(1)));

    let mut budget_exhausted = false;
    if dims > 0 {
        let step = 0.5 / (p - 1).max(1) as f64;
        for (s, &seed) in seeds.iter().enumerate() {
            let remaining = options.budget.saturating_sub(trace.len());
            if remaining == 0 {
                budget_exhausted = true;
                break;
            }
            let share = remaining / (seeds.len() - s);
            let opts = SimplexOptions {
                max_evals: share,
                initial_step: step,
                ..Default::default()
            };
            let mut failure = None;
            let result = simplex::minimize(
                |x| {
                    let values = to_values(x);
                    match evaluate(template, objective, &grid, &template.assemble(&free, &values)) {
                        Ok(e) => {
                            trace.push(TraceEntry {
                                evaluation: trace.len(),
                                parameters: values,
                                objective: e.value,
                                focus: e.focus,
                            });
                            e.loss
                        }
                        Err(err) => {
                            failure.get_or_insert(err);
                            f64::INFINITY
                        }
                    }
                },
                &candidates[seed],
                &opts,
            );
            if let Some(err) = failure {
                return Err(err);
            }
            if !result.converged {
                budget_exhausted = true;
            }
        }
    }

    let best = trace
        .iter()
        .enumerate()
        .min_by(|a, b| {
            objective
                .kind
                .loss(a.1.objective)
                .total_cmp(&objective.kind.loss(b.1.objective))
                .then(a.0.cmp(&b.0))
        })
        .map(|(i, _)| i)
        .unwrap();
    let entry = &trace[best];
    Ok(OptimizationResult {
        objective_kind: objective.kind,
        free_parameters: free.iter().map(|f| f.0).collect(),
        best_parameters: template.assemble(&free, &entry.parameters),
        best_objective: entry.objective,
        focus_position: entry.focus,
        budget_exhausted,
        trace,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DurationPoint {
    pub main_strength: f64,
    /// Minimized rms width in periods.
    pub width: f64,
    pub result: OptimizationResult,
}

/// Minimized rms duration as a function of the main strength, each point
/// with a full optimization of the template's free parameters.
pub fn duration_curve(
    template: &SchemeTemplate,
    g_values: &[f64],
    options: &OptimizeOptions,
) -> Result<Vec<DurationPoint>> {
    g_values
        .par_iter()
        .map(|&g| {
            if !(g > 0.0) {
                return domain(format!("main strengths must be positive, got {g}"));
            }
            let t = template.with_main_strength(g)?;
            let objective = Objective::with_default_scan(ObjectiveKind::MinRmsDuration, g);
            let result = optimize_scheme(&t, &objective, options)?;
            Ok(DurationPoint {
                main_strength: g,
                width: result.best_objective,
                result,
            })
        })
        .collect()
}
