//! Bounded multi-start gradient descent over diamond and diode parameters,
//! and resumable grid sweeps.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config_io::{append_checkpoint, format_float, read_checkpoint, Cell, Table};
use crate::constants::{photon_energy, NV_GYROMAGNETIC_HZ_PER_T};
use crate::error::{check_positive, Error, Result};
use crate::laser::slope_efficiency;
use crate::sensing::{
    sensitivity, spectrum_from_response, NoiseKind, NoiseModel, OdmrConfig, OperatingLimits, Region, SensorChain,
    ThresholdPair,
};

/// A chain parameter that can be optimised or swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Param {
    A,
    Gamma,
    R1,
    T2Star,
    DensityPpm,
    Intensity,
    RabiFrequency,
    AlphaC,
    Beta,
    Thickness,
}

impl Param {
    pub const ALL: [Param; 10] = [
        Param::A,
        Param::Gamma,
        Param::R1,
        Param::T2Star,
        Param::DensityPpm,
        Param::Intensity,
        Param::RabiFrequency,
        Param::AlphaC,
        Param::Beta,
        Param::Thickness,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::A => "a",
            Param::Gamma => "gamma",
            Param::R1 => "r1",
            Param::T2Star => "t2_star",
            Param::DensityPpm => "density_ppm",
            Param::Intensity => "intensity",
            Param::RabiFrequency => "rabi_frequency",
            Param::AlphaC => "alpha_c",
            Param::Beta => "beta",
            Param::Thickness => "thickness",
        }
    }

    /// Column name with unit.
    pub fn column(self) -> &'static str {
        match self {
            Param::A => "a_m2",
            Param::Gamma => "gamma",
            Param::R1 => "r1",
            Param::T2Star => "t2_star_s",
            Param::DensityPpm => "density_ppm",
            Param::Intensity => "intensity_w_m2",
            Param::RabiFrequency => "rabi_frequency_hz",
            Param::AlphaC => "alpha_c_per_m",
            Param::Beta => "beta",
            Param::Thickness => "thickness_m",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| Error::invalid("parameter", format!("unknown parameter `{name}`")))
    }

    /// Variables spanning decades are searched in log space.
    pub fn log_scaled(self) -> bool {
        matches!(
            self,
            Param::A | Param::T2Star | Param::DensityPpm | Param::Intensity | Param::RabiFrequency
        )
    }

    /// Whether changing this parameter changes the diamond response.
    pub fn affects_diamond(self) -> bool {
        matches!(
            self,
            Param::T2Star | Param::DensityPpm | Param::Intensity | Param::RabiFrequency | Param::Thickness
        )
    }

    pub fn get(self, chain: &SensorChain) -> f64 {
        match self {
            Param::A => chain.diode.a,
            Param::Gamma => chain.diode.gamma,
            Param::R1 => chain.cavity.r1,
            Param::T2Star => chain.nv.t2_star,
            Param::DensityPpm => chain.nv.density_ppm,
            Param::Intensity => chain.pump.intensity,
            Param::RabiFrequency => chain.pump.rabi_frequency,
            Param::AlphaC => chain.cavity.alpha_c,
            Param::Beta => chain.diode.beta,
            Param::Thickness => chain.nv.thickness,
        }
    }

    pub fn set(self, chain: &mut SensorChain, v: f64) {
        match self {
            Param::A => chain.diode.a = v,
            Param::Gamma => chain.diode.gamma = v,
            Param::R1 => chain.cavity.r1 = v,
            Param::T2Star => chain.nv.t2_star = v,
            Param::DensityPpm => chain.nv.density_ppm = v,
            Param::Intensity => chain.pump.intensity = v,
            Param::RabiFrequency => chain.pump.rabi_frequency = v,
            Param::AlphaC => chain.cavity.alpha_c = v,
            Param::Beta => chain.diode.beta = v,
            Param::Thickness => chain.nv.thickness = v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FreeVariable {
    pub param: Param,
    pub lower: f64,
    pub upper: f64,
}

impl FreeVariable {
    pub fn new(param: Param, lower: f64, upper: f64) -> Self {
        Self { param, lower, upper }
    }

    pub fn to_unit(self, v: f64) -> f64 {
        if self.param.log_scaled() {
            (v.ln() - self.lower.ln()) / (self.upper.ln() - self.lower.ln())
        } else {
            (v - self.lower) / (self.upper - self.lower)
        }
    }

    pub fn from_unit(self, z: f64) -> f64 {
        let z = z.clamp(0.0, 1.0);
        let v = if self.param.log_scaled() {
            (self.lower.ln() + z * (self.upper.ln() - self.lower.ln())).exp()
        } else {
            self.lower + z * (self.upper - self.lower)
        };
        v.clamp(self.lower, self.upper)
    }
}

/// Pump intensity of a uniform circular beam (W/m²).
pub fn beam_intensity(power: f64, diameter: f64) -> f64 {
    power / (std::f64::consts::PI * 0.25 * diameter * diameter)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationProblem {
    /// Starting chain; free variables overwrite their parameters.
    pub base: SensorChain,
    pub variables: Vec<FreeVariable>,
    pub limits: OperatingLimits,
    pub starts: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl OptimizationProblem {
    /// The global search: 500 µm diamond, Ω_R = 1 MHz, 200 mW pump in a
    /// 0.5 mm beam; free R1, Γ, T₂*, a and NV density.
    pub fn global_search(mut base: SensorChain, limits: OperatingLimits) -> Self {
        base.nv.thickness = 500e-6;
        base.pump.rabi_frequency = 1e6;
        base.pump.intensity = beam_intensity(0.2, 0.5e-3);
        Self {
            base,
            variables: vec![
                FreeVariable::new(Param::R1, 0.01, 0.99),
                FreeVariable::new(Param::Gamma, 0.01, 0.1),
                FreeVariable::new(Param::T2Star, 1e-7, 1e-5),
                FreeVariable::new(Param::A, 1e-22, 1e-17),
                FreeVariable::new(Param::DensityPpm, 1e-4, 100.0),
            ],
            limits,
            starts: 16,
            max_iterations: 500,
            tolerance: 1e-8,
        }
    }

    /// Removes a variable from the free set and pins its value.
    pub fn fix(&mut self, param: Param, value: f64) {
        self.variables.retain(|v| v.param != param);
        param.set(&mut self.base, value);
    }

    pub fn validate(&self) -> Result<()> {
        if self.variables.is_empty() {
            return Err(Error::invalid("variables", "no free variables"));
        }
        for (k, v) in self.variables.iter().enumerate() {
            check_positive("lower bound", v.lower)?;
            check_positive("upper bound", v.upper)?;
            if v.lower >= v.upper {
                return Err(Error::invalid("bounds", format!("{}: lower >= upper", v.param.name())));
            }
            if self.variables[..k].iter().any(|w| w.param == v.param) {
                return Err(Error::invalid("variables", format!("{} listed twice", v.param.name())));
            }
        }
        if self.starts == 0 {
            return Err(Error::invalid("starts", "need at least one start"));
        }
        check_positive("tolerance", self.tolerance)?;
        self.base.validate()
    }

    fn chain_at(&self, z: &[f64]) -> SensorChain {
        let mut c = self.base.clone();
        for (v, &zi) in self.variables.iter().zip(z) {
            v.param.set(&mut c, v.from_unit(zi));
        }
        c
    }
}

/// Threshold pair, region and optical-shot sensitivity at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointEvaluation {
    pub pair: ThresholdPair,
    pub region: Region,
    pub contrast: f64,
    /// Optical-shot-limited sensitivity (T/√Hz) from the closed-form
    /// Lorentzian slope; infinite when there is no threshold shift.
    pub sensitivity: f64,
}

/// Evaluates a chain with the Lorentzian closed form: the spectrum peak is
/// `A = η_o,on η_i (hc/qλ) ΔI_th`, the steepest slope `(3√3/4) A/f_l` and the
/// power there `3A/4`.
pub fn evaluate_point(chain: &SensorChain, limits: &OperatingLimits) -> Result<PointEvaluation> {
    chain.validate()?;
    let diamond = chain.diamond_response()?;
    let pair = chain.thresholds(&diamond)?;
    let amplitude = slope_efficiency(&chain.diode, pair.on.eta_o) * pair.delta();
    let sensitivity = if amplitude > 0.0 {
        let slope = 0.75 * 3f64.sqrt() * amplitude / chain.nv.linewidth();
        let sigma = (2.0 * photon_energy(chain.diode.wavelength) * 0.75 * amplitude * limits.bandwidth).sqrt();
        sigma / (slope * NV_GYROMAGNETIC_HZ_PER_T)
    } else {
        f64::INFINITY
    };
    Ok(PointEvaluation {
        pair,
        region: limits.classify(&pair),
        contrast: diamond.contrast,
        sensitivity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentOptions {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub relative_step: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-8,
            relative_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentResult {
    pub x: Vec<f64>,
    pub value: f64,
    /// Objective after each accepted step, starting with the initial value.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
}

fn fd_step(x: f64, relative_step: f64) -> f64 {
    relative_step * x.abs().max(1e-2)
}

/// Forward-difference gradient on the box `[lo, hi]`; steps that would
/// leave the box or hit an infeasible (infinite) value go backwards.
pub fn forward_gradient<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    fx: f64,
    lower: &[f64],
    upper: &[f64],
    relative_step: f64,
) -> (Vec<f64>, usize) {
    let mut g = vec![0.0; x.len()];
    let mut evals = 0;
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let h = fd_step(x[i], relative_step);
        let mut value = None;
        for dir in [1.0, -1.0] {
            let xi = x[i] + dir * h;
            if xi < lower[i] || xi > upper[i] {
                continue;
            }
            probe[i] = xi;
            let fv = f(&probe);
            evals += 1;
            if fv.is_finite() {
                value = Some((fv - fx) / (dir * h));
                break;
            }
        }
        probe[i] = x[i];
        g[i] = value.unwrap_or(0.0);
    }
    (g, evals)
}

/// Central-difference gradient, used to cross-check [`forward_gradient`].
pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], relative_step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = fd_step(x[i], relative_step);
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Projected gradient descent with Armijo backtracking on a box.
/// Infinite objective values mark infeasible points and are never accepted.
pub fn minimize_box<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &DescentOptions,
) -> Result<DescentResult> {
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(Error::invalid("bounds", "dimension mismatch"));
    }
    let project = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let mut x = x0.to_vec();
    project(&mut x);
    let mut fx = f(&x);
    let mut evaluations = 1;
    if !fx.is_finite() {
        return Err(Error::invalid("x0", "objective is not finite at the initial point"));
    }
    let mut trace = vec![fx];
    let mut step: f64 = 1.0;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let (g, e) = forward_gradient(f, &x, fx, lower, upper, opts.relative_step);
        evaluations += e;
        let mut accepted = None;
        let mut t = (step * 4.0).min(1e3);
        for _ in 0..60 {
            let mut cand: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - t * gi).collect();
            project(&mut cand);
            let decrease: f64 = g.iter().zip(x.iter().zip(&cand)).map(|(gi, (a, b))| gi * (a - b)).sum();
            if decrease <= 0.0 {
                break;
            }
            let fc = f(&cand);
            evaluations += 1;
            if fc.is_finite() && fc <= fx - 1e-4 * decrease {
                accepted = Some((cand, fc, t));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc, t)) = accepted else { break };
        let change = (fx - fc).abs() / fx.abs().max(1e-300);
        x = cand;
        fx = fc;
        step = t;
        trace.push(fx);
        if change < opts.tolerance {
            break;
        }
    }
    Ok(DescentResult {
        x,
        value: fx,
        trace,
        iterations,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    /// Optimum as `(parameter, value)` pairs in problem order.
    pub best: Vec<(Param, f64)>,
    /// Optical-shot-limited sensitivity at the optimum (T/√Hz).
    pub sensitivity: f64,
    /// Sensitivity after each accepted step of the winning start.
    pub trace: Vec<f64>,
    pub evaluation: PointEvaluation,
    /// Threshold current within 1% of the drive limit.
    pub current_limit_active: bool,
    /// Threshold shift within 1% of the shot-noise floor.
    pub shot_noise_limit_active: bool,
    pub start_index: usize,
    pub iterations: usize,
    pub evaluations: usize,
    pub feasible_starts: usize,
}

impl OptimizationResult {
    pub fn value(&self, param: Param) -> Option<f64> {
        self.best.iter().find(|(p, _)| *p == param).map(|(_, v)| *v)
    }
}

/// Latin-stratified sample of `count` points in the unit cube.
pub fn latin_starts(dim: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; dim]; count];
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..count).collect();
        strata.shuffle(rng);
        for (p, s) in points.iter_mut().zip(strata) {
            p[d] = (s as f64 + rng.gen::<f64>()) / count as f64;
        }
    }
    points
}

/// Extra Latin batches drawn when no start of a batch is feasible.
const START_BATCHES: usize = 16;

/// Multi-start projected gradient descent on `ln δB`.
pub fn optimize(problem: &OptimizationProblem, seed: u64) -> Result<OptimizationResult> {
    problem.validate()?;
    let dim = problem.variables.len();
    let limits = problem.limits;
    let objective = |z: &[f64]| -> f64 {
        match evaluate_point(&problem.chain_at(z), &limits) {
            Ok(e) if e.region == Region::B && e.sensitivity.is_finite() => e.sensitivity.ln(),
            _ => f64::INFINITY,
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut starts = Vec::new();
    let (mut over_current, mut below_noise, mut failed) = (0usize, 0usize, 0usize);
    let mut attempts = 0;
    for _ in 0..START_BATCHES {
        for z in latin_starts(dim, problem.starts, &mut rng) {
            attempts += 1;
            match evaluate_point(&problem.chain_at(&z), &limits) {
                Ok(e) if e.region == Region::B && e.sensitivity.is_finite() => starts.push(z),
                Ok(e) if e.region == Region::C => over_current += 1,
                Ok(_) => below_noise += 1,
                Err(_) => failed += 1,
            }
        }
        if !starts.is_empty() {
            break;
        }
    }
    if starts.is_empty() {
        return Err(Error::NoFeasibleStart {
            attempts,
            violations: format!(
                "threshold above {} A: {over_current}; threshold shift below shot noise: {below_noise}; evaluation errors: {failed}",
                limits.max_current
            ),
        });
    }

    let opts = DescentOptions {
        max_iterations: problem.max_iterations,
        tolerance: problem.tolerance,
        relative_step: 1e-4,
    };
    let lower = vec![0.0; dim];
    let upper = vec![1.0; dim];
    let runs = crate::par_map(starts.len(), |k| minimize_box(&objective, &starts[k], &lower, &upper, &opts));
    let mut best: Option<(usize, DescentResult)> = None;
    let mut evaluations = 0;
    for (k, run) in runs.into_iter().enumerate() {
        let run = run?;
        evaluations += run.evaluations;
        if best.as_ref().is_none_or(|(_, b)| run.value < b.value) {
            best = Some((k, run));
        }
    }
    let (start_index, run) = best.expect("at least one start");
    let chain = problem.chain_at(&run.x);
    let evaluation = evaluate_point(&chain, &limits)?;
    let floor = limits.shot_noise_floor(evaluation.pair.off.i_th);
    Ok(OptimizationResult {
        best: problem
            .variables
            .iter()
            .map(|v| (v.param, v.param.get(&chain)))
            .collect(),
        sensitivity: evaluation.sensitivity,
        trace: run.trace.iter().map(|v| v.exp()).collect(),
        evaluation,
        current_limit_active: evaluation.pair.off.i_th >= 0.99 * limits.max_current,
        shot_noise_limit_active: evaluation.pair.delta() <= 1.01 * floor,
        start_index,
        iterations: run.iterations,
        evaluations,
        feasible_starts: starts.len(),
    })
}

/// Column names of a sweep table after the variable columns.
pub const SWEEP_COLUMNS: [&str; 7] = [
    "i_th_off_a",
    "delta_i_th_a",
    "contrast",
    "sensitivity_optical_t",
    "sensitivity_current_t",
    "region",
    "error",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variables: Vec<(Param, Vec<f64>)>,
    pub budget: usize,
}

impl SweepSpec {
    pub fn cells(&self) -> usize {
        self.variables.iter().map(|(_, g)| g.len()).product()
    }

    /// Grid values of cell `index`; the last variable varies fastest.
    pub fn point(&self, mut index: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.variables.len()];
        for (slot, (_, grid)) in out.iter_mut().zip(&self.variables).rev() {
            *slot = grid[index % grid.len()];
            index /= grid.len();
        }
        out
    }
}

fn sweep_cell(base: &SensorChain, limits: &OperatingLimits, spec: &SweepSpec, index: usize) -> Vec<Cell> {
    let point = spec.point(index);
    let mut chain = base.clone();
    for ((p, _), &v) in spec.variables.iter().zip(&point) {
        p.set(&mut chain, v);
    }
    let mut row: Vec<Cell> = point.iter().map(|&v| Cell::Num(v)).collect();
    let eval = || -> Result<[Cell; 6]> {
        chain.validate()?;
        let diamond = chain.diamond_response()?;
        let pair = chain.thresholds(&diamond)?;
        let config = OdmrConfig::for_system(&chain.nv);
        let spectrum = spectrum_from_response(&chain, &diamond, &config)?;
        let sens = |kind| {
            sensitivity(&spectrum, &NoiseModel { kind, bandwidth: limits.bandwidth }, chain.diode.wavelength)
                .map_or(f64::INFINITY, |r| r.sensitivity)
        };
        Ok([
            Cell::Num(pair.off.i_th),
            Cell::Num(pair.delta()),
            Cell::Num(diamond.contrast),
            Cell::Num(sens(NoiseKind::OpticalShot)),
            Cell::Num(sens(NoiseKind::CurrentShot)),
            Cell::from(limits.classify(&pair).label()),
        ])
    };
    match eval() {
        Ok(cells) => {
            row.extend(cells);
            row.push(Cell::from(""));
        }
        Err(e) => {
            row.extend((0..5).map(|_| Cell::Num(f64::NAN)));
            row.push(Cell::from(""));
            row.push(Cell::from(e.to_string()));
        }
    }
    row
}

/// Row-major sweep over named grids. Cell failures are recorded in the
/// `error` column. With a checkpoint path, finished cells are appended as
/// they complete and skipped on the next run.
pub fn sweep(base: &SensorChain, limits: &OperatingLimits, spec: &SweepSpec, checkpoint: Option<&Path>) -> Result<Table> {
    if spec.variables.is_empty() {
        return Err(Error::invalid("variables", "sweep needs at least one variable"));
    }
    for (p, grid) in &spec.variables {
        if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid", format!("{}: empty or non-finite grid", p.name())));
        }
    }
    let cells = spec.cells();
    if cells > spec.budget {
        return Err(Error::Budget {
            cells,
            budget: spec.budget,
        });
    }
    let mut columns: Vec<String> = spec.variables.iter().map(|(p, _)| p.column().to_string()).collect();
    columns.extend(SWEEP_COLUMNS.iter().map(|c| c.to_string()));
    let width = columns.len();

    let mut done = match checkpoint {
        Some(p) => read_checkpoint(p)?,
        None => Default::default(),
    };
    done.retain(|&k, fields| k < cells && fields.len() == width);
    let pending: Vec<usize> = (0..cells).filter(|k| !done.contains_key(k)).collect();
    const CHUNK: usize = 64;
    for chunk in pending.chunks(CHUNK) {
        let rows = crate::par_map(chunk.len(), |k| sweep_cell(base, limits, spec, chunk[k]));
        for (&index, row) in chunk.iter().zip(rows) {
            let fields: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Num(v) => format_float(*v),
                    Cell::Text(t) => t.clone(),
                })
                .collect();
            if let Some(p) = checkpoint {
                append_checkpoint(p, index, &fields)?;
            }
            done.insert(index, fields);
        }
    }

    let mut table = Table::new(columns);
    for (_, fields) in done {
        let row = fields
            .into_iter()
            .enumerate()
            .map(|(k, f)| {
                // label and error columns stay text even when numeric-looking
                if k >= width - 2 {
                    Cell::Text(f)
                } else {
                    f.parse::<f64>().map_or(Cell::Text(f), Cell::Num)
                }
            })
            .collect();
        table.push(row)?;
    }
    Ok(table)
}
