//! Property checks shared by the proptest suite and the acceptance report.
#![allow(dead_code)]

use nalgebra::SMatrix;
use nvlaser_core::config_io::{load_scenario, Cell, Table};
use nvlaser_core::laser::{output_power_analytic, solve_steady_state, threshold_current, DiodeParams, GainModel};
use nvlaser_core::nv_levels::{
    build_rate_matrix, solve_occupancies, NvLevelIndex, NvSystem, PumpCondition, RateConstantSet,
};
use nvlaser_core::optimize::{optimize, OptimizationProblem, Param};
use nvlaser_core::sensing::{lorentzian_max_slope, max_slope, OdmrSpectrum, SpectrumMetadata};

/// Random rate set: every dark rate and cross section of the default set
/// scaled by `10^k` for the matching entry of `scales` (range about ±1).
#[derive(Debug, Clone)]
pub struct RatePoint {
    pub scales: [f64; 19],
    pub intensity: f64,
    pub rabi: f64,
    pub t2_star: f64,
}

const DARK: [(u8, u8); 11] = [
    (3, 1),
    (4, 2),
    (3, 5),
    (4, 5),
    (5, 6),
    (6, 1),
    (6, 2),
    (8, 7),
    (1, 2),
    (2, 1),
    (7, 1),
];

pub fn system_at(p: &RatePoint) -> (NvSystem, PumpCondition) {
    let mut rates = RateConstantSet::literature_default();
    for (k, &(from, to)) in DARK.iter().enumerate() {
        let (f, t) = (NvLevelIndex::new(from).unwrap(), NvLevelIndex::new(to).unwrap());
        let r = rates.dark_rate(f, t) * 10f64.powf(p.scales[k]);
        rates.set_dark_rate(f, t, r).unwrap();
    }
    let s = &p.scales[11..];
    rates.absorption_nvm *= 10f64.powf(s[0]);
    rates.absorption_nv0 *= 10f64.powf(s[1]);
    rates.absorption_ionisation *= 10f64.powf(s[2]);
    rates.absorption_recombination *= 10f64.powf(s[3]);
    rates.pump_nvm *= 10f64.powf(s[4]);
    rates.pump_nv0 *= 10f64.powf(s[5]);
    rates.pump_ionisation *= 10f64.powf(s[6]);
    rates.pump_recombination *= 10f64.powf(s[7]);
    let sys = NvSystem::new(10.0, p.t2_star, 5e-4, rates).unwrap();
    let pump = PumpCondition::new(p.intensity, p.rabi, true).unwrap();
    (sys, pump)
}

/// Occupancies sum to one within `1e-12` and are non-negative.
pub fn check_normalisation(p: &RatePoint) -> Result<(), String> {
    let (sys, pump) = system_at(p);
    for on in [false, true] {
        let m = build_rate_matrix(&sys, &pump.with_microwaves(on)).map_err(|e| e.to_string())?;
        let occ = solve_occupancies(&m).map_err(|e| e.to_string())?;
        if (occ.total() - 1.0).abs() > 1e-12 {
            return Err(format!("sum {} deviates by {:e}", occ.total(), occ.total() - 1.0));
        }
        if occ.0.iter().any(|&v| v < 0.0) {
            return Err(format!("negative occupancy {:?}", occ.0));
        }
    }
    Ok(())
}

/// Generator columns sum to zero within `1e-9` of the column scale.
pub fn check_column_sums(p: &RatePoint) -> Result<(), String> {
    let (sys, pump) = system_at(p);
    let m = build_rate_matrix(&sys, &pump).map_err(|e| e.to_string())?;
    let worst = m.max_relative_column_sum();
    if worst > 1e-9 {
        return Err(format!("relative column sum {worst:e}"));
    }
    Ok(())
}

/// Null-space steady state against long-time evolution of `dn/dt = M n`
/// from a uniform start. The propagator `exp(M t)` is built from a
/// short-step Taylor series and repeated squaring up to `t ≈ 1e11 s`.
pub fn check_against_time_evolution(p: &RatePoint) -> Result<(), String> {
    let (sys, pump) = system_at(p);
    let rm = build_rate_matrix(&sys, &pump).map_err(|e| e.to_string())?;
    let m: SMatrix<f64, 8, 8> = *rm.matrix();
    let scale = m.abs().column_sum().max();
    let dt = 1e-3 / scale;
    let a = m * dt;
    let mut prop = SMatrix::<f64, 8, 8>::identity();
    let mut term = SMatrix::<f64, 8, 8>::identity();
    for k in 1..=12 {
        term = term * a / k as f64;
        prop += term;
    }
    let mut t = dt;
    while t < 1e11 {
        prop = prop * prop;
        t *= 2.0;
    }
    let n = prop * SMatrix::<f64, 8, 1>::from_element(0.125);
    let n = n / n.sum();
    let occ = solve_occupancies(&rm).map_err(|e| e.to_string())?;
    for k in 0..8 {
        let diff = (n[k] - occ.0[k]).abs();
        if diff > 1e-6 {
            return Err(format!("level {}: evolved {} vs null space {} (diff {diff:e})", k + 1, n[k], occ.0[k]));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct LaserPoint {
    pub n_tr: f64,
    pub tau_n: f64,
    pub a: f64,
    pub gamma: f64,
    pub alpha_t: f64,
    pub eta_o: f64,
    /// Drive current as a multiple of threshold.
    pub overdrive: f64,
    pub logarithmic: bool,
}

pub fn diode_at(p: &LaserPoint) -> DiodeParams {
    let mut d = load_scenario("D3").unwrap().diode;
    d.n_tr = p.n_tr;
    d.tau_n = p.tau_n;
    d.a = p.a;
    d.gamma = p.gamma;
    d.beta = 0.0;
    d.epsilon = 0.0;
    d.gain_model = if p.logarithmic { GainModel::Logarithmic } else { GainModel::Linear };
    d
}

/// Numeric steady state agrees with the analytic light-current line at
/// `β = ε = 0` within 0.1%.
pub fn check_analytic_vs_numeric(p: &LaserPoint) -> Result<(), String> {
    let d = diode_at(p);
    let ith = threshold_current(&d, p.alpha_t).map_err(|e| e.to_string())?;
    let i = ith * p.overdrive;
    let analytic = output_power_analytic(&d, p.alpha_t, i, p.eta_o).map_err(|e| e.to_string())?;
    let numeric = solve_steady_state(&d, p.alpha_t, i, p.eta_o).map_err(|e| e.to_string())?.p_out;
    let rel = (numeric - analytic).abs() / analytic;
    if rel > 1e-3 {
        return Err(format!("analytic {analytic:e} vs numeric {numeric:e} (rel {rel:e})"));
    }
    Ok(())
}

/// Steepest slope of a sampled Lorentzian against `(3√3/4) A/Γ_w`.
pub fn check_lorentzian_slope(amplitude: f64, fwhm: f64, center: f64) -> Result<(), String> {
    let n = 4001;
    let freqs: Vec<f64> = (0..n).map(|k| center + fwhm * (-5.0 + 10.0 * k as f64 / (n - 1) as f64)).collect();
    let powers: Vec<f64> = freqs
        .iter()
        .map(|f| {
            let x = 2.0 * (f - center) / fwhm;
            amplitude / (1.0 + x * x)
        })
        .collect();
    let spectrum = OdmrSpectrum {
        threshold_currents: vec![0.0; n],
        metadata: SpectrumMetadata {
            i_th_on: 0.0,
            i_th_off: 0.0,
            drive_current: 0.0,
            contrast: 0.0,
            center_frequency: center,
            linewidth: fwhm,
            parameter_hash: String::new(),
        },
        frequencies: freqs,
        powers,
    };
    let (numeric, _) = max_slope(&spectrum).map_err(|e| e.to_string())?;
    let (closed, offset) = lorentzian_max_slope(amplitude, fwhm);
    let rel = (numeric - closed).abs() / closed;
    if rel > 5e-3 {
        return Err(format!("closed form {closed:e} vs sampled {numeric:e} (rel {rel:e})"));
    }
    if !(offset > 0.0 && offset < fwhm) {
        return Err(format!("offset {offset} outside (0, fwhm)"));
    }
    Ok(())
}

/// CSV write/read reproduces every cell bit for bit.
pub fn check_csv_round_trip(values: &[f64], labels: &[String]) -> Result<(), String> {
    let mut t = Table::new(["x", "label", "y"]);
    for (k, v) in values.iter().enumerate() {
        let label = labels.get(k % labels.len().max(1)).cloned().unwrap_or_default();
        t.push(vec![Cell::Num(*v), Cell::Text(label), Cell::Num(-v * 1e-7)]).map_err(|e| e.to_string())?;
    }
    let text = t.to_csv().map_err(|e| e.to_string())?;
    let back = Table::from_csv(&text).map_err(|e| e.to_string())?;
    if back.columns != t.columns || back.rows.len() != t.rows.len() {
        return Err("shape changed".into());
    }
    for (a, b) in t.rows.iter().zip(&back.rows) {
        for (x, y) in a.iter().zip(b) {
            let same = match (x, y) {
                (Cell::Num(p), Cell::Num(q)) => p.to_bits() == q.to_bits(),
                (Cell::Text(p), Cell::Text(q)) => p == q,
                // a label that happens to read as a number comes back numeric
                (Cell::Text(p), Cell::Num(q)) => p.parse::<f64>().is_ok_and(|v| v.to_bits() == q.to_bits()),
                _ => false,
            };
            if !same {
                return Err(format!("{x:?} came back as {y:?}"));
            }
        }
    }
    Ok(())
}

/// Two runs with the same seed give bit-identical results.
pub fn check_optimizer_determinism(seed: u64) -> Result<(), String> {
    let s = load_scenario("D3").map_err(|e| e.to_string())?;
    let mut p = OptimizationProblem::global_search(s.chain(), s.limits);
    p.fix(Param::T2Star, 1e-6);
    p.starts = 4;
    let a = optimize(&p, seed).map_err(|e| e.to_string())?;
    let b = optimize(&p, seed).map_err(|e| e.to_string())?;
    if a != b {
        return Err(format!("seed {seed}: {:e} vs {:e}", a.sensitivity, b.sensitivity));
    }
    Ok(())
}
