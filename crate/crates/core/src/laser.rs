//! Semiconductor diode rate equations.
//!
//! Carrier density `N` and photon density `S` obey
//!
//! ```text
//! dN/dt = η_i I/(qV) - N/τ_N - v_g g(N) (1 - εS) S
//! dS/dt = Γ v_g g(N) (1 - εS) S - S/τ_P + Γ β N/τ_N
//! ```
//!
//! with `τ_P = 1/(v_g α_t)`, so the threshold condition is `Γ g_th = α_t`.
//! Output power through the coupling mirror is
//! `P = η_o (hc/λ) (V/Γ) S/τ_P`.

use serde::{Deserialize, Serialize};

use crate::constants::{photon_energy, ELEMENTARY_CHARGE, SPEED_OF_LIGHT};
use crate::error::{check_non_negative, check_positive, check_unit_interval, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainModel {
    /// `g = a (N - N_tr)`.
    #[default]
    Linear,
    /// `g = a N_tr ln(N / N_tr)`; same slope as the linear model at transparency.
    Logarithmic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiodeParams {
    /// Transparency carrier density (m⁻³).
    pub n_tr: f64,
    /// Differential gain (m²).
    pub a: f64,
    /// Optical confinement factor.
    pub gamma: f64,
    /// Gain compression (m³).
    pub epsilon: f64,
    /// Spontaneous emission coupling factor.
    pub beta: f64,
    /// Carrier lifetime (s).
    pub tau_n: f64,
    /// Active volume (m³).
    pub volume: f64,
    /// Internal quantum efficiency.
    pub eta_i: f64,
    /// Lasing wavelength (m).
    pub wavelength: f64,
    pub group_index: f64,
    pub gain_model: GainModel,
}

/// Typical parameter ranges for III-nitride gain media; values outside only
/// produce warnings.
pub const TYPICAL_RANGES: [(&str, f64, f64); 5] = [
    ("n_tr", 3e24, 2e25),
    ("tau_n", 1e-9, 5e-9),
    ("a", 1e-22, 1e-17),
    ("gamma", 0.01, 0.1),
    ("beta", 1e-5, 1e-2),
];

impl DiodeParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("n_tr", self.n_tr)?;
        check_positive("a", self.a)?;
        check_unit_interval("gamma", self.gamma)?;
        check_non_negative("epsilon", self.epsilon)?;
        check_non_negative("beta", self.beta)?;
        if self.beta > 1.0 {
            return Err(Error::invalid("beta", format!("must be <= 1, got {}", self.beta)));
        }
        check_positive("tau_n", self.tau_n)?;
        check_positive("volume", self.volume)?;
        check_unit_interval("eta_i", self.eta_i)?;
        check_positive("wavelength", self.wavelength)?;
        check_positive("group_index", self.group_index)?;
        Ok(())
    }

    /// Parameters outside [`TYPICAL_RANGES`], as human-readable notes.
    pub fn range_warnings(&self) -> Vec<String> {
        TYPICAL_RANGES
            .iter()
            .filter_map(|&(name, lo, hi)| {
                let v = match name {
                    "n_tr" => self.n_tr,
                    "tau_n" => self.tau_n,
                    "a" => self.a,
                    "gamma" => self.gamma,
                    _ => self.beta,
                };
                // β = 0 is the ideal limit, not an out-of-range device
                if name == "beta" && v == 0.0 {
                    return None;
                }
                (v < lo || v > hi).then(|| format!("{name} = {v:e} outside typical range [{lo:e}, {hi:e}]"))
            })
            .collect()
    }

    pub fn group_velocity(&self) -> f64 {
        SPEED_OF_LIGHT / self.group_index
    }

    /// Photon lifetime `1/(v_g α_t)`.
    pub fn photon_lifetime(&self, alpha_t: f64) -> Result<f64> {
        check_positive("alpha_t", alpha_t)?;
        Ok(1.0 / (self.group_velocity() * alpha_t))
    }

    /// Material gain per unit length, before compression.
    pub fn material_gain(&self, n: f64) -> Result<f64> {
        match self.gain_model {
            GainModel::Linear => {
                check_non_negative("N", n)?;
                Ok(self.a * (n - self.n_tr))
            }
            GainModel::Logarithmic => {
                check_positive("N", n)?;
                Ok(self.a * self.n_tr * (n / self.n_tr).ln())
            }
        }
    }

    /// Injection rate per unit volume `η_i I/(qV)`.
    pub fn pump_rate(&self, current: f64) -> f64 {
        self.eta_i * current / (ELEMENTARY_CHARGE * self.volume)
    }
}

/// Modal gain rate `G = Γ v_g g(N) (1 - εS)` (s⁻¹).
pub fn gain(diode: &DiodeParams, n: f64, s: f64) -> Result<f64> {
    check_non_negative("S", s)?;
    Ok(diode.gamma * diode.group_velocity() * diode.material_gain(n)? * (1.0 - diode.epsilon * s))
}

/// Carrier density at which modal gain equals `α_t`.
pub fn threshold_carrier_density(diode: &DiodeParams, alpha_t: f64) -> Result<f64> {
    check_non_negative("alpha_t", alpha_t)?;
    Ok(match diode.gain_model {
        GainModel::Linear => diode.n_tr + alpha_t / (diode.gamma * diode.a),
        GainModel::Logarithmic => diode.n_tr * (alpha_t / (diode.gamma * diode.a * diode.n_tr)).exp(),
    })
}

/// `I_th = qV N_th / (η_i τ_N)` (A).
pub fn threshold_current(diode: &DiodeParams, alpha_t: f64) -> Result<f64> {
    let n_th = threshold_carrier_density(diode, alpha_t)?;
    Ok(ELEMENTARY_CHARGE * diode.volume * n_th / (diode.eta_i * diode.tau_n))
}

/// Slope efficiency `η_o η_i hc/(qλ)` (W/A).
pub fn slope_efficiency(diode: &DiodeParams, eta_o: f64) -> f64 {
    eta_o * diode.eta_i * photon_energy(diode.wavelength) / ELEMENTARY_CHARGE
}

/// Above-threshold power in the `εS → 0` limit, zero below threshold.
pub fn output_power_analytic(diode: &DiodeParams, alpha_t: f64, current: f64, eta_o: f64) -> Result<f64> {
    check_non_negative("current", current)?;
    check_unit_interval("eta_o", eta_o)?;
    let i_th = threshold_current(diode, alpha_t)?;
    Ok((slope_efficiency(diode, eta_o) * (current - i_th)).max(0.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    /// Carrier density (m⁻³).
    pub n: f64,
    /// Photon density (m⁻³).
    pub s: f64,
    /// Output power (W).
    pub p_out: f64,
    /// Largest rate-equation residual, relative to the dominant rate term.
    pub residual: f64,
}

const MAX_ITERATIONS: usize = 4000;
const RESIDUAL_LIMIT: f64 = 1e-10;

/// Carrier density and material gain that zero `dN/dt` at fixed photon
/// density. The gain is computed from the excess over transparency, not
/// from `N - N_tr`, which loses digits when the threshold gain is tiny.
fn carriers_at(diode: &DiodeParams, j: f64, s: f64) -> (f64, f64) {
    let vg = diode.group_velocity();
    let comp = 1.0 - diode.epsilon * s;
    match diode.gain_model {
        GainModel::Linear => {
            let k = vg * diode.a * comp * s;
            let excess = (j - diode.n_tr / diode.tau_n) / (1.0 / diode.tau_n + k);
            (diode.n_tr + excess, diode.a * excess)
        }
        GainModel::Logarithmic => {
            // with x = ln(N/N_tr): N_tr e^x/τ_N + v_g a N_tr x (1-εS) S = J, increasing in x
            let k = vg * diode.a * diode.n_tr * comp * s;
            let f = |x: f64| diode.n_tr * x.exp() / diode.tau_n + k * x - j;
            let mut hi = (j * diode.tau_n / diode.n_tr).ln().max(0.0);
            let mut lo = hi;
            let mut step = 1.0;
            while f(lo) > 0.0 {
                lo -= step;
                step *= 2.0;
                if lo < -700.0 {
                    return (0.0, f64::NEG_INFINITY);
                }
            }
            while f(hi) < 0.0 {
                hi += 1.0;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let x = if f(hi).abs() < f(lo).abs() { hi } else { lo };
            (diode.n_tr * x.exp(), diode.a * diode.n_tr * x)
        }
    }
}

fn residuals(diode: &DiodeParams, j: f64, tau_p: f64, n: f64, g: f64, s: f64) -> f64 {
    let vg = diode.group_velocity();
    let stim = vg * g * (1.0 - diode.epsilon * s) * s;
    let spont = n / diode.tau_n;
    let dn = j - spont - stim;
    let dn_scale = j.abs().max(spont).max(stim.abs());
    let loss = s / tau_p;
    let sp = diode.gamma * diode.beta * spont;
    let ds = diode.gamma * stim - loss + sp;
    let ds_scale = (diode.gamma * stim).abs().max(loss).max(sp);
    let rel = |r: f64, scale: f64| if scale > 0.0 { r.abs() / scale } else { r.abs() };
    rel(dn, dn_scale).max(rel(ds, ds_scale))
}

/// Numeric steady state including spontaneous emission and gain compression.
///
/// Eliminating `N` reduces the problem to a scalar root in `S` on
/// `[0, Γ τ_P η_i I/(qV)]`: at the upper end every injected carrier would
/// have to leave as a photon, so `dS/dt ≤ 0` there. The root is bracketed
/// by bisection, geometric while the bracket spans many decades.
pub fn solve_steady_state(diode: &DiodeParams, alpha_t: f64, current: f64, eta_o: f64) -> Result<SteadyState> {
    diode.validate()?;
    check_non_negative("current", current)?;
    check_unit_interval("eta_o", eta_o)?;
    let tau_p = diode.photon_lifetime(alpha_t)?;
    let j = diode.pump_rate(current);
    let power = |s: f64| eta_o * photon_energy(diode.wavelength) * diode.volume / diode.gamma * s / tau_p;

    if current == 0.0 {
        return Ok(SteadyState {
            n: 0.0,
            s: 0.0,
            p_out: 0.0,
            residual: 0.0,
        });
    }

    let below_threshold = current <= threshold_current(diode, alpha_t)?;
    if diode.beta == 0.0 && below_threshold {
        return Ok(SteadyState {
            n: j * diode.tau_n,
            s: 0.0,
            p_out: 0.0,
            residual: 0.0,
        });
    }

    let mut s_max = diode.gamma * tau_p * j;
    if diode.epsilon > 0.0 {
        s_max = s_max.min((1.0 - 1e-12) / diode.epsilon);
    }
    // β > 0: dS/dt as a function of S after eliminating N.
    // β = 0: the same divided by S, which removes the trivial root at S = 0.
    let objective = |s: f64| -> f64 {
        let (n, g) = carriers_at(diode, j, s);
        if diode.beta > 0.0 {
            let stim = diode.group_velocity() * g * (1.0 - diode.epsilon * s) * s;
            diode.gamma * (stim + diode.beta * n / diode.tau_n) - s / tau_p
        } else {
            diode.gamma * diode.group_velocity() * g * (1.0 - diode.epsilon * s) - 1.0 / tau_p
        }
    };

    let f_hi = objective(s_max);
    if f_hi > 0.0 {
        return Err(Error::NonConvergence {
            what: "laser steady state (no sign change in photon-density bracket)",
            iterations: 0,
            residual: f_hi,
        });
    }
    let mut lo = 0.0f64;
    let mut hi = s_max;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mid = if lo == 0.0 {
            hi * 1e-4
        } else if hi > 4.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if mid <= lo || mid >= hi || mid < f64::MIN_POSITIVE {
            break;
        }
        if objective(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if lo > 0.0 && hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let ((n_lo, g_lo), (n_hi, g_hi)) = (carriers_at(diode, j, lo), carriers_at(diode, j, hi));
    let r_lo = residuals(diode, j, tau_p, n_lo, g_lo, lo);
    let r_hi = residuals(diode, j, tau_p, n_hi, g_hi, hi);
    let (n, s, residual) = if r_lo <= r_hi { (n_lo, lo, r_lo) } else { (n_hi, hi, r_hi) };
    if !(residual <= RESIDUAL_LIMIT) {
        return Err(Error::NonConvergence {
            what: "laser steady state",
            iterations,
            residual,
        });
    }
    Ok(SteadyState {
        n,
        s,
        p_out: power(s),
        residual,
    })
}

/// Power–current curve from the numeric solver.
pub fn power_current_curve(diode: &DiodeParams, alpha_t: f64, currents: &[f64], eta_o: f64) -> Result<Vec<f64>> {
    currents
        .iter()
        .map(|&i| solve_steady_state(diode, alpha_t, i, eta_o).map(|s| s.p_out))
        .collect()
}
