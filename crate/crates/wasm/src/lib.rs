//! Browser bindings for the demo page in `www/`.
//!
//! Each export loads a built-in preset, runs one model evaluation and hands
//! back a flat array the page can draw directly.

use nvlaser_core::config_io::{load_scenario, preset_names, Scenario};
use nvlaser_core::nv_levels;
use nvlaser_core::sensing::{feasibility_map, threshold_contrast_to_spectrum, Region};
use wasm_bindgen::prelude::*;

fn scenario(preset: &str) -> Result<Scenario, String> {
    if !preset_names().any(|n| n.eq_ignore_ascii_case(preset)) {
        return Err(format!("unknown preset `{preset}`"));
    }
    load_scenario(preset).map_err(|e| e.to_string())
}

fn logspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(lo > 0.0 && hi > lo && n >= 2) {
        return Err(format!("bad log range {lo}..{hi} with {n} points"));
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect())
}

fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, String> {
    if !(hi > lo && n >= 2) {
        return Err(format!("bad range {lo}..{hi} with {n} points"));
    }
    Ok((0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect())
}

/// Comma-separated preset names.
#[wasm_bindgen]
pub fn presets() -> String {
    preset_names().collect::<Vec<_>>().join(",")
}

/// Contrast over a log-spaced Rabi (rows) by intensity (columns) grid,
/// row-major, `n × n` values.
#[wasm_bindgen]
pub fn contrast_map(
    preset: &str,
    rabi_lo: f64,
    rabi_hi: f64,
    intensity_lo: f64,
    intensity_hi: f64,
    n: usize,
) -> Result<Vec<f64>, String> {
    let s = scenario(preset)?;
    let rabi = logspace(rabi_lo, rabi_hi, n)?;
    let intensity = logspace(intensity_lo, intensity_hi, n)?;
    let map = nv_levels::contrast_map(&s.nv, &rabi, &intensity).map_err(|e| e.to_string())?;
    Ok(map.contrast)
}

/// ODMR spectrum for the preset with the diode gain and confinement
/// overridden. Returns `[frequencies..., powers..., i_th_off, i_th_on]`.
#[wasm_bindgen]
pub fn odmr_spectrum(preset: &str, a: f64, gamma: f64) -> Result<Vec<f64>, String> {
    let mut s = scenario(preset)?;
    s.diode.a = a;
    s.diode.gamma = gamma;
    s.diode.validate().map_err(|e| e.to_string())?;
    let config = s.odmr_config().map_err(|e| e.to_string())?;
    let sp = threshold_contrast_to_spectrum(&s.chain(), &config).map_err(|e| e.to_string())?;
    let mut out = sp.frequencies;
    out.extend(sp.powers);
    out.push(sp.metadata.i_th_off);
    out.push(sp.metadata.i_th_on);
    Ok(out)
}

/// Operating regions over log `a` (rows) by linear `Γ` (columns).
/// 0 = below the shot-noise floor, 1 = viable, 2 = over the current limit.
#[wasm_bindgen]
pub fn feasibility_regions(
    preset: &str,
    a_lo: f64,
    a_hi: f64,
    rows: usize,
    gamma_lo: f64,
    gamma_hi: f64,
    cols: usize,
) -> Result<Vec<u8>, String> {
    let s = scenario(preset)?;
    let a = logspace(a_lo, a_hi, rows)?;
    let g = linspace(gamma_lo, gamma_hi, cols)?;
    let map = feasibility_map(&s.chain(), &s.limits, &a, &g).map_err(|e| e.to_string())?;
    Ok(map
        .regions
        .iter()
        .map(|r| match r {
            Region::A => 0,
            Region::B => 1,
            Region::C => 2,
        })
        .collect())
}
