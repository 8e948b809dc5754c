//! ODMR spectra from microwave-dependent threshold shifts, noise models,
//! field sensitivity and operating-region maps.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cavity::{distributed_diamond_loss, output_coupling_efficiency, total_cavity_loss, CavityGeometry};
use crate::constants::{photon_energy, ELEMENTARY_CHARGE, NV_GYROMAGNETIC_HZ_PER_T};
use crate::error::{check_non_negative, check_positive, Error, Result};
use crate::laser::{output_power_analytic, solve_steady_state, threshold_current, DiodeParams};
use crate::nv_levels::{absorption_state, check_grid, NvSystem, PumpCondition};

/// Everything needed to go from diamond to laser output.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorChain {
    pub nv: NvSystem,
    /// Pump and microwave operating point of the diamond.
    pub pump: PumpCondition,
    pub cavity: CavityGeometry,
    pub diode: DiodeParams,
}

/// Diamond absorption at the operating point, on and off resonance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiamondResponse {
    pub alpha_off: f64,
    pub alpha_on: f64,
    /// Off-resonance single-pass absorbed fraction.
    pub absorption_off: f64,
    pub contrast: f64,
}

/// Cavity quantities for one diamond absorption coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityState {
    pub alpha_e: f64,
    pub alpha_t: f64,
    pub eta_o: f64,
    pub i_th: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPair {
    pub off: CavityState,
    pub on: CavityState,
}

impl ThresholdPair {
    /// `I_th,off - I_th,on` (A).
    pub fn delta(&self) -> f64 {
        self.off.i_th - self.on.i_th
    }
}

impl SensorChain {
    pub fn validate(&self) -> Result<()> {
        self.nv.validate()?;
        self.cavity.validate()?;
        self.diode.validate()
    }

    pub fn diamond_response(&self) -> Result<DiamondResponse> {
        let s = absorption_state(&self.nv, &self.pump)?;
        Ok(DiamondResponse {
            alpha_off: s.alpha_off,
            alpha_on: s.alpha_on,
            absorption_off: s.absorption_off(),
            contrast: s.contrast(),
        })
    }

    pub fn cavity_state(&self, alpha_d: f64) -> Result<CavityState> {
        let alpha_e = distributed_diamond_loss(alpha_d, self.nv.thickness, self.cavity.length())?;
        let alpha_t = total_cavity_loss(&self.cavity, alpha_e)?;
        Ok(CavityState {
            alpha_e,
            alpha_t,
            eta_o: output_coupling_efficiency(&self.cavity, alpha_e)?,
            i_th: threshold_current(&self.diode, alpha_t)?,
        })
    }

    pub fn thresholds(&self, diamond: &DiamondResponse) -> Result<ThresholdPair> {
        Ok(ThresholdPair {
            off: self.cavity_state(diamond.alpha_off)?,
            on: self.cavity_state(diamond.alpha_on)?,
        })
    }

    /// Stable digest of every chain input, for provenance in outputs.
    pub fn parameter_hash(&self) -> String {
        let digest = Sha256::digest(format!("{self:?}").as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub const DEFAULT_CENTER_FREQUENCY: f64 = 2.83e9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrConfig {
    pub center_frequency: f64,
    /// Lorentzian FWHM (Hz).
    pub linewidth: f64,
    /// Fixed drive current (A); `None` means the off-resonance threshold.
    pub drive_current: Option<f64>,
    pub frequencies: Vec<f64>,
}

impl OdmrConfig {
    /// Uniform grid of `points` samples over `center ± half_span_linewidths · f_l`.
    pub fn uniform(center_frequency: f64, linewidth: f64, half_span_linewidths: f64, points: usize) -> Result<Self> {
        check_positive("center_frequency", center_frequency)?;
        check_positive("linewidth", linewidth)?;
        check_positive("half_span_linewidths", half_span_linewidths)?;
        if points < 2 {
            return Err(Error::invalid("points", "need at least 2 grid points"));
        }
        let half = half_span_linewidths * linewidth;
        let step = 2.0 * half / (points - 1) as f64;
        let frequencies = (0..points)
            .map(|k| center_frequency - half + step * k as f64)
            .collect();
        Ok(Self {
            center_frequency,
            linewidth,
            drive_current: None,
            frequencies,
        })
    }

    /// 1001 points over ±5 linewidths, linewidth `1/(π T₂*)`.
    pub fn for_system(nv: &NvSystem) -> Self {
        Self::uniform(DEFAULT_CENTER_FREQUENCY, nv.linewidth(), 5.0, 1001).expect("positive linewidth")
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("center_frequency", self.center_frequency)?;
        check_positive("linewidth", self.linewidth)?;
        if let Some(i) = self.drive_current {
            check_non_negative("drive_current", i)?;
        }
        check_grid("frequencies", &self.frequencies)?;
        let span = self.frequencies[self.frequencies.len() - 1] - self.frequencies[0];
        if span < 4.0 * self.linewidth {
            return Err(Error::invalid(
                "frequencies",
                format!("grid spans {span:e} Hz, less than 4 linewidths"),
            ));
        }
        Ok(())
    }

    /// Lorentzian resonance weight, 1 on resonance.
    pub fn weight(&self, f: f64) -> f64 {
        let x = 2.0 * (f - self.center_frequency) / self.linewidth;
        1.0 / (1.0 + x * x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMetadata {
    pub i_th_on: f64,
    pub i_th_off: f64,
    pub drive_current: f64,
    pub contrast: f64,
    pub center_frequency: f64,
    pub linewidth: f64,
    pub parameter_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrSpectrum {
    pub frequencies: Vec<f64>,
    /// Laser output power (W).
    pub powers: Vec<f64>,
    /// Threshold current at each frequency (A).
    pub threshold_currents: Vec<f64>,
    pub metadata: SpectrumMetadata,
}

impl OdmrSpectrum {
    pub fn peak_power(&self) -> f64 {
        self.powers.iter().copied().fold(0.0, f64::max)
    }

    /// Full width at half maximum of the power peak (zero baseline), linearly
    /// interpolated.
    pub fn fwhm(&self) -> Option<f64> {
        let (imax, &pmax) = self
            .powers
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))?;
        if !(pmax > 0.0) {
            return None;
        }
        let half = 0.5 * pmax;
        let f = &self.frequencies;
        let p = &self.powers;
        let left = (1..=imax).rev().find(|&k| p[k - 1] < half).map(|k| {
            f[k - 1] + (half - p[k - 1]) / (p[k] - p[k - 1]) * (f[k] - f[k - 1])
        })?;
        let right = (imax..p.len() - 1).find(|&k| p[k + 1] < half).map(|k| {
            f[k] + (p[k] - half) / (p[k] - p[k + 1]) * (f[k + 1] - f[k])
        })?;
        Some(right - left)
    }
}

/// Lasing output versus microwave frequency at fixed drive current.
///
/// The resonance modulates the diamond loss: `α_d(f)` moves from the
/// off-resonance to the on-resonance value with a Lorentzian weight, and the
/// threshold current follows through the cavity.
pub fn threshold_contrast_to_spectrum(chain: &SensorChain, config: &OdmrConfig) -> Result<OdmrSpectrum> {
    let diamond = chain.diamond_response()?;
    spectrum_from_response(chain, &diamond, config)
}

/// [`threshold_contrast_to_spectrum`] with the diamond response supplied,
/// so grid scans over diode parameters skip the level solve.
pub fn spectrum_from_response(chain: &SensorChain, diamond: &DiamondResponse, config: &OdmrConfig) -> Result<OdmrSpectrum> {
    chain.validate()?;
    config.validate()?;
    let pair = chain.thresholds(diamond)?;
    let drive = config.drive_current.unwrap_or(pair.off.i_th);
    let mut powers = Vec::with_capacity(config.frequencies.len());
    let mut thresholds = Vec::with_capacity(config.frequencies.len());
    for &f in &config.frequencies {
        let alpha_d = diamond.alpha_off + config.weight(f) * (diamond.alpha_on - diamond.alpha_off);
        let state = chain.cavity_state(alpha_d)?;
        let p = if chain.diode.beta == 0.0 && chain.diode.epsilon == 0.0 {
            output_power_analytic(&chain.diode, state.alpha_t, drive, state.eta_o)?
        } else {
            solve_steady_state(&chain.diode, state.alpha_t, drive, state.eta_o)?.p_out
        };
        powers.push(p);
        thresholds.push(state.i_th);
    }
    Ok(OdmrSpectrum {
        frequencies: config.frequencies.clone(),
        powers,
        threshold_currents: thresholds,
        metadata: SpectrumMetadata {
            i_th_on: pair.on.i_th,
            i_th_off: pair.off.i_th,
            drive_current: drive,
            contrast: diamond.contrast,
            center_frequency: config.center_frequency,
            linewidth: config.linewidth,
            parameter_hash: chain.parameter_hash(),
        },
    })
}

/// Largest `|dy/df|` by central differences and where it occurs.
fn max_abs_derivative(f: &[f64], y: &[f64]) -> Result<(f64, f64, usize)> {
    if f.len() != y.len() {
        return Err(Error::invalid("spectrum", "frequency and value lengths differ"));
    }
    if f.len() < 16 {
        return Err(Error::invalid("spectrum", format!("need >= 16 points, got {}", f.len())));
    }
    let mut best = (0.0, f[0], 0);
    for k in 1..f.len() - 1 {
        let d = ((y[k + 1] - y[k - 1]) / (f[k + 1] - f[k - 1])).abs();
        if d > best.0 {
            best = (d, f[k], k);
        }
    }
    if !(best.0 > 0.0) {
        return Err(Error::FlatSpectrum);
    }
    Ok(best)
}

/// Maximum ODMR slope (W/Hz) and its frequency.
pub fn max_slope(spectrum: &OdmrSpectrum) -> Result<(f64, f64)> {
    let (s, f, _) = max_abs_derivative(&spectrum.frequencies, &spectrum.powers)?;
    Ok((s, f))
}

/// Closed-form maximum slope of a Lorentzian with amplitude `A` and FWHM `Γ`:
/// `(3√3/4) A/Γ`, reached at `f₀ ± Γ/(2√3)`.
pub fn lorentzian_max_slope(amplitude: f64, fwhm: f64) -> (f64, f64) {
    let root3 = 3f64.sqrt();
    (0.75 * root3 * amplitude / fwhm, fwhm / (2.0 * root3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Shot noise of the output light.
    OpticalShot,
    /// Shot noise of the drive current.
    CurrentShot,
    /// Drive-current noise as a fraction of the current.
    RelativeCurrent { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(flatten)]
    pub kind: NoiseKind,
    /// Detection bandwidth (Hz).
    pub bandwidth: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind) -> Self {
        Self { kind, bandwidth: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("bandwidth", self.bandwidth)?;
        if let NoiseKind::RelativeCurrent { fraction } = self.kind {
            check_positive("fraction", fraction)?;
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            NoiseKind::OpticalShot => "optical-shot",
            NoiseKind::CurrentShot => "current-shot",
            NoiseKind::RelativeCurrent { .. } => "relative-current",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// Field sensitivity (T/√Hz).
    pub sensitivity: f64,
    pub noise: NoiseModel,
    /// W/Hz for optical noise, A/Hz for current noise.
    pub slope_max: f64,
    /// Frequency of the steepest slope (Hz).
    pub operating_frequency: f64,
    /// Output power at the operating frequency (W).
    pub operating_power: f64,
    pub drive_current: f64,
    /// Noise amplitude in W or A per √(bandwidth).
    pub noise_amplitude: f64,
}

/// Field sensitivity `σ / (slope · γ)`.
pub fn sensitivity(spectrum: &OdmrSpectrum, noise: &NoiseModel, wavelength: f64) -> Result<SensitivityReport> {
    noise.validate()?;
    check_positive("wavelength", wavelength)?;
    let drive = spectrum.metadata.drive_current;
    let (slope, freq, idx, sigma) = match noise.kind {
        NoiseKind::OpticalShot => {
            let (slope, freq, idx) = max_abs_derivative(&spectrum.frequencies, &spectrum.powers)?;
            let p = spectrum.powers[idx];
            let sigma = (2.0 * photon_energy(wavelength) * p * noise.bandwidth).sqrt();
            (slope, freq, idx, sigma)
        }
        NoiseKind::CurrentShot | NoiseKind::RelativeCurrent { .. } => {
            let (slope, freq, idx) = max_abs_derivative(&spectrum.frequencies, &spectrum.threshold_currents)?;
            let sigma = match noise.kind {
                NoiseKind::RelativeCurrent { fraction } => fraction * drive * noise.bandwidth.sqrt(),
                _ => (2.0 * ELEMENTARY_CHARGE * drive * noise.bandwidth).sqrt(),
            };
            (slope, freq, idx, sigma)
        }
    };
    Ok(SensitivityReport {
        sensitivity: sigma / (slope * NV_GYROMAGNETIC_HZ_PER_T),
        noise: *noise,
        slope_max: slope,
        operating_frequency: freq,
        operating_power: spectrum.powers[idx],
        drive_current: drive,
        noise_amplitude: sigma,
    })
}

/// Engineering limits on the diode drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingLimits {
    /// Largest usable threshold current (A).
    pub max_current: f64,
    /// Bandwidth for the drive-current shot-noise floor (Hz).
    pub bandwidth: f64,
}

impl Default for OperatingLimits {
    fn default() -> Self {
        Self {
            max_current: 0.3,
            bandwidth: 1.0,
        }
    }
}

impl OperatingLimits {
    /// Current shot-noise floor `√(2 q I Δf)` at drive current `i`.
    pub fn shot_noise_floor(&self, i: f64) -> f64 {
        (2.0 * ELEMENTARY_CHARGE * i * self.bandwidth).sqrt()
    }

    pub fn classify(&self, pair: &ThresholdPair) -> Region {
        if pair.off.i_th > self.max_current {
            Region::C
        } else if pair.delta() < self.shot_noise_floor(pair.off.i_th) {
            Region::A
        } else {
            Region::B
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Region {
    /// Threshold shift below the current shot-noise floor.
    A,
    /// Viable.
    B,
    /// Threshold current above the drive limit.
    C,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::A => "A",
            Region::B => "B",
            Region::C => "C",
        }
    }
}

/// Per-cell results over a (differential gain, confinement) grid.
/// Row-major, one row per `a` value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityMap {
    pub a_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub regions: Vec<Region>,
    pub i_th_off: Vec<f64>,
    pub delta_i_th: Vec<f64>,
    /// Current-shot-limited sensitivity (T/√Hz).
    pub sensitivity_current: Vec<f64>,
    /// Optical-shot-limited sensitivity (T/√Hz).
    pub sensitivity_optical: Vec<f64>,
    pub diamond: DiamondResponse,
}

impl FeasibilityMap {
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.gamma_grid.len() + col
    }

    pub fn count(&self, region: Region) -> usize {
        self.regions.iter().filter(|r| **r == region).count()
    }

    /// Best sensitivity among region-B cells for one of the two sensitivity panels.
    pub fn best_viable(&self, values: &[f64]) -> Option<(usize, f64)> {
        self.regions
            .iter()
            .zip(values)
            .enumerate()
            .filter(|(_, (r, v))| **r == Region::B && v.is_finite())
            .map(|(k, (_, v))| (k, *v))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Threshold, region and sensitivity surfaces over `(a, Γ)`.
pub fn feasibility_map(
    chain: &SensorChain,
    limits: &OperatingLimits,
    a_grid: &[f64],
    gamma_grid: &[f64],
) -> Result<FeasibilityMap> {
    let diamond = chain.diamond_response()?;
    feasibility_map_with(chain, &diamond, limits, a_grid, gamma_grid)
}

/// [`feasibility_map`] with the diamond response supplied.
pub fn feasibility_map_with(
    chain: &SensorChain,
    diamond: &DiamondResponse,
    limits: &OperatingLimits,
    a_grid: &[f64],
    gamma_grid: &[f64],
) -> Result<FeasibilityMap> {
    check_grid("a_grid", a_grid)?;
    check_grid("gamma_grid", gamma_grid)?;
    check_positive("max_current", limits.max_current)?;
    check_positive("bandwidth", limits.bandwidth)?;
    chain.validate()?;
    let config = OdmrConfig::for_system(&chain.nv);
    let cols = gamma_grid.len();
    let current = NoiseModel {
        kind: NoiseKind::CurrentShot,
        bandwidth: limits.bandwidth,
    };
    let optical = NoiseModel {
        kind: NoiseKind::OpticalShot,
        bandwidth: limits.bandwidth,
    };
    let cells = crate::par_map(a_grid.len() * cols, |idx| {
        let (row, col) = (idx / cols, idx % cols);
        let mut c = chain.clone();
        c.diode.a = a_grid[row];
        c.diode.gamma = gamma_grid[col];
        let eval = || -> Result<(Region, f64, f64, f64, f64)> {
            let pair = c.thresholds(diamond)?;
            let region = limits.classify(&pair);
            let (s_cur, s_opt) = match spectrum_from_response(&c, diamond, &config) {
                Ok(sp) => (
                    sensitivity(&sp, &current, c.diode.wavelength).map_or(f64::INFINITY, |r| r.sensitivity),
                    sensitivity(&sp, &optical, c.diode.wavelength).map_or(f64::INFINITY, |r| r.sensitivity),
                ),
                Err(_) => (f64::INFINITY, f64::INFINITY),
            };
            Ok((region, pair.off.i_th, pair.delta(), s_cur, s_opt))
        };
        eval().map_err(|e| Error::Cell {
            row,
            col,
            coords: format!("a={:e} m^2, gamma={}", a_grid[row], gamma_grid[col]),
            source: Box::new(e),
        })
    });
    let n = cells.len();
    let mut map = FeasibilityMap {
        a_grid: a_grid.to_vec(),
        gamma_grid: gamma_grid.to_vec(),
        regions: Vec::with_capacity(n),
        i_th_off: Vec::with_capacity(n),
        delta_i_th: Vec::with_capacity(n),
        sensitivity_current: Vec::with_capacity(n),
        sensitivity_optical: Vec::with_capacity(n),
        diamond: *diamond,
    };
    for cell in cells {
        let (r, i, d, sc, so) = cell?;
        map.regions.push(r);
        map.i_th_off.push(i);
        map.delta_i_th.push(d);
        map.sensitivity_current.push(sc);
        map.sensitivity_optical.push(so);
    }
    Ok(map)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaStudyEntry {
    pub beta: f64,
    pub currents: Vec<f64>,
    /// Off-resonance output power at each current (W).
    pub powers: Vec<f64>,
    pub report: SensitivityReport,
    /// Whether the P–I curve has a threshold kink by the jump test.
    pub kink: bool,
}

/// Flags a kink when the finite-difference slope between neighbouring
/// intervals jumps by more than `5×` the local average slope.
pub fn has_threshold_kink(currents: &[f64], powers: &[f64]) -> bool {
    let slopes: Vec<f64> = currents
        .windows(2)
        .zip(powers.windows(2))
        .map(|(i, p)| (p[1] - p[0]) / (i[1] - i[0]))
        .collect();
    slopes.windows(3).any(|w| {
        let local = (w[0] + w[1] + w[2]) / 3.0;
        let jump = (w[2] - w[0]).abs();
        // a jump from exactly flat is a kink at any size
        (w[0] == 0.0 && w[2] > 0.0) || (local > 0.0 && jump > 5.0 * local)
    })
}

/// P–I curves and optical-shot sensitivity for a list of spontaneous
/// emission factors. Uses the numeric steady state throughout, so the
/// sub-threshold background enters the shot noise.
pub fn spontaneous_emission_study(
    chain: &SensorChain,
    config: &OdmrConfig,
    betas: &[f64],
    bandwidth: f64,
) -> Result<Vec<BetaStudyEntry>> {
    let diamond = chain.diamond_response()?;
    let noise = NoiseModel {
        kind: NoiseKind::OpticalShot,
        bandwidth,
    };
    let pair = chain.thresholds(&diamond)?;
    let currents: Vec<f64> = (0..=200).map(|k| pair.off.i_th * 2.0 * k as f64 / 200.0).collect();
    let entries = crate::par_map(betas.len(), |k| -> Result<BetaStudyEntry> {
        let beta = betas[k];
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::invalid("beta", format!("{beta} outside [0, 1]")));
        }
        let mut c = chain.clone();
        c.diode.beta = beta;
        let powers = currents
            .iter()
            .map(|&i| solve_steady_state(&c.diode, pair.off.alpha_t, i, pair.off.eta_o).map(|s| s.p_out))
            .collect::<Result<Vec<_>>>()?;
        let spectrum = numeric_spectrum(&c, &diamond, config)?;
        let report = sensitivity(&spectrum, &noise, c.diode.wavelength)?;
        Ok(BetaStudyEntry {
            beta,
            kink: has_threshold_kink(&currents, &powers),
            currents: currents.clone(),
            powers,
            report,
        })
    });
    entries.into_iter().collect()
}

/// Spectrum through the numeric steady-state solver regardless of β.
fn numeric_spectrum(chain: &SensorChain, diamond: &DiamondResponse, config: &OdmrConfig) -> Result<OdmrSpectrum> {
    config.validate()?;
    let pair = chain.thresholds(diamond)?;
    let drive = config.drive_current.unwrap_or(pair.off.i_th);
    let mut powers = Vec::with_capacity(config.frequencies.len());
    let mut thresholds = Vec::with_capacity(config.frequencies.len());
    for &f in &config.frequencies {
        let alpha_d = diamond.alpha_off + config.weight(f) * (diamond.alpha_on - diamond.alpha_off);
        let state = chain.cavity_state(alpha_d)?;
        powers.push(solve_steady_state(&chain.diode, state.alpha_t, drive, state.eta_o)?.p_out);
        thresholds.push(state.i_th);
    }
    Ok(OdmrSpectrum {
        frequencies: config.frequencies.clone(),
        powers,
        threshold_currents: thresholds,
        metadata: SpectrumMetadata {
            i_th_on: pair.on.i_th,
            i_th_off: pair.off.i_th,
            drive_current: drive,
            contrast: diamond.contrast,
            center_frequency: config.center_frequency,
            linewidth: config.linewidth,
            parameter_hash: chain.parameter_hash(),
        },
    })
}
