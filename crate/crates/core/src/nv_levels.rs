//! Eight-level NV⁻/NV⁰ rate-equation model.
//!
//! Level labels follow the usual convention:
//!
//! | index | state |
//! |-------|-------|
//! | 1 | ³A₂ m_s = 0 |
//! | 2 | ³A₂ m_s = ±1 |
//! | 3, 4 | ³E excited triplet (m_s = 0, ±1) |
//! | 5, 6 | singlet shelving states (¹A₁, ¹E) |
//! | 7, 8 | NV⁰ ground and excited |
//!
//! Dark (intensity-independent) transitions come from a [`RateConstantSet`].
//! Optical transitions are wired in by the model: green excitation 1→3 and
//! 2→4, photo-ionisation 3,4→7, NV⁰ excitation 7→8 and recombination 8→1,
//! each with rate `σ_pump · Φ`, where Φ is the photon flux of the pump.

use std::fmt;
use std::path::Path;

use nalgebra::{SMatrix, SVector};

use crate::constants::{photon_energy, ppm_to_number_density, PUMP_WAVELENGTH};
use crate::error::{check_non_negative, check_positive, Error, Result};

pub const LEVELS: usize = 8;

pub type Matrix8 = SMatrix<f64, LEVELS, LEVELS>;

/// One-based NV level label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NvLevelIndex(u8);

impl NvLevelIndex {
    pub const GROUND_MS0: Self = Self(1);
    pub const GROUND_MS1: Self = Self(2);
    pub const EXCITED_MS0: Self = Self(3);
    pub const EXCITED_MS1: Self = Self(4);
    pub const SINGLET_UPPER: Self = Self(5);
    pub const SINGLET_LOWER: Self = Self(6);
    pub const NV0_GROUND: Self = Self(7);
    pub const NV0_EXCITED: Self = Self(8);

    pub fn new(value: u8) -> Result<Self> {
        if (1..=8).contains(&value) {
            Ok(Self(value))
        } else {
            Err(Error::invalid("level", format!("{value} is not in 1..=8")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    fn slot(self) -> usize {
        usize::from(self.0 - 1)
    }
}

impl fmt::Display for NvLevelIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Literature-derived transition rates and cross sections.
///
/// `absorption_*` cross sections enter the green absorption coefficient;
/// `pump_*` cross sections convert photon flux into transition rates.
#[derive(Debug, Clone, PartialEq)]
pub struct RateConstantSet {
    /// `dark[from][to]` in s⁻¹, zero-based slots.
    dark: [[f64; LEVELS]; LEVELS],
    pub absorption_nvm: f64,
    pub absorption_nv0: f64,
    pub absorption_ionisation: f64,
    pub absorption_recombination: f64,
    pub pump_nvm: f64,
    pub pump_nv0: f64,
    pub pump_ionisation: f64,
    pub pump_recombination: f64,
    pub provenance: String,
}

const DEFAULT_RATES: &str = include_str!("../data/rates_default.txt");

/// Keys accepted after `sigma.`.
const SIGMA_KEYS: [&str; 8] = [
    "g", "g0", "e", "r", "pump_g", "pump_g0", "pump_e", "pump_r",
];

impl RateConstantSet {
    /// The shipped rate set (`data/rates_default.txt`).
    pub fn literature_default() -> Self {
        Self::parse(DEFAULT_RATES, "rates_default.txt").expect("bundled rate file is valid")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses the flat `key = value` rate format.
    ///
    /// Accepted keys: `rate.<from>.<to>` (s⁻¹), `sigma.<name>` (m²) and
    /// `provenance`. Anything after `#` is a comment.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut dark = [[0.0; LEVELS]; LEVELS];
        let mut sigma = [None::<f64>; 8];
        let mut provenance = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: origin.to_string(),
                line: lineno + 1,
                message,
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if key == "provenance" {
                provenance = Some(value.to_string());
                continue;
            }
            let number: f64 = value
                .parse()
                .map_err(|_| err(format!("`{value}` is not a number")))?;
            if !number.is_finite() || number < 0.0 {
                return Err(err(format!("`{key}` must be finite and >= 0")));
            }
            if let Some(rest) = key.strip_prefix("rate.") {
                let (from, to) = rest
                    .split_once('.')
                    .ok_or_else(|| err(format!("malformed rate key `{key}`")))?;
                let parse_level = |s: &str| {
                    s.parse::<u8>()
                        .ok()
                        .and_then(|v| NvLevelIndex::new(v).ok())
                        .ok_or_else(|| err(format!("bad level `{s}` in `{key}`")))
                };
                let (from, to) = (parse_level(from)?, parse_level(to)?);
                if from == to {
                    return Err(err(format!("self transition `{key}`")));
                }
                dark[from.slot()][to.slot()] = number;
            } else if let Some(name) = key.strip_prefix("sigma.") {
                let slot = SIGMA_KEYS
                    .iter()
                    .position(|k| *k == name)
                    .ok_or_else(|| err(format!("unknown cross section `{key}`")))?;
                sigma[slot] = Some(number);
            } else {
                return Err(err(format!("unknown key `{key}`")));
            }
        }
        let mut values = [0.0; 8];
        for (slot, v) in sigma.iter().enumerate() {
            values[slot] = v.ok_or_else(|| Error::Parse {
                path: origin.to_string(),
                line: 0,
                message: format!("missing `sigma.{}`", SIGMA_KEYS[slot]),
            })?;
        }
        let set = Self {
            dark,
            absorption_nvm: values[0],
            absorption_nv0: values[1],
            absorption_ionisation: values[2],
            absorption_recombination: values[3],
            pump_nvm: values[4],
            pump_nv0: values[5],
            pump_ionisation: values[6],
            pump_recombination: values[7],
            provenance: provenance.unwrap_or_else(|| origin.to_string()),
        };
        set.validate()?;
        Ok(set)
    }

    /// Serialises back to the flat key-value format.
    pub fn to_kv(&self) -> String {
        let mut out = format!("provenance = {}\n", self.provenance);
        for from in 0..LEVELS {
            for to in 0..LEVELS {
                let r = self.dark[from][to];
                if r != 0.0 {
                    out.push_str(&format!("rate.{}.{} = {:e}\n", from + 1, to + 1, r));
                }
            }
        }
        let values = self.sigma_values();
        for (name, v) in SIGMA_KEYS.iter().zip(values) {
            out.push_str(&format!("sigma.{name} = {v:e}\n"));
        }
        out
    }

    fn sigma_values(&self) -> [f64; 8] {
        [
            self.absorption_nvm,
            self.absorption_nv0,
            self.absorption_ionisation,
            self.absorption_recombination,
            self.pump_nvm,
            self.pump_nv0,
            self.pump_ionisation,
            self.pump_recombination,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for row in &self.dark {
            for &r in row {
                check_non_negative("rate", r)?;
            }
        }
        for (name, v) in SIGMA_KEYS.iter().zip(self.sigma_values()) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation {
                    field: format!("sigma.{name}"),
                    value: v.to_string(),
                    bound: "> 0".into(),
                });
            }
        }
        // Every excited state needs a way back down.
        for level in [3u8, 4, 5, 6, 8] {
            let idx = NvLevelIndex(level);
            let out: f64 = self.dark[idx.slot()].iter().sum();
            if out <= 0.0 {
                return Err(Error::Validation {
                    field: format!("rate.{level}.*"),
                    value: "0".into(),
                    bound: "level needs at least one decay channel".into(),
                });
            }
        }
        Ok(())
    }

    pub fn dark_rate(&self, from: NvLevelIndex, to: NvLevelIndex) -> f64 {
        self.dark[from.slot()][to.slot()]
    }

    pub fn set_dark_rate(&mut self, from: NvLevelIndex, to: NvLevelIndex, rate: f64) -> Result<()> {
        check_non_negative("rate", rate)?;
        if from == to {
            return Err(Error::invalid("rate", "self transition"));
        }
        self.dark[from.slot()][to.slot()] = rate;
        Ok(())
    }
}

/// How the microwave Rabi frequency maps onto an incoherent 1↔2 mixing rate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum MicrowaveMixing {
    /// `k = Ω² T₂* / 2` with `Ω = 2π Ω_R`.
    #[default]
    IncoherentLimit,
    /// Fixed rate in s⁻¹, ignoring Ω_R and T₂*.
    Fixed(f64),
}

impl MicrowaveMixing {
    pub fn rate(self, rabi_frequency: f64, t2_star: f64) -> f64 {
        match self {
            MicrowaveMixing::IncoherentLimit => {
                let omega = 2.0 * std::f64::consts::PI * rabi_frequency;
                0.5 * omega * omega * t2_star
            }
            MicrowaveMixing::Fixed(rate) => rate,
        }
    }
}

/// Diamond sample: NV⁻ density, dephasing time, thickness and rates.
#[derive(Debug, Clone, PartialEq)]
pub struct NvSystem {
    pub density_ppm: f64,
    pub t2_star: f64,
    pub thickness: f64,
    pub rates: RateConstantSet,
    pub mixing: MicrowaveMixing,
}

impl NvSystem {
    pub fn new(density_ppm: f64, t2_star: f64, thickness: f64, rates: RateConstantSet) -> Result<Self> {
        let sys = Self {
            density_ppm,
            t2_star,
            thickness,
            rates,
            mixing: MicrowaveMixing::default(),
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("density_ppm", self.density_ppm)?;
        check_positive("t2_star", self.t2_star)?;
        check_positive("thickness", self.thickness)?;
        if let MicrowaveMixing::Fixed(r) = self.mixing {
            check_non_negative("mixing_rate", r)?;
        }
        Ok(())
    }

    /// NV⁻ number density in m⁻³.
    pub fn number_density(&self) -> f64 {
        ppm_to_number_density(self.density_ppm)
    }

    /// ODMR full width at half maximum, `1 / (π T₂*)`.
    pub fn linewidth(&self) -> f64 {
        1.0 / (std::f64::consts::PI * self.t2_star)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpCondition {
    /// Optical intensity at the diamond (W/m²).
    pub intensity: f64,
    /// Microwave Rabi frequency Ω_R (Hz).
    pub rabi_frequency: f64,
    pub microwaves_on: bool,
}

impl PumpCondition {
    pub fn new(intensity: f64, rabi_frequency: f64, microwaves_on: bool) -> Result<Self> {
        check_non_negative("intensity", intensity)?;
        check_non_negative("rabi_frequency", rabi_frequency)?;
        Ok(Self {
            intensity,
            rabi_frequency,
            microwaves_on,
        })
    }

    pub fn with_microwaves(self, on: bool) -> Self {
        Self {
            microwaves_on: on,
            ..self
        }
    }

    /// Pump photon flux (photons m⁻² s⁻¹).
    pub fn photon_flux(&self) -> f64 {
        self.intensity / photon_energy(PUMP_WAVELENGTH)
    }
}

/// Column-generator of the level populations: `dn/dt = M n`.
///
/// Entry `(j, i)` is the rate of `i → j`; each diagonal entry is minus the
/// sum of the other entries of its column.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix(pub Matrix8);

impl RateMatrix {
    pub fn matrix(&self) -> &Matrix8 {
        &self.0
    }

    /// Largest `|column sum| / max|entry|` over all columns.
    pub fn max_relative_column_sum(&self) -> f64 {
        let scale = self.0.amax().max(f64::MIN_POSITIVE);
        (0..LEVELS)
            .map(|c| self.0.column(c).sum().abs() / scale)
            .fold(0.0, f64::max)
    }

    /// Time derivative `M n` for an occupancy vector.
    pub fn apply(&self, n: &[f64; LEVELS]) -> [f64; LEVELS] {
        let v = self.0 * SVector::<f64, LEVELS>::from_column_slice(n);
        let mut out = [0.0; LEVELS];
        out.copy_from_slice(v.as_slice());
        out
    }

    /// Builds a generator from off-diagonal transition rates, `rates[from][to]`.
    pub fn from_transition_rates(rates: &[[f64; LEVELS]; LEVELS]) -> Result<Self> {
        let mut m = Matrix8::zeros();
        for from in 0..LEVELS {
            for to in 0..LEVELS {
                if from != to {
                    let r = check_non_negative("rate", rates[from][to])?;
                    m[(to, from)] += r;
                }
            }
        }
        for c in 0..LEVELS {
            let off: f64 = (0..LEVELS).filter(|&r| r != c).map(|r| m[(r, c)]).sum();
            m[(c, c)] = -off;
        }
        Ok(Self(m))
    }
}

/// Assembles the rate matrix for a sample under a given pump.
pub fn build_rate_matrix(sys: &NvSystem, pump: &PumpCondition) -> Result<RateMatrix> {
    sys.validate()?;
    check_non_negative("intensity", pump.intensity)?;
    check_non_negative("rabi_frequency", pump.rabi_frequency)?;

    let r = &sys.rates;
    let flux = pump.photon_flux();
    let mut t = r.dark;
    let mut add = |from: NvLevelIndex, to: NvLevelIndex, rate: f64| {
        t[from.slot()][to.slot()] += rate;
    };
    use NvLevelIndex as L;
    add(L::GROUND_MS0, L::EXCITED_MS0, r.pump_nvm * flux);
    add(L::GROUND_MS1, L::EXCITED_MS1, r.pump_nvm * flux);
    add(L::EXCITED_MS0, L::NV0_GROUND, r.pump_ionisation * flux);
    add(L::EXCITED_MS1, L::NV0_GROUND, r.pump_ionisation * flux);
    add(L::NV0_GROUND, L::NV0_EXCITED, r.pump_nv0 * flux);
    add(L::NV0_EXCITED, L::GROUND_MS0, r.pump_recombination * flux);
    if pump.microwaves_on {
        let k = sys.mixing.rate(pump.rabi_frequency, sys.t2_star);
        add(L::GROUND_MS0, L::GROUND_MS1, k);
        add(L::GROUND_MS1, L::GROUND_MS0, k);
    }
    RateMatrix::from_transition_rates(&t)
}

/// Normalised level populations (sum to one).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occupancies(pub [f64; LEVELS]);

impl Occupancies {
    pub fn get(&self, level: NvLevelIndex) -> f64 {
        self.0[level.slot()]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn triplet_ground(&self) -> f64 {
        self.0[0] + self.0[1]
    }

    pub fn singlet(&self) -> f64 {
        self.0[4] + self.0[5]
    }

    pub fn nv0(&self) -> f64 {
        self.0[6] + self.0[7]
    }
}

/// Relative singular-value threshold below which a direction counts as null.
const NULL_TOLERANCE: f64 = 1e-12;

/// Steady state of a conservative generator: its normalised null vector.
pub fn solve_occupancies(matrix: &RateMatrix) -> Result<Occupancies> {
    let m = matrix.matrix();
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("rate matrix", "non-finite entry"));
    }
    let svd = m.svd(false, false);
    let smax = svd.singular_values.max();
    if smax == 0.0 {
        return Err(Error::DegenerateSteadyState {
            dimension: LEVELS,
            matrix: format!("{m:e}"),
        });
    }
    let nullity = svd
        .singular_values
        .iter()
        .filter(|&&s| s <= NULL_TOLERANCE * smax)
        .count();
    if nullity > 1 {
        return Err(Error::DegenerateSteadyState {
            dimension: nullity,
            matrix: format!("{m:e}"),
        });
    }

    // Rows of a generator are linearly dependent, so one of them can be
    // swapped for the normalisation constraint.
    let mut a = *m;
    a.row_mut(0).fill(1.0);
    let mut b = SVector::<f64, LEVELS>::zeros();
    b[0] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or(Error::Singular { what: "steady-state occupancies" })?;

    let mut n = [0.0; LEVELS];
    for (slot, v) in n.iter_mut().zip(x.iter()) {
        *slot = v.max(0.0);
    }
    let total: f64 = n.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Singular { what: "steady-state occupancies" });
    }
    for v in &mut n {
        *v /= total;
    }
    Ok(Occupancies(n))
}

/// Per-level number densities (m⁻³) with and without resonant microwaves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelDensities {
    pub on: [f64; LEVELS],
    pub off: [f64; LEVELS],
}

/// Spreads the NV⁻ density over the levels. Microwaves address one of the
/// four NV orientations, so the on-resonance mix is ¼ driven + ¾ undriven.
pub fn number_densities(sys: &NvSystem, occ_on: &Occupancies, occ_off: &Occupancies) -> Result<LevelDensities> {
    let total = sys.number_density();
    let sum_on = occ_on.total();
    let sum_off = occ_off.total();
    for (name, occ, sum) in [("occ_on", occ_on, sum_on), ("occ_off", occ_off, sum_off)] {
        if !(sum > 0.0) || occ.0.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid(name, "occupancies must be finite, >= 0 and not all zero"));
        }
    }
    let mut on = [0.0; LEVELS];
    let mut off = [0.0; LEVELS];
    for i in 0..LEVELS {
        off[i] = total * occ_off.0[i] / sum_off;
        on[i] = 0.25 * total * occ_on.0[i] / sum_on + 0.75 * total * occ_off.0[i] / sum_off;
    }
    Ok(LevelDensities { on, off })
}

/// Green absorption coefficient (m⁻¹) for one set of level densities.
pub fn absorption_coefficient(rates: &RateConstantSet, densities: &[f64; LEVELS]) -> f64 {
    rates.absorption_nvm * (densities[0] + densities[1])
        + rates.absorption_nv0 * densities[6]
        + rates.absorption_ionisation * (densities[2] + densities[3])
        + rates.absorption_recombination * densities[7]
}

/// Single-pass power transmission `exp(-α d)`.
pub fn single_pass_transmission(sys: &NvSystem, alpha: f64) -> Result<f64> {
    check_non_negative("alpha", alpha)?;
    Ok((-alpha * sys.thickness).exp())
}

/// Everything the absorption model produces for one pump condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AbsorptionState {
    pub occ_off: Occupancies,
    pub occ_on: Occupancies,
    pub alpha_off: f64,
    pub alpha_on: f64,
    pub transmission_off: f64,
    pub transmission_on: f64,
}

impl AbsorptionState {
    /// Off-resonance fraction of the pump absorbed in one pass.
    pub fn absorption_off(&self) -> f64 {
        1.0 - self.transmission_off
    }

    /// Gain in single-pass transmission when driven on resonance,
    /// `exp(-α_on d) - exp(-α_off d)`. Positive when the microwaves reduce
    /// absorption.
    pub fn contrast(&self) -> f64 {
        self.transmission_on - self.transmission_off
    }
}

/// Solves both microwave branches and the resulting absorption.
pub fn absorption_state(sys: &NvSystem, pump: &PumpCondition) -> Result<AbsorptionState> {
    let occ_off = solve_occupancies(&build_rate_matrix(sys, &pump.with_microwaves(false))?)?;
    let occ_on = solve_occupancies(&build_rate_matrix(sys, &pump.with_microwaves(true))?)?;
    let dens = number_densities(sys, &occ_on, &occ_off)?;
    let alpha_off = absorption_coefficient(&sys.rates, &dens.off);
    let alpha_on = absorption_coefficient(&sys.rates, &dens.on);
    Ok(AbsorptionState {
        occ_off,
        occ_on,
        alpha_off,
        alpha_on,
        transmission_off: single_pass_transmission(sys, alpha_off)?,
        transmission_on: single_pass_transmission(sys, alpha_on)?,
    })
}

/// Absorption contrast `exp(-α_on d) - exp(-α_off d)`.
pub fn absorption_contrast(sys: &NvSystem, pump: &PumpCondition) -> Result<f64> {
    Ok(absorption_state(sys, pump)?.contrast())
}

/// Contrast and occupancy panels over a (Ω_R, intensity) grid.
///
/// Maps are row-major with one row per Rabi frequency. Occupancy panels
/// show the microwave-driven orientation class.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMap {
    pub rabi: Vec<f64>,
    pub intensity: Vec<f64>,
    pub contrast: Vec<f64>,
    pub triplet_ground: Vec<f64>,
    pub nv0: Vec<f64>,
    pub singlet: Vec<f64>,
}

impl ContrastMap {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.contrast[row * self.intensity.len() + col]
    }

    pub fn max_contrast(&self) -> f64 {
        self.contrast.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn check_grid(field: &'static str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::invalid(field, "grid is empty"));
    }
    if grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid(field, "grid values must be finite and > 0"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(field, "grid must be strictly increasing"));
    }
    Ok(())
}

pub fn contrast_map(sys: &NvSystem, rabi_grid: &[f64], intensity_grid: &[f64]) -> Result<ContrastMap> {
    check_grid("rabi_grid", rabi_grid)?;
    check_grid("intensity_grid", intensity_grid)?;
    let cols = intensity_grid.len();
    let cells = rabi_grid.len() * cols;
    let eval = |idx: usize| -> Result<(f64, Occupancies)> {
        let (row, col) = (idx / cols, idx % cols);
        let pump = PumpCondition {
            intensity: intensity_grid[col],
            rabi_frequency: rabi_grid[row],
            microwaves_on: true,
        };
        absorption_state(sys, &pump)
            .map(|s| (s.contrast(), s.occ_on))
            .map_err(|e| Error::Cell {
                row,
                col,
                coords: format!("rabi={} Hz, intensity={} W/m^2", rabi_grid[row], intensity_grid[col]),
                source: Box::new(e),
            })
    };
    let results: Vec<Result<(f64, Occupancies)>> = crate::par_map(cells, eval);

    let mut map = ContrastMap {
        rabi: rabi_grid.to_vec(),
        intensity: intensity_grid.to_vec(),
        contrast: Vec::with_capacity(cells),
        triplet_ground: Vec::with_capacity(cells),
        nv0: Vec::with_capacity(cells),
        singlet: Vec::with_capacity(cells),
    };
    for r in results {
        let (c, occ) = r?;
        map.contrast.push(c);
        map.triplet_ground.push(occ.triplet_ground());
        map.nv0.push(occ.nv0());
        map.singlet.push(occ.singlet());
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d3() -> NvSystem {
        NvSystem::new(10.0, 1e-7, 500e-6, RateConstantSet::literature_default()).unwrap()
    }

    #[test]
    fn level_index_bounds() {
        assert!(NvLevelIndex::new(0).is_err());
        assert!(NvLevelIndex::new(9).is_err());
        assert_eq!(NvLevelIndex::new(7).unwrap(), NvLevelIndex::NV0_GROUND);
    }

    #[test]
    fn zero_intensity_has_no_optical_terms() {
        let sys = d3();
        let pump = PumpCondition::new(0.0, 1e6, false).unwrap();
        let m = build_rate_matrix(&sys, &pump).unwrap();
        assert_eq!(m.0[(2, 0)], 0.0);
        assert_eq!(m.0[(3, 1)], 0.0);
        assert_eq!(m.0[(6, 2)], 0.0);
        // no mixing beyond the dark spin relaxation
        let dark = sys.rates.dark_rate(NvLevelIndex::GROUND_MS0, NvLevelIndex::GROUND_MS1);
        assert_eq!(m.0[(1, 0)], dark);
        assert!(m.max_relative_column_sum() < 1e-15);
    }

    #[test]
    fn microwaves_add_symmetric_mixing() {
        let sys = d3();
        let off = build_rate_matrix(&sys, &PumpCondition::new(1e4, 1e6, false).unwrap()).unwrap();
        let on = build_rate_matrix(&sys, &PumpCondition::new(1e4, 1e6, true).unwrap()).unwrap();
        let k = MicrowaveMixing::IncoherentLimit.rate(1e6, 1e-7);
        assert!(((on.0[(1, 0)] - off.0[(1, 0)]) - k).abs() <= 1e-9 * k);
        assert!(((on.0[(0, 1)] - off.0[(0, 1)]) - k).abs() <= 1e-9 * k);
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = d3();
        let pump = PumpCondition {
            intensity: -1.0,
            rabi_frequency: 0.0,
            microwaves_on: false,
        };
        assert!(build_rate_matrix(&sys, &pump).is_err());
        let pump = PumpCondition {
            intensity: f64::NAN,
            rabi_frequency: 0.0,
            microwaves_on: false,
        };
        assert!(build_rate_matrix(&sys, &pump).is_err());
        assert!(NvSystem::new(-1.0, 1e-7, 5e-4, RateConstantSet::literature_default()).is_err());
    }

    #[test]
    fn absorbing_state_gets_everything() {
        let mut rates = [[0.0; LEVELS]; LEVELS];
        for from in 1..LEVELS {
            rates[from][0] = 1e6 * from as f64;
        }
        let m = RateMatrix::from_transition_rates(&rates).unwrap();
        let n = solve_occupancies(&m).unwrap();
        assert_eq!(n.0, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn disconnected_graph_is_reported() {
        let mut rates = [[0.0; LEVELS]; LEVELS];
        rates[2][0] = 1.0;
        rates[3][1] = 1.0;
        for from in 4..LEVELS {
            rates[from][0] = 1.0;
        }
        let m = RateMatrix::from_transition_rates(&rates).unwrap();
        match solve_occupancies(&m) {
            Err(Error::DegenerateSteadyState { dimension, .. }) => assert_eq!(dimension, 2),
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn equal_branches_give_equal_densities() {
        let sys = d3();
        let n = Occupancies([0.5, 0.2, 0.05, 0.05, 0.0, 0.1, 0.08, 0.02]);
        let d = number_densities(&sys, &n, &n).unwrap();
        for i in 0..LEVELS {
            assert!((d.on[i] - d.off[i]).abs() <= 1e-12 * d.off[i].max(1.0));
        }
        let total: f64 = d.on.iter().sum();
        assert!((total - sys.number_density()).abs() <= 1e-12 * total);
    }

    #[test]
    fn singlet_population_does_not_absorb() {
        let rates = RateConstantSet::literature_default();
        let mut dens = [0.0; LEVELS];
        dens[4] = 1e23;
        dens[5] = 1e23;
        assert_eq!(absorption_coefficient(&rates, &dens), 0.0);
    }

    #[test]
    fn zero_alpha_transmits_everything() {
        assert_eq!(single_pass_transmission(&d3(), 0.0).unwrap(), 1.0);
        assert!(single_pass_transmission(&d3(), -1.0).is_err());
    }

    #[test]
    fn no_drive_no_contrast() {
        let pump = PumpCondition::new(1e6, 0.0, true).unwrap();
        assert_eq!(absorption_contrast(&d3(), &pump).unwrap(), 0.0);
    }

    #[test]
    fn rate_file_round_trips() {
        let rates = RateConstantSet::literature_default();
        let again = RateConstantSet::parse(&rates.to_kv(), "roundtrip").unwrap();
        assert_eq!(rates, again);
    }

    #[test]
    fn rate_file_errors_carry_line_numbers() {
        let text = "# header\nsigma.g = 1e-21\nrate.9.1 = 5\n";
        match RateConstantSet::parse(text, "bad.txt") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(RateConstantSet::parse("sigma.bogus = 1", "x").is_err());
        assert!(RateConstantSet::parse("rate.3.1 = -2", "x").is_err());
    }

    #[test]
    fn grid_must_increase() {
        assert!(contrast_map(&d3(), &[1e6, 1e5], &[1e4]).is_err());
        assert!(contrast_map(&d3(), &[1e6], &[0.0]).is_err());
    }

    #[test]
    fn single_cell_map_matches_direct_evaluation() {
        let sys = d3();
        let map = contrast_map(&sys, &[1e6], &[1e5]).unwrap();
        let direct = absorption_contrast(&sys, &PumpCondition::new(1e5, 1e6, true).unwrap()).unwrap();
        assert_eq!(map.at(0, 0), direct);
    }
}
