//! Physical constants and fixed model conventions.
//!
//! SI values are the exact 2019 SI definitions (CODATA 2018) unless noted.

/// Elementary charge (C), exact.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant (J s), exact.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Speed of light in vacuum (m/s), exact.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// NV gyromagnetic ratio used for frequency-to-field conversion: 28 Hz per nT.
pub const NV_GYROMAGNETIC_HZ_PER_T: f64 = 2.8e10;

/// Carbon atom number density of diamond (m^-3).
pub const DIAMOND_ATOM_DENSITY: f64 = 1.76e29;

/// Converts an NV concentration in ppm to a number density in m^-3.
pub fn ppm_to_number_density(ppm: f64) -> f64 {
    ppm * DIAMOND_ATOM_DENSITY * 1e-6
}

/// Green pump wavelength used for the photon-flux conversion (m).
pub const PUMP_WAVELENGTH: f64 = 532e-9;

/// Default group index of the semiconductor waveguide.
pub const DEFAULT_GROUP_INDEX: f64 = 3.5;

/// Photon energy at `wavelength` (J).
pub fn photon_energy(wavelength: f64) -> f64 {
    PLANCK * SPEED_OF_LIGHT / wavelength
}

/// Snapshot of the constants a run depends on, emitted alongside results.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConstantsRegistry {
    pub elementary_charge: f64,
    pub planck: f64,
    pub speed_of_light: f64,
    pub gyromagnetic_hz_per_t: f64,
    pub diamond_atom_density: f64,
    pub default_group_index: f64,
}

impl Default for ConstantsRegistry {
    fn default() -> Self {
        Self {
            elementary_charge: ELEMENTARY_CHARGE,
            planck: PLANCK,
            speed_of_light: SPEED_OF_LIGHT,
            gyromagnetic_hz_per_t: NV_GYROMAGNETIC_HZ_PER_T,
            diamond_atom_density: DIAMOND_ATOM_DENSITY,
            default_group_index: DEFAULT_GROUP_INDEX,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gyromagnetic_ratio_is_28_hz_per_nt() {
        assert!((NV_GYROMAGNETIC_HZ_PER_T * 1e-9 - 28.0).abs() < 1e-12);
    }

    #[test]
    fn green_photon_voltage() {
        // hc/(q lambda) at 532 nm
        let v = photon_energy(532e-9) / ELEMENTARY_CHARGE;
        assert!((v - 2.3305).abs() < 1e-3);
    }
}
