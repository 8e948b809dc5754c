//! Three-mirror external cavity reduced to an equivalent two-mirror cavity.
//!
//! The diode chip (length `L_m`, back facet `R1`, front facet `R2`) couples
//! to an external mirror `R3` a distance `L_r` away. The diamond sits in the
//! external arm; its loss is spread over the composite length
//! `L = L_m + L_r`.

use serde::{Deserialize, Serialize};

use crate::error::{check_non_negative, check_positive, Error, Result};

/// How the front facet and external mirror combine into one reflectivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReflectivityModel {
    /// Phase-neglected sum over all external round trips,
    /// `r_e = (r2 + r3 T) / (1 + r2 r3 T)` with `T` the one-way power
    /// transmission of the external path (equal to the round-trip amplitude
    /// factor). Always within `[0, 1]`.
    #[default]
    MultiBounce,
    /// First-order composition `r_e = r2 + (1 - R2) T r3`, clamped to 1.
    SingleBounce,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    /// Diode chip length `L_m` (m).
    pub diode_length: f64,
    /// External cavity length `L_r` (m).
    pub external_length: f64,
    /// Back facet power reflectivity (output coupler).
    pub r1: f64,
    /// Front facet power reflectivity.
    pub r2: f64,
    /// External mirror power reflectivity.
    pub r3: f64,
    /// Intrinsic gain-medium loss `α_c` (m⁻¹).
    pub alpha_c: f64,
    /// One-way power transmission of the external arm, diamond excluded.
    pub external_transmission: f64,
    pub reflectivity_model: ReflectivityModel,
}

impl CavityGeometry {
    pub fn validate(&self) -> Result<()> {
        check_positive("diode_length", self.diode_length)?;
        check_positive("external_length", self.external_length)?;
        check_reflectivity("r1", self.r1, false)?;
        check_reflectivity("r2", self.r2, true)?;
        check_reflectivity("r3", self.r3, true)?;
        check_non_negative("alpha_c", self.alpha_c)?;
        check_reflectivity("external_transmission", self.external_transmission, false)?;
        Ok(())
    }

    /// Composite cavity length `L = L_m + L_r`.
    pub fn length(&self) -> f64 {
        self.diode_length + self.external_length
    }

    pub fn effective_reflectivity(&self) -> Result<f64> {
        effective_reflectivity(self, self.external_transmission)
    }
}

/// `zero_ok` permits a dark mirror, needed for the degenerate limits.
fn check_reflectivity(field: &'static str, v: f64, zero_ok: bool) -> Result<f64> {
    let low_ok = if zero_ok { v >= 0.0 } else { v > 0.0 };
    if v.is_finite() && low_ok && v <= 1.0 {
        Ok(v)
    } else {
        let bound = if zero_ok { "[0, 1]" } else { "(0, 1]" };
        Err(Error::Validation {
            field: field.into(),
            value: v.to_string(),
            bound: bound.into(),
        })
    }
}

/// Effective reflectivity of the front facet plus external arm.
pub fn effective_reflectivity(geom: &CavityGeometry, external_transmission: f64) -> Result<f64> {
    check_reflectivity("r2", geom.r2, true)?;
    check_reflectivity("r3", geom.r3, true)?;
    check_reflectivity("external_transmission", external_transmission, false)?;
    let r2 = geom.r2.sqrt();
    let r3 = geom.r3.sqrt();
    let t = external_transmission;
    let re = match geom.reflectivity_model {
        ReflectivityModel::MultiBounce => (r2 + r3 * t) / (1.0 + r2 * r3 * t),
        ReflectivityModel::SingleBounce => (r2 + (1.0 - geom.r2) * t * r3).min(1.0),
    };
    Ok(re * re)
}

/// Facet reflectivity at normal incidence against air, `((n-1)/(n+1))²`.
pub fn fresnel_facet_reflectivity(n_medium: f64) -> Result<f64> {
    if !(n_medium.is_finite() && n_medium >= 1.0) {
        return Err(Error::invalid("n_medium", format!("must be >= 1, got {n_medium}")));
    }
    let r = (n_medium - 1.0) / (n_medium + 1.0);
    Ok(r * r)
}

/// Diamond loss spread over the composite cavity, `α_d d / L`.
pub fn distributed_diamond_loss(alpha_d: f64, thickness: f64, length: f64) -> Result<f64> {
    check_non_negative("alpha_d", alpha_d)?;
    check_non_negative("thickness", thickness)?;
    check_positive("length", length)?;
    Ok(alpha_d * thickness / length)
}

/// Mirror loss `(1/L) ln(1/√(R1 R_e))` (m⁻¹).
pub fn mirror_loss(geom: &CavityGeometry, r_e: f64) -> Result<f64> {
    let product = geom.r1 * r_e;
    if !(product > 0.0 && product <= 1.0) {
        return Err(Error::Validation {
            field: "r1*r_e".into(),
            value: product.to_string(),
            bound: "(0, 1]".into(),
        });
    }
    Ok(-0.5 * product.ln() / geom.length())
}

/// Total loss `α_t = α_c + α_e + (1/L) ln(1/√(R1 R_e))` (m⁻¹).
pub fn total_cavity_loss(geom: &CavityGeometry, alpha_e: f64) -> Result<f64> {
    geom.validate()?;
    check_non_negative("alpha_e", alpha_e)?;
    let r_e = geom.effective_reflectivity()?;
    Ok(geom.alpha_c + alpha_e + mirror_loss(geom, r_e)?)
}

/// Fraction of generated photons leaving through `R1`:
/// `α_m1 / (α_m + α_c + α_e)` with `α_m1 = (1/L) ln(1/√R1)`.
pub fn output_coupling_efficiency(geom: &CavityGeometry, alpha_e: f64) -> Result<f64> {
    geom.validate()?;
    check_non_negative("alpha_e", alpha_e)?;
    let r_e = geom.effective_reflectivity()?;
    let alpha_m1 = -0.5 * geom.r1.ln() / geom.length();
    let total = mirror_loss(geom, r_e)? + geom.alpha_c + alpha_e;
    if total <= 0.0 {
        return Err(Error::invalid("cavity loss", "zero total loss leaves output coupling undefined"));
    }
    Ok(alpha_m1 / total)
}
