//! Physical parameters of the atom–cavity system and the scaling laws that
//! map a symmetric Fabry–Perot geometry onto (g₀, κ, w₀).
//!
//! All frequencies are angular frequencies in rad/s. Helpers [`mhz`],
//! [`khz`] and [`to_mhz`] convert at the presentation boundary.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Rounded total detection efficiency used for rate estimates.
pub const NOMINAL_DETECTION_EFFICIENCY: f64 = 0.4;

/// Angular frequency (rad/s) from a frequency in MHz.
pub fn mhz(f: f64) -> f64 {
    2.0 * PI * f * 1e6
}

/// Angular frequency (rad/s) from a frequency in kHz.
pub fn khz(f: f64) -> f64 {
    2.0 * PI * f * 1e3
}

/// Frequency in MHz from an angular frequency in rad/s.
pub fn to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e6)
}

pub fn to_khz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e3)
}

/// Rates and lengths of the single-atom cavity QED system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Peak coupling at an antinode on the mode axis.
    pub g0: f64,
    /// Cavity field decay rate, half width at half maximum of the resonance.
    pub kappa: f64,
    /// Natural linewidth (population decay rate) of the atomic transition.
    pub gamma: f64,
    /// Zeeman shift Δ of the excited sublevel addressed by the probe.
    pub zeeman_shift: f64,
    pub wavelength: f64,
    pub waist: f64,
    /// Rabi frequency of the excitation beam at the reference power.
    pub rabi: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            g0: mhz(2.8),
            kappa: mhz(4.5),
            gamma: khz(182.0),
            zeeman_shift: mhz(71.0),
            wavelength: 556e-9,
            waist: 19e-6,
            rabi: mhz(1.4),
        }
    }
}

impl SystemParams {
    /// Checks positivity. `g0 = 0` is accepted so the decoupled limit can be
    /// expressed with the same type.
    pub fn validate(&self) -> Result<()> {
        check_finite_nonneg("g0", self.g0)?;
        check_positive("kappa", self.kappa)?;
        check_positive("gamma", self.gamma)?;
        check_positive("zeeman_shift", self.zeeman_shift)?;
        check_positive("wavelength", self.wavelength)?;
        check_positive("waist", self.waist)?;
        check_finite_nonneg("rabi", self.rabi)?;
        Ok(())
    }

    /// g₀² / (κγ); the strong-Purcell regime needs this well above one.
    pub fn purcell_ratio(&self) -> f64 {
        self.g0 * self.g0 / (self.kappa * self.gamma)
    }

    /// Cavity-enhanced emission rate through the output mirror on resonance,
    /// κΩ²/4g₀², valid for g₀² ≫ κγ.
    pub fn purcell_emission_rate(&self) -> f64 {
        self.kappa * self.rabi * self.rabi / (4.0 * self.g0 * self.g0)
    }

    pub fn with_g0(mut self, g0: f64) -> Self {
        self.g0 = g0;
        self
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }
}

/// Symmetric two-mirror Fabry–Perot resonator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityGeometry {
    pub length: f64,
    pub mirror_roc: f64,
    /// Intensity reflectivity of each mirror.
    pub reflectivity: f64,
}

impl Default for CavityGeometry {
    fn default() -> Self {
        Self {
            length: 150e-6,
            mirror_roc: 50e-3,
            reflectivity: 0.999972,
        }
    }
}

impl CavityGeometry {
    pub fn new(length: f64, mirror_roc: f64, reflectivity: f64) -> Result<Self> {
        let geom = Self {
            length,
            mirror_roc,
            reflectivity,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("mirror_roc", self.mirror_roc)?;
        let max = 2.0 * self.mirror_roc;
        if !(self.length > 0.0 && self.length < max) {
            return Err(Error::UnstableGeometry {
                length: self.length,
                max,
            });
        }
        if !(self.reflectivity > 0.0 && self.reflectivity < 1.0) {
            return Err(Error::InvalidParameter {
                name: "reflectivity",
                value: self.reflectivity,
                reason: "must lie strictly between 0 and 1",
            });
        }
        Ok(())
    }

    pub fn with_length(mut self, length: f64) -> Self {
        self.length = length;
        self
    }

    pub fn with_reflectivity(mut self, reflectivity: f64) -> Self {
        self.reflectivity = reflectivity;
        self
    }

    /// F = π√ρ / (1 − ρ).
    pub fn finesse(&self) -> f64 {
        PI * self.reflectivity.sqrt() / (1.0 - self.reflectivity)
    }

    /// Free spectral range in Hz.
    pub fn free_spectral_range(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.length)
    }
}

/// Efficiencies along the photon detection path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionChain {
    pub cavity_escape: f64,
    pub fiber_coupling: f64,
    pub detector_qe: f64,
    /// Coupling of the probe into the cavity mode. Not part of η.
    pub input_coupling: f64,
}

impl Default for DetectionChain {
    fn default() -> Self {
        Self {
            cavity_escape: 0.9,
            fiber_coupling: 0.7,
            detector_qe: 0.6,
            input_coupling: 0.6,
        }
    }
}

impl DetectionChain {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("cavity_escape", self.cavity_escape),
            ("fiber_coupling", self.fiber_coupling),
            ("detector_qe", self.detector_qe),
            ("input_coupling", self.input_coupling),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "efficiency must lie in (0, 1]",
                });
            }
        }
        Ok(())
    }

    /// η = escape × fiber × QE for a photon emitted into the cavity mode.
    pub fn total_efficiency(&self) -> f64 {
        self.cavity_escape * self.fiber_coupling * self.detector_qe
    }
}

/// Gaussian waist of the fundamental mode of a symmetric cavity,
/// w₀² = (Lλ/2π)·√(2R/L − 1).
pub fn derive_waist(geom: &CavityGeometry, wavelength: f64) -> Result<f64> {
    geom.validate()?;
    check_positive("wavelength", wavelength)?;
    let l = geom.length;
    let w2 = l * wavelength / (2.0 * PI) * (2.0 * geom.mirror_roc / l - 1.0).sqrt();
    Ok(w2.sqrt())
}

/// Cavity HWHM linewidth as an angular frequency: κ = 2π · FSR / (2F).
pub fn derive_kappa(geom: &CavityGeometry) -> Result<f64> {
    geom.validate()?;
    let hwhm_hz = geom.free_spectral_range() / (2.0 * geom.finesse());
    Ok(2.0 * PI * hwhm_hz)
}

/// Operating point the geometric scaling laws are calibrated against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityAnchor {
    pub geometry: CavityGeometry,
    pub params: SystemParams,
}

impl Default for CavityAnchor {
    fn default() -> Self {
        Self {
            geometry: CavityGeometry::default(),
            params: SystemParams::default(),
        }
    }
}

impl CavityAnchor {
    /// System parameters for a different geometry. g₀ follows the mode
    /// volume, κ follows the finesse/FSR ratio relative to the anchor, γ is
    /// unchanged. At the anchor geometry this returns the anchor parameters
    /// (apart from the waist, which is recomputed).
    pub fn scaled_params(&self, geom: &CavityGeometry) -> Result<SystemParams> {
        let kappa_ratio = derive_kappa(geom)? / derive_kappa(&self.geometry)?;
        Ok(SystemParams {
            g0: derive_g0(geom, self)?,
            kappa: self.params.kappa * kappa_ratio,
            waist: derive_waist(geom, self.params.wavelength)?,
            ..self.params
        })
    }
}

/// Peak coupling for a new geometry, scaled by the mode volume ∝ w₀²L:
/// g₀(L) = g₀ₐ · √(w₀ₐ² Lₐ / (w₀(L)² L)).
pub fn derive_g0(geom: &CavityGeometry, anchor: &CavityAnchor) -> Result<f64> {
    let lambda = anchor.params.wavelength;
    let w_anchor = derive_waist(&anchor.geometry, lambda)?;
    let w = derive_waist(geom, lambda)?;
    let ratio = (w_anchor * w_anchor * anchor.geometry.length) / (w * w * geom.length);
    Ok(anchor.params.g0 * ratio.sqrt())
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and strictly positive",
        })
    }
}

fn check_finite_nonneg(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and non-negative",
        })
    }
}

/// Flat key–value parameter file. Every key is optional; missing keys fall
/// back to the compiled-in defaults. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g0_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_khz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zeeman_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wavelength_nm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub waist_um: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rabi_mhz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length_um: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub roc_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reflectivity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cavity_escape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fiber_coupling: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detector_qe: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_coupling: Option<f64>,
}

/// Fully resolved parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResolvedParams {
    pub system: SystemParams,
    pub geometry: CavityGeometry,
    pub detection: DetectionChain,
}

impl ResolvedParams {
    pub fn anchor(&self) -> CavityAnchor {
        CavityAnchor {
            geometry: self.geometry,
            params: self.system,
        }
    }
}

impl ParamFile {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat table of floats always serializes")
    }

    pub fn resolve(&self) -> Result<ResolvedParams> {
        let d = ResolvedParams::default();
        let system = SystemParams {
            g0: self.g0_mhz.map_or(d.system.g0, mhz),
            kappa: self.kappa_mhz.map_or(d.system.kappa, mhz),
            gamma: self.gamma_khz.map_or(d.system.gamma, khz),
            zeeman_shift: self.zeeman_mhz.map_or(d.system.zeeman_shift, mhz),
            wavelength: self.wavelength_nm.map_or(d.system.wavelength, |v| v * 1e-9),
            waist: self.waist_um.map_or(d.system.waist, |v| v * 1e-6),
            rabi: self.rabi_mhz.map_or(d.system.rabi, mhz),
        };
        let geometry = CavityGeometry {
            length: self.length_um.map_or(d.geometry.length, |v| v * 1e-6),
            mirror_roc: self.roc_mm.map_or(d.geometry.mirror_roc, |v| v * 1e-3),
            reflectivity: self.reflectivity.unwrap_or(d.geometry.reflectivity),
        };
        let detection = DetectionChain {
            cavity_escape: self.cavity_escape.unwrap_or(d.detection.cavity_escape),
            fiber_coupling: self.fiber_coupling.unwrap_or(d.detection.fiber_coupling),
            detector_qe: self.detector_qe.unwrap_or(d.detection.detector_qe),
            input_coupling: self.input_coupling.unwrap_or(d.detection.input_coupling),
        };
        system.validate()?;
        geometry.validate()?;
        detection.validate()?;
        Ok(ResolvedParams {
            system,
            geometry,
            detection,
        })
    }

    /// Every key populated from a resolved set, for manifests.
    pub fn from_resolved(r: &ResolvedParams) -> Self {
        Self {
            g0_mhz: Some(tidy(to_mhz(r.system.g0))),
            kappa_mhz: Some(tidy(to_mhz(r.system.kappa))),
            gamma_khz: Some(tidy(to_khz(r.system.gamma))),
            zeeman_mhz: Some(tidy(to_mhz(r.system.zeeman_shift))),
            wavelength_nm: Some(tidy(r.system.wavelength * 1e9)),
            waist_um: Some(tidy(r.system.waist * 1e6)),
            rabi_mhz: Some(tidy(to_mhz(r.system.rabi))),
            length_um: Some(tidy(r.geometry.length * 1e6)),
            roc_mm: Some(tidy(r.geometry.mirror_roc * 1e3)),
            reflectivity: Some(tidy(r.geometry.reflectivity)),
            cavity_escape: Some(tidy(r.detection.cavity_escape)),
            fiber_coupling: Some(tidy(r.detection.fiber_coupling)),
            detector_qe: Some(tidy(r.detection.detector_qe)),
            input_coupling: Some(tidy(r.detection.input_coupling)),
        }
    }
}

/// Drops the last few bits of unit-conversion noise so a manifest reads
/// back to the same values it was written from.
fn tidy(v: f64) -> f64 {
    format!("{v:.12e}").parse().unwrap_or(v)
}
