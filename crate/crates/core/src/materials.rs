//! Frequency-dependent building material physics.
//!
//! Materials follow the ITU-R P.2040 power-law fit
//! `eps_r' = a * f_GHz^b`, `sigma = c * f_GHz^d` (S/m). Slabs are ordered
//! layer stacks whose per-pass attenuations add in dB.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::SPEED_OF_LIGHT;

/// Vacuum permittivity (F/m), CODATA 2022.
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_818_8e-12;
/// Vacuum permeability (H/m), CODATA 2022.
pub const VACUUM_PERMEABILITY: f64 = 1.256_637_061_27e-6;

/// Default ITU-seeded material and slab table.
pub const DEFAULT_MATERIALS_TOML: &str = include_str!("../config/materials.toml");

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MaterialError {
    #[error("distance must be positive, got {0} m")]
    NonPositiveDistance(f64),
    #[error("frequency must be positive, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("material {name}: {reason}")]
    InvalidMaterial { name: String, reason: String },
    #[error("slab {name}: {reason}")]
    InvalidSlab { name: String, reason: String },
    #[error("unknown material {0:?}")]
    UnknownMaterial(String),
    #[error("unknown slab {0:?}")]
    UnknownSlab(String),
    #[error("material table: {0}")]
    Parse(String),
}

/// ITU power-law fit parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Material {
    pub const AIR: Material = Material {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 0.0,
    };

    pub fn validate(&self, name: &str) -> Result<(), MaterialError> {
        let bad = |reason: &str| MaterialError::InvalidMaterial {
            name: name.to_owned(),
            reason: reason.to_owned(),
        };
        if ![self.a, self.b, self.c, self.d].iter().all(|v| v.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        if self.a <= 0.0 {
            return Err(bad("a must be positive"));
        }
        if self.c < 0.0 {
            return Err(bad("c must be non-negative"));
        }
        Ok(())
    }

    /// Real relative permittivity at `f_hz`.
    pub fn permittivity(&self, f_hz: f64) -> f64 {
        self.a * (f_hz / 1e9).powf(self.b)
    }

    /// Conductivity in S/m at `f_hz`.
    pub fn conductivity(&self, f_hz: f64) -> f64 {
        if self.c == 0.0 {
            return 0.0;
        }
        self.c * (f_hz / 1e9).powf(self.d)
    }

    /// Complex relative permittivity `eps_r' - j sigma / (2 pi f eps_0)`.
    pub fn complex_permittivity(&self, f_hz: f64) -> Complex64 {
        let eps = self.permittivity(f_hz);
        let sigma = self.conductivity(f_hz);
        Complex64::new(eps, -sigma / (2.0 * PI * f_hz * VACUUM_PERMITTIVITY))
    }

    /// Single-pass attenuation in dB through thickness `t` metres.
    pub fn transmission_loss_db(&self, f_hz: f64, t: f64) -> f64 {
        let sigma = self.conductivity(f_hz);
        if sigma == 0.0 {
            return 0.0;
        }
        let eps = self.permittivity(f_hz);
        let loss_tangent = sigma / (2.0 * PI * f_hz * VACUUM_PERMITTIVITY * eps);
        // sqrt(1 + x^2) - 1 written to stay accurate for small x.
        let excess = loss_tangent * loss_tangent / ((1.0 + loss_tangent * loss_tangent).sqrt() + 1.0);
        12.27 * PI * f_hz * t * (VACUUM_PERMEABILITY * VACUUM_PERMITTIVITY * eps).sqrt() * excess.sqrt()
    }
}

pub fn permittivity(m: &Material, f_hz: f64) -> f64 {
    m.permittivity(f_hz)
}

pub fn conductivity(m: &Material, f_hz: f64) -> f64 {
    m.conductivity(f_hz)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub material: Material,
    pub thickness: f64,
}

/// Ordered layer stack. `opaque` slabs block transmission entirely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabSpec {
    pub name: String,
    pub layers: Vec<Layer>,
    #[serde(default)]
    pub opaque: bool,
}

impl SlabSpec {
    pub fn single(name: &str, material: Material, thickness: f64) -> Self {
        Self {
            name: name.to_owned(),
            layers: vec![Layer { material, thickness }],
            opaque: false,
        }
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        if self.layers.is_empty() {
            return Err(MaterialError::InvalidSlab {
                name: self.name.clone(),
                reason: "no layers".into(),
            });
        }
        for (i, layer) in self.layers.iter().enumerate() {
            layer.material.validate(&format!("{}[{i}]", self.name))?;
            if !(layer.thickness > 0.0 && layer.thickness.is_finite()) {
                return Err(MaterialError::InvalidSlab {
                    name: self.name.clone(),
                    reason: format!("layer {i} thickness must be positive"),
                });
            }
        }
        Ok(())
    }

    pub fn thickness(&self) -> f64 {
        self.layers.iter().map(|l| l.thickness).sum()
    }

    /// Material met first by an incident wave; used for reflection.
    pub fn facing_material(&self) -> Material {
        self.layers.first().map(|l| l.material).unwrap_or(Material::AIR)
    }
}

/// Slab transmission loss in dB: per-layer single-pass attenuation summed over
/// the stack (no internal multiple reflections). `+inf` for opaque slabs.
pub fn transmission_loss_db(slab: &SlabSpec, f_hz: f64) -> f64 {
    if slab.opaque {
        return f64::INFINITY;
    }
    slab.layers
        .iter()
        .map(|l| l.material.transmission_loss_db(f_hz, l.thickness))
        .sum()
}

/// Friis free-space loss `20 log10(4 pi d f / c)`.
pub fn free_space_path_loss_db(d: f64, f_hz: f64) -> Result<f64, MaterialError> {
    if !(d > 0.0) {
        return Err(MaterialError::NonPositiveDistance(d));
    }
    if !(f_hz > 0.0) {
        return Err(MaterialError::NonPositiveFrequency(f_hz));
    }
    Ok(20.0 * (4.0 * PI * d * f_hz / SPEED_OF_LIGHT).log10())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Polarization {
    /// Electric field perpendicular to the plane of incidence.
    #[default]
    Te,
    /// Electric field in the plane of incidence.
    Tm,
}

/// Fresnel reflection coefficient of a lossy half-space.
pub fn fresnel_reflection(eps: Complex64, incidence_angle: f64, pol: Polarization) -> Complex64 {
    let cos_i = incidence_angle.cos();
    let sin2 = incidence_angle.sin().powi(2);
    let root = (eps - sin2).sqrt();
    match pol {
        Polarization::Te => (cos_i - root) / (cos_i + root),
        Polarization::Tm => (eps * cos_i - root) / (eps * cos_i + root),
    }
}

/// Reflection loss `-20 log10 |Gamma|` of the slab's facing material treated
/// as a half-space. `+inf` when the material is index-matched to free space.
pub fn reflection_loss_db(slab: &SlabSpec, f_hz: f64, incidence_angle: f64, pol: Polarization) -> f64 {
    let eps = slab.facing_material().complex_permittivity(f_hz);
    let gamma = fresnel_reflection(eps, incidence_angle, pol).norm();
    if gamma == 0.0 {
        return f64::INFINITY;
    }
    -20.0 * gamma.log10()
}

/// Scalar excess loss of an edge-diffracted path over free space on the full
/// two-leg length: `L0 + 10 gamma log10(f / f0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffractionLossModel {
    pub l0_db: f64,
    pub gamma: f64,
    pub f0_hz: f64,
}

/// 6 dB at 1 GHz (the knife-edge loss on the shadow boundary), growing by
/// 5 dB per decade.
impl Default for DiffractionLossModel {
    fn default() -> Self {
        Self {
            l0_db: 6.0,
            gamma: 0.5,
            f0_hz: 1e9,
        }
    }
}

pub fn diffraction_loss_db(model: &DiffractionLossModel, f_hz: f64) -> f64 {
    model.l0_db + 10.0 * model.gamma * (f_hz / model.f0_hz).log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BandLabel {
    FR1,
    FR2,
    FR3,
}

impl BandLabel {
    /// FR1 below 7.125 GHz, FR3 up to 24.25 GHz, FR2 above.
    pub fn from_frequency(f_hz: f64) -> Self {
        if f_hz < 7.125e9 {
            BandLabel::FR1
        } else if f_hz < 24.25e9 {
            BandLabel::FR3
        } else {
            BandLabel::FR2
        }
    }
}

impl std::fmt::Display for BandLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            BandLabel::FR1 => "FR1",
            BandLabel::FR2 => "FR2",
            BandLabel::FR3 => "FR3",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for BandLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "FR1" => Ok(BandLabel::FR1),
            "FR2" => Ok(BandLabel::FR2),
            "FR3" => Ok(BandLabel::FR3),
            other => Err(format!("unknown band {other:?}")),
        }
    }
}

/// Radio parameters at one carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub label: BandLabel,
    pub center_frequency: f64,
    pub bandwidth: f64,
    pub tx_power_dbm: f64,
    pub rx_processing_gain_db: f64,
}

impl Band {
    pub fn validate(&self) -> Result<(), MaterialError> {
        if !(self.center_frequency > 0.0) {
            return Err(MaterialError::NonPositiveFrequency(self.center_frequency));
        }
        if !(self.bandwidth > 0.0) {
            return Err(MaterialError::NonPositiveFrequency(self.bandwidth));
        }
        Ok(())
    }
}

/// Slab definition as written in the material table: layers reference
/// materials by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabDef {
    pub layers: Vec<LayerDef>,
    #[serde(default)]
    pub opaque: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerDef {
    pub material: String,
    pub thickness: f64,
}

/// Named materials and slab stacks, loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialTable {
    pub materials: BTreeMap<String, Material>,
    pub slabs: BTreeMap<String, SlabDef>,
}

impl Default for MaterialTable {
    fn default() -> Self {
        Self::from_toml(DEFAULT_MATERIALS_TOML).expect("bundled material table is valid")
    }
}

impl MaterialTable {
    pub fn from_toml(text: &str) -> Result<Self, MaterialError> {
        let table: MaterialTable = toml::from_str(text).map_err(|e| MaterialError::Parse(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("material table serialises")
    }

    pub fn validate(&self) -> Result<(), MaterialError> {
        for (name, m) in &self.materials {
            m.validate(name)?;
        }
        for name in self.slabs.keys() {
            self.slab(name)?.validate()?;
        }
        Ok(())
    }

    pub fn material(&self, name: &str) -> Result<Material, MaterialError> {
        self.materials
            .get(name)
            .copied()
            .ok_or_else(|| MaterialError::UnknownMaterial(name.to_owned()))
    }

    /// Resolves a named slab into a self-contained [`SlabSpec`].
    pub fn slab(&self, name: &str) -> Result<SlabSpec, MaterialError> {
        let def = self
            .slabs
            .get(name)
            .ok_or_else(|| MaterialError::UnknownSlab(name.to_owned()))?;
        let layers = def
            .layers
            .iter()
            .map(|l| {
                Ok(Layer {
                    material: self.material(&l.material)?,
                    thickness: l.thickness,
                })
            })
            .collect::<Result<Vec<_>, MaterialError>>()?;
        Ok(SlabSpec {
            name: name.to_owned(),
            layers,
            opaque: def.opaque,
        })
    }
}
