//! Complete description of a simulated device and measurement.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::coupling::{calibrate_kappa, CouplingSettings};
use crate::dynamics::RabiSettings;
use crate::error::{Error, Result};
use crate::magnonics::SpectrumSettings;
use crate::nv::{ensemble_orientations, OdmrSettings};
use crate::params::{DeviceGeometry, DriveConfig, FieldConfig, MaterialParams};
use crate::scalar::Real;

/// Size and seed of the random NV ensemble in one nanodiamond.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleSettings {
    pub size: usize,
    pub seed: u64,
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self { size: 500, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct Scenario<T: Real> {
    pub material: MaterialParams<T>,
    pub geometry: DeviceGeometry<T>,
    pub field: FieldConfig<T>,
    pub drive: DriveConfig<T>,
    pub spectrum: SpectrumSettings<T>,
    pub odmr: OdmrSettings<T>,
    pub coupling: CouplingSettings<T>,
    pub rabi_decay: RabiSettings<T>,
    pub ensemble: EnsembleSettings,
}

impl<T: Real> Scenario<T> {
    /// Checks every block; errors name the offending key as `block.key`.
    pub fn validate(&self) -> Result<()> {
        at("material", self.material.validate())?;
        at("geometry", self.geometry.validate())?;
        at("field", self.field.validate())?;
        at("drive", self.drive.validate())?;
        at("spectrum", self.spectrum.validate())?;
        at("odmr", self.odmr.validate())?;
        at("coupling", self.coupling.validate())?;
        at("rabi_decay", self.rabi_decay.validate())?;
        if self.ensemble.size == 0 {
            return Err(Error::Configuration("ensemble.size = 0: must be > 0".into()));
        }
        Ok(())
    }

    /// Spin-wave coupling scale, G per sqrt(mW). Unless fixed explicitly it
    /// is calibrated on the theta = 0 reference measurement, since it is a
    /// property of the device rather than of the field orientation.
    pub fn kappa_sw(&self) -> Result<T> {
        if let Some(k) = self.coupling.kappa_sw {
            return Ok(k);
        }
        calibrate_kappa(
            &self.coupling,
            &self.geometry,
            T::zero(),
            &self.material,
            &self.spectrum,
        )
        .map(|(k, _)| k)
    }

    pub fn ensemble(&self) -> Result<Vec<Vector3<T>>> {
        ensemble_orientations(self.ensemble.size, self.ensemble.seed)
    }
}

fn at(section: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::InvalidParameter { name, value, reason } => {
            Error::Configuration(format!("{section}.{name} = {value}: {reason}"))
        }
        other => Error::Configuration(format!("{section}: {other}")),
    })
}
