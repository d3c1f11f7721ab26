//! Desk-scale simulator of a magnetic film (YIG) coupled to NV-center spin
//! ensembles in nanodiamonds.
//!
//! Every model is generic over [`scalar::Real`]; the `*F64` aliases below fix
//! the scalar to `f64`, which is what the command-line tool uses.

// `!(x > 0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coupling;
pub mod dynamics;
pub mod error;
pub mod magnonics;
pub mod nv;
pub mod params;
pub mod scalar;
pub mod scenario;
pub mod sensing;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ParamsF64 = params::MaterialParams<f64>;
pub type GeometryF64 = params::DeviceGeometry<f64>;
pub type FieldF64 = params::FieldConfig<f64>;
pub type DriveF64 = params::DriveConfig<f64>;
pub type ModeF64 = magnonics::SWMode<f64>;
pub type TransmissionF64 = magnonics::TransmissionMap<f64>;
pub type NvF64 = nv::NVConfig<f64>;
pub type OdmrF64 = nv::OdmrMap<f64>;
pub type SequenceF64 = dynamics::PulseSequence<f64>;
pub type DecoherenceF64 = dynamics::DecoherenceParams<f64>;
pub type SensingF64 = sensing::SensingConfig<f64>;
pub type ScenarioF64 = scenario::Scenario<f64>;
