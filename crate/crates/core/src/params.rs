//! Parameter containers and unit conventions.
//!
//! Units are fixed across the crate:
//!
//! | quantity        | unit              |
//! |-----------------|-------------------|
//! | frequency       | MHz               |
//! | magnetic field  | gauss             |
//! | length          | micrometers (ND standoff in nanometers) |
//! | time            | microseconds      |
//! | power           | milliwatts        |
//! | wave vector     | rad/um            |
//!
//! A gyromagnetic ratio times a field is therefore a frequency in MHz, and a
//! frequency times a time is a dimensionless number of cycles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Vacuum permeability in T*m/A.
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;
/// Gauss per tesla.
pub const GAUSS_PER_TESLA: f64 = 1.0e4;

/// Accepted zero-field splitting window in MHz when no override is requested.
pub const ZFS_RANGE: (f64, f64) = (2800.0, 2900.0);

/// Magnetic film and NV constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct MaterialParams<T> {
    /// Film gyromagnetic ratio, MHz/G.
    pub gamma_m: T,
    /// Saturation magnetization 4*pi*Ms, G.
    pub four_pi_ms: T,
    /// Film thickness, um.
    pub thickness: T,
    /// Gilbert damping, dimensionless.
    pub alpha_gilbert: T,
    /// NV electron gyromagnetic ratio, MHz/G.
    pub gamma_e: T,
    /// NV zero-field splitting D, MHz.
    pub d_zfs: T,
    /// Lifts the `ZFS_RANGE` restriction on `d_zfs`.
    #[serde(default)]
    pub zfs_override: bool,
}

impl<T: Real> MaterialParams<T> {
    pub fn new(gamma_m: T, four_pi_ms: T, thickness: T, alpha_gilbert: T, gamma_e: T, d_zfs: T) -> Result<Self> {
        let p = Self {
            gamma_m,
            four_pi_ms,
            thickness,
            alpha_gilbert,
            gamma_e,
            d_zfs,
            zfs_override: false,
        };
        p.validate()?;
        Ok(p)
    }

    /// Replaces `d_zfs` without the range restriction (it must still be positive).
    pub fn with_zfs_override(mut self, d_zfs: T) -> Result<Self> {
        self.d_zfs = d_zfs;
        self.zfs_override = true;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        positive("gamma_m", self.gamma_m)?;
        positive("four_pi_ms", self.four_pi_ms)?;
        positive("thickness", self.thickness)?;
        positive("gamma_e", self.gamma_e)?;
        positive("d_zfs", self.d_zfs)?;
        let a = to_f64(self.alpha_gilbert);
        if !(a > 0.0 && a < 0.1) {
            return Err(Error::invalid("alpha_gilbert", a, "must lie in (0, 0.1)"));
        }
        let d = to_f64(self.d_zfs);
        if !self.zfs_override && !(ZFS_RANGE.0..=ZFS_RANGE.1).contains(&d) {
            return Err(Error::invalid(
                "d_zfs",
                d,
                "must lie in [2800, 2900] MHz unless zfs_override is set",
            ));
        }
        Ok(())
    }

    /// f_M = gamma_m * 4*pi*Ms, MHz.
    pub fn f_m(&self) -> T {
        self.gamma_m * self.four_pi_ms
    }

    /// f_H = gamma_m * B, MHz.
    pub fn f_h(&self, b_gauss: T) -> T {
        self.gamma_m * b_gauss
    }
}

impl<T: Real> Default for MaterialParams<T> {
    fn default() -> Self {
        default_params()
    }
}

/// Canonical YIG film / NV parameter set.
///
/// Thickness is that of the measured film; the remaining constants are
/// standard literature values for single-crystal YIG and the NV ground state.
pub fn default_params<T: Real>() -> MaterialParams<T> {
    MaterialParams {
        gamma_m: lit(2.80),
        four_pi_ms: lit(1780.0),
        thickness: lit(3.08),
        alpha_gilbert: lit(1.0e-4),
        gamma_e: lit(2.8024),
        d_zfs: lit(2870.0),
        zfs_override: false,
    }
}

/// Antenna and nanodiamond placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct DeviceGeometry<T> {
    /// Microstrip width w, um.
    pub msl_width: T,
    /// Distance between the two microstrips, um.
    pub msl_separation: T,
    /// Lateral nanodiamond distance from the driving strip center, um.
    pub nd_x: T,
    /// Nanodiamond standoff above the film surface, nm.
    pub nd_z: T,
    /// Strip conductor thickness, um. Only used to reject field points inside the metal.
    #[serde(default = "default_msl_thickness")]
    pub msl_thickness: T,
}

fn default_msl_thickness<T: Real>() -> T {
    lit(0.2)
}

impl<T: Real> DeviceGeometry<T> {
    pub fn new(msl_width: T, msl_separation: T, nd_x: T, nd_z: T) -> Result<Self> {
        let g = Self {
            msl_width,
            msl_separation,
            nd_x,
            nd_z,
            msl_thickness: default_msl_thickness(),
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        positive("msl_width", self.msl_width)?;
        if !(self.msl_separation > self.msl_width) {
            return Err(Error::invalid(
                "msl_separation",
                to_f64(self.msl_separation),
                "must exceed msl_width",
            ));
        }
        non_negative("nd_x", self.nd_x)?;
        non_negative("nd_z", self.nd_z)?;
        non_negative("msl_thickness", self.msl_thickness)?;
        Ok(())
    }

    /// Same device with the nanodiamond moved to `nd_x` um.
    pub fn at_distance(mut self, nd_x: T) -> Self {
        self.nd_x = nd_x;
        self
    }
}

impl<T: Real> Default for DeviceGeometry<T> {
    fn default() -> Self {
        Self {
            msl_width: lit(5.0),
            msl_separation: lit(100.0),
            nd_x: lit(20.0),
            nd_z: lit(50.0),
            msl_thickness: default_msl_thickness(),
        }
    }
}

/// In-plane bias field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct FieldConfig<T> {
    /// Bias magnitude, G.
    pub b_ext: T,
    /// Angle between the bias field and the antenna axis, rad, in [0, 2*pi).
    pub theta: T,
}

impl<T: Real> FieldConfig<T> {
    pub fn new(b_ext: T, theta: T) -> Result<Self> {
        let f = Self { b_ext, theta };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        non_negative("b_ext", self.b_ext)?;
        let t = to_f64(self.theta);
        if !(0.0..2.0 * std::f64::consts::PI).contains(&t) {
            return Err(Error::invalid("theta", t, "must lie in [0, 2*pi)"));
        }
        Ok(())
    }

    pub fn with_field(mut self, b_ext: T) -> Self {
        self.b_ext = b_ext;
        self
    }

    /// Unit vector of the bias in the film plane; x runs along the antenna.
    pub fn direction(&self) -> nalgebra::Vector3<T> {
        nalgebra::Vector3::new(self.theta.cos(), self.theta.sin(), T::zero())
    }
}

impl<T: Real> Default for FieldConfig<T> {
    fn default() -> Self {
        Self {
            b_ext: lit(145.0),
            theta: T::zero(),
        }
    }
}

/// Microwave source settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct DriveConfig<T> {
    /// Power delivered to the antenna, mW.
    pub power: T,
    /// Drive frequency, MHz.
    pub frequency: T,
    /// Line impedance, ohm.
    pub impedance: T,
}

impl<T: Real> DriveConfig<T> {
    pub fn new(power: T, frequency: T, impedance: T) -> Result<Self> {
        let d = Self {
            power,
            frequency,
            impedance,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        non_negative("power", self.power)?;
        positive("frequency", self.frequency)?;
        positive("impedance", self.impedance)?;
        Ok(())
    }

    pub fn with_power(mut self, power: T) -> Self {
        self.power = power;
        self
    }

    pub fn with_frequency(mut self, frequency: T) -> Self {
        self.frequency = frequency;
        self
    }

    /// Antenna current amplitude in A.
    pub fn current(&self) -> Result<T> {
        convert_power_to_current(self.power, self.impedance)
    }
}

impl<T: Real> Default for DriveConfig<T> {
    fn default() -> Self {
        Self {
            power: lit(1.0e-3),
            frequency: lit(2862.0),
            impedance: lit(50.0),
        }
    }
}

/// I = sqrt(P / Z) with P in mW, Z in ohm; returns amperes.
pub fn convert_power_to_current<T: Real>(power_mw: T, impedance: T) -> Result<T> {
    if !(power_mw >= T::zero()) {
        return Err(Error::invalid("power", to_f64(power_mw), "must be >= 0"));
    }
    positive("impedance", impedance)?;
    Ok((power_mw * lit(1.0e-3) / impedance).sqrt())
}

fn positive<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, to_f64(v), "must be finite and > 0"))
    }
}

fn non_negative<T: Real>(name: &'static str, v: T) -> Result<()> {
    if v >= T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, to_f64(v), "must be finite and >= 0"))
    }
}
