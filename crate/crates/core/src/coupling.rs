//! Microwave field at the nanodiamond: the antenna near field and the stray
//! field of the spin waves it launches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnonics::{mode_ladder, stray_factor, SWMode, SpectrumSettings};
use crate::nv::find_matching_orientation;
use crate::params::{DeviceGeometry, DriveConfig, FieldConfig, MaterialParams, GAUSS_PER_TESLA, MU0};
use crate::scalar::{lit, to_f64, Real};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Antenna,
    SpinWave,
}

/// Transverse drive amplitude at the nanodiamond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveField<T> {
    /// G.
    pub amplitude: T,
    pub channel: Channel,
    /// Ladder mode carrying the largest share of a spin-wave drive.
    pub contributing_mode: Option<SWMode<T>>,
}

/// Global spin-wave coupling scale and the reference point that fixes it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct CouplingSettings<T> {
    /// Spin-wave field per sqrt(mW) at unit geometric factor, G. `None`
    /// calibrates it from the reference below.
    pub kappa_sw: Option<T>,
    /// Antenna distance of the calibration point, um.
    pub reference_distance: T,
    /// Amplification imposed at the calibration point.
    pub reference_amplification: T,
    /// Low (antenna-driven) and high (spin-wave-driven) bias, G.
    pub b_low: T,
    pub b_high: T,
    /// Target frequency for the matched orientation, MHz.
    pub f_target: T,
}

impl<T: Real> Default for CouplingSettings<T> {
    fn default() -> Self {
        Self {
            kappa_sw: None,
            reference_distance: lit(20.0),
            reference_amplification: lit(100.0),
            b_low: lit(15.0),
            b_high: lit(145.0),
            f_target: lit(2862.0),
        }
    }
}

impl<T: Real> CouplingSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.kappa_sw {
            let k = to_f64(k);
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::invalid("kappa_sw", k, "must be finite and > 0"));
            }
        }
        for (name, v) in [
            ("reference_distance", self.reference_distance),
            ("reference_amplification", self.reference_amplification),
            ("b_high", self.b_high),
            ("f_target", self.f_target),
        ] {
            let v = to_f64(v);
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, v, "must be finite and > 0"));
            }
        }
        let lo = to_f64(self.b_low);
        if !(lo >= 0.0 && lo < to_f64(self.b_high)) {
            return Err(Error::invalid("b_low", lo, "must satisfy 0 <= b_low < b_high"));
        }
        Ok(())
    }
}

/// Antenna field magnitude at the nanodiamond, G.
///
/// The strip is a thin current sheet of width w carrying I = sqrt(P / Z):
///
/// ```text
/// Bx = mu0 K / (2 pi) [atan((x + w/2) / z) - atan((x - w/2) / z)]
/// Bz = mu0 K / (4 pi) ln(((x + w/2)^2 + z^2) / ((x - w/2)^2 + z^2))
/// ```
///
/// with K = I / w. Far from the strip this tends to mu0 I / (2 pi r).
pub fn antenna_field<T: Real>(drive: &DriveConfig<T>, geometry: &DeviceGeometry<T>) -> Result<T> {
    field_at(drive, geometry, geometry.nd_x, geometry.nd_z * lit(1e-3))
}

fn field_at<T: Real>(drive: &DriveConfig<T>, geometry: &DeviceGeometry<T>, x: T, z: T) -> Result<T> {
    let half = geometry.msl_width / lit(2.0);
    if x.abs() <= half && z <= geometry.msl_thickness {
        return Err(Error::InsideConductor {
            x_um: to_f64(x),
            z_nm: to_f64(z) * 1e3,
        });
    }
    let current = drive.current()?;
    // K in A/m with the width in metres; the geometric terms are scale free.
    let k_sheet = current / (geometry.msl_width * lit(1e-6));
    let mu0: T = lit(MU0);
    let bx = mu0 * k_sheet / T::two_pi() * (((x + half) / z).atan() - ((x - half) / z).atan());
    let num = (x + half) * (x + half) + z * z;
    let den = (x - half) * (x - half) + z * z;
    let bz = mu0 * k_sheet / (lit::<T>(2.0) * T::two_pi()) * (num / den).ln();
    Ok((bx * bx + bz * bz).sqrt() * lit(GAUSS_PER_TESLA))
}

/// Geometric spin-wave drive factor at frequency `f` and distance `x` (um):
///
/// ```text
/// G(f, x) = sum_n w(f - f_n) eta_n s_n exp(-x / L_n)
/// ```
///
/// where `w` is the drive window, `eta_n` the excitation efficiency and `s_n`
/// the stray-field factor at the nanodiamond height. Also returns the mode
/// with the largest term.
pub fn sw_geometric_factor<T: Real>(
    f: T,
    x: T,
    ladder: &[SWMode<T>],
    geometry: &DeviceGeometry<T>,
    params: &MaterialParams<T>,
    settings: &SpectrumSettings<T>,
) -> (T, Option<SWMode<T>>) {
    let mut total = T::zero();
    let mut best: Option<(T, SWMode<T>)> = None;
    for m in ladder {
        let w = settings.drive_window.weight(f - m.frequency);
        if w == T::zero() {
            continue;
        }
        let term =
            w * m.efficiency * stray_factor(m.k, m.surface_side, geometry.nd_z, params) * (-x / m.decay_length).exp();
        total += term;
        if best.is_none_or(|(b, _)| term > b) {
            best = Some((term, *m));
        }
    }
    (total, best.map(|(_, m)| m))
}

/// Spin-wave drive at the nanodiamond: kappa_sw sqrt(P) G(f, nd_x).
///
/// A frequency with no ladder mode inside the drive window yields amplitude 0.
pub fn sw_drive_field<T: Real>(
    drive: &DriveConfig<T>,
    geometry: &DeviceGeometry<T>,
    field: &FieldConfig<T>,
    params: &MaterialParams<T>,
    settings: &SpectrumSettings<T>,
    kappa_sw: T,
) -> Result<DriveField<T>> {
    drive.validate()?;
    let ladder = mode_ladder(field, params, geometry, settings)?;
    let (g, mode) = sw_geometric_factor(drive.frequency, geometry.nd_x, &ladder, geometry, params, settings);
    Ok(DriveField {
        amplitude: kappa_sw * drive.power.sqrt() * g,
        channel: Channel::SpinWave,
        contributing_mode: mode,
    })
}

/// Antenna drive wrapped as a [`DriveField`].
pub fn antenna_drive_field<T: Real>(drive: &DriveConfig<T>, geometry: &DeviceGeometry<T>) -> Result<DriveField<T>> {
    Ok(DriveField {
        amplitude: antenna_field(drive, geometry)?,
        channel: Channel::Antenna,
        contributing_mode: None,
    })
}

/// kappa_sw such that the amplification at the reference point equals the
/// configured value. Returns (kappa_sw, matched frequency).
pub fn calibrate_kappa<T: Real>(
    coupling: &CouplingSettings<T>,
    geometry: &DeviceGeometry<T>,
    theta: T,
    params: &MaterialParams<T>,
    settings: &SpectrumSettings<T>,
) -> Result<(T, T)> {
    coupling.validate()?;
    let matched = find_matching_orientation(coupling.f_target, coupling.b_low, coupling.b_high, params)?;
    let f = matched.frequency;
    let geo = geometry.at_distance(coupling.reference_distance);
    let unit = DriveConfig::new(T::one(), f, lit(50.0))?;
    let b_ant = antenna_field(&unit, &geo)?;
    let field = FieldConfig::new(coupling.b_high, theta)?;
    let ladder = mode_ladder(&field, params, &geo, settings)?;
    let (g, _) = sw_geometric_factor(f, geo.nd_x, &ladder, &geo, params, settings);
    if g <= T::zero() {
        return Err(Error::NotApplicable(format!(
            "no spin-wave mode near {:.3} MHz at {} G; cannot calibrate kappa_sw",
            to_f64(f),
            to_f64(coupling.b_high)
        )));
    }
    Ok((coupling.reference_amplification * b_ant / g, f))
}

/// Ratio of the spin-wave drive at `b_high` to the antenna drive at `b_low`,
/// both at distance `nd_x` and frequency `f`. Both channels scale as sqrt(P),
/// so the ratio does not depend on power.
pub fn amplification<T: Real>(nd_x: T, b_low: T, b_high: T, f: T, scenario: &Scenario<T>) -> Result<T> {
    let kappa = scenario.kappa_sw()?;
    amplification_with(nd_x, b_low, b_high, f, scenario, kappa)
}

pub(crate) fn amplification_with<T: Real>(
    nd_x: T,
    b_low: T,
    b_high: T,
    f: T,
    scenario: &Scenario<T>,
    kappa_sw: T,
) -> Result<T> {
    let geo = scenario.geometry.at_distance(nd_x);
    geo.validate()?;
    let theta = scenario.field.theta;
    let drive = DriveConfig::new(T::one(), f, scenario.drive.impedance)?;
    let low = sw_drive_field(
        &drive,
        &geo,
        &FieldConfig::new(b_low, theta)?,
        &scenario.material,
        &scenario.spectrum,
        kappa_sw,
    )?;
    if low.amplitude > T::zero() {
        return Err(Error::NotApplicable(format!(
            "{:.3} MHz is spin-wave driven at {} G; the low-field point must be antenna driven",
            to_f64(f),
            to_f64(b_low)
        )));
    }
    let high = sw_drive_field(
        &drive,
        &geo,
        &FieldConfig::new(b_high, theta)?,
        &scenario.material,
        &scenario.spectrum,
        kappa_sw,
    )?;
    if high.amplitude <= T::zero() {
        return Err(Error::NotApplicable(format!(
            "no spin-wave mode resonant with {:.3} MHz at {} G",
            to_f64(f),
            to_f64(b_high)
        )));
    }
    Ok(high.amplitude / antenna_field(&drive, &geo)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn thin_wire(power_mw: f64, r_um: f64) -> f64 {
        let i = (power_mw * 1e-3 / 50.0_f64).sqrt();
        MU0 * i / (2.0 * std::f64::consts::PI * r_um * 1e-6) * GAUSS_PER_TESLA
    }

    #[test]
    fn antenna_reference_values() {
        let drive = DriveConfig::new(4.0, 2862.0, 50.0).unwrap();
        let geo = DeviceGeometry::<f64>::default();
        let b20 = antenna_field(&drive, &geo).unwrap();
        assert!((b20 - 0.894).abs() / 0.894 < 0.01, "{b20}");
        assert_relative_eq!(thin_wire(4.0, 20.0), 0.8944, max_relative = 1e-4);
        assert_relative_eq!(thin_wire(4.0, 80.0), thin_wire(4.0, 20.0) / 4.0, max_relative = 1e-14);
        let zero = DriveConfig::new(0.0, 2862.0, 50.0).unwrap();
        assert_eq!(antenna_field(&zero, &geo).unwrap(), 0.0);
    }

    #[test]
    fn inside_conductor_is_rejected() {
        let drive = DriveConfig::new(1.0, 2862.0, 50.0).unwrap();
        let geo = DeviceGeometry::<f64>::default().at_distance(1.0);
        assert!(matches!(
            antenna_field(&drive, &geo),
            Err(Error::InsideConductor { .. })
        ));
    }

    #[test]
    fn no_mode_means_zero_drive() {
        let drive = DriveConfig::new(1e-3, 2862.0, 50.0).unwrap();
        let f = sw_drive_field(
            &drive,
            &DeviceGeometry::default(),
            &FieldConfig::new(15.0, 0.0).unwrap(),
            &MaterialParams::default(),
            &SpectrumSettings::default(),
            10.0,
        )
        .unwrap();
        assert_eq!(f.amplitude, 0.0);
        assert_eq!(f.channel, Channel::SpinWave);
        assert!(f.contributing_mode.is_none());
    }
}
