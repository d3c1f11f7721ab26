//! Magnetostatic spin waves in the YIG film: dispersion, losses, antenna
//! coupling, stray fields and the two-antenna transmission map.

mod dispersion;
mod lineshape;
mod transmission;

pub use dispersion::{
    band_edges, bvmsw_frequency, decay_length, desw_frequency, desw_wavevector, frequency, group_velocity, kittel,
};
pub use lineshape::LineShape;
pub use transmission::TransmissionMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DeviceGeometry, FieldConfig, MaterialParams};
use crate::scalar::{lit, to_f64, Real};

/// Spin-wave family excited for a given field orientation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    /// Damon-Eshbach surface wave (field along the antenna, theta = 0 or pi).
    Desw,
    /// Backward-volume wave (field along the propagation, theta = pi/2).
    Bvmsw,
}

/// Film surface on which a surface mode is localized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceSide {
    /// The top surface carrying the antenna and nanodiamonds.
    Near,
    /// The buried surface facing the substrate.
    Far,
}

const ANGLE_TOL: f64 = 1e-9;

/// Maps a field angle onto the excited family and the side the modes live on.
pub fn classify<T: Real>(theta: T) -> Result<(ModeKind, SurfaceSide)> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let t = to_f64(theta);
    let near = |a: f64| (t - a).abs() < ANGLE_TOL;
    if near(0.0) || near(2.0 * PI) {
        Ok((ModeKind::Desw, SurfaceSide::Near))
    } else if near(PI) {
        Ok((ModeKind::Desw, SurfaceSide::Far))
    } else if near(FRAC_PI_2) || near(3.0 * FRAC_PI_2) {
        Ok((ModeKind::Bvmsw, SurfaceSide::Near))
    } else {
        Err(Error::UnsupportedGeometry { theta: t })
    }
}

/// One discrete spin-wave mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SWMode<T> {
    /// Wave vector, rad/um.
    pub k: T,
    /// MHz.
    pub frequency: T,
    pub kind: ModeKind,
    /// d(omega)/dk, m/s. Negative for backward-volume modes.
    pub group_velocity: T,
    /// Amplitude decay length, um.
    pub decay_length: T,
    /// Antenna excitation efficiency in [0, 1].
    pub efficiency: T,
    pub surface_side: SurfaceSide,
}

/// Numerical and phenomenological knobs of the spin-wave model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct SpectrumSettings<T> {
    /// Ladder spacing in k, rad/um.
    pub k_spacing: T,
    /// Largest ladder wave vector, rad/um. Defaults to the first zero of the
    /// antenna filter, 2 pi / w.
    pub k_max: Option<T>,
    /// Excitation penalty for the reversed field (theta = pi), in (0, 1).
    pub nonreciprocity: T,
    /// Relative step of the group-velocity finite difference.
    pub fd_rel_step: T,
    /// Line shape used in the two-antenna transmission map.
    pub transmission_line: LineShape<T>,
    /// Window that admits a ladder mode into the drive at a given frequency.
    pub drive_window: LineShape<T>,
}

impl<T: Real> Default for SpectrumSettings<T> {
    fn default() -> Self {
        Self {
            k_spacing: lit(0.05),
            k_max: None,
            nonreciprocity: lit(0.2),
            fd_rel_step: lit(1e-6),
            transmission_line: LineShape::new(lit(5.0), lit(5.0)),
            drive_window: LineShape::new(lit(5.0), lit(10.0)),
        }
    }
}

impl<T: Real> SpectrumSettings<T> {
    pub fn validate(&self) -> Result<()> {
        let s = to_f64(self.k_spacing);
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::invalid("k_spacing", s, "must be finite and > 0"));
        }
        if let Some(k) = self.k_max {
            let k = to_f64(k);
            if !(k > 0.0 && k.is_finite()) {
                return Err(Error::invalid("k_max", k, "must be finite and > 0"));
            }
        }
        let r = to_f64(self.nonreciprocity);
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::invalid("nonreciprocity", r, "must lie in (0, 1)"));
        }
        let h = to_f64(self.fd_rel_step);
        if !(h > 0.0 && h < 0.1) {
            return Err(Error::invalid("fd_rel_step", h, "must lie in (0, 0.1)"));
        }
        self.transmission_line.validate()?;
        self.drive_window.validate()
    }

    /// Ladder upper limit for the given antenna.
    pub fn k_max_for(&self, geometry: &DeviceGeometry<T>) -> T {
        self.k_max.unwrap_or_else(|| T::two_pi() / geometry.msl_width)
    }
}

/// Antenna wave-vector filter |sin(k w / 2) / (k w / 2)|, scaled by the
/// nonreciprocity factor when the field is reversed (theta = pi).
pub fn excitation_efficiency<T: Real>(
    k: T,
    geometry: &DeviceGeometry<T>,
    field: &FieldConfig<T>,
    nonreciprocity: T,
) -> Result<T> {
    if !(k >= T::zero()) {
        return Err(Error::invalid("k", to_f64(k), "must be >= 0"));
    }
    let (_, side) = classify(field.theta)?;
    let eta = sinc(k * geometry.msl_width / lit(2.0)).abs();
    Ok(match side {
        SurfaceSide::Near => eta,
        SurfaceSide::Far => nonreciprocity * eta,
    })
}

fn sinc<T: Real>(x: T) -> T {
    if x.abs() < lit(1e-8) {
        T::one() - x * x / lit(6.0)
    } else {
        x.sin() / x
    }
}

/// Relative stray-field amplitude of `mode` at height `z_nm` above the film.
///
/// Near-side modes decay as exp(-k z). Far-side modes first cross the film
/// thickness, adding a factor exp(-k d).
pub fn stray_field_profile<T: Real>(mode: &SWMode<T>, z_nm: T, params: &MaterialParams<T>) -> Result<T> {
    if !(z_nm >= T::zero()) {
        return Err(Error::invalid("z", to_f64(z_nm), "must be >= 0"));
    }
    Ok(stray_factor(mode.k, mode.surface_side, z_nm, params))
}

pub(crate) fn stray_factor<T: Real>(k: T, side: SurfaceSide, z_nm: T, params: &MaterialParams<T>) -> T {
    let z_um = z_nm * lit(1e-3);
    let above = (-k * z_um).exp();
    match side {
        SurfaceSide::Near => above,
        SurfaceSide::Far => above * (-k * params.thickness).exp(),
    }
}

/// Uniform ladder k_n = n * spacing, n = 1..N with k_N <= k_max.
///
/// An unsaturated film (B = 0) supports no modes and yields an empty ladder,
/// as does `k_max < spacing`.
pub fn mode_ladder<T: Real>(
    field: &FieldConfig<T>,
    params: &MaterialParams<T>,
    geometry: &DeviceGeometry<T>,
    settings: &SpectrumSettings<T>,
) -> Result<Vec<SWMode<T>>> {
    let (kind, side) = classify(field.theta)?;
    let spacing = settings.k_spacing;
    if !(spacing > T::zero()) {
        return Err(Error::invalid("k_spacing", to_f64(spacing), "must be > 0"));
    }
    if field.b_ext <= T::zero() {
        return Ok(Vec::new());
    }
    let k_max = settings.k_max_for(geometry);
    let n = (to_f64(k_max / spacing) * (1.0 + 1e-12)).floor().max(0.0) as usize;
    (1..=n)
        .map(|i| {
            let k = spacing * lit::<T>(i as f64);
            let vg = dispersion::group_velocity_unchecked(kind, k, field.b_ext, params, settings.fd_rel_step)?;
            let f = frequency(kind, k, field.b_ext, params);
            Ok(SWMode {
                k,
                frequency: f,
                kind,
                group_velocity: vg,
                decay_length: vg.abs() / (params.alpha_gilbert * T::two_pi() * f),
                efficiency: excitation_efficiency(k, geometry, field, settings.nonreciprocity)?,
                surface_side: side,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_params;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn settings_for(spacing: f64, k_max: f64) -> SpectrumSettings<f64> {
        SpectrumSettings {
            k_spacing: spacing,
            k_max: Some(k_max),
            ..Default::default()
        }
    }

    #[test]
    fn efficiency_cases() {
        let g = DeviceGeometry::<f64>::default();
        let de = FieldConfig::new(145.0, 0.0).unwrap();
        let rev = FieldConfig::new(145.0, PI).unwrap();
        assert_eq!(excitation_efficiency(0.0, &g, &de, 0.2).unwrap(), 1.0);
        assert!(excitation_efficiency(2.0 * PI / 5.0, &g, &de, 0.2).unwrap() < 1e-15);
        assert_eq!(excitation_efficiency(0.0, &g, &rev, 0.2).unwrap(), 0.2);
        for i in 0..50 {
            let e = excitation_efficiency(i as f64 * 0.1, &g, &de, 0.2).unwrap();
            assert!((0.0..=1.0).contains(&e));
        }
    }

    fn mode(k: f64, side: SurfaceSide) -> SWMode<f64> {
        SWMode {
            k,
            frequency: 2000.0,
            kind: ModeKind::Desw,
            group_velocity: 1.0,
            decay_length: 1.0,
            efficiency: 1.0,
            surface_side: side,
        }
    }

    #[test]
    fn stray_field_cases() {
        let p = default_params::<f64>();
        let d = p.thickness;
        let near = mode(1.0 / d, SurfaceSide::Near);
        let far = mode(1.0 / d, SurfaceSide::Far);
        assert_eq!(stray_field_profile(&near, 0.0, &p).unwrap(), 1.0);
        assert_relative_eq!(
            stray_field_profile(&near, d * 1e3, &p).unwrap(),
            (-1.0_f64).exp(),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            stray_field_profile(&far, 0.0, &p).unwrap(),
            0.36787944117144233,
            max_relative = 1e-14
        );
        assert!(stray_field_profile(&near, -1.0, &p).is_err());
    }

    #[test]
    fn ladder_cases() {
        let p = default_params::<f64>();
        let g = DeviceGeometry::<f64>::default();
        let d = p.thickness;
        let s = settings_for(0.5 / d, 10.0 / d);

        let zero = mode_ladder(&FieldConfig::new(0.0, 0.0).unwrap(), &p, &g, &s).unwrap();
        assert!(zero.iter().all(|m| m.frequency == 0.0));

        let de = mode_ladder(&FieldConfig::new(145.0, 0.0).unwrap(), &p, &g, &s).unwrap();
        assert_eq!(de.len(), 20);
        assert!(de.windows(2).all(|w| w[1].frequency > w[0].frequency));
        assert!(de
            .iter()
            .all(|m| m.decay_length > 0.0 && (0.0..=1.0).contains(&m.efficiency)));

        let bv = mode_ladder(&FieldConfig::new(145.0, PI / 2.0).unwrap(), &p, &g, &s).unwrap();
        assert_eq!(bv.len(), 20);
        assert!(bv.windows(2).all(|w| w[1].frequency < w[0].frequency));
        assert!(bv.iter().all(|m| m.group_velocity < 0.0));

        let empty = mode_ladder(&FieldConfig::new(145.0, 0.0).unwrap(), &p, &g, &settings_for(1.0, 0.5)).unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn default_ladder_stops_at_the_antenna_filter_zero() {
        let p = default_params::<f64>();
        let g = DeviceGeometry::<f64>::default();
        let s = SpectrumSettings::<f64>::default();
        let ladder = mode_ladder(&FieldConfig::new(145.0, 0.0).unwrap(), &p, &g, &s).unwrap();
        assert_eq!(ladder.len(), 25);
        assert!(ladder.last().unwrap().k <= 2.0 * PI / 5.0);
    }

    #[test]
    fn nonreciprocity_factor_is_exact() {
        let p = default_params::<f64>();
        let g = DeviceGeometry::<f64>::default();
        let s = SpectrumSettings::<f64>::default();
        let fwd = mode_ladder(&FieldConfig::new(145.0, 0.0).unwrap(), &p, &g, &s).unwrap();
        let rev = mode_ladder(&FieldConfig::new(145.0, PI).unwrap(), &p, &g, &s).unwrap();
        for (a, b) in fwd.iter().zip(&rev) {
            assert_eq!(a.frequency, b.frequency);
            let za = a.efficiency * stray_field_profile(a, g.nd_z, &p).unwrap();
            let zb = b.efficiency * stray_field_profile(b, g.nd_z, &p).unwrap();
            let expected = s.nonreciprocity * (-a.k * p.thickness).exp();
            assert_relative_eq!(zb / za, expected, max_relative = 1e-12);
            assert!(zb / za < 1.0);
        }
    }

    #[test]
    fn kittel_limit_is_shared() {
        let p = default_params::<f64>();
        for &b in &[10.0, 145.0, 250.0] {
            let kit = kittel(b, &p);
            assert_relative_eq!(frequency(ModeKind::Desw, 0.0, b, &p), kit, max_relative = 1e-15);
            assert_relative_eq!(frequency(ModeKind::Bvmsw, 0.0, b, &p), kit, max_relative = 1e-15);
            let k = 1e-12 / p.thickness;
            let a = frequency(ModeKind::Desw, k, b, &p);
            let c = frequency(ModeKind::Bvmsw, k, b, &p);
            assert!(((a - c) / kit).abs() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn dispersion_monotone_and_bounded(kd in 0.01f64..20.0, dk in 1e-3f64..1.0, b in 1.0f64..300.0) {
            let p = default_params::<f64>();
            let k = kd / p.thickness;
            let k2 = k * (1.0 + dk);
            let top = p.f_h(b) + p.f_m() / 2.0;
            let fd1 = frequency(ModeKind::Desw, k, b, &p);
            let fd2 = frequency(ModeKind::Desw, k2, b, &p);
            prop_assert!(fd1 <= top * (1.0 + 1e-14) && fd2 <= top * (1.0 + 1e-14));
            if kd < 10.0 {
                prop_assert!(fd2 > fd1);
            } else {
                prop_assert!(fd2 >= fd1);
            }
            let fb1 = frequency(ModeKind::Bvmsw, k, b, &p);
            let fb2 = frequency(ModeKind::Bvmsw, k2, b, &p);
            prop_assert!(fb2 < fb1);
            prop_assert!(fb2 > p.f_h(b));
        }

        #[test]
        fn stray_field_monotone(k in 0.01f64..3.0, z in 0.0f64..5000.0, dz in 1.0f64..100.0, dk in 0.01f64..1.0) {
            let p = default_params::<f64>();
            for side in [SurfaceSide::Near, SurfaceSide::Far] {
                let a = stray_factor(k, side, z, &p);
                prop_assert!(stray_factor(k, side, z + dz, &p) < a);
                prop_assert!(stray_factor(k + dk, side, z + 1.0, &p) < stray_factor(k, side, z + 1.0, &p));
                prop_assert!(a <= 1.0);
            }
        }
    }
}
