use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{antenna_field, sw_geometric_factor};
use crate::dynamics::rabi_frequency;
use crate::error::{Error, Result};
use crate::magnonics::{mode_ladder, stray_factor, SWMode, SpectrumSettings};
use crate::params::{DeviceGeometry, FieldConfig, MaterialParams};
use crate::scalar::{is_sorted_finite, lit, to_f64, Real};
use crate::scenario::Scenario;

use super::ensemble_transitions;

/// Phenomenological ODMR contrast model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct OdmrSettings<T> {
    /// Dip half width at vanishing drive, MHz.
    pub linewidth: T,
    /// Weight of the detuning term in the saturated line.
    pub saturation: T,
    /// Largest attainable contrast.
    pub c_max: T,
    /// Quench strength per mW per unit mode density (rad/um).
    pub quench_coefficient: T,
    /// Width of the spin-wave noise band seen by the defect, MHz.
    pub noise_bandwidth: T,
    /// Smallest contrast counted as a resolved feature.
    pub detection_threshold: T,
    /// Drive roll-off of the antenna line, dB per GHz.
    pub msl_rolloff: T,
}

impl<T: Real> Default for OdmrSettings<T> {
    fn default() -> Self {
        Self {
            linewidth: lit(8.0),
            saturation: lit(4.0),
            c_max: lit(0.2),
            quench_coefficient: lit(0.5),
            noise_bandwidth: lit(50.0),
            detection_threshold: lit(0.003),
            msl_rolloff: T::zero(),
        }
    }
}

impl<T: Real> OdmrSettings<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("linewidth", self.linewidth),
            ("saturation", self.saturation),
            ("noise_bandwidth", self.noise_bandwidth),
            ("detection_threshold", self.detection_threshold),
        ] {
            let v = to_f64(v);
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, v, "must be finite and > 0"));
            }
        }
        let c = to_f64(self.c_max);
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::invalid("c_max", c, "must lie in (0, 1]"));
        }
        for (name, v) in [
            ("quench_coefficient", self.quench_coefficient),
            ("msl_rolloff", self.msl_rolloff),
        ] {
            let v = to_f64(v);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, v, "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Amplitude factor of the antenna line at `f` (MHz).
    pub fn rolloff_factor(&self, f: T) -> T {
        if self.msl_rolloff == T::zero() {
            return T::one();
        }
        let db = self.msl_rolloff * f / lit(1000.0);
        lit::<T>(10.0).powf(-db / lit(20.0))
    }
}

/// PL contrast over a field-frequency grid. `contrast[i][j]` belongs to
/// `b_grid[i]` and `f_grid[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OdmrMap<T> {
    pub b_grid: Vec<T>,
    pub f_grid: Vec<T>,
    pub contrast: Vec<Vec<T>>,
}

impl<T: Real> OdmrMap<T> {
    pub fn row_max(&self, i: usize) -> T {
        self.contrast[i].iter().fold(T::zero(), |m, &v| m.max(v))
    }

    pub fn peak(&self) -> T {
        (0..self.b_grid.len()).fold(T::zero(), |m, i| m.max(self.row_max(i)))
    }

    /// Sum of all cells times the cell area, MHz G.
    pub fn integrated(&self) -> T {
        let cell = |g: &[T]| {
            if g.len() > 1 {
                (g[g.len() - 1] - g[0]) / lit((g.len() - 1) as f64)
            } else {
                T::one()
            }
        };
        let total = self
            .contrast
            .iter()
            .flat_map(|r| r.iter())
            .fold(T::zero(), |a, &v| a + v);
        total * cell(&self.b_grid) * cell(&self.f_grid)
    }

    /// First field whose row maximum reaches `threshold`.
    pub fn onset(&self, threshold: T) -> Option<T> {
        (0..self.b_grid.len())
            .find(|&i| self.row_max(i) >= threshold)
            .map(|i| self.b_grid[i])
    }
}

/// Efficiency- and stray-weighted mode density within half the noise band of
/// `f`, in rad/um.
fn mode_density<T: Real>(
    f: T,
    ladder: &[SWMode<T>],
    geometry: &DeviceGeometry<T>,
    params: &MaterialParams<T>,
    spacing: T,
    bandwidth: T,
) -> T {
    let half = bandwidth / lit(2.0);
    ladder
        .iter()
        .filter(|m| (m.frequency - f).abs() <= half)
        .fold(T::zero(), |acc, m| {
            acc + m.efficiency * stray_factor(m.k, m.surface_side, geometry.nd_z, params) * spacing
        })
}

/// Q = 1 / (1 + c_q P rho(f, B)), the fraction of contrast surviving the
/// spin-wave noise. rho is the mode density near `f` weighted by excitation
/// efficiency and stray-field reach.
pub fn quench_factor<T: Real>(
    f: T,
    field: &FieldConfig<T>,
    power: T,
    params: &MaterialParams<T>,
    geometry: &DeviceGeometry<T>,
    spectrum: &SpectrumSettings<T>,
    settings: &OdmrSettings<T>,
) -> Result<T> {
    if !(power >= T::zero() && power.is_finite()) {
        return Err(Error::invalid("power", to_f64(power), "must be finite and >= 0"));
    }
    if power == T::zero() {
        return Ok(T::one());
    }
    let ladder = mode_ladder(field, params, geometry, spectrum)?;
    let rho = mode_density(
        f,
        &ladder,
        geometry,
        params,
        spectrum.k_spacing,
        settings.noise_bandwidth,
    );
    Ok(T::one() / (T::one() + settings.quench_coefficient * power * rho))
}

/// Ensemble-averaged contrast at each frequency.
///
/// Every member contributes 1 - prod_b (1 - s_b) over its two branches, with
///
/// ```text
/// s_b = omega^2 / (omega^2 + Gamma^2 + s delta_b^2)
/// ```
///
/// and omega the Rabi frequency of the local drive `b_drive[j]`. Spin-wave
/// noise removes a fraction 1 - Q of the PL independently of the drive, so
///
/// ```text
/// C = c_max [(1 - Q) + Q <1 - prod_b (1 - s_b)>]
/// ```
pub fn odmr_spectrum<T: Real>(
    transitions: &[(T, T)],
    f_grid: &[T],
    b_drive: &[T],
    quench: &[T],
    params: &MaterialParams<T>,
    settings: &OdmrSettings<T>,
) -> Result<Vec<T>> {
    if !is_sorted_finite(f_grid) {
        return Err(Error::UnsortedGrid { name: "f_grid" });
    }
    if b_drive.len() != f_grid.len() || quench.len() != f_grid.len() {
        return Err(Error::invalid(
            "b_drive",
            b_drive.len() as f64,
            "must match the frequency grid",
        ));
    }
    let n: T = lit(transitions.len().max(1) as f64);
    let g2 = settings.linewidth * settings.linewidth;
    f_grid
        .iter()
        .zip(b_drive)
        .zip(quench)
        .map(|((&f, &b), &q)| {
            let omega = rabi_frequency(b, params)?;
            let o2 = omega * omega;
            let resonant = if o2 == T::zero() {
                T::zero()
            } else {
                let sum = transitions.iter().fold(T::zero(), |acc, &(lo, hi)| {
                    let s = |c: T| o2 / (o2 + g2 + settings.saturation * (f - c) * (f - c));
                    acc + (T::one() - (T::one() - s(lo)) * (T::one() - s(hi)))
                });
                sum / n
            };
            Ok(settings.c_max * ((T::one() - q) + q * resonant))
        })
        .collect()
}

/// Field-frequency contrast map for the scenario's field angle, drive power
/// and nanodiamond position. Rows run in parallel.
pub fn odmr_map<T: Real>(b_grid: &[T], f_grid: &[T], scenario: &Scenario<T>) -> Result<OdmrMap<T>> {
    let kappa = scenario.kappa_sw()?;
    odmr_map_with(b_grid, f_grid, scenario, kappa)
}

pub(crate) fn odmr_map_with<T: Real>(
    b_grid: &[T],
    f_grid: &[T],
    scenario: &Scenario<T>,
    kappa: T,
) -> Result<OdmrMap<T>> {
    if b_grid.is_empty() || !is_sorted_finite(b_grid) {
        return Err(Error::UnsortedGrid { name: "b_grid" });
    }
    if f_grid.is_empty() || !is_sorted_finite(f_grid) {
        return Err(Error::UnsortedGrid { name: "f_grid" });
    }
    scenario.validate()?;
    let ensemble = scenario.ensemble()?;
    let s = scenario;
    let power = s.drive.power;
    let sqrt_p = power.sqrt();
    let b_ant = antenna_field(&s.drive, &s.geometry)?;
    let contrast = b_grid
        .par_iter()
        .map(|&b| {
            let field = s.field.with_field(b);
            let ladder = mode_ladder(&field, &s.material, &s.geometry, &s.spectrum)?;
            let transitions = ensemble_transitions(&ensemble, &field, &s.material)?;
            let mut drive = Vec::with_capacity(f_grid.len());
            let mut quench = Vec::with_capacity(f_grid.len());
            for &f in f_grid {
                let (g, _) = sw_geometric_factor(f, s.geometry.nd_x, &ladder, &s.geometry, &s.material, &s.spectrum);
                drive.push((b_ant + kappa * sqrt_p * g) * s.odmr.rolloff_factor(f));
                let rho = mode_density(
                    f,
                    &ladder,
                    &s.geometry,
                    &s.material,
                    s.spectrum.k_spacing,
                    s.odmr.noise_bandwidth,
                );
                quench.push(T::one() / (T::one() + s.odmr.quench_coefficient * power * rho));
            }
            odmr_spectrum(&transitions, f_grid, &drive, &quench, &s.material, &s.odmr)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OdmrMap {
        b_grid: b_grid.to_vec(),
        f_grid: f_grid.to_vec(),
        contrast,
    })
}

/// Drive power (mW) at which the scenario's map peak equals `target`,
/// located by bisection in log power within `[p_lo, p_hi]`.
pub fn equal_contrast_power<T: Real>(
    target: T,
    b_grid: &[T],
    f_grid: &[T],
    scenario: &Scenario<T>,
    p_lo: T,
    p_hi: T,
) -> Result<T> {
    if !(p_lo > T::zero() && p_lo < p_hi) {
        return Err(Error::invalid("p_lo", to_f64(p_lo), "must satisfy 0 < p_lo < p_hi"));
    }
    let kappa = scenario.kappa_sw()?;
    let peak = |p: T| -> Result<T> {
        let mut sc = scenario.clone();
        sc.drive = sc.drive.with_power(p);
        Ok(odmr_map_with(b_grid, f_grid, &sc, kappa)?.peak())
    };
    let (mut lo, mut hi) = (p_lo.ln(), p_hi.ln());
    if peak(p_lo)? >= target {
        return Ok(p_lo);
    }
    if peak(p_hi)? < target {
        return Err(Error::NotApplicable(format!(
            "peak contrast stays below {} up to {} mW",
            to_f64(target),
            to_f64(p_hi)
        )));
    }
    for _ in 0..60 {
        if hi - lo < lit(1e-6) {
            break;
        }
        let mid = (lo + hi) / lit(2.0);
        if peak(mid.exp())? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_params;

    #[test]
    fn quench_limits() {
        let p = default_params();
        let g = DeviceGeometry::default();
        let s = SpectrumSettings::default();
        let o = OdmrSettings::default();
        let f145 = FieldConfig::new(145.0, 0.0).unwrap();
        assert_eq!(quench_factor(2500.0, &f145, 0.0, &p, &g, &s, &o).unwrap(), 1.0);
        let f0 = FieldConfig::new(0.0, 0.0).unwrap();
        assert_eq!(quench_factor(2870.0, &f0, 4.0, &p, &g, &s, &o).unwrap(), 1.0);
        let hi = quench_factor(2440.0, &f145, 4.0, &p, &g, &s, &o).unwrap();
        let lo = quench_factor(2440.0, &f145, 0.04, &p, &g, &s, &o).unwrap();
        assert!(hi < lo && lo < 1.0, "{hi} {lo}");
    }

    #[test]
    fn no_drive_no_contrast() {
        let p = default_params();
        let o = OdmrSettings::default();
        let f = [2800.0, 2870.0, 2900.0];
        let c = odmr_spectrum(&[(2870.0, 2870.0)], &f, &[0.0; 3], &[1.0; 3], &p, &o).unwrap();
        assert!(c.iter().all(|&v| v == 0.0));
    }
}
