//! Driven two-level dynamics of an addressed NV transition: Rabi traces,
//! echo sequences and decoherence envelopes.
//!
//! Times are in us and frequencies in MHz (cycles per us). A drive of Rabi
//! frequency `omega` completes one full population cycle in `1 / omega`.

mod fit;
pub mod reference;
mod sequence;

pub use fit::{fit_envelope, fit_rabi_frequency, linear_regression, EnvelopeFit, LinearFit, RabiFit};
pub use sequence::{
    cpmg_trace, echo_trace, evolve_sequence, hahn_trace, Axis, Element, PulseSequence, SequenceOutcome,
    DEFAULT_PULSE_RABI,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupling::{antenna_field, sw_drive_field, Channel};
use crate::error::{Error, Result};
use crate::params::MaterialParams;
use crate::scalar::{is_sorted_finite, lit, to_f64, Real};
use crate::scenario::Scenario;

/// Rabi frequency of a |0> <-> |-1> (or |+1>) transition under a linearly
/// polarized transverse field `b_perp` (G): gamma_e b_perp / sqrt(2).
pub fn rabi_frequency<T: Real>(b_perp: T, params: &MaterialParams<T>) -> Result<T> {
    if !(b_perp >= T::zero() && b_perp.is_finite()) {
        return Err(Error::invalid("b_perp", to_f64(b_perp), "must be finite and >= 0"));
    }
    Ok(params.gamma_e * b_perp / lit::<T>(2.0).sqrt())
}

/// Decoherence of the addressed transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct DecoherenceParams<T> {
    /// Echo decay time, us.
    pub t2: T,
    /// Stretch exponent of exp(-(t / T2)^alpha).
    pub stretch_exponent: T,
    /// Exponential decay time of Rabi oscillations, us. `None` disables it.
    pub rabi_decay_time: Option<T>,
}

impl<T: Real> Default for DecoherenceParams<T> {
    fn default() -> Self {
        Self {
            t2: lit(1.54),
            stretch_exponent: T::one(),
            rabi_decay_time: None,
        }
    }
}

impl<T: Real> DecoherenceParams<T> {
    pub fn new(t2: T, stretch_exponent: T, rabi_decay_time: Option<T>) -> Result<Self> {
        let d = Self {
            t2,
            stretch_exponent,
            rabi_decay_time,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let t2 = to_f64(self.t2);
        if !(t2 > 0.0 && t2.is_finite()) {
            return Err(Error::invalid("t2", t2, "must be finite and > 0"));
        }
        let a = to_f64(self.stretch_exponent);
        if !(a > 0.0 && a <= 4.0) {
            return Err(Error::invalid("stretch_exponent", a, "must lie in (0, 4]"));
        }
        if let Some(tr) = self.rabi_decay_time {
            let tr = to_f64(tr);
            if !(tr > 0.0) {
                return Err(Error::invalid("rabi_decay_time", tr, "must be > 0"));
            }
        }
        Ok(())
    }

    /// exp(-(t / T2)^alpha).
    pub fn envelope(&self, t: T) -> T {
        if t <= T::zero() {
            return T::one();
        }
        (-(t / self.t2).powf(self.stretch_exponent)).exp()
    }

    fn rabi_envelope(&self, t: T) -> T {
        match self.rabi_decay_time {
            Some(tr) => (-t / tr).exp(),
            None => T::one(),
        }
    }
}

/// Power dependence of the Rabi decay and the visibility criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct RabiSettings<T> {
    /// Rabi decay time at zero power, us.
    pub decay_t0: T,
    /// Decay-rate growth per mW.
    pub decay_power_coeff: T,
    /// Oscillation cycles within one decay time needed to call a trace visible.
    pub visibility_cycles: T,
}

impl<T: Real> Default for RabiSettings<T> {
    fn default() -> Self {
        Self {
            decay_t0: lit(2.0),
            decay_power_coeff: lit(0.05),
            visibility_cycles: T::one(),
        }
    }
}

impl<T: Real> RabiSettings<T> {
    pub fn validate(&self) -> Result<()> {
        let t0 = to_f64(self.decay_t0);
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::invalid("decay_t0", t0, "must be finite and > 0"));
        }
        let c = to_f64(self.decay_power_coeff);
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::invalid("decay_power_coeff", c, "must be finite and >= 0"));
        }
        let v = to_f64(self.visibility_cycles);
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::invalid("visibility_cycles", v, "must be finite and > 0"));
        }
        Ok(())
    }

    /// t0 / (1 + c P), us.
    pub fn decay_time(&self, power_mw: T) -> T {
        self.decay_t0 / (T::one() + self.decay_power_coeff * power_mw)
    }

    /// Whether `omega` completes enough cycles before the trace decays.
    pub fn is_visible(&self, omega: T, power_mw: T) -> bool {
        omega * self.decay_time(power_mw) >= self.visibility_cycles
    }
}

/// Population left in |0> after driving for each `t`:
///
/// ```text
/// P(t) = 1 - (omega^2 / omega_eff^2) sin^2(pi omega_eff t) env(t)
/// ```
///
/// with omega_eff = sqrt(omega^2 + detuning^2) and env the Rabi decay.
pub fn rabi_trace<T: Real>(omega: T, detuning: T, t_grid: &[T], dec: &DecoherenceParams<T>) -> Result<Vec<T>> {
    if !(omega >= T::zero() && omega.is_finite()) {
        return Err(Error::invalid("omega", to_f64(omega), "must be finite and >= 0"));
    }
    if !is_sorted_finite(t_grid) || t_grid.first().is_some_and(|&t| t < T::zero()) {
        return Err(Error::UnsortedGrid { name: "t_grid" });
    }
    let eff2 = omega * omega + detuning * detuning;
    if eff2 == T::zero() {
        return Ok(vec![T::one(); t_grid.len()]);
    }
    let eff = eff2.sqrt();
    let depth = omega * omega / eff2;
    Ok(t_grid
        .par_iter()
        .map(|&t| {
            let s = (T::pi() * eff * t).sin();
            T::one() - depth * s * s * dec.rabi_envelope(t)
        })
        .collect())
}

/// Result of a Rabi-frequency versus sqrt(power) regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerScaling<T> {
    pub powers: Vec<T>,
    /// Rabi frequency recovered from a simulated trace at each power, MHz.
    pub rabi: Vec<T>,
    /// MHz per sqrt(mW).
    pub slope: T,
    /// MHz.
    pub intercept: T,
    pub r_squared: T,
}

/// Drives the addressed transition through the whole chain (drive field,
/// Rabi frequency, simulated trace, frequency fit) at each power and regresses
/// the recovered Rabi frequency against sqrt(P).
pub fn power_scaling_check<T: Real>(powers: &[T], scenario: &Scenario<T>, channel: Channel) -> Result<PowerScaling<T>> {
    let mut distinct: Vec<f64> = powers.iter().map(|&p| to_f64(p)).collect();
    distinct.sort_by(|a, b| a.total_cmp(b));
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "power scaling needs at least 3 distinct powers, got {}",
            distinct.len()
        )));
    }
    let kappa = match channel {
        Channel::SpinWave => Some(scenario.kappa_sw()?),
        Channel::Antenna => None,
    };
    let rabi = powers
        .par_iter()
        .map(|&p| {
            let drive = scenario.drive.with_power(p);
            drive.validate()?;
            let b = match kappa {
                Some(k) => {
                    sw_drive_field(
                        &drive,
                        &scenario.geometry,
                        &scenario.field,
                        &scenario.material,
                        &scenario.spectrum,
                        k,
                    )?
                    .amplitude
                }
                None => antenna_field(&drive, &scenario.geometry)?,
            };
            let omega = rabi_frequency(b, &scenario.material)?;
            if omega <= T::zero() {
                return Err(Error::NotApplicable(format!(
                    "no drive reaches the nanodiamond at {} mW",
                    to_f64(p)
                )));
            }
            let dec = DecoherenceParams::new(lit(1.0), T::one(), Some(scenario.rabi_decay.decay_time(p)))?;
            // Eight periods sampled at 64 points per period.
            let n = 8 * 64 + 1;
            let t_grid: Vec<T> = (0..n).map(|i| lit::<T>(i as f64) / (lit::<T>(64.0) * omega)).collect();
            let trace = rabi_trace(omega, T::zero(), &t_grid, &dec)?;
            Ok(fit_rabi_frequency(&t_grid, &trace, dec.rabi_decay_time)?.rabi_frequency)
        })
        .collect::<Result<Vec<T>>>()?;
    let x: Vec<T> = powers.iter().map(|p| p.sqrt()).collect();
    let fit = linear_regression(&x, &rabi)?;
    Ok(PowerScaling {
        powers: powers.to_vec(),
        rabi,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_params;
    use approx::assert_relative_eq;

    #[test]
    fn rabi_frequency_reference() {
        let p = default_params();
        assert_eq!(rabi_frequency(0.0, &p).unwrap(), 0.0);
        assert_relative_eq!(rabi_frequency(0.894, &p).unwrap(), 1.7715, max_relative = 1e-4);
        assert_eq!(
            rabi_frequency(2.0 * 0.3, &p).unwrap(),
            2.0 * rabi_frequency(0.3, &p).unwrap()
        );
        assert!(rabi_frequency(-1.0, &p).is_err());
    }

    #[test]
    fn rabi_trace_landmarks() {
        let dec = DecoherenceParams::<f64>::new(1.0, 1.0, None).unwrap();
        let p = rabi_trace(1.0, 0.0, &[0.0, 0.5, 1.0], &dec).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1].abs() < 1e-15);
        assert!((p[2] - 1.0).abs() < 1e-15);
        // Detuned by omega: halved depth, faster oscillation.
        let t_half = 0.5 / 2.0_f64.sqrt();
        let p = rabi_trace(1.0, 1.0, &[t_half], &dec).unwrap();
        assert_relative_eq!(p[0], 0.5, max_relative = 1e-14);
    }

    #[test]
    fn rabi_settings_visibility() {
        let r = RabiSettings::<f64>::default();
        assert_relative_eq!(r.decay_time(0.0), 2.0);
        assert!(r.is_visible(2.8, 1e-3));
        assert!(!r.is_visible(0.028, 1e-3));
    }
}
