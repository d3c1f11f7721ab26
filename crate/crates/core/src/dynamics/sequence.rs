use nalgebra::{Rotation3, Unit, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{is_sorted_finite, lit, to_f64, Real};

use super::DecoherenceParams;

/// Rabi frequency used for the refocusing pulses of [`hahn_trace`] and
/// [`cpmg_trace`], MHz. Without detuning the echo amplitude does not depend on it.
pub const DEFAULT_PULSE_RABI: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", bound = "T: Real")]
pub enum Element<T> {
    /// Resonant pulse of Rabi frequency `rabi_frequency` (MHz) for `duration` (us).
    Pulse { axis: Axis, rabi_frequency: T, duration: T },
    /// Free evolution, us.
    Delay { duration: T },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PulseSequence<T> {
    pub elements: Vec<Element<T>>,
}

impl<T: Real> PulseSequence<T> {
    pub fn new(elements: Vec<Element<T>>) -> Result<Self> {
        let s = Self { elements };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.elements.is_empty() {
            return Err(Error::invalid("elements", 0.0, "sequence must not be empty"));
        }
        for e in &self.elements {
            let (d, omega) = match *e {
                Element::Pulse {
                    rabi_frequency,
                    duration,
                    ..
                } => (duration, Some(rabi_frequency)),
                Element::Delay { duration } => (duration, None),
            };
            let d = to_f64(d);
            if !(d >= 0.0 && d.is_finite()) {
                return Err(Error::invalid("duration", d, "must be finite and >= 0"));
            }
            if let Some(o) = omega {
                let o = to_f64(o);
                if !(o >= 0.0 && o.is_finite()) {
                    return Err(Error::invalid("rabi_frequency", o, "must be finite and >= 0"));
                }
            }
        }
        Ok(())
    }

    /// Pulse rotating the Bloch vector by `angle` (rad) about `axis`.
    pub fn rotation(axis: Axis, omega: T, angle: T) -> Element<T> {
        Element::Pulse {
            axis,
            rabi_frequency: omega,
            duration: angle / (T::two_pi() * omega),
        }
    }

    pub fn pi_pulse(axis: Axis, omega: T) -> Element<T> {
        Self::rotation(axis, omega, T::pi())
    }

    pub fn half_pi_pulse(axis: Axis, omega: T) -> Element<T> {
        Self::rotation(axis, omega, T::frac_pi_2())
    }

    /// pi/2_x - t/2 - pi_x - t/2 - pi/2_x with `free_time` = t.
    pub fn hahn(omega: T, free_time: T) -> Result<Self> {
        let half = free_time / lit(2.0);
        Self::new(vec![
            Self::half_pi_pulse(Axis::X, omega),
            Element::Delay { duration: half },
            Self::pi_pulse(Axis::X, omega),
            Element::Delay { duration: half },
            Self::half_pi_pulse(Axis::X, omega),
        ])
    }

    /// pi/2_x - (tau - pi_y - tau)^n - pi/2_x with 2 n tau = `free_time`.
    pub fn cpmg(n: usize, omega: T, free_time: T) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", 0.0, "CPMG needs at least one refocusing pulse"));
        }
        let tau = free_time / lit((2 * n) as f64);
        let mut e = vec![Self::half_pi_pulse(Axis::X, omega)];
        for _ in 0..n {
            e.push(Element::Delay { duration: tau });
            e.push(Self::pi_pulse(Axis::Y, omega));
            e.push(Element::Delay { duration: tau });
        }
        e.push(Self::half_pi_pulse(Axis::X, omega));
        Self::new(e)
    }

    /// Total free-evolution time, us.
    pub fn free_time(&self) -> T {
        self.elements.iter().fold(T::zero(), |acc, e| match *e {
            Element::Delay { duration } => acc + duration,
            Element::Pulse { .. } => acc,
        })
    }
}

/// Final state of a sequence started in |0>.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SequenceOutcome<T: Real> {
    /// Population transferred out of |0>.
    pub population: T,
    /// Bloch vector; z = +1 is |0>.
    pub bloch: Vector3<T>,
    /// Accumulated free-evolution time, us.
    pub free_time: T,
}

/// Composes exact rotating-frame rotations for every element.
///
/// A pulse rotates the Bloch vector by 2 pi omega_eff t about
/// (omega cos(phi), omega sin(phi), detuning) / omega_eff, phi = 0 for x and
/// pi/2 for y. A delay precesses it about z by 2 pi detuning t and shrinks its
/// transverse part so that after a total free time t the coherence carries
/// exp(-(t / T2)^alpha). Pulses are treated as decoherence free.
pub fn evolve_sequence<T: Real>(
    seq: &PulseSequence<T>,
    detuning: T,
    dec: Option<&DecoherenceParams<T>>,
) -> Result<SequenceOutcome<T>> {
    seq.validate()?;
    let mut r = Vector3::z();
    let mut clock = T::zero();
    for e in &seq.elements {
        match *e {
            Element::Pulse {
                axis,
                rabi_frequency,
                duration,
            } => {
                let (c, s) = match axis {
                    Axis::X => (T::one(), T::zero()),
                    Axis::Y => (T::zero(), T::one()),
                };
                let w = Vector3::new(rabi_frequency * c, rabi_frequency * s, detuning);
                let eff = w.norm();
                if eff > T::zero() {
                    let rot = Rotation3::from_axis_angle(&Unit::new_unchecked(w / eff), T::two_pi() * eff * duration);
                    r = rot * r;
                }
            }
            Element::Delay { duration } => {
                let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), T::two_pi() * detuning * duration);
                r = rot * r;
                if let Some(d) = dec {
                    let before = d.envelope(clock);
                    let after = d.envelope(clock + duration);
                    let shrink = if before > T::zero() { after / before } else { T::zero() };
                    r.x *= shrink;
                    r.y *= shrink;
                }
                clock += duration;
            }
        }
    }
    Ok(SequenceOutcome {
        population: (T::one() - r.z) / lit(2.0),
        bloch: r,
        free_time: clock,
    })
}

/// Echo amplitude |r_z| after `build(t)` for each total free time `t`,
/// renormalized by its value at zero delay.
pub fn echo_trace<T, F>(t_grid: &[T], detuning: T, dec: &DecoherenceParams<T>, build: F) -> Result<Vec<T>>
where
    T: Real,
    F: Fn(T) -> Result<PulseSequence<T>> + Sync,
{
    if !is_sorted_finite(t_grid) || t_grid.first().is_some_and(|&t| t < T::zero()) {
        return Err(Error::UnsortedGrid { name: "t_grid" });
    }
    let reference = evolve_sequence(&build(T::zero())?, detuning, Some(dec))?.bloch.z.abs();
    if reference == T::zero() {
        return Err(Error::DegenerateInput("sequence has no echo at zero delay".into()));
    }
    t_grid
        .par_iter()
        .map(|&t| Ok(evolve_sequence(&build(t)?, detuning, Some(dec))?.bloch.z.abs() / reference))
        .collect()
}

/// Renormalized Hahn-echo amplitude versus total free time.
pub fn hahn_trace<T: Real>(t_grid: &[T], dec: &DecoherenceParams<T>) -> Result<Vec<T>> {
    let omega = lit(DEFAULT_PULSE_RABI);
    echo_trace(t_grid, T::zero(), dec, |t| PulseSequence::hahn(omega, t))
}

/// Renormalized CPMG-n amplitude versus total free time.
pub fn cpmg_trace<T: Real>(n: usize, t_grid: &[T], dec: &DecoherenceParams<T>) -> Result<Vec<T>> {
    let omega = lit(DEFAULT_PULSE_RABI);
    echo_trace(t_grid, T::zero(), dec, |t| PulseSequence::cpmg(n, omega, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_pi_pulse_flips() {
        let seq = PulseSequence::new(vec![PulseSequence::pi_pulse(Axis::X, 2.0)]).unwrap();
        let out = evolve_sequence(&seq, 0.0, None).unwrap();
        assert_relative_eq!(out.population, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn echo_reaches_one_over_e_at_t2() {
        let dec = DecoherenceParams::<f64>::new(1.54, 1.0, None).unwrap();
        let out = evolve_sequence(&PulseSequence::hahn(10.0, 1.54).unwrap(), 0.0, Some(&dec)).unwrap();
        assert!((out.bloch.z.abs() - (-1.0_f64).exp()).abs() < 1e-12);
        let dec = DecoherenceParams::<f64>::new(2.78, 2.0, None).unwrap();
        let out = evolve_sequence(&PulseSequence::cpmg(3, 10.0, 2.78).unwrap(), 0.0, Some(&dec)).unwrap();
        assert!((out.bloch.z.abs() - (-1.0_f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn echo_refocuses_detuning() {
        let dec = DecoherenceParams::<f64>::new(1.54, 1.0, None).unwrap();
        let trace = echo_trace(&[0.0, 0.7, 1.54], 0.3, &dec, |t| PulseSequence::hahn(50.0, t)).unwrap();
        let ideal = hahn_trace(&[0.0, 0.7, 1.54], &dec).unwrap();
        for (a, b) in trace.iter().zip(&ideal) {
            assert!((a - b).abs() < 1e-3, "{a} {b}");
        }
    }

    #[test]
    fn cpmg_one_is_hahn() {
        let dec = DecoherenceParams::<f64>::new(1.54, 1.0, None).unwrap();
        let t: Vec<f64> = (0..20).map(|i| i as f64 * 0.2).collect();
        let h = hahn_trace(&t, &dec).unwrap();
        let c = cpmg_trace(1, &t, &dec).unwrap();
        for (a, b) in h.iter().zip(&c) {
            assert!((a - b).abs() < 1e-14);
        }
        assert_eq!(h[0], 1.0);
    }

    #[test]
    fn rejects_empty_and_negative() {
        assert!(PulseSequence::<f64>::new(vec![]).is_err());
        assert!(PulseSequence::new(vec![Element::Delay { duration: -1.0 }]).is_err());
        assert!(PulseSequence::<f64>::cpmg(0, 1.0, 1.0).is_err());
    }
}
