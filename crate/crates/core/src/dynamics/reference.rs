//! Direct integrator for the three NV sublevels, kept as an independent
//! reference for the two-level engine. It is not used on production paths.
//!
//! The frame rotates both |+1> and |-1> at the drive frequency `f`, which
//! makes the rotating-wave Hamiltonian time independent (basis |+1>, |0>, |-1>):
//!
//! ```text
//! H / 2 pi = [[f_plus - f,        c_plus (omega/2),  0                  ],
//!             [conj(...),         0,                 (omega/2) e^{-i phi}],
//!             [0,                 (omega/2) e^{i phi}, f_minus - f        ]]
//! ```
//!
//! where `f_plus`, `f_minus` are the transition frequencies of an aligned
//! defect and `c_plus` is 1 for a drive that also couples the |0> <-> |+1>
//! transition and 0 when the drive is restricted to the resonant pair.

use nalgebra::{Complex, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{evolve_sequence, Axis, Element, PulseSequence};
use crate::error::{Error, Result};
use crate::nv::{transition_frequencies, NVConfig};
use crate::params::default_params;

type C = Complex<f64>;

/// Constant drive applied for `duration` us.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    /// Rabi frequency of the |0> <-> |-1> transition, MHz; 0 for a delay.
    pub rabi: f64,
    /// Drive phase, rad (0 = x, pi/2 = y).
    pub phase: f64,
    pub duration: f64,
}

/// Aligned defect driven near its lower transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeLevelSystem {
    /// |0> -> |+1> transition, MHz.
    pub f_plus: f64,
    /// |0> -> |-1> transition, MHz.
    pub f_minus: f64,
    /// Drive frequency, MHz.
    pub drive_frequency: f64,
    /// Whether the drive also couples |0> <-> |+1>.
    pub full_drive: bool,
}

impl ThreeLevelSystem {
    pub fn hamiltonian(&self, seg: &Segment) -> Matrix3<C> {
        let tau = std::f64::consts::TAU;
        let half = 0.5 * seg.rabi;
        let e = C::from_polar(half, seg.phase);
        let cp = if self.full_drive { e } else { C::new(0.0, 0.0) };
        let z = C::new(0.0, 0.0);
        Matrix3::new(
            C::new(self.f_plus - self.drive_frequency, 0.0),
            cp,
            z,
            cp.conj(),
            z,
            e.conj(),
            z,
            e,
            C::new(self.f_minus - self.drive_frequency, 0.0),
        ) * C::new(tau, 0.0)
    }

    /// Fourth-order Runge-Kutta with step halving until two successive
    /// resolutions agree within `tol` in every amplitude.
    pub fn integrate(&self, segments: &[Segment], psi0: Vector3<C>, tol: f64) -> Result<Vector3<C>> {
        let mut psi = psi0;
        for seg in segments {
            psi = self.integrate_segment(seg, psi, tol)?;
        }
        Ok(psi)
    }

    fn integrate_segment(&self, seg: &Segment, psi: Vector3<C>, tol: f64) -> Result<Vector3<C>> {
        if seg.duration == 0.0 {
            return Ok(psi);
        }
        let h = self.hamiltonian(seg);
        let gen = h * C::new(0.0, -1.0);
        let scale = gen.norm().max(1e-300);
        let mut steps = ((seg.duration * scale / 0.5).ceil() as usize).max(1);
        let mut coarse = rk4(&gen, psi, seg.duration, steps);
        let mut history = Vec::new();
        for _ in 0..24 {
            steps *= 2;
            let fine = rk4(&gen, psi, seg.duration, steps);
            let diff = (fine - coarse).camax();
            history.push(diff);
            if diff < tol {
                return Ok(fine);
            }
            coarse = fine;
        }
        Err(Error::NonConvergence {
            iterations: history.len(),
            history,
        })
    }

    /// Exact propagation through the matrix exponential of each segment.
    pub fn propagate_exact(&self, segments: &[Segment], psi0: Vector3<C>) -> Vector3<C> {
        segments.iter().fold(psi0, |psi, seg| {
            let u = (self.hamiltonian(seg) * C::new(0.0, -seg.duration)).exp();
            u * psi
        })
    }
}

fn rk4(gen: &Matrix3<C>, psi: Vector3<C>, duration: f64, steps: usize) -> Vector3<C> {
    let h = duration / steps as f64;
    let hc = C::new(h, 0.0);
    let half = C::new(0.5 * h, 0.0);
    let sixth = C::new(h / 6.0, 0.0);
    let two = C::new(2.0, 0.0);
    let mut y = psi;
    for _ in 0..steps {
        let k1 = gen * y;
        let k2 = gen * (y + k1 * half);
        let k3 = gen * (y + k2 * half);
        let k4 = gen * (y + k3 * hc);
        y += (k1 + k2 * two + k3 * two + k4) * sixth;
    }
    y
}

/// |0> in the |+1>, |0>, |-1> basis.
pub fn ground() -> Vector3<C> {
    Vector3::new(C::new(0.0, 0.0), C::new(1.0, 0.0), C::new(0.0, 0.0))
}

/// Population of |-1>.
pub fn minus_population(psi: &Vector3<C>) -> f64 {
    psi[2].norm_sqr()
}

/// Worst population differences over a batch of random drives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveComparison {
    pub configs: usize,
    /// Two-level engine against the RK4 integrator.
    pub worst_two_level: f64,
    /// RK4 integrator against the matrix exponential.
    pub worst_integrator: f64,
}

/// Runs `n` random pulse/delay sequences through the two-level engine and
/// the restricted-pair three-level integrator and reports the worst
/// |-1> population mismatch.
///
/// Each configuration draws a field in [5, 150) G along the defect axis, a
/// Rabi frequency up to `max_ratio` times the level splitting, a detuning
/// within one Rabi frequency and up to five elements.
pub fn compare_random_drives(n: usize, seed: u64, max_ratio: f64) -> Result<DriveComparison> {
    let p = default_params::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DriveComparison {
        configs: n,
        worst_two_level: 0.0,
        worst_integrator: 0.0,
    };
    for _ in 0..n {
        let b = rng.random_range(5.0..150.0);
        let nv = NVConfig::at_angle(0.0, b, &p)?;
        let (f_minus, f_plus) = transition_frequencies(&nv);
        let omega = rng.random_range(0.05..1.0) * max_ratio * (f_plus - f_minus);
        let detuning = rng.random_range(-1.0..1.0) * omega;
        let (elements, segments) = random_sequence(&mut rng, omega);
        let sys = ThreeLevelSystem {
            f_plus,
            f_minus,
            drive_frequency: f_minus + detuning,
            full_drive: false,
        };
        let psi = sys.integrate(&segments, ground(), 1e-10)?;
        let two = evolve_sequence(&PulseSequence::new(elements)?, detuning, None)?.population;
        let three = minus_population(&psi);
        let exact = minus_population(&sys.propagate_exact(&segments, ground()));
        out.worst_two_level = out.worst_two_level.max((two - three).abs());
        out.worst_integrator = out.worst_integrator.max((exact - three).abs());
    }
    Ok(out)
}

fn random_sequence(rng: &mut ChaCha8Rng, omega: f64) -> (Vec<Element<f64>>, Vec<Segment>) {
    let n = rng.random_range(1..6);
    let mut elements = Vec::new();
    let mut segments = Vec::new();
    for _ in 0..n {
        if rng.random_bool(0.6) {
            let axis = if rng.random_bool(0.5) { Axis::X } else { Axis::Y };
            let duration = rng.random_range(0.0..1.5) / omega;
            elements.push(Element::Pulse {
                axis,
                rabi_frequency: omega,
                duration,
            });
            let phase = match axis {
                Axis::X => 0.0,
                Axis::Y => std::f64::consts::FRAC_PI_2,
            };
            segments.push(Segment {
                rabi: omega,
                phase,
                duration,
            });
        } else {
            let duration = rng.random_range(0.0..0.3);
            elements.push(Element::Delay { duration });
            segments.push(Segment {
                rabi: 0.0,
                phase: 0.0,
                duration,
            });
        }
    }
    (elements, segments)
}
