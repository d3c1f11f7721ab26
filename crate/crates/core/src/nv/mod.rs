//! NV ground-state spin: Hamiltonian, transition frequencies, orientation
//! matching and random ensembles.
//!
//! Frequencies are in MHz, fields in gauss. The Hamiltonian is
//!
//! ```text
//! H = D Sz^2 + gamma_e (Bx Sx + By Sy + Bz Sz)
//! ```
//!
//! in the defect frame, whose z axis is the NV symmetry axis.

mod odmr;

pub use odmr::{equal_contrast_power, odmr_map, odmr_spectrum, quench_factor, OdmrMap, OdmrSettings};

use nalgebra::{Complex, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{FieldConfig, MaterialParams};
use crate::scalar::{lit, to_f64, Real};

/// Spin-1 operators in the |+1>, |0>, |-1> basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOperatorSet<T: Real> {
    pub sx: Matrix3<Complex<T>>,
    pub sy: Matrix3<Complex<T>>,
    pub sz: Matrix3<Complex<T>>,
    pub identity: Matrix3<Complex<T>>,
}

impl<T: Real> SpinOperatorSet<T> {
    pub fn spin_one() -> Self {
        let z = Complex::new(T::zero(), T::zero());
        let r = |x: T| Complex::new(x, T::zero());
        let i = |x: T| Complex::new(T::zero(), x);
        let s = T::one() / lit::<T>(2.0).sqrt();
        let one = T::one();
        Self {
            sx: Matrix3::new(z, r(s), z, r(s), z, r(s), z, r(s), z),
            sy: Matrix3::new(z, i(-s), z, i(s), z, i(-s), z, i(s), z),
            sz: Matrix3::new(r(one), z, z, z, z, z, z, z, r(-one)),
            identity: Matrix3::identity(),
        }
    }
}

/// One defect in a bias field.
///
/// `orientation` is the NV axis expressed in a frame whose z axis points along
/// the bias field, so only its polar angle matters for the spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct NVConfig<T: Real> {
    pub orientation: Vector3<T>,
    /// Bias magnitude, G.
    pub b_ext: T,
    /// Zero-field splitting, MHz.
    pub d_zfs: T,
    /// MHz/G.
    pub gamma_e: T,
}

const UNIT_TOL: f64 = 1e-12;

impl<T: Real> NVConfig<T> {
    /// `orientation` must already be a unit vector.
    pub fn new(orientation: Vector3<T>, b_ext: T, params: &MaterialParams<T>) -> Result<Self> {
        let n = to_f64(orientation.norm());
        if !((n - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::invalid("orientation", n, "must have unit norm"));
        }
        if !(b_ext >= T::zero() && b_ext.is_finite()) {
            return Err(Error::invalid("b_ext", to_f64(b_ext), "must be finite and >= 0"));
        }
        Ok(Self {
            orientation,
            b_ext,
            d_zfs: params.d_zfs,
            gamma_e: params.gamma_e,
        })
    }

    /// Axis at polar angle `theta_nv` (rad) from the bias field.
    pub fn at_angle(theta_nv: T, b_ext: T, params: &MaterialParams<T>) -> Result<Self> {
        let u = Vector3::new(theta_nv.sin(), T::zero(), theta_nv.cos());
        Self::new(u / u.norm(), b_ext, params)
    }

    /// Defect with lab-frame axis `axis` in the in-plane field `field`.
    pub fn in_field(axis: &Vector3<T>, field: &FieldConfig<T>, params: &MaterialParams<T>) -> Result<Self> {
        let c = axis.dot(&field.direction()) / axis.norm();
        let c = c.max(-T::one()).min(T::one());
        Self::at_angle(c.acos(), field.b_ext, params)
    }

    /// Cosine of the angle between the NV axis and the bias.
    pub fn cos_theta(&self) -> T {
        self.orientation.z
    }

    /// Field components (parallel, perpendicular) to the NV axis.
    pub fn field_components(&self) -> (T, T) {
        let c = self.cos_theta();
        let s = (T::one() - c * c).max(T::zero()).sqrt();
        (self.b_ext * c, self.b_ext * s)
    }

    /// Orthonormal defect frame (e_x, e_y, e_z = axis), expressed in the field frame.
    fn frame(&self) -> (Vector3<T>, Vector3<T>, Vector3<T>) {
        let u = self.orientation;
        let reference = if u.x.abs() < lit(0.9) {
            Vector3::x()
        } else {
            Vector3::y()
        };
        let ex = (reference - u * reference.dot(&u)).normalize();
        let ey = u.cross(&ex);
        (ex, ey, u)
    }
}

/// Full complex Hermitian Hamiltonian in MHz.
pub fn hamiltonian<T: Real>(nv: &NVConfig<T>) -> Matrix3<Complex<T>> {
    let ops = SpinOperatorSet::<T>::spin_one();
    let (ex, ey, ez) = nv.frame();
    // The bias points along z of the field frame.
    let b = Vector3::new(T::zero(), T::zero(), nv.b_ext);
    let g = nv.gamma_e;
    let c = |x: T| Complex::new(x, T::zero());
    let sz2 = ops.sz * ops.sz;
    sz2 * c(nv.d_zfs) + ops.sx * c(g * b.dot(&ex)) + ops.sy * c(g * b.dot(&ey)) + ops.sz * c(g * b.dot(&ez))
}

/// Transition frequencies (lower, upper) from the lowest sublevel, MHz.
///
/// Rotating the defect frame about its axis removes the y component of the
/// field, leaving a real symmetric matrix whose eigenvalues follow from the
/// trigonometric solution of the characteristic cubic.
pub fn transition_frequencies<T: Real>(nv: &NVConfig<T>) -> (T, T) {
    let (b_par, b_perp) = nv.field_components();
    let e = levels(nv.d_zfs, nv.gamma_e * b_par, nv.gamma_e * b_perp);
    (e[1] - e[0], e[2] - e[0])
}

/// Sorted eigenvalues of
/// `[[d + c, a, 0], [a, 0, a], [0, a, d - c]]` with `a = p / sqrt(2)`.
pub(crate) fn levels<T: Real>(d: T, c: T, p: T) -> [T; 3] {
    let a = p / lit::<T>(2.0).sqrt();
    let diag = [d + c, T::zero(), d - c];
    let a2 = a * a;
    if a2 == T::zero() {
        let mut e = diag;
        e.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        return e;
    }
    let charpoly = |l: T| {
        let (u, v, w) = (diag[0] - l, diag[1] - l, diag[2] - l);
        u * (v * w - a2) - a2 * w
    };
    let dcharpoly = |l: T| {
        let (u, v, w) = (diag[0] - l, diag[1] - l, diag[2] - l);
        -(v * w - a2) - u * (v + w) + a2
    };
    let three: T = lit(3.0);
    let q = (diag[0] + diag[1] + diag[2]) / three;
    let p2 = (diag[0] - q).powi(2) + (diag[1] - q).powi(2) + (diag[2] - q).powi(2) + lit::<T>(4.0) * a2;
    let pp = (p2 / lit(6.0)).sqrt();
    let r = (charpoly(q) / (lit::<T>(2.0) * pp * pp * pp))
        .max(-T::one())
        .min(T::one());
    let phi = r.acos() / three;
    let hi = q + lit::<T>(2.0) * pp * phi.cos();
    let lo = q + lit::<T>(2.0) * pp * (phi + T::two_pi() / three).cos();
    let mid = three * q - hi - lo;
    let mut e = [lo, mid, hi];
    // Newton polish; the trigonometric form loses digits near degeneracy.
    for x in e.iter_mut() {
        for _ in 0..2 {
            let dp = dcharpoly(*x);
            if dp != T::zero() {
                let step = charpoly(*x) / dp;
                if step.is_finite() {
                    *x -= step;
                }
            }
        }
    }
    e.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    e
}

/// Orientation whose lower transition is shared by two bias fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedOrientation<T> {
    /// Polar angle of the NV axis from the field, rad.
    pub theta_nv: T,
    /// Common lower-branch frequency, MHz.
    pub frequency: T,
    /// |f_lower(b_low) - f_lower(b_high)| at the root, MHz.
    pub residual: T,
}

const MATCH_SCAN: usize = 181;

/// Finds theta_nv in [0, pi/2] at which the lower transition is the same at
/// `b_low` and `b_high`. When several crossings exist the one whose common
/// frequency is closest to `f_target` is returned.
pub fn find_matching_orientation<T: Real>(
    f_target: T,
    b_low: T,
    b_high: T,
    params: &MaterialParams<T>,
) -> Result<MatchedOrientation<T>> {
    if b_low == b_high {
        return Err(Error::DegenerateInput(
            "b_low equals b_high: every orientation matches".into(),
        ));
    }
    if !(b_low >= T::zero() && b_low < b_high && b_high.is_finite()) {
        return Err(Error::invalid(
            "b_low",
            to_f64(b_low),
            "must satisfy 0 <= b_low < b_high",
        ));
    }
    let lower = |b: T, th: T| -> T {
        let (c, s) = (th.cos(), th.sin());
        let e = levels(params.d_zfs, params.gamma_e * b * c, params.gamma_e * b * s);
        e[1] - e[0]
    };
    let residual = |th: T| lower(b_low, th) - lower(b_high, th);
    let half_pi = T::frac_pi_2();
    let grid: Vec<T> = (0..MATCH_SCAN)
        .map(|i| half_pi * lit::<T>(i as f64) / lit::<T>((MATCH_SCAN - 1) as f64))
        .collect();
    let values: Vec<T> = grid.iter().map(|&t| residual(t)).collect();
    let mut best: Option<MatchedOrientation<T>> = None;
    for i in 0..MATCH_SCAN - 1 {
        let (mut a, mut b) = (grid[i], grid[i + 1]);
        let (mut fa, fb) = (values[i], values[i + 1]);
        if fa == T::zero() {
            b = a;
        } else if fa * fb > T::zero() {
            continue;
        }
        for _ in 0..200 {
            if b - a <= lit::<T>(T::EPS) * half_pi {
                break;
            }
            let m = (a + b) / lit(2.0);
            let fm = residual(m);
            if fm == T::zero() {
                a = m;
                b = m;
                break;
            }
            if fa * fm < T::zero() {
                b = m;
            } else {
                a = m;
                fa = fm;
            }
        }
        let th = (a + b) / lit(2.0);
        let (f1, f2) = (lower(b_low, th), lower(b_high, th));
        let cand = MatchedOrientation {
            theta_nv: th,
            frequency: (f1 + f2) / lit(2.0),
            residual: (f1 - f2).abs(),
        };
        best = match best {
            Some(prev) if (prev.frequency - f_target).abs() <= (cand.frequency - f_target).abs() => Some(prev),
            _ => Some(cand),
        };
    }
    best.ok_or_else(|| Error::OrientationNotFound {
        residuals: grid
            .iter()
            .zip(&values)
            .map(|(&t, &r)| (to_f64(t), to_f64(r)))
            .collect(),
    })
}

/// `n` axes drawn uniformly from the unit sphere (lab frame), reproducible for
/// a given seed.
pub fn ensemble_orientations<T: Real>(n: usize, seed: u64) -> Result<Vec<Vector3<T>>> {
    if n == 0 {
        return Err(Error::invalid("n", 0.0, "ensemble must not be empty"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let z: f64 = rng.random_range(-1.0..=1.0);
            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let r = (1.0 - z * z).max(0.0).sqrt();
            Vector3::new(lit(r * phi.cos()), lit(r * phi.sin()), lit(z))
        })
        .collect())
}

/// Transition pairs of every ensemble member in `field`.
pub fn ensemble_transitions<T: Real>(
    ensemble: &[Vector3<T>],
    field: &FieldConfig<T>,
    params: &MaterialParams<T>,
) -> Result<Vec<(T, T)>> {
    ensemble
        .iter()
        .map(|u| NVConfig::in_field(u, field, params).map(|nv| transition_frequencies(&nv)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_params;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn commutator(a: &Matrix3<Complex<f64>>, b: &Matrix3<Complex<f64>>) -> Matrix3<Complex<f64>> {
        a * b - b * a
    }

    #[test]
    fn spin_algebra() {
        let s = SpinOperatorSet::<f64>::spin_one();
        let i = Complex::new(0.0, 1.0);
        for op in [&s.sx, &s.sy, &s.sz] {
            assert!((op - op.adjoint()).norm() < 1e-15);
        }
        assert!((commutator(&s.sx, &s.sy) - s.sz * i).norm() < 1e-12);
        assert!((commutator(&s.sy, &s.sz) - s.sx * i).norm() < 1e-12);
        let casimir = s.sx * s.sx + s.sy * s.sy + s.sz * s.sz;
        assert!((casimir - s.identity * Complex::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn hamiltonian_trace_is_two_d() {
        let p = default_params::<f64>();
        for th in [0.0, 0.4, 1.3, PI / 2.0] {
            let nv = NVConfig::at_angle(th, 145.0, &p).unwrap();
            let h = hamiltonian(&nv);
            assert!((h - h.adjoint()).norm() < 1e-12);
            assert_relative_eq!(h.trace().re, 2.0 * p.d_zfs, max_relative = 1e-14);
        }
    }

    #[test]
    fn reference_transitions() {
        let p = default_params::<f64>();
        let t = |b: f64, th: f64| transition_frequencies(&NVConfig::at_angle(th, b, &p).unwrap());
        assert_eq!(t(0.0, 0.7), (2870.0, 2870.0));
        let (lo, hi) = t(100.0, 0.0);
        assert_relative_eq!(lo, 2589.76, max_relative = 1e-12);
        assert_relative_eq!(hi, 3150.24, max_relative = 1e-12);
        let (lo, hi) = t(15.0, 0.0);
        assert_relative_eq!(lo, 2827.964, max_relative = 1e-12);
        assert_relative_eq!(hi, 2912.036, max_relative = 1e-12);
        let (lo, hi) = t(145.0, PI / 2.0);
        assert!((lo - 2926.4).abs() < 0.05 && (hi - 2982.8).abs() < 0.05, "{lo} {hi}");
    }

    #[test]
    fn matching_orientation_near_perpendicular() {
        let p = default_params::<f64>();
        let m = find_matching_orientation(2862.0, 15.0, 145.0, &p).unwrap();
        let deg = m.theta_nv.to_degrees();
        assert!(deg > 75.0 && deg < 90.0, "{deg}");
        assert!((m.frequency - 2862.0).abs() < 5.0);
        assert!(m.residual < 1e-9);
    }

    #[test]
    fn matching_orientation_rejects_degenerate_bracket() {
        let p = default_params::<f64>();
        assert!(matches!(
            find_matching_orientation(2862.0, 50.0, 50.0, &p),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn ensemble_is_reproducible() {
        let a = ensemble_orientations::<f64>(500, 7).unwrap();
        let b = ensemble_orientations::<f64>(500, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, ensemble_orientations::<f64>(500, 8).unwrap());
        assert!(a.iter().all(|u| (u.norm() - 1.0).abs() < 1e-12));
        assert_eq!(
            ensemble_orientations::<f64>(1, 3).unwrap(),
            ensemble_orientations::<f64>(1, 3).unwrap()
        );
        assert!(ensemble_orientations::<f64>(0, 3).is_err());
    }
}
