//! Closed-form magnetostatic dispersion of an in-plane magnetized film.
//!
//! Surface (Damon-Eshbach) branch:
//!
//! ```text
//! f(k)^2 = f_H (f_H + f_M) + (f_M^2 / 4) (1 - exp(-2 k d))
//! ```
//!
//! Lowest backward-volume branch:
//!
//! ```text
//! f(k)^2 = f_H (f_H + f_M (1 - exp(-k d)) / (k d))
//! ```
//!
//! with `f_H = gamma_m B` and `f_M = gamma_m 4 pi Ms`. Exchange is neglected.
//! A film at exactly zero bias is treated as unsaturated and carries no
//! magnetostatic branch; every frequency evaluates to zero there.

use crate::error::{Error, Result};
use crate::params::{FieldConfig, MaterialParams};
use crate::scalar::{lit, to_f64, Real};

use super::{classify, ModeKind};

/// Damon-Eshbach frequency in MHz for `k` in rad/um. Requires theta = 0 or pi.
pub fn desw_frequency<T: Real>(k: T, field: &FieldConfig<T>, params: &MaterialParams<T>) -> Result<T> {
    expect_family(field, ModeKind::Desw)?;
    check_k(k)?;
    Ok(frequency(ModeKind::Desw, k, field.b_ext, params))
}

/// Backward-volume frequency in MHz for `k` in rad/um. Requires theta = pi/2 (or 3 pi/2).
pub fn bvmsw_frequency<T: Real>(k: T, field: &FieldConfig<T>, params: &MaterialParams<T>) -> Result<T> {
    expect_family(field, ModeKind::Bvmsw)?;
    check_k(k)?;
    Ok(frequency(ModeKind::Bvmsw, k, field.b_ext, params))
}

/// Kittel (uniform precession) frequency of the in-plane film, MHz.
pub fn kittel<T: Real>(b: T, params: &MaterialParams<T>) -> T {
    let fh = params.f_h(b);
    (fh * (fh + params.f_m())).sqrt()
}

/// Unchecked dispersion for a given family; `k >= 0` is assumed.
pub fn frequency<T: Real>(kind: ModeKind, k: T, b: T, params: &MaterialParams<T>) -> T {
    if b <= T::zero() {
        return T::zero();
    }
    let fh = params.f_h(b);
    let fm = params.f_m();
    let x = k * params.thickness;
    match kind {
        ModeKind::Desw => {
            let two: T = lit(2.0);
            // 1 - exp(-2x) without cancellation at small x
            let surface = -(-two * x).exp_m1();
            (fh * (fh + fm) + fm * fm / lit(4.0) * surface).sqrt()
        }
        ModeKind::Bvmsw => (fh * (fh + fm * volume_factor(x))).sqrt(),
    }
}

/// (1 - exp(-x)) / x, equal to 1 at x = 0.
pub(crate) fn volume_factor<T: Real>(x: T) -> T {
    if x == T::zero() {
        T::one()
    } else {
        -(-x).exp_m1() / x
    }
}

/// Inverse of the surface branch: wave vector (rad/um) carrying frequency `f`,
/// or `None` when `f` lies outside the open band (Kittel, f_H + f_M / 2).
pub fn desw_wavevector<T: Real>(f: T, b: T, params: &MaterialParams<T>) -> Option<T> {
    if b <= T::zero() {
        return None;
    }
    let fh = params.f_h(b);
    let fm = params.f_m();
    let u = (f * f - fh * (fh + fm)) / (fm * fm / lit(4.0));
    if !(u > T::zero() && u < T::one()) {
        return None;
    }
    // 1 - exp(-2kd) = u
    Some(-(-u).ln_1p() / (lit::<T>(2.0) * params.thickness))
}

/// (f_min, f_max) of the branch selected by `field.theta` over k in [k_min, k_max].
///
/// The surface branch rises monotonically, so its minimum sits at `k_min`; the
/// backward-volume branch falls, so its maximum sits at `k_min`.
pub fn band_edges<T: Real>(field: &FieldConfig<T>, params: &MaterialParams<T>, k_min: T, k_max: T) -> Result<(T, T)> {
    if !(k_max > T::zero()) {
        return Err(Error::invalid("k_max", to_f64(k_max), "must be > 0"));
    }
    check_k(k_min)?;
    if k_min > k_max {
        return Err(Error::invalid("k_min", to_f64(k_min), "must not exceed k_max"));
    }
    let (kind, _) = classify(field.theta)?;
    let lo = frequency(kind, k_min, field.b_ext, params);
    let hi = frequency(kind, k_max, field.b_ext, params);
    Ok(match kind {
        ModeKind::Desw => (lo, hi),
        ModeKind::Bvmsw => (hi, lo),
    })
}

/// Group velocity d(omega)/dk in m/s by central finite difference.
///
/// `rel_step` is the step relative to `k`. Because omega is in rad/us and k in
/// rad/um the derivative comes out directly in um/us = m/s.
pub fn group_velocity<T: Real>(
    kind: ModeKind,
    k: T,
    field: &FieldConfig<T>,
    params: &MaterialParams<T>,
    rel_step: T,
) -> Result<T> {
    expect_family(field, kind)?;
    group_velocity_unchecked(kind, k, field.b_ext, params, rel_step)
}

pub(crate) fn group_velocity_unchecked<T: Real>(
    kind: ModeKind,
    k: T,
    b: T,
    params: &MaterialParams<T>,
    rel_step: T,
) -> Result<T> {
    if !(k > T::zero()) {
        return Err(Error::Boundary { k: to_f64(k) });
    }
    let f = frequency(kind, k, b, params);
    if f <= T::zero() {
        return Ok(T::zero());
    }
    // Differencing only the k-dependent part of f^2 avoids cancellation
    // against the large constant term on the flat part of the branch.
    let h = k * rel_step;
    let dq = dispersive_part(kind, k + h, b, params) - dispersive_part(kind, k - h, b, params);
    let df = dq / (h + h) / (f + f);
    Ok(T::two_pi() * df)
}

/// f(k)^2 minus its k-independent part, MHz^2.
fn dispersive_part<T: Real>(kind: ModeKind, k: T, b: T, params: &MaterialParams<T>) -> T {
    let fm = params.f_m();
    let x = k * params.thickness;
    match kind {
        ModeKind::Desw => -(fm * fm / lit(4.0)) * (-(x + x)).exp(),
        ModeKind::Bvmsw => params.f_h(b) * fm * volume_factor(x),
    }
}

/// Amplitude decay length in um: L = |v_g| / (alpha * omega).
pub fn decay_length<T: Real>(
    kind: ModeKind,
    k: T,
    field: &FieldConfig<T>,
    params: &MaterialParams<T>,
    rel_step: T,
) -> Result<T> {
    expect_family(field, kind)?;
    decay_length_unchecked(kind, k, field.b_ext, params, rel_step)
}

pub(crate) fn decay_length_unchecked<T: Real>(
    kind: ModeKind,
    k: T,
    b: T,
    params: &MaterialParams<T>,
    rel_step: T,
) -> Result<T> {
    let vg = group_velocity_unchecked(kind, k, b, params, rel_step)?;
    let omega = T::two_pi() * frequency(kind, k, b, params);
    if omega <= T::zero() {
        return Err(Error::NotApplicable(
            "decay length undefined for an unsaturated film (B = 0)".into(),
        ));
    }
    Ok(vg.abs() / (params.alpha_gilbert * omega))
}

fn expect_family<T: Real>(field: &FieldConfig<T>, expected: ModeKind) -> Result<()> {
    let (kind, _) = classify(field.theta)?;
    if kind == expected {
        Ok(())
    } else {
        Err(Error::WrongModeFamily {
            theta: to_f64(field.theta),
            expected,
        })
    }
}

fn check_k<T: Real>(k: T) -> Result<()> {
    if k >= T::zero() && k.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("k", to_f64(k), "must be finite and >= 0"))
    }
}
