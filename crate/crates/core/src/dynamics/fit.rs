use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// Ordinary least squares y = slope x + intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit<T> {
    pub slope: T,
    pub intercept: T,
    pub r_squared: T,
}

pub fn linear_regression<T: Real>(x: &[T], y: &[T]) -> Result<LinearFit<T>> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "regression needs two equally long series of at least 2 points ({} and {})",
            x.len(),
            y.len()
        )));
    }
    let n: T = lit(x.len() as f64);
    let mx = x.iter().fold(T::zero(), |a, &v| a + v) / n;
    let my = y.iter().fold(T::zero(), |a, &v| a + v) / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == T::zero() {
        return Err(Error::DegenerateData("all abscissae coincide".into()));
    }
    let slope = sxy / sxx;
    let r_squared = if syy == T::zero() {
        T::one()
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Parameters of exp(-(t / T2)^alpha) fitted to a decay trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeFit<T> {
    /// us.
    pub t2: T,
    pub alpha: T,
    /// Sum of squared residuals.
    pub residual: T,
    pub iterations: usize,
}

const MAX_ITER: usize = 200;

/// Fits exp(-(t / T2)^alpha).
///
/// The seed comes from the straight line ln(-ln s) = alpha ln t - alpha ln T2;
/// damped Gauss-Newton then minimizes the squared residuals in the original
/// domain.
pub fn fit_envelope<T: Real>(t: &[T], s: &[T]) -> Result<EnvelopeFit<T>> {
    if t.len() != s.len() {
        return Err(Error::InsufficientData("time and signal lengths differ".into()));
    }
    if t.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "need at least 5 points, got {}",
            t.len()
        )));
    }
    for (&ti, &si) in t.iter().zip(s) {
        if !(ti >= T::zero() && ti.is_finite()) {
            return Err(Error::invalid("t", to_f64(ti), "must be finite and >= 0"));
        }
        if !(si > T::zero() && si <= T::one()) {
            return Err(Error::invalid("signal", to_f64(si), "must lie in (0, 1]"));
        }
    }
    // Log-log seed from the points that carry decay information.
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (&ti, &si) in t.iter().zip(s) {
        if ti > T::zero() && si < T::one() {
            let v = -si.ln();
            if v > T::zero() {
                lx.push(ti.ln());
                ly.push(v.ln());
            }
        }
    }
    let distinct = lx.windows(2).any(|w| w[0] != w[1]);
    if lx.len() < 2 || !distinct {
        return Err(Error::DegenerateData("signal shows no decay to fit".into()));
    }
    let line = linear_regression(&lx, &ly)?;
    let mut alpha = line.slope.max(lit(0.05)).min(lit(4.0));
    let mut t2 = (-line.intercept / line.slope).exp();
    if !(t2.is_finite() && t2 > T::zero()) {
        t2 = t[t.len() - 1];
    }

    let rss = |t2: T, alpha: T| -> T {
        t.iter().zip(s).fold(T::zero(), |acc, (&ti, &si)| {
            let r = si - (-(ti / t2).powf(alpha)).exp();
            acc + r * r
        })
    };
    let mut cost = rss(t2, alpha);
    let mut history = vec![to_f64(cost)];
    let mut lambda: T = lit(1e-3);
    let tiny: T = lit(T::EPS * T::EPS);
    for it in 0..MAX_ITER {
        if cost <= tiny {
            return Ok(EnvelopeFit {
                t2,
                alpha,
                residual: cost,
                iterations: it,
            });
        }
        let mut jtj = Matrix2::zeros();
        let mut jtr = Vector2::zeros();
        for (&ti, &si) in t.iter().zip(s) {
            if ti == T::zero() {
                continue;
            }
            let ratio = ti / t2;
            let u = ratio.powf(alpha);
            let m = (-u).exp();
            let j = Vector2::new(m * u * alpha / t2, -m * u * ratio.ln());
            jtj += j * j.transpose();
            jtr += j * (si - m);
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut damped = jtj;
            damped[(0, 0)] *= T::one() + lambda;
            damped[(1, 1)] *= T::one() + lambda;
            let Some(step) = damped.try_inverse().map(|inv| inv * jtr) else {
                lambda *= lit(10.0);
                continue;
            };
            let (nt2, na) = (t2 + step[0], alpha + step[1]);
            if nt2 > T::zero() && na > T::zero() {
                let nc = rss(nt2, na);
                if nc <= cost {
                    let rel = (step[0] / t2).abs().max((step[1] / alpha).abs());
                    t2 = nt2;
                    alpha = na;
                    let improvement = cost - nc;
                    cost = nc;
                    history.push(to_f64(cost));
                    lambda = (lambda / lit(10.0)).max(lit(1e-12));
                    accepted = true;
                    if rel < lit(1e-12) || improvement <= cost * lit(T::EPS) {
                        return Ok(EnvelopeFit {
                            t2,
                            alpha,
                            residual: cost,
                            iterations: it + 1,
                        });
                    }
                    break;
                }
            }
            lambda *= lit(10.0);
        }
        if !accepted {
            // No downhill step at any damping: a stationary point.
            return Ok(EnvelopeFit {
                t2,
                alpha,
                residual: cost,
                iterations: it + 1,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITER,
        history,
    })
}

/// Frequency and depth of a Rabi trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiFit<T> {
    /// Oscillation frequency sqrt(omega^2 + detuning^2), MHz.
    pub effective_frequency: T,
    /// Depth omega^2 / omega_eff^2.
    pub depth: T,
    /// Resonant Rabi frequency omega = omega_eff sqrt(depth), MHz.
    pub rabi_frequency: T,
    pub residual: T,
}

/// Fits P(t) = 1 - depth sin^2(pi f t) env(t) with env the known Rabi decay.
///
/// The depth enters linearly and is solved in closed form for every trial
/// frequency; the frequency is located by a dense scan followed by a
/// golden-section refinement. A trace without modulation fits to frequency 0.
pub fn fit_rabi_frequency<T: Real>(t: &[T], p: &[T], decay_time: Option<T>) -> Result<RabiFit<T>> {
    if t.len() != p.len() || t.len() < 5 {
        return Err(Error::InsufficientData(
            "need at least 5 samples of equal length".into(),
        ));
    }
    let y: Vec<T> = p.iter().map(|&v| T::one() - v).collect();
    let yy = y.iter().fold(T::zero(), |a, &v| a + v * v);
    if y.iter().all(|v| v.abs() <= lit(1e-12)) {
        return Ok(RabiFit {
            effective_frequency: T::zero(),
            depth: T::zero(),
            rabi_frequency: T::zero(),
            residual: yy,
        });
    }
    let span = t[t.len() - 1] - t[0];
    let dt = t.windows(2).map(|w| w[1] - w[0]).fold(T::zero(), |a, d| a.max(d));
    if !(span > T::zero() && dt > T::zero()) {
        return Err(Error::InsufficientData("time grid has no extent".into()));
    }
    let env = |ti: T| match decay_time {
        Some(tr) => (-ti / tr).exp(),
        None => T::one(),
    };
    // Residual after the optimal depth: |y|^2 - <y,g>^2 / <g,g>.
    let cost = |f: T| -> (T, T) {
        let (mut yg, mut gg) = (T::zero(), T::zero());
        for (&ti, &yi) in t.iter().zip(&y) {
            let s = (T::pi() * f * ti).sin();
            let g = s * s * env(ti);
            yg += yi * g;
            gg += g * g;
        }
        if gg == T::zero() {
            return (yy, T::zero());
        }
        (yy - yg * yg / gg, yg / gg)
    };
    let f_min = T::one() / span;
    let f_max = T::one() / (lit::<T>(2.0) * dt);
    let step = lit::<T>(0.1) / span;
    let lo_scan = f_min * lit(0.25);
    let n = to_f64((f_max - lo_scan) / step).ceil().max(2.0) as usize;
    let mut best = (0usize, lit::<T>(f64::MAX));
    let grid: Vec<T> = (0..=n).map(|i| lo_scan + step * lit::<T>(i as f64)).collect();
    for (i, &f) in grid.iter().enumerate() {
        let c = cost(f).0;
        if c < best.1 {
            best = (i, c);
        }
    }
    let i = best.0;
    let (mut a, mut b) = (grid[i.saturating_sub(1)], grid[(i + 1).min(n)]);
    let gr: T = (lit::<T>(5.0).sqrt() - T::one()) / lit(2.0);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (cost(c).0, cost(d).0);
    for _ in 0..200 {
        if (b - a).abs() <= lit::<T>(T::EPS) * lit::<T>(4.0) * b.abs() {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = cost(c).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = cost(d).0;
        }
    }
    let f = (a + b) / lit(2.0);
    if f < f_min * lit(1.0 - 1e-9) {
        return Err(Error::InsufficientData(format!(
            "trace spans {:.4} us but the oscillation period is {:.4} us; at least one full cycle is required",
            to_f64(span),
            to_f64(T::one() / f)
        )));
    }
    let (res, depth) = cost(f);
    Ok(RabiFit {
        effective_frequency: f,
        depth,
        rabi_frequency: f * depth.max(T::zero()).sqrt(),
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{rabi_trace, DecoherenceParams};

    fn synth(t2: f64, alpha: f64) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..60).map(|i| i as f64 * 0.1).collect();
        let s = t.iter().map(|&x| (-(x / t2).powf(alpha)).exp()).collect();
        (t, s)
    }

    #[test]
    fn envelope_round_trip() {
        for (t2, a) in [(1.54, 1.0), (2.78, 2.0), (0.8, 0.6), (3.0, 3.5)] {
            let (t, s) = synth(t2, a);
            let fit = fit_envelope(&t, &s).unwrap();
            assert!((fit.t2 / t2 - 1.0).abs() < 1e-6, "{fit:?}");
            assert!((fit.alpha / a - 1.0).abs() < 1e-6, "{fit:?}");
        }
    }

    #[test]
    fn envelope_rejects_flat_and_short() {
        let t: Vec<f64> = (0..10).map(|i| i as f64).collect();
        assert!(matches!(fit_envelope(&t, &[1.0; 10]), Err(Error::DegenerateData(_))));
        assert!(matches!(
            fit_envelope(&t[..3], &[1.0, 0.9, 0.8]),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn rabi_fit_recovers_frequency_and_detuning() {
        let t: Vec<f64> = (0..801).map(|i| i as f64 * 0.005).collect();
        let dec = DecoherenceParams::new(1.0, 1.0, Some(2.0)).unwrap();
        let p = rabi_trace(1.93, 0.4, &t, &dec).unwrap();
        let fit = fit_rabi_frequency(&t, &p, Some(2.0)).unwrap();
        assert!((fit.rabi_frequency / 1.93 - 1.0).abs() < 1e-6, "{fit:?}");
        assert!((fit.effective_frequency - (1.93_f64.powi(2) + 0.16).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn rabi_fit_flat_and_slow() {
        let t: Vec<f64> = (0..101).map(|i| i as f64 * 0.01).collect();
        let fit = fit_rabi_frequency(&t, &vec![1.0; 101], None).unwrap();
        assert_eq!(fit.rabi_frequency, 0.0);
        let dec = DecoherenceParams::new(1.0, 1.0, None).unwrap();
        let slow = rabi_trace(0.3, 0.0, &t, &dec).unwrap();
        assert!(matches!(
            fit_rabi_frequency(&t, &slow, None),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn regression_exact_line() {
        let f = linear_regression::<f64>(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-15 && (f.intercept - 1.0).abs() < 1e-14);
        assert_eq!(f.r_squared, 1.0);
    }
}
