//! Remote detection of target spins through a magnonic cavity.
//!
//! Target spins driven at their Rabi frequency pump a single cavity mode at
//! `f_cavity`; the mode leaks into a waveguide and coherently drives a distant
//! NV ensemble. The whole chain is a classical rate model with placeholder
//! cavity parameters, meant for qualitative studies rather than device design.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{fit_rabi_frequency, rabi_trace, DecoherenceParams};
use crate::error::{Error, Result};
use crate::magnonics::{decay_length, desw_wavevector};
use crate::nv::{transition_frequencies, NVConfig};
use crate::params::{FieldConfig, MaterialParams};
use crate::scalar::{is_sorted_finite, linspace, lit, to_f64, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Real")]
pub struct SensingConfig<T> {
    /// Gyromagnetic ratio of the target species, MHz/G.
    pub gamma_target: T,
    pub n_targets: T,
    /// Cavity mode frequency, MHz.
    pub f_cavity: T,
    /// Cavity leak rate, MHz.
    pub kappa: T,
    /// Coupling of one target spin to the cavity mode, MHz.
    pub g_single: T,
    /// Drive field at the targets, G.
    pub b_drive: T,
    /// us.
    pub pump_time: T,
    /// NV interaction times, us.
    pub tau_grid: Vec<T>,
    /// Cavity to nanodiamond distance along the waveguide, um.
    pub waveguide_length: T,
    /// NV Rabi frequency per unit cavity amplitude at the cavity exit, MHz.
    pub nv_coupling: T,
    /// In-plane bias field on the film, G.
    pub b_bias: T,
    /// Largest accepted cavity to NV detuning, MHz.
    pub resonance_tolerance: T,
}

impl<T: Real> Default for SensingConfig<T> {
    fn default() -> Self {
        let f_cavity = lit(2862.02);
        let gamma_target = lit(2.8024);
        Self {
            gamma_target,
            n_targets: lit(100.0),
            f_cavity,
            kappa: T::one(),
            g_single: lit(0.01),
            b_drive: lit::<T>(2.0) * f_cavity / gamma_target,
            pump_time: lit(10.0),
            tau_grid: linspace(T::zero(), lit(4.0), 801),
            waveguide_length: lit(100.0),
            nv_coupling: lit(2.0),
            b_bias: lit(145.0),
            resonance_tolerance: lit(5.0),
        }
    }
}

impl<T: Real> SensingConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma_target", self.gamma_target),
            ("f_cavity", self.f_cavity),
            ("kappa", self.kappa),
            ("g_single", self.g_single),
            ("b_drive", self.b_drive),
            ("pump_time", self.pump_time),
            ("nv_coupling", self.nv_coupling),
            ("b_bias", self.b_bias),
            ("resonance_tolerance", self.resonance_tolerance),
        ];
        for (name, v) in positive {
            let v = to_f64(v);
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, v, "must be finite and > 0"));
            }
        }
        for (name, v) in [
            ("n_targets", self.n_targets),
            ("waveguide_length", self.waveguide_length),
        ] {
            let v = to_f64(v);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(name, v, "must be finite and >= 0"));
            }
        }
        if self.tau_grid.len() < 2 || !is_sorted_finite(&self.tau_grid) || self.tau_grid[0] < T::zero() {
            return Err(Error::UnsortedGrid { name: "tau_grid" });
        }
        Ok(())
    }

    /// Cavity wave vector (rad/um) on the surface branch at the bias field.
    pub fn cavity_wavevector(&self, params: &MaterialParams<T>) -> Result<T> {
        desw_wavevector(self.f_cavity, self.b_bias, params).ok_or_else(|| {
            Error::Configuration(format!(
                "sensing.f_cavity = {} MHz lies outside the surface-wave band at {} G",
                to_f64(self.f_cavity),
                to_f64(self.b_bias)
            ))
        })
    }

    /// Amplitude transmission of the waveguide at the cavity frequency.
    pub fn waveguide_transmission(&self, params: &MaterialParams<T>) -> Result<T> {
        let k = self.cavity_wavevector(params)?;
        let field = FieldConfig::new(self.b_bias, T::zero())?;
        let l = decay_length(crate::magnonics::ModeKind::Desw, k, &field, params, lit(1e-6))?;
        Ok((-self.waveguide_length / l).exp())
    }
}

/// Rabi frequency of the targets, gamma * b / 2 (rotating-wave, linear drive).
pub fn target_rabi<T: Real>(cfg: &SensingConfig<T>) -> T {
    cfg.gamma_target * cfg.b_drive / lit(2.0)
}

/// Cavity amplitude after the pump:
///
/// ```text
/// A = (N g / kappa) kappa^2 / (kappa^2 + (omega_t - f_cavity)^2) (1 - exp(-kappa t))
/// ```
pub fn cavity_amplitude<T: Real>(cfg: &SensingConfig<T>) -> T {
    let d = target_rabi(cfg) - cfg.f_cavity;
    let k2 = cfg.kappa * cfg.kappa;
    cfg.n_targets * cfg.g_single / cfg.kappa * k2 / (k2 + d * d) * (T::one() - (-cfg.kappa * cfg.pump_time).exp())
}

/// NV Rabi frequency produced by the leaking cavity, MHz.
pub fn nv_rabi<T: Real>(cfg: &SensingConfig<T>, params: &MaterialParams<T>) -> Result<T> {
    Ok(cfg.nv_coupling * cavity_amplitude(cfg) * cfg.waveguide_transmission(params)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SensingTrace<T> {
    pub tau_grid: Vec<T>,
    /// Population left in |0> after each interaction time.
    pub nv_population: Vec<T>,
    /// Rabi frequency recovered from the trace, MHz. `None` when the trace
    /// holds less than one full oscillation.
    pub inferred_rabi: Option<T>,
    /// Rabi frequency the model applied, MHz.
    pub applied_rabi: T,
}

/// Simulates the NV response for every interaction time in `cfg.tau_grid`
/// and fits its Rabi frequency.
pub fn run_protocol<T: Real>(
    cfg: &SensingConfig<T>,
    nv: &NVConfig<T>,
    dec: &DecoherenceParams<T>,
    params: &MaterialParams<T>,
) -> Result<SensingTrace<T>> {
    cfg.validate()?;
    dec.validate()?;
    let (f_minus, f_plus) = transition_frequencies(nv);
    let detuning = (f_minus - cfg.f_cavity).abs().min((f_plus - cfg.f_cavity).abs());
    if detuning > cfg.resonance_tolerance {
        return Err(Error::Configuration(format!(
            "cavity at {} MHz is {} MHz away from the nearest NV transition (tolerance {} MHz)",
            to_f64(cfg.f_cavity),
            to_f64(detuning),
            to_f64(cfg.resonance_tolerance)
        )));
    }
    let omega = nv_rabi(cfg, params)?;
    let nv_population = rabi_trace(omega, T::zero(), &cfg.tau_grid, dec)?;
    let inferred_rabi = match fit_rabi_frequency(&cfg.tau_grid, &nv_population, dec.rabi_decay_time) {
        Ok(fit) => Some(fit.rabi_frequency),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(SensingTrace {
        tau_grid: cfg.tau_grid.clone(),
        nv_population,
        inferred_rabi,
        applied_rabi: omega,
    })
}

/// Number of target spins implied by the trace's Rabi frequency.
///
/// The chain is linear in the product N * g_single, so the estimate is only
/// as good as the assumed `cfg.g_single`; `cfg.n_targets` is ignored.
pub fn estimate_concentration<T: Real>(
    trace: &SensingTrace<T>,
    cfg: &SensingConfig<T>,
    params: &MaterialParams<T>,
) -> Result<T> {
    let inferred = trace
        .inferred_rabi
        .ok_or_else(|| Error::InsufficientData("trace holds less than one full Rabi oscillation".into()))?;
    let unit = SensingConfig {
        n_targets: T::one(),
        ..cfg.clone()
    };
    let per_spin = nv_rabi(&unit, params)?;
    if per_spin <= T::zero() {
        return Err(Error::DegenerateInput("the chain transmits no drive to the NV".into()));
    }
    Ok(inferred / per_spin)
}

/// NV Rabi frequency versus drive field at the targets, MHz.
pub fn drive_sweep<T: Real>(b_grid: &[T], cfg: &SensingConfig<T>, params: &MaterialParams<T>) -> Result<Vec<T>> {
    species_sweep(b_grid, &[(cfg.gamma_target, cfg.n_targets)], cfg, params)
}

/// Drive sweep for a mixture of target species given as (gamma, count).
/// Every species feeds the same cavity mode, so their amplitudes add.
pub fn species_sweep<T: Real>(
    b_grid: &[T],
    species: &[(T, T)],
    cfg: &SensingConfig<T>,
    params: &MaterialParams<T>,
) -> Result<Vec<T>> {
    cfg.validate()?;
    if !is_sorted_finite(b_grid) || b_grid.is_empty() {
        return Err(Error::UnsortedGrid { name: "b_grid" });
    }
    let t = cfg.waveguide_transmission(params)?;
    Ok(b_grid
        .par_iter()
        .map(|&b| {
            let a = species.iter().fold(T::zero(), |acc, &(gamma_target, n_targets)| {
                acc + cavity_amplitude(&SensingConfig {
                    gamma_target,
                    n_targets,
                    b_drive: b,
                    ..cfg.clone()
                })
            });
            cfg.nv_coupling * a * t
        })
        .collect())
}
