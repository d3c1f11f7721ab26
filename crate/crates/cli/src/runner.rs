use std::path::Path;
use std::time::Instant;

use hybridsim::coupling::{amplification, antenna_field, sw_drive_field, Channel};
use hybridsim::dynamics::{
    echo_trace, evolve_sequence, fit_envelope, fit_rabi_frequency, power_scaling_check, rabi_frequency, rabi_trace,
    DecoherenceParams, PulseSequence,
};
use hybridsim::magnonics::{
    band_edges, classify, decay_length, frequency, group_velocity, mode_ladder, ModeKind, TransmissionMap,
};
use hybridsim::nv::{equal_contrast_power, find_matching_orientation, odmr_map, transition_frequencies, NVConfig};
use hybridsim::sensing::{drive_sweep, estimate_concentration, run_protocol, species_sweep, target_rabi};
use hybridsim::{NvF64, ScenarioF64};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ScenarioConfig, SequenceKind, Task};
use crate::error::{CliError, CliResult};
use crate::output::{FileRecord, OutputDir};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// "config" or "runtime".
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub task: Task,
    /// "ok" or "error".
    pub status: String,
    pub error: Option<ErrorReport>,
    pub code_version: String,
    pub seed: u64,
    pub config: ScenarioConfig,
    pub files: Vec<FileRecord>,
    pub summary: Value,
    pub timing: Timing,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Runs `task` and writes its outputs, `summary.json` and `manifest.json`
/// into `out`. The manifest is written on failure too, carrying the error.
pub fn run_scenario(cfg: &ScenarioConfig, task: Task, out: &Path, seed: Option<u64>) -> CliResult<RunManifest> {
    let start = Instant::now();
    let mut cfg = cfg.clone();
    cfg.select(task)?;
    if let Some(s) = seed {
        cfg.ensemble.seed = s;
    }
    cfg.validate()?;
    let mut dir = OutputDir::create(out)?;
    let result = dispatch(&cfg, task, &mut dir).and_then(|summary| {
        dir.write_json("summary.json", &summary)?;
        Ok(summary)
    });
    let (status, error, summary) = match &result {
        Ok(s) => ("ok", None, s.clone()),
        Err(e) => (
            "error",
            Some(ErrorReport {
                kind: match e {
                    CliError::Config(_) => "config".into(),
                    CliError::Runtime(_) => "runtime".into(),
                },
                message: e.message().to_string(),
            }),
            Value::Null,
        ),
    };
    let manifest = RunManifest {
        task,
        status: status.into(),
        error,
        code_version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.ensemble.seed,
        files: dir.files().to_vec(),
        config: cfg,
        summary,
        timing: Timing {
            wall_seconds: start.elapsed().as_secs_f64(),
            threads: rayon::current_num_threads(),
        },
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    bytes.push(b'\n');
    std::fs::write(dir.path().join(MANIFEST_NAME), bytes)?;
    result.map(|_| manifest)
}

fn dispatch(cfg: &ScenarioConfig, task: Task, dir: &mut OutputDir) -> CliResult<Value> {
    match task {
        Task::Dispersion => dispersion(cfg, dir),
        Task::Transmission => transmission(cfg, dir),
        Task::OdmrMap => odmr(cfg, dir),
        Task::Rabi => rabi(cfg, dir),
        Task::Sequence => sequence(cfg, dir),
        Task::Amplification => amplification_task(cfg, dir),
        Task::Sensing => sensing(cfg, dir),
    }
}

fn dispersion(cfg: &ScenarioConfig, dir: &mut OutputDir) -> CliResult<Value> {
    let task = cfg.dispersion.clone().unwrap_or_default();
    let sc = cfg.scenario();
    let k_grid = task.k_grid.resolve("dispersion.k_grid")?;
    let (kind, _) = classify(sc.field.theta)?;
    let step = sc.spectrum.fd_rel_step;
    let rows = k_grid
        .iter()
        .map(|&k| {
            let f = frequency(kind, k, sc.field.b_ext, &sc.material);
            let vg = group_velocity(kind, k, &sc.field, &sc.material, step)?;
            let l = decay_length(kind, k, &sc.field, &sc.material, step)?;
            Ok(vec![k, f, vg, l])
        })
        .collect::<hybridsim::Result<Vec<_>>>()?;
    let name = match kind {
        ModeKind::Desw => "disp_desw.csv",
        ModeKind::Bvmsw => "disp_bvmsw.csv",
    };
    dir.write_csv(
        name,
        &[
            "k_rad_per_um",
            "frequency_mhz",
            "group_velocity_m_per_s",
            "decay_length_um",
        ],
        &rows,
    )?;
    let ladder = mode_ladder(&sc.field, &sc.material, &sc.geometry, &sc.spectrum)?;
    let ladder_rows: Vec<Vec<f64>> = ladder
        .iter()
        .map(|m| vec![m.k, m.frequency, m.group_velocity, m.decay_length, m.efficiency])
        .collect();
    dir.write_csv(
        "ladder.csv",
        &[
            "k_rad_per_um",
            "frequency_mhz",
            "group_velocity_m_per_s",
            "decay_length_um",
            "efficiency",
        ],
        &ladder_rows,
    )?;
    let (lo, hi) = band_edges(&sc.field, &sc.material, 1e-12, 1e3)?;
    let (glo, ghi) = band_edges(&sc.field, &sc.material, k_grid[0], k_grid[k_grid.len() - 1])?;
    Ok(json!({
        "kind": kind,
        "b_ext_gauss": sc.field.b_ext,
        "band_min_mhz": lo,
        "band_max_mhz": hi,
        "grid_band_min_mhz": glo,
        "grid_band_max_mhz": ghi,
        "ladder_modes": ladder.len(),
    }))
}

fn transmission(cfg: &ScenarioConfig, dir: &mut OutputDir) -> CliResult<Value> {
    let task = cfg.transmission.clone().unwrap_or_default();
    let sc = cfg.scenario();
    let b = task.b_grid.resolve("transmission.b_grid")?;
    let f = task.f_grid.resolve("transmission.f_grid")?;
    let map = TransmissionMap::compute(
        &b,
        &f,
        sc.field.theta,
        &sc.geometry,
        &sc.material,
        &sc.spectrum,
        task.reference_field,
    )?;
    let mut rows = Vec::with_capacity(b.len() * f.len());
    for (i, &bi) in b.iter().enumerate() {
        for (j, &fj) in f.iter().enumerate() {
            rows.push(vec![bi, fj, map.s21[i][j]]);
        }
    }
    dir.write_csv("transmission.csv", &["b_gauss", "f_mhz", "s21"], &rows)?;
    let k_min = sc.spectrum.k_spacing;
    let k_max = sc.spectrum.k_max_for(&sc.geometry);
    let mut support_rows = Vec::new();
    let mut rows_json = Vec::new();
    for (i, &bi) in b.iter().enumerate() {
        let support = map.support(i, task.support_threshold);
        let field = sc.field.with_field(bi);
        let ladder = mode_ladder(&field, &sc.material, &sc.geometry, &sc.spectrum)?;
        let edges = if ladder.is_empty() {
            None
        } else {
            Some(band_edges(&field, &sc.material, k_min, k_max)?)
        };
        let nan = f64::NAN;
        support_rows.push(vec![
            bi,
            support.map_or(nan, |s| s.0),
            support.map_or(nan, |s| s.1),
            edges.map_or(nan, |e| e.0),
            edges.map_or(nan, |e| e.1),
        ]);
        rows_json.push(json!({
            "b_gauss": bi,
            "support_mhz": support.map(|s| [s.0, s.1]),
            "band_mhz": edges.map(|e| [e.0, e.1]),
            "row_is_zero": map.s21[i].iter().all(|&v| v == 0.0),
        }));
    }
    dir.write_csv(
        "transmission_support.csv",
        &[
            "b_gauss",
            "support_low_mhz",
            "support_high_mhz",
            "band_low_mhz",
            "band_high_mhz",
        ],
        &support_rows,
    )?;
    let cell = if f.len() > 1 {
        (f[f.len() - 1] - f[0]) / (f.len() - 1) as f64
    } else {
        0.0
    };
    Ok(json!({
        "grid": [b.len(), f.len()],
        "f_cell_mhz": cell,
        "reference_field_gauss": task.reference_field,
        "rows": rows_json,
    }))
}

fn odmr(cfg: &ScenarioConfig, dir: &mut OutputDir) -> CliResult<Value> {
    let task = cfg.odmr_map.clone().unwrap_or_default();
    let sc = cfg.scenario();
    let b = task.b_grid.resolve("odmr_map.b_grid")?;
    let f = task.f_grid.resolve("odmr_map.f_grid")?;
    let map = odmr_map(&b, &f, &sc)?;
    let mut rows = Vec::with_capacity(b.len() * f.len());
    for (i, &bi) in b.iter().enumerate() {
        for (j, &fj) in f.iter().enumerate() {
            rows.push(vec![bi, fj, map.contrast[i][j]]);
        }
    }
    dir.write_csv("odmr_map.csv", &["b_gauss", "f_mhz", "contrast"], &rows)?;
    let row_max: Vec<Vec<f64>> = (0..b.len()).map(|i| vec![b[i], map.row_max(i)]).collect();
    dir.write_csv("odmr_rows.csv", &["b_gauss", "max_contrast"], &row_max)?;
    let threshold = sc.odmr.detection_threshold;
    let onset = map.onset(threshold);
    let below = b
        .iter()
        .enumerate()
        .filter(|(_, &bi)| onset.is_none_or(|o| bi < o))
        .map(|(i, _)| map.row_max(i))
        .fold(0.0, f64::max);
    let mut summary = json!({
        "theta_rad": sc.field.theta,
        "power_mw": sc.drive.power,
        "nd_x_um": sc.geometry.nd_x,
        "detection_threshold": threshold,
        "onset_gauss": onset,
        "max_contrast_below_onset": below,
        "peak_contrast": map.peak(),
        "integrated_contrast": map.integrated(),
    });
    if let Some(eq) = task.equal_contrast {
        let mut reference = sc.clone();
        reference.field.theta = eq.reference_theta;
        reference.drive = reference.drive.with_power(eq.reference_power);
        let target = odmr_map(&b, &f, &reference)?.peak();
        let p = equal_contrast_power(target, &b, &f, &sc, eq.min_power, eq.max_power)?;
        summary["equal_contrast"] = json!({
            "reference_theta_rad": eq.reference_theta,
            "reference_power_mw": eq.reference_power,
            "reference_peak_contrast": target,
            "power_mw": p,
            "power_ratio": p / eq.reference_power,
        });
    }
    Ok(summary)
}

/// Drive reaching the defect family whose lower transitions coincide at the
/// coupling block's two fields.
#[derive(Debug, Clone, Copy)]
struct Addressed {
    nv: NvF64,
    frequency: f64,
    detuning: f64,
    amplitude: f64,
    omega: f64,
}

fn addressed_drive(sc: &ScenarioF64, channel: Channel, frequency: Option<f64>, power: f64) -> CliResult<Addressed> {
    let c = &sc.coupling;
    let matched = find_matching_orientation(c.f_target, c.b_low, c.b_high, &sc.material)?;
    let f = frequency.unwrap_or(matched.frequency);
    let nv = NVConfig::at_angle(matched.theta_nv, sc.field.b_ext, &sc.material)?;
    let (lower, _) = transition_frequencies(&nv);
    let drive = sc.drive.with_frequency(f).with_power(power);
    let amplitude = match channel {
        Channel::SpinWave => {
            sw_drive_field(
                &drive,
                &sc.geometry,
                &sc.field,
                &sc.material,
                &sc.spectrum,
                sc.kappa_sw()?,
            )?
            .amplitude
        }
        Channel::Antenna => antenna_field(&drive, &sc.geometry)?,
    };
    Ok(Addressed {
        nv,
        frequency: f,
        detuning: f - lower,
        amplitude,
        omega: rabi_frequency(amplitude, &sc.material)?,
    })
}

fn rabi(cfg: &ScenarioConfig, dir: &mut OutputDir) -> CliResult<Value> {
    let task = cfg.rabi.clone().unwrap_or_default();
    let mut sc = cfg.scenario();
    let t = task.t_grid.resolve("rabi.t_grid")?;
    let power = sc.drive.power;
    let a = addressed_drive(&sc, task.channel, task.frequency, power)?;
    let decay = sc.rabi_decay.decay_time(power);
    let dec = DecoherenceParams::new(1.0, 1.0, Some(decay))?;
    let trace = rabi_trace(a.omega, a.detuning, &t, &dec)?;
    let rows: Vec<Vec<f64>> = t.iter().zip(&trace).map(|(&ti, &p)| vec![ti, p]).collect();
    dir.write_csv("rabi_trace.csv", &["time_us", "signal"], &rows)?;
    let fitted = match fit_rabi_frequency(&t, &trace, Some(decay)) {
        Ok(fit) => Some(fit.rabi_frequency),
        Err(hybridsim::Error::InsufficientData(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let mut summary = json!({
        "channel": task.channel,
        "b_ext_gauss": sc.field.b_ext,
        "power_mw": power,
        "theta_nv_deg": a.nv.cos_theta().acos().to_degrees(),
        "frequency_mhz": a.frequency,
        "detuning_mhz": a.detuning,
        "drive_amplitude_gauss": a.amplitude,
        "rabi_mhz": a.omega,
        "fitted_rabi_mhz": fitted,
        "rabi_decay_time_us": decay,
        "visible": sc.rabi_decay.is_visible(a.omega, power),
    });
    if let Some(powers) = task.powers {
        sc.drive = sc.drive.with_frequency(a.frequency);
        let scaling = power_scaling_check(&powers, &sc, task.channel)?;
        let rows: Vec<Vec<f64>> = scaling
            .powers
            .iter()
            .zip(&scaling.rabi)
            .map(|(&p, &r)| vec![p, p.sqrt(), r])
            .collect();
        dir.write_csv("power_scaling.csv", &["power_mw", "sqrt_power", "rabi_mhz"], &rows)?;
        summary["power_scaling"] = json!({
            "slope_mhz_per_sqrt_mw": scaling.slope,
            "intercept_mhz": scaling.intercept,
            "r_squared": scaling.r_squared,
            "max_rabi_mhz": scaling.rabi.iter().cloned().fold(0.0, f64::max),
        });
    }
    Ok(summary)
}

fn sequence(cfg: &ScenarioConfig, dir: &mut OutputDir) -> CliResult<Value> {
    let task = cfg.sequence.clone().unwrap_or_default();
    let sc = cfg.scenario();
    let dec = task.decoherence;
    let omega = match task.pulse_channel {
        Some(ch) => addressed_drive(&sc, ch, None, sc.drive.power)?.omega,
        None => task.pulse_rabi,
    };
    if !(omega > 0.0) {
        return Err(CliError::Runtime(format!(
            "pulse Rabi frequency {omega} MHz; no pulses possible"
        )));
    }
    let n = task.n;
    let build = |t: f64| match task.kind {
        SequenceKind::Cpmg => PulseSequence::cpmg(n, omega, t),
        _ => PulseSequence::hahn(omega, t),
    };
    if task.kind == SequenceKind::Custom {
        let seq = PulseSequence::new(task.elements.clone())?;
        let out = evolve_sequence(&seq, task.detuning, Some(&dec))?;
        dir.write_csv(
            "sequence_outcome.csv",
            &["population", "bloch_x", "bloch_y", "bloch_z", "free_time_us"],
            &[vec![
                out.population,
                out.bloch.x,
                out.bloch.y,
                out.bloch.z,
                out.free_time,
            ]],
        )?;
        return Ok(json!({
            "kind": task.kind,
            "population": out.population,
            "free_time_us": out.free_time,
        }));
    }
    let t = task.t_grid.resolve("sequence.t_grid")?;
    let signal = echo_trace(&t, task.detuning, &dec, build)?;
    let rows: Vec<Vec<f64>> = t.iter().zip(&signal).map(|(&ti, &s)| vec![ti, s]).collect();
    dir.write_csv("echo.csv", &["time_us", "signal"], &rows)?;
    let (ft, fs): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(&signal)
        .filter(|(&ti, &s)| ti > 0.0 && s > 0.0)
        .map(|(&ti, &s)| (ti, s))
        .unzip();
    let fit = fit_envelope(&ft, &fs)?;
    let at_t2 = echo_trace(&[dec.t2], task.detuning, &dec, build)?[0];
    Ok(json!({
        "kind": task.kind,
        "pulses": if task.kind == SequenceKind::Cpmg { n } else { 1 },
        "pulse_rabi_mhz": omega,
        "t2_us": fit.t2,
        "alpha": fit.alpha,
        "fit_residual": fit.residual,
        "echo_at_t2": at_t2,
    }))
}

fn amplification_task(cfg: &ScenarioConfig, dir: &mut OutputDir) -> CliResult<Value> {
    let task = cfg.amplification.clone().unwrap_or_default();
    let sc = cfg.scenario();
    let x = task.x_grid.resolve("amplification.x_grid")?;
    let c = sc.coupling;
    let matched = find_matching_orientation(c.f_target, c.b_low, c.b_high, &sc.material)?;
    let f = task.frequency.unwrap_or(matched.frequency);
    let kappa = sc.kappa_sw()?;
    let high = sc.field.with_field(c.b_high);
    let drive = sc.drive.with_frequency(f);
    let reference = sc.geometry.at_distance(c.reference_distance);
    let mode = sw_drive_field(&drive, &reference, &high, &sc.material, &sc.spectrum, kappa)?.contributing_mode;
    let l = mode.map_or(f64::INFINITY, |m| m.decay_length);
    let a_ref = amplification(c.reference_distance, c.b_low, c.b_high, f, &sc)?;
    let rows = x
        .iter()
        .map(|&xi| {
            let a = amplification(xi, c.b_low, c.b_high, f, &sc)?;
            let predicted = a_ref * xi / c.reference_distance * (-(xi - c.reference_distance) / l).exp();
            Ok(vec![xi, a, predicted])
        })
        .collect::<hybridsim::Result<Vec<_>>>()?;
    dir.write_csv(
        "amplification.csv",
        &["x_um", "amplification", "inverse_distance_prediction"],
        &rows,
    )?;
    Ok(json!({
        "frequency_mhz": f,
        "theta_nv_deg": matched.theta_nv.to_degrees(),
        "kappa_sw": kappa,
        "reference_distance_um": c.reference_distance,
        "reference_amplification": a_ref,
        "decay_length_um": l,
        "mode_k_rad_per_um": mode.map(|m| m.k),
        "points": rows.iter().map(|r| json!({"x_um": r[0], "amplification": r[1], "prediction": r[2]})).collect::<Vec<_>>(),
    }))
}

fn sensing(cfg: &ScenarioConfig, dir: &mut OutputDir) -> CliResult<Value> {
    let task = cfg.sensing.clone().unwrap_or_default();
    let sc = cfg.scenario();
    let cav = &task.cavity;
    let c = sc.coupling;
    let matched = find_matching_orientation(c.f_target, c.b_low, c.b_high, &sc.material)?;
    let nv = NVConfig::at_angle(matched.theta_nv, cav.b_bias, &sc.material)?;
    let trace = run_protocol(cav, &nv, &task.decoherence, &sc.material)?;
    let rows: Vec<Vec<f64>> = trace
        .tau_grid
        .iter()
        .zip(&trace.nv_population)
        .map(|(&t, &p)| vec![t, p])
        .collect();
    dir.write_csv("sensing_trace.csv", &["time_us", "signal"], &rows)?;
    let estimate = match estimate_concentration(&trace, cav, &sc.material) {
        Ok(n) => Some(n),
        Err(hybridsim::Error::InsufficientData(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let b = task.b_sweep.resolve("sensing.b_sweep")?;
    let response = drive_sweep(&b, cav, &sc.material)?;
    let rows: Vec<Vec<f64>> = b.iter().zip(&response).map(|(&bi, &r)| vec![bi, r]).collect();
    dir.write_csv("sensing_sweep.csv", &["b_drive_gauss", "nv_rabi_mhz"], &rows)?;
    let peak = argmax(&response).map(|i| b[i]);
    let step = if b.len() > 1 { b[1] - b[0] } else { 0.0 };
    let mut summary = json!({
        "target_rabi_mhz": target_rabi(cav),
        "f_cavity_mhz": cav.f_cavity,
        "applied_rabi_mhz": trace.applied_rabi,
        "inferred_rabi_mhz": trace.inferred_rabi,
        "n_targets": cav.n_targets,
        "n_targets_estimate": estimate,
        "peak_b_drive_gauss": peak,
        "matched_b_drive_gauss": 2.0 * cav.f_cavity / cav.gamma_target,
        "b_step_gauss": step,
    });
    if !task.species.is_empty() {
        let species: Vec<(f64, f64)> = task.species.iter().map(|s| (s.gamma, s.n_targets)).collect();
        let r = species_sweep(&b, &species, cav, &sc.material)?;
        let rows: Vec<Vec<f64>> = b.iter().zip(&r).map(|(&bi, &v)| vec![bi, v]).collect();
        dir.write_csv("sensing_species.csv", &["b_drive_gauss", "nv_rabi_mhz"], &rows)?;
        let peaks: Vec<f64> = (1..r.len().saturating_sub(1))
            .filter(|&i| r[i] > r[i - 1] && r[i] >= r[i + 1])
            .map(|i| b[i])
            .collect();
        let matched: Vec<f64> = species.iter().map(|&(g, _)| 2.0 * cav.f_cavity / g).collect();
        summary["species"] = json!({ "peaks_gauss": peaks, "matched_gauss": matched });
    }
    Ok(summary)
}

fn argmax(v: &[f64]) -> Option<usize> {
    (0..v.len()).max_by(|&i, &j| v[i].total_cmp(&v[j]))
}
