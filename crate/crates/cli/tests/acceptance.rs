//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach stdout; exits nonzero on any FAIL.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hybridsim::coupling::{amplification, antenna_field, sw_drive_field, Channel};
use hybridsim::dynamics::reference::compare_random_drives;
use hybridsim::dynamics::{
    cpmg_trace, evolve_sequence, fit_envelope, fit_rabi_frequency, hahn_trace, power_scaling_check, rabi_frequency,
    rabi_trace, DecoherenceParams, PulseSequence,
};
use hybridsim::magnonics::{band_edges, desw_frequency, kittel, mode_ladder, TransmissionMap};
use hybridsim::nv::{equal_contrast_power, find_matching_orientation, odmr_map, transition_frequencies, NVConfig};
use hybridsim::params::{default_params, FieldConfig};
use hybridsim::scalar::linspace;
use hybridsim::sensing::{drive_sweep, estimate_concentration, run_protocol, SensingConfig};
use hybridsim::ScenarioF64;
use hybridsim_cli::golden::{GoldenReport, REPORT_NAME};
use hybridsim_cli::output::sha256_hex;
use hybridsim_cli::runner::{RunManifest, MANIFEST_NAME};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);
/// Files keyed by `case/name`.
type Files<T> = BTreeMap<String, T>;

fn ensure(ok: bool, msg: String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg)
    }
}

fn budget(start: Instant, limit: Duration, what: &str) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t <= limit, format!("{what} took {t:?}, budget {limit:?}"))
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn dispersion_limits() -> Outcome {
    let p = default_params::<f64>();
    let d = p.thickness;
    let mut worst = 0.0_f64;
    for b in [20.0, 145.0, 250.0, 1000.0] {
        let field = FieldConfig::new(b, 0.0).map_err(err)?;
        let low = desw_frequency(1e-12 / d, &field, &p).map_err(err)?;
        let high = desw_frequency(40.0 / d, &field, &p).map_err(err)?;
        let k0 = kittel(b, &p);
        let kinf = p.f_h(b) + p.f_m() / 2.0;
        worst = worst.max(((low - k0) / k0).abs()).max(((high - kinf) / kinf).abs());
    }
    ensure(worst < 1e-9, format!("worst relative deviation {worst:e}"))?;
    let field = FieldConfig::new(145.0, 0.0).map_err(err)?;
    let (lo, hi) = band_edges(&field, &p, 1e-12, 1e3).map_err(err)?;
    ensure(
        (lo - 1479.3).abs() < 0.05 && (hi - 2898.0).abs() < 0.05,
        format!("band at 145 G [{lo}, {hi}]"),
    )?;
    Ok(format!("worst rel {worst:.1e}; 145 G band [{lo:.2}, {hi:.2}] MHz"))
}

fn transmission_support() -> Outcome {
    let sc = ScenarioF64::default();
    let b = linspace::<f64>(0.0, 250.0, 251);
    let f = linspace::<f64>(1000.0, 3500.0, 500);
    let start = Instant::now();
    let map = TransmissionMap::compute(&b, &f, 0.0, &sc.geometry, &sc.material, &sc.spectrum, 0.0).map_err(err)?;
    budget(start, Duration::from_secs(10), "250 x 500 map")?;
    let elapsed = start.elapsed();
    let cell = f[1] - f[0];
    let k_max = sc.spectrum.k_max_for(&sc.geometry);
    let mut worst = 0.0_f64;
    for field in [50.0, 100.0, 150.0, 200.0, 250.0] {
        let i = b.iter().position(|&x| x == field).ok_or("field not on grid")?;
        let fc = sc.field.with_field(field);
        let (lo, hi) = band_edges(&fc, &sc.material, sc.spectrum.k_spacing, k_max).map_err(err)?;
        let (slo, shi) = map.support(i, 0.0).ok_or(format!("no transmission at {field} G"))?;
        worst = worst.max((slo - lo).abs()).max((shi - hi).abs());
    }
    ensure(
        worst <= cell,
        format!("support off the band by {worst} MHz, cell {cell}"),
    )?;
    ensure(
        map.s21[0].iter().all(|&v| v == 0.0),
        "zero-field row not identically 0".into(),
    )?;
    let empty = mode_ladder(&sc.field.with_field(0.0), &sc.material, &sc.geometry, &sc.spectrum).map_err(err)?;
    ensure(empty.is_empty(), "ladder at 0 G not empty".into())?;
    Ok(format!(
        "worst edge offset {worst:.2} MHz (cell {cell:.2}); map in {elapsed:.2?}"
    ))
}

fn odmr_regimes() -> Outcome {
    let mut sc = ScenarioF64::default();
    sc.geometry.nd_x = 40.0;
    sc.drive = sc.drive.with_power(0.04);
    let b = linspace::<f64>(0.0, 200.0, 41);
    let f = linspace::<f64>(2300.0, 3450.0, 576);
    let thr = sc.odmr.detection_threshold;
    let limit = Duration::from_secs(60);

    let start = Instant::now();
    let parallel = odmr_map(&b, &f, &sc).map_err(err)?;
    budget(start, limit, "theta = 0 map")?;
    let onset = parallel.onset(thr).ok_or("no contrast at theta = 0")?;
    ensure((45.0..=90.0).contains(&onset), format!("onset {onset} G"))?;
    for (i, &bi) in b.iter().enumerate() {
        let visible = parallel.row_max(i) > thr;
        ensure(
            visible == (bi >= onset),
            format!("row at {bi} G visible = {visible}, onset {onset}"),
        )?;
    }

    let mut reversed = sc.clone();
    reversed.field.theta = std::f64::consts::PI;
    let start = Instant::now();
    let p = equal_contrast_power(parallel.peak(), &b, &f, &reversed, 0.04, 1000.0).map_err(err)?;
    budget(start, limit * 4, "equal-contrast search")?;
    let ratio = p / 0.04;
    ensure(ratio >= 100.0, format!("theta = pi power ratio {ratio}"))?;

    let mut perp = sc.clone();
    perp.field.theta = std::f64::consts::FRAC_PI_2;
    let start = Instant::now();
    let side = odmr_map(&b, &f, &perp).map_err(err)?;
    budget(start, limit, "theta = pi/2 map")?;
    let (a, c) = (side.integrated(), parallel.integrated());
    ensure(a < c, format!("integrated contrast pi/2 {a} vs 0 {c}"))?;
    Ok(format!(
        "onset {onset} G; power ratio {ratio:.0}; integrated pi/2 {a:.3} vs 0 {c:.1}"
    ))
}

fn matched_rabi() -> Outcome {
    let sc = ScenarioF64::default();
    let p = sc.material;
    let m = find_matching_orientation(2862.0, 15.0, 145.0, &p).map_err(err)?;
    let deg = m.theta_nv.to_degrees();
    ensure(deg > 75.0 && deg < 90.0, format!("theta_nv {deg} deg"))?;
    ensure(
        (m.frequency - 2862.0).abs() < 5.0,
        format!("common frequency {} MHz", m.frequency),
    )?;

    let drive = sc.drive.with_frequency(m.frequency).with_power(1e-3);
    let high = FieldConfig::new(145.0, 0.0).map_err(err)?;
    let kappa = sc.kappa_sw().map_err(err)?;
    let amp = sw_drive_field(&drive, &sc.geometry, &high, &p, &sc.spectrum, kappa)
        .map_err(err)?
        .amplitude;
    let omega = rabi_frequency(amp, &p).map_err(err)?;
    let nv = NVConfig::at_angle(m.theta_nv, 145.0, &p).map_err(err)?;
    let detuning = m.frequency - transition_frequencies(&nv).0;
    let decay = sc.rabi_decay.decay_time(1e-3);
    let dec = DecoherenceParams::new(1.0, 1.0, Some(decay)).map_err(err)?;
    let t = linspace::<f64>(0.0, 2.0, 801);
    let trace = rabi_trace(omega, detuning, &t, &dec).map_err(err)?;
    let fit = fit_rabi_frequency(&t, &trace, Some(decay)).map_err(err)?;
    let dip = trace.iter().cloned().fold(1.0, f64::min);
    ensure(
        sc.rabi_decay.is_visible(omega, 1e-3) && dip < 0.5 && (fit.rabi_frequency - omega).abs() < 0.01 * omega,
        format!(
            "spin-wave Rabi {omega} MHz, fit {}, min population {dip}",
            fit.rabi_frequency
        ),
    )?;

    let antenna = antenna_field(&drive, &sc.geometry).map_err(err)?;
    let weak = rabi_frequency(antenna, &p).map_err(err)?;
    ensure(
        !sc.rabi_decay.is_visible(weak, 1e-3),
        format!("antenna Rabi {weak} MHz is visible"),
    )?;
    Ok(format!(
        "theta_nv {deg:.2} deg at {:.3} MHz; spin-wave {omega:.3} MHz visible, antenna {weak:.4} MHz not",
        m.frequency
    ))
}

fn amplification_profile() -> Outcome {
    let sc = ScenarioF64::default();
    let c = sc.coupling;
    let m = find_matching_orientation(c.f_target, c.b_low, c.b_high, &sc.material).map_err(err)?;
    let a = |x: f64| amplification(x, c.b_low, c.b_high, m.frequency, &sc).map_err(err);
    let (a20, a80, a235) = (a(20.0)?, a(80.0)?, a(235.0)?);
    ensure(((a20 - 100.0) / 100.0).abs() < 1e-9, format!("A(20 um) = {a20}"))?;
    let ratio = a80 / a20;
    ensure((3.0..=4.5).contains(&ratio), format!("A(80)/A(20) = {ratio}"))?;
    let drive = sc.drive.with_frequency(m.frequency);
    let high = sc.field.with_field(c.b_high);
    let kappa = sc.kappa_sw().map_err(err)?;
    let mode = sw_drive_field(
        &drive,
        &sc.geometry.at_distance(20.0),
        &high,
        &sc.material,
        &sc.spectrum,
        kappa,
    )
    .map_err(err)?
    .contributing_mode
    .ok_or("no spin-wave mode at the matched frequency")?;
    let l = mode.decay_length;
    let predicted = a20 * (235.0 / 20.0) * (-(235.0 - 20.0) / l).exp();
    let dev = (a235 - predicted).abs() / predicted;
    ensure(dev < 0.10, format!("A(235) = {a235}, predicted {predicted}"))?;
    Ok(format!(
        "A(80)/A(20) = {ratio:.3}; A(235) = {a235:.1} vs {predicted:.1} (L = {l:.0} um)"
    ))
}

fn power_scaling() -> Outcome {
    let mut sc = ScenarioF64::default();
    let m = find_matching_orientation(2862.0, 15.0, 145.0, &sc.material).map_err(err)?;
    sc.drive = sc.drive.with_frequency(m.frequency);
    let powers = [1e-3, 1e-2, 1e-1, 1.0];
    let s = power_scaling_check(&powers, &sc, Channel::SpinWave).map_err(err)?;
    let max = s.rabi.iter().cloned().fold(0.0, f64::max);
    ensure(s.r_squared > 0.999, format!("R^2 {}", s.r_squared))?;
    ensure(
        s.intercept.abs() < 1e-3 * max,
        format!("intercept {} MHz, max {max}", s.intercept),
    )?;
    Ok(format!(
        "R^2 = {:.12}; intercept {:.1e} MHz of max {max:.2}",
        s.r_squared, s.intercept
    ))
}

fn echo_round_trip() -> Outcome {
    let t: Vec<f64> = linspace::<f64>(0.0, 6.0, 121).into_iter().skip(1).collect();
    let mut parts = Vec::new();
    for (t2, alpha, cpmg) in [(1.54_f64, 1.0_f64, false), (2.78, 2.0, true)] {
        let dec = DecoherenceParams::new(t2, alpha, None).map_err(err)?;
        let s = if cpmg {
            cpmg_trace(3, &t, &dec)
        } else {
            hahn_trace(&t, &dec)
        }
        .map_err(err)?;
        let fit = fit_envelope(&t, &s).map_err(err)?;
        let (et, ea) = ((fit.t2 - t2).abs() / t2, (fit.alpha - alpha).abs() / alpha);
        ensure(
            et < 5e-3 && ea < 5e-3,
            format!("fit ({}, {}) vs ({t2}, {alpha})", fit.t2, fit.alpha),
        )?;
        let seq = PulseSequence::hahn(10.0, t2).map_err(err)?;
        let echo = evolve_sequence(&seq, 0.0, Some(&dec)).map_err(err)?.bloch.z.abs();
        let dev = (echo - (-1.0f64).exp()).abs();
        ensure(dev < 1e-6, format!("echo at T2 = {echo}"))?;
        parts.push(format!("({:.4}, {:.4})", fit.t2, fit.alpha));
    }
    Ok(format!("fits {}; echo at T2 = 1/e", parts.join(" ")))
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let c = compare_random_drives(100, 31, 0.01).map_err(err)?;
    budget(start, Duration::from_secs(30), "oracle comparison")?;
    ensure(
        c.worst_two_level < 1e-6,
        format!("worst population error {:e}", c.worst_two_level),
    )?;
    Ok(format!(
        "{} configs, worst {:.1e} in {:.2?}",
        c.configs,
        c.worst_two_level,
        start.elapsed()
    ))
}

fn sensing_protocol() -> Outcome {
    let p = default_params::<f64>();
    let cfg = SensingConfig::<f64>::default();
    let m = find_matching_orientation(2862.0, 15.0, 145.0, &p).map_err(err)?;
    let nv = NVConfig::at_angle(m.theta_nv, cfg.b_bias, &p).map_err(err)?;
    let b = linspace::<f64>(1900.0, 2200.0, 3001);
    let r = drive_sweep(&b, &cfg, &p).map_err(err)?;
    let i = (0..r.len())
        .max_by(|&i, &j| r[i].total_cmp(&r[j]))
        .ok_or("empty sweep")?;
    let matched = 2.0 * cfg.f_cavity / cfg.gamma_target;
    let step = b[1] - b[0];
    ensure(
        (b[i] - matched).abs() <= step,
        format!("peak {} G, matching {matched} G", b[i]),
    )?;
    let dec = DecoherenceParams::default();
    let trace = run_protocol(&cfg, &nv, &dec, &p).map_err(err)?;
    let n = estimate_concentration(&trace, &cfg, &p).map_err(err)?;
    let dev = (n - cfg.n_targets).abs() / cfg.n_targets;
    ensure(dev < 0.02, format!("estimate {n} for {}", cfg.n_targets))?;
    Ok(format!(
        "peak {:.1} G vs {matched:.2} G; estimate {n:.4} of {}",
        b[i], cfg.n_targets
    ))
}

/// CSV files and manifest digests of one golden run, keyed by relative path.
fn golden_run(dir: &Path, threads: usize) -> Result<(Files<Vec<u8>>, Files<String>), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_hybridsim-golden"))
        .arg("--out")
        .arg(dir)
        .arg("--threads")
        .arg(threads.to_string())
        .output()
        .map_err(err)?;
    let report: GoldenReport =
        serde_json::from_slice(&std::fs::read(dir.join(REPORT_NAME)).map_err(err)?).map_err(err)?;
    ensure(
        status.status.success() && report.passed,
        format!("golden suite failed with {threads} threads"),
    )?;
    let mut csvs = BTreeMap::new();
    let mut digests = BTreeMap::new();
    for case in &report.cases {
        let case_dir = dir.join(&case.name);
        let manifest: RunManifest =
            serde_json::from_slice(&std::fs::read(case_dir.join(MANIFEST_NAME)).map_err(err)?).map_err(err)?;
        for f in &manifest.files {
            let bytes = std::fs::read(case_dir.join(&f.name)).map_err(err)?;
            ensure(
                sha256_hex(&bytes) == f.sha256,
                format!("{}/{} digest mismatch", case.name, f.name),
            )?;
            let key = format!("{}/{}", case.name, f.name);
            digests.insert(key.clone(), f.sha256.clone());
            if f.name.ends_with(".csv") {
                csvs.insert(key, bytes);
            }
        }
    }
    Ok((csvs, digests))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(err)?;
    let (csv_a, dig_a) = golden_run(&tmp.path().join("one"), 1)?;
    let (csv_b, dig_b) = golden_run(&tmp.path().join("four"), 4)?;
    ensure(!csv_a.is_empty(), "golden suite emitted no CSVs".into())?;
    ensure(csv_a.keys().eq(csv_b.keys()), "runs emitted different file sets".into())?;
    for (name, bytes) in &csv_a {
        ensure(csv_b[name] == *bytes, format!("{name} differs between 1 and 4 threads"))?;
    }
    ensure(dig_a == dig_b, "manifest digests differ".into())?;
    Ok(format!(
        "{} CSVs, {} digests identical at 1 and 4 threads",
        csv_a.len(),
        dig_a.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("dispersion limits", dispersion_limits),
        ("transmission support", transmission_support),
        ("ODMR field-angle regimes", odmr_regimes),
        ("matched orientation and Rabi visibility", matched_rabi),
        ("amplification versus distance", amplification_profile),
        ("Rabi frequency versus sqrt(power)", power_scaling),
        ("echo envelope round trip", echo_round_trip),
        ("two-level versus three-level dynamics", oracle_equivalence),
        ("sensing protocol", sensing_protocol),
        ("golden suite determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let t = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{t:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{t:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
