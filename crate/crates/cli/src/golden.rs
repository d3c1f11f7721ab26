//! Curated scenarios with tolerance-based assertions on their outputs.
//!
//! Each case runs through the same path as the CLI (`run_scenario`) into its
//! own subdirectory. Assertions read the emitted CSVs and `summary.json`, so
//! a regression shows up as a concrete number outside a stated band.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::{parse_config_str, Task};
use crate::error::{CliError, CliResult};
use crate::output::FileRecord;
use crate::runner::{run_scenario, RunManifest};

pub const REPORT_NAME: &str = "golden_report.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    /// Observed value and accepted band.
    pub detail: String,
}

impl Assertion {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    fn within(name: &str, actual: Option<f64>, lo: f64, hi: f64) -> Self {
        match actual {
            Some(v) => Self::new(name, v >= lo && v <= hi, format!("{v} in [{lo}, {hi}]")),
            None => Self::new(name, false, "value missing"),
        }
    }

    fn near(name: &str, actual: Option<f64>, target: f64, tol: f64) -> Self {
        match actual {
            Some(v) => Self::new(name, (v - target).abs() <= tol, format!("{v} vs {target} +- {tol}")),
            None => Self::new(name, false, "value missing"),
        }
    }

    fn rel(name: &str, actual: Option<f64>, target: f64, rel: f64) -> Self {
        Self::near(name, actual, target, rel * target.abs())
    }
}

/// Outputs of a finished case.
#[derive(Debug, Clone)]
pub struct CaseOutput {
    pub dir: PathBuf,
    pub manifest: RunManifest,
}

impl CaseOutput {
    /// Number at a JSON pointer into the summary, e.g. `/equal_contrast/power_ratio`.
    pub fn num(&self, pointer: &str) -> Option<f64> {
        self.manifest.summary.pointer(pointer).and_then(Value::as_f64)
    }

    pub fn value(&self, pointer: &str) -> Option<&Value> {
        self.manifest.summary.pointer(pointer)
    }

    /// Columns of an emitted CSV keyed by header.
    pub fn csv(&self, name: &str) -> CliResult<BTreeMap<String, Vec<f64>>> {
        read_csv(&self.dir.join(name))
    }
}

pub fn read_csv(path: &Path) -> CliResult<BTreeMap<String, Vec<f64>>> {
    let err = |e: csv::Error| CliError::Runtime(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(err)?;
    let headers: Vec<String> = r.headers().map_err(err)?.iter().map(String::from).collect();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); headers.len()];
    for rec in r.records() {
        let rec = rec.map_err(err)?;
        for (col, field) in cols.iter_mut().zip(rec.iter()) {
            col.push(
                field
                    .parse()
                    .map_err(|_| CliError::Runtime(format!("{}: bad number `{field}`", path.display())))?,
            );
        }
    }
    Ok(headers.into_iter().zip(cols).collect())
}

type Check = fn(&CaseOutput, &BTreeMap<String, CaseOutput>) -> CliResult<Vec<Assertion>>;

pub struct GoldenCase {
    pub name: &'static str,
    pub task: Task,
    /// Scenario file contents.
    pub config: &'static str,
    check: Check,
}

/// All cases, in run order. Later cases may compare against earlier ones.
pub fn cases() -> Vec<GoldenCase> {
    vec![
        GoldenCase {
            name: "desw_spectrum",
            task: Task::Dispersion,
            config: include_str!("../scenarios/desw_spectrum.json"),
            check: check_spectrum,
        },
        GoldenCase {
            name: "transmission_map",
            task: Task::Transmission,
            config: include_str!("../scenarios/transmission_map.json"),
            check: check_transmission,
        },
        GoldenCase {
            name: "odmr_parallel",
            task: Task::OdmrMap,
            config: include_str!("../scenarios/odmr_parallel.json"),
            check: check_odmr_parallel,
        },
        GoldenCase {
            name: "odmr_reversed",
            task: Task::OdmrMap,
            config: include_str!("../scenarios/odmr_reversed.json"),
            check: check_odmr_reversed,
        },
        GoldenCase {
            name: "odmr_perpendicular",
            task: Task::OdmrMap,
            config: include_str!("../scenarios/odmr_perpendicular.json"),
            check: check_odmr_perpendicular,
        },
        GoldenCase {
            name: "rabi_spin_wave",
            task: Task::Rabi,
            config: include_str!("../scenarios/rabi_spin_wave.json"),
            check: check_rabi_spin_wave,
        },
        GoldenCase {
            name: "rabi_antenna",
            task: Task::Rabi,
            config: include_str!("../scenarios/rabi_antenna.json"),
            check: check_rabi_antenna,
        },
        GoldenCase {
            name: "amplification",
            task: Task::Amplification,
            config: include_str!("../scenarios/amplification.json"),
            check: check_amplification,
        },
        GoldenCase {
            name: "power_scaling",
            task: Task::Rabi,
            config: include_str!("../scenarios/power_scaling.json"),
            check: check_power_scaling,
        },
        GoldenCase {
            name: "echo_hahn",
            task: Task::Sequence,
            config: include_str!("../scenarios/echo_hahn.json"),
            check: |o, _| Ok(check_echo(o, 1.54, 1.0)),
        },
        GoldenCase {
            name: "echo_cpmg3",
            task: Task::Sequence,
            config: include_str!("../scenarios/echo_cpmg3.json"),
            check: |o, _| Ok(check_echo(o, 2.78, 2.0)),
        },
        GoldenCase {
            name: "sensing",
            task: Task::Sensing,
            config: include_str!("../scenarios/sensing.json"),
            check: check_sensing,
        },
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub name: String,
    pub task: Task,
    pub passed: bool,
    pub error: Option<String>,
    pub assertions: Vec<Assertion>,
    pub files: Vec<FileRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenReport {
    pub passed: bool,
    pub cases: Vec<CaseReport>,
}

/// Runs every case under `out/<name>` and writes `out/golden_report.json`.
pub fn run_golden_suite(out: &Path) -> CliResult<GoldenReport> {
    let mut done: BTreeMap<String, CaseOutput> = BTreeMap::new();
    let mut reports = Vec::new();
    for case in cases() {
        let dir = out.join(case.name);
        let outcome = parse_config_str(case.config, true)
            .and_then(|(cfg, _)| run_scenario(&cfg, case.task, &dir, None))
            .and_then(|manifest| {
                let output = CaseOutput { dir, manifest };
                let assertions = (case.check)(&output, &done)?;
                Ok((output, assertions))
            });
        let report = match outcome {
            Ok((output, assertions)) => {
                let r = CaseReport {
                    name: case.name.into(),
                    task: case.task,
                    passed: assertions.iter().all(|a| a.passed),
                    error: None,
                    assertions,
                    files: output.manifest.files.clone(),
                };
                done.insert(case.name.into(), output);
                r
            }
            Err(e) => CaseReport {
                name: case.name.into(),
                task: case.task,
                passed: false,
                error: Some(e.to_string()),
                assertions: Vec::new(),
                files: Vec::new(),
            },
        };
        reports.push(report);
    }
    let report = GoldenReport {
        passed: reports.iter().all(|r| r.passed),
        cases: reports,
    };
    let mut bytes = serde_json::to_vec_pretty(&report).map_err(|e| CliError::Runtime(e.to_string()))?;
    bytes.push(b'\n');
    fs::write(out.join(REPORT_NAME), bytes)?;
    Ok(report)
}

fn check_spectrum(o: &CaseOutput, _: &BTreeMap<String, CaseOutput>) -> CliResult<Vec<Assertion>> {
    let t = o.csv("disp_desw.csv")?;
    let f = &t["frequency_mhz"];
    let monotone = f.windows(2).all(|w| w[1] > w[0]);
    Ok(vec![
        Assertion::near("band low edge (k -> 0), MHz", o.num("/band_min_mhz"), 1479.3, 1.0),
        Assertion::near("band high edge (k -> inf), MHz", o.num("/band_max_mhz"), 2898.0, 1.0),
        Assertion::new("frequency rises with k", monotone, format!("{} rows", f.len())),
        Assertion::new(
            "group velocity positive",
            t["group_velocity_m_per_s"].iter().all(|&v| v > 0.0),
            "surface branch is forward",
        ),
    ])
}

fn check_transmission(o: &CaseOutput, _: &BTreeMap<String, CaseOutput>) -> CliResult<Vec<Assertion>> {
    let cell = o.num("/f_cell_mhz").unwrap_or(0.0);
    let support = o.csv("transmission_support.csv")?;
    let mut out = Vec::new();
    for b in [50.0, 100.0, 150.0, 200.0, 250.0] {
        let Some(i) = support["b_gauss"].iter().position(|&x| x == b) else {
            out.push(Assertion::new(format!("support at {b} G"), false, "field not on grid"));
            continue;
        };
        let (slo, shi) = (support["support_low_mhz"][i], support["support_high_mhz"][i]);
        let (blo, bhi) = (support["band_low_mhz"][i], support["band_high_mhz"][i]);
        let ok = (slo - blo).abs() <= cell && (shi - bhi).abs() <= cell;
        out.push(Assertion::new(
            format!("support at {b} G matches ladder band within one cell"),
            ok,
            format!("support [{slo}, {shi}] band [{blo}, {bhi}] cell {cell}"),
        ));
    }
    let map = o.csv("transmission.csv")?;
    let zero_row = map["b_gauss"]
        .iter()
        .zip(&map["s21"])
        .filter(|(&b, _)| b == 0.0)
        .all(|(_, &s)| s == 0.0);
    out.push(Assertion::new(
        "zero-field row identically 0",
        zero_row,
        "after reference subtraction",
    ));
    Ok(out)
}

fn check_odmr_parallel(o: &CaseOutput, _: &BTreeMap<String, CaseOutput>) -> CliResult<Vec<Assertion>> {
    let threshold = o.num("/detection_threshold").unwrap_or(0.0);
    Ok(vec![
        Assertion::within("onset field, G", o.num("/onset_gauss"), 45.0, 90.0),
        Assertion::within(
            "max contrast below onset",
            o.num("/max_contrast_below_onset"),
            0.0,
            threshold,
        ),
        Assertion::within("peak contrast", o.num("/peak_contrast"), threshold, 1.0),
    ])
}

fn check_odmr_reversed(o: &CaseOutput, _: &BTreeMap<String, CaseOutput>) -> CliResult<Vec<Assertion>> {
    Ok(vec![Assertion::within(
        "power ratio for equal peak contrast",
        o.num("/equal_contrast/power_ratio"),
        100.0,
        f64::INFINITY,
    )])
}

fn check_odmr_perpendicular(o: &CaseOutput, done: &BTreeMap<String, CaseOutput>) -> CliResult<Vec<Assertion>> {
    let Some(parallel) = done.get("odmr_parallel") else {
        return Ok(vec![Assertion::new(
            "parallel reference",
            false,
            "odmr_parallel did not run",
        )]);
    };
    let same_power = o.num("/power_mw") == parallel.num("/power_mw");
    let (perp, par) = (o.num("/integrated_contrast"), parallel.num("/integrated_contrast"));
    Ok(vec![
        Assertion::new("equal drive power", same_power, format!("{:?}", o.num("/power_mw"))),
        Assertion::new(
            "integrated contrast below the parallel case",
            matches!((perp, par), (Some(a), Some(b)) if a < b),
            format!("{perp:?} vs {par:?}"),
        ),
    ])
}

fn check_rabi_spin_wave(o: &CaseOutput, _: &BTreeMap<String, CaseOutput>) -> CliResult<Vec<Assertion>> {
    let theta = o.num("/theta_nv_deg");
    let model = o.num("/rabi_mhz").unwrap_or(f64::NAN);
    Ok(vec![
        Assertion::new(
            "matched NV angle, deg",
            theta.is_some_and(|t| t > 75.0 && t < 90.0),
            format!("{theta:?} in (75, 90)"),
        ),
        Assertion::near(
            "common lower-branch frequency, MHz",
            o.num("/frequency_mhz"),
            2862.0,
            5.0,
        ),
        Assertion::new(
            "oscillation visible",
            o.value("/visible") == Some(&Value::Bool(true)),
            format!("{model} MHz"),
        ),
        Assertion::rel("fitted Rabi frequency, MHz", o.num("/fitted_rabi_mhz"), model, 0.01),
    ])
}

fn check_rabi_antenna(o: &CaseOutput, _: &BTreeMap<String, CaseOutput>) -> CliResult<Vec<Assertion>> {
    Ok(vec![Assertion::new(
        "oscillation below visibility",
        o.value("/visible") == Some(&Value::Bool(false)),
        format!("{:?} MHz", o.num("/rabi_mhz")),
    )])
}

fn check_amplification(o: &CaseOutput, _: &BTreeMap<String, CaseOutput>) -> CliResult<Vec<Assertion>> {
    let t = o.csv("amplification.csv")?;
    let at = |x: f64| t["x_um"].iter().position(|&v| v == x).map(|i| t["amplification"][i]);
    let pred = t["x_um"]
        .iter()
        .position(|&v| v == 235.0)
        .map(|i| t["inverse_distance_prediction"][i]);
    let ratio = at(80.0).zip(at(20.0)).map(|(a, b)| a / b);
    Ok(vec![
        Assertion::rel("amplification at 20 um", at(20.0), 100.0, 1e-9),
        Assertion::within("amplification ratio 80 / 20 um", ratio, 3.0, 4.5),
        match pred {
            Some(p) => Assertion::rel("amplification at 235 um vs 1/r decay prediction", at(235.0), p, 0.10),
            None => Assertion::new("amplification at 235 um", false, "distance not on grid"),
        },
    ])
}

fn check_power_scaling(o: &CaseOutput, _: &BTreeMap<String, CaseOutput>) -> CliResult<Vec<Assertion>> {
    let t = o.csv("power_scaling.csv")?;
    let p = &t["power_mw"];
    let span = p.iter().cloned().fold(0.0, f64::max) / p.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = o.num("/power_scaling/max_rabi_mhz").unwrap_or(0.0);
    Ok(vec![
        Assertion::new(
            "at least 4 powers over 3 decades",
            p.len() >= 4 && span >= 1e3 * (1.0 - 1e-12),
            format!("{} powers, span {span}", p.len()),
        ),
        Assertion::within("r squared", o.num("/power_scaling/r_squared"), 0.999, 1.0),
        Assertion::near("intercept, MHz", o.num("/power_scaling/intercept_mhz"), 0.0, 1e-3 * max),
    ])
}

fn check_echo(o: &CaseOutput, t2: f64, alpha: f64) -> Vec<Assertion> {
    vec![
        Assertion::rel("fitted T2, us", o.num("/t2_us"), t2, 0.005),
        Assertion::rel("fitted stretch exponent", o.num("/alpha"), alpha, 0.005),
        Assertion::near("echo at T2", o.num("/echo_at_t2"), (-1.0f64).exp(), 1e-6),
    ]
}

fn check_sensing(o: &CaseOutput, _: &BTreeMap<String, CaseOutput>) -> CliResult<Vec<Assertion>> {
    let step = o.num("/b_step_gauss").unwrap_or(0.0);
    let matched = o.num("/matched_b_drive_gauss").unwrap_or(f64::NAN);
    let n = o.num("/n_targets").unwrap_or(f64::NAN);
    let mut out = vec![
        Assertion::near("response peak, G", o.num("/peak_b_drive_gauss"), matched, step),
        Assertion::rel("estimated target count", o.num("/n_targets_estimate"), n, 0.02),
    ];
    if let (Some(Value::Array(peaks)), Some(Value::Array(expected))) =
        (o.value("/species/peaks_gauss"), o.value("/species/matched_gauss"))
    {
        let peaks: Vec<f64> = peaks.iter().filter_map(Value::as_f64).collect();
        for e in expected.iter().filter_map(Value::as_f64) {
            out.push(Assertion::new(
                format!("species peak near {e:.2} G"),
                peaks.iter().any(|&p| (p - e).abs() <= step),
                format!("peaks {peaks:?}"),
            ));
        }
    }
    Ok(out)
}
