//! JSON scenario files.
//!
//! A file holds the shared physical blocks (material, geometry, field, ...)
//! and at most one task block named after the subcommand. Missing keys take
//! their defaults. Unknown keys are reported with their full path and the
//! closest valid key; `--strict` turns those reports into errors.

use std::path::Path;

use hybridsim::coupling::{Channel, CouplingSettings};
use hybridsim::dynamics::{DecoherenceParams, Element, RabiSettings};
use hybridsim::magnonics::SpectrumSettings;
use hybridsim::nv::OdmrSettings;
use hybridsim::scalar::{is_sorted_finite, linspace};
use hybridsim::scenario::EnsembleSettings;
use hybridsim::sensing::SensingConfig;
use hybridsim::{DriveF64, FieldF64, GeometryF64, ParamsF64, ScenarioF64};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Dispersion,
    Transmission,
    OdmrMap,
    Rabi,
    Sequence,
    Amplification,
    Sensing,
}

impl Task {
    pub const ALL: [Task; 7] = [
        Task::Dispersion,
        Task::Transmission,
        Task::OdmrMap,
        Task::Rabi,
        Task::Sequence,
        Task::Amplification,
        Task::Sensing,
    ];

    /// Key of the task block in the config file.
    pub fn key(self) -> &'static str {
        match self {
            Task::Dispersion => "dispersion",
            Task::Transmission => "transmission",
            Task::OdmrMap => "odmr_map",
            Task::Rabi => "rabi",
            Task::Sequence => "sequence",
            Task::Amplification => "amplification",
            Task::Sensing => "sensing",
        }
    }
}

/// Either `{"start", "stop", "points"}` or `{"values": [...]}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub points: Option<usize>,
    pub values: Option<Vec<f64>>,
}

impl GridSpec {
    pub fn linear(start: f64, stop: f64, points: usize) -> Self {
        Self {
            start: Some(start),
            stop: Some(stop),
            points: Some(points),
            values: None,
        }
    }

    pub fn list(values: Vec<f64>) -> Self {
        Self {
            values: Some(values),
            ..Default::default()
        }
    }

    pub fn resolve(&self, path: &str) -> CliResult<Vec<f64>> {
        let grid = match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => v.clone(),
            (None, Some(a), Some(b), Some(n)) => {
                if n == 0 {
                    return Err(CliError::Config(format!("{path}.points must be > 0")));
                }
                linspace(a, b, n)
            }
            _ => {
                return Err(CliError::Config(format!(
                    "{path} needs either `values` or all of `start`, `stop`, `points`"
                )))
            }
        };
        if grid.is_empty() || !is_sorted_finite(&grid) {
            return Err(CliError::Config(format!(
                "{path} must be non-empty, finite and sorted ascending"
            )));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DispersionTask {
    /// rad/um.
    pub k_grid: GridSpec,
}

impl Default for DispersionTask {
    fn default() -> Self {
        Self {
            k_grid: GridSpec::linear(0.01, 5.0, 500),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransmissionTask {
    /// G.
    pub b_grid: GridSpec,
    /// MHz.
    pub f_grid: GridSpec,
    /// Field of the subtracted reference row, G.
    pub reference_field: f64,
    /// Fraction of the row maximum that counts as transmitted. The default
    /// 0 takes every nonzero cell, which spans the whole ladder.
    pub support_threshold: f64,
}

impl Default for TransmissionTask {
    fn default() -> Self {
        Self {
            b_grid: GridSpec::linear(0.0, 250.0, 251),
            f_grid: GridSpec::linear(1000.0, 3500.0, 500),
            reference_field: 0.0,
            support_threshold: 0.0,
        }
    }
}

/// Power at which the map peak matches a reference map taken at another
/// field angle and power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EqualContrast {
    /// rad.
    pub reference_theta: f64,
    /// mW.
    pub reference_power: f64,
    /// Search bracket, mW.
    pub min_power: f64,
    pub max_power: f64,
}

impl Default for EqualContrast {
    fn default() -> Self {
        Self {
            reference_theta: 0.0,
            reference_power: 0.04,
            min_power: 0.04,
            max_power: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdmrMapTask {
    pub b_grid: GridSpec,
    pub f_grid: GridSpec,
    pub equal_contrast: Option<EqualContrast>,
}

impl Default for OdmrMapTask {
    fn default() -> Self {
        Self {
            b_grid: GridSpec::linear(0.0, 200.0, 41),
            f_grid: GridSpec::linear(2300.0, 3450.0, 576),
            equal_contrast: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RabiTask {
    pub channel: Channel,
    /// Drive frequency, MHz. Defaults to the common frequency of the matched
    /// orientation.
    pub frequency: Option<f64>,
    /// us.
    pub t_grid: GridSpec,
    /// Powers (mW) for a Rabi frequency versus sqrt(power) regression.
    pub powers: Option<Vec<f64>>,
}

impl Default for RabiTask {
    fn default() -> Self {
        Self {
            channel: Channel::SpinWave,
            frequency: None,
            t_grid: GridSpec::linear(0.0, 2.0, 801),
            powers: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    Hahn,
    Cpmg,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SequenceTask {
    pub kind: SequenceKind,
    /// Refocusing pulses for CPMG.
    pub n: usize,
    /// Total free time, us.
    pub t_grid: GridSpec,
    pub decoherence: DecoherenceParams<f64>,
    /// MHz.
    pub detuning: f64,
    /// Rabi frequency of the pulses, MHz. Ignored when `pulse_channel` is set.
    pub pulse_rabi: f64,
    /// Derive the pulse Rabi frequency from this drive channel instead.
    pub pulse_channel: Option<Channel>,
    /// Elements of a custom sequence.
    pub elements: Vec<Element<f64>>,
}

impl Default for SequenceTask {
    fn default() -> Self {
        Self {
            kind: SequenceKind::Hahn,
            n: 3,
            t_grid: GridSpec::linear(0.0, 6.0, 121),
            decoherence: DecoherenceParams::default(),
            detuning: 0.0,
            pulse_rabi: hybridsim::dynamics::DEFAULT_PULSE_RABI,
            pulse_channel: None,
            elements: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AmplificationTask {
    /// Distances from the antenna, um.
    pub x_grid: GridSpec,
    /// MHz. Defaults to the matched frequency.
    pub frequency: Option<f64>,
}

impl Default for AmplificationTask {
    fn default() -> Self {
        Self {
            x_grid: GridSpec::list(vec![20.0, 40.0, 60.0, 80.0, 120.0, 160.0, 200.0, 235.0]),
            frequency: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Species {
    /// MHz/G.
    pub gamma: f64,
    pub n_targets: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensingTask {
    pub cavity: SensingConfig<f64>,
    pub decoherence: DecoherenceParams<f64>,
    /// Drive fields at the targets, G.
    pub b_sweep: GridSpec,
    /// Extra species for a selectivity sweep; empty skips it.
    pub species: Vec<Species>,
}

impl Default for SensingTask {
    fn default() -> Self {
        Self {
            cavity: SensingConfig::default(),
            decoherence: DecoherenceParams::default(),
            b_sweep: GridSpec::linear(1900.0, 2200.0, 3001),
            species: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub material: ParamsF64,
    pub geometry: GeometryF64,
    pub field: FieldF64,
    pub drive: DriveF64,
    pub spectrum: SpectrumSettings<f64>,
    pub odmr: OdmrSettings<f64>,
    pub coupling: CouplingSettings<f64>,
    pub rabi_decay: RabiSettings<f64>,
    pub ensemble: EnsembleSettings,
    /// Output directory; `--out` takes precedence.
    pub output: Option<String>,
    pub dispersion: Option<DispersionTask>,
    pub transmission: Option<TransmissionTask>,
    pub odmr_map: Option<OdmrMapTask>,
    pub rabi: Option<RabiTask>,
    pub sequence: Option<SequenceTask>,
    pub amplification: Option<AmplificationTask>,
    pub sensing: Option<SensingTask>,
}

impl ScenarioConfig {
    pub fn scenario(&self) -> ScenarioF64 {
        ScenarioF64 {
            material: self.material,
            geometry: self.geometry,
            field: self.field,
            drive: self.drive,
            spectrum: self.spectrum,
            odmr: self.odmr,
            coupling: self.coupling,
            rabi_decay: self.rabi_decay,
            ensemble: self.ensemble,
        }
    }

    /// Task blocks present in the file.
    pub fn present_tasks(&self) -> Vec<Task> {
        Task::ALL
            .into_iter()
            .filter(|t| match t {
                Task::Dispersion => self.dispersion.is_some(),
                Task::Transmission => self.transmission.is_some(),
                Task::OdmrMap => self.odmr_map.is_some(),
                Task::Rabi => self.rabi.is_some(),
                Task::Sequence => self.sequence.is_some(),
                Task::Amplification => self.amplification.is_some(),
                Task::Sensing => self.sensing.is_some(),
            })
            .collect()
    }

    /// Makes sure the block for `task` exists, filling in defaults.
    pub fn select(&mut self, task: Task) -> CliResult<()> {
        let present = self.present_tasks();
        if let Some(other) = present.iter().find(|&&t| t != task) {
            return Err(CliError::Config(format!(
                "config contains a `{}` block but the `{}` task was requested; use one task block per file",
                other.key(),
                task.key()
            )));
        }
        match task {
            Task::Dispersion => {
                self.dispersion.get_or_insert_with(Default::default);
            }
            Task::Transmission => {
                self.transmission.get_or_insert_with(Default::default);
            }
            Task::OdmrMap => {
                self.odmr_map.get_or_insert_with(Default::default);
            }
            Task::Rabi => {
                self.rabi.get_or_insert_with(Default::default);
            }
            Task::Sequence => {
                self.sequence.get_or_insert_with(Default::default);
            }
            Task::Amplification => {
                self.amplification.get_or_insert_with(Default::default);
            }
            Task::Sensing => {
                self.sensing.get_or_insert_with(Default::default);
            }
        }
        Ok(())
    }

    /// Physical validation of every block that is present.
    pub fn validate(&self) -> CliResult<()> {
        let tasks = self.present_tasks();
        if tasks.len() > 1 {
            let keys: Vec<&str> = tasks.iter().map(|t| t.key()).collect();
            return Err(CliError::Config(format!(
                "config holds several task blocks ({}); use one per file",
                keys.join(", ")
            )));
        }
        self.scenario().validate().map_err(|e| config_error("", e))?;
        if let Some(t) = &self.dispersion {
            t.k_grid.resolve("dispersion.k_grid")?;
        }
        if let Some(t) = &self.transmission {
            t.b_grid.resolve("transmission.b_grid")?;
            t.f_grid.resolve("transmission.f_grid")?;
        }
        if let Some(t) = &self.odmr_map {
            t.b_grid.resolve("odmr_map.b_grid")?;
            t.f_grid.resolve("odmr_map.f_grid")?;
        }
        if let Some(t) = &self.rabi {
            t.t_grid.resolve("rabi.t_grid")?;
        }
        if let Some(t) = &self.sequence {
            t.t_grid.resolve("sequence.t_grid")?;
            t.decoherence
                .validate()
                .map_err(|e| config_error("sequence.decoherence: ", e))?;
        }
        if let Some(t) = &self.amplification {
            t.x_grid.resolve("amplification.x_grid")?;
        }
        if let Some(t) = &self.sensing {
            t.b_sweep.resolve("sensing.b_sweep")?;
            t.cavity.validate().map_err(|e| config_error("sensing.cavity: ", e))?;
        }
        Ok(())
    }

    /// Every block populated with defaults; the reference for key suggestions.
    fn schema() -> Value {
        let full = ScenarioConfig {
            dispersion: Some(Default::default()),
            transmission: Some(Default::default()),
            odmr_map: Some(OdmrMapTask {
                equal_contrast: Some(Default::default()),
                ..Default::default()
            }),
            rabi: Some(Default::default()),
            sequence: Some(Default::default()),
            amplification: Some(Default::default()),
            sensing: Some(SensingTask {
                species: vec![Species {
                    gamma: 0.0,
                    n_targets: 0.0,
                }],
                ..Default::default()
            }),
            ..Default::default()
        };
        serde_json::to_value(full).unwrap_or(Value::Null)
    }
}

/// An unknown key and the closest valid key at the same level, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct UnknownKey {
    pub path: String,
    pub suggestion: Option<String>,
}

impl std::fmt::Display for UnknownKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "unknown key `{}`", self.path)?;
        if let Some(s) = &self.suggestion {
            write!(f, " (did you mean `{s}`?)")?;
        }
        Ok(())
    }
}

/// Parses and validates a config. Unknown keys are returned, or rejected when
/// `strict` is set.
fn config_error(prefix: &str, e: hybridsim::Error) -> CliError {
    match e {
        hybridsim::Error::Configuration(msg) => CliError::Config(format!("{prefix}{msg}")),
        other => CliError::Config(format!("{prefix}{other}")),
    }
}

pub fn parse_config_str(text: &str, strict: bool) -> CliResult<(ScenarioConfig, Vec<UnknownKey>)> {
    let mut unknown = Vec::new();
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ScenarioConfig = serde_ignored::deserialize(de, |path| unknown.push(path.to_string())).map_err(|e| {
        // serde_json appends " at line L column C"; lead with it instead.
        let msg = e.to_string();
        let msg = msg.rsplit_once(" at line ").map_or(msg.as_str(), |(m, _)| m);
        CliError::Config(format!("line {}, column {}: {msg}", e.line(), e.column()))
    })?;
    let schema = ScenarioConfig::schema();
    let unknown: Vec<UnknownKey> = unknown.into_iter().map(|p| describe_unknown(&p, &schema)).collect();
    if strict && !unknown.is_empty() {
        let msgs: Vec<String> = unknown.iter().map(|u| u.to_string()).collect();
        return Err(CliError::Config(msgs.join("; ")));
    }
    cfg.validate()?;
    Ok((cfg, unknown))
}

pub fn parse_config(path: &Path, strict: bool) -> CliResult<(ScenarioConfig, Vec<UnknownKey>)> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, strict)
}

fn describe_unknown(path: &str, schema: &Value) -> UnknownKey {
    let parts: Vec<&str> = path.split('.').filter(|s| !s.is_empty() && *s != "?").collect();
    let Some((last, parents)) = parts.split_last() else {
        return UnknownKey {
            path: path.to_string(),
            suggestion: None,
        };
    };
    let mut node = schema;
    for p in parents {
        node = match node {
            Value::Object(m) => m.get(*p).unwrap_or(&Value::Null),
            Value::Array(a) => p.parse::<usize>().ok().and_then(|_| a.first()).unwrap_or(&Value::Null),
            _ => &Value::Null,
        };
        if let Value::Array(a) = node {
            node = a.first().unwrap_or(&Value::Null);
        }
    }
    let suggestion = match node {
        Value::Object(m) => m
            .keys()
            .map(|k| (strsim::jaro_winkler(last, k), k))
            .filter(|(score, _)| *score > 0.7)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, k)| {
                let mut full: Vec<&str> = parents.to_vec();
                full.push(k);
                full.join(".")
            }),
        _ => None,
    };
    UnknownKey {
        path: parts.join("."),
        suggestion,
    }
}
