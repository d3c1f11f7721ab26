use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hybridsim_cli::config::{parse_config, ScenarioConfig, Task};
use hybridsim_cli::error::{CliError, CliResult};
use hybridsim_cli::runner::run_scenario;

#[derive(Debug, Parser)]
#[command(name = "hybridsim", version, about = "Spin-wave / NV-centre hybrid device simulator")]
struct Cli {
    /// JSON scenario file. Without one every parameter takes its default.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `output` in the config; default `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Ensemble seed (overrides `ensemble.seed`).
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads for grid sweeps.
    #[arg(long, global = true, value_name = "N", env = "HYBRIDSIM_THREADS")]
    threads: Option<usize>,
    /// Treat unknown config keys as errors instead of warnings.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Spin-wave dispersion, group velocity, decay length and mode ladder.
    Dispersion,
    /// Two-port transmission map versus field and frequency.
    Transmission,
    /// Ensemble ODMR contrast map versus field and frequency.
    OdmrMap,
    /// Rabi trace of the addressed transition, optionally versus power.
    Rabi,
    /// Hahn / CPMG echo decay or a custom pulse sequence.
    Sequence,
    /// Spin-wave over antenna drive ratio versus distance.
    Amplification,
    /// Cavity-mediated spin sensing protocol.
    Sensing,
    /// Parse and check the config without running anything.
    Validate,
}

impl Command {
    fn task(&self) -> Option<Task> {
        Some(match self {
            Command::Dispersion => Task::Dispersion,
            Command::Transmission => Task::Transmission,
            Command::OdmrMap => Task::OdmrMap,
            Command::Rabi => Task::Rabi,
            Command::Sequence => Task::Sequence,
            Command::Amplification => Task::Amplification,
            Command::Sensing => Task::Sensing,
            Command::Validate => return None,
        })
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Help and version requests are successes; usage errors are config errors.
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hybridsim: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;
    }
    let cfg = match &cli.config {
        Some(path) => {
            let (cfg, unknown) = parse_config(path, cli.strict)?;
            for key in unknown {
                eprintln!("warning: {}: {key}", path.display());
            }
            cfg
        }
        None => ScenarioConfig::default(),
    };
    let Some(task) = cli.command.task() else {
        let tasks: Vec<&str> = cfg.present_tasks().iter().map(|t| t.key()).collect();
        println!(
            "config ok{}",
            if tasks.is_empty() {
                String::new()
            } else {
                format!(" (task: {})", tasks.join(", "))
            }
        );
        return Ok(());
    };
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let manifest = run_scenario(&cfg, task, &out, cli.seed)?;
    println!(
        "{}: wrote {} files to {} in {:.3} s",
        task.key(),
        manifest.files.len() + 1,
        out.display(),
        manifest.timing.wall_seconds
    );
    Ok(())
}
