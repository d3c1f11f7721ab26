//! Runs the golden scenario suite and exits nonzero if any assertion fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hybridsim_cli::golden::{run_golden_suite, REPORT_NAME};

#[derive(Debug, Parser)]
#[command(name = "hybridsim-golden", version, about = "Run the golden scenario suite")]
struct Args {
    /// Directory receiving one subdirectory per case and the report.
    #[arg(long, value_name = "DIR", default_value = "golden-out")]
    out: PathBuf,
    /// Worker threads for grid sweeps.
    #[arg(long, value_name = "N", env = "HYBRIDSIM_THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("hybridsim-golden: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let report = match run_golden_suite(&args.out) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("hybridsim-golden: {e}");
            return e.exit_code();
        }
    };
    for case in &report.cases {
        println!("{} {}", if case.passed { "PASS" } else { "FAIL" }, case.name);
        if let Some(err) = &case.error {
            println!("    error: {err}");
        }
        for a in case.assertions.iter().filter(|a| !a.passed) {
            println!("    {}: {}", a.name, a.detail);
        }
    }
    println!("report: {}", args.out.join(REPORT_NAME).display());
    if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
