use std::fs::File;
use std::io::{self, Write};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use compdec::runner::{exit_code, run, RunOptions, EXIT_INVALID};
use compdec::scenario::{load_scenario, Command, VociMode, BUILTINS};
use compdec::speedup::SpeedupFunction;

/// Environment variable holding the worker thread count.
const THREADS_VAR: &str = "COMPDEC_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "compdec",
    version,
    about = "Exact decision analysis with costly computation",
    after_help = "Scenarios are builtin names, optionally with parameters \
                  (safe:B=12,K=6), or paths to TOML scenario files.\n\
                  Exit status: 0 success, 1 invalid input, 2 failed check.\n\
                  COMPDEC_THREADS sets the number of worker threads."
)]
struct Cli {
    /// eval, best, voi, voci, voc, speedup, bias or zk-check; `run` uses
    /// the scenario's own analysis.
    command: String,
    /// Builtin name or scenario file.
    scenario: Option<String>,
    /// Which voci to report: post, pre or both.
    #[arg(long)]
    mode: Option<String>,
    /// Speedup function: identity, 2x, linear:a,b, poly:c0,c1,.. or table:v0,v1,..
    #[arg(long)]
    p: Option<String>,
    /// Also write the report as CSV to this path.
    #[arg(long)]
    csv: Option<std::path::PathBuf>,
    /// Evaluate only this machine (eval).
    #[arg(long)]
    machine: Option<String>,
    /// Estimate conversations from this many sampled tapes per support point.
    #[arg(long)]
    samples: Option<usize>,
    /// Seed for sampled evaluation.
    #[arg(long)]
    seed: Option<u64>,
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, not `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn execute(cli: Cli) -> Result<i32, String> {
    configure_threads()?;
    let command: Option<Command> = match cli.command.as_str() {
        "run" => None,
        other => Some(other.parse().map_err(|e: compdec::Error| e.to_string())?),
    };
    let Some(source) = cli.scenario else {
        return Err(format!(
            "no scenario given; builtins are {}",
            BUILTINS.join(", ")
        ));
    };
    let scenario = load_scenario(&source).map_err(|e| e.to_string())?;
    let command = command.unwrap_or(scenario.default_command);
    let opts = RunOptions {
        mode: cli
            .mode
            .map(|m| m.parse::<VociMode>())
            .transpose()
            .map_err(|e| e.to_string())?,
        p: cli
            .p
            .map(|p| p.parse::<SpeedupFunction>())
            .transpose()
            .map_err(|e| e.to_string())?,
        machine: cli.machine,
        samples: cli.samples,
        seed: cli.seed,
    };
    let result = run(command, &scenario, &opts);
    let code = exit_code(&result);
    let report = result.map_err(|e| e.to_string())?;
    let mut stdout = io::stdout().lock();
    stdout
        .write_all(report.render().as_bytes())
        .map_err(|e| e.to_string())?;
    if let Some(path) = cli.csv {
        let file = File::create(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        report.write_csv(file).map_err(|e| e.to_string())?;
    }
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_INVALID as u8),
            };
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_INVALID as u8)
        }
    }
}
