use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use powershape_cli::config::ScenarioConfig;
use powershape_cli::output::{output_dir, summary_text, write_run};
use powershape_cli::pattern::expand;
use powershape_cli::scenario;
use rayon::prelude::*;

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_MONITOR: u8 = 2;

/// Run transmission-line power-shaping scenarios and check their monitors.
///
/// Output goes to `output` from the config, or to
/// `$POWERSHAPE_OUTPUT_ROOT/<name>` (default root `powershape-out`).
#[derive(Parser)]
#[command(name = "powershape", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { config: PathBuf },
    /// Run every scenario matching a pattern such as `configs/*.cfg`, in parallel.
    Sweep { pattern: String },
    /// Validate a scenario file without running it.
    Check { config: PathBuf },
}

struct Status {
    code: u8,
    line: String,
    summary: String,
}

fn failure(path: &Path, msg: String) -> Status {
    Status { code: EXIT_USAGE, line: format!("{}: error: {msg}", path.display()), summary: String::new() }
}

/// Run one config and write its outputs.
fn run_one(path: &Path) -> Status {
    let cfg = match ScenarioConfig::from_file(path) {
        Ok(c) => c,
        Err(e) => return failure(path, e.to_string()),
    };
    let out = match scenario::run(&cfg) {
        Ok(o) => o,
        Err(e) => return failure(path, e.to_string()),
    };
    let dir = output_dir(&cfg);
    if let Err(e) = write_run(&dir, &out) {
        return failure(path, format!("cannot write {}: {e}", dir.display()));
    }
    let failed: Vec<&str> = out.checks.iter().filter(|(_, ok)| !ok).map(|(n, _)| n.as_str()).collect();
    let (code, verdict) = if failed.is_empty() {
        (EXIT_OK, "pass".to_string())
    } else {
        (EXIT_MONITOR, format!("FAIL {}", failed.join(", ")))
    };
    Status {
        code,
        line: format!("{}: {verdict} ({})", path.display(), dir.display()),
        summary: summary_text(&out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Check { config } => match ScenarioConfig::from_file(&config) {
            Ok(cfg) => {
                println!("{}: ok ({}, output {})", config.display(), cfg.scenario.name(), output_dir(&cfg).display());
                ExitCode::from(EXIT_OK)
            }
            Err(e) => {
                eprintln!("{}: error: {e}", config.display());
                ExitCode::from(EXIT_USAGE)
            }
        },
        Command::Run { config } => {
            let st = run_one(&config);
            print!("{}", st.summary);
            if st.code == EXIT_USAGE {
                eprintln!("{}", st.line);
            } else {
                println!("{}", st.line);
            }
            ExitCode::from(st.code)
        }
        Command::Sweep { pattern } => {
            let paths = match expand(&pattern) {
                Ok(p) if !p.is_empty() => p,
                Ok(_) => {
                    eprintln!("no files match {pattern}");
                    return ExitCode::from(EXIT_USAGE);
                }
                Err(e) => {
                    eprintln!("cannot expand {pattern}: {e}");
                    return ExitCode::from(EXIT_USAGE);
                }
            };
            let results: Vec<Status> = paths.par_iter().map(|p| run_one(p)).collect();
            for st in &results {
                println!("{}", st.line);
            }
            let code = if results.iter().any(|st| st.code == EXIT_USAGE) {
                EXIT_USAGE
            } else {
                results.iter().map(|st| st.code).max().unwrap_or(EXIT_OK)
            };
            ExitCode::from(code)
        }
    }
}
