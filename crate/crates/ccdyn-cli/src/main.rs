use ccdyn_cli::config::ScenarioConfig;
use ccdyn_cli::scenario::{compare_runs, run_scenario, RunContext};
use ccdyn_cli::CliError;
use clap::{Parser, Subcommand};
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

#[derive(Parser)]
#[command(name = "ccdyn", version, about = "Contour-field dynamics of smooth planar vortices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario files.
    Run {
        #[arg(long = "config", required = true, num_args = 1..)]
        configs: Vec<PathBuf>,
        /// Output directory; overrides `output.dir`. With several configs each
        /// run gets a subdirectory named after its file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Scenarios run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Worker threads inside the quadrature of each run.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Hausdorff distance between the final level curves of two runs.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// Comma-separated vorticity levels; defaults to 10..90% of the peak.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<f64>,
    },
}

fn report(path: &Path, e: &CliError) {
    let v = json!({ "config": path.display().to_string(), "kind": e.kind(), "message": e.to_string() });
    eprintln!("{v}");
}

fn run_one(path: &Path, out: Option<&Path>, many: bool, threads: usize) -> Result<(), CliError> {
    let cfg = ScenarioConfig::load(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let dir = match out {
        Some(o) if many => o.join(path.file_stem().unwrap_or_default()),
        Some(o) => o.to_path_buf(),
        None => PathBuf::from(&cfg.output.dir),
    };
    let s = run_scenario(&cfg, &RunContext { base, out: dir.clone(), threads })?;
    println!("{}", json!({ "config": path.display().to_string(), "out": dir.display().to_string(), "summary": s.value }));
    match s.halted {
        Some(m) => Err(CliError::Halt(m)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { configs, out, jobs, threads } => {
            let many = configs.len() > 1;
            let worst = Mutex::new(0i32);
            let next = Mutex::new(0usize);
            std::thread::scope(|s| {
                for _ in 0..jobs.clamp(1, configs.len()) {
                    s.spawn(|| loop {
                        let k = {
                            let mut n = next.lock().unwrap();
                            *n += 1;
                            *n - 1
                        };
                        let Some(path) = configs.get(k) else { break };
                        if let Err(e) = run_one(path, out.as_deref(), many, threads.max(1)) {
                            report(path, &e);
                            let mut w = worst.lock().unwrap();
                            *w = (*w).max(e.exit_code());
                        }
                    });
                }
            });
            ExitCode::from(worst.into_inner().unwrap() as u8)
        }
        Command::Compare { a, b, levels } => match compare_runs(&a, &b, &levels) {
            Ok(v) => {
                println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
                ExitCode::SUCCESS
            }
            Err(e) => {
                report(&a, &e);
                ExitCode::from(e.exit_code() as u8)
            }
        },
    }
}
