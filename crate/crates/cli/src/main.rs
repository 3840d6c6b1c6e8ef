use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

mod commands;
mod config;
mod report;

use commands::{Command, Context};
use config::ExperimentConfig;
use report::{Environment, Report};

/// Verification runner for multiresolution analyses built on circle maps.
#[derive(Parser, Debug)]
#[command(name = "circle-mra", version)]
struct Cli {
    /// What to run.
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment configuration (optional for `verify`).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for the JSON report and CSV files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the seed from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the parallel parts.
    #[arg(long)]
    jobs: Option<usize>,
    /// Multiplies every numerical threshold.
    #[arg(long, default_value_t = 1.0)]
    tol_scale: f64,
}

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAIL),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

/// `Ok(pass)` once a report was produced, `Err` for usage and configuration errors.
fn run(cli: &Cli) -> Result<bool, String> {
    if !(cli.tol_scale > 0.0 && cli.tol_scale.is_finite()) {
        return Err(format!("--tol-scale must be positive, got {}", cli.tol_scale));
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err("--jobs must be at least 1".into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let config = cli
        .config
        .as_deref()
        .map(ExperimentConfig::load)
        .transpose()
        .map_err(|e| e.to_string())?;
    let seed = cli
        .seed
        .or(config.as_ref().map(|c| c.seed))
        .unwrap_or_else(config::default_seed);
    let ctx = Context {
        config: config.as_ref(),
        seed,
        tol_scale: cli.tol_scale,
    };
    let outcome = commands::run(cli.command, &ctx).map_err(|e| e.to_string())?;
    let environment = Environment {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed,
        tol_scale: cli.tol_scale,
        jobs: cli.jobs,
        config: cli.config.as_ref().map(|p| p.display().to_string()),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    let report = Report::new(cli.command.name(), outcome.records, environment);
    for r in &report.records {
        eprintln!(
            "{} {} = {:.3e} (threshold {:.1e}) [{}]",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.value,
            r.threshold,
            r.anchor
        );
    }
    let json = report.to_json();
    let out = cli.out.clone().or(config.as_ref().and_then(|c| c.output.clone()));
    if let Some(dir) = out {
        let io = |e: std::io::Error| format!("cannot write to {}: {e}", dir.display());
        std::fs::create_dir_all(&dir).map_err(io)?;
        std::fs::write(dir.join(format!("{}.json", cli.command.name())), &json).map_err(io)?;
        for table in &outcome.tables {
            table.write(&dir).map_err(io)?;
        }
    }
    println!("{json}");
    Ok(report.pass)
}
