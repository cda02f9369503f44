use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hmm_sp::experiment::{run_study_partial, run_verify, write_report, ExperimentConfig, ReportFormat};

/// Worker count override honoured when `--threads` is absent.
const THREADS_ENV: &str = "HMM_SP_THREADS";

#[derive(Parser)]
#[command(name = "hmm-sp", version, about = "Multiscale FEM studies for fourth-order homogenization problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a config file and write its report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Report path; defaults to the config's `output` key.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value = "csv", value_parser = parse_format)]
        format: ReportFormat,
        #[arg(long)]
        seed: Option<u64>,
        /// Record per-row wall times (output is then run-dependent).
        #[arg(long)]
        timings: bool,
    },
    /// Run the built-in property checks; exit status 0 iff all pass.
    Verify {
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse().map_err(|e: hmm_sp::Error| e.to_string())
}

fn env_threads() -> Result<Option<usize>, String> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got `{v}`")),
        Err(_) => Ok(None),
    }
}

fn run(
    config: PathBuf,
    out: Option<PathBuf>,
    threads: Option<usize>,
    format: ReportFormat,
    seed: Option<u64>,
    timings: bool,
) -> Result<(), String> {
    let mut cfg = ExperimentConfig::from_file(&config).map_err(|e| e.to_string())?;
    let out = out
        .or_else(|| cfg.output.clone())
        .ok_or("no report path: pass --out or set `output` in the config")?;
    if let Some(t) = threads.or(env_threads()?) {
        cfg.threads = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.timings |= timings;
    let (report, err) = run_study_partial(&cfg);
    // Whatever finished is written even when a later tuple failed.
    write_report(&report, &out, format).map_err(|e| e.to_string())?;
    match err {
        None => {
            eprintln!("wrote {} rows to {}", report.rows.len(), out.display());
            Ok(())
        }
        Some(e) => Err(format!("{e} ({} completed rows written to {})", report.rows.len(), out.display())),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            format,
            seed,
            timings,
        } => match run(config, out, threads, format, seed, timings) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
        Command::Verify { seed } => {
            let checks = run_verify(seed);
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
