//! Experiment runner: validates a JSON config, dispatches one command, and
//! writes a reproducible report plus CSV traces.
//!
//! Exit status: 0 on success, 1 when a verification verdict fails (an
//! unmatched endpoint, a failed selftest line, a non-quasicompact verdict),
//! 2 on configuration or runtime errors.

mod commands;
mod config;
mod report;

use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use config::{CommandKind, ConfigError};

#[derive(Parser, Debug)]
#[command(
    name = "cocyspec",
    version,
    about = "Lyapunov spectra, dichotomy spectra, and quasicompactness certificates for linear cocycles"
)]
struct Cli {
    /// Path to the JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for report.json and trace_*.csv (default: config
    /// "out" field, then the current directory).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker thread count override.
    #[arg(long)]
    threads: Option<usize>,

    /// Command override: lyapunov | spectrum | quasicompact | verify-jps |
    /// selftest.
    #[arg(long)]
    command: Option<String>,
}

fn emit_config_errors(errors: &[ConfigError]) {
    for e in errors {
        let doc = serde_json::json!({
            "code": "config-invalid",
            "path": e.path,
            "line": e.line,
            "message": e.message,
        });
        eprintln!("{doc}");
    }
    eprintln!("config invalid: {} problem(s) found", errors.len());
}

fn error_code(e: &cocyspec::Error) -> &'static str {
    use cocyspec::Error::*;
    match e {
        VariantMismatch { .. } => "variant-mismatch",
        WindowTooShort { .. } => "window-too-short",
        MeasureMismatch(_) => "measure-mismatch",
        DimensionMismatch { .. } => "dimension-mismatch",
        NoUniformSplitting { .. } => "no-uniform-splitting",
        NotHyperbolic { .. } => "not-hyperbolic",
        NonMonotoneProfile(_) => "non-monotone-profile",
        InvalidParam(_) => "invalid-param",
        Numerical(_) => "numerical",
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    // Load and validate the config; a missing config is acceptable only for
    // a selftest requested on the command line.
    let (mut cfg, config_text) = match &cli.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!(
                        "{}",
                        serde_json::json!({
                            "code": "config-unreadable",
                            "message": format!("cannot read {}: {e}", path.display()),
                        })
                    );
                    return ExitCode::from(2);
                }
            };
            match config::validate(&text) {
                Ok(cfg) => (cfg, text),
                Err(errors) => {
                    emit_config_errors(&errors);
                    return ExitCode::from(2);
                }
            }
        }
        None => {
            if cli.command.as_deref() != Some("selftest") {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "code": "config-missing",
                        "message": "--config is required (only --command selftest runs without one)",
                    })
                );
                return ExitCode::from(2);
            }
            let synthetic = format!("{{\"command\":\"selftest\",\"seed\":{}}}", cli.seed.unwrap_or(7));
            match config::validate(&synthetic) {
                Ok(cfg) => (cfg, synthetic),
                Err(errors) => {
                    emit_config_errors(&errors);
                    return ExitCode::from(2);
                }
            }
        }
    };

    // Command-line overrides.
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = Some(threads);
    }
    let command = match cli.command.as_deref() {
        Some(name) => match CommandKind::parse(name) {
            Some(k) => Some(k),
            None => {
                eprintln!(
                    "{}",
                    serde_json::json!({
                        "code": "config-invalid",
                        "path": "command",
                        "message": format!("unknown command \"{name}\"; valid: {}", CommandKind::NAMES.join(", ")),
                    })
                );
                return ExitCode::from(2);
            }
        },
        None => cfg.command,
    };
    let Some(command) = command else {
        eprintln!(
            "{}",
            serde_json::json!({
                "code": "config-invalid",
                "path": "command",
                "message": "no command given (set \"command\" in the config or pass --command)",
            })
        );
        return ExitCode::from(2);
    };
    if command.needs_cocycle() && (cfg.base.is_none() || cfg.generator.is_none()) {
        eprintln!(
            "{}",
            serde_json::json!({
                "code": "config-invalid",
                "path": "base",
                "message": format!("command \"{}\" needs both \"base\" and \"generator\"", command.name()),
            })
        );
        return ExitCode::from(2);
    }

    if let Some(threads) = cfg.threads {
        // Ignore the error when a global pool already exists; determinism
        // does not depend on the pool size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }

    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.out.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));

    let started = Instant::now();
    let outcome = match commands::run_command(command, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({
                    "code": error_code(&e),
                    "message": e.to_string(),
                })
            );
            return ExitCode::from(2);
        }
    };
    let compute_ms = started.elapsed().as_millis();

    let write_started = Instant::now();
    let written = match report::write_report(
        &out_dir,
        command.name(),
        cfg.seed,
        &report::config_hash(&config_text),
        &outcome,
        &[("compute", compute_ms)],
    ) {
        Ok(w) => w,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({
                    "code": "io",
                    "message": format!("cannot write report: {e}"),
                })
            );
            return ExitCode::from(2);
        }
    };
    let _ = write_started;

    print!("{}", outcome.summary);
    for w in &outcome.warnings {
        println!("warning: {w}");
    }
    println!("report: {}", written.report_path.display());
    for p in &written.trace_paths {
        println!("trace:  {}", p.display());
    }

    if outcome.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
