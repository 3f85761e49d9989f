//! Command-line front end for the waveguide toolkit.
//!
//! Every run reads one TOML configuration, writes CSV tables named after the
//! configuration hash and a JSON manifest recording what was produced.

pub mod commands;
pub mod config;
pub mod persist;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use commands::{CmdError, Context};
use config::{parse_config_str, Diagnostic, RunConfig};
use persist::{ErrorRecord, Run};

#[derive(Debug, Parser)]
#[command(
    name = "waveguide",
    version,
    about = "Spectral diagnostics for magnetic Dirichlet Laplacians on curved strips"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for every randomised step (overrides `solver.seed`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Re-run even when a manifest for this configuration exists.
    #[arg(long, global = true)]
    pub force: bool,
    /// Extra gauge bump `bump:a,cx,cy,rx,ry` added to the potential.
    #[arg(long = "gauge-shift", global = true)]
    pub gauge_shift: Vec<String>,
    /// Also write the assembled pencil (`spectrum` only).
    #[arg(long, global = true)]
    pub dump: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Sampled reference curve and Jacobian bound.
    Geometry,
    /// Eigenvalues below the threshold with truncation checks.
    Spectrum,
    /// Explicit constants and the pointwise certification.
    Certify,
    /// Hardy constant of the flat comparison form.
    Hardy,
    /// Decay of the Weyl sequence.
    Weyl,
    /// Randomised checks of the ground-state identity and the perturbation bound.
    Identity,
    /// Parameter scan.
    Scan,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Geometry => "geometry",
            Command::Spectrum => "spectrum",
            Command::Certify => "certify",
            Command::Hardy => "hardy",
            Command::Weyl => "weyl",
            Command::Identity => "identity",
            Command::Scan => "scan",
        }
    }
}

/// Configuration after command-line overrides, plus its source text.
pub fn load(cli: &Cli) -> Result<(RunConfig, String), Diagnostic> {
    let source = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Diagnostic {
            path: p.display().to_string(),
            line: None,
            message: format!("cannot read configuration: {e}"),
        })?,
        None => String::new(),
    };
    let mut cfg = parse_config_str(&source)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    if let Some(seed) = cli.seed {
        cfg.solver.seed = seed;
    }
    if !cli.gauge_shift.is_empty() {
        cfg.field.gauge.extend(cli.gauge_shift.iter().cloned());
        cfg.validate(&source).map_err(|mut d| {
            if d.path.starts_with("field.gauge") {
                d.path = format!("--gauge-shift ({})", d.path);
            }
            d
        })?;
    }
    Ok((cfg, source))
}

fn prepare_dir(dir: &PathBuf) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    // probe writability before any work
    tempfile::NamedTempFile::new_in(dir).map(drop)
}

/// Run the command line and return the process exit status.
pub fn run(cli: Cli) -> i32 {
    let (cfg, source) = match load(&cli) {
        Ok(v) => v,
        Err(d) => {
            eprintln!("configuration error: {d}");
            return 2;
        }
    };
    let dir = PathBuf::from(&cfg.output_dir);
    if let Err(e) = prepare_dir(&dir) {
        eprintln!("cannot write to output directory {}: {e}", dir.display());
        return 2;
    }
    let mut run = Run::new(dir, cli.command.name(), cfg);
    if !cli.force && is_complete(&run) {
        println!(
            "duplicate run: {} already exists (use --force to recompute)",
            run.manifest_path().display()
        );
        return 0;
    }
    let ctx = Context {
        source,
        dump: cli.dump,
    };
    let result = match cli.command {
        Command::Geometry => commands::geometry(&mut run, &ctx),
        Command::Spectrum => commands::spectrum(&mut run, &ctx),
        Command::Certify => commands::certify(&mut run, &ctx),
        Command::Hardy => commands::hardy(&mut run, &ctx),
        Command::Weyl => commands::weyl(&mut run, &ctx),
        Command::Identity => commands::identity(&mut run, &ctx),
        Command::Scan => commands::scan(&mut run, &ctx),
    };
    let (code, record) = match &result {
        Ok(summary) => {
            if let Some(s) = summary {
                println!("{s}");
            }
            (0, None)
        }
        Err(e) => {
            eprintln!("{}: {e}", run.subcommand);
            (
                e.exit_code(),
                Some(ErrorRecord {
                    kind: e.kind().into(),
                    message: e.to_string(),
                }),
            )
        }
    };
    if let Err(e) = run.finish(record) {
        eprintln!("cannot write manifest: {e}");
        return CmdError::Io(e).exit_code();
    }
    code
}

/// A manifest for this configuration and subcommand exists and recorded success.
fn is_complete(run: &Run) -> bool {
    let Ok(text) = std::fs::read_to_string(run.manifest_path()) else {
        return false;
    };
    serde_json::from_str::<serde_json::Value>(&text)
        .map(|v| v.get("status").and_then(|s| s.as_str()) == Some("ok"))
        .unwrap_or(false)
}
