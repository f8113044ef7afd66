//! `vicsek`: batch front end. Reads a TOML run configuration, applies
//! `--set` overrides and command flags, runs one command and writes CSV/JSON
//! artifacts plus a `manifest.toml` that reproduces the run.
//!
//! Exit status: 0 on success, 1 on invalid input, 2 on numeric failure
//! (including partial failures under `--strict`).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use commands::{Failure, Report};
use config::{CommandKind, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "vicsek", version, about = "Density-dependent Vicsek hydrodynamics toolkit")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set model.dim=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output directory; overrides `output` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Treat per-row failures and warnings as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// Worker threads.
    #[arg(long, env = "VICSEK_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Option<Cmd>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Coefficients c1, c1~, c2, c3, lambda over a density scan.
    Coeffs,
    /// Generalized collisional invariant on a uniform grid.
    Gci {
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Series expansions and the H_p, G_p^N polynomials.
    Asymptotics,
    /// Hyperbolicity verdicts over a (rho, theta) grid.
    HyperbolicityMap,
    /// Anisotropy constants of the configured kernels.
    KernelAlpha,
    /// Particle simulation.
    SimulateParticles,
    /// One-dimensional macroscopic solver.
    SimulateMacro,
    /// Run the command named in the configuration.
    Run,
}

impl Cmd {
    fn kind(&self) -> Option<CommandKind> {
        Some(match self {
            Cmd::Coeffs => CommandKind::Coeffs,
            Cmd::Gci { .. } => CommandKind::Gci,
            Cmd::Asymptotics => CommandKind::Asymptotics,
            Cmd::HyperbolicityMap => CommandKind::HyperbolicityMap,
            Cmd::KernelAlpha => CommandKind::KernelAlpha,
            Cmd::SimulateParticles => CommandKind::SimulateParticles,
            Cmd::SimulateMacro => CommandKind::SimulateMacro,
            Cmd::Run => return None,
        })
    }

    fn flag_overrides(&self) -> Vec<String> {
        match self {
            Cmd::Gci { kappa, dim, grid } => [
                kappa.map(|v| format!("gci.kappa={v:?}")),
                dim.map(|v| format!("gci.dim={v}")),
                grid.map(|v| format!("gci.grid={v}")),
            ]
            .into_iter()
            .flatten()
            .collect(),
            _ => Vec::new(),
        }
    }
}

fn resolve(cli: &Cli) -> Result<(CommandKind, RunConfig), Failure> {
    let mut overrides = cli.overrides.clone();
    if let Some(c) = &cli.command {
        overrides.extend(c.flag_overrides());
    }
    let mut cfg = config::load(cli.config.as_deref(), &overrides)?;
    let kind = cli
        .command
        .as_ref()
        .and_then(Cmd::kind)
        .or(cfg.command)
        .context("no command given on the command line or in the configuration")?;
    cfg.command = Some(kind);
    cfg.tool_version = Some(env!("CARGO_PKG_VERSION").to_string());
    if let Some(o) = &cli.out {
        cfg.output = o.clone();
    }
    Ok((kind, cfg))
}

fn execute(cli: &Cli) -> Result<Report, Failure> {
    let (kind, cfg) = resolve(cli)?;
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    std::fs::create_dir_all(&cfg.output).with_context(|| format!("creating {}", cfg.output.display()))?;
    let manifest = cfg.output.join("manifest.toml");
    let text = toml::to_string(&cfg).context("serializing the manifest")?;
    std::fs::write(&manifest, text).with_context(|| format!("writing {}", manifest.display()))?;
    let mut report = commands::run(kind, &cfg, &cfg.output)?;
    report.artifacts.push(manifest);
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            for a in &report.artifacts {
                println!("wrote {}", a.display());
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if cli.strict && !report.warnings.is_empty() {
                eprintln!("error: {} warnings under --strict", report.warnings.len());
                return ExitCode::from(2);
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Validation(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numeric(e)) => {
            eprintln!("numeric failure: {e:#}");
            ExitCode::from(2)
        }
    }
}
