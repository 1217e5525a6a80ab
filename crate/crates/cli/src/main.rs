//! `subplanck`: fidelity curves, scale reports, phase-space grids, teleportation
//! Monte Carlo and chaotic-evolution runs, written as CSV/JSON with a manifest.

// `!(x > y)` is used deliberately so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;
mod state;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use state::StateSpec;

/// Bad user input; exits with code 2.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct Invalid(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridFunction {
    Wigner,
    Husimi,
    Charsq,
}

/// Options shared by all commands. A JSON config file with the same keys (or a
/// manifest from an earlier run) fills in anything not given on the command line.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct Opts {
    /// State, e.g. `coherent:1,-0.5`, `squeezed:0.8`, `number:3`, `compass:3.5355`,
    /// `random:100,7`, `thermal:0.5`, `chaotic` (append `@dim` to set the truncation)
    #[arg(long, global = true)]
    pub state: Option<StateSpec>,
    #[arg(long, global = true)]
    pub t_min: Option<f64>,
    #[arg(long, global = true)]
    pub t_max: Option<f64>,
    #[arg(long, global = true)]
    pub t_steps: Option<usize>,
    /// Squeezing parameter t for single-t commands
    #[arg(long, global = true)]
    pub t: Option<f64>,
    /// Fidelity form 1–4
    #[arg(long, global = true)]
    pub form: Option<u8>,
    #[arg(long, value_enum, global = true)]
    pub function: Option<GridFunction>,
    /// Grid half-width in ν₁, ν₂
    #[arg(long, global = true)]
    pub grid_extent: Option<f64>,
    /// Grid points per axis
    #[arg(long, global = true)]
    pub grid_res: Option<usize>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Fock truncation override
    #[arg(long, global = true)]
    pub trunc: Option<usize>,
    /// Hilbert-space dimension N for random-state averages
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub t_final: Option<f64>,
    /// Initial centre of the evolved wave packet
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub p0: Option<f64>,
    /// Keep a wave-function snapshot every this many steps (0: none)
    #[arg(long, global = true)]
    pub snapshot_stride: Option<usize>,
    /// Also run at dt/2 and dt/4 and report the convergence ratio
    #[arg(long, global = true)]
    pub convergence: Option<bool>,
    /// Output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Manifest path (default: <out>/manifest.json)
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    /// JSON config file or earlier manifest
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($a:ident, $b:ident, $($f:ident),*) => {
        Opts { $($f: $a.$f.or($b.$f),)* config: $a.config }
    };
}

impl Opts {
    /// Command-line values win over `file`.
    fn merged(self, file: Opts) -> Opts {
        let (a, b) = (self, file);
        merge_fields!(
            a, b, state, t_min, t_max, t_steps, t, form, function, grid_extent, grid_res, samples, seed, trunc, dim, dt, t_final,
            x0, p0, snapshot_stride, convergence, out, manifest
        )
    }

    fn load(path: &PathBuf) -> anyhow::Result<Opts> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let cfg = match value.get("config") {
            Some(c) if value.get("command").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(cfg).map_err(|e| Invalid(format!("config {}: {e}", path.display())).into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Average fidelity against t, with the closed form when one exists
    FidelityCurve,
    /// Slope at t = 0, t_c, ℓ_c and L_c as JSON
    Scales,
    /// Wigner, Husimi or |Φ|² grid, scaled as (π/2)W, πQ, |Φ|², plus a plot script
    Grid,
    /// Monte Carlo over measurement outcomes of the teleportation protocol
    TeleportMc,
    /// Random-state ensemble average against sampled states
    RandomAverage,
    /// Driven double-well evolution, Fock projection and fidelity curve
    Evolve,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::FidelityCurve => "fidelity-curve",
            Command::Scales => "scales",
            Command::Grid => "grid",
            Command::TeleportMc => "teleport-mc",
            Command::RandomAverage => "random-average",
            Command::Evolve => "evolve",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "subplanck", version, about = "Teleportation fidelity and sub-Planck phase-space structure")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    use subplanck_core::Error as E;
    if err.downcast_ref::<Invalid>().is_some() {
        return EXIT_VALIDATION;
    }
    match err.downcast_ref::<E>() {
        Some(E::InvalidParameter(_) | E::Index { .. } | E::Dimension { .. } | E::GridExtent { .. }) => EXIT_VALIDATION,
        Some(_) => EXIT_NUMERICAL,
        None => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = (|| {
        let opts = match &cli.opts.config {
            Some(p) => {
                let file = Opts::load(p)?;
                cli.opts.clone().merged(file)
            }
            None => cli.opts.clone(),
        };
        commands::run(cli.command, opts)
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
