//! `ids-lab`: drivers for the ids-core experiments.
//!
//! Every run writes `config.json` next to its outputs; `ids-lab --config
//! <file>` replays it bit-for-bit.

mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ids_core::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "ids-lab", version, about = "Integrated density of states laboratory")]
struct Cli {
    /// Replay a previously emitted config.json instead of parsing a subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the replayed one when used with --config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub out: PathBuf,
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Integrated density of states samples and the asymptotic fit.
    Ids(IdsArgs),
    /// Zone census: label counts, lemma constants and violations.
    Zones(ZonesArgs),
    /// Randomized block-perturbation lemma suite.
    PerturbCheck(PerturbArgs),
    /// Plane-wave vs finite-difference spectra of the 1D reduced operator.
    Reduce1d(Reduce1dArgs),
    /// Reduced-determinant roots vs pencil eigenvalues, and crossing radii.
    SchurCheck(SchurArgs),
    /// Sector and strip volume contributions (optionally Monte-Carlo).
    Volumes(VolumesArgs),
    /// Fit the expansion to an IDS sample CSV.
    FitAsymptotics(FitArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct IdsArgs {
    #[arg(long)]
    pub potential: PathBuf,
    /// Explicit energies; otherwise `--samples` points on `[rho_base, 2 rho_base]`.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    #[arg(long)]
    pub rho_base: Option<f64>,
    #[arg(long, default_value_t = 16)]
    pub samples: usize,
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    /// Plane-wave cutoff; default scales with lambda.
    #[arg(long)]
    pub e_max: Option<f64>,
    /// Expansion order K of the fit.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ZoneArgs {
    #[arg(long)]
    pub potential: PathBuf,
    /// `rho_n`, the base of the dyadic energy interval.
    #[arg(long, default_value_t = 1000.0)]
    pub rho_base: f64,
    #[arg(long, default_value_t = 2.0)]
    pub rn: f64,
    #[arg(long, default_value_t = 1)]
    pub m_order: usize,
    /// Overrides `M~ = 3M`.
    #[arg(long)]
    pub m_tilde: Option<usize>,
    /// Overrides the strip ball radius `6 M~ R_n`.
    #[arg(long)]
    pub strip_radius: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ZonesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub zone: ZoneArgs,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 8)]
    pub scheme_fibers: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PerturbArgs {
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct Reduce1dArgs {
    #[arg(long)]
    pub potential: PathBuf,
    /// Dual coordinates of the strip direction.
    #[arg(long, value_delimiter = ',', default_value = "1,0")]
    pub theta: Vec<i64>,
    /// Quasi-momenta; default is an even grid of `--points` on one period.
    #[arg(long, value_delimiter = ',')]
    pub xi2: Vec<f64>,
    #[arg(long, default_value_t = 9)]
    pub points: usize,
    /// Truncation radius of the potential.
    #[arg(long, default_value_t = 2.0)]
    pub rn: f64,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long, default_value_t = 40)]
    pub modes: usize,
    /// Finite-difference points per period.
    #[arg(long, default_value_t = 256)]
    pub fd_points: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Gap check over the lowest this many eigenvalues.
    #[arg(long, default_value_t = 20)]
    pub gap_count: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SchurArgs {
    #[arg(long)]
    pub potential: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,0")]
    pub theta: Vec<i64>,
    #[arg(long, default_value_t = 50.0)]
    pub rho: f64,
    /// Strip half-width `a`.
    #[arg(long, default_value_t = 2.75)]
    pub a: f64,
    /// Radius of the ball added to the core of the class.
    #[arg(long, default_value_t = 6.0)]
    pub ball: f64,
    #[arg(long, default_value_t = 2.0)]
    pub rn: f64,
    /// Seed `eta_2` of the checked class (with its partner, if any).
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub eta2: f64,
    /// Force a two-dimensional reduction with this partner member.
    #[arg(long, allow_hyphen_values = true)]
    pub partner: Option<f64>,
    /// `eta_2` nodes on one period for the crossing-radius CSV.
    #[arg(long, default_value_t = 8)]
    pub nodes: usize,
    /// `delta_0`, bounding the pairing threshold `s = min(delta_0/2, C_2/4)`.
    #[arg(long, default_value_t = 1.0)]
    pub delta0: f64,
    /// Smallest admissible radius; default `rho^{3/4}`.
    #[arg(long)]
    pub r_min: Option<f64>,
    /// Root tolerance in units of the pencil scale.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct VolumesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub zone: ZoneArgs,
    #[arg(long)]
    pub rho: f64,
    /// Strip quadrature nodes per period `|theta|`.
    #[arg(long, default_value_t = 32)]
    pub per_period: usize,
    #[arg(long, default_value_t = 1.0)]
    pub delta0: f64,
    /// Monte-Carlo samples for the direct volume (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FitArgs {
    /// CSV written by `ids` (columns lambda, N, ...).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 200)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_)
            | Error::NotHermitian(_)
            | Error::DegenerateBasis(_)
            | Error::LatticeMismatch
            | Error::NotLatticeVector(..)
            | Error::EmptyBall(_)
            | Error::DomainError(_)
            | Error::OutsideAnnulus(..) => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Config(format!("io: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Config(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Config(format!("json: {e}"))
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let s = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&s).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let cfg = match (cli.config, cli.command) {
        (Some(_), Some(_)) => return Err(Failure::Config("--config replays a run; do not combine it with a subcommand".into())),
        (Some(path), None) => {
            let mut cfg = load_config(&path)?;
            if let Some(out) = cli.out {
                cfg.out = out;
            }
            cfg
        }
        (None, Some(command)) => RunConfig {
            out: cli.out.unwrap_or_else(|| PathBuf::from(".")),
            command,
        },
        (None, None) => return Err(Failure::Config("a subcommand or --config is required".into())),
    };
    std::fs::create_dir_all(&cfg.out)?;
    commands::write_json(&cfg.out.join("config.json"), &cfg)?;
    commands::dispatch(&cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Config(m) => eprintln!("configuration error: {m}"),
                Failure::Numerical(m) => eprintln!("numerical failure: {m}"),
            }
            ExitCode::from(f.code())
        }
    }
}
