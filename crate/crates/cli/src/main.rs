use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod manifest;
mod scenario;

use commands::Failure;

/// Harmonic analysis and decay experiments on cylindrical cones R^k x C^m_HL.
///
/// Set RAYON_NUM_THREADS to bound the worker pool; results do not depend on it.
#[derive(Debug, Parser)]
#[command(name = "hlcone", version, about, long_about = None)]
struct Cli {
    /// Print the effective simulation config as TOML and exit.
    #[arg(long)]
    print_config: bool,

    /// Config file merged over the defaults for --print-config.
    #[arg(long, requires = "print_config")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Multiplicity table of link eigenvalues.
    Spectrum(SpectrumArgs),
    /// Rigidity reports (linear and quadratic multiplicities against SU(m) orbits).
    Rigidity(RigidityArgs),
    /// Geometry and excess checks; exits 1 when a check fails.
    Audit(AuditArgs),
    /// Volume excess of a scenario at several radii.
    Excess(ExcessArgs),
    /// Runs the scale iteration and writes the ledger.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Link dimensions: `8`, `3..13` (inclusive) or `3,5,7`.
    #[arg(long)]
    pub m: commands::MList,
    /// Eigenvalues: integers or the keywords `linear` (m-1) and `quadratic` (2m).
    #[arg(long, value_delimiter = ',', default_value = "linear,quadratic")]
    pub lambda: Vec<commands::LambdaSpec>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct RigidityArgs {
    #[arg(long, default_value = "3..13")]
    pub m: commands::MList,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AuditKind {
    Legendrian,
    Calibration,
    Metric,
    Moment,
    Excess,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    pub what: AuditKind,
    #[arg(long, default_value_t = 3)]
    pub m: usize,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// `zero` for the unperturbed model on R^k x C^m_HL, otherwise a scenario file.
    #[arg(long, default_value = "zero")]
    pub scenario: String,
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub radii: Vec<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct ExcessArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.5,1")]
    pub radii: Vec<f64>,
    /// Axial center of the balls.
    #[arg(long, value_delimiter = ',')]
    pub center: Vec<f64>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, required_unless_present = "print_config")]
    pub scenario: Option<PathBuf>,
    /// Output directory for ledger.csv, ledger.json, summary.json and manifest.json.
    #[arg(long, default_value = "hlcone-out")]
    pub out: PathBuf,
    /// Print the effective config as TOML and exit.
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct OutArgs {
    /// Also write the output and a manifest.json into this directory.
    /// Without it the manifest goes to stderr.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let res = match (cli.print_config, cli.command) {
        (true, _) => commands::print_config(cli.config.as_deref()),
        (false, None) => Err(Failure::Usage("a subcommand is required (see --help)".into())),
        (false, Some(cmd)) => match cmd {
            Command::Spectrum(a) => commands::spectrum(&a, argv),
            Command::Rigidity(a) => commands::rigidity(&a, argv),
            Command::Audit(a) => commands::audit(&a, argv),
            Command::Excess(a) => commands::excess(&a, argv),
            Command::Simulate(a) => commands::simulate(&a, argv),
        },
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
