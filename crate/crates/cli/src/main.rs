//! `detline`: determinant-line invariants of flat bundles from combinatorial
//! input.

#![allow(clippy::needless_range_loop)]

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "detline", version, about = "Torsion, duality and Poincaré–Reidemeister metrics of flat bundles")]
pub struct Cli {
    /// Arithmetic backend; defaults to the one named in the system file.
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    /// Relative tolerance for float backends.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Seed for every randomized choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output path (a file prefix for `gen`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Also report signed values, not only moduli.
    #[arg(long, global = true)]
    pub signed: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Exact,
    F64,
    Hp,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a complex and a local system from a standard family.
    Gen(GenArgs),
    /// Validate a complex and optionally a system.
    Check { complex: PathBuf, system: Option<PathBuf> },
    /// Torsion of the twisted chain complex with unit or given frames.
    Torsion(TorsionArgs),
    /// Poincaré–Reidemeister norm of the reference generator.
    PrMetric(PrArgs),
    /// Classical Reidemeister norm of a unimodular system.
    RMetric(Pair),
    /// Scalar of the correspondence induced by a flat iso `det E → det F`.
    Correspond(CorrespondArgs),
    /// Finite-dimensional Ray–Singer oracle with random inner products.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
pub struct Pair {
    pub complex: PathBuf,
    pub system: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// `circle N`, `sphere D`, `lens P Q` or `torus2`.
    pub family: String,
    pub params: Vec<u32>,
    /// Rank of the system.
    #[arg(long, default_value_t = 1)]
    pub rank: usize,
    /// Holonomy scalar (circle, torus first generator).
    #[arg(long, allow_hyphen_values = true)]
    pub holonomy: Option<String>,
    /// Holonomy of the second torus generator.
    #[arg(long, allow_hyphen_values = true)]
    pub holonomy_b: Option<String>,
    /// Unit holonomy `e^{iθ}` on the circle.
    #[arg(long, allow_hyphen_values = true)]
    pub angle: Option<f64>,
    /// Lens character exponent `k`, so `ζ = e^{2πik/p}`.
    #[arg(long)]
    pub character: Option<u32>,
    /// Replace the anchor gauge by a random one drawn from `--seed`.
    #[arg(long)]
    pub gauge: bool,
}

#[derive(Args, Debug)]
pub struct TorsionArgs {
    #[command(flatten)]
    pub input: Pair,
    /// JSON array of frame scalars, one per cell.
    #[arg(long)]
    pub frame: Option<PathBuf>,
    /// Also compute on the barycentric subdivision with the transported frame.
    #[arg(long)]
    pub subdivide: bool,
}

#[derive(Args, Debug)]
pub struct PrArgs {
    #[command(flatten)]
    pub input: Pair,
    /// Evaluate the three-number recipe with random frames drawn from `--seed`.
    #[arg(long)]
    pub random_frames: bool,
}

#[derive(Args, Debug)]
pub struct CorrespondArgs {
    pub complex: PathBuf,
    pub system_e: PathBuf,
    pub system_f: PathBuf,
    /// Value of the iso on the first cell of each component.
    #[arg(long, default_value = "1", allow_hyphen_values = true)]
    pub value: String,
    /// Compare with the barycentric subdivision.
    #[arg(long)]
    pub subdivide: bool,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    pub input: Pair,
    /// Check the product formula for dual inner products.
    #[arg(long)]
    pub thm53: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = commands::run(&cli);
    ExitCode::from(code)
}
