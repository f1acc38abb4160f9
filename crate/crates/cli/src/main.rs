mod commands;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use edgeimpact_core::stable_analysis::SortKey;

pub const EXIT_PARSE: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;
pub const EXIT_VERIFY: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "edgeimpact", version, about = "Single-edge modification analysis for networked linear systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Load a network and report its size, spectrum and validity.
    Validate(NetArgs),
    /// Per-edge margins and delta norms, or the coherence-change map.
    Scan(ScanArgs),
    /// Greedy edge additions (coherence for Laplacian, Gramian for direct).
    Grow(GrowArgs),
    /// Write a generated network to a JSON file.
    Generate(GenerateArgs),
    /// Network coherence of a Laplacian network.
    Coherence(CoherenceArgs),
    /// Stability margin of one edge, or the fragility radius.
    Margin(MarginArgs),
    /// Cross-check every closed form against the brute-force oracles.
    VerifyAll(VerifyAllArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Output file (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads for batch computations.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
pub struct NetArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum SortArg {
    Margin,
    Hinf,
    H2,
    Edge,
}

impl From<SortArg> for SortKey {
    fn from(s: SortArg) -> Self {
        match s {
            SortArg::Margin => SortKey::Margin,
            SortArg::Hinf => SortKey::Hinf,
            SortArg::H2 => SortKey::H2,
            SortArg::Edge => SortKey::Edge,
        }
    }
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// Probe weight added to every candidate edge.
    #[arg(long)]
    pub w: f64,
    /// Ascending sort key for direct networks.
    #[arg(long, value_enum, default_value_t = SortArg::Hinf)]
    pub sort: SortArg,
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Compare sampled rows against the oracles (report on stderr).
    #[arg(long)]
    pub verify: bool,
    /// Rows sampled by --verify.
    #[arg(long, default_value_t = 30)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative tolerance for --verify.
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum GrowMode {
    Coherence,
    Gramian,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConditionArg {
    /// rho(L) < 1
    Strict,
    /// rho(L) < 2
    Displacement,
}

#[derive(Args, Debug)]
pub struct GrowArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// Weight of every added edge.
    #[arg(long)]
    pub w: f64,
    #[arg(long, default_value_t = 10)]
    pub budget: usize,
    /// Defaults to coherence for Laplacian networks and gramian otherwise.
    #[arg(long, value_enum)]
    pub mode: Option<GrowMode>,
    /// Spectral condition enforced on Laplacian additions (defaults to the
    /// one stored in the network file).
    #[arg(long, value_enum)]
    pub condition: Option<ConditionArg>,
    /// Also write the grown network here.
    #[arg(long)]
    pub save_net: Option<PathBuf>,
    #[arg(long)]
    pub verify: bool,
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum GenKind {
    Er,
    /// 500-node Erdős–Rényi network with 50 inputs and 100 outputs (needs --seed).
    Benchmark,
    Path,
    Complete,
    Grid,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: GenKind,
    #[arg(long)]
    pub n: Option<usize>,
    /// Edge probability (er).
    #[arg(long)]
    pub p: Option<f64>,
    /// Target spectral radius (er).
    #[arg(long)]
    pub rho: Option<f64>,
    /// Uniform edge weight (path, complete, grid).
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// Number of random input nodes (er; all nodes when omitted).
    #[arg(long)]
    pub inputs: Option<usize>,
    /// Number of random output nodes (er; all nodes when omitted).
    #[arg(long)]
    pub outputs: Option<usize>,
    /// Draw each unordered pair once and mirror it (er).
    #[arg(long)]
    pub undirected: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CoherenceArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// Also estimate by simulation with this many trials.
    #[arg(long)]
    pub monte_carlo: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    pub horizon: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub verify: bool,
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct MarginArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long, requires = "t")]
    pub s: Option<usize>,
    #[arg(long, requires = "s")]
    pub t: Option<usize>,
    #[arg(long)]
    pub verify: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Args, Debug)]
pub struct VerifyAllArgs {
    #[arg(long)]
    pub net: PathBuf,
    /// Probe weight for sampled modifications.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long, default_value_t = 30)]
    pub samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
