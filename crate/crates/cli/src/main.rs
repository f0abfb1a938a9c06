//! `kdense`: experiments for planted k-densest sub-hypergraph recovery.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use kdense::amp::{InitKind, SquareTerm, ThresholdKind};
use kdense::thresholds::{OrderRegime, Scaling};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(kdense::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl From<kdense::Error> for CliError {
    fn from(e: kdense::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    /// 2: bad configuration or parameters, 3: capacity, 4: numerical divergence.
    pub fn exit_code(&self) -> u8 {
        use kdense::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Capacity(_)) => 3,
            CliError::Core(E::Divergence { .. } | E::Degenerate(_)) => 4,
            CliError::Core(E::Io(_)) => 1,
            CliError::Core(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "kdense", version, about = "Planted k-densest sub-hypergraph recovery experiments")]
pub struct Cli {
    /// Base seed for all random streams.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

/// Problem size and signal strength shared by several subcommands.
#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub d: usize,
    /// Normalized SNR gamma.
    #[arg(long, conflicts_with = "beta", required_unless_present = "beta")]
    pub gamma: Option<f64>,
    /// Per-hyperedge bias beta.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Ui,
    Ii,
}

impl From<InitArg> for InitKind {
    fn from(v: InitArg) -> Self {
        match v {
            InitArg::Ui => InitKind::Uninformative,
            InitArg::Ii => InitKind::Informative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeInitArg {
    Ui,
    Ii,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ThresholdArg {
    Bernoulli,
    Vectorial,
}

impl From<ThresholdArg> for ThresholdKind {
    fn from(v: ThresholdArg) -> Self {
        match v {
            ThresholdArg::Bernoulli => ThresholdKind::Bernoulli,
            ThresholdArg::Vectorial => ThresholdKind::Vectorial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SquareArg {
    Observed,
    Expected,
}

impl From<SquareArg> for SquareTerm {
    fn from(v: SquareArg) -> Self {
        match v {
            SquareArg::Observed => SquareTerm::Observed,
            SquareArg::Expected => SquareTerm::Expected,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Below,
    AtLeast,
}

impl From<RegimeArg> for OrderRegime {
    fn from(v: RegimeArg) -> Self {
        match v {
            RegimeArg::Below => OrderRegime::BelowSqrtK,
            RegimeArg::AtLeast => OrderRegime::AtLeastSqrtK,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one planted instance (binary tensor dump plus JSON metadata).
    Gen {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Run AMP on independent planted instances.
    Amp {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum, default_value_t = ThresholdArg::Vectorial)]
        threshold: ThresholdArg,
        #[arg(long, value_enum, default_value_t = InitArg::Ui)]
        init: InitArg,
        #[arg(long, default_value_t = 20)]
        trials: u64,
        #[arg(long, default_value_t = 0.0)]
        damping: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Weights of the variance and Onsager sums.
        #[arg(long, value_enum, default_value_t = SquareArg::Expected)]
        square_term: SquareArg,
    },
    /// State-evolution fixed points over a beta grid.
    Se {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
        /// `lo:hi:n`.
        #[arg(long)]
        beta_grid: String,
        #[arg(long, value_enum, default_value_t = SeInitArg::Both)]
        init: SeInitArg,
        #[arg(long, default_value_t = kdense::quadrature::DEFAULT_ORDER)]
        quad_order: usize,
    },
    /// Exact maximum-likelihood recovery by enumeration.
    Mle {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 20)]
        trials: u64,
        /// Partial-recovery target (default k).
        #[arg(long)]
        kprime: Option<usize>,
        #[arg(long, default_value_t = kdense::exact::DEFAULT_ENUMERATION_CAP)]
        cap: u64,
    },
    /// Greedy r-coverings of the k-subsets of p nodes.
    Cover {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        k: usize,
        /// Single radius (default: every r in 0..=k).
        #[arg(long)]
        r: Option<usize>,
        /// Also check both covering conditions exhaustively.
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = kdense::exact::DEFAULT_ENUMERATION_CAP)]
        cap: u64,
    },
    /// Table of all recovery thresholds for one (p, k, d).
    Thresholds {
        #[arg(long)]
        p: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        kprime: Option<usize>,
        /// Override the rate ln k / ln p.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, value_enum)]
        regime: Option<RegimeArg>,
        /// Also convert this value between SNR conventions.
        #[arg(long, requires = "from")]
        convert: Option<f64>,
        #[arg(long)]
        from: Option<Scaling>,
    },
    /// AMP median-overlap curves from a config file ([sweep-amp] table).
    SweepAmp {
        #[arg(long)]
        config: PathBuf,
    },
    /// State-evolution phase grid from a config file ([sweep-se] table).
    SweepSe {
        #[arg(long)]
        config: PathBuf,
    },
    /// Exact-MLE recovery curve from a config file ([mle-mc] table).
    MleMc {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    std::fs::create_dir_all(&cli.out_dir)?;
    #[cfg(feature = "parallel")]
    if let Some(jobs) = cli.jobs {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))?;
        return pool.install(|| commands::dispatch(&cli));
    }
    commands::dispatch(&cli)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kdense: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
