//! `rsgbm`: command-line front-end for regime-switching GBM pricing and
//! hedging. Regimes are numbered from 1 on the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod output;

#[derive(Debug, Parser)]
#[command(name = "rsgbm", version, about = "Option pricing and hedging under regime-switching GBM")]
struct Cli {
    /// Emit JSON instead of CSV.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "RSGBM_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Use Lambda = periods * (Q - I) instead of the matrix logarithm.
    #[arg(long, global = true)]
    approx_generator: bool,
    /// Write the main output here instead of stdout.
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Model validation.
    Model {
        #[command(subcommand)]
        cmd: ModelCmd,
    },
    /// Auxiliary functions gamma, delta, beta and the reweighted generators.
    Auxfn {
        #[command(subcommand)]
        cmd: AuxfnCmd,
    },
    /// Regime paths and terminal prices.
    Simulate {
        #[command(subcommand)]
        cmd: SimulateCmd,
    },
    /// European call or put values and initial hedge ratios.
    Price(PriceArgs),
    /// Simulate the variance-optimal hedge.
    Hedge(HedgeArgs),
    /// Recompute a published table.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Subcommand)]
enum ModelCmd {
    /// Parse and validate a model file and print its derived quantities.
    Check { config: PathBuf },
}

#[derive(Debug, Subcommand)]
enum AuxfnCmd {
    /// Tabulate the auxiliary functions on [0, T].
    Dump {
        config: PathBuf,
        #[arg(long = "T", default_value_t = 1.0)]
        maturity: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Uniformization rate for a generator over [0, T].
    Bound {
        config: PathBuf,
        #[arg(long = "T", default_value_t = 1.0)]
        maturity: f64,
        #[arg(long, value_enum, default_value_t = GeneratorArg::Arrow)]
        generator: GeneratorArg,
    },
}

#[derive(Debug, Subcommand)]
enum SimulateCmd {
    /// Regime changes and prices at event times for a few paths.
    Dump {
        config: PathBuf,
        #[arg(long = "T", default_value_t = 1.0)]
        maturity: f64,
        #[arg(long, default_value_t = 10)]
        paths: usize,
        #[arg(long, value_enum, default_value_t = MeasureArg::Physical)]
        measure: MeasureArg,
        #[arg(long, default_value_t = 1)]
        regime: usize,
        /// Initial prices, one per asset.
        #[arg(long, value_delimiter = ',', default_value = "100")]
        s0: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GeneratorArg {
    Constant,
    Tilde,
    Arrow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MeasureArg {
    Physical,
    Forward,
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PayoffArg {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Mc,
    Fourier,
    BlackScholes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PricerArg {
    Auto,
    Fourier,
    NestedMc,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableArg {
    ShenTable2,
    AppleTable8,
    AppleTable6,
}

#[derive(Debug, Args)]
struct PriceArgs {
    config: PathBuf,
    #[arg(long, value_enum, default_value_t = PayoffArg::Call)]
    payoff: PayoffArg,
    /// One or more strikes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    strike: Vec<f64>,
    #[arg(long = "T", default_value_t = 1.0)]
    maturity: f64,
    #[arg(long, value_delimiter = ',', default_value = "100")]
    s0: Vec<f64>,
    /// Starting regimes, comma separated; all regimes when omitted.
    #[arg(long, value_delimiter = ',')]
    regime: Vec<usize>,
    /// Asset the option is written on.
    #[arg(long, default_value_t = 1)]
    asset: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::Mc)]
    method: MethodArg,
    /// Antithetic pairs for Monte Carlo.
    #[arg(long)]
    pairs: Option<usize>,
    /// 500000 pairs instead of the default 100000.
    #[arg(long)]
    full: bool,
}

#[derive(Debug, Args)]
struct HedgeArgs {
    config: PathBuf,
    #[arg(long, value_enum, default_value_t = PayoffArg::Call)]
    payoff: PayoffArg,
    #[arg(long)]
    strike: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    maturity: f64,
    #[arg(long, default_value_t = 100.0)]
    s0: f64,
    #[arg(long, default_value_t = 1)]
    regime: usize,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long, default_value_t = 10_000)]
    paths: usize,
    #[arg(long, value_enum, default_value_t = PricerArg::Auto)]
    pricer: PricerArg,
    /// Inner pairs for the nested Monte Carlo pricer.
    #[arg(long, default_value_t = rsgbm_core::pricing::DEFAULT_INNER_PAIRS)]
    inner_pairs: usize,
    /// Checkpoint times for the martingale diagnostics, comma separated.
    #[arg(long, value_delimiter = ',')]
    checkpoints: Vec<f64>,
    /// Write every grid record of every path as CSV.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Also reconstruct the hedging error from its representation.
    #[arg(long)]
    decomposition: bool,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[arg(value_enum)]
    table: TableArg,
    /// Model file to use instead of the built-in parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    pairs: Option<usize>,
    /// 500000 pairs instead of the default 100000.
    #[arg(long)]
    full: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
