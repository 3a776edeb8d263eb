use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qpurify::config::{DEFAULT_DR, DEFAULT_DT, DEFAULT_HORIZON};
use qpurify::{Error, Result, SolveConfig};

#[derive(Debug, Parser)]
#[command(name = "qpurify", version, about = "Optimal feedback for qubit purification under continuous measurement")]
pub struct Cli {
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the optimal lookup table and write `<out>.table` / `<out>.cost`.
    Solve(SolveArgs),
    /// Monte Carlo ensemble of one strategy; CSV of (t, mean_r, se).
    Simulate(SimulateArgs),
    /// Solve and simulate over a list of efficiencies and compare the costs.
    Validate(ValidateArgs),
    /// Boundary error series and grid-refinement check.
    ErrorAnalysis(ErrorArgs),
    /// Final Bloch length of every strategy on common noise.
    Compare(CompareArgs),
}

/// Problem parameters. Unset values default, or are taken from a supplied
/// table.
#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Measurement efficiency in [0, 1].
    #[arg(long)]
    pub eta: Option<f64>,
    /// Measurement rate.
    #[arg(long)]
    pub k: Option<f64>,
    /// Time horizon.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Time step; must divide T.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Radial step; must divide 1.
    #[arg(long)]
    pub dr: Option<f64>,
    /// Base seed of the noise streams.
    #[arg(long)]
    pub seed: Option<u64>,
}

pub const DEFAULT_SEED: u64 = 42;

fn usage(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ProblemArgs {
    pub fn config(&self) -> Result<SolveConfig> {
        let eta = self.eta.ok_or_else(|| usage("--eta is required"))?;
        Ok(SolveConfig::from_resolution(
            eta,
            self.k.unwrap_or(1.0),
            self.horizon.unwrap_or(DEFAULT_HORIZON),
            self.dt.unwrap_or(DEFAULT_DT),
            self.dr.unwrap_or(DEFAULT_DR),
        )?
        .with_seed(self.seed.unwrap_or(DEFAULT_SEED)))
    }

    /// Configuration of a stored table, checked against any explicit flags.
    pub fn config_from_table(&self, meta: &SolveConfig) -> Result<SolveConfig> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        let checks = [
            ("eta", self.eta, meta.eta()),
            ("k", self.k, meta.k()),
            ("T", self.horizon, meta.horizon()),
            ("dt", self.dt, meta.dt()),
            ("dr", self.dr, meta.dr()),
        ];
        for (name, flag, stored) in checks {
            if let Some(v) = flag {
                if !close(v, stored) {
                    return Err(usage(format!("--{name} {v} does not match the table ({stored})")));
                }
            }
        }
        Ok(meta.with_seed(self.seed.unwrap_or(DEFAULT_SEED)))
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Initial radius at which the optimal cost is reported.
    #[arg(long, default_value_t = 0.0)]
    pub r0: f64,
    /// Output prefix.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    U0,
    U1,
    Local,
    LocalPurity,
    Global,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    /// Table file (or prefix given to `solve`); required for `global`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub r0: f64,
    /// CSV path; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Efficiencies as `start:stop:step` or a comma-separated list.
    #[arg(long, default_value = "0.1:1.0:0.1")]
    pub etas: String,
    #[arg(long)]
    pub k: Option<f64>,
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub dr: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub r0: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl ValidateArgs {
    pub fn problem(&self, eta: f64) -> ProblemArgs {
        ProblemArgs {
            eta: Some(eta),
            k: self.k,
            horizon: self.horizon,
            dt: self.dt,
            dr: self.dr,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct ErrorArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 0.0)]
    pub r0: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `start:stop:step` (inclusive) or `a,b,c`.
pub fn parse_etas(list: &str) -> Result<Vec<f64>> {
    let bad = || usage(format!("cannot parse efficiency list {list:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    if let Some((start, rest)) = list.split_once(':') {
        let (stop, step) = rest.split_once(':').ok_or_else(bad)?;
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Rounded so that 0.1:1.0:0.1 yields 0.3 rather than 0.30000000000000004.
        Ok((0..count)
            .map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12)
            .collect())
    } else {
        list.split(',').map(num).collect()
    }
}
