use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use frustra_core::mps::{StopRule, TauSchedule, TrotterOrder};
use frustra_core::{ChainSpec, Field};

use crate::HarnessError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "FRUSTRA_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "frustra-out";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Count,
    PhaseDiagram,
    SolveExact,
    Product,
    Tebd,
    OracleCheck,
    AppendixVerify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum FieldArg {
    Real,
    #[default]
    Complex,
}

impl From<FieldArg> for Field {
    fn from(f: FieldArg) -> Self {
        match f {
            FieldArg::Real => Field::Real,
            FieldArg::Complex => Field::Complex,
        }
    }
}

/// Experiments on random frustration-free projector chains.
#[derive(Debug, Clone, Parser)]
#[command(name = "frustra", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub mode: Mode,
    /// Local dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Projector rank.
    #[arg(long)]
    pub r: Option<usize>,
    /// Number of sites.
    #[arg(long)]
    pub n: Option<usize>,
    /// Largest local dimension in the phase diagram.
    #[arg(long, default_value_t = 6)]
    pub d_max: usize,
    /// Bond-dimension caps, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub chi: Vec<usize>,
    /// First master seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of consecutive master seeds starting at `--seed`.
    #[arg(long, default_value_t = 1)]
    pub seeds: u64,
    /// Imaginary-time step sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.1,0.02")]
    pub tau_schedule: Vec<f64>,
    #[arg(long, default_value_t = 5000)]
    pub max_sweeps: usize,
    /// Relative energy change treated as converged.
    #[arg(long, default_value_t = 1e-9)]
    pub stop_tol: f64,
    /// Relative singular-value threshold for numerical rank.
    #[arg(long, default_value_t = frustra_core::exact_solver::DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
    /// Symmetric second-order splitting instead of odd-then-even.
    #[arg(long)]
    pub second_order: bool,
    #[arg(long, env = OUT_DIR_ENV, default_value = DEFAULT_OUT_DIR)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t)]
    pub field: FieldArg,
    #[arg(long, value_enum, default_value_t)]
    pub format: OutputFormat,
}

/// A fully validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Present for every mode except the phase diagram.
    pub chain: Option<ChainSpec>,
    pub d_max: usize,
    pub chi_list: Vec<usize>,
    pub seeds: Vec<u64>,
    pub schedule: TauSchedule,
    pub stop: StopRule,
    pub trotter: TrotterOrder,
    pub rank_tol: f64,
    pub field: Field,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self, HarnessError> {
        let chain = match cli.mode {
            Mode::PhaseDiagram => None,
            _ => {
                let d = cli.d.ok_or_else(|| invalid("--d is required"))?;
                let r = cli.r.ok_or_else(|| invalid("--r is required"))?;
                let n = cli.n.ok_or_else(|| invalid("--n is required"))?;
                if n < 2 && cli.mode != Mode::Count {
                    return Err(invalid("--n must be at least 2"));
                }
                // Counting accepts any length; the remaining checks apply to every mode.
                let spec = ChainSpec::new(n.max(2), d, r, cli.seed).map_err(|e| invalid(e.to_string()))?;
                Some(ChainSpec { n_sites: n, ..spec })
            }
        };
        if cli.mode == Mode::PhaseDiagram && cli.d_max < 2 {
            return Err(invalid("--d-max must be at least 2"));
        }
        if cli.mode == Mode::Tebd {
            if cli.chi.is_empty() {
                return Err(invalid("--chi is required for tebd"));
            }
            if cli.chi.contains(&0) {
                return Err(invalid("--chi entries must be positive"));
            }
        }
        if cli.tau_schedule.is_empty() || cli.tau_schedule.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(invalid("--tau-schedule needs nonnegative finite steps"));
        }
        if !(cli.stop_tol.is_finite() && cli.stop_tol >= 0.0) {
            return Err(invalid("--stop-tol must be a nonnegative number"));
        }
        if !(cli.rank_tol.is_finite() && cli.rank_tol > 0.0) {
            return Err(invalid("--rank-tol must be positive"));
        }
        if cli.seeds == 0 {
            return Err(invalid("--seeds must be positive"));
        }
        Ok(Self {
            mode: cli.mode,
            chain,
            d_max: cli.d_max,
            chi_list: cli.chi.clone(),
            seeds: (0..cli.seeds).map(|i| cli.seed.wrapping_add(i)).collect(),
            schedule: TauSchedule { taus: cli.tau_schedule.clone(), ..TauSchedule::default() },
            stop: StopRule { rel_tol: cli.stop_tol, max_sweeps: cli.max_sweeps, ..StopRule::default() },
            trotter: if cli.second_order { TrotterOrder::Second } else { TrotterOrder::First },
            rank_tol: cli.rank_tol,
            field: cli.field.into(),
            out_dir: cli.out.clone(),
            format: cli.format,
        })
    }

    /// The chain for the configured mode; only the phase diagram has none.
    pub fn chain(&self) -> ChainSpec {
        self.chain.expect("mode has a chain")
    }

    pub fn chain_with_seed(&self, seed: u64) -> ChainSpec {
        ChainSpec { seed, ..self.chain() }
    }
}
