use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "dicke", version, about = "Mean-field and small-N simulations of the imbalanced spin-1 Dicke model")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output file; tables go to stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps, boundaries and comparisons.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub workers: u32,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

/// Coupling overrides in kHz, applied on top of the configured model.
#[derive(Debug, Args, Default)]
pub struct Couplings {
    #[arg(long, value_name = "KHZ")]
    pub lambda_plus: Option<f64>,
    #[arg(long, value_name = "KHZ")]
    pub lambda_minus: Option<f64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Initial {
    /// Small random kick away from the normal state.
    Perturbed,
    Normal,
    Inverted,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Kind {
    Normal,
    Inverted,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Derive model parameters and diagnostics from the [physical] section.
    Calibrate,
    /// Integrate one mean-field trajectory.
    Trace {
        #[command(flatten)]
        couplings: Couplings,
        #[arg(long, value_enum, default_value_t = Initial::Perturbed)]
        initial: Initial,
        #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
        format: TableFormat,
    },
    /// Label a trajectory table, or integrate and label the configured model.
    Classify {
        /// Trajectory table written by `trace`.
        #[arg(long, value_name = "FILE")]
        trajectory: Option<PathBuf>,
        #[command(flatten)]
        couplings: Couplings,
    },
    /// Instability threshold of a trivial fixed point along each ratio.
    Boundary {
        #[arg(long, value_enum, default_value_t = Kind::Normal)]
        kind: Kind,
        /// Comma-separated ratios; defaults to the sweep ratio axis.
        #[arg(long, value_delimiter = ',')]
        ratios: Option<Vec<f64>>,
        /// Bisection tolerance in kHz.
        #[arg(long, default_value_t = 0.01)]
        tol_khz: f64,
    },
    /// Sweep the (ratio, λ_max) grid and write a phase map.
    Sweep {
        /// Checkpoint file updated while the sweep runs.
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        /// Continue from a partial or complete map.
        #[arg(long, value_name = "FILE")]
        resume: Option<PathBuf>,
        /// Record start and finish times in the map.
        #[arg(long)]
        timestamp: bool,
    },
    /// Draw a phase map as PPM or SVG, chosen by the output extension.
    Render {
        input: PathBuf,
        output: PathBuf,
        /// Pixels per cell edge.
        #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=64))]
        block: u32,
    },
    /// Evolve the master equation and write expectation values.
    Quantum {
        #[command(flatten)]
        couplings: Couplings,
        /// Atom number; overrides [quantum].
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        n_max: Option<u32>,
        /// Pure initial state as a JSON list of `[index, re, im]` triples, with
        /// basis index `(N − m)(n_max + 1) + n`. Defaults to all spins up and
        /// an empty cavity.
        #[arg(long, value_name = "FILE")]
        initial_state: Option<PathBuf>,
    },
    /// Photon plateau of the master equation against the mean field.
    Compare {
        #[command(flatten)]
        couplings: Couplings,
        /// Atom numbers as `a..b` or a comma-separated list.
        #[arg(long, default_value = "1..6")]
        n: String,
        /// Fixed Fock cutoff; defaults to growing with N.
        #[arg(long)]
        n_max: Option<u32>,
        /// Extra Fock states for the truncation check; 0 skips it.
        #[arg(long, default_value_t = 4)]
        truncation_step: u32,
    },
}

/// Parse `a..b` (inclusive) or `a,b,c`.
pub fn parse_atom_numbers(s: &str) -> Result<Vec<u32>, String> {
    let bad = || format!("invalid atom numbers `{s}`: expected `a..b` or a comma-separated list");
    let v: Vec<u32> = if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        (a..=b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if v.is_empty() || v.contains(&0) {
        return Err(bad());
    }
    Ok(v)
}
