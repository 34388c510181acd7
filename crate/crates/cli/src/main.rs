//! `ptables`: validate, decompose and analyze probability tables.
//!
//! Exit codes: 0 on success, 1 when the input is well formed but violates a
//! domain rule (invalid table, singular basis, impossible data), 2 when the
//! input cannot be read or parsed.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ptables::{Tolerances, ValueMode};

#[derive(Debug, Parser)]
#[command(name = "ptables", version, about = "Probability tables and their vector representation")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Arithmetic: exact rationals or floating point. Defaults to the
    /// input file's own mode.
    #[arg(long, global = true, value_parser = parse_mode)]
    pub mode: Option<ValueMode>,
    /// Singular-value cutoff for the float rank [default: max(L,M) * sigma_max * eps]
    #[arg(long, global = true)]
    pub tol_rank: Option<f64>,
    /// Allowed float reconstruction error
    #[arg(long, global = true, default_value_t = Tolerances::default().rec)]
    pub tol_rec: f64,
    /// Allowed float normalization and range slack
    #[arg(long, global = true, default_value_t = Tolerances::default().norm)]
    pub tol_norm: f64,
    /// Float geometry tolerance
    #[arg(long, global = true, default_value_t = Tolerances::default().geo)]
    pub tol_geo: f64,
    /// Hermiticity, trace and POVM completeness tolerance
    #[arg(long, global = true, default_value_t = Tolerances::default().herm)]
    pub tol_herm: f64,
    /// Allowed negative eigenvalue of states and effects
    #[arg(long, global = true, default_value_t = Tolerances::default().psd)]
    pub tol_psd: f64,
    /// Seed for simulated data and random models
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Print the summary as JSON
    #[arg(long, global = true)]
    pub json: bool,
}

impl GlobalOpts {
    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            norm: self.tol_norm,
            rank: self.tol_rank,
            rec: self.tol_rec,
            geo: self.tol_geo,
            herm: self.tol_herm,
            psd: self.tol_psd,
            ..Tolerances::default()
        }
    }
}

fn parse_mode(s: &str) -> Result<ValueMode, String> {
    s.parse()
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a table file and list every violated invariant
    Validate {
        table: PathBuf,
    },
    /// Factor a table into preparation and result vectors
    Decompose {
        table: PathBuf,
        /// `identity`, `paper-example` or a JSON file holding the K x K matrix
        #[arg(long, default_value = "identity")]
        basis: String,
        /// Decomposition file to write; printed to stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild the table from a decomposition file
    Reconstruct {
        decomposition: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sum vectors, hyperplane check and hull export of a decomposition
    Geometry {
        decomposition: PathBuf,
        /// Output prefix; writes PREFIX.json and PREFIX.off
        #[arg(long)]
        out: PathBuf,
    },
    /// Bayesian inference of an unknown preparation
    Tomography(commands::TomographyArgs),
    /// Generate a table from a quantum model
    Quantum(commands::QuantumArgs),
    /// Turn raw trial counts into a table of frequencies
    FromCounts {
        counts: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = &cli.global;
    let result = match &cli.command {
        Command::Validate { table } => commands::validate(g, table),
        Command::Decompose { table, basis, out } => commands::decompose(g, table, basis, out.as_deref()),
        Command::Reconstruct { decomposition, out } => commands::reconstruct(g, decomposition, out.as_deref()),
        Command::Geometry { decomposition, out } => commands::geometry(g, decomposition, out),
        Command::Tomography(args) => commands::tomography(g, args),
        Command::Quantum(args) => commands::quantum(g, args),
        Command::FromCounts { counts, out } => commands::from_counts(g, counts, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
