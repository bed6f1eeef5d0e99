mod commands;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use detbundle::operator::{DEFAULT_DET_TOL, DEFAULT_RANK_TOL};

#[derive(Parser, Debug)]
#[command(name = "detbundle", version, about = "Fredholm determinants, determinant lines and Souriau maps")]
struct Cli {
    #[command(flatten)]
    config: RunConfig,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every command.
#[derive(Args, Debug, Clone)]
pub struct RunConfig {
    /// Relative singular-value cutoff for kernels.
    #[arg(long, global = true, default_value_t = DEFAULT_RANK_TOL, value_parser = positive)]
    pub tol_rank: f64,
    /// Relative tolerance for determinant comparisons.
    #[arg(long, global = true, default_value_t = DEFAULT_DET_TOL, value_parser = positive)]
    pub tol_det: f64,
    /// Seed for randomized sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write overlap samples as CSV to this path.
    #[arg(long, global = true, value_name = "PATH")]
    pub emit_csv: Option<PathBuf>,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(x),
        Ok(_) => Err("must be a positive number".into()),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Complex,
    Real,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selector {
    Quillen,
    #[value(name = "kernel_det", alias = "kernel-det")]
    KernelDet,
    #[value(name = "cokernel_det", alias = "cokernel-det")]
    CokernelDet,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    #[value(name = "self_adjoint", alias = "self-adjoint")]
    SelfAdjoint,
    Unitary,
}

#[derive(Args, Debug, Clone)]
pub struct FamilyArgs {
    /// Family spec file.
    pub file: Option<PathBuf>,
    /// Builtin family name, used when no file is given.
    #[arg(long, value_name = "NAME")]
    pub family: Option<String>,
    /// Grid size: rows (t) and columns (s).
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub grid: Option<Vec<usize>>,
    /// Truncation of the spectral-flow family.
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fredholm determinant of a block operator.
    Fdet { operator: PathBuf },
    /// Cocycle defect of g_{A,C} - g_{A,B} g_{B,C}; without files, a seeded random sweep.
    Cocycle {
        files: Vec<PathBuf>,
        #[arg(long, default_value_t = 500)]
        trials: usize,
    },
    /// Image of a section germ in the kernel/cokernel line, with the canonical regularizer.
    Fiber { operator: PathBuf, germ: PathBuf },
    /// Souriau map of two Lagrangian frames and the associated kernel dimensions.
    Souriau { lambda: PathBuf, mu: PathBuf },
    /// Maslov index of a closed Lagrangian path.
    Maslov { lambda: PathBuf, path: PathBuf },
    /// The four chart determinants for a transversal triple.
    Prop5 {
        theta: PathBuf,
        theta2: PathBuf,
        mu: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Complex)]
        mode: Mode,
    },
    /// Chern number of a sphere family.
    Chern {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_enum, default_value_t = Selector::Quillen)]
        selector: Selector,
    },
    /// Point on the path from Id to -Id through a self-adjoint operator.
    Alpha {
        operator: PathBuf,
        #[arg(long)]
        t: f64,
        #[arg(long, value_enum, default_value_t = Convention::SelfAdjoint)]
        convention: Convention,
    },
    /// Holonomy of the determinant line around a loop family.
    Holonomy {
        #[command(flatten)]
        family: FamilyArgs,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::dispatch(&cli.command, &cli.config) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
