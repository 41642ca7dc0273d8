//! `arte`: command-line driver for the full and adaptive solvers.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] arte_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) if e.is_numerical() => "numerical",
            CliError::Core(arte_core::Error::Io(_)) | CliError::File { .. } => "io",
            _ => "config",
        }
    }

    fn exit_code(&self) -> u8 {
        match self.kind() {
            "numerical" => 3,
            "io" => 4,
            _ => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "arte", version, about = "Tailored finite point solvers for the 2D discrete-ordinate RTE")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Problem selection shared by `solve` and `compare`.
#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    /// Built-in problem: lattice, buffer_zone, constant.
    #[arg(long)]
    pub problem: Option<String>,
    /// JSON problem file; flags given alongside override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cells per side.
    #[arg(long = "I")]
    pub cells: Option<usize>,
    /// Quadrature order (even).
    #[arg(long = "N")]
    pub order: Option<usize>,
    /// Extra outputs: phi, psi, selection, matrix, eigen, quadrature.
    #[arg(long, value_delimiter = ',')]
    pub outputs: Vec<String>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem with the full and/or adaptive scheme.
    Solve {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Truncation tolerance of the adaptive scheme.
        #[arg(long)]
        delta: Option<f64>,
        /// Run only the full scheme.
        #[arg(long, conflicts_with = "adaptive")]
        full: bool,
        /// Run only the adaptive scheme.
        #[arg(long)]
        adaptive: bool,
        /// Sample both solutions along a segment: x0,y0,x1,y1,n.
        #[arg(long, value_parser = commands::parse_probe_line)]
        probe_line: Option<commands::ProbeLine>,
    },
    /// Error, compression ratio and a posteriori bound over a list of tolerances.
    Compare {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_delimiter = ',')]
        deltas: Vec<f64>,
    },
    /// Rank-ratio and ||E^-1||_2 studies on two-cell configurations.
    VerifyAssumptions {
        /// Values of M (4M ordinates).
        #[arg(long = "M", value_delimiter = ',', default_values_t = [3, 6])]
        m: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.3, 0.5, 0.7, 0.9, 0.99])]
        gammas: Vec<f64>,
        /// Anisotropy pairs `g_minus:g_plus`.
        #[arg(long, value_delimiter = ',', default_value = "0:0,0.3:0,0.2:-0.3", value_parser = commands::parse_g_pair)]
        g_pairs: Vec<(f64, f64)>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Homogeneous slab with mode truncation profiles.
    Slab(commands::SlabArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let threads = rayon::current_num_threads();
    match cli.command {
        Command::Solve {
            problem,
            delta,
            full,
            adaptive,
            probe_line,
        } => commands::solve(&problem, delta, full, adaptive, probe_line, threads),
        Command::Compare { problem, deltas } => commands::compare(&problem, &deltas, threads),
        Command::VerifyAssumptions { m, gammas, g_pairs, out } => {
            commands::verify_assumptions(&m, &gammas, &g_pairs, &out, threads)
        }
        Command::Slab(args) => commands::slab(&args, threads),
    }
}

fn report(kind: &str, message: String, code: u8) -> ExitCode {
    let body = serde_json::json!({
        "error": { "kind": kind, "message": message, "exit_code": code }
    });
    eprintln!("{body}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ARTE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report("usage", e.to_string().trim_end().to_string(), 2),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e.kind(), e.to_string(), e.exit_code()),
    }
}
