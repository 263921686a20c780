use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

/// Bad flag values or config contents; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Squeezed-Fock superposition codes: KL scans, QEC cycles, gate synthesis.
#[derive(Parser, Debug)]
#[command(name = "sqfock", version, about)]
struct Cli {
    /// Worker threads for parallel scans (default: available parallelism).
    #[arg(long, global = true, env = "SQFOCK_THREADS")]
    threads: Option<usize>,

    /// JSON config file; flags take precedence over its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// K_er over a squeezing grid, one CSV row per (n, r).
    KlScan(commands::KlScanArgs),
    /// Codeword parameters and KL numbers for one code.
    CodeInfo(commands::CodeInfoArgs),
    /// Squeezed-cat δ matrix elements, closed form and direct.
    CatDelta(commands::CatDeltaArgs),
    /// Logical fidelity over repeated noise + recovery cycles.
    QecSim(commands::QecSimArgs),
    /// Variational synthesis of the logical Z.
    OptimizeZ(commands::OptimizeZArgs),
    /// GRAPE pulses for the recovery unitary.
    GrapeRun(commands::GrapeArgs),
    /// Wigner function of the codewords on a square grid.
    Wigner(commands::WignerArgs),
    /// Numerical acceptance checks and invariant suites.
    Validate(commands::ValidateArgs),
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            anyhow::bail!(UsageError("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let cfg = cli.config.as_deref();
    match cli.command {
        Command::KlScan(a) => commands::kl_scan(a, cfg),
        Command::CodeInfo(a) => commands::code_info(a, cfg),
        Command::CatDelta(a) => commands::cat_delta(a, cfg),
        Command::QecSim(a) => commands::qec_sim(a, cfg),
        Command::OptimizeZ(a) => commands::optimize_z(a, cfg),
        Command::GrapeRun(a) => commands::grape_run(a, cfg),
        Command::Wigner(a) => commands::wigner(a, cfg),
        Command::Validate(a) => commands::validate(a, cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            let usage = e.downcast_ref::<UsageError>().is_some()
                || matches!(e.downcast_ref::<sqfock::Error>(), Some(sqfock::Error::InvalidArgument(_)));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
