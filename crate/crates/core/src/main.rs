use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mpsgen::harness::{self, Command, ConfigOverrides, RunConfig, TrajectorySpec};
use mpsgen::{Error, Result};

#[derive(Parser)]
#[command(name = "mpsgen", version, about = "Tangent-space generators for uniform MPS and a Floquet laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Leakage decay of the non-Hermitian generator against its range.
    DecayScan(Flags),
    /// Distance between successive complement-optimized densities.
    OperatorConvergence(Flags),
    /// Fidelity traces of the Hermitian drive along a loop.
    Drive(Flags),
    /// Floquet spectrum, eigenstate diagnostics and level statistics.
    Floquet(Flags),
    /// Ingredients and verdict of the leakage bound.
    BoundAudit(Flags),
}

#[derive(Args)]
struct Flags {
    /// builtin, rotation, probe, or a path to a Fourier .json / sampled .csv loop.
    #[arg(long)]
    traj: Option<String>,
    /// Ranges, e.g. `3,5,7` or `3..9` (inclusive).
    #[arg(long)]
    r: Option<String>,
    /// Chain lengths, same syntax as --r.
    #[arg(long = "N")]
    n: Option<String>,
    /// Time intervals per period.
    #[arg(long)]
    grid: Option<usize>,
    /// Gaussian variance of the smoothed density of states.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Absolute per-step propagator tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Time on the loop for point-wise commands.
    #[arg(long)]
    t: Option<f64>,
    /// Range of the placement sweep in decay-scan (default: largest --r).
    #[arg(long)]
    sweep_r: Option<usize>,
    #[arg(long)]
    optimize_alpha: bool,
    #[arg(long)]
    optimize_complement: bool,
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Error::Config(format!("cannot parse '{part}' as a range list"));
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
            if hi < lo {
                return Err(bad());
            }
            out.extend(lo..=hi);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("empty list '{s}'")));
    }
    Ok(out)
}

fn overrides(f: Flags) -> Result<ConfigOverrides> {
    Ok(ConfigOverrides {
        traj: f.traj.as_deref().map(str::parse::<TrajectorySpec>).transpose()?,
        r: f.r.as_deref().map(parse_list).transpose()?,
        n: f.n.as_deref().map(parse_list).transpose()?,
        grid: f.grid,
        sigma2: f.sigma2,
        tol: f.tol,
        out: f.out,
        seed: f.seed,
        optimize_alpha: f.optimize_alpha,
        optimize_complement: f.optimize_complement,
        t: f.t,
        sweep_r: f.sweep_r,
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Sub::DecayScan(f) => (Command::DecayScan, f),
        Sub::OperatorConvergence(f) => (Command::OperatorConvergence, f),
        Sub::Drive(f) => (Command::Drive, f),
        Sub::Floquet(f) => (Command::Floquet, f),
        Sub::BoundAudit(f) => (Command::BoundAudit, f),
    };
    let result = overrides(flags).and_then(|o| RunConfig::new(command, o)).and_then(|cfg| harness::run(&cfg));
    match result {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(harness::exit_code(&err) as u8)
        }
    }
}
