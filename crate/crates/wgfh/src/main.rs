use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wgfh::{report, run, ExperimentConfig, Kind, RunError};

#[derive(Parser)]
#[command(name = "wgfh", version, about = "Homogenization experiments for Fokker-Planck gradient flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to out/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "WGFH_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Forward solve with convergence to the limit flow.
    Solve(RunArgs),
    /// Effective tensors from the cell problem.
    Effective(RunArgs),
    /// Energy-dissipation traces.
    Edi(RunArgs),
    /// Lower-bound sweep over eps.
    Sweep(RunArgs),
    /// Distances and Wasserstein comparisons.
    Metric(RunArgs),
    /// Recovery sequences.
    Gamma(RunArgs),
    /// Geodesics in the checkerboard medium.
    Checkerboard(RunArgs),
    /// Re-verify a run directory.
    Report { dir: PathBuf },
}

fn execute(kind: Kind, args: RunArgs) -> Result<bool, RunError> {
    if let Some(k) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| RunError::Config {
                pointer: "--threads".into(),
                message: e.to_string(),
            })?;
    }
    let cfg = ExperimentConfig::load(&args.config)?;
    let out = args.out.unwrap_or_else(|| PathBuf::from("out").join(cfg.name(kind)));
    let m = run(&cfg, kind, &out)?;
    for c in &m.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    println!("wrote {} files to {}", m.artifacts.len() + 1, out.display());
    Ok(m.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Report { dir } => report(&dir).map(|r| {
            print!("{}", r.text);
            r.passed()
        }),
        Command::Solve(a) => execute(Kind::Solve, a),
        Command::Effective(a) => execute(Kind::Effective, a),
        Command::Edi(a) => execute(Kind::Edi, a),
        Command::Sweep(a) => execute(Kind::Sweep, a),
        Command::Metric(a) => execute(Kind::Metric, a),
        Command::Gamma(a) => execute(Kind::Gamma, a),
        Command::Checkerboard(a) => execute(Kind::Checkerboard, a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
