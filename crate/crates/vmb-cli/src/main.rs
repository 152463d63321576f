use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vmb_cli::config::{parse_config, RunConfig};
use vmb_cli::run::{into_status, run, Command};
use vmb_cli::{io_error, CliResult};

#[derive(Parser)]
#[command(name = "vmb", about = "Hilbert-expansion runs for the two-species VMB system")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
    /// `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed` in the config)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; the solvers run on one thread, so only 1 is accepted
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Transport coefficients and Ohm constants
    Coeffs,
    /// Limiting fluid run
    Fluid,
    /// Fluid run with the first-order corrector
    Corrector,
    /// Hierarchy identities of the expansion at t = 0
    Expansion,
    /// Residual of the scaled system over a range of eps
    ResidualSweep,
    /// Invariant suite; exits nonzero on any failure
    Check,
}

fn load(args: &Args) -> CliResult<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => parse_config(&std::fs::read_to_string(p).map_err(io_error(p))?)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &args.out {
        cfg.out_dir = o.clone();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.threads != 1 {
        return Err(vmb_cli::CliError::Config { line: 0, msg: format!("--threads {} unsupported", args.threads) });
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let cmd = match args.cmd {
        Cmd::Coeffs => Command::Coeffs,
        Cmd::Fluid => Command::Fluid,
        Cmd::Corrector => Command::Corrector,
        Cmd::Expansion => Command::Expansion,
        Cmd::ResidualSweep => Command::ResidualSweep,
        Cmd::Check => Command::Check,
    };
    let result = load(&args).and_then(|cfg| {
        let out = run(&cfg, cmd)?;
        for (k, v) in &out.summary {
            println!("{k} = {v:.16e}");
        }
        for a in &out.artifacts {
            eprintln!("wrote {}", a.display());
        }
        into_status(&out)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
