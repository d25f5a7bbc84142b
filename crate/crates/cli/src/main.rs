use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hydrofriction_cli::checks::validation_suite;
use hydrofriction_cli::commands::*;
use hydrofriction_cli::config::{Flags, RunConfig};
use hydrofriction_cli::output::{render, write_text};
use hydrofriction_cli::sweep::cmd_sweep;
use hydrofriction_cli::{CliError, Result};

const AFTER_HELP: &str = "\
Quadrature tolerances: relative 1e-8 for one-dimensional integrals, 1e-6 per
level of the nested two-photon integral; --rel-tol overrides both.

Config files hold `key = value unit` lines with SI units, e.g.
  omega_p = 1e16 rad/s
  beta = 1e6 m/s
  z = 10 nm
Keys match the long flags with `_` for `-`. Flags override the file.

HYDROFRICTION_THREADS bounds the worker pool.

Exit codes: 0 success, 1 config or I/O error, 2 numerical non-convergence,
3 validation failure.";

#[derive(Parser)]
#[command(name = "hydrofriction", version, about = "Quantum friction above a hydrodynamic-model metal")]
#[command(after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand)]
enum Command {
    /// Second-order friction, normalized and in newtons
    Force2,
    /// Second-order friction in the zero-sound-speed limit
    Nondispersive,
    /// Ground-state decay rate
    Gamma,
    /// Ground-state level shift
    Shift,
    /// Whether two surface modes can reach the two-photon energy shell
    Resonance,
    /// Fourth-order force: secular, shift and two-photon terms
    Force4,
    /// Friction-versus-velocity curves, one CSV per (omega_tilde, z_tilde)
    Fig2,
    /// Table of all observables over (u, omega_tilde, z_tilde); resumable
    Sweep {
        /// Pair the i-th list entries instead of forming the Cartesian product
        #[arg(long)]
        zip: bool,
        /// Also compute the two-photon term (seconds per point)
        #[arg(long)]
        with_force4: bool,
    },
    /// Cross-check the main paths against the independent oracles
    Validate {
        /// Skip the fourth-order Monte Carlo comparison
        #[arg(long)]
        skip_force4: bool,
    },
}

fn emit(cfg: &RunConfig, rec: Record) -> Result<()> {
    if let Some(ws) = rec.get("warnings").and_then(|w| w.as_array()) {
        for w in ws {
            eprintln!("warning: {}", w.as_str().unwrap_or_default());
        }
    }
    let converged = rec.get("converged").and_then(|c| c.as_bool()).unwrap_or(true);
    write_text(cfg.out.as_deref(), &render(&rec, cfg.format)?)?;
    if converged {
        Ok(())
    } else {
        Err(CliError::NotConverged("quadrature missed its tolerance; see the record".into()))
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = RunConfig::from_flags(&cli.flags)?;
    match cli.command {
        Command::Force2 => emit(&cfg, cmd_force2(&cfg)?),
        Command::Nondispersive => emit(&cfg, cmd_nondispersive(&cfg)?),
        Command::Gamma => emit(&cfg, cmd_gamma(&cfg)?),
        Command::Shift => emit(&cfg, cmd_shift(&cfg)?),
        Command::Resonance => emit(&cfg, cmd_resonance(&cfg)?),
        Command::Force4 => emit(&cfg, cmd_force4(&cfg)?),
        Command::Fig2 => {
            for path in cmd_fig2(&cfg)? {
                eprintln!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Sweep { zip, with_force4 } => {
            let s = cmd_sweep(&cfg, zip, with_force4, |w| eprintln!("warning: {w}"))?;
            eprintln!("{} rows written, {} kept from earlier runs", s.written, s.skipped);
            if s.unconverged > 0 {
                return Err(CliError::NotConverged(format!("{} rows did not converge", s.unconverged)));
            }
            Ok(())
        }
        Command::Validate { skip_force4 } => {
            let outcomes = validation_suite(cfg.seed, skip_force4, cfg.mc_samples, |c| println!("{}", c.line()));
            let failed: Vec<String> = outcomes
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("[{}] {}", c.id, c.title))
                .collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(CliError::Validation(failed.join(", ")))
            }
        }
    }
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
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
