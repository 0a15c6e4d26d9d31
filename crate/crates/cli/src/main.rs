use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pcac_cli::config::{self, Overrides};
use pcac_cli::{plot, roa, scenario, CliError};

/// Predictive cost adaptive control of Lur'e systems with instantaneous
/// absolute-stability certification.
#[derive(Parser)]
#[command(name = "pcac", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonFlags {
    /// Random seed override (dither generation).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of simulation steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Control activation step.
    #[arg(long)]
    kc: Option<usize>,
    /// Frequency-grid point count for certificate sweeps.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Output directory for artifacts.
    #[arg(long)]
    out: Option<String>,
    /// Emit SVG plots after the run.
    #[arg(long)]
    emit_plots: bool,
    /// Evaluate certificates every k-th step.
    #[arg(long)]
    cert_every: Option<usize>,
}

impl CommonFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            steps: self.steps,
            kc: self.kc,
            grid_points: self.grid_points,
            out: self.out.clone(),
            emit_plots: self.emit_plots,
            cert_every: self.cert_every,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop scenario and write the per-step table and summary.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Sweep a grid of initial conditions and classify convergence.
    Roa {
        config: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Evaluate both certificates at a single snapshot step.
    Certify {
        config: PathBuf,
        /// Step at which to report the certificates.
        #[arg(long)]
        snapshot: usize,
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Render plots from an artifacts directory.
    Plot { artifacts_dir: PathBuf },
}

fn load(config: &PathBuf, flags: &CommonFlags) -> Result<config::ScenarioConfig, CliError> {
    let mut cfg = config::load(config)?;
    flags.overrides().apply(&mut cfg);
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, flags } => {
            let cfg = load(&config, &flags)?;
            let artifacts = scenario::run_scenario(&cfg)?;
            let paths = scenario::write_artifacts(&cfg, &artifacts)?;
            for p in &paths {
                println!("wrote {}", p.display());
            }
            if cfg.emit_plots {
                for p in plot::emit_plots(&cfg.out)? {
                    println!("wrote {}", p.display());
                }
            }
            let s = &artifacts.summary;
            println!(
                "steps = {}, final |y| = {:.6e}, first all-pass = {:?}, certified from = {:?}, wall = {} ms",
                s.steps, s.final_abs_y, s.first_all_pass, s.certified_from, s.wall_ms
            );
            Ok(())
        }
        Command::Roa { config, flags } => {
            let cfg = load(&config, &flags)?;
            let points = roa::roa_sweep(&cfg)?;
            let path = roa::write_roa(&cfg, &points)?;
            let converged = points.iter().filter(|p| p.converged).count();
            println!(
                "wrote {} ({} of {} points converged)",
                path.display(),
                converged,
                points.len()
            );
            Ok(())
        }
        Command::Certify {
            config,
            snapshot,
            flags,
        } => {
            let mut cfg = load(&config, &flags)?;
            cfg.steps = snapshot;
            cfg.cert_start = snapshot;
            cfg.cert_every = 1;
            let artifacts = scenario::run_scenario(&cfg)?;
            let row = artifacts
                .rows
                .iter()
                .rev()
                .find(|r| r.cert.is_some())
                .ok_or_else(|| {
                    CliError::Config(format!("no certificate evaluated at step {snapshot}"))
                })?;
            let c = row.cert.as_ref().unwrap();
            let report = serde_json::json!({
                "k": row.k,
                "alpha_cc": c.alpha_cc,
                "beta_cc": c.beta_cc,
                "cc1_pass": c.cc1_pass,
                "cc2_pass": c.cc2_pass,
                "zeta1": c.zeta1,
                "zeta2": c.zeta2,
                "zeta3_min_eig": c.zeta3_min_eig,
                "alpha_tc": c.alpha_tc,
                "beta_tc": c.beta_tc,
                "tc1_pass": c.tc1_pass,
                "tc2_pass": c.tc2_pass,
                "tc3_pass": c.tc3_pass,
                "flagged": c.flagged,
            });
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(())
        }
        Command::Plot { artifacts_dir } => {
            for p in plot::emit_plots(&artifacts_dir)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
