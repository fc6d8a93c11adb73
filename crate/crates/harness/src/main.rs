use std::path::PathBuf;
use std::process::ExitCode;

use bea_harness::config::ExperimentConfig;
use bea_harness::experiments::{run_bea_verify, run_convergence, run_drift, run_integrate, run_projection_scan, Setup};
use bea_harness::plots::emit_plots;
use bea_harness::{HarnessError, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "gbea", version, about = "Symplectic Runge-Kutta and backward error analysis experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the initial data and auxiliary randomness.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate and record H along the trajectory.
    Integrate(Common),
    /// Drift of H and of the modified Hamiltonian.
    Drift(Common),
    /// Global error against a Gauss-3 reference.
    Converge(Common),
    /// Projection error against the cutoff.
    Projscan(Common),
    /// Backward-error verification tables.
    Bea(Common),
    /// Plot scripts for existing CSV files.
    Plots {
        /// CSV files to plot.
        #[arg(required = true)]
        csv: Vec<PathBuf>,
        /// Directory for the scripts (default: next to the first CSV).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        verbose: bool,
    },
}

fn setup(c: &Common) -> Result<Setup> {
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = &c.out {
        cfg.output.dir = out.clone();
    }
    Setup::new(cfg, c.verbose)
}

fn run(cli: Cli) -> Result<Vec<PathBuf>> {
    match cli.command {
        Command::Plots { csv, out, verbose } => {
            let dir = match out {
                Some(d) => d,
                None => csv[0].parent().map(|p| p.to_path_buf()).unwrap_or_default(),
            };
            let written = emit_plots(&csv, &dir)?;
            if verbose {
                eprintln!("wrote {} scripts", written.len());
            }
            Ok(written)
        }
        Command::Integrate(c) => {
            let s = setup(&c)?;
            Ok(vec![run_integrate(&s)?.write(&s.cfg.output.dir, &s.prov)?])
        }
        Command::Drift(c) => {
            let s = setup(&c)?;
            Ok(vec![run_drift(&s)?.write(&s.cfg.output.dir, &s.prov)?])
        }
        Command::Converge(c) => {
            let s = setup(&c)?;
            Ok(vec![run_convergence(&s)?.write(&s.cfg.output.dir, &s.prov)?])
        }
        Command::Projscan(c) => {
            let s = setup(&c)?;
            let (scan, fit) = run_projection_scan(&s)?;
            Ok(vec![
                scan.write(&s.cfg.output.dir, &s.prov)?,
                fit.write(&s.cfg.output.dir, &s.prov)?,
            ])
        }
        Command::Bea(c) => {
            let s = setup(&c)?;
            let report = run_bea_verify(&s)?;
            report
                .tables()
                .iter()
                .map(|t| t.write(&s.cfg.output.dir, &s.prov))
                .collect()
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gbea: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
