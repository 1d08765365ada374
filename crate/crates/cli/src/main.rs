use std::path::PathBuf;
use std::process::ExitCode;

use apsipic::experiments::{
    load_config, preset, run_benchmark, run_diocotron, write_benchmark, ExperimentConfig,
};
use apsipic::{Error, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "apsipic", version, about = "Stochastic AP particle-in-cell experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single-particle error studies (ε sweeps and weak order in Δt).
    Benchmark(Common),
    /// Full PIC run of the diocotron instability.
    Diocotron {
        #[command(flatten)]
        common: Common,
        /// Override the number of particles.
        #[arg(long)]
        particles: Option<usize>,
    },
    /// List the shipped presets.
    Presets,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Name of a shipped preset.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

impl Common {
    fn load(&self, expected: &str) -> Result<ExperimentConfig> {
        let mut cfg = match (&self.config, &self.preset) {
            (Some(path), _) => load_config(path)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => unreachable!("clap requires one of --config/--preset"),
        };
        if cfg.kind() != expected {
            return Err(Error::Config {
                field: "experiment".into(),
                message: format!("config describes a {} run, not {expected}", cfg.kind()),
            });
        }
        if let Some(seed) = self.seed {
            match &mut cfg {
                ExperimentConfig::Benchmark(c) => c.seed = seed,
                ExperimentConfig::Diocotron(c) => c.seed = seed,
            }
        }
        Ok(cfg)
    }

    fn init_threads(&self) -> Result<()> {
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(Error::Config {
                    field: "threads".into(),
                    message: "must be at least 1".into(),
                });
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::Internal(e.to_string()))?;
        }
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Presets => {
            for name in apsipic::experiments::preset_names() {
                println!("{name}");
            }
        }
        Command::Benchmark(common) => {
            common.init_threads()?;
            let ExperimentConfig::Benchmark(cfg) = common.load("benchmark")? else { unreachable!() };
            let report = run_benchmark(&cfg)?;
            write_benchmark(&common.out, &cfg, &report)?;
            for s in &report.slopes {
                match &s.fit {
                    Ok(f) => eprintln!(
                        "error{} vs {}: slope {:.3} [{:.3}, {:.3}]",
                        s.component, s.abscissa, f.slope, f.ci_low, f.ci_high
                    ),
                    Err(msg) => eprintln!("error{} vs {}: no fit ({msg})", s.component, s.abscissa),
                }
            }
        }
        Command::Diocotron { common, particles } => {
            common.init_threads()?;
            let ExperimentConfig::Diocotron(mut cfg) = common.load("diocotron")? else { unreachable!() };
            if let Some(n) = particles {
                cfg.n_particles = n;
            }
            let report = run_diocotron(&cfg, Some(&common.out))?;
            if let Some(last) = report.rows.last() {
                eprintln!(
                    "t={} Q={} H={} A_{}={}",
                    last.t,
                    last.q,
                    last.h,
                    cfg.mode,
                    last.a_l.map_or("n/a".into(), |a| a.to_string())
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::FAILURE
        }
    }
}
