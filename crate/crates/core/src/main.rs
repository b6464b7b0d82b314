use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use owcsim::error::{ConfigError, ExperimentError};
use owcsim::harness::{self, generate_grid, Config, ExperimentId, GridSpec};

#[derive(Parser)]
#[command(name = "owcsim", version, about = "RLNC-NOMA / MIMO-LiDAL indoor OWC simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment.
    Run {
        experiment: String,
        /// Configuration file; the bundled default scenario if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run every experiment and write a manifest.
    RunAll {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the user-location grid described by a grid spec file.
    Grid {
        #[arg(long)]
        spec: PathBuf,
        /// Scenario supplying the room; the bundled one if omitted.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Parse and validate a configuration file.
    ValidateConfig { file: PathBuf },
}

enum Failure {
    Config(ConfigError),
    Experiment(ExperimentError),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(c) => Failure::Config(c),
            e => Failure::Experiment(e),
        }
    }
}

fn load(config: Option<&Path>) -> Result<Config, ConfigError> {
    match config {
        Some(p) => Config::load(p),
        None => Ok(Config::bundled()),
    }
}

fn exec(cli: Cli) -> Result<(), Failure> {
    match cli.cmd {
        Cmd::Run { experiment, config, seed, out } => {
            let id: ExperimentId = experiment.parse()?;
            let cfg = load(config.as_deref())?;
            for f in harness::run(id, &cfg, seed, &out)? {
                println!("{}", f.display());
            }
        }
        Cmd::RunAll { config, seed, out } => {
            let cfg = load(config.as_deref())?;
            let report = harness::run_all(&cfg, seed, &out)?;
            for f in &report.manifest.files {
                println!("{}  {}", f.sha256, f.path);
            }
            println!("manifest: {}", report.manifest_path.display());
            if let Some((id, e)) = report.failures.into_iter().next() {
                return Err(Failure::Experiment(ExperimentError::Failed { id: id.name().into(), msg: e.to_string() }));
            }
        }
        Cmd::Grid { spec, config } => {
            let cfg = load(config.as_deref())?;
            let text = std::fs::read_to_string(&spec)
                .map_err(|e| ConfigError::Io { path: spec.display().to_string(), source: e })?;
            let gs: GridSpec = toml::from_str(&text).map_err(ConfigError::from)?;
            let pts = generate_grid(&cfg.scenario, &gs)?;
            println!("# points={}", pts.len());
            println!("location_id,x,y");
            for (i, p) in pts.iter().enumerate() {
                println!("{i},{},{}", p.x, p.y);
            }
        }
        Cmd::ValidateConfig { file } => {
            let cfg = Config::load(&file)?;
            println!("ok: {} APs, config_sha256={}", cfg.scenario.ap_count(), cfg.hash);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match exec(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Experiment(e)) => {
            eprintln!("experiment error: {e}");
            ExitCode::from(2)
        }
    }
}
