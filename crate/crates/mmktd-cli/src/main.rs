//! Command-line harness: train agents, evaluate snapshots, run benchmark
//! sweeps, and export value surfaces as CSV.

use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use mmktd::envs::EnvKind;
use mmktd::error::Error;
use mmktd::harness::{
    self, AgentKind, AgentSnapshot, GridSpec, RunConfig, STREAM_REPEAT,
};

#[derive(Parser)]
#[command(
    name = "mmktd",
    version,
    about = "Kalman temporal-difference learning benchmarks with adaptive noise banks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent and optionally save its snapshot.
    Train(TrainArgs),
    /// Evaluate a saved snapshot over greedy test trials.
    Test(TestArgs),
    /// Run agents across episode budgets and write the results CSV.
    Sweep(SweepArgs),
    /// Evaluate a snapshot's state-value surface on a grid.
    Surface(SurfaceArgs),
}

/// Flags shared by the subcommands that need a run configuration.
#[derive(Args)]
struct ConfigArgs {
    /// Path to a `key = value` run-configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment (pendulum | mountain_car). Without --config this selects
    /// that environment's built-in default configuration.
    #[arg(long)]
    env: Option<String>,
    /// Agent variant (ktd | mmktd | mmktd_p).
    #[arg(long)]
    agent: Option<String>,
    /// Training episodes.
    #[arg(long)]
    episodes: Option<usize>,
    /// Independent repeats.
    #[arg(long)]
    repeats: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Greedy test trials per repeat.
    #[arg(long)]
    trials: Option<usize>,
}

impl ConfigArgs {
    fn load(&self) -> mmktd::Result<RunConfig> {
        let mut cfg = match (&self.config, &self.env) {
            (Some(path), _) => RunConfig::parse(&fs::read_to_string(path)?)?,
            (None, Some(env)) => RunConfig::default_for(EnvKind::parse(env)?),
            (None, None) => {
                return Err(Error::InvalidArgument(
                    "pass --config <path> or --env <name>".to_string(),
                ))
            }
        };
        if let (Some(_), Some(env)) = (&self.config, &self.env) {
            let requested = EnvKind::parse(env)?;
            if requested != cfg.env {
                return Err(Error::InvalidArgument(format!(
                    "--env {} conflicts with the config file's environment {}",
                    requested.name(),
                    cfg.env.name()
                )));
            }
        }
        if let Some(agent) = &self.agent {
            cfg.agent = AgentKind::parse(agent)?;
        }
        if let Some(n) = self.episodes {
            cfg.train_episodes = n;
        }
        if let Some(n) = self.repeats {
            cfg.repeats = n;
        }
        if let Some(seed) = self.seed {
            cfg.master_seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.test_trials = trials;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Write the trained agent's snapshot to this path.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Write a per-step diagnostics CSV (innovation, mode weights) here.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    /// Repeat index whose derived seed drives this training run.
    #[arg(long, default_value_t = 0)]
    repeat: usize,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Trained snapshot to evaluate.
    #[arg(long)]
    snapshot: PathBuf,
    /// Write the first trial's greedy trajectory CSV here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Repeat index whose derived seed drives the test trials.
    #[arg(long, default_value_t = 0)]
    repeat: usize,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Comma-separated agents to run, or `all`.
    #[arg(long, default_value = "all")]
    agents: String,
    /// Comma-separated training-episode budgets.
    #[arg(long, default_value = "10,20,30,40,50")]
    budgets: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Record real per-repeat wall-clock seconds instead of the 0.000
    /// placeholder (makes output non-reproducible byte-for-byte).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SurfaceArgs {
    /// Trained snapshot to evaluate.
    #[arg(long)]
    snapshot: PathBuf,
    /// Grid as `min:max:count` per state dimension, comma-separated.
    #[arg(long)]
    grid: String,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => run_train(args),
        Command::Test(args) => run_test(args),
        Command::Sweep(args) => run_sweep(args),
        Command::Surface(args) => run_surface(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run_train(args: TrainArgs) -> mmktd::Result<()> {
    let cfg = args.config.load()?;
    let seed = harness::derive_seed(cfg.master_seed, STREAM_REPEAT, args.repeat as u64);
    let outcome = if let Some(path) = &args.diagnostics {
        let (outcome, csv) = harness::train_with_diagnostics(&cfg, seed)?;
        fs::write(path, csv)?;
        outcome
    } else {
        harness::train(&cfg, seed)?
    };
    let total_steps: usize = outcome.episode_steps.iter().sum();
    println!(
        "trained {} on {} for {} episodes ({} steps, {} reverted basis updates)",
        cfg.agent.name(),
        cfg.env.name(),
        outcome.episode_steps.len(),
        total_steps,
        outcome.rgd_reverts
    );
    if let Some(path) = &args.snapshot {
        fs::write(path, outcome.snapshot.serialize())?;
        println!("snapshot written to {}", path.display());
    }
    Ok(())
}

fn run_test(args: TestArgs) -> mmktd::Result<()> {
    let snapshot = AgentSnapshot::parse(&fs::read_to_string(&args.snapshot)?)?;
    let mut config_args = args.config;
    if config_args.config.is_none() && config_args.env.is_none() {
        config_args.env = Some(snapshot.env.name().to_string());
    }
    let cfg = config_args.load()?;
    if cfg.env != snapshot.env {
        return Err(Error::InvalidArgument(format!(
            "snapshot is for {} but the configuration is for {}",
            snapshot.env.name(),
            cfg.env.name()
        )));
    }
    let seed = harness::derive_seed(cfg.master_seed, STREAM_REPEAT, args.repeat as u64);
    let successes = harness::test(&snapshot, &cfg, seed)?;
    println!("{successes}/{} successful trials", cfg.test_trials);
    if let Some(path) = &args.out {
        fs::write(path, harness::export_trajectory(&snapshot, &cfg, seed, 0)?)?;
        println!("trajectory written to {}", path.display());
    }
    Ok(())
}

fn parse_agents(raw: &str) -> mmktd::Result<Vec<AgentKind>> {
    if raw == "all" {
        return Ok(AgentKind::ALL.to_vec());
    }
    raw.split(',')
        .map(|part| AgentKind::parse(part.trim()))
        .collect()
}

fn parse_budgets(raw: &str) -> mmktd::Result<Vec<usize>> {
    raw.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::Parse(format!("invalid episode budget '{part}'")))
        })
        .collect()
}

fn run_sweep(args: SweepArgs) -> mmktd::Result<()> {
    let cfg = args.config.load()?;
    let agents = parse_agents(&args.agents)?;
    let budgets = parse_budgets(&args.budgets)?;
    let entries = harness::sweep(&cfg, &agents, &budgets)?;
    for entry in &entries {
        println!(
            "{} {} {:>3} episodes: mean success {:.3} ± {:.3}",
            cfg.env.name(),
            entry.agent.name(),
            entry.train_episodes,
            entry.report.mean_success,
            entry.report.ci95_halfwidth
        );
    }
    fs::write(&args.out, harness::sweep_csv(&entries, args.timing))?;
    println!("results written to {}", args.out.display());
    Ok(())
}

fn run_surface(args: SurfaceArgs) -> mmktd::Result<()> {
    let snapshot = AgentSnapshot::parse(&fs::read_to_string(&args.snapshot)?)?;
    let grid = GridSpec::parse(&args.grid)?;
    fs::write(&args.out, harness::export_value_surface(&snapshot, &grid)?)?;
    println!("surface written to {}", args.out.display());
    Ok(())
}
