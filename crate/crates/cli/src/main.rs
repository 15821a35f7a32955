use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ucbq_core::harness::{self, describe, run_sweep, Analysis, ExperimentConfig, Overrides};
use ucbq_core::mdp::MdpFile;
use ucbq_core::Error;

/// Q-learning with UCB-Hoeffding exploration on finite episodic MDPs.
#[derive(Parser)]
#[command(name = "ucbq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an MDP file (JSON) or an experiment config (TOML).
    Validate { path: PathBuf },
    /// Execute the single (env, agent, seed) run described by a config.
    Run(RunArgs),
    /// Execute every env x agent x seed combination of a config.
    Sweep(RunArgs),
    /// Fit regret scaling and aggregate the run CSVs of a results directory.
    Analyze {
        dir: PathBuf,
        /// Fraction of episodes at the end of each run used for the fit.
        #[arg(long)]
        tail_fraction: Option<f64>,
        /// Where analysis files are written (defaults to DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Replaces the config's seed list with this single seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    episodes: Option<u64>,
    /// Bonus constant c for every Hoeffding agent.
    #[arg(long)]
    bonus_c: Option<f64>,
    /// Failure probability p for every Hoeffding agent.
    #[arg(long)]
    failure_p: Option<f64>,
    /// Exploration rate for every epsilon-greedy agent.
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    tail_fraction: Option<f64>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            episodes: self.episodes,
            bonus_c: self.bonus_c,
            failure_p: self.failure_p,
            epsilon: self.epsilon,
            output_dir: self.out.clone(),
            workers: self.workers,
            tail_fraction: self.tail_fraction,
        }
    }
}

/// Failure carrying the process exit status.
enum Failure {
    /// The input was fine but a check or run failed.
    Check(String),
    /// Unreadable input, bad config or bad usage.
    Usage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } | Error::Io { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Check(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { path } => validate(&path),
        Command::Run(args) => run(&args, true),
        Command::Sweep(args) => run(&args, false),
        Command::Analyze {
            dir,
            tail_fraction,
            out,
        } => analyze(&dir, tail_fraction, out.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn validate(path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    if serde_json::from_str::<serde_json::Value>(&text).is_ok() {
        let file: MdpFile<f64> = serde_json::from_str(&text)
            .map_err(|e| Failure::Check(format!("{}: not an MDP file: {e}", path.display())))?;
        let mdp = file.into_mdp()?;
        let report = mdp.validate();
        if report.is_ok() {
            println!(
                "{}: valid MDP (S={}, A={}, H={})",
                path.display(),
                mdp.num_states(),
                mdp.num_actions(),
                mdp.horizon()
            );
            return Ok(());
        }
        for violation in &report.violations {
            println!("{}: {violation}", path.display());
        }
        return Err(Failure::Check(format!(
            "{}: {} violation(s)",
            path.display(),
            report.violations.len()
        )));
    }
    let config = ExperimentConfig::from_toml(&text).map_err(|e| {
        Failure::Usage(format!(
            "{}: neither an MDP JSON file nor a TOML config: {e}",
            path.display()
        ))
    })?;
    config
        .validate()
        .map_err(|e| Failure::Check(format!("{}: {e}", path.display())))?;
    println!(
        "{}: valid config ({} envs x {} agents x {} seeds, K={})",
        path.display(),
        config.envs.len(),
        config.agents.len(),
        config.seeds.len(),
        config.episodes
    );
    Ok(())
}

fn run(args: &RunArgs, single: bool) -> Result<(), Failure> {
    let mut config = ExperimentConfig::load(&args.config)?;
    config.apply(&args.overrides());
    config.validate()?;
    let workers = if single {
        let runs = config.envs.len() * config.agents.len() * config.seeds.len();
        if runs != 1 {
            return Err(Failure::Usage(format!(
                "run needs exactly one env, agent and seed, config describes {runs} runs; use sweep"
            )));
        }
        1
    } else {
        config
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    };
    let report = run_sweep(&config, workers)?;
    let mut stdout = std::io::stdout().lock();
    for outcome in &report.runs {
        let _ = describe(outcome, &mut stdout);
    }
    let _ = writeln!(stdout, "wrote {}", config.output_dir.display());
    let failed = report.runs.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        return Err(Failure::Check(format!(
            "{failed} of {} runs failed",
            report.runs.len()
        )));
    }
    Ok(())
}

fn analyze(dir: &Path, tail_fraction: Option<f64>, out: Option<&Path>) -> Result<(), Failure> {
    let tail = tail_fraction.unwrap_or(harness::scaling::DEFAULT_TAIL_FRACTION);
    if !(tail > 0.0 && tail <= 1.0) {
        return Err(Failure::Usage(format!(
            "tail fraction {tail} outside (0, 1]"
        )));
    }
    let analysis: Analysis = harness::analyze(dir, tail)?;
    let out = out.unwrap_or(dir);
    std::fs::create_dir_all(out).map_err(|e| Failure::Usage(format!("{}: {e}", out.display())))?;
    analysis.write(out)?;
    print!("{}", analysis.table());
    Ok(())
}
