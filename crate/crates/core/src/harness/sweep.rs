use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::regret::{CsvRegretWriter, RegretRecord, RunMeta};
use super::run::{run_single, RunOptions, RunReport};
use super::scaling::{fit_scaling, ScalingFit};
use crate::agent::AgentConfig;
use crate::dp::{optimal_values, ValueTables};
use crate::env::{generate, EnvSpec};
use crate::error::{Error, Result};
use crate::mdp::EpisodicMdp;

pub const SUMMARY_CSV_HEADER: [&str; 6] = [
    "env",
    "agent",
    "seed",
    "final_cum_regret",
    "slope",
    "slope_window",
];
pub const RUNS_DIR: &str = "runs";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const REPORT_FILE: &str = "report.json";

/// Result of one job of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub env: String,
    pub agent: String,
    pub seed: u64,
    pub csv: PathBuf,
    pub report: Option<RunReport>,
    pub fit: Option<ScalingFit>,
    /// Set when the job could not run at all.
    pub error: Option<String>,
}

impl RunOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.report.as_ref().is_some_and(RunReport::passed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub episodes: u64,
    pub tail_fraction: f64,
    pub runs: Vec<RunOutcome>,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        self.runs.iter().all(RunOutcome::passed)
    }
}

struct PreparedEnv {
    spec: EnvSpec,
    mdp: EpisodicMdp<f64>,
    tables: ValueTables<f64>,
}

struct Job<'a> {
    env: &'a PreparedEnv,
    agent: &'a AgentConfig,
    seed: u64,
}

/// Runs every (environment, agent, seed) combination of `config` and writes
/// `runs/<env>__<agent>__seed<seed>.csv`, `summary.csv` and `report.json`
/// under the output directory. Output bytes do not depend on `workers`.
pub fn run_sweep(config: &ExperimentConfig, workers: usize) -> Result<SweepReport> {
    config.validate()?;
    let out = &config.output_dir;
    let runs_dir = out.join(RUNS_DIR);
    std::fs::create_dir_all(&runs_dir).map_err(|e| Error::io(&runs_dir, e))?;

    let envs = config
        .envs
        .iter()
        .map(|spec| {
            let mdp = generate::<f64>(spec)?;
            let tables = optimal_values(&mdp)?;
            Ok(PreparedEnv {
                spec: spec.clone(),
                mdp,
                tables,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut jobs = Vec::new();
    for env in &envs {
        for agent in &config.agents {
            for &seed in &config.seeds {
                jobs.push(Job { env, agent, seed });
            }
        }
    }

    let execute = |job: &Job| run_job(job, config, &runs_dir);
    let runs: Vec<RunOutcome> = if workers <= 1 {
        jobs.iter().map(execute).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::config(format!("worker pool: {e}")))?;
        pool.install(|| jobs.par_iter().map(execute).collect())
    };

    let report = SweepReport {
        episodes: config.episodes,
        tail_fraction: config.tail_fraction,
        runs,
    };
    write_summary(&out.join(SUMMARY_FILE), &report.runs)?;
    let report_path = out.join(REPORT_FILE);
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    std::fs::write(&report_path, text).map_err(|e| Error::io(&report_path, e))?;
    Ok(report)
}

fn run_job(job: &Job, config: &ExperimentConfig, runs_dir: &Path) -> RunOutcome {
    let env_label = job.env.spec.label();
    let meta = RunMeta {
        env: env_label.clone(),
        agent: job.agent.name.clone(),
        seed: job.seed,
        horizon: job.env.mdp.horizon(),
        episodes: config.episodes,
    };
    let csv = runs_dir.join(format!("{}.csv", meta.file_stem()));
    let mut outcome = RunOutcome {
        env: env_label.clone(),
        agent: job.agent.name.clone(),
        seed: job.seed,
        csv: csv.clone(),
        report: None,
        fit: None,
        error: None,
    };
    let result = (|| -> Result<(RunReport, RegretRecord)> {
        let mut options =
            RunOptions::new(config.episodes, job.seed).with_diagnostics(config.diagnostics.clone());
        options.start = config.start_rule();
        let mut sink = (CsvRegretWriter::create(&csv)?, RegretRecord::new(meta));
        let report = run_single(
            &job.env.mdp,
            &job.env.tables,
            job.agent,
            &env_label,
            &options,
            &mut sink,
        )?;
        Ok((report, sink.1))
    })();
    match result {
        Ok((report, record)) => {
            outcome.fit = fit_scaling(
                &record.cum_regret(),
                record.meta.horizon,
                config.tail_fraction,
            )
            .ok();
            outcome.report = Some(report);
        }
        Err(e) => outcome.error = Some(e.to_string()),
    }
    outcome
}

fn write_summary(path: &Path, runs: &[RunOutcome]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(SUMMARY_CSV_HEADER)?;
    for run in runs {
        let final_cum = run
            .report
            .as_ref()
            .map(|r| r.final_cum_regret.to_string())
            .unwrap_or_default();
        let (slope, window) = match &run.fit {
            Some(fit) => (fit.slope.to_string(), fit.window_label()),
            None => (String::new(), String::new()),
        };
        writer.write_record([
            run.env.clone(),
            run.agent.clone(),
            run.seed.to_string(),
            final_cum,
            slope,
            window,
        ])?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Lines like `chain-S5A2H6 ucb-h seed=7: final regret 123.4 [ok]`.
pub fn describe(outcome: &RunOutcome, mut out: impl Write) -> std::io::Result<()> {
    match (&outcome.report, &outcome.error) {
        (_, Some(err)) => writeln!(
            out,
            "{} {} seed={}: error: {err}",
            outcome.env, outcome.agent, outcome.seed
        ),
        (Some(report), None) => writeln!(
            out,
            "{} {} seed={}: final regret {:.3} [{}]",
            outcome.env,
            outcome.agent,
            outcome.seed,
            report.final_cum_regret,
            if report.passed() {
                "ok"
            } else {
                "CHECK FAILED"
            }
        ),
        (None, None) => Ok(()),
    }
}
