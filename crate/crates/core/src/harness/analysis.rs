//! Post-hoc analysis of a results directory of run CSVs.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::path::{Path, PathBuf};

use super::regret::{RegretRecord, RunMeta};
use super::scaling::{aggregate, fit_scaling, GroupAggregate, ScalingFit};
use super::sweep::{SweepReport, REPORT_FILE, RUNS_DIR, SUMMARY_CSV_HEADER};
use crate::error::{Error, Result};

pub const ANALYSIS_FILE: &str = "analysis.csv";
pub const ANALYSIS_RUNS_FILE: &str = "analysis_runs.csv";
pub const AGGREGATE_DIR: &str = "aggregate";

pub struct Analysis {
    pub records: Vec<RegretRecord>,
    pub fits: Vec<Option<ScalingFit>>,
    pub groups: Vec<GroupAggregate>,
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.extension().is_some_and(|ext| ext == "csv") && path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Loads every run CSV under `dir` (or `dir/runs`), fits each run and
/// aggregates per (environment, agent).
///
/// Horizons come from `report.json` when present; otherwise `H = 1`, which
/// shifts intercepts but leaves slopes unchanged.
pub fn analyze(dir: &Path, tail_fraction: f64) -> Result<Analysis> {
    let runs_dir = dir.join(RUNS_DIR);
    let source = if runs_dir.is_dir() {
        runs_dir
    } else {
        dir.to_path_buf()
    };
    let files = csv_files(&source)?;
    if files.is_empty() {
        return Err(Error::config(format!(
            "no run CSVs found in {}",
            source.display()
        )));
    }
    let horizons: HashMap<String, usize> = std::fs::read_to_string(dir.join(REPORT_FILE))
        .ok()
        .and_then(|text| serde_json::from_str::<SweepReport>(&text).ok())
        .map(|report| {
            report
                .runs
                .into_iter()
                .filter_map(|run| run.report.map(|r| (r.meta.file_stem(), r.meta.horizon)))
                .collect()
        })
        .unwrap_or_default();

    let mut records = Vec::with_capacity(files.len());
    for path in &files {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        let (env, agent, seed) =
            RunMeta::parse_file_stem(&stem).unwrap_or_else(|| ("unknown".into(), stem.clone(), 0));
        let meta = RunMeta {
            env,
            agent,
            seed,
            horizon: horizons.get(&stem).copied().unwrap_or(1),
            episodes: 0,
        };
        let mut record = RegretRecord::read_csv(path, meta)?;
        record.meta.episodes = record.rows.len() as u64;
        records.push(record);
    }
    let fits = records
        .iter()
        .map(|r| fit_scaling(&r.cum_regret(), r.meta.horizon, tail_fraction).ok())
        .collect();
    let groups = aggregate(&records, tail_fraction)?;
    Ok(Analysis {
        records,
        fits,
        groups,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl Analysis {
    /// Writes `analysis.csv`, `analysis_runs.csv` and `aggregate/<env>__<agent>.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(ANALYSIS_FILE);
        let mut w = csv::Writer::from_writer(File::create(&path).map_err(|e| Error::io(&path, e))?);
        w.write_record([
            "env",
            "agent",
            "runs",
            "episodes",
            "mean_final_cum_regret",
            "std_final_cum_regret",
            "mean_slope",
            "std_slope",
            "mean_curve_slope",
        ])?;
        for g in &self.groups {
            let s = &g.summary;
            w.write_record([
                s.env.clone(),
                s.agent.clone(),
                s.runs.to_string(),
                s.episodes.to_string(),
                s.mean_final_cum_regret.to_string(),
                s.std_final_cum_regret.to_string(),
                opt(s.mean_slope),
                opt(s.std_slope),
                opt(s.mean_curve_slope),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let path = dir.join(ANALYSIS_RUNS_FILE);
        let mut w = csv::Writer::from_writer(File::create(&path).map_err(|e| Error::io(&path, e))?);
        w.write_record(SUMMARY_CSV_HEADER)?;
        for (record, fit) in self.records.iter().zip(&self.fits) {
            w.write_record([
                record.meta.env.clone(),
                record.meta.agent.clone(),
                record.meta.seed.to_string(),
                record.final_cum_regret().to_string(),
                opt(fit.map(|f| f.slope)),
                fit.map(|f| f.window_label()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let agg_dir = dir.join(AGGREGATE_DIR);
        std::fs::create_dir_all(&agg_dir).map_err(|e| Error::io(&agg_dir, e))?;
        for g in &self.groups {
            let path = agg_dir.join(format!("{}__{}.csv", g.summary.env, g.summary.agent));
            let mut w =
                csv::Writer::from_writer(File::create(&path).map_err(|e| Error::io(&path, e))?);
            w.write_record(["episode", "mean_cum_regret", "std_cum_regret"])?;
            for (k, (m, s)) in g.curves.mean.iter().zip(&g.curves.std).enumerate() {
                w.write_record([(k + 1).to_string(), m.to_string(), s.to_string()])?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Fixed-width table, one row per (environment, agent).
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<28} {:<16} {:>5} {:>9} {:>14} {:>12} {:>10} {:>9}",
            "env", "agent", "runs", "episodes", "final_regret", "std", "slope", "slope_sd"
        );
        for g in &self.groups {
            let s = &g.summary;
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
            let _ = writeln!(
                out,
                "{:<28} {:<16} {:>5} {:>9} {:>14.3} {:>12.3} {:>10} {:>9}",
                s.env,
                s.agent,
                s.runs,
                s.episodes,
                s.mean_final_cum_regret,
                s.std_final_cum_regret,
                fmt(s.mean_slope),
                fmt(s.std_slope)
            );
        }
        out
    }
}
