use serde::{Deserialize, Serialize};

use super::regret::RegretRecord;
use crate::error::{Error, Result};

pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;
/// Fewest positive points a scaling fit accepts.
pub const MIN_FIT_POINTS: usize = 10;

/// Least-squares line through `(ln(k H), ln cum_regret_k)` over a tail window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub slope: f64,
    pub intercept: f64,
    /// First and last episode (1-based, inclusive) of the window.
    pub window_start: u64,
    pub window_end: u64,
    pub points: usize,
    pub residual_norm: f64,
}

impl ScalingFit {
    pub fn window_label(&self) -> String {
        format!("{}-{}", self.window_start, self.window_end)
    }
}

/// Fits the regret growth exponent over the last `tail_fraction` of episodes.
///
/// `cum_regret[k - 1]` is the cumulative regret after episode `k`; episodes
/// with non-positive cumulative regret are skipped.
pub fn fit_scaling(cum_regret: &[f64], horizon: usize, tail_fraction: f64) -> Result<ScalingFit> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::contract(format!(
            "tail fraction {tail_fraction} outside (0, 1]"
        )));
    }
    let episodes = cum_regret.len();
    let skip = ((episodes as f64) * (1.0 - tail_fraction)).floor() as usize;
    let h = horizon.max(1) as f64;
    let points: Vec<(f64, f64)> = cum_regret
        .iter()
        .enumerate()
        .skip(skip)
        .filter(|(_, &c)| c > 0.0 && c.is_finite())
        .map(|(i, &c)| (((i + 1) as f64 * h).ln(), c.ln()))
        .collect();
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::contract(format!(
            "scaling fit needs at least {MIN_FIT_POINTS} positive points in the window, found {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let residual_norm = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(ScalingFit {
        slope,
        intercept,
        window_start: skip as u64 + 1,
        window_end: episodes as u64,
        points: points.len(),
        residual_norm,
    })
}

/// Pointwise mean and sample standard deviation of cumulative regret.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretCurves {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Aggregates runs that share an episode count. A single record has zero spread.
pub fn aggregate_curves(records: &[&RegretRecord]) -> Result<RegretCurves> {
    let first = records
        .first()
        .ok_or_else(|| Error::contract("aggregation needs at least one record"))?;
    let len = first.rows.len();
    if let Some(bad) = records.iter().find(|r| r.rows.len() != len) {
        return Err(Error::contract(format!(
            "cannot aggregate runs of different lengths ({} vs {len} episodes, run {})",
            bad.rows.len(),
            bad.meta.file_stem()
        )));
    }
    let n = records.len() as f64;
    let mut mean = vec![0.0; len];
    let mut std = vec![0.0; len];
    for k in 0..len {
        let m = records.iter().map(|r| r.rows[k].cum_regret).sum::<f64>() / n;
        mean[k] = m;
        if records.len() > 1 {
            let var = records
                .iter()
                .map(|r| (r.rows[k].cum_regret - m).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            std[k] = var.sqrt();
        }
    }
    Ok(RegretCurves { mean, std })
}

/// Summary of all seeds of one (environment, agent) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub env: String,
    pub agent: String,
    pub runs: usize,
    pub episodes: u64,
    pub mean_final_cum_regret: f64,
    pub std_final_cum_regret: f64,
    /// Mean of the per-run slopes that could be fitted.
    pub mean_slope: Option<f64>,
    pub std_slope: Option<f64>,
    /// Slope of the fit through the mean curve.
    pub mean_curve_slope: Option<f64>,
}

pub struct GroupAggregate {
    pub summary: GroupSummary,
    pub curves: RegretCurves,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

/// Groups records by (environment, agent) in first-seen order and summarizes each group.
pub fn aggregate(records: &[RegretRecord], tail_fraction: f64) -> Result<Vec<GroupAggregate>> {
    if records.is_empty() {
        return Err(Error::contract("aggregation needs at least one record"));
    }
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in records {
        let key = (r.meta.env.as_str(), r.meta.agent.as_str());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(env, agent)| {
            let group: Vec<&RegretRecord> = records
                .iter()
                .filter(|r| r.meta.env == env && r.meta.agent == agent)
                .collect();
            let curves = aggregate_curves(&group)?;
            let finals: Vec<f64> = group.iter().map(|r| r.final_cum_regret()).collect();
            let (mean_final, std_final) = mean_std(&finals);
            let horizon = group[0].meta.horizon;
            let slopes: Vec<f64> = group
                .iter()
                .filter_map(|r| fit_scaling(&r.cum_regret(), horizon, tail_fraction).ok())
                .map(|f| f.slope)
                .collect();
            let (mean_slope, std_slope) = if slopes.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&slopes);
                (Some(m), Some(s))
            };
            Ok(GroupAggregate {
                summary: GroupSummary {
                    env: env.to_string(),
                    agent: agent.to_string(),
                    runs: group.len(),
                    episodes: group[0].rows.len() as u64,
                    mean_final_cum_regret: mean_final,
                    std_final_cum_regret: std_final,
                    mean_slope,
                    std_slope,
                    mean_curve_slope: fit_scaling(&curves.mean, horizon, tail_fraction)
                        .ok()
                        .map(|f| f.slope),
                },
                curves,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::regret::{EpisodeRegret, RunMeta};

    fn record(agent: &str, seed: u64, cum: impl Fn(u64) -> f64, k: u64) -> RegretRecord {
        let mut r = RegretRecord::new(RunMeta {
            env: "env".into(),
            agent: agent.into(),
            seed,
            horizon: 4,
            episodes: k,
        });
        let mut prev = 0.0;
        for e in 1..=k {
            let c = cum(e);
            r.rows.push(EpisodeRegret {
                episode: e,
                v_star: 1.0,
                v_pik: 1.0 - (c - prev),
                regret: c - prev,
                cum_regret: c,
            });
            prev = c;
        }
        r
    }

    #[test]
    fn exact_power_laws() {
        let h = 4usize;
        let sqrt: Vec<f64> = (1..=1000).map(|k| ((k * h) as f64).sqrt()).collect();
        let fit = fit_scaling(&sqrt, h, 0.5).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-6);
        assert!(fit.residual_norm < 1e-9);
        assert_eq!((fit.window_start, fit.window_end), (501, 1000));

        let linear: Vec<f64> = (1..=1000).map(|k| (k * h) as f64).collect();
        assert!((fit_scaling(&linear, h, 0.5).unwrap().slope - 1.0).abs() < 1e-6);
    }

    #[test]
    fn leading_zeros_are_skipped() {
        let mut cum = vec![0.0; 40];
        cum.extend((41..=100).map(|k| (k as f64 - 40.0).powf(0.7)));
        let fit = fit_scaling(&cum, 1, 1.0).unwrap();
        assert_eq!(fit.points, 60);
    }

    #[test]
    fn too_few_points_is_an_error() {
        assert!(fit_scaling(&[1.0; 15], 1, 0.5).is_err());
        assert!(fit_scaling(&[0.0; 100], 1, 0.5).is_err());
        assert!(fit_scaling(&[1.0; 100], 1, 0.0).is_err());
    }

    #[test]
    fn aggregation_spreads() {
        let a = record("x", 1, |k| k as f64, 50);
        let curves = aggregate_curves(&[&a]).unwrap();
        assert_eq!(curves.mean, a.cum_regret());
        assert!(curves.std.iter().all(|&s| s == 0.0));

        let b = a.clone();
        let curves = aggregate_curves(&[&a, &b]).unwrap();
        assert!(curves.std.iter().all(|&s| s == 0.0));

        let c = record("x", 2, |k| 2.0 * k as f64, 50);
        let curves = aggregate_curves(&[&a, &c]).unwrap();
        assert!((curves.std[49] - (50.0f64 * 50.0 / 2.0).sqrt()).abs() < 1e-9);

        let short = record("x", 3, |k| k as f64, 20);
        assert!(aggregate_curves(&[&a, &short]).is_err());
    }

    #[test]
    fn groups_by_env_and_agent() {
        let records = vec![
            record("ucb", 1, |k| (k as f64).sqrt(), 100),
            record("eps", 1, |k| k as f64, 100),
            record("ucb", 2, |k| 2.0 * (k as f64).sqrt(), 100),
        ];
        let groups = aggregate(&records, 0.5).unwrap();
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].summary.agent, "ucb");
        assert_eq!(groups[0].summary.runs, 2);
        assert!((groups[0].summary.mean_slope.unwrap() - 0.5).abs() < 1e-6);
        assert!((groups[1].summary.mean_slope.unwrap() - 1.0).abs() < 1e-6);
        assert!(aggregate(&[], 0.5).is_err());
    }
}
