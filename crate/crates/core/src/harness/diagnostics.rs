//! Run-time checks tying the agent to the exact solution: the per-cell
//! error decomposition identity and the optimism monitor.

use serde::{Deserialize, Serialize};

use crate::dp::ValueTables;
use crate::mdp::EpisodicMdp;
use crate::schedule::LearningRateSchedule;
use crate::tables::QTable;

/// Largest residual of the error-decomposition identity a run may show.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-8;
/// Slack below `Q*` before an entry counts as an optimism violation.
pub const OPTIMISM_TOLERANCE: f64 = 1e-9;

fn yes() -> bool {
    true
}

fn default_cells() -> usize {
    32
}

fn default_check_episodes() -> usize {
    16
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    #[serde(default = "yes")]
    pub decomposition: bool,
    /// Number of `(h, x, a)` cells whose visit histories are tracked.
    #[serde(default = "default_cells")]
    pub decomposition_cells: usize,
    /// Number of log-spaced episodes at which tracked cells are checked.
    #[serde(default = "default_check_episodes")]
    pub decomposition_episodes: usize,
    #[serde(default = "yes")]
    pub optimism_monitor: bool,
    /// Check optimism at the start of every `optimism_stride`-th episode.
    #[serde(default = "one")]
    pub optimism_stride: u64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            decomposition: true,
            decomposition_cells: default_cells(),
            decomposition_episodes: default_check_episodes(),
            optimism_monitor: true,
            optimism_stride: 1,
        }
    }
}

impl DiagnosticsConfig {
    pub fn disabled() -> Self {
        Self {
            decomposition: false,
            optimism_monitor: false,
            ..Self::default()
        }
    }
}

/// One visit to a tracked cell, as seen by the agent when it updated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitRecord {
    pub episode: u64,
    pub next_state: usize,
    /// The agent's `V_{h+1}(x')` at update time.
    pub next_value: f64,
    pub bonus: f64,
}

/// `|LHS - RHS|` of
/// `Q^k - Q* = a_t^0 (H - Q*) + sum_i a_t^i [(V^{k_i}_{h+1} - V*_{h+1})(x'_i) + (V*_{h+1}(x'_i) - [P V*_{h+1}](x,a)) + b_i]`
/// for one cell, given the agent's current `q_value` and the cell's visit history.
#[allow(clippy::too_many_arguments)]
pub fn decomposition_residual(
    q_value: f64,
    history: &[VisitRecord],
    schedule: &LearningRateSchedule<f64>,
    mdp: &EpisodicMdp<f64>,
    tables: &ValueTables<f64>,
    h: usize,
    x: usize,
    a: usize,
) -> f64 {
    let horizon = mdp.horizon() as f64;
    let q_star = tables.q_star.get(h, x, a);
    let v_next_star = |s: usize| tables.v_star.get(h + 1, s);
    let expected_next: f64 = mdp
        .transition_row(h, x, a)
        .iter()
        .enumerate()
        .map(|(s, &p)| p * v_next_star(s))
        .sum();

    let weights = schedule.alpha_weights(history.len() as u64);
    let mut rhs = weights[0] * (horizon - q_star);
    for (visit, &w) in history.iter().zip(&weights[1..]) {
        let value_gap = visit.next_value - v_next_star(visit.next_state);
        let sampling_error = v_next_star(visit.next_state) - expected_next;
        rhs += w * (value_gap + sampling_error + visit.bonus);
    }
    ((q_value - q_star) - rhs).abs()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimismCount {
    pub checked: u64,
    pub violations: u64,
}

impl OptimismCount {
    pub fn fraction(&self) -> f64 {
        if self.checked == 0 {
            0.0
        } else {
            self.violations as f64 / self.checked as f64
        }
    }

    pub fn merge(&mut self, other: OptimismCount) {
        self.checked += other.checked;
        self.violations += other.violations;
    }
}

/// Counts entries with `Q_h(x,a) < Q*_h(x,a) - 1e-9`.
pub fn optimism_monitor(q: &QTable<f64>, tables: &ValueTables<f64>) -> OptimismCount {
    let violations = q
        .as_slice()
        .iter()
        .zip(tables.q_star.as_slice())
        .filter(|(&q, &star)| q < star - OPTIMISM_TOLERANCE)
        .count();
    OptimismCount {
        checked: q.as_slice().len() as u64,
        violations: violations as u64,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCheck {
    pub episode: u64,
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub visits: u64,
    pub residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub checks: usize,
    pub max_residual: f64,
    /// Checks whose residual exceeded [`DECOMPOSITION_TOLERANCE`].
    pub failures: Vec<DecompositionCheck>,
    pub notices: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimismReport {
    pub episodes_checked: u64,
    pub entries_checked: u64,
    pub violations: u64,
    pub fraction: f64,
}

/// Episodes `round(K^(j/(n-1)))`, `j = 0..n`, deduplicated.
pub fn log_spaced_episodes(episodes: u64, count: usize) -> Vec<u64> {
    if episodes == 0 || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![episodes];
    }
    let mut out: Vec<u64> = (0..count)
        .map(|j| {
            let e = (episodes as f64)
                .powf(j as f64 / (count - 1) as f64)
                .round() as u64;
            e.clamp(1, episodes)
        })
        .collect();
    out.dedup();
    out
}
