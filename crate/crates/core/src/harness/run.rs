use std::collections::HashMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::diagnostics::{
    decomposition_residual, log_spaced_episodes, optimism_monitor, DecompositionCheck,
    DecompositionReport, DiagnosticsConfig, OptimismCount, OptimismReport, VisitRecord,
    DECOMPOSITION_TOLERANCE,
};
use super::regret::{EpisodeRegret, RegretSink, RunMeta};
use crate::agent::{Agent, AgentConfig};
use crate::dp::{policy_value_into, Policy, ValueTables};
use crate::error::{Error, Result};
use crate::mdp::{sample_index, EpisodicMdp};
use crate::tables::VTable;

/// Per-episode regret may dip below zero by at most this much (rounding).
pub const REGRET_TOLERANCE: f64 = 1e-9;

/// How `x_1^k` is chosen each episode.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartRule {
    /// Independent draws from the MDP's initial distribution.
    #[default]
    Sampled,
    /// A fixed sequence, repeated cyclically.
    Sequence(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub episodes: u64,
    pub seed: u64,
    pub diagnostics: DiagnosticsConfig,
    pub start: StartRule,
}

impl RunOptions {
    pub fn new(episodes: u64, seed: u64) -> Self {
        Self {
            episodes,
            seed,
            diagnostics: DiagnosticsConfig::default(),
            start: StartRule::Sampled,
        }
    }

    pub fn with_diagnostics(mut self, diagnostics: DiagnosticsConfig) -> Self {
        self.diagnostics = diagnostics;
        self
    }
}

/// Invariant checks and summary statistics of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub meta: RunMeta,
    pub final_cum_regret: f64,
    pub min_regret: f64,
    pub max_regret: f64,
    /// Episodes whose regret fell outside `[-1e-9, H + 1e-9]`.
    pub regret_violations: Vec<u64>,
    pub decomposition: Option<DecompositionReport>,
    pub optimism: Option<OptimismReport>,
}

impl RunReport {
    /// True when no invariant check failed.
    pub fn passed(&self) -> bool {
        self.regret_violations.is_empty()
            && self
                .decomposition
                .as_ref()
                .is_none_or(|l| l.failures.is_empty())
    }
}

struct DecompositionTracker {
    cells: HashMap<(usize, usize, usize), Vec<VisitRecord>>,
    check_at: Vec<u64>,
    next_check: usize,
    report: DecompositionReport,
}

impl DecompositionTracker {
    fn new(mdp: &EpisodicMdp<f64>, config: &DiagnosticsConfig, episodes: u64, seed: u64) -> Self {
        let (s, a, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
        let total = horizon * s * a;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1);
        let chosen = sample(&mut rng, total, config.decomposition_cells.min(total));
        let mut picked: Vec<usize> = chosen.into_iter().collect();
        picked.sort_unstable();
        let cells = picked
            .into_iter()
            .map(|i| ((i / (s * a)) + 1, (i / a) % s, i % a))
            .map(|cell| (cell, Vec::new()))
            .collect();
        Self {
            cells,
            check_at: log_spaced_episodes(episodes, config.decomposition_episodes),
            next_check: 0,
            report: DecompositionReport::default(),
        }
    }

    fn record(&mut self, cell: (usize, usize, usize), visit: VisitRecord) {
        if let Some(history) = self.cells.get_mut(&cell) {
            history.push(visit);
        }
    }

    fn check(
        &mut self,
        episode: u64,
        agent: &Agent<f64>,
        mdp: &EpisodicMdp<f64>,
        tables: &ValueTables<f64>,
    ) {
        if self.check_at.get(self.next_check) != Some(&episode) {
            return;
        }
        self.next_check += 1;
        let mut cells: Vec<_> = self.cells.iter().collect();
        cells.sort_unstable_by_key(|(cell, _)| **cell);
        for (&(h, x, a), history) in cells {
            if history.len() as u64 != agent.count(h, x, a) {
                self.report.notices.push(format!(
                    "episode {episode}: history of (h={h}, x={x}, a={a}) incomplete, skipped"
                ));
                continue;
            }
            let residual = decomposition_residual(
                agent.q().get(h, x, a),
                history,
                agent.learning_rate(),
                mdp,
                tables,
                h,
                x,
                a,
            );
            self.report.checks += 1;
            self.report.max_residual = self.report.max_residual.max(residual);
            if !(residual <= DECOMPOSITION_TOLERANCE) {
                self.report.failures.push(DecompositionCheck {
                    episode,
                    step: h,
                    state: x,
                    action: a,
                    visits: history.len() as u64,
                    residual,
                });
            }
        }
    }
}

/// Builds the agent from `config` and runs it for `options.episodes` episodes.
pub fn run_single(
    mdp: &EpisodicMdp<f64>,
    tables: &ValueTables<f64>,
    config: &AgentConfig,
    meta_env: &str,
    options: &RunOptions,
    sink: &mut dyn RegretSink,
) -> Result<RunReport> {
    let agent = Agent::from_config(
        mdp.num_states(),
        mdp.num_actions(),
        mdp.horizon(),
        config,
        options.episodes,
    )?;
    let meta = RunMeta {
        env: meta_env.to_string(),
        agent: config.name.clone(),
        seed: options.seed,
        horizon: mdp.horizon(),
        episodes: options.episodes,
    };
    run_with_agent(mdp, tables, agent, meta, options, sink)
}

/// Runs a prepared agent; the executed policy of each episode is evaluated
/// exactly against `tables` to obtain the episode's regret.
pub fn run_with_agent(
    mdp: &EpisodicMdp<f64>,
    tables: &ValueTables<f64>,
    mut agent: Agent<f64>,
    meta: RunMeta,
    options: &RunOptions,
    sink: &mut dyn RegretSink,
) -> Result<RunReport> {
    let (s, a, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    if (agent.num_states(), agent.num_actions(), agent.horizon()) != (s, a, horizon) {
        return Err(Error::contract("agent dimensions do not match the MDP"));
    }
    if tables.horizon() != horizon
        || tables.q_star.num_states() != s
        || tables.q_star.num_actions() != a
    {
        return Err(Error::contract("value tables do not match the MDP"));
    }
    if options.episodes == 0 {
        return Err(Error::contract("a run needs at least one episode"));
    }
    if let StartRule::Sequence(seq) = &options.start {
        if seq.is_empty() || seq.iter().any(|&x| x >= s) {
            return Err(Error::contract(
                "start sequence must be non-empty with valid states",
            ));
        }
    }

    let diagnostics = &options.diagnostics;
    let mut decomposition = (diagnostics.decomposition && diagnostics.decomposition_cells > 0)
        .then(|| DecompositionTracker::new(mdp, diagnostics, options.episodes, options.seed));
    if agent.is_frozen() {
        if let Some(tracker) = decomposition.as_mut() {
            tracker
                .report
                .notices
                .push("agent is frozen; error-decomposition checks skipped".into());
            tracker.check_at.clear();
        }
    }
    let mut optimism = OptimismCount::default();
    let mut optimism_episodes = 0u64;

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut policy = Policy::zeroed(horizon, s, a);
    let mut policy_values = VTable::filled(horizon, s, 0.0);
    let h_max = horizon as f64;

    let mut cum_regret = 0.0;
    let mut min_regret = f64::INFINITY;
    let mut max_regret = f64::NEG_INFINITY;
    let mut regret_violations = Vec::new();

    for k in 1..=options.episodes {
        agent.executed_policy_into(&mut policy);
        policy_value_into(mdp, &policy, &mut policy_values);

        let start = match &options.start {
            StartRule::Sampled => sample_index(mdp.initial_dist(), &mut rng),
            StartRule::Sequence(seq) => seq[((k - 1) % seq.len() as u64) as usize],
        };
        let v_star = tables.v_star.get(1, start);
        let v_pik = policy_values.get(1, start);
        let raw = v_star - v_pik;
        min_regret = min_regret.min(raw);
        max_regret = max_regret.max(raw);
        if !(raw >= -REGRET_TOLERANCE && raw <= h_max + REGRET_TOLERANCE) {
            regret_violations.push(k);
        }
        // Tolerated rounding below zero is recorded as zero so the running sum never decreases.
        let regret = raw.max(0.0);
        cum_regret += regret;

        if diagnostics.optimism_monitor && (k - 1) % diagnostics.optimism_stride.max(1) == 0 {
            optimism.merge(optimism_monitor(agent.q(), tables));
            optimism_episodes += 1;
        }
        if let Some(tracker) = decomposition.as_mut() {
            tracker.check(k, &agent, mdp, tables);
        }

        let mut x = start;
        for h in 1..=horizon {
            let action = agent.select_action(h, x, &mut rng)?;
            let next = sample_index(mdp.transition_row(h, x, action), &mut rng);
            let info = agent.update(h, x, action, mdp.reward(h, x, action), next)?;
            if let Some(tracker) = decomposition.as_mut() {
                tracker.record(
                    (h, x, action),
                    VisitRecord {
                        episode: k,
                        next_state: next,
                        next_value: info.target.next_value,
                        bonus: info.target.bonus,
                    },
                );
            }
            x = next;
        }
        agent.finish_episode();

        sink.record(&EpisodeRegret {
            episode: k,
            v_star,
            v_pik,
            regret,
            cum_regret,
        })?;
    }
    sink.finish()?;

    Ok(RunReport {
        meta,
        final_cum_regret: cum_regret,
        min_regret,
        max_regret,
        regret_violations,
        decomposition: decomposition.map(|t| t.report),
        optimism: diagnostics.optimism_monitor.then(|| OptimismReport {
            episodes_checked: optimism_episodes,
            entries_checked: optimism.checked,
            violations: optimism.violations,
            fraction: optimism.fraction(),
        }),
    })
}
