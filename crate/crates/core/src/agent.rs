//! Tabular Q-learning with an optional UCB-Hoeffding bonus, plus the
//! epsilon-greedy baseline.
//!
//! On visit `t` to `(h, x, a)` the agent applies
//! `Q_h(x,a) <- (1 - alpha_t) Q_h(x,a) + alpha_t [r + V_{h+1}(x') + b_t]`
//! and then `V_h(x) <- min(H, max_a' Q_h(x, a'))`. Tables start at `Q = H`,
//! `N = 0`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dp::{argmax_lowest, greedy_policy_into, greedy_row, Policy, TieBreak};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::schedule::{BonusConfig, BonusSchedule, LearningRate, LearningRateSchedule};
use crate::tables::{QTable, VTable};

pub const DEFAULT_EPSILON: f64 = 0.1;

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonDecay {
    #[default]
    Constant,
    /// `epsilon / sqrt(k)` in episode `k`.
    InverseSqrtEpisode,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Exploration {
    /// Act greedily on the (optimistic) Q table.
    #[default]
    Greedy,
    EpsilonGreedy {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default)]
        decay: EpsilonDecay,
    },
}

/// Declarative agent description, as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub name: String,
    #[serde(default)]
    pub learning_rate: LearningRate,
    #[serde(default)]
    pub bonus: BonusConfig,
    #[serde(default)]
    pub exploration: Exploration,
    #[serde(default)]
    pub tie_break: TieBreak,
}

impl AgentConfig {
    /// Q-learning with the Hoeffding bonus and the `(H+1)/(H+t)` step size.
    pub fn ucb_hoeffding(c: f64, p: f64) -> Self {
        Self {
            name: "ucb-h".into(),
            learning_rate: LearningRate::HorizonScaled,
            bonus: BonusConfig::Hoeffding { c, p },
            exploration: Exploration::Greedy,
            tie_break: TieBreak::LowestIndex,
        }
    }

    /// Bonus-free Q-learning with epsilon-greedy action selection.
    pub fn epsilon_greedy(epsilon: f64, learning_rate: LearningRate) -> Self {
        Self {
            name: "eps-greedy".into(),
            learning_rate,
            bonus: BonusConfig::None,
            exploration: Exploration::EpsilonGreedy {
                epsilon,
                decay: EpsilonDecay::Constant,
            },
            tie_break: TieBreak::LowestIndex,
        }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::config("agent name must not be empty"));
        }
        if let Exploration::EpsilonGreedy { epsilon, .. } = self.exploration {
            if !(0.0..=1.0).contains(&epsilon) {
                return Err(Error::config(format!(
                    "agent {:?}: epsilon {epsilon} outside [0, 1]",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// The update target of one visit: `r + V_{h+1}(x') + b_t`, kept split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitTarget<T> {
    pub reward: T,
    pub next_value: T,
    pub bonus: T,
}

impl<T: Scalar> VisitTarget<T> {
    pub fn total(&self) -> T {
        self.reward + self.next_value + self.bonus
    }
}

/// What an [`Agent::update`] call did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInfo<T> {
    /// Visit count after the increment.
    pub count: u64,
    pub alpha: T,
    pub target: VisitTarget<T>,
}

#[derive(Debug, Clone)]
pub struct Agent<T> {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    q: QTable<T>,
    v: VTable<T>,
    counts: Vec<u64>,
    learning_rate: LearningRateSchedule<T>,
    bonus: BonusSchedule<T>,
    exploration: Exploration,
    tie_break: TieBreak,
    episode: u64,
    frozen: bool,
    ties: Vec<usize>,
}

impl<T: Scalar> Agent<T> {
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        learning_rate: LearningRateSchedule<T>,
        bonus: BonusSchedule<T>,
        exploration: Exploration,
        tie_break: TieBreak,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::contract(format!(
                "agent dimensions must be positive (S={num_states}, A={num_actions}, H={horizon})"
            )));
        }
        if learning_rate.horizon() != horizon {
            return Err(Error::contract(
                "learning-rate schedule horizon differs from agent horizon",
            ));
        }
        let h = T::from_count(horizon as u64);
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            q: QTable::filled(horizon, num_states, num_actions, h),
            v: VTable::filled(horizon, num_states, h),
            counts: vec![0; horizon * num_states * num_actions],
            learning_rate,
            bonus,
            exploration,
            tie_break,
            episode: 1,
            frozen: false,
            ties: Vec::with_capacity(num_actions),
        })
    }

    /// Builds an agent for a run of `episodes` episodes (`iota` uses `T = K * H`).
    pub fn from_config(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        config: &AgentConfig,
        episodes: u64,
    ) -> Result<Self> {
        config
            .validate()
            .map_err(|e| Error::contract(e.to_string()))?;
        let total_steps = episodes
            .checked_mul(horizon as u64)
            .ok_or_else(|| Error::contract("K * H overflows 64 bits"))?;
        let learning_rate = LearningRateSchedule::new(config.learning_rate, horizon)?;
        let bonus =
            BonusSchedule::from_config(config.bonus, num_states, num_actions, total_steps.max(1))?;
        Self::new(
            num_states,
            num_actions,
            horizon,
            learning_rate,
            bonus,
            config.exploration,
            config.tie_break,
        )
    }

    /// Replaces the Q table (shape must match) and recomputes `V`.
    pub fn preload_q(&mut self, q: QTable<T>) -> Result<()> {
        if (q.horizon(), q.num_states(), q.num_actions())
            != (self.horizon, self.num_states, self.num_actions)
        {
            return Err(Error::contract("preloaded Q table has the wrong shape"));
        }
        self.q = q;
        for h in 1..=self.horizon {
            for x in 0..self.num_states {
                self.refresh_value(h, x);
            }
        }
        Ok(())
    }

    /// No-learning mode: updates still count visits but leave `Q` and `V` untouched.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn q(&self) -> &QTable<T> {
        &self.q
    }

    pub fn v(&self) -> &VTable<T> {
        &self.v
    }

    pub fn learning_rate(&self) -> &LearningRateSchedule<T> {
        &self.learning_rate
    }

    pub fn bonus(&self) -> &BonusSchedule<T> {
        &self.bonus
    }

    pub fn exploration(&self) -> Exploration {
        self.exploration
    }

    pub fn tie_break(&self) -> TieBreak {
        self.tie_break
    }

    /// 1-based index of the episode currently being played.
    pub fn episode(&self) -> u64 {
        self.episode
    }

    pub fn finish_episode(&mut self) {
        self.episode += 1;
    }

    #[inline]
    fn cell(&self, h: usize, x: usize, a: usize) -> usize {
        ((h - 1) * self.num_states + x) * self.num_actions + a
    }

    pub fn count(&self, h: usize, x: usize, a: usize) -> u64 {
        self.counts[self.cell(h, x, a)]
    }

    fn check(&self, h: usize, x: usize, a: Option<usize>) -> Result<()> {
        if !(1..=self.horizon).contains(&h)
            || x >= self.num_states
            || a.is_some_and(|a| a >= self.num_actions)
        {
            return Err(Error::contract(format!(
                "index (h={h}, x={x}, a={a:?}) out of range for H={}, S={}, A={}",
                self.horizon, self.num_states, self.num_actions
            )));
        }
        Ok(())
    }

    /// Exploration rate in force during the current episode.
    pub fn current_epsilon(&self) -> f64 {
        match self.exploration {
            Exploration::Greedy => 0.0,
            Exploration::EpsilonGreedy { epsilon, decay } => match decay {
                EpsilonDecay::Constant => epsilon,
                EpsilonDecay::InverseSqrtEpisode => epsilon / (self.episode as f64).sqrt(),
            },
        }
    }

    fn greedy_action<R: Rng + ?Sized>(&mut self, h: usize, x: usize, rng: &mut R) -> usize {
        let row = self.q.row(h, x);
        match self.tie_break {
            TieBreak::LowestIndex => argmax_lowest(row),
            TieBreak::Uniform => {
                let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
                self.ties.clear();
                self.ties.extend(
                    row.iter()
                        .enumerate()
                        .filter(|(_, &v)| v == max)
                        .map(|(a, _)| a),
                );
                if self.ties.len() == 1 {
                    self.ties[0]
                } else {
                    self.ties[rng.random_range(0..self.ties.len())]
                }
            }
        }
    }

    /// Picks the action to play at `(h, x)`.
    pub fn select_action<R: Rng + ?Sized>(
        &mut self,
        h: usize,
        x: usize,
        rng: &mut R,
    ) -> Result<usize> {
        self.check(h, x, None)?;
        if let Exploration::EpsilonGreedy { .. } = self.exploration {
            let epsilon = self.current_epsilon();
            if rng.random::<f64>() < epsilon {
                return Ok(rng.random_range(0..self.num_actions));
            }
        }
        Ok(self.greedy_action(h, x, rng))
    }

    fn refresh_value(&mut self, h: usize, x: usize) {
        let max = self
            .q
            .row(h, x)
            .iter()
            .fold(T::neg_infinity(), |m, &v| m.max(v));
        self.v
            .set(h, x, max.min(T::from_count(self.horizon as u64)));
    }

    /// Applies one Q-learning update for the observed `(h, x, a, r, x')`.
    pub fn update(
        &mut self,
        h: usize,
        x: usize,
        a: usize,
        reward: T,
        next_state: usize,
    ) -> Result<UpdateInfo<T>> {
        self.check(h, x, Some(a))?;
        if next_state >= self.num_states {
            return Err(Error::contract(format!(
                "next state {next_state} out of range"
            )));
        }
        let cell = self.cell(h, x, a);
        self.counts[cell] += 1;
        let t = self.counts[cell];
        let alpha = self.learning_rate.rate(t);
        let target = VisitTarget {
            reward,
            next_value: if h == self.horizon {
                T::zero()
            } else {
                self.v.get(h + 1, next_state)
            },
            bonus: self.bonus.value(t, self.horizon),
        };
        if !self.frozen {
            let old = self.q.get(h, x, a);
            self.q
                .set(h, x, a, (T::one() - alpha) * old + alpha * target.total());
            self.refresh_value(h, x);
        }
        Ok(UpdateInfo {
            count: t,
            alpha,
            target,
        })
    }

    /// Greedy policy with respect to the current Q table.
    pub fn snapshot_greedy_policy(&self) -> Policy<T> {
        let mut policy = Policy::zeroed(self.horizon, self.num_states, self.num_actions);
        greedy_policy_into(&self.q, self.tie_break, &mut policy);
        policy
    }

    /// The policy actually executed during the current episode: greedy, or
    /// its epsilon mixture with the uniform policy.
    pub fn snapshot_executed_policy(&self) -> Policy<T> {
        let mut policy = Policy::zeroed(self.horizon, self.num_states, self.num_actions);
        self.executed_policy_into(&mut policy);
        policy
    }

    pub(crate) fn executed_policy_into(&self, policy: &mut Policy<T>) {
        let epsilon = T::lit(self.current_epsilon());
        let explore = epsilon / T::from_count(self.num_actions as u64);
        for h in 1..=self.horizon {
            for x in 0..self.num_states {
                let row = policy.row_mut(h, x);
                greedy_row(self.q.row(h, x), self.tie_break, row);
                if epsilon > T::zero() {
                    for p in row.iter_mut() {
                        *p = explore + (T::one() - epsilon) * *p;
                    }
                }
            }
        }
    }

    pub fn checkpoint(&self, config: Option<&AgentConfig>) -> AgentCheckpoint<T> {
        AgentCheckpoint {
            config: config.cloned(),
            num_states: self.num_states,
            num_actions: self.num_actions,
            horizon: self.horizon,
            episode: self.episode,
            q: self.q.clone(),
            v: self.v.clone(),
            counts: self.counts.clone(),
        }
    }
}

/// Serializable dump of an agent's tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint<T> {
    pub config: Option<AgentConfig>,
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub episode: u64,
    pub q: QTable<T>,
    pub v: VTable<T>,
    /// Visit counts in `(h, x, a)` row-major order.
    pub counts: Vec<u64>,
}

impl<T: Scalar> AgentCheckpoint<T> {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes")
    }
}

/// Q value after the given visits, from the weighted-sum expansion
/// `alpha_t^0 H + sum_i alpha_t^i (r_i + V_i + b_i)` rather than by iterating updates.
pub fn closed_form_q<T: Scalar>(
    history: &[VisitTarget<T>],
    schedule: &LearningRateSchedule<T>,
    horizon: usize,
) -> T {
    let weights = schedule.alpha_weights(history.len() as u64);
    let init = weights[0] * T::from_count(horizon as u64);
    history
        .iter()
        .zip(&weights[1..])
        .fold(init, |acc, (visit, &w)| acc + w * visit.total())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ucb(s: usize, a: usize, h: usize) -> Agent<f64> {
        Agent::from_config(s, a, h, &AgentConfig::ucb_hoeffding(1.0, 0.05), 100).unwrap()
    }

    #[test]
    fn fresh_agent_is_optimistic_and_unvisited() {
        let agent = ucb(1, 1, 3);
        assert_eq!(agent.q().as_slice(), &[3.0, 3.0, 3.0]);
        assert!(agent.counts.iter().all(|&n| n == 0));
        for h in 1..=3 {
            assert_eq!(agent.v().get(h, 0), 3.0);
        }
        assert_eq!(agent.v().get(4, 0), 0.0);
    }

    #[test]
    fn zero_dimensions_are_rejected() {
        let cfg = AgentConfig::ucb_hoeffding(1.0, 0.05);
        assert!(Agent::<f64>::from_config(0, 1, 1, &cfg, 10).is_err());
        assert!(Agent::<f64>::from_config(1, 0, 1, &cfg, 10).is_err());
        assert!(Agent::<f64>::from_config(1, 1, 0, &cfg, 10).is_err());
    }

    #[test]
    fn greedy_selection_picks_row_max() {
        let mut agent = ucb(1, 3, 1);
        agent
            .preload_q(QTable::from_fn(1, 1, 3, |_, _, a| [5.0, 7.0, 6.0][a]))
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(agent.select_action(1, 0, &mut rng).unwrap(), 1);
        let mut fresh = ucb(2, 4, 2);
        assert_eq!(fresh.select_action(2, 1, &mut rng).unwrap(), 0);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut cfg = AgentConfig::epsilon_greedy(1.0, LearningRate::Harmonic);
        cfg.tie_break = TieBreak::LowestIndex;
        let mut agent = Agent::<f64>::from_config(1, 2, 1, &cfg, 10).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| agent.select_action(1, 0, &mut rng).unwrap() == 1)
            .count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn first_visit_overwrites_with_target() {
        let mut agent = ucb(2, 2, 2);
        let b1 = agent.bonus().bonus(1, 2).unwrap();
        let info = agent.update(1, 0, 1, 0.25, 1).unwrap();
        assert_eq!(info.count, 1);
        assert_abs_diff_eq!(agent.q().get(1, 0, 1), 0.25 + 2.0 + b1, epsilon = 1e-12);
        assert_eq!(info.target.next_value, 2.0);
        // V is capped at H.
        assert_eq!(agent.v().get(1, 0), 2.0);
    }

    #[test]
    fn last_step_reads_zero_continuation() {
        let mut agent = ucb(2, 1, 2);
        let info = agent.update(2, 0, 0, 1.0, 1).unwrap();
        assert_eq!(info.target.next_value, 0.0);
    }

    #[test]
    fn harmonic_without_bonus_reaches_fixed_point() {
        let cfg = AgentConfig {
            name: "plain".into(),
            learning_rate: LearningRate::Harmonic,
            bonus: BonusConfig::None,
            exploration: Exploration::Greedy,
            tie_break: TieBreak::LowestIndex,
        };
        let mut agent = Agent::<f64>::from_config(1, 1, 1, &cfg, 10).unwrap();
        for _ in 0..25 {
            agent.update(1, 0, 0, 1.0, 0).unwrap();
            assert_eq!(agent.q().get(1, 0, 0), 1.0);
        }
    }

    #[test]
    fn update_touches_one_cell() {
        let mut agent = ucb(3, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let (h, x, a) = (
                rng.random_range(1..=3),
                rng.random_range(0..3),
                rng.random_range(0..2),
            );
            let before_q = agent.q().clone();
            let before_v = agent.v().clone();
            let before_n = agent.counts.clone();
            agent
                .update(h, x, a, rng.random::<f64>(), rng.random_range(0..3))
                .unwrap();
            for hh in 1..=3 {
                for xx in 0..3 {
                    for aa in 0..2 {
                        if (hh, xx, aa) != (h, x, a) {
                            assert_eq!(agent.q().get(hh, xx, aa), before_q.get(hh, xx, aa));
                            assert_eq!(agent.count(hh, xx, aa), before_n[agent.cell(hh, xx, aa)]);
                        }
                    }
                    if (hh, xx) != (h, x) {
                        assert_eq!(agent.v().get(hh, xx), before_v.get(hh, xx));
                    }
                }
            }
            assert_eq!(agent.count(h, x, a), before_n[agent.cell(h, x, a)] + 1);
        }
    }

    #[test]
    fn out_of_range_update_is_rejected() {
        let mut agent = ucb(2, 2, 2);
        assert!(agent.update(0, 0, 0, 0.0, 0).is_err());
        assert!(agent.update(1, 2, 0, 0.0, 0).is_err());
        assert!(agent.update(1, 0, 2, 0.0, 0).is_err());
        assert!(agent.update(1, 0, 0, 0.0, 2).is_err());
    }

    #[test]
    fn snapshot_policies() {
        let agent = ucb(2, 3, 2);
        let policy = agent.snapshot_greedy_policy();
        for h in 1..=2 {
            for x in 0..2 {
                assert_eq!(policy.deterministic_action(h, x), Some(0));
            }
        }
        let mut cfg = AgentConfig::ucb_hoeffding(1.0, 0.05);
        cfg.tie_break = TieBreak::Uniform;
        let uniform = Agent::<f64>::from_config(2, 3, 2, &cfg, 10).unwrap();
        let third = 1.0 / 3.0;
        assert_eq!(
            uniform.snapshot_greedy_policy().action_probs(1, 1),
            &[third; 3]
        );
    }

    #[test]
    fn epsilon_mixture_policy() {
        let mut agent = Agent::<f64>::from_config(
            1,
            2,
            1,
            &AgentConfig::epsilon_greedy(0.1, LearningRate::Harmonic),
            10,
        )
        .unwrap();
        agent
            .preload_q(QTable::from_fn(1, 1, 2, |_, _, a| a as f64))
            .unwrap();
        let probs = agent.snapshot_executed_policy();
        assert_abs_diff_eq!(probs.action_probs(1, 0)[0], 0.05, epsilon = 1e-15);
        assert_abs_diff_eq!(probs.action_probs(1, 0)[1], 0.95, epsilon = 1e-15);
    }

    #[test]
    fn decaying_epsilon() {
        let mut cfg = AgentConfig::epsilon_greedy(0.4, LearningRate::Harmonic);
        cfg.exploration = Exploration::EpsilonGreedy {
            epsilon: 0.4,
            decay: EpsilonDecay::InverseSqrtEpisode,
        };
        let mut agent = Agent::<f64>::from_config(1, 2, 1, &cfg, 10).unwrap();
        assert_eq!(agent.current_epsilon(), 0.4);
        for _ in 0..3 {
            agent.finish_episode();
        }
        assert_abs_diff_eq!(agent.current_epsilon(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn closed_form_small_cases() {
        let s = LearningRateSchedule::<f64>::horizon_scaled(3);
        assert_eq!(closed_form_q(&[], &s, 3), 3.0);
        let one = VisitTarget {
            reward: 0.5,
            next_value: 1.25,
            bonus: 0.125,
        };
        assert_eq!(closed_form_q(&[one], &s, 3), 1.875);
    }

    #[test]
    fn closed_form_matches_three_updates() {
        let mut agent = ucb(2, 1, 3);
        let mut history = Vec::new();
        for (r, next) in [(0.3, 1), (0.7, 0), (0.1, 1)] {
            history.push(agent.update(2, 0, 0, r, next).unwrap().target);
        }
        let expected = closed_form_q(&history, agent.learning_rate(), 3);
        assert_abs_diff_eq!(agent.q().get(2, 0, 0), expected, epsilon = 1e-10);
    }

    #[test]
    fn frozen_agent_keeps_its_table() {
        let mut agent = ucb(1, 2, 2);
        agent.freeze();
        agent.update(1, 0, 0, 1.0, 0).unwrap();
        assert_eq!(agent.q().get(1, 0, 0), 2.0);
        assert_eq!(agent.count(1, 0, 0), 1);
    }

    #[test]
    fn checkpoint_serializes() {
        let mut agent = ucb(1, 2, 1);
        agent.update(1, 0, 1, 1.0, 0).unwrap();
        let dump = agent.checkpoint(Some(&AgentConfig::ucb_hoeffding(1.0, 0.05)));
        let text = dump.to_json();
        let back: AgentCheckpoint<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, dump);
        assert_eq!(back.counts, vec![0, 1]);
    }

    #[test]
    fn agent_runs_in_single_precision() {
        let mut agent =
            Agent::<f32>::from_config(1, 1, 2, &AgentConfig::ucb_hoeffding(1.0, 0.05), 10).unwrap();
        agent.update(1, 0, 0, 0.5, 0).unwrap();
        assert!(agent.q().get(1, 0, 0) > 2.0);
    }
}
