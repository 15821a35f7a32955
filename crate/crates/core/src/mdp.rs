//! Finite episodic MDPs: the `(S, A, H, P, r)` tuple plus an initial-state
//! distribution, structural validation, and seeded simulation.

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Tolerance on probability rows and the initial distribution.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// A finite-horizon MDP with deterministic rewards in `[0, 1]`.
///
/// Steps are 1-based (`1..=H`); states and actions are 0-based.
/// Transitions are stored row-major in `(h, x, a, x')` order and rewards in
/// `(h, x, a)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodicMdp<T> {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    transitions: Vec<T>,
    rewards: Vec<T>,
    initial_dist: Vec<T>,
}

/// One simulated step of an episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<T> {
    pub step: usize,
    pub state: usize,
    pub action: usize,
    pub reward: T,
    pub next_state: usize,
}

impl<T: Scalar> EpisodicMdp<T> {
    /// Builds an MDP from dense tensors.
    ///
    /// Only shapes are checked here; probability and reward ranges are
    /// reported by [`EpisodicMdp::validate`].
    pub fn new(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        transitions: Vec<T>,
        rewards: Vec<T>,
        initial_dist: Vec<T>,
    ) -> Result<Self> {
        if num_states == 0 || num_actions == 0 || horizon == 0 {
            return Err(Error::contract(format!(
                "MDP dimensions must be positive (S={num_states}, A={num_actions}, H={horizon})"
            )));
        }
        let cells = horizon * num_states * num_actions;
        if transitions.len() != cells * num_states {
            return Err(Error::contract(format!(
                "transition tensor has {} entries, expected H*S*A*S = {}",
                transitions.len(),
                cells * num_states
            )));
        }
        if rewards.len() != cells {
            return Err(Error::contract(format!(
                "reward tensor has {} entries, expected H*S*A = {cells}",
                rewards.len()
            )));
        }
        if initial_dist.len() != num_states {
            return Err(Error::contract(format!(
                "initial distribution has {} entries, expected S = {num_states}",
                initial_dist.len()
            )));
        }
        Ok(Self {
            num_states,
            num_actions,
            horizon,
            transitions,
            rewards,
            initial_dist,
        })
    }

    /// Builds an MDP by evaluating closures over every index.
    ///
    /// `transition(h, x, a)` must return a row of length `S`.
    pub fn from_fn(
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        mut transition: impl FnMut(usize, usize, usize) -> Vec<T>,
        mut reward: impl FnMut(usize, usize, usize) -> T,
        initial_dist: Vec<T>,
    ) -> Result<Self> {
        let mut transitions = Vec::with_capacity(horizon * num_states * num_actions * num_states);
        let mut rewards = Vec::with_capacity(horizon * num_states * num_actions);
        for h in 1..=horizon {
            for x in 0..num_states {
                for a in 0..num_actions {
                    let row = transition(h, x, a);
                    if row.len() != num_states {
                        return Err(Error::contract(format!(
                            "transition row (h={h}, x={x}, a={a}) has {} entries, expected {num_states}",
                            row.len()
                        )));
                    }
                    transitions.extend(row);
                    rewards.push(reward(h, x, a));
                }
            }
        }
        Self::new(
            num_states,
            num_actions,
            horizon,
            transitions,
            rewards,
            initial_dist,
        )
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

    pub fn initial_dist(&self) -> &[T] {
        &self.initial_dist
    }

    pub fn transitions(&self) -> &[T] {
        &self.transitions
    }

    pub fn rewards(&self) -> &[T] {
        &self.rewards
    }

    #[inline]
    fn cell(&self, h: usize, x: usize, a: usize) -> usize {
        ((h - 1) * self.num_states + x) * self.num_actions + a
    }

    pub fn check_index(&self, h: usize, x: usize, a: usize) -> Result<()> {
        if !(1..=self.horizon).contains(&h) {
            return Err(Error::contract(format!(
                "step {h} outside 1..={}",
                self.horizon
            )));
        }
        if x >= self.num_states {
            return Err(Error::contract(format!(
                "state {x} out of range (S={})",
                self.num_states
            )));
        }
        if a >= self.num_actions {
            return Err(Error::contract(format!(
                "action {a} out of range (A={})",
                self.num_actions
            )));
        }
        Ok(())
    }

    /// `P_h(. | x, a)`. Panics on out-of-range indices.
    #[inline]
    pub fn transition_row(&self, h: usize, x: usize, a: usize) -> &[T] {
        let start = self.cell(h, x, a) * self.num_states;
        &self.transitions[start..start + self.num_states]
    }

    /// `r_h(x, a)`. Panics on out-of-range indices.
    #[inline]
    pub fn reward(&self, h: usize, x: usize, a: usize) -> T {
        self.rewards[self.cell(h, x, a)]
    }

    /// Checks every probability row, reward and the initial distribution,
    /// collecting all violations instead of stopping at the first.
    pub fn validate(&self) -> ValidationReport {
        let tol = T::lit(PROBABILITY_TOLERANCE);
        let mut violations = Vec::new();
        for h in 1..=self.horizon {
            for x in 0..self.num_states {
                for a in 0..self.num_actions {
                    let row = self.transition_row(h, x, a);
                    let mut sum = T::zero();
                    for (next, &p) in row.iter().enumerate() {
                        if !(p >= T::zero()) {
                            violations.push(Violation::NegativeProbability {
                                step: h,
                                state: x,
                                action: a,
                                next_state: next,
                                value: p.as_f64(),
                            });
                        }
                        sum = sum + p;
                    }
                    if !((sum - T::one()).abs() <= tol) {
                        violations.push(Violation::RowSum {
                            step: h,
                            state: x,
                            action: a,
                            sum: sum.as_f64(),
                        });
                    }
                    let r = self.reward(h, x, a);
                    if !(r >= T::zero() && r <= T::one()) {
                        violations.push(Violation::RewardOutOfRange {
                            step: h,
                            state: x,
                            action: a,
                            value: r.as_f64(),
                        });
                    }
                }
            }
        }
        let mut sum = T::zero();
        for (x, &p) in self.initial_dist.iter().enumerate() {
            if !(p >= T::zero()) {
                violations.push(Violation::NegativeInitial {
                    state: x,
                    value: p.as_f64(),
                });
            }
            sum = sum + p;
        }
        if !((sum - T::one()).abs() <= tol) {
            violations.push(Violation::InitialSum { sum: sum.as_f64() });
        }
        ValidationReport { violations }
    }

    /// Like [`validate`](Self::validate) but fails on the first report with violations.
    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_ok() {
            Ok(())
        } else {
            Err(Error::contract(format!("invalid MDP: {report}")))
        }
    }

    /// Draws `x' ~ P_h(. | x, a)` by inverse CDF over one uniform variate.
    pub fn sample_next_state<R: Rng + ?Sized>(
        &self,
        h: usize,
        x: usize,
        a: usize,
        rng: &mut R,
    ) -> Result<usize> {
        self.check_index(h, x, a)?;
        Ok(sample_index(self.transition_row(h, x, a), rng))
    }

    /// Draws `x_1` from the initial distribution using one uniform variate.
    pub fn sample_initial_state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_index(&self.initial_dist, rng)
    }

    /// Simulates one episode from a start state drawn from the initial distribution.
    pub fn run_episode<R, P>(&self, policy: P, rng: &mut R) -> Result<Vec<Transition<T>>>
    where
        R: Rng + ?Sized,
        P: FnMut(usize, usize) -> usize,
    {
        let start = self.sample_initial_state(rng);
        self.run_episode_from(start, policy, rng)
    }

    /// Simulates one episode of exactly `H` steps starting at `start`.
    pub fn run_episode_from<R, P>(
        &self,
        start: usize,
        mut policy: P,
        rng: &mut R,
    ) -> Result<Vec<Transition<T>>>
    where
        R: Rng + ?Sized,
        P: FnMut(usize, usize) -> usize,
    {
        if start >= self.num_states {
            return Err(Error::contract(format!(
                "start state {start} out of range (S={})",
                self.num_states
            )));
        }
        let mut trajectory = Vec::with_capacity(self.horizon);
        let mut x = start;
        for h in 1..=self.horizon {
            let a = policy(h, x);
            if a >= self.num_actions {
                return Err(Error::contract(format!(
                    "policy chose action {a} at (h={h}, x={x}) but A={}",
                    self.num_actions
                )));
            }
            let next_state = sample_index(self.transition_row(h, x, a), rng);
            trajectory.push(Transition {
                step: h,
                state: x,
                action: a,
                reward: self.reward(h, x, a),
                next_state,
            });
            x = next_state;
        }
        Ok(trajectory)
    }

    pub fn to_file_format(&self) -> MdpFile<T> {
        MdpFile {
            format: MDP_FORMAT.to_string(),
            num_states: self.num_states,
            num_actions: self.num_actions,
            horizon: self.horizon,
            index_order: IndexOrder::default(),
            transitions: self.transitions.clone(),
            rewards: self.rewards.clone(),
            initial_dist: self.initial_dist.clone(),
        }
    }

    /// Canonical pretty-printed JSON form.
    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(&self.to_file_format())
            .expect("MDP serialization cannot fail");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: MdpFile<T> = serde_json::from_str(text)?;
        file.into_mdp()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Inverse-CDF draw scanning indices in order. Rounding leftovers go to the
/// last index with positive mass.
pub(crate) fn sample_index<T: Scalar, R: Rng + ?Sized>(probs: &[T], rng: &mut R) -> usize {
    let u = T::lit(rng.random::<f64>());
    let mut cumulative = T::zero();
    for (i, &p) in probs.iter().enumerate() {
        cumulative = cumulative + p;
        if u < cumulative {
            return i;
        }
    }
    probs
        .iter()
        .rposition(|&p| p > T::zero())
        .unwrap_or(probs.len() - 1)
}

pub const MDP_FORMAT: &str = "episodic-mdp/v1";

/// Documents how the flat tensors in an [`MdpFile`] are laid out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexOrder {
    pub transitions: String,
    pub rewards: String,
    pub steps: String,
}

impl Default for IndexOrder {
    fn default() -> Self {
        Self {
            transitions: "row-major [step][state][action][next_state]".into(),
            rewards: "row-major [step][state][action]".into(),
            steps: "step index 1..=horizon maps to position 0..horizon".into(),
        }
    }
}

/// On-disk representation of an [`EpisodicMdp`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpFile<T> {
    pub format: String,
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    #[serde(default)]
    pub index_order: IndexOrder,
    pub transitions: Vec<T>,
    pub rewards: Vec<T>,
    pub initial_dist: Vec<T>,
}

impl<T: Scalar> MdpFile<T> {
    pub fn into_mdp(self) -> Result<EpisodicMdp<T>> {
        if self.format != MDP_FORMAT {
            return Err(Error::contract(format!(
                "unsupported MDP format {:?}, expected {MDP_FORMAT:?}",
                self.format
            )));
        }
        EpisodicMdp::new(
            self.num_states,
            self.num_actions,
            self.horizon,
            self.transitions,
            self.rewards,
            self.initial_dist,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NegativeProbability {
        step: usize,
        state: usize,
        action: usize,
        next_state: usize,
        value: f64,
    },
    RowSum {
        step: usize,
        state: usize,
        action: usize,
        sum: f64,
    },
    RewardOutOfRange {
        step: usize,
        state: usize,
        action: usize,
        value: f64,
    },
    NegativeInitial {
        state: usize,
        value: f64,
    },
    InitialSum {
        sum: f64,
    },
}

impl Violation {
    /// The `(h, x, a)` cell the violation refers to, if any.
    pub fn cell(&self) -> Option<(usize, usize, usize)> {
        match *self {
            Violation::NegativeProbability {
                step,
                state,
                action,
                ..
            }
            | Violation::RowSum {
                step,
                state,
                action,
                ..
            }
            | Violation::RewardOutOfRange {
                step,
                state,
                action,
                ..
            } => Some((step, state, action)),
            _ => None,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NegativeProbability {
                step,
                state,
                action,
                next_state,
                value,
            } => write!(
                f,
                "(h={step}, x={state}, a={action}): negative transition probability {value} to state {next_state}"
            ),
            Violation::RowSum {
                step,
                state,
                action,
                sum,
            } => write!(
                f,
                "(h={step}, x={state}, a={action}): transition row sums to {sum}, expected 1"
            ),
            Violation::RewardOutOfRange {
                step,
                state,
                action,
                value,
            } => write!(
                f,
                "(h={step}, x={state}, a={action}): reward out of [0,1]: {value}"
            ),
            Violation::NegativeInitial { state, value } => {
                write!(f, "initial distribution: negative mass {value} on state {state}")
            }
            Violation::InitialSum { sum } => {
                write!(f, "initial distribution sums to {sum}, expected 1")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
