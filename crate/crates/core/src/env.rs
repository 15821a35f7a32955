//! Seeded benchmark MDP generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::EpisodicMdp;
use crate::scalar::Scalar;

fn default_reward_density() -> f64 {
    1.0
}

fn default_concentration() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvKind {
    /// Dirichlet(`transition_concentration`) rows and uniform rewards, each
    /// zeroed with probability `1 - reward_density`. Start state uniform.
    RandomDense {
        #[serde(default = "default_reward_density")]
        reward_density: f64,
        #[serde(default = "default_concentration")]
        transition_concentration: f64,
    },
    /// States `0..S` in a line. Action 0 moves right (staying put at the
    /// end), every other action returns to state 0. Reward 1 only for
    /// action 0 at the last state. Episodes start at state 0.
    Chain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub kind: EnvKind,
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
}

impl EnvSpec {
    pub fn chain(states: usize, actions: usize, horizon: usize) -> Self {
        Self {
            name: None,
            kind: EnvKind::Chain,
            states,
            actions,
            horizon,
            seed: 0,
        }
    }

    pub fn random_dense(states: usize, actions: usize, horizon: usize, seed: u64) -> Self {
        Self {
            name: None,
            kind: EnvKind::RandomDense {
                reward_density: 1.0,
                transition_concentration: 1.0,
            },
            states,
            actions,
            horizon,
            seed,
        }
    }

    /// Display name; defaults to e.g. `chain-S5A2H6` or `random_dense-S5A3H5-seed1`.
    pub fn label(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        let dims = format!("S{}A{}H{}", self.states, self.actions, self.horizon);
        match self.kind {
            EnvKind::Chain => format!("chain-{dims}"),
            EnvKind::RandomDense { .. } => format!("random_dense-{dims}-seed{}", self.seed),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.states == 0 || self.actions == 0 || self.horizon == 0 {
            return Err(Error::contract(format!(
                "environment dimensions must be positive (S={}, A={}, H={})",
                self.states, self.actions, self.horizon
            )));
        }
        match self.kind {
            EnvKind::Chain => {
                if self.states < 2 || self.actions < 2 || self.horizon + 1 < self.states {
                    return Err(Error::contract(format!(
                        "chain needs S >= 2, A >= 2 and H >= S - 1 (S={}, A={}, H={})",
                        self.states, self.actions, self.horizon
                    )));
                }
            }
            EnvKind::RandomDense {
                reward_density,
                transition_concentration,
            } => {
                if !(reward_density > 0.0 && reward_density <= 1.0) {
                    return Err(Error::contract(format!(
                        "reward_density {reward_density} outside (0, 1]"
                    )));
                }
                if !(transition_concentration > 0.0 && transition_concentration.is_finite()) {
                    return Err(Error::contract(format!(
                        "transition_concentration {transition_concentration} must be > 0"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Builds the MDP described by `spec`. Identical specs give identical MDPs.
pub fn generate<T: Scalar>(spec: &EnvSpec) -> Result<EpisodicMdp<T>> {
    spec.validate()?;
    let mdp = match spec.kind {
        EnvKind::Chain => chain(spec.states, spec.actions, spec.horizon)?,
        EnvKind::RandomDense {
            reward_density,
            transition_concentration,
        } => random_dense(spec, reward_density, transition_concentration)?,
    };
    mdp.ensure_valid()?;
    Ok(mdp)
}

fn chain<T: Scalar>(states: usize, actions: usize, horizon: usize) -> Result<EpisodicMdp<T>> {
    let goal = states - 1;
    let mut initial = vec![T::zero(); states];
    initial[0] = T::one();
    EpisodicMdp::from_fn(
        states,
        actions,
        horizon,
        |_, x, a| {
            let mut row = vec![T::zero(); states];
            let next = if a == 0 { (x + 1).min(goal) } else { 0 };
            row[next] = T::one();
            row
        },
        |_, x, a| {
            if x == goal && a == 0 {
                T::one()
            } else {
                T::zero()
            }
        },
        initial,
    )
}

fn random_dense<T: Scalar>(
    spec: &EnvSpec,
    reward_density: f64,
    concentration: f64,
) -> Result<EpisodicMdp<T>> {
    let (s, a, horizon) = (spec.states, spec.actions, spec.horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::contract(format!("transition_concentration: {e}")))?;
    let cells = horizon * s * a;
    let mut rewards = Vec::with_capacity(cells);
    let mut transitions = Vec::with_capacity(cells * s);
    let mut weights = vec![0.0f64; s];
    for _ in 0..cells {
        // 1 - U lies in (0, 1], so full density never yields a zero reward.
        let r = 1.0 - rng.random::<f64>();
        let keep = rng.random::<f64>() < reward_density;
        rewards.push(T::lit(if keep { r } else { 0.0 }));

        for w in weights.iter_mut() {
            *w = gamma.sample(&mut rng).max(f64::MIN_POSITIVE);
        }
        let total: f64 = weights.iter().sum();
        transitions.extend(weights.iter().map(|w| T::lit(w / total)));
    }
    let initial = vec![T::one() / T::from_count(s as u64); s];
    EpisodicMdp::new(s, a, horizon, transitions, rewards, initial)
}
