//! Learning-rate schedules `alpha_t`, the visit weights `alpha_t^i` they induce,
//! and exploration-bonus schedules.
//!
//! After `t` visits to a cell, the Q estimate is
//! `alpha_t^0 * H + sum_i alpha_t^i * target_i`, where
//! `alpha_t^0 = prod_{j<=t} (1 - alpha_j)` and
//! `alpha_t^i = alpha_i * prod_{j=i+1..=t} (1 - alpha_j)`.

use std::marker::PhantomData;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which step-size rule an agent uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LearningRate {
    /// `(H + 1) / (H + t)`
    #[default]
    HorizonScaled,
    /// `1 / t`
    Harmonic,
    /// A fixed `alpha` in `(0, 1]`.
    Constant { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearningRateSchedule<T> {
    kind: LearningRate,
    horizon: usize,
    _scalar: PhantomData<T>,
}

impl<T: Scalar> LearningRateSchedule<T> {
    pub fn new(kind: LearningRate, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::contract("learning-rate schedule needs H >= 1"));
        }
        if let LearningRate::Constant { alpha } = kind {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::contract(format!(
                    "constant learning rate {alpha} outside (0, 1]"
                )));
            }
        }
        Ok(Self {
            kind,
            horizon,
            _scalar: PhantomData,
        })
    }

    pub fn horizon_scaled(horizon: usize) -> Self {
        Self::new(LearningRate::HorizonScaled, horizon).expect("horizon >= 1")
    }

    pub fn harmonic(horizon: usize) -> Self {
        Self::new(LearningRate::Harmonic, horizon).expect("horizon >= 1")
    }

    pub fn kind(&self) -> LearningRate {
        self.kind
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// The step size used on the `t`-th visit (`t >= 1`).
    pub fn alpha(&self, t: u64) -> Result<T> {
        if t == 0 {
            return Err(Error::contract("learning rate is defined for t >= 1"));
        }
        Ok(self.rate(t))
    }

    #[inline]
    pub(crate) fn rate(&self, t: u64) -> T {
        debug_assert!(t >= 1);
        match self.kind {
            LearningRate::HorizonScaled => {
                let h = T::from_count(self.horizon as u64);
                (h + T::one()) / (h + T::from_count(t))
            }
            LearningRate::Harmonic => T::one() / T::from_count(t),
            LearningRate::Constant { alpha } => T::lit(alpha),
        }
    }

    /// `alpha_t^i`, the weight of the `i`-th visit's target after `t` visits
    /// (`i = 0` is the weight of the initial value).
    ///
    /// Runs the recurrence `alpha_t^i = (1 - alpha_t) * alpha_{t-1}^i` forward
    /// from `alpha_i^i = alpha_i`.
    pub fn alpha_weight(&self, i: u64, t: u64) -> Result<T> {
        if i > t {
            return Err(Error::contract(format!(
                "weight alpha_t^i needs i <= t (got i={i}, t={t})"
            )));
        }
        let mut weight = if i == 0 { T::one() } else { self.rate(i) };
        for j in (i + 1)..=t {
            weight = weight * (T::one() - self.rate(j));
        }
        Ok(weight)
    }

    /// All weights `[alpha_t^0, alpha_t^1, ..., alpha_t^t]` in `O(t)`.
    pub fn alpha_weights(&self, t: u64) -> Vec<T> {
        let len = t as usize + 1;
        let mut weights = vec![T::zero(); len];
        let mut tail = T::one();
        for i in (1..=t).rev() {
            let rate = self.rate(i);
            weights[i as usize] = rate * tail;
            tail = tail * (T::one() - rate);
        }
        weights[0] = tail;
        weights
    }

    /// Streaming form of the weights, advanced one visit at a time.
    pub fn weights_stream(&self) -> AlphaWeights<T> {
        AlphaWeights {
            schedule: *self,
            weights: vec![T::one()],
        }
    }
}

/// Holds `[alpha_t^0, ..., alpha_t^t]` and advances `t` by one visit per call.
#[derive(Debug, Clone)]
pub struct AlphaWeights<T> {
    schedule: LearningRateSchedule<T>,
    weights: Vec<T>,
}

impl<T: Scalar> AlphaWeights<T> {
    pub fn visits(&self) -> u64 {
        (self.weights.len() - 1) as u64
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn advance(&mut self) -> &[T] {
        let t = self.visits() + 1;
        let rate = self.schedule.rate(t);
        let keep = T::one() - rate;
        for w in &mut self.weights {
            *w = *w * keep;
        }
        self.weights.push(rate);
        &self.weights
    }
}

/// Exploration-bonus choice as written in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BonusConfig {
    /// `c * sqrt(H^3 * iota / t)` with `iota = ln(S A T / p)`.
    Hoeffding {
        #[serde(default = "default_bonus_c")]
        c: f64,
        #[serde(default = "default_failure_p")]
        p: f64,
    },
    None,
}

pub const DEFAULT_BONUS_C: f64 = 1.0;
pub const DEFAULT_FAILURE_P: f64 = 0.05;

fn default_bonus_c() -> f64 {
    DEFAULT_BONUS_C
}

fn default_failure_p() -> f64 {
    DEFAULT_FAILURE_P
}

impl Default for BonusConfig {
    fn default() -> Self {
        BonusConfig::Hoeffding {
            c: DEFAULT_BONUS_C,
            p: DEFAULT_FAILURE_P,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BonusSchedule<T> {
    Hoeffding { c: T, iota: T },
    None,
}

impl<T: Scalar> BonusSchedule<T> {
    /// Hoeffding bonus with `iota = ln(S * A * total_steps / p)`.
    pub fn hoeffding(
        c: f64,
        p: f64,
        num_states: usize,
        num_actions: usize,
        total_steps: u64,
    ) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::contract(format!("bonus constant c={c} must be > 0")));
        }
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::contract(format!(
                "failure probability p={p} outside (0, 1)"
            )));
        }
        if num_states == 0 || num_actions == 0 || total_steps == 0 {
            return Err(Error::contract("iota needs S, A, T >= 1"));
        }
        let sat = num_states as f64 * num_actions as f64 * total_steps as f64;
        Self::hoeffding_with_iota(c, (sat / p).ln())
    }

    pub fn hoeffding_with_iota(c: f64, iota: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::contract(format!("bonus constant c={c} must be > 0")));
        }
        if !(iota > 0.0 && iota.is_finite()) {
            return Err(Error::contract(format!("iota={iota} must be positive")));
        }
        Ok(BonusSchedule::Hoeffding {
            c: T::lit(c),
            iota: T::lit(iota),
        })
    }

    /// Builds the schedule for a run of `total_steps = K * H` steps.
    pub fn from_config(
        config: BonusConfig,
        num_states: usize,
        num_actions: usize,
        total_steps: u64,
    ) -> Result<Self> {
        match config {
            BonusConfig::Hoeffding { c, p } => {
                Self::hoeffding(c, p, num_states, num_actions, total_steps)
            }
            BonusConfig::None => Ok(BonusSchedule::None),
        }
    }

    pub fn iota(&self) -> Option<T> {
        match *self {
            BonusSchedule::Hoeffding { iota, .. } => Some(iota),
            BonusSchedule::None => None,
        }
    }

    /// `b_t` for visit count `t >= 1` in an MDP of horizon `H`.
    pub fn bonus(&self, t: u64, horizon: usize) -> Result<T> {
        if t == 0 {
            return Err(Error::contract("bonus is defined for t >= 1"));
        }
        Ok(self.value(t, horizon))
    }

    #[inline]
    pub(crate) fn value(&self, t: u64, horizon: usize) -> T {
        match *self {
            BonusSchedule::Hoeffding { c, iota } => {
                let h = T::from_count(horizon as u64);
                c * (h * h * h * iota / T::from_count(t)).sqrt()
            }
            BonusSchedule::None => T::zero(),
        }
    }
}
