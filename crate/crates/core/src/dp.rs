//! Exact backward induction: optimal values `Q*`, `V*` and policy values `V^pi`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::EpisodicMdp;
use crate::scalar::Scalar;
use crate::tables::{QTable, VTable};

/// Optimal action and state values of an MDP. `V*_{H+1}` is identically zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTables<T> {
    pub q_star: QTable<T>,
    pub v_star: VTable<T>,
}

impl<T: Scalar> ValueTables<T> {
    pub fn horizon(&self) -> usize {
        self.q_star.horizon()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("value tables serialize")
    }
}

/// How maximizing actions are resolved when several share the row maximum.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    LowestIndex,
    Uniform,
}

/// A (possibly stochastic) non-stationary policy: one action distribution per `(h, x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy<T> {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    probs: Vec<T>,
}

impl<T: Scalar> Policy<T> {
    /// Deterministic policy; `choose(h, x)` returns the action taken.
    pub fn deterministic(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        mut choose: impl FnMut(usize, usize) -> usize,
    ) -> Result<Self> {
        let mut policy = Self::zeroed(horizon, num_states, num_actions);
        for h in 1..=horizon {
            for x in 0..num_states {
                let a = choose(h, x);
                if a >= num_actions {
                    return Err(Error::contract(format!(
                        "policy action {a} at (h={h}, x={x}) out of range (A={num_actions})"
                    )));
                }
                policy.set_point_mass(h, x, a);
            }
        }
        Ok(policy)
    }

    /// Uniform over all actions at every `(h, x)`.
    pub fn uniform(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        let p = T::one() / T::from_count(num_actions as u64);
        Self {
            horizon,
            num_states,
            num_actions,
            probs: vec![p; horizon * num_states * num_actions],
        }
    }

    /// Stochastic policy from a dense `(h, x, a)` probability tensor.
    pub fn from_probs(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        probs: Vec<T>,
    ) -> Result<Self> {
        if probs.len() != horizon * num_states * num_actions {
            return Err(Error::contract(format!(
                "policy tensor has {} entries, expected H*S*A = {}",
                probs.len(),
                horizon * num_states * num_actions
            )));
        }
        let policy = Self {
            horizon,
            num_states,
            num_actions,
            probs,
        };
        let tol = Self::sum_tolerance(num_actions);
        for h in 1..=horizon {
            for x in 0..num_states {
                let row = policy.action_probs(h, x);
                if row.iter().any(|&p| !(p >= T::zero())) {
                    return Err(Error::contract(format!(
                        "policy row (h={h}, x={x}) has a negative entry"
                    )));
                }
                let sum = row.iter().fold(T::zero(), |acc, &p| acc + p);
                if !((sum - T::one()).abs() <= tol) {
                    return Err(Error::contract(format!(
                        "policy row (h={h}, x={x}) sums to {sum}"
                    )));
                }
            }
        }
        Ok(policy)
    }

    fn sum_tolerance(num_actions: usize) -> T {
        T::lit(1e-12).max(T::epsilon() * T::from_count(4 * num_actions as u64))
    }

    pub(crate) fn zeroed(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            horizon,
            num_states,
            num_actions,
            probs: vec![T::zero(); horizon * num_states * num_actions],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    fn offset(&self, h: usize, x: usize) -> usize {
        ((h - 1) * self.num_states + x) * self.num_actions
    }

    #[inline]
    pub fn action_probs(&self, h: usize, x: usize) -> &[T] {
        let start = self.offset(h, x);
        &self.probs[start..start + self.num_actions]
    }

    pub(crate) fn row_mut(&mut self, h: usize, x: usize) -> &mut [T] {
        let start = self.offset(h, x);
        let n = self.num_actions;
        &mut self.probs[start..start + n]
    }

    pub(crate) fn set_point_mass(&mut self, h: usize, x: usize, a: usize) {
        let row = self.row_mut(h, x);
        row.fill(T::zero());
        row[a] = T::one();
    }

    /// The action at `(h, x)` if the policy is a point mass there.
    pub fn deterministic_action(&self, h: usize, x: usize) -> Option<usize> {
        let row = self.action_probs(h, x);
        let a = row.iter().position(|&p| p == T::one())?;
        row.iter()
            .enumerate()
            .all(|(b, &p)| b == a || p == T::zero())
            .then_some(a)
    }
}

fn check_dims<T: Scalar>(
    mdp: &EpisodicMdp<T>,
    horizon: usize,
    states: usize,
    actions: usize,
) -> Result<()> {
    if (mdp.horizon(), mdp.num_states(), mdp.num_actions()) != (horizon, states, actions) {
        return Err(Error::contract(format!(
            "table dimensions (H={horizon}, S={states}, A={actions}) do not match MDP (H={}, S={}, A={})",
            mdp.horizon(),
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    Ok(())
}

#[inline]
fn expected_next<T: Scalar>(row: &[T], next_values: &[T]) -> T {
    row.iter()
        .zip(next_values)
        .fold(T::zero(), |acc, (&p, &v)| acc + p * v)
}

/// Backward induction from `V*_{H+1} = 0`:
/// `Q*_h(x,a) = r_h(x,a) + sum_x' P_h(x'|x,a) V*_{h+1}(x')`, `V*_h(x) = max_a Q*_h(x,a)`.
pub fn optimal_values<T: Scalar>(mdp: &EpisodicMdp<T>) -> Result<ValueTables<T>> {
    mdp.ensure_valid()?;
    let (horizon, s, a) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let mut q_star = QTable::filled(horizon, s, a, T::zero());
    let mut v_star = VTable::filled(horizon, s, T::zero());
    for h in (1..=horizon).rev() {
        for x in 0..s {
            let mut best = T::neg_infinity();
            for act in 0..a {
                let q = mdp.reward(h, x, act)
                    + expected_next(mdp.transition_row(h, x, act), v_star.step(h + 1));
                q_star.set(h, x, act, q);
                best = best.max(q);
            }
            v_star.set(h, x, best);
        }
    }
    Ok(ValueTables { q_star, v_star })
}

/// Exact `V^pi_h(x)` for every step and state, with `V^pi_{H+1} = 0`.
pub fn policy_value<T: Scalar>(mdp: &EpisodicMdp<T>, policy: &Policy<T>) -> Result<VTable<T>> {
    check_dims(
        mdp,
        policy.horizon(),
        policy.num_states(),
        policy.num_actions(),
    )?;
    let mut values = VTable::filled(mdp.horizon(), mdp.num_states(), T::zero());
    policy_value_into(mdp, policy, &mut values);
    Ok(values)
}

/// [`policy_value`] writing into a caller-owned table of matching shape.
pub(crate) fn policy_value_into<T: Scalar>(
    mdp: &EpisodicMdp<T>,
    policy: &Policy<T>,
    values: &mut VTable<T>,
) {
    let (horizon, s) = (mdp.horizon(), mdp.num_states());
    for x in 0..s {
        values.set(horizon + 1, x, T::zero());
    }
    for h in (1..=horizon).rev() {
        for x in 0..s {
            let probs = policy.action_probs(h, x);
            let mut total = T::zero();
            for (act, &w) in probs.iter().enumerate() {
                if w == T::zero() {
                    continue;
                }
                let q = mdp.reward(h, x, act)
                    + expected_next(mdp.transition_row(h, x, act), values.step(h + 1));
                total = total + w * q;
            }
            values.set(h, x, total);
        }
    }
}

/// Index of the first maximal entry.
pub fn argmax_lowest<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Writes the greedy action distribution for `row` into `out`.
pub(crate) fn greedy_row<T: Scalar>(row: &[T], tie_break: TieBreak, out: &mut [T]) {
    out.fill(T::zero());
    match tie_break {
        TieBreak::LowestIndex => out[argmax_lowest(row)] = T::one(),
        TieBreak::Uniform => {
            let max = row.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
            let ties = row.iter().filter(|&&v| v == max).count();
            let p = T::one() / T::from_count(ties as u64);
            for (o, &v) in out.iter_mut().zip(row) {
                if v == max {
                    *o = p;
                }
            }
        }
    }
}

/// Greedy policy with respect to a Q table.
pub fn greedy_policy<T: Scalar>(q: &QTable<T>, tie_break: TieBreak) -> Policy<T> {
    let mut policy = Policy::zeroed(q.horizon(), q.num_states(), q.num_actions());
    greedy_policy_into(q, tie_break, &mut policy);
    policy
}

pub(crate) fn greedy_policy_into<T: Scalar>(
    q: &QTable<T>,
    tie_break: TieBreak,
    policy: &mut Policy<T>,
) {
    for h in 1..=q.horizon() {
        for x in 0..q.num_states() {
            greedy_row(q.row(h, x), tie_break, policy.row_mut(h, x));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constant_reward(horizon: usize, r: f64) -> EpisodicMdp<f64> {
        EpisodicMdp::from_fn(1, 1, horizon, |_, _, _| vec![1.0], |_, _, _| r, vec![1.0]).unwrap()
    }

    #[test]
    fn unit_rewards_give_remaining_steps() {
        let tables = optimal_values(&constant_reward(4, 1.0)).unwrap();
        for h in 1..=4 {
            assert_eq!(tables.v_star.get(h, 0), (4 - h + 1) as f64);
        }
        assert_eq!(tables.v_star.get(5, 0), 0.0);
    }

    #[test]
    fn zero_rewards_give_zero_values() {
        let mdp = EpisodicMdp::from_fn(
            3,
            2,
            3,
            |_, x, _| {
                let mut row = vec![0.0; 3];
                row[(x + 1) % 3] = 1.0;
                row
            },
            |_, _, _| 0.0,
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        let tables = optimal_values(&mdp).unwrap();
        assert!(tables.q_star.as_slice().iter().all(|&q| q == 0.0));
        assert!(tables.v_star.as_slice().iter().all(|&v| v == 0.0));
        let v = policy_value(&mdp, &Policy::uniform(3, 3, 2)).unwrap();
        assert!(v.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn symmetric_actions_make_uniform_policy_optimal() {
        let mdp = EpisodicMdp::from_fn(
            2,
            3,
            3,
            |h, x, _| {
                let p = 0.2 + 0.1 * (h + x) as f64;
                vec![p, 1.0 - p]
            },
            |h, x, _| 0.1 * (h + 2 * x) as f64,
            vec![0.5, 0.5],
        )
        .unwrap();
        let tables = optimal_values(&mdp).unwrap();
        let v = policy_value(&mdp, &Policy::uniform(3, 2, 3)).unwrap();
        for (a, b) in v.as_slice().iter().zip(tables.v_star.as_slice()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn greedy_rows_follow_tie_rule() {
        let q = QTable::from_fn(1, 3, 2, |_, x, a| match (x, a) {
            (0, 0) => 1.0,
            (0, 1) => 2.0,
            _ => 2.0,
        });
        let lowest = greedy_policy(&q, TieBreak::LowestIndex);
        assert_eq!(lowest.deterministic_action(1, 0), Some(1));
        assert_eq!(lowest.deterministic_action(1, 1), Some(0));
        let uniform = greedy_policy(&q, TieBreak::Uniform);
        assert_eq!(uniform.action_probs(1, 0), &[0.0, 1.0]);
        assert_eq!(uniform.action_probs(1, 1), &[0.5, 0.5]);
        assert_eq!(uniform.deterministic_action(1, 1), None);
    }

    #[test]
    fn policy_construction_rejects_bad_rows() {
        assert!(Policy::<f64>::from_probs(1, 1, 2, vec![0.5, 0.6]).is_err());
        assert!(Policy::<f64>::from_probs(1, 1, 2, vec![1.5, -0.5]).is_err());
        assert!(Policy::<f64>::from_probs(1, 1, 2, vec![0.25, 0.75]).is_ok());
        assert!(Policy::<f64>::deterministic(1, 1, 2, |_, _| 2).is_err());
    }

    #[test]
    fn mismatched_policy_shape_is_rejected() {
        let mdp = constant_reward(2, 1.0);
        assert!(policy_value(&mdp, &Policy::uniform(3, 1, 1)).is_err());
    }

    #[test]
    fn invalid_mdp_is_rejected_by_solver() {
        assert!(optimal_values(&constant_reward(2, 2.0)).is_err());
    }

    #[test]
    fn solver_works_in_single_precision() {
        let mdp = EpisodicMdp::<f32>::from_fn(
            1,
            2,
            3,
            |_, _, _| vec![1.0],
            |_, _, a| a as f32 * 0.5,
            vec![1.0],
        )
        .unwrap();
        let tables = optimal_values(&mdp).unwrap();
        assert_eq!(tables.v_star.get(1, 0), 1.5);
    }
}
