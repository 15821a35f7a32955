//! Dense step-indexed tables shared by the solver and the agents.
//!
//! Steps are 1-based (`1..=H` for action values, `1..=H+1` for state
//! values); states and actions are 0-based indices.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Action-value table `Q_h(x, a)` stored row-major in `(h, x, a)` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable<T> {
    horizon: usize,
    num_states: usize,
    num_actions: usize,
    values: Vec<T>,
}

impl<T: Scalar> QTable<T> {
    pub fn filled(horizon: usize, num_states: usize, num_actions: usize, value: T) -> Self {
        Self {
            horizon,
            num_states,
            num_actions,
            values: vec![value; horizon * num_states * num_actions],
        }
    }

    pub fn from_fn(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Self {
        let mut values = Vec::with_capacity(horizon * num_states * num_actions);
        for h in 1..=horizon {
            for x in 0..num_states {
                for a in 0..num_actions {
                    values.push(f(h, x, a));
                }
            }
        }
        Self {
            horizon,
            num_states,
            num_actions,
            values,
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
    fn offset(&self, h: usize, x: usize, a: usize) -> usize {
        debug_assert!(
            (1..=self.horizon).contains(&h) && x < self.num_states && a < self.num_actions
        );
        ((h - 1) * self.num_states + x) * self.num_actions + a
    }

    #[inline]
    pub fn get(&self, h: usize, x: usize, a: usize) -> T {
        self.values[self.offset(h, x, a)]
    }

    #[inline]
    pub fn set(&mut self, h: usize, x: usize, a: usize, value: T) {
        let i = self.offset(h, x, a);
        self.values[i] = value;
    }

    /// All action values at `(h, x)`.
    #[inline]
    pub fn row(&self, h: usize, x: usize) -> &[T] {
        let start = self.offset(h, x, 0);
        &self.values[start..start + self.num_actions]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }
}

/// State-value table `V_h(x)` for `h in 1..=H+1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VTable<T> {
    horizon: usize,
    num_states: usize,
    values: Vec<T>,
}

impl<T: Scalar> VTable<T> {
    /// A table whose steps `1..=H` hold `value` and whose terminal step is zero.
    pub fn filled(horizon: usize, num_states: usize, value: T) -> Self {
        let mut values = vec![value; (horizon + 1) * num_states];
        values[horizon * num_states..].fill(T::zero());
        Self {
            horizon,
            num_states,
            values,
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    fn offset(&self, h: usize, x: usize) -> usize {
        debug_assert!((1..=self.horizon + 1).contains(&h) && x < self.num_states);
        (h - 1) * self.num_states + x
    }

    #[inline]
    pub fn get(&self, h: usize, x: usize) -> T {
        self.values[self.offset(h, x)]
    }

    #[inline]
    pub fn set(&mut self, h: usize, x: usize, value: T) {
        let i = self.offset(h, x);
        self.values[i] = value;
    }

    /// Values of every state at step `h`.
    pub fn step(&self, h: usize) -> &[T] {
        let start = self.offset(h, 0);
        &self.values[start..start + self.num_states]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q_layout_is_row_major_in_step_state_action() {
        let q = QTable::<f64>::from_fn(2, 3, 2, |h, x, a| (100 * h + 10 * x + a) as f64);
        assert_eq!(q.as_slice()[0], 100.0);
        assert_eq!(q.as_slice()[1], 101.0);
        assert_eq!(q.as_slice()[2], 110.0);
        assert_eq!(q.as_slice()[6], 200.0);
        assert_eq!(q.row(2, 1), &[210.0, 211.0]);
    }

    #[test]
    fn terminal_step_is_zero() {
        let v = VTable::<f32>::filled(3, 2, 3.0);
        assert_eq!(v.step(1), &[3.0, 3.0]);
        assert_eq!(v.step(4), &[0.0, 0.0]);
    }
}
