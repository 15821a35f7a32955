//! Q-learning with UCB-Hoeffding exploration on finite episodic MDPs.
//!
//! The MDP, solver, schedule and agent code is generic over [`Scalar`]
//! (`f32` or `f64`); the aliases below fix the double-precision types the
//! experiment harness runs on.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod dp;
pub mod env;
pub mod error;
pub mod harness;
pub mod mdp;
pub mod scalar;
pub mod schedule;
pub mod tables;

pub use agent::{closed_form_q, AgentConfig, EpsilonDecay, Exploration, UpdateInfo, VisitTarget};
pub use dp::{greedy_policy, optimal_values, policy_value, TieBreak};
pub use env::{generate, EnvKind, EnvSpec};
pub use error::{Error, Result};
pub use mdp::{Transition, ValidationReport, Violation};
pub use scalar::Scalar;
pub use schedule::{BonusConfig, LearningRate};

pub type Mdp = mdp::EpisodicMdp<f64>;
pub type Agent = agent::Agent<f64>;
pub type ValueTables = dp::ValueTables<f64>;
pub type Policy = dp::Policy<f64>;
pub type QTable = tables::QTable<f64>;
pub type VTable = tables::VTable<f64>;
pub type LearningRateSchedule = schedule::LearningRateSchedule<f64>;
pub type BonusSchedule = schedule::BonusSchedule<f64>;

pub type Mdp32 = mdp::EpisodicMdp<f32>;
pub type Agent32 = agent::Agent<f32>;
