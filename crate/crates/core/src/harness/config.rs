use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::diagnostics::DiagnosticsConfig;
use super::run::StartRule;
use super::scaling::DEFAULT_TAIL_FRACTION;
use crate::agent::{AgentConfig, Exploration};
use crate::env::EnvSpec;
use crate::error::{Error, Result};
use crate::schedule::BonusConfig;

pub const DEFAULT_EPISODES: u64 = 1000;

fn default_episodes() -> u64 {
    DEFAULT_EPISODES
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_tail_fraction() -> f64 {
    DEFAULT_TAIL_FRACTION
}

/// A sweep over environments x agents x seeds. Parsed from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_episodes")]
    pub episodes: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub envs: Vec<EnvSpec>,
    #[serde(default)]
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_tail_fraction")]
    pub tail_fraction: f64,
    /// Fixed per-episode start states, cycled; omitted means sampled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_states: Option<Vec<usize>>,
    /// Worker threads for sweeps; omitted means one per core.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            episodes: DEFAULT_EPISODES,
            seeds: default_seeds(),
            envs: Vec::new(),
            agents: Vec::new(),
            diagnostics: DiagnosticsConfig::default(),
            output_dir: default_output_dir(),
            tail_fraction: DEFAULT_TAIL_FRACTION,
            start_states: None,
            workers: None,
        }
    }
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub episodes: Option<u64>,
    pub bonus_c: Option<f64>,
    pub failure_p: Option<f64>,
    pub epsilon: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub tail_fraction: Option<f64>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies flag values over the file's values.
    ///
    /// `seed` replaces the whole seed list; `bonus_c`/`failure_p` apply to
    /// every Hoeffding agent and `epsilon` to every epsilon-greedy agent.
    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(seed) = overrides.seed {
            self.seeds = vec![seed];
        }
        if let Some(k) = overrides.episodes {
            self.episodes = k;
        }
        for agent in &mut self.agents {
            if let BonusConfig::Hoeffding { c, p } = &mut agent.bonus {
                if let Some(new_c) = overrides.bonus_c {
                    *c = new_c;
                }
                if let Some(new_p) = overrides.failure_p {
                    *p = new_p;
                }
            }
            if let Exploration::EpsilonGreedy { epsilon, .. } = &mut agent.exploration {
                if let Some(e) = overrides.epsilon {
                    *epsilon = e;
                }
            }
        }
        if let Some(dir) = &overrides.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(w) = overrides.workers {
            self.workers = Some(w);
        }
        if let Some(f) = overrides.tail_fraction {
            self.tail_fraction = f;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::config("episodes (K) must be at least 1"));
        }
        if self.envs.is_empty() {
            return Err(Error::config("at least one [[envs]] entry is required"));
        }
        if self.agents.is_empty() {
            return Err(Error::config("at least one [[agents]] entry is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(Error::config(format!(
                "tail_fraction {} outside (0, 1]",
                self.tail_fraction
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::config("workers must be at least 1"));
        }
        if self.diagnostics.optimism_stride == 0 {
            return Err(Error::config(
                "diagnostics.optimism_stride must be at least 1",
            ));
        }
        for env in &self.envs {
            env.validate()
                .map_err(|e| Error::config(format!("{}: {e}", env.label())))?;
            if self.episodes.checked_mul(env.horizon as u64).is_none() {
                return Err(Error::config(format!(
                    "{}: K * H overflows 64 bits",
                    env.label()
                )));
            }
            if let Some(starts) = &self.start_states {
                if starts.is_empty() || starts.iter().any(|&x| x >= env.states) {
                    return Err(Error::config(format!(
                        "{}: start_states must be non-empty valid state indices",
                        env.label()
                    )));
                }
            }
        }
        for agent in &self.agents {
            agent.validate()?;
            if let BonusConfig::Hoeffding { c, p } = agent.bonus {
                if !(c > 0.0 && c.is_finite()) || !(p > 0.0 && p < 1.0) {
                    return Err(Error::config(format!(
                        "agent {:?}: need c > 0 and p in (0, 1), got c={c}, p={p}",
                        agent.name
                    )));
                }
            }
        }
        check_unique(self.envs.iter().map(|e| e.label()), "environment")?;
        check_unique(self.agents.iter().map(|a| a.name.clone()), "agent")?;
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("seeds must be distinct"));
        }
        Ok(())
    }

    pub fn start_rule(&self) -> StartRule {
        match &self.start_states {
            Some(seq) => StartRule::Sequence(seq.clone()),
            None => StartRule::Sampled,
        }
    }
}

fn check_unique(names: impl Iterator<Item = String>, what: &str) -> Result<()> {
    let mut seen: Vec<String> = Vec::new();
    for name in names {
        if name.contains("__") || name.contains('/') || name.contains('\\') {
            return Err(Error::config(format!(
                "{what} name {name:?} may not contain '__' or path separators"
            )));
        }
        if seen.contains(&name) {
            return Err(Error::config(format!("duplicate {what} name {name:?}")));
        }
        seen.push(name);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::EnvKind;

    const MINIMAL: &str = r#"
episodes = 200
seeds = [7]

[[envs]]
kind = "chain"
states = 5
actions = 2
horizon = 6

[[agents]]
name = "ucb-h"

[[agents]]
name = "eps"
bonus = { kind = "none" }
exploration = { kind = "epsilon_greedy", epsilon = 0.2 }
learning_rate = { kind = "harmonic" }
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.envs[0].kind, EnvKind::Chain);
        assert_eq!(cfg.agents[0], AgentConfig::ucb_hoeffding(1.0, 0.05));
        assert_eq!(cfg.tail_fraction, 0.5);
        assert_eq!(cfg.output_dir, PathBuf::from("results"));
        assert!(cfg.diagnostics.decomposition);
        assert_eq!(cfg.diagnostics.decomposition_cells, 32);
    }

    #[test]
    fn flags_override_file_values() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.apply(&Overrides {
            seed: Some(3),
            episodes: Some(50),
            bonus_c: Some(2.0),
            failure_p: Some(0.1),
            epsilon: Some(0.3),
            output_dir: Some("elsewhere".into()),
            workers: Some(2),
            tail_fraction: Some(0.25),
        });
        assert_eq!(cfg.seeds, vec![3]);
        assert_eq!(cfg.episodes, 50);
        assert_eq!(
            cfg.agents[0].bonus,
            BonusConfig::Hoeffding { c: 2.0, p: 0.1 }
        );
        assert_eq!(cfg.agents[1].bonus, BonusConfig::None);
        assert!(matches!(
            cfg.agents[1].exploration,
            Exploration::EpsilonGreedy { epsilon, .. } if epsilon == 0.3
        ));
        assert_eq!(cfg.output_dir, PathBuf::from("elsewhere"));
        assert_eq!(cfg.workers, Some(2));
        assert_eq!(cfg.tail_fraction, 0.25);
    }

    #[test]
    fn empty_overrides_keep_file_values() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        let before = cfg.clone();
        cfg.apply(&Overrides::default());
        assert_eq!(cfg, before);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.episodes = 0;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.agents[1].name = "ucb-h".into();
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        cfg.envs[0].horizon = 2;
        assert!(cfg.validate().is_err());

        assert!(ExperimentConfig::from_toml("episodes = 5\nbogus = 1\n").is_err());
        let none = ExperimentConfig::from_toml("episodes = 5\n").unwrap();
        assert!(none.validate().is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
