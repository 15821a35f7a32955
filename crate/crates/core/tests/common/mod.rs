#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ucbq_core::{closed_form_q, Agent, AgentConfig, Mdp};

pub fn random_mdp(rng: &mut ChaCha8Rng, s: usize, a: usize, h: usize) -> Mdp {
    let mut init: Vec<f64> = (0..s).map(|_| rng.random::<f64>() + 0.01).collect();
    let total: f64 = init.iter().sum();
    init.iter_mut().for_each(|p| *p /= total);
    let rewards: Vec<f64> = (0..h * s * a).map(|_| rng.random()).collect();
    let mdp = Mdp::from_fn(
        s,
        a,
        h,
        |_, _, _| {
            let w: Vec<f64> = (0..s).map(|_| rng.random::<f64>().powi(3)).collect();
            let total: f64 = w.iter().sum::<f64>().max(1e-12);
            w.iter().map(|x| x / total).collect()
        },
        |_, _, _| 0.0,
        init,
    )
    .unwrap();
    Mdp::new(
        s,
        a,
        h,
        mdp.transitions().to_vec(),
        rewards,
        mdp.initial_dist().to_vec(),
    )
    .unwrap()
}

/// Value of a deterministic policy from `start` by propagating the state
/// distribution forward.
pub fn forward_value(mdp: &Mdp, actions: &[usize], start: usize) -> f64 {
    let (s, horizon) = (mdp.num_states(), mdp.horizon());
    let mut dist = vec![0.0; s];
    dist[start] = 1.0;
    let mut value = 0.0;
    for h in 1..=horizon {
        let mut next = vec![0.0; s];
        for x in 0..s {
            if dist[x] == 0.0 {
                continue;
            }
            let a = actions[(h - 1) * s + x];
            value += dist[x] * mdp.reward(h, x, a);
            for (y, p) in mdp.transition_row(h, x, a).iter().enumerate() {
                next[y] += dist[x] * p;
            }
        }
        dist = next;
    }
    value
}

/// Best value from each start state over all `A^(S*H)` deterministic policies.
pub fn brute_force_optimum(mdp: &Mdp) -> Vec<f64> {
    let (s, a, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let slots = s * horizon;
    let count = a.pow(slots as u32);
    let mut best = vec![f64::NEG_INFINITY; s];
    let mut actions = vec![0usize; slots];
    for mut code in 0..count {
        for slot in actions.iter_mut() {
            *slot = code % a;
            code /= a;
        }
        for (start, b) in best.iter_mut().enumerate() {
            *b = b.max(forward_value(mdp, &actions, start));
        }
    }
    best
}

/// Drives the cell `(1, 0, 0)` through `visits` updates while perturbing
/// the step-2 values it bootstraps from. Returns the incremental Q and the
/// closed-form Q for the recorded targets.
pub fn run_history(seed: u64, horizon: usize, visits: usize, config: &AgentConfig) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let states = 3;
    let mut agent = Agent::from_config(states, 2, horizon, config, 1000).unwrap();
    let mut history = Vec::with_capacity(visits);
    for _ in 0..visits {
        if horizon > 1 {
            for _ in 0..rng.random_range(0..3) {
                let (x, a) = (rng.random_range(0..states), rng.random_range(0..2));
                agent
                    .update(2, x, a, rng.random(), rng.random_range(0..states))
                    .unwrap();
            }
        }
        let next = rng.random_range(0..states);
        let info = agent.update(1, 0, 0, rng.random(), next).unwrap();
        history.push(info.target);
    }
    (
        agent.q().get(1, 0, 0),
        closed_form_q(&history, agent.learning_rate(), horizon),
    )
}
