//! Backward induction, policy evaluation and occupancy measures.

use super::{Policy, RewardTable, Shape, TabularEnv, ValueTable};
use crate::Result;

/// Value of `pi` in `env` by backward recursion on the mean rewards.
pub fn evaluate_policy(env: &TabularEnv, pi: &Policy) -> Result<ValueTable> {
    evaluate_with_rewards(env, &env.mean_rewards(), pi)
}

/// Value of `pi` using `env`'s transitions and an arbitrary reward table.
pub fn evaluate_with_rewards(env: &TabularEnv, rewards: &RewardTable, pi: &Policy) -> Result<ValueTable> {
    let shape = env.shape();
    shape.ensure_same(&pi.shape(), "policy does not match environment")?;
    shape.ensure_same(&rewards.shape(), "reward table does not match environment")?;
    let mut v = ValueTable::zeros(shape.states, shape.horizon);
    for h in (0..shape.horizon).rev() {
        for s in 0..shape.states {
            let mut acc = 0.0;
            for (a, &p) in pi.row(h, s).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                acc += p * q_value(env, rewards, &v, h, s, a);
            }
            v.set(h, s, acc);
        }
    }
    Ok(v)
}

#[inline]
fn q_value(env: &TabularEnv, rewards: &RewardTable, v: &ValueTable, h: usize, s: usize, a: usize) -> f64 {
    let next = v.layer(h + 1);
    let cont: f64 = env
        .transition_row(h, s, a)
        .iter()
        .zip(next)
        .map(|(p, x)| p * x)
        .sum();
    rewards.get(h, s, a) + cont
}

/// Deterministic optimal policy and its values. Ties go to the lowest action.
pub fn optimal_policy(env: &TabularEnv) -> (Policy, ValueTable) {
    plan_with_rewards(env, &env.mean_rewards()).expect("mean reward table matches its own env")
}

/// Backward induction on `env`'s transitions with the given rewards.
///
/// Rewards are used as-is (no clipping), so shaped rewards above 1 are fine.
pub fn plan_with_rewards(env: &TabularEnv, rewards: &RewardTable) -> Result<(Policy, ValueTable)> {
    let shape = env.shape();
    shape.ensure_same(&rewards.shape(), "reward table does not match environment")?;
    let mut v = ValueTable::zeros(shape.states, shape.horizon);
    let mut choice = vec![0usize; shape.horizon * shape.states];
    for h in (0..shape.horizon).rev() {
        for s in 0..shape.states {
            let mut best = f64::NEG_INFINITY;
            let mut best_a = 0;
            for a in 0..shape.actions {
                let q = q_value(env, rewards, &v, h, s, a);
                if q > best {
                    best = q;
                    best_a = a;
                }
            }
            v.set(h, s, best);
            choice[h * shape.states + s] = best_a;
        }
    }
    let policy = Policy::deterministic(shape, &choice)?;
    Ok((policy, v))
}

/// Value diameter: the largest per-layer spread of optimal state values plus
/// the largest spread of any reward row's support.
pub fn value_diameter(env: &TabularEnv) -> f64 {
    let (_, v) = optimal_policy(env);
    let shape = env.shape();
    let spread = (0..shape.horizon)
        .map(|h| {
            let layer = v.layer(h);
            let hi = layer.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = layer.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        })
        .fold(0.0, f64::max);
    let mut reward_range: f64 = 0.0;
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            for a in 0..shape.actions {
                let (lo, hi) = env.reward_support_range(h, s, a);
                reward_range = reward_range.max(hi - lo);
            }
        }
    }
    spread + reward_range
}

/// State-action occupancy `d_h(s, a) = Pr(s_h = s, a_h = a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Occupancy {
    shape: Shape,
    values: Vec<f64>,
}

impl Occupancy {
    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.values[self.shape.sa_index(h, s, a)]
    }

    pub fn layer(&self, h: usize) -> &[f64] {
        let n = self.shape.states * self.shape.actions;
        &self.values[h * n..(h + 1) * n]
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }
}

pub fn occupancy(env: &TabularEnv, pi: &Policy) -> Result<Occupancy> {
    let shape = env.shape();
    shape.ensure_same(&pi.shape(), "policy does not match environment")?;
    let mut values = vec![0.0; shape.num_contexts()];
    let mut state_dist = vec![0.0; shape.states];
    state_dist[env.initial_state()] = 1.0;
    for h in 0..shape.horizon {
        let mut next = vec![0.0; shape.states];
        for (s, &mu) in state_dist.iter().enumerate() {
            if mu == 0.0 {
                continue;
            }
            for (a, &p) in pi.row(h, s).iter().enumerate() {
                let d = mu * p;
                values[shape.sa_index(h, s, a)] = d;
                if d == 0.0 {
                    continue;
                }
                for (n, &q) in next.iter_mut().zip(env.transition_row(h, s, a)) {
                    *n += d * q;
                }
            }
        }
        state_dist = next;
    }
    Ok(Occupancy { shape, values })
}
