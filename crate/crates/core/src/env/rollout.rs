use rand::Rng;

use super::{Policy, TabularEnv};

/// One episode's path: `H` states and actions, plus the realized reward
/// grid indices when rewards were sampled.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    /// Grid indices of realized rewards, one per layer.
    pub rewards: Option<Vec<usize>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Compact `s0.a0-s1.a1-...` rendering used in logs.
    pub fn render(&self) -> String {
        self.states
            .iter()
            .zip(&self.actions)
            .map(|(s, a)| format!("{s}.{a}"))
            .collect::<Vec<_>>()
            .join("-")
    }
}

/// Draws an index from a probability row by inversion.
#[inline]
pub fn sample_row_index<R: Rng + ?Sized>(row: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in row.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Rolls out `pi` in `env` from the fixed initial state, sampling realized
/// rewards along the way.
pub fn sample_trajectory<R: Rng + ?Sized>(env: &TabularEnv, pi: &Policy, rng: &mut R) -> Trajectory {
    let h_max = env.horizon();
    let mut states = Vec::with_capacity(h_max);
    let mut actions = Vec::with_capacity(h_max);
    let mut rewards = Vec::with_capacity(h_max);
    let mut s = env.initial_state();
    for h in 0..h_max {
        let a = sample_row_index(pi.row(h, s), rng);
        states.push(s);
        actions.push(a);
        rewards.push(sample_row_index(env.reward_row(h, s, a), rng));
        if h + 1 < h_max {
            s = sample_row_index(env.transition_row(h, s, a), rng);
        }
    }
    Trajectory {
        states,
        actions,
        rewards: Some(rewards),
    }
}

/// `r(τ) = Σ_h r_h(s_h, a_h)` using mean rewards.
pub fn trajectory_return(env: &TabularEnv, tau: &Trajectory) -> f64 {
    tau.states
        .iter()
        .zip(&tau.actions)
        .enumerate()
        .map(|(h, (&s, &a))| env.mean_reward(h, s, a))
        .sum()
}
