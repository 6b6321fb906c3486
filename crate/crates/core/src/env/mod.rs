//! Tabular finite-horizon MDPs.
//!
//! Layers are 0-based internally: layer `h` runs over `0..horizon`, and value
//! tables carry one extra terminal layer `horizon` that is identically zero.
//! Rewards are discrete distributions over a shared grid in `[0, 1]`; the mean
//! reward of a state-action pair is the grid expectation of its reward row.

mod io;
mod planning;
mod rollout;

pub use io::EnvDocument;
pub use planning::{
    evaluate_policy, evaluate_with_rewards, occupancy, optimal_policy, plan_with_rewards, value_diameter,
    Occupancy,
};
pub use rollout::{sample_row_index, sample_trajectory, trajectory_return, Trajectory};

use crate::{Error, Result, ROW_SUM_TOL};

/// Dimensions shared by environments and policies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Shape {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
}

impl Shape {
    pub fn new(states: usize, actions: usize, horizon: usize) -> Result<Self> {
        if states == 0 || actions == 0 || horizon == 0 {
            return Err(Error::Config(format!(
                "states, actions and horizon must be positive (got {states}, {actions}, {horizon})"
            )));
        }
        Ok(Shape {
            states,
            actions,
            horizon,
        })
    }

    /// Number of `(h, s, a)` triples.
    pub fn num_contexts(&self) -> usize {
        self.horizon * self.states * self.actions
    }

    /// Flat index of context `(h, s, a)`.
    #[inline]
    pub fn sa_index(&self, h: usize, s: usize, a: usize) -> usize {
        (h * self.states + s) * self.actions + a
    }

    pub(crate) fn ensure_same(&self, other: &Shape, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::Shape(format!("{what}: {self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// One hypothesis environment: per-layer transition kernels and discrete
/// reward distributions over `reward_grid`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularEnv {
    shape: Shape,
    initial_state: usize,
    reward_grid: Vec<f64>,
    /// `[h][s][a][s']`, flattened.
    transitions: Vec<f64>,
    /// `[h][s][a][g]`, flattened.
    rewards: Vec<f64>,
    beta: f64,
    b_cap: f64,
}

impl TabularEnv {
    /// Builds an environment and checks every invariant, including the
    /// probability floor: each entry is either 0 or in `[beta, b_cap]`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        shape: Shape,
        initial_state: usize,
        reward_grid: Vec<f64>,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        beta: f64,
        b_cap: f64,
    ) -> Result<Self> {
        let env = Self::new_unfloored(
            shape,
            initial_state,
            reward_grid,
            transitions,
            rewards,
            beta,
            b_cap,
        )?;
        env.check_floor()?;
        Ok(env)
    }

    /// Builds an environment checking stochasticity but not the floor.
    ///
    /// Convex combinations of floored environments (posterior means,
    /// surrogates) can have atoms below `beta`, so they go through here.
    #[allow(clippy::too_many_arguments)]
    pub fn new_unfloored(
        shape: Shape,
        initial_state: usize,
        reward_grid: Vec<f64>,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        beta: f64,
        b_cap: f64,
    ) -> Result<Self> {
        if initial_state >= shape.states {
            return Err(Error::Config(format!(
                "initial state {initial_state} out of range for {} states",
                shape.states
            )));
        }
        validate_grid(&reward_grid)?;
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::Config(format!("beta must lie in (0, 1), got {beta}")));
        }
        if !(b_cap >= 1.0) {
            return Err(Error::Config(format!("B must be at least 1, got {b_cap}")));
        }
        let n = shape.num_contexts();
        if transitions.len() != n * shape.states {
            return Err(Error::Shape(format!(
                "transition table has {} entries, expected {}",
                transitions.len(),
                n * shape.states
            )));
        }
        if rewards.len() != n * reward_grid.len() {
            return Err(Error::Shape(format!(
                "reward table has {} entries, expected {}",
                rewards.len(),
                n * reward_grid.len()
            )));
        }
        check_rows(&transitions, shape.states, "transition")?;
        check_rows(&rewards, reward_grid.len(), "reward")?;
        Ok(TabularEnv {
            shape,
            initial_state,
            reward_grid,
            transitions,
            rewards,
            beta,
            b_cap,
        })
    }

    fn check_floor(&self) -> Result<()> {
        for (name, table) in [("transition", &self.transitions), ("reward", &self.rewards)] {
            if let Some(x) = table
                .iter()
                .find(|&&x| x != 0.0 && (x < self.beta || x > self.b_cap))
            {
                return Err(Error::Config(format!(
                    "{name} entry {x} violates the floor/cap [{}, {}]",
                    self.beta, self.b_cap
                )));
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn num_states(&self) -> usize {
        self.shape.states
    }

    pub fn num_actions(&self) -> usize {
        self.shape.actions
    }

    pub fn horizon(&self) -> usize {
        self.shape.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn reward_grid(&self) -> &[f64] {
        &self.reward_grid
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn b_cap(&self) -> f64 {
        self.b_cap
    }

    pub fn transitions(&self) -> &[f64] {
        &self.transitions
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    #[inline]
    pub fn transition_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let n = self.shape.states;
        let i = self.shape.sa_index(h, s, a) * n;
        &self.transitions[i..i + n]
    }

    #[inline]
    pub fn reward_row(&self, h: usize, s: usize, a: usize) -> &[f64] {
        let m = self.reward_grid.len();
        let i = self.shape.sa_index(h, s, a) * m;
        &self.rewards[i..i + m]
    }

    /// `r_h(s, a)`: expectation of the reward row over the grid.
    #[inline]
    pub fn mean_reward(&self, h: usize, s: usize, a: usize) -> f64 {
        self.reward_row(h, s, a)
            .iter()
            .zip(&self.reward_grid)
            .map(|(p, x)| p * x)
            .sum()
    }

    pub fn mean_rewards(&self) -> RewardTable {
        let s = self.shape;
        let mut values = Vec::with_capacity(s.num_contexts());
        for h in 0..s.horizon {
            for st in 0..s.states {
                for a in 0..s.actions {
                    values.push(self.mean_reward(h, st, a));
                }
            }
        }
        RewardTable { shape: s, values }
    }

    /// Largest and smallest grid values carrying nonzero mass in a reward row.
    pub fn reward_support_range(&self, h: usize, s: usize, a: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (p, &x) in self.reward_row(h, s, a).iter().zip(&self.reward_grid) {
            if *p > 0.0 {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        (lo, hi)
    }

    /// Checks that `other` has the same shape, initial state and reward grid.
    pub fn ensure_compatible(&self, other: &TabularEnv) -> Result<()> {
        self.shape
            .ensure_same(&other.shape, "environment shapes differ")?;
        if self.initial_state != other.initial_state || self.reward_grid != other.reward_grid {
            return Err(Error::Shape(
                "environments differ in initial state or reward grid".into(),
            ));
        }
        Ok(())
    }

    /// Row-wise convex combination `Σ_i w_i · envs[i]`.
    ///
    /// Weights must be nonnegative and sum to one. The result is not
    /// required to satisfy the probability floor.
    pub fn mixture(envs: &[&TabularEnv], weights: &[f64]) -> Result<TabularEnv> {
        let first = *envs
            .first()
            .ok_or_else(|| Error::Config("mixture of zero environments".into()))?;
        if envs.len() != weights.len() {
            return Err(Error::Shape(format!(
                "{} environments but {} weights",
                envs.len(),
                weights.len()
            )));
        }
        for e in &envs[1..] {
            first.ensure_compatible(e)?;
        }
        let mut transitions = vec![0.0; first.transitions.len()];
        let mut rewards = vec![0.0; first.rewards.len()];
        for (e, &w) in envs.iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            for (acc, x) in transitions.iter_mut().zip(&e.transitions) {
                *acc += w * x;
            }
            for (acc, x) in rewards.iter_mut().zip(&e.rewards) {
                *acc += w * x;
            }
        }
        TabularEnv::new_unfloored(
            first.shape,
            first.initial_state,
            first.reward_grid.clone(),
            transitions,
            rewards,
            first.beta,
            first.b_cap,
        )
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("reward grid is empty".into()));
    }
    if grid.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Config("reward grid values must lie in [0, 1]".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("reward grid must be strictly increasing".into()));
    }
    Ok(())
}

fn check_rows(table: &[f64], width: usize, name: &str) -> Result<()> {
    for (i, row) in table.chunks(width).enumerate() {
        if row.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::Config(format!(
                "{name} row {i} has a negative or non-finite entry"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::Config(format!("{name} row {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// Uniform grid of `m ≥ 2` points on `[0, 1]`, endpoints included.
pub fn uniform_grid(m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::Config(format!(
            "reward grid needs at least 2 levels, got {m}"
        )));
    }
    Ok((0..m).map(|i| i as f64 / (m - 1) as f64).collect())
}

/// Mean reward per `(h, s, a)`; also used for shaped rewards that may exceed 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    shape: Shape,
    values: Vec<f64>,
}

impl RewardTable {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.num_contexts() {
            return Err(Error::Shape(format!(
                "reward table has {} entries, expected {}",
                values.len(),
                shape.num_contexts()
            )));
        }
        Ok(RewardTable { shape, values })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.values[self.shape.sa_index(h, s, a)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Stochastic stationary policy: per layer, a distribution over actions for
/// every state.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    shape: Shape,
    /// `[h][s][a]`, flattened.
    probs: Vec<f64>,
}

impl Policy {
    pub fn new(shape: Shape, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != shape.num_contexts() {
            return Err(Error::Shape(format!(
                "policy table has {} entries, expected {}",
                probs.len(),
                shape.num_contexts()
            )));
        }
        check_rows(&probs, shape.actions, "policy")?;
        Ok(Policy { shape, probs })
    }

    pub fn uniform(shape: Shape) -> Self {
        let p = 1.0 / shape.actions as f64;
        Policy {
            shape,
            probs: vec![p; shape.num_contexts()],
        }
    }

    /// Deterministic policy from an action per `(h, s)`, layer-major.
    pub fn deterministic(shape: Shape, actions: &[usize]) -> Result<Self> {
        if actions.len() != shape.horizon * shape.states {
            return Err(Error::Shape(format!(
                "expected {} action choices, got {}",
                shape.horizon * shape.states,
                actions.len()
            )));
        }
        let mut probs = vec![0.0; shape.num_contexts()];
        for (i, &a) in actions.iter().enumerate() {
            if a >= shape.actions {
                return Err(Error::Config(format!("action {a} out of range")));
            }
            probs[i * shape.actions + a] = 1.0;
        }
        Ok(Policy { shape, probs })
    }

    /// Per-state mixture `w · self + (1 - w) · other`.
    pub fn mix(&self, other: &Policy, w: f64) -> Result<Policy> {
        self.shape.ensure_same(&other.shape, "policy mixture")?;
        let probs = self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| w * a + (1.0 - w) * b)
            .collect();
        Ok(Policy {
            shape: self.shape,
            probs,
        })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    #[inline]
    pub fn row(&self, h: usize, s: usize) -> &[f64] {
        let i = (h * self.shape.states + s) * self.shape.actions;
        &self.probs[i..i + self.shape.actions]
    }

    #[inline]
    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.probs[self.shape.sa_index(h, s, a)]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }
}

/// State values per layer, including the terminal layer `H` fixed at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTable {
    states: usize,
    horizon: usize,
    values: Vec<f64>,
}

impl ValueTable {
    pub(crate) fn zeros(states: usize, horizon: usize) -> Self {
        ValueTable {
            states,
            horizon,
            values: vec![0.0; (horizon + 1) * states],
        }
    }

    /// Value at 0-based layer `h ∈ 0..=H`.
    #[inline]
    pub fn get(&self, h: usize, s: usize) -> f64 {
        self.values[h * self.states + s]
    }

    #[inline]
    pub(crate) fn set(&mut self, h: usize, s: usize, v: f64) {
        self.values[h * self.states + s] = v;
    }

    pub fn layer(&self, h: usize) -> &[f64] {
        &self.values[h * self.states..(h + 1) * self.states]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}
