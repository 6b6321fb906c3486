//! Random hypothesis sets for experiments.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::HypothesisPosterior;
use crate::env::{uniform_grid, Shape, TabularEnv};
use crate::{Error, Result};

const MAX_ROW_RETRIES: usize = 100;

/// Parameters of the hypothesis generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub states: usize,
    pub actions: usize,
    pub horizon: usize,
    /// Number of reward grid points `m` (uniform on `[0, 1]`).
    pub reward_levels: usize,
    /// Number of hypotheses `N`.
    pub hypotheses: usize,
    pub beta: f64,
    pub b_cap: f64,
    /// Symmetric Dirichlet concentration.
    pub concentration: f64,
    /// Probability of zeroing each atom before the Dirichlet draw.
    pub sparsity: f64,
    /// When positive, draw this many base environments and make every
    /// hypothesis a jittered copy of base `i mod clusters`.
    pub clusters: usize,
    /// Log-scale jitter half-width for clustered sets: each nonzero atom is
    /// multiplied by `exp(u)`, `u ~ U[-jitter, jitter]`, then renormalized.
    pub jitter: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            states: 3,
            actions: 2,
            horizon: 3,
            reward_levels: 5,
            hypotheses: 32,
            beta: 0.05,
            b_cap: 1.0,
            concentration: 1.0,
            sparsity: 0.0,
            clusters: 0,
            jitter: 0.0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        Shape::new(self.states, self.actions, self.horizon)?;
        uniform_grid(self.reward_levels)?;
        if self.hypotheses == 0 {
            return Err(Error::Config("need at least one hypothesis".into()));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return Err(Error::Config(format!(
                "beta must lie in (0, 1), got {}",
                self.beta
            )));
        }
        if !(self.b_cap >= 1.0) {
            return Err(Error::Config(format!("B must be at least 1, got {}", self.b_cap)));
        }
        for (n, what) in [(self.states, "states"), (self.reward_levels, "reward levels")] {
            if self.beta * n as f64 > 1.0 {
                return Err(Error::Config(format!(
                    "floor beta = {} is infeasible with {n} {what} (beta * n > 1)",
                    self.beta
                )));
            }
        }
        if !(self.concentration > 0.0 && self.concentration.is_finite()) {
            return Err(Error::Config("Dirichlet concentration must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::Config("sparsity must lie in [0, 1)".into()));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::Config("jitter must be finite and nonnegative".into()));
        }
        Ok(())
    }
}

/// One floored probability row: sparse mask, Dirichlet draw, then zero the
/// atoms below `beta` and renormalize.
fn floored_row<R: Rng + ?Sized>(
    n: usize,
    cfg: &GenConfig,
    gamma: &Gamma<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    for _ in 0..MAX_ROW_RETRIES {
        let mut row: Vec<f64> = (0..n)
            .map(|_| {
                let keep = cfg.sparsity == 0.0 || rng.random::<f64>() >= cfg.sparsity;
                let g = gamma.sample(rng);
                if keep {
                    g
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = row.iter().sum();
        if !(total > 0.0) {
            continue;
        }
        row.iter_mut().for_each(|x| *x /= total);
        row.iter_mut().filter(|x| **x < cfg.beta).for_each(|x| *x = 0.0);
        let total: f64 = row.iter().sum();
        if !(total > 0.0) {
            continue;
        }
        row.iter_mut().for_each(|x| *x /= total);
        if row.iter().all(|&x| x == 0.0 || (x >= cfg.beta && x <= cfg.b_cap)) {
            return Ok(row);
        }
    }
    Err(Error::Config(format!(
        "could not draw a row of {n} atoms satisfying the floor after {MAX_ROW_RETRIES} tries"
    )))
}

/// Draws one environment.
pub fn sample_env<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<TabularEnv> {
    cfg.validate()?;
    let shape = Shape::new(cfg.states, cfg.actions, cfg.horizon)?;
    let grid = uniform_grid(cfg.reward_levels)?;
    let gamma = Gamma::new(cfg.concentration, 1.0)
        .map_err(|e| Error::Config(format!("Dirichlet concentration: {e}")))?;
    let mut transitions = Vec::with_capacity(shape.num_contexts() * cfg.states);
    let mut rewards = Vec::with_capacity(shape.num_contexts() * cfg.reward_levels);
    for _ in 0..shape.num_contexts() {
        transitions.extend(floored_row(cfg.states, cfg, &gamma, rng)?);
        rewards.extend(floored_row(cfg.reward_levels, cfg, &gamma, rng)?);
    }
    TabularEnv::new(shape, 0, grid, transitions, rewards, cfg.beta, cfg.b_cap)
}

fn jitter_rows<R: Rng + ?Sized>(
    table: &[f64],
    width: usize,
    cfg: &GenConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(table.len());
    for row in table.chunks(width) {
        let mut done = false;
        for _ in 0..MAX_ROW_RETRIES {
            let mut new: Vec<f64> = row
                .iter()
                .map(|&x| {
                    let u: f64 = rng.random_range(-cfg.jitter..=cfg.jitter);
                    if x > 0.0 {
                        x * u.exp()
                    } else {
                        0.0
                    }
                })
                .collect();
            let total: f64 = new.iter().sum();
            new.iter_mut().for_each(|x| *x /= total);
            if new.iter().all(|&x| x == 0.0 || (x >= cfg.beta && x <= cfg.b_cap)) {
                out.extend(new);
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::Config(format!(
                "jitter {} keeps pushing a row below the floor",
                cfg.jitter
            )));
        }
    }
    Ok(out)
}

/// A copy of `base` with every row jittered on the log scale; supports are
/// unchanged, so the copy stays at finite ℓ_g distance from the base.
pub fn jitter_env<R: Rng + ?Sized>(base: &TabularEnv, cfg: &GenConfig, rng: &mut R) -> Result<TabularEnv> {
    let transitions = jitter_rows(base.transitions(), base.num_states(), cfg, rng)?;
    let rewards = jitter_rows(base.rewards(), base.reward_grid().len(), cfg, rng)?;
    TabularEnv::new(
        base.shape(),
        base.initial_state(),
        base.reward_grid().to_vec(),
        transitions,
        rewards,
        base.beta(),
        base.b_cap(),
    )
}

/// Draws `N` hypotheses and puts a uniform prior on them.
pub fn sample_hypothesis_set<R: Rng + ?Sized>(cfg: &GenConfig, rng: &mut R) -> Result<HypothesisPosterior> {
    cfg.validate()?;
    let hyps = if cfg.clusters == 0 {
        (0..cfg.hypotheses)
            .map(|_| sample_env(cfg, rng))
            .collect::<Result<Vec<_>>>()?
    } else {
        let bases = (0..cfg.clusters)
            .map(|_| sample_env(cfg, rng))
            .collect::<Result<Vec<_>>>()?;
        (0..cfg.hypotheses)
            .map(|i| jitter_env(&bases[i % cfg.clusters], cfg, rng))
            .collect::<Result<Vec<_>>>()?
    };
    HypothesisPosterior::uniform(hyps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn infeasible_floor_is_rejected() {
        let cfg = GenConfig {
            states: 30,
            beta: 0.05,
            ..GenConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn rows_respect_floor_with_sparsity() {
        let cfg = GenConfig {
            states: 5,
            reward_levels: 4,
            hypotheses: 6,
            beta: 0.1,
            sparsity: 0.5,
            concentration: 0.3,
            ..GenConfig::default()
        };
        let post = sample_hypothesis_set(&cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for e in post.hypotheses() {
            for &x in e.transitions().iter().chain(e.rewards()) {
                assert!(x == 0.0 || x >= 0.1);
            }
        }
    }

    #[test]
    fn clustered_copies_keep_supports() {
        let cfg = GenConfig {
            hypotheses: 6,
            clusters: 2,
            jitter: 0.01,
            sparsity: 0.3,
            ..GenConfig::default()
        };
        let post = sample_hypothesis_set(&cfg, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let h = post.hypotheses();
        for i in 2..6 {
            let base = &h[i % 2];
            for (a, b) in h[i].transitions().iter().zip(base.transitions()) {
                assert_eq!(*a == 0.0, *b == 0.0);
                if *a > 0.0 {
                    assert!((a.ln() - b.ln()).abs() < 0.05);
                }
            }
        }
    }

    #[test]
    fn single_hypothesis_is_point_mass() {
        let cfg = GenConfig {
            hypotheses: 1,
            ..GenConfig::default()
        };
        let post = sample_hypothesis_set(&cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(post.weights(), vec![1.0]);
    }
}
