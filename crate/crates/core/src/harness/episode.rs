use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{self, AgentConfig, MiMode, Selection};
use crate::cover::ValuePartition;
use crate::env::{evaluate_policy, trajectory_return, Policy, TabularEnv, Trajectory};
use crate::information::{exact_mutual_information, mc_mutual_information};
use crate::posterior::{sigmoid, HypothesisPosterior, PosteriorSnapshot, SurrogateMap};
use crate::{Error, Result};

/// Draws a Bradley-Terry preference: `true` (τ1 preferred) with probability
/// `σ(r(τ1) − r(τ0))` under the true environment's mean rewards.
pub fn bt_preference<R: Rng + ?Sized>(
    true_env: &TabularEnv,
    tau1: &Trajectory,
    tau0: &Trajectory,
    rng: &mut R,
) -> bool {
    let p = sigmoid(trajectory_return(true_env, tau1) - trajectory_return(true_env, tau0));
    rng.random::<f64>() < p
}

/// Anything that picks a learner policy from the current surrogate map.
pub trait Selector {
    fn select(
        &mut self,
        map: &SurrogateMap,
        lambda: f64,
        pi0: &Policy,
        rng: &mut ChaCha8Rng,
    ) -> Result<Selection>;
}

impl Selector for AgentConfig {
    fn select(
        &mut self,
        map: &SurrogateMap,
        lambda: f64,
        pi0: &Policy,
        rng: &mut ChaCha8Rng,
    ) -> Result<Selection> {
        agents::select(self, map, lambda, pi0, rng)
    }
}

/// Fixed inputs of an episode loop.
#[derive(Debug, Clone)]
pub struct EpisodeSetup<'a> {
    pub partition: &'a ValuePartition,
    pub true_env: &'a TabularEnv,
    pub true_index: usize,
    /// `V*_1(s1)` of the true environment.
    pub true_optimal_value: f64,
    pub pi0: &'a Policy,
    pub lambda: f64,
    pub mi_mode: MiMode,
    pub mc_samples: usize,
    pub include_rewards: bool,
    pub use_baseline_transitions: bool,
}

/// Everything recorded about one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    /// 1-based episode index.
    pub t: usize,
    pub policy_id: String,
    pub tau0: Trajectory,
    pub tau1: Trajectory,
    pub preference: bool,
    /// `I(ζ; X)` of the chosen policy, before the update.
    pub mi_nats: f64,
    pub lambda: f64,
    pub regret: f64,
    pub cum_regret: f64,
    /// Posterior weight of the true hypothesis after the update.
    pub mass_on_truth: f64,
}

/// One episode: select, observe, record, update.
///
/// Random draws happen in a fixed order (selection, MI estimate seed, τ0,
/// τ1, preference), so a seeded generator replays the episode exactly.
pub fn run_episode<S: Selector + ?Sized>(
    t: usize,
    post: &HypothesisPosterior,
    setup: &EpisodeSetup<'_>,
    selector: &mut S,
    prev_cum_regret: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(EpisodeLog, HypothesisPosterior, PosteriorSnapshot)> {
    let map = post.surrogate_map(setup.partition)?;
    let sel = selector.select(&map, setup.lambda, setup.pi0, rng)?;
    let mi_seed: u64 = rng.random();
    let mc = || -> Result<f64> {
        let mut mi_rng = ChaCha8Rng::seed_from_u64(mi_seed);
        Ok(mc_mutual_information(
            &map,
            &sel.policy,
            setup.pi0,
            setup.mc_samples,
            setup.include_rewards,
            &mut mi_rng,
        )?
        .0)
    };
    let exact = || exact_mutual_information(&map, &sel.policy, setup.pi0, setup.include_rewards);
    let mi_nats = match (sel.mi, setup.mi_mode) {
        (Some(x), _) => x,
        (None, MiMode::Exact) => exact()?,
        (None, MiMode::Mc) => mc()?,
        (None, MiMode::Auto) => match exact() {
            Err(Error::Infeasible { .. }) => mc()?,
            r => r?,
        },
    };
    let tau0 = crate::env::sample_trajectory(setup.true_env, setup.pi0, rng);
    let tau1 = crate::env::sample_trajectory(setup.true_env, &sel.policy, rng);
    let o = bt_preference(setup.true_env, &tau1, &tau0, rng);
    let value = evaluate_policy(setup.true_env, &sel.policy)?.get(0, setup.true_env.initial_state());
    let regret = setup.true_optimal_value - value;
    let next = post.update_with_episode(&tau1, &tau0, o, setup.use_baseline_transitions)?;
    let snapshot = PosteriorSnapshot {
        episode: t,
        weights: next.weights(),
        zeta_weights: map.zeta_weights().to_vec(),
        k: map.num_cells(),
    };
    let log = EpisodeLog {
        t,
        policy_id: sel.id,
        tau0,
        tau1,
        preference: o,
        mi_nats,
        lambda: setup.lambda,
        regret,
        cum_regret: prev_cum_regret + regret,
        mass_on_truth: next.weight(setup.true_index),
    };
    Ok((log, next, snapshot))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::test_support::deterministic_env;

    #[test]
    fn equal_and_unit_gap_probabilities() {
        // s' = a, so the trajectories below are valid. Rewards: (h0,s0,a1) = 1.
        let env = deterministic_env([[[0, 1], [0, 0]], [[0, 0], [0, 0]]], vec![0.0, 1.0]);
        let a = Trajectory {
            states: vec![0, 1],
            actions: vec![1, 0],
            rewards: None,
        };
        let b = Trajectory {
            states: vec![0, 0],
            actions: vec![0, 0],
            rewards: None,
        };
        let n = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let wins = (0..n).filter(|_| bt_preference(&env, &a, &b, &mut rng)).count();
        let p = sigmoid(1.0);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((wins as f64 / n as f64 - p).abs() < 4.0 * se);
        let ties = (0..n).filter(|_| bt_preference(&env, &b, &b, &mut rng)).count();
        assert!((ties as f64 / n as f64 - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }
}
