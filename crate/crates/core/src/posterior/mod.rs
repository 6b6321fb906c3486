//! Exact Bayesian state over a finite hypothesis set.
//!
//! Weights live in the log domain and are renormalized after every update.
//! Per-hypothesis planning results and log-probability tables are computed
//! once when the set is created and shared by every posterior derived from it.

mod generate;
mod surrogate;

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use generate::{jitter_env, sample_env, sample_hypothesis_set, GenConfig};
pub use surrogate::{zeta_entropy, SurrogateMap};

use crate::cover::ValuePartition;
use crate::env::{
    evaluate_policy, optimal_policy, EnvDocument, Policy, RewardTable, Shape, TabularEnv, Trajectory,
    ValueTable,
};
use crate::{Error, Result};

/// Numerically stable `log σ(x)`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `σ(x) = 1 / (1 + e^{-x})`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log Σ exp(x_i)`; `-∞` when every term is `-∞`.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn ln_table(xs: &[f64]) -> Vec<f64> {
    xs.iter()
        .map(|&p| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY })
        .collect()
}

/// An immutable hypothesis set with its prior and cached per-hypothesis
/// quantities.
#[derive(Debug)]
pub struct HypothesisSet {
    envs: Vec<TabularEnv>,
    prior_log_weights: Vec<f64>,
    optimal: Vec<(Policy, ValueTable)>,
    mean_rewards: Vec<RewardTable>,
    ln_transitions: Vec<Vec<f64>>,
    ln_rewards: Vec<Vec<f64>>,
}

impl HypothesisSet {
    fn new(envs: Vec<TabularEnv>, prior: &[f64]) -> Result<Self> {
        let first = envs
            .first()
            .ok_or_else(|| Error::Config("empty hypothesis set".into()))?;
        for e in &envs[1..] {
            first.ensure_compatible(e)?;
        }
        if prior.len() != envs.len() {
            return Err(Error::Shape(format!(
                "{} prior weights for {} hypotheses",
                prior.len(),
                envs.len()
            )));
        }
        if prior.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Config(
                "prior weights must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = prior.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Config("prior weights sum to zero".into()));
        }
        let prior_log_weights = prior
            .iter()
            .map(|&w| {
                if w > 0.0 {
                    (w / total).ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let optimal = envs.iter().map(optimal_policy).collect();
        let mean_rewards = envs.iter().map(TabularEnv::mean_rewards).collect();
        let ln_transitions = envs.iter().map(|e| ln_table(e.transitions())).collect();
        let ln_rewards = envs.iter().map(|e| ln_table(e.rewards())).collect();
        Ok(HypothesisSet {
            envs,
            prior_log_weights,
            optimal,
            mean_rewards,
            ln_transitions,
            ln_rewards,
        })
    }

    pub fn envs(&self) -> &[TabularEnv] {
        &self.envs
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn shape(&self) -> Shape {
        self.envs[0].shape()
    }

    /// Optimal policy and values of hypothesis `i`.
    pub fn optimal(&self, i: usize) -> &(Policy, ValueTable) {
        &self.optimal[i]
    }

    pub fn mean_rewards(&self, i: usize) -> &RewardTable {
        &self.mean_rewards[i]
    }

    /// `ln P_h(s'|s,a)` for hypothesis `i`, laid out like the transitions.
    pub fn ln_transitions(&self, i: usize) -> &[f64] {
        &self.ln_transitions[i]
    }

    /// `ln R_h(g|s,a)` for hypothesis `i`, laid out like the rewards.
    pub fn ln_rewards(&self, i: usize) -> &[f64] {
        &self.ln_rewards[i]
    }

    /// Mean return `r(τ)` of a trajectory under hypothesis `i`.
    pub fn trajectory_return(&self, i: usize, tau: &Trajectory) -> f64 {
        let r = &self.mean_rewards[i];
        tau.states
            .iter()
            .zip(&tau.actions)
            .enumerate()
            .map(|(h, (&s, &a))| r.get(h, s, a))
            .sum()
    }

    /// `Σ_h ln P_h(s_{h+1}|s_h, a_h)` over the observed steps of `tau`.
    pub fn transition_log_likelihood(&self, i: usize, tau: &Trajectory) -> f64 {
        let shape = self.shape();
        let ln = &self.ln_transitions[i];
        let mut acc = 0.0;
        for h in 0..tau.states.len().saturating_sub(1) {
            let ctx = shape.sa_index(h, tau.states[h], tau.actions[h]);
            acc += ln[ctx * shape.states + tau.states[h + 1]];
        }
        acc
    }
}

/// Posterior over a shared [`HypothesisSet`].
#[derive(Debug, Clone)]
pub struct HypothesisPosterior {
    set: Arc<HypothesisSet>,
    log_weights: Vec<f64>,
}

impl HypothesisPosterior {
    pub fn new(hyps: Vec<TabularEnv>, prior: &[f64]) -> Result<Self> {
        let set = HypothesisSet::new(hyps, prior)?;
        let log_weights = set.prior_log_weights.clone();
        Ok(HypothesisPosterior {
            set: Arc::new(set),
            log_weights,
        })
    }

    pub fn uniform(hyps: Vec<TabularEnv>) -> Result<Self> {
        let n = hyps.len();
        Self::new(hyps, &vec![1.0; n])
    }

    /// The prior over the same set.
    pub fn reset(&self) -> Self {
        HypothesisPosterior {
            set: Arc::clone(&self.set),
            log_weights: self.set.prior_log_weights.clone(),
        }
    }

    pub fn set(&self) -> &HypothesisSet {
        &self.set
    }

    pub fn hypotheses(&self) -> &[TabularEnv] {
        &self.set.envs
    }

    pub fn len(&self) -> usize {
        self.set.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.set.envs.is_empty()
    }

    pub fn shape(&self) -> Shape {
        self.set.shape()
    }

    /// Normalized log weights.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn prior_log_weights(&self) -> &[f64] {
        &self.set.prior_log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|x| x.exp()).collect()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.log_weights[i].exp()
    }

    /// Log-likelihood of one episode under hypothesis `i`: transitions of
    /// `tau1` (and of `tau0` when `use_baseline_transitions`), plus the
    /// Bradley-Terry term for preference `o`.
    pub fn episode_log_likelihood(
        &self,
        i: usize,
        tau1: &Trajectory,
        tau0: &Trajectory,
        o: bool,
        use_baseline_transitions: bool,
    ) -> f64 {
        let set = &self.set;
        let mut ll = set.transition_log_likelihood(i, tau1);
        if use_baseline_transitions {
            ll += set.transition_log_likelihood(i, tau0);
        }
        if ll == f64::NEG_INFINITY {
            return ll;
        }
        let delta = set.trajectory_return(i, tau1) - set.trajectory_return(i, tau0);
        ll + log_sigmoid(if o { delta } else { -delta })
    }

    /// Bayes update with one episode's observations.
    pub fn update_with_episode(
        &self,
        tau1: &Trajectory,
        tau0: &Trajectory,
        o: bool,
        use_baseline_transitions: bool,
    ) -> Result<Self> {
        let h = self.shape().horizon;
        for tau in [tau1, tau0] {
            if tau.states.len() != h || tau.actions.len() != h {
                return Err(Error::Shape(format!(
                    "trajectory of length {} for horizon {h}",
                    tau.states.len()
                )));
            }
        }
        let mut next: Vec<f64> = self
            .log_weights
            .iter()
            .enumerate()
            .map(|(i, &lw)| {
                if lw == f64::NEG_INFINITY {
                    lw
                } else {
                    lw + self.episode_log_likelihood(i, tau1, tau0, o, use_baseline_transitions)
                }
            })
            .collect();
        let z = log_sum_exp(&next);
        if !z.is_finite() {
            return Err(Error::DegeneratePosterior);
        }
        next.iter_mut().for_each(|x| *x -= z);
        Ok(HypothesisPosterior {
            set: Arc::clone(&self.set),
            log_weights: next,
        })
    }

    /// Posterior-mean environment: every row is the weighted average of the
    /// hypotheses' rows.
    pub fn mean_environment(&self) -> Result<TabularEnv> {
        let w = self.weights();
        let envs: Vec<&TabularEnv> = self.set.envs.iter().collect();
        TabularEnv::mixture(&envs, &w)
    }

    /// `E_t[V^E_{1,π}(s1)]`.
    pub fn expected_value(&self, pi: &Policy) -> Result<f64> {
        let mut acc = 0.0;
        for (e, lw) in self.set.envs.iter().zip(&self.log_weights) {
            if *lw == f64::NEG_INFINITY {
                continue;
            }
            acc += lw.exp() * evaluate_policy(e, pi)?.get(0, e.initial_state());
        }
        Ok(acc)
    }

    /// Draws a hypothesis index from the posterior.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        crate::env::sample_row_index(&self.weights(), rng)
    }

    /// Highest-weight hypothesis indices, ties toward lower index.
    pub fn top_indices(&self, count: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| {
            self.log_weights[b]
                .partial_cmp(&self.log_weights[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx.truncate(count);
        idx
    }

    pub fn surrogate_map(&self, partition: &ValuePartition) -> Result<SurrogateMap> {
        SurrogateMap::new(self, partition)
    }
}

/// JSON form of a hypothesis set with its prior.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesesDocument {
    pub prior: Vec<f64>,
    pub hypotheses: Vec<EnvDocument>,
}

impl HypothesesDocument {
    pub fn from_posterior(post: &HypothesisPosterior) -> Self {
        HypothesesDocument {
            prior: post.prior_log_weights().iter().map(|x| x.exp()).collect(),
            hypotheses: post.hypotheses().iter().map(EnvDocument::from_env).collect(),
        }
    }

    pub fn to_posterior(&self) -> Result<HypothesisPosterior> {
        let envs = self
            .hypotheses
            .iter()
            .map(EnvDocument::to_env)
            .collect::<Result<Vec<_>>>()?;
        HypothesisPosterior::new(envs, &self.prior)
    }

    pub fn load(path: &Path) -> Result<HypothesisPosterior> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: HypothesesDocument = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        doc.to_posterior()
    }

    pub fn save(post: &HypothesisPosterior, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&Self::from_posterior(post))
            .expect("hypothesis documents always serialize");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// One line of the posterior trace written when tracing is on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSnapshot {
    pub episode: usize,
    pub weights: Vec<f64>,
    pub zeta_weights: Vec<f64>,
    #[serde(rename = "K")]
    pub k: usize,
}
