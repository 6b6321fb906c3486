//! Policy selection: IDS over a finite candidate set, Approximate-IDS by
//! planning on KL-shaped rewards, Thompson sampling, and a uniform baseline.

mod ids;

pub use ids::{ids_candidates, ids_policy, Candidate};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{plan_with_rewards, value_diameter, Policy, RewardTable, Shape};
use crate::information::kl_bonus_table;
use crate::posterior::{HypothesisPosterior, SurrogateMap};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    #[default]
    Ids,
    ApproxIds,
    Ts,
    Uniform,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Ids => "ids",
            AgentKind::ApproxIds => "approx_ids",
            AgentKind::Ts => "ts",
            AgentKind::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// `λ = √(α² T H / log K)`.
    Theorem1,
    /// `λ = √(α² T H / (2 log K))`.
    Theorem5,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MiMode {
    /// Exact when every evaluation fits under the outcome guard, otherwise
    /// Monte-Carlo for the whole episode.
    #[default]
    Auto,
    Exact,
    Mc,
}

/// Agent settings. `lambda_mode` defaults by kind: `theorem1` for IDS,
/// `theorem5` for Approximate-IDS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub kind: AgentKind,
    pub lambda_mode: Option<LambdaMode>,
    pub lambda_value: Option<f64>,
    /// How many top-weight hypotheses contribute their optimal policy.
    pub candidate_cap: usize,
    /// Points on the `[0, 1]` mixture grid, endpoints included.
    pub mixture_grid: usize,
    pub mi_mode: MiMode,
    pub mc_samples: usize,
    /// Whether realized rewards are part of the observation `X`.
    pub include_rewards: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            kind: AgentKind::Ids,
            lambda_mode: None,
            lambda_value: None,
            candidate_cap: 4,
            mixture_grid: 21,
            mi_mode: MiMode::Auto,
            mc_samples: 200,
            include_rewards: true,
        }
    }
}

impl AgentConfig {
    pub fn resolved_lambda_mode(&self) -> LambdaMode {
        self.lambda_mode.unwrap_or(match self.kind {
            AgentKind::ApproxIds => LambdaMode::Theorem5,
            _ => LambdaMode::Theorem1,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidate_cap == 0 {
            return Err(Error::Config("candidate_cap must be positive".into()));
        }
        if self.mixture_grid < 2 {
            return Err(Error::Config("mixture_grid must be at least 2".into()));
        }
        if self.mi_mode != MiMode::Exact && self.mc_samples < crate::information::MIN_MC_SAMPLES {
            return Err(Error::Config(format!(
                "mc_samples must be at least {}",
                crate::information::MIN_MC_SAMPLES
            )));
        }
        if self.resolved_lambda_mode() == LambdaMode::Fixed {
            match self.lambda_value {
                Some(l) if l >= 0.0 && l.is_finite() => {}
                _ => {
                    return Err(Error::Config(
                        "lambda_mode = \"fixed\" needs a finite lambda_value >= 0".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// The λ this agent uses for a run of `episodes` episodes.
    pub fn resolve_lambda(&self, alpha: f64, episodes: usize, horizon: usize, k: usize) -> Result<f64> {
        match self.resolved_lambda_mode() {
            LambdaMode::Fixed => Ok(self.lambda_value.unwrap_or(0.0)),
            mode => lambda_schedule(alpha, episodes, horizon, k, mode),
        }
    }
}

/// Closed-form λ schedules. `K < 2` leaves `log K = 0` and is an error.
pub fn lambda_schedule(
    alpha: f64,
    episodes: usize,
    horizon: usize,
    k: usize,
    mode: LambdaMode,
) -> Result<f64> {
    lambda_schedule_log_k(alpha, episodes, horizon, k, (k as f64).ln(), mode)
}

/// As [`lambda_schedule`] with `log K` supplied directly.
pub(crate) fn lambda_schedule_log_k(
    alpha: f64,
    episodes: usize,
    horizon: usize,
    k: usize,
    log_k: f64,
    mode: LambdaMode,
) -> Result<f64> {
    if k < 2 || !(log_k > 0.0) {
        return Err(Error::Schedule(k));
    }
    let radicand = alpha * alpha * episodes as f64 * horizon as f64 / log_k;
    match mode {
        LambdaMode::Theorem1 => Ok(radicand.sqrt()),
        LambdaMode::Theorem5 => Ok((radicand / 2.0).sqrt()),
        LambdaMode::Fixed => Err(Error::Config("fixed lambda has no schedule".into())),
    }
}

/// Root-mean-square value diameter over the prior.
pub fn alpha_estimate(post: &HypothesisPosterior) -> f64 {
    post.hypotheses()
        .iter()
        .zip(post.prior_log_weights())
        .filter(|(_, lw)| **lw > f64::NEG_INFINITY)
        .map(|(e, lw)| lw.exp() * value_diameter(e).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// What an agent chose, with the quantities it computed along the way.
#[derive(Debug, Clone)]
pub struct Selection {
    pub policy: Policy,
    pub id: String,
    /// `I(ζ; X)` of the chosen policy when the agent computed it.
    pub mi: Option<f64>,
}

/// Shaped rewards `r̄ = r(Ē) + (λ/2) E_t[KL(E ‖ Ē)]` on the mean environment.
pub fn approx_ids_rewards(
    post: &HypothesisPosterior,
    lambda: f64,
) -> Result<(crate::env::TabularEnv, RewardTable)> {
    let mean = post.mean_environment()?;
    let bonus = kl_bonus_table(post, &mean)?;
    let mut shaped = mean.mean_rewards();
    for (r, b) in shaped.values_mut().iter_mut().zip(bonus.values()) {
        *r += 0.5 * lambda * b;
    }
    Ok((mean, shaped))
}

/// Optimal policy of the mean-environment MDP with KL-shaped rewards.
pub fn approx_ids_policy(post: &HypothesisPosterior, lambda: f64) -> Result<Policy> {
    let (mean, shaped) = approx_ids_rewards(post, lambda)?;
    Ok(plan_with_rewards(&mean, &shaped)?.0)
}

/// Samples a hypothesis from the posterior and returns its index and
/// optimal policy.
pub fn ts_policy<R: Rng + ?Sized>(post: &HypothesisPosterior, rng: &mut R) -> (usize, Policy) {
    let i = post.sample_index(rng);
    (i, post.set().optimal(i).0.clone())
}

pub fn uniform_policy(shape: Shape) -> Policy {
    Policy::uniform(shape)
}

/// Runs the configured agent.
pub fn select<R: Rng + ?Sized>(
    cfg: &AgentConfig,
    map: &SurrogateMap,
    lambda: f64,
    pi0: &Policy,
    rng: &mut R,
) -> Result<Selection> {
    let post = map.posterior();
    match cfg.kind {
        AgentKind::Ids => ids_policy(map, lambda, pi0, cfg, rng),
        AgentKind::ApproxIds => Ok(Selection {
            policy: approx_ids_policy(post, lambda)?,
            id: "app".into(),
            mi: None,
        }),
        AgentKind::Ts => {
            let (i, policy) = ts_policy(post, rng);
            Ok(Selection {
                policy,
                id: format!("ts:hyp:{i}"),
                mi: None,
            })
        }
        AgentKind::Uniform => Ok(Selection {
            policy: uniform_policy(post.shape()),
            id: "uniform".into(),
            mi: None,
        }),
    }
}
