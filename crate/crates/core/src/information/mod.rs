//! Information quantities: mutual information between the cell index `ζ`
//! and one episode's observables, the KL exploration bonus, and the
//! occupancy-weighted KL sum that lower-bounds the mutual information.
//!
//! All logarithms are natural; results are in nats.

mod exact;
mod mc;

pub use exact::{exact_mutual_information, ExactMi};
pub use mc::{mc_mutual_information, McMi, MIN_MC_SAMPLES};

use crate::env::{occupancy, Policy, RewardTable, TabularEnv};
use crate::posterior::{HypothesisPosterior, SurrogateMap};
use crate::Result;

/// Largest number of joint outcomes the exact evaluator will enumerate.
pub const EXACT_OUTCOME_LIMIT: u128 = 1_000_000;

/// Below this cell entropy the mutual information (bounded by it) is
/// reported as 0 without enumeration.
pub const ENTROPY_FLOOR: f64 = 1e-12;

/// Hypotheses with positive posterior weight, grouped by cell.
pub(crate) struct ActiveSet<'a> {
    pub hyps: Vec<usize>,
    pub envs: Vec<&'a TabularEnv>,
    /// `(cell, [(active position, weight within cell)])` for cells with mass.
    pub cells: Vec<(usize, Vec<(usize, f64)>)>,
}

impl<'a> ActiveSet<'a> {
    pub fn new(map: &'a SurrogateMap) -> Self {
        let post = map.posterior();
        let mut pos = vec![usize::MAX; post.len()];
        let mut hyps = Vec::new();
        for (i, &lw) in post.log_weights().iter().enumerate() {
            if lw > f64::NEG_INFINITY && lw.exp() > 0.0 {
                pos[i] = hyps.len();
                hyps.push(i);
            }
        }
        let envs = hyps.iter().map(|&i| &post.hypotheses()[i]).collect();
        let mut cells = Vec::new();
        for k in 0..map.num_cells() {
            if map.is_inert(k) || map.zeta_weights()[k] <= 0.0 {
                continue;
            }
            let members = map
                .members(k)
                .iter()
                .zip(map.conditional_weights(k))
                .filter(|(&i, &w)| w > 0.0 && pos[i] != usize::MAX)
                .map(|(&i, &w)| (pos[i], w))
                .collect();
            cells.push((k, members));
        }
        ActiveSet { hyps, envs, cells }
    }
}

/// `KL(p ‖ q)` with `0 log 0 = 0`; infinite if `p` puts mass where `q` has none.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| if b > 0.0 { a * (a / b).ln() } else { f64::INFINITY })
        .sum()
}

/// KL between the product rows `P_h(·|s,a) ⊗ R_h(·|s,a)` of two
/// environments, which is the sum of the two marginal KLs.
pub fn product_kl(e: &TabularEnv, f: &TabularEnv, h: usize, s: usize, a: usize) -> f64 {
    kl_divergence(e.transition_row(h, s, a), f.transition_row(h, s, a))
        + kl_divergence(e.reward_row(h, s, a), f.reward_row(h, s, a))
}

/// `E_t[KL((P_h^E ⊗ R_h^E)(·|s,a) ‖ (P_h^Ē ⊗ R_h^Ē)(·|s,a))]` with `Ē` the
/// posterior mean.
pub fn kl_bonus(post: &HypothesisPosterior, h: usize, s: usize, a: usize) -> Result<f64> {
    let mean = post.mean_environment()?;
    Ok(weighted_kl(post, &mean, h, s, a))
}

fn weighted_kl(post: &HypothesisPosterior, mean: &TabularEnv, h: usize, s: usize, a: usize) -> f64 {
    post.hypotheses()
        .iter()
        .zip(post.log_weights())
        .filter(|(_, lw)| **lw > f64::NEG_INFINITY)
        .map(|(e, lw)| lw.exp() * product_kl(e, mean, h, s, a))
        .sum()
}

/// [`kl_bonus`] for every `(h, s, a)`, given the posterior mean.
pub fn kl_bonus_table(post: &HypothesisPosterior, mean: &TabularEnv) -> Result<RewardTable> {
    let shape = post.shape();
    let mut values = Vec::with_capacity(shape.num_contexts());
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            for a in 0..shape.actions {
                values.push(weighted_kl(post, mean, h, s, a));
            }
        }
    }
    RewardTable::new(shape, values)
}

/// `Σ_k ζ_k · KL(surrogate_k ⊗ ‖ Ē ⊗)` for every `(h, s, a)`: the bonus with
/// each hypothesis replaced by its cell's surrogate.
pub fn surrogate_kl_table(map: &SurrogateMap, mean: &TabularEnv) -> Result<RewardTable> {
    let shape = map.posterior().shape();
    let mut values = Vec::with_capacity(shape.num_contexts());
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            for a in 0..shape.actions {
                let v = map
                    .surrogates()
                    .iter()
                    .zip(map.zeta_weights())
                    .filter(|(_, &z)| z > 0.0)
                    .map(|(e, z)| z * product_kl(e, mean, h, s, a))
                    .sum();
                values.push(v);
            }
        }
    }
    RewardTable::new(shape, values)
}

/// `Σ_h E^{Ē}_π[Σ_k ζ_k KL(surrogate_k ⊗ ‖ Ē ⊗)(s_h, a_h)]`, using the
/// occupancy of `pi` in the posterior-mean environment.
pub fn kl_sum_lower_bound(map: &SurrogateMap, pi: &Policy) -> Result<f64> {
    let mean = map.posterior().mean_environment()?;
    let table = surrogate_kl_table(map, &mean)?;
    let d = occupancy(&mean, pi)?;
    let shape = mean.shape();
    let mut acc = 0.0;
    for h in 0..shape.horizon {
        for s in 0..shape.states {
            for a in 0..shape.actions {
                let w = d.get(h, s, a);
                if w > 0.0 {
                    acc += w * table.get(h, s, a);
                }
            }
        }
    }
    Ok(acc)
}
