//! Exact `I(ζ; X)` by enumerating every joint episode outcome.

use super::{ActiveSet, EXACT_OUTCOME_LIMIT};
use crate::env::Policy;
use crate::posterior::{sigmoid, zeta_entropy, SurrogateMap};
use crate::{Error, Result};

/// All positive-probability paths of one trajectory under a policy, with
/// per-hypothesis likelihoods and mean returns.
#[derive(Debug, Clone)]
pub(crate) struct PathTable {
    /// Product of policy probabilities along each path.
    pub weight: Vec<f64>,
    /// `[path][active hypothesis]`: dynamics (and reward) likelihood.
    pub lik: Vec<f64>,
    /// `[path][active hypothesis]`: mean return.
    pub ret: Vec<f64>,
}

impl PathTable {
    pub fn len(&self) -> usize {
        self.weight.len()
    }

    pub fn build(active: &ActiveSet, pi: &Policy, include_rewards: bool) -> Result<Self> {
        let n = active.hyps.len();
        let mut table = PathTable {
            weight: Vec::new(),
            lik: Vec::new(),
            ret: Vec::new(),
        };
        let s1 = active.envs[0].initial_state();
        let lik = vec![1.0; n];
        let ret = vec![0.0; n];
        extend(active, pi, include_rewards, 0, s1, 1.0, &lik, &ret, &mut table)?;
        Ok(table)
    }
}

#[allow(clippy::too_many_arguments)]
fn extend(
    active: &ActiveSet,
    pi: &Policy,
    include_rewards: bool,
    h: usize,
    s: usize,
    w: f64,
    lik: &[f64],
    ret: &[f64],
    out: &mut PathTable,
) -> Result<()> {
    let horizon = pi.shape().horizon;
    let m = active.envs[0].reward_grid().len();
    for (a, &pa) in pi.row(h, s).iter().enumerate() {
        if pa == 0.0 {
            continue;
        }
        let w2 = w * pa;
        let ret2: Vec<f64> = active
            .envs
            .iter()
            .zip(ret)
            .map(|(e, r)| r + e.mean_reward(h, s, a))
            .collect();
        let reward_branches: Vec<Vec<f64>> = if include_rewards {
            (0..m)
                .map(|g| {
                    active
                        .envs
                        .iter()
                        .zip(lik)
                        .map(|(e, l)| l * e.reward_row(h, s, a)[g])
                        .collect::<Vec<f64>>()
                })
                .filter(|l| l.iter().any(|&x| x > 0.0))
                .collect()
        } else {
            vec![lik.to_vec()]
        };
        for lik2 in reward_branches {
            if h + 1 == horizon {
                if out.len() >= EXACT_OUTCOME_LIMIT as usize {
                    return Err(Error::Infeasible {
                        outcomes: EXACT_OUTCOME_LIMIT + 1,
                        limit: EXACT_OUTCOME_LIMIT,
                    });
                }
                out.weight.push(w2);
                out.lik.extend_from_slice(&lik2);
                out.ret.extend_from_slice(&ret2);
                continue;
            }
            for s_next in 0..pi.shape().states {
                let lik3: Vec<f64> = active
                    .envs
                    .iter()
                    .zip(&lik2)
                    .map(|(e, l)| l * e.transition_row(h, s, a)[s_next])
                    .collect();
                if lik3.iter().all(|&x| x == 0.0) {
                    continue;
                }
                extend(active, pi, include_rewards, h + 1, s_next, w2, &lik3, &ret2, out)?;
            }
        }
    }
    Ok(())
}

/// Reusable exact evaluator: the baseline policy's paths are enumerated
/// once and shared by every candidate policy.
pub struct ExactMi<'a> {
    map: &'a SurrogateMap,
    active: ActiveSet<'a>,
    baseline: PathTable,
    include_rewards: bool,
    entropy: f64,
}

impl<'a> ExactMi<'a> {
    pub fn new(map: &'a SurrogateMap, pi0: &Policy, include_rewards: bool) -> Result<Self> {
        let active = ActiveSet::new(map);
        let entropy = zeta_entropy(map);
        let baseline = if entropy > super::ENTROPY_FLOOR {
            PathTable::build(&active, pi0, include_rewards)?
        } else {
            PathTable {
                weight: Vec::new(),
                lik: Vec::new(),
                ret: Vec::new(),
            }
        };
        Ok(ExactMi {
            map,
            active,
            baseline,
            include_rewards,
            entropy,
        })
    }

    /// `I(ζ; X)` in nats for learner policy `pi`.
    pub fn evaluate(&self, pi: &Policy) -> Result<f64> {
        if self.entropy <= super::ENTROPY_FLOOR {
            return Ok(0.0);
        }
        let learner = PathTable::build(&self.active, pi, self.include_rewards)?;
        let outcomes = learner.len() as u128 * self.baseline.len() as u128 * 2;
        if outcomes > EXACT_OUTCOME_LIMIT {
            return Err(Error::Infeasible {
                outcomes,
                limit: EXACT_OUTCOME_LIMIT,
            });
        }
        let n = self.active.hyps.len();
        let zeta = self.map.zeta_weights();
        let cells = &self.active.cells;
        let mut q = vec![0.0; n];
        let mut up = vec![0.0; n];
        let mut down = vec![0.0; n];
        let mut cell_p = vec![0.0; cells.len()];
        let mut total = 0.0;
        for p1 in 0..learner.len() {
            let l1 = &learner.lik[p1 * n..(p1 + 1) * n];
            let r1 = &learner.ret[p1 * n..(p1 + 1) * n];
            for p0 in 0..self.baseline.len() {
                let w = learner.weight[p1] * self.baseline.weight[p0];
                let l0 = &self.baseline.lik[p0 * n..(p0 + 1) * n];
                let r0 = &self.baseline.ret[p0 * n..(p0 + 1) * n];
                for j in 0..n {
                    q[j] = l1[j] * l0[j];
                    let d = r1[j] - r0[j];
                    up[j] = sigmoid(d);
                    down[j] = sigmoid(-d);
                }
                for bt in [&up, &down] {
                    let mut p = 0.0;
                    for (c, (k, members)) in cells.iter().enumerate() {
                        let pk: f64 = members.iter().map(|&(j, cw)| cw * q[j] * bt[j]).sum();
                        cell_p[c] = pk;
                        p += zeta[*k] * pk;
                    }
                    if p <= 0.0 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for (c, (k, _)) in cells.iter().enumerate() {
                        let pk = cell_p[c];
                        if pk > 0.0 {
                            acc += zeta[*k] * pk * (pk / p).ln();
                        }
                    }
                    total += w * acc;
                }
            }
        }
        Ok(total)
    }
}

/// `I(ζ; X)` where `X` is the learner trajectory under `pi`, the baseline
/// trajectory under `pi0`, their realized rewards (when `include_rewards`),
/// and the preference bit. `P(X | ζ = k)` is the posterior mixture over the
/// members of cell `k`.
pub fn exact_mutual_information(
    map: &SurrogateMap,
    pi: &Policy,
    pi0: &Policy,
    include_rewards: bool,
) -> Result<f64> {
    ExactMi::new(map, pi0, include_rewards)?.evaluate(pi)
}
