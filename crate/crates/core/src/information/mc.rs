//! Monte-Carlo estimate of `I(ζ; X) = H(ζ) − E_X[H(ζ | X)]`.

use rand::Rng;

use super::ActiveSet;
use crate::env::{sample_row_index, sample_trajectory, Policy, Trajectory};
use crate::posterior::{log_sigmoid, log_sum_exp, sigmoid, zeta_entropy, SurrogateMap};
use crate::{Error, Result};

/// Smallest sample count accepted by the estimator.
pub const MIN_MC_SAMPLES: usize = 100;

/// Reusable estimator bound to one surrogate map and baseline policy.
pub struct McMi<'a> {
    map: &'a SurrogateMap,
    active: ActiveSet<'a>,
    pi0: &'a Policy,
    include_rewards: bool,
    entropy: f64,
    active_weights: Vec<f64>,
}

impl<'a> McMi<'a> {
    pub fn new(map: &'a SurrogateMap, pi0: &'a Policy, include_rewards: bool) -> Self {
        let active = ActiveSet::new(map);
        let post = map.posterior();
        let active_weights = active.hyps.iter().map(|&i| post.weight(i)).collect();
        McMi {
            map,
            entropy: zeta_entropy(map),
            active,
            pi0,
            include_rewards,
            active_weights,
        }
    }

    /// Log-likelihood of the observables of one trajectory under active
    /// hypothesis `j`, without policy factors.
    fn traj_ll(&self, j: usize, tau: &Trajectory) -> f64 {
        let set = self.map.posterior().set();
        let i = self.active.hyps[j];
        let mut ll = set.transition_log_likelihood(i, tau);
        if self.include_rewards {
            let shape = set.shape();
            let m = self.active.envs[j].reward_grid().len();
            let ln = set.ln_rewards(i);
            if let Some(g) = &tau.rewards {
                for h in 0..tau.states.len() {
                    ll += ln[shape.sa_index(h, tau.states[h], tau.actions[h]) * m + g[h]];
                }
            }
        }
        ll
    }

    /// Returns `(estimate, standard error)` from `n` samples of `X`.
    pub fn estimate<R: Rng + ?Sized>(&self, pi: &Policy, n: usize, rng: &mut R) -> Result<(f64, f64)> {
        if n < MIN_MC_SAMPLES {
            return Err(Error::Config(format!(
                "Monte-Carlo MI needs at least {MIN_MC_SAMPLES} samples, got {n}"
            )));
        }
        if self.entropy <= super::ENTROPY_FLOOR {
            return Ok((0.0, 0.0));
        }
        let set = self.map.posterior().set();
        let zeta = self.map.zeta_weights();
        let na = self.active.hyps.len();
        let mut ll = vec![0.0; na];
        let mut cell_ll = vec![0.0; self.active.cells.len()];
        let mut terms = Vec::with_capacity(na);
        let mut cond = Vec::with_capacity(n);
        for _ in 0..n {
            let j = sample_row_index(&self.active_weights, rng);
            let env = self.active.envs[j];
            let tau1 = sample_trajectory(env, pi, rng);
            let tau0 = sample_trajectory(env, self.pi0, rng);
            let i = self.active.hyps[j];
            let d = set.trajectory_return(i, &tau1) - set.trajectory_return(i, &tau0);
            let o = rng.random::<f64>() < sigmoid(d);
            for (jj, slot) in ll.iter_mut().enumerate() {
                let ii = self.active.hyps[jj];
                let dd = set.trajectory_return(ii, &tau1) - set.trajectory_return(ii, &tau0);
                *slot =
                    self.traj_ll(jj, &tau1) + self.traj_ll(jj, &tau0) + log_sigmoid(if o { dd } else { -dd });
            }
            for (c, (k, members)) in self.active.cells.iter().enumerate() {
                terms.clear();
                terms.extend(members.iter().map(|&(jj, cw)| cw.ln() + ll[jj]));
                cell_ll[c] = zeta[*k].ln() + log_sum_exp(&terms);
            }
            let z = log_sum_exp(&cell_ll);
            let h: f64 = cell_ll
                .iter()
                .map(|&x| {
                    let lp = x - z;
                    if lp == f64::NEG_INFINITY {
                        0.0
                    } else {
                        -lp.exp() * lp
                    }
                })
                .sum();
            cond.push(h);
        }
        let mean = cond.iter().sum::<f64>() / n as f64;
        let var = cond.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok((self.entropy - mean, (var / n as f64).sqrt()))
    }
}

/// Monte-Carlo estimate of the same quantity as
/// [`exact_mutual_information`](super::exact_mutual_information), with its
/// standard error.
pub fn mc_mutual_information<R: Rng + ?Sized>(
    map: &SurrogateMap,
    pi: &Policy,
    pi0: &Policy,
    n_samples: usize,
    include_rewards: bool,
    rng: &mut R,
) -> Result<(f64, f64)> {
    McMi::new(map, pi0, include_rewards).estimate(pi, n_samples, rng)
}
