//! Independent oracles and instance builders shared by the integration tests.
//!
//! Nothing here calls the library's planners or information code; values are
//! recomputed from raw probability tables by enumeration.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rlhf_ids::cover::ValuePartition;
use rlhf_ids::env::{Policy, Shape, TabularEnv};
use rlhf_ids::posterior::{sample_hypothesis_set, GenConfig, HypothesisPosterior};

/// One fully specified trajectory with its probability.
#[derive(Debug, Clone)]
pub struct Path {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    /// Grid indices; empty when rewards are marginalized out.
    pub rewards: Vec<usize>,
    pub prob: f64,
}

/// Every positive-probability trajectory of `pi` in `env`. The last
/// transition is never taken, matching trajectories of `H` states.
pub fn enumerate_paths(env: &TabularEnv, pi: &Policy, with_rewards: bool) -> Vec<Path> {
    let mut out = Vec::new();
    let start = Path {
        states: vec![env.initial_state()],
        actions: Vec::new(),
        rewards: Vec::new(),
        prob: 1.0,
    };
    grow(env, pi, with_rewards, start, &mut out);
    out
}

fn grow(env: &TabularEnv, pi: &Policy, with_rewards: bool, p: Path, out: &mut Vec<Path>) {
    let h = p.actions.len();
    let s = *p.states.last().unwrap();
    for a in 0..env.num_actions() {
        let pa = pi.prob(h, s, a);
        if pa == 0.0 {
            continue;
        }
        let grid_choices: Vec<(Option<usize>, f64)> = if with_rewards {
            env.reward_row(h, s, a)
                .iter()
                .enumerate()
                .filter(|(_, &q)| q > 0.0)
                .map(|(g, &q)| (Some(g), q))
                .collect()
        } else {
            vec![(None, 1.0)]
        };
        for (g, pg) in grid_choices {
            let mut q = p.clone();
            q.actions.push(a);
            if let Some(g) = g {
                q.rewards.push(g);
            }
            q.prob *= pa * pg;
            if h + 1 == env.horizon() {
                out.push(q);
                continue;
            }
            for (s2, &ps) in env.transition_row(h, s, a).iter().enumerate() {
                if ps == 0.0 {
                    continue;
                }
                let mut r = q.clone();
                r.states.push(s2);
                r.prob *= ps;
                grow(env, pi, with_rewards, r, out);
            }
        }
    }
}

/// Grid-expected reward, recomputed from the raw row.
pub fn mean_reward(env: &TabularEnv, h: usize, s: usize, a: usize) -> f64 {
    env.reward_row(h, s, a)
        .iter()
        .zip(env.reward_grid())
        .map(|(p, g)| p * g)
        .sum()
}

pub fn path_return(env: &TabularEnv, states: &[usize], actions: &[usize]) -> f64 {
    states
        .iter()
        .zip(actions)
        .enumerate()
        .map(|(h, (&s, &a))| mean_reward(env, h, s, a))
        .sum()
}

/// `V_1(s1)` by summing realized grid rewards over all trajectories.
pub fn brute_value(env: &TabularEnv, pi: &Policy) -> f64 {
    enumerate_paths(env, pi, true)
        .iter()
        .map(|p| p.prob * p.rewards.iter().map(|&g| env.reward_grid()[g]).sum::<f64>())
        .sum()
}

/// `V_1(s1)` under an arbitrary mean-reward table `r[h][s][a]`.
pub fn brute_value_with(env: &TabularEnv, pi: &Policy, r: &dyn Fn(usize, usize, usize) -> f64) -> f64 {
    enumerate_paths(env, pi, false)
        .iter()
        .map(|p| {
            p.prob
                * p.states
                    .iter()
                    .zip(&p.actions)
                    .enumerate()
                    .map(|(h, (&s, &a))| r(h, s, a))
                    .sum::<f64>()
        })
        .sum()
}

/// All `A^(S·H)` deterministic policies.
pub fn all_deterministic_policies(shape: Shape) -> Vec<Policy> {
    let n = shape.states * shape.horizon;
    let total = shape.actions.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let actions: Vec<usize> = (0..n)
                .map(|_| {
                    let a = code % shape.actions;
                    code /= shape.actions;
                    a
                })
                .collect();
            Policy::deterministic(shape, &actions).unwrap()
        })
        .collect()
}

/// A stochastic policy with flat-Dirichlet rows.
pub fn random_policy<R: Rng + ?Sized>(shape: Shape, rng: &mut R) -> Policy {
    let mut probs = Vec::with_capacity(shape.horizon * shape.states * shape.actions);
    for _ in 0..shape.horizon * shape.states {
        let row: Vec<f64> = (0..shape.actions).map(|_| Exp1.sample(rng)).collect();
        let t: f64 = row.iter().sum();
        probs.extend(row.iter().map(|x: &f64| x / t));
    }
    Policy::new(shape, probs).unwrap()
}

/// Random nonuniform posterior weights on `n` hypotheses, some exactly zero.
pub fn random_prior<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < 0.2 {
                0.0
            } else {
                Exp1.sample(rng)
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[0] = 1.0;
    }
    w
}

pub fn instance(cfg: &GenConfig, seed: u64) -> HypothesisPosterior {
    sample_hypothesis_set(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// `clusters` random environments, each repeated with small log-scale jitter.
pub fn clustered(cfg: &GenConfig, clusters: usize, jitter: f64, seed: u64) -> HypothesisPosterior {
    let cfg = GenConfig {
        clusters,
        jitter,
        ..cfg.clone()
    };
    instance(&cfg, seed)
}

/// Per-hypothesis probability of one joint observation.
type Outcomes = HashMap<
    (
        Vec<usize>,
        Vec<usize>,
        Vec<usize>,
        Vec<usize>,
        Vec<usize>,
        Vec<usize>,
        bool,
    ),
    Vec<f64>,
>;

fn sigma(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// `I(ζ; X)` by a double loop over cells and joint outcomes
/// `X = (τ1, rewards1, τ0, rewards0, o)`, with `P(X | ζ=k)` the
/// posterior-conditional mixture over the members of cell `k`.
pub fn brute_mi(
    post: &HypothesisPosterior,
    partition: &ValuePartition,
    pi: &Policy,
    pi0: &Policy,
    with_rewards: bool,
) -> f64 {
    let w = post.weights();
    let n = w.len();
    let mut table: Outcomes = HashMap::new();
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        let env = &post.hypotheses()[i];
        let p1 = enumerate_paths(env, pi, with_rewards);
        let p0 = enumerate_paths(env, pi0, with_rewards);
        for a in &p1 {
            let ra = path_return(env, &a.states, &a.actions);
            for b in &p0 {
                let rb = path_return(env, &b.states, &b.actions);
                for o in [true, false] {
                    let po = if o { sigma(ra - rb) } else { sigma(rb - ra) };
                    let key = (
                        a.states.clone(),
                        a.actions.clone(),
                        a.rewards.clone(),
                        b.states.clone(),
                        b.actions.clone(),
                        b.rewards.clone(),
                        o,
                    );
                    table.entry(key).or_insert_with(|| vec![0.0; n])[i] += a.prob * b.prob * po;
                }
            }
        }
    }
    let k = partition.num_cells();
    let mut zeta = vec![0.0; k];
    for i in 0..n {
        zeta[partition.cell_of(i)] += w[i];
    }
    let mut mi = 0.0;
    for probs in table.values() {
        let mut cell = vec![0.0; k];
        for i in 0..n {
            cell[partition.cell_of(i)] += w[i] * probs[i];
        }
        let marginal: f64 = cell.iter().sum();
        for c in 0..k {
            if cell[c] > 0.0 {
                // cell[c] = ζ_c P(X | c)
                mi += cell[c] * ((cell[c] / zeta[c]) / marginal).ln();
            }
        }
    }
    mi
}

/// `Σ_x p log(p/q)` with `0 log 0 = 0`.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

/// Mean and standard error of a sample.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
