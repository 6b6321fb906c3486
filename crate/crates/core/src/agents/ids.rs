//! IDS over an explicit candidate set.
//!
//! Candidates are the optimal policies of the highest-weight hypotheses, of
//! the posterior-mean environment, and the uniform policy; duplicates are
//! dropped. The candidate with the highest expected value is then mixed
//! per state with each other candidate on an interior grid of weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AgentConfig, MiMode, Selection};
use crate::env::{optimal_policy, Policy};
use crate::information::{ExactMi, McMi};
use crate::posterior::{HypothesisPosterior, SurrogateMap};
use crate::{Error, Result};

/// One candidate policy with its posterior-expected value.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub id: String,
    pub policy: Policy,
    pub value: f64,
}

/// The full enumeration searched by [`ids_policy`], in tie-break order.
pub fn ids_candidates(post: &HypothesisPosterior, cap: usize, grid: usize) -> Result<Vec<Candidate>> {
    let mut base: Vec<(String, Policy)> = Vec::new();
    let push = |id: String, p: Policy, base: &mut Vec<(String, Policy)>| {
        if !base.iter().any(|(_, q)| *q == p) {
            base.push((id, p));
        }
    };
    for i in post.top_indices(cap) {
        push(format!("hyp:{i}"), post.set().optimal(i).0.clone(), &mut base);
    }
    let mean = post.mean_environment()?;
    push("mean".into(), optimal_policy(&mean).0, &mut base);
    push("uniform".into(), Policy::uniform(post.shape()), &mut base);

    let mut out = Vec::with_capacity(base.len() * grid);
    for (id, policy) in base {
        let value = post.expected_value(&policy)?;
        out.push(Candidate { id, policy, value });
    }
    let mut top = 0;
    for (i, c) in out.iter().enumerate() {
        if c.value > out[top].value {
            top = i;
        }
    }
    let n_base = out.len();
    for other in 0..n_base {
        if other == top {
            continue;
        }
        for g in 1..grid.saturating_sub(1) {
            let theta = g as f64 / (grid - 1) as f64;
            let policy = out[other].policy.mix(&out[top].policy, theta)?;
            let value = post.expected_value(&policy)?;
            out.push(Candidate {
                id: format!("mix({},{},{theta:.3})", out[top].id, out[other].id),
                policy,
                value,
            });
        }
    }
    Ok(out)
}

enum MiEval<'a> {
    Exact(ExactMi<'a>),
    Mc(McMi<'a>, u64, usize),
}

impl MiEval<'_> {
    fn eval(&self, pi: &Policy) -> Result<f64> {
        match self {
            MiEval::Exact(e) => e.evaluate(pi),
            MiEval::Mc(m, seed, n) => {
                // Same stream for every candidate so comparisons share noise.
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                Ok(m.estimate(pi, *n, &mut rng)?.0)
            }
        }
    }
}

/// Index of the first maximizer of the objective and its MI. With `λ = 0`
/// the information term is skipped and only computed for the winner.
fn best_candidate(candidates: &[Candidate], mi: &MiEval, lambda: f64) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64, Option<f64>)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let info = if lambda > 0.0 {
            Some(mi.eval(&c.policy)?)
        } else {
            None
        };
        let objective = c.value + 0.5 * lambda * info.unwrap_or(0.0);
        if best.is_none_or(|(_, b, _)| objective > b) {
            best = Some((i, objective, info));
        }
    }
    let (i, _, info) = best.expect("candidate set is never empty");
    let info = match info {
        Some(x) => x,
        None => mi.eval(&candidates[i].policy)?,
    };
    Ok((i, info))
}

/// Maximizes `E_t[V_π] + (λ/2) I(ζ; X_π)` over [`ids_candidates`]; the first
/// maximizer wins ties. In `auto` mode every candidate is scored exactly
/// when all of them fit under the outcome guard, and by Monte-Carlo
/// otherwise, so one episode never mixes the two.
pub fn ids_policy<R: Rng + ?Sized>(
    map: &SurrogateMap,
    lambda: f64,
    pi0: &Policy,
    cfg: &AgentConfig,
    rng: &mut R,
) -> Result<Selection> {
    let post = map.posterior();
    let seed: u64 = rng.random();
    let candidates = ids_candidates(post, cfg.candidate_cap, cfg.mixture_grid)?;
    let exact = || -> Result<MiEval> { Ok(MiEval::Exact(ExactMi::new(map, pi0, cfg.include_rewards)?)) };
    let mc = || MiEval::Mc(McMi::new(map, pi0, cfg.include_rewards), seed, cfg.mc_samples);
    let (i, info) = match cfg.mi_mode {
        MiMode::Exact => best_candidate(&candidates, &exact()?, lambda)?,
        MiMode::Mc => best_candidate(&candidates, &mc(), lambda)?,
        MiMode::Auto => match exact().and_then(|e| best_candidate(&candidates, &e, lambda)) {
            Err(Error::Infeasible { .. }) => best_candidate(&candidates, &mc(), lambda)?,
            r => r?,
        },
    };
    let chosen = &candidates[i];
    Ok(Selection {
        policy: chosen.policy.clone(),
        id: chosen.id.clone(),
        mi: Some(info),
    })
}
