//! Property checks on small random instances, run by the `check`
//! subcommand. Each check returns `Err` with a short diagnostic on failure.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{approx_ids_rewards, ids_policy, AgentConfig};
use crate::cover::{
    build_value_partition, layer_distances, lg_distance, max_same_cell_gap, tabular_bin_partition,
    CondDistFamily, ExtendedReal,
};
use crate::env::{evaluate_policy, evaluate_with_rewards, occupancy, optimal_policy, Policy};
use crate::information::{exact_mutual_information, kl_sum_lower_bound};
use crate::posterior::{sample_hypothesis_set, zeta_entropy, GenConfig, HypothesisPosterior};

type Check = fn(u64) -> Result<(), String>;

fn small(
    seed: u64,
    states: usize,
    actions: usize,
    horizon: usize,
    m: usize,
    n: usize,
) -> HypothesisPosterior {
    let cfg = GenConfig {
        states,
        actions,
        horizon,
        reward_levels: m,
        hypotheses: n,
        ..GenConfig::default()
    };
    sample_hypothesis_set(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).expect("valid generator config")
}

fn random_family(rng: &mut ChaCha8Rng, contexts: usize, outcomes: usize) -> CondDistFamily {
    let mut rows = Vec::with_capacity(contexts * outcomes);
    for _ in 0..contexts {
        let raw: Vec<f64> = (0..outcomes).map(|_| rng.random::<f64>() + 0.05).collect();
        let total: f64 = raw.iter().sum();
        rows.extend(raw.iter().map(|x| x / total));
    }
    CondDistFamily::new(outcomes, rows).expect("normalized rows")
}

fn random_policy(rng: &mut ChaCha8Rng, post: &HypothesisPosterior) -> Policy {
    let shape = post.shape();
    let mut probs = Vec::with_capacity(shape.num_contexts());
    for _ in 0..shape.horizon * shape.states {
        let raw: Vec<f64> = (0..shape.actions).map(|_| rng.random::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        probs.extend(raw.iter().map(|x| x / total));
    }
    Policy::new(shape, probs).unwrap_or_else(|_| Policy::uniform(shape))
}

fn metric_axioms(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..200 {
        let (c, o) = (rng.random_range(1..=6), rng.random_range(2..=5));
        let p = random_family(&mut rng, c, o);
        let q = random_family(&mut rng, c, o);
        let r = random_family(&mut rng, c, o);
        let d = |a: &CondDistFamily, b: &CondDistFamily| lg_distance(a, b).map_err(|e| e.to_string());
        if d(&p, &q)? != d(&q, &p)? || d(&p, &p)? != ExtendedReal::ZERO {
            return Err("symmetry or identity failed".into());
        }
        let (pq, pr, rq) = (d(&p, &q)?.to_f64(), d(&p, &r)?.to_f64(), d(&r, &q)?.to_f64());
        if pq > pr + rq + 1e-9 {
            return Err(format!("triangle inequality: {pq} > {pr} + {rq}"));
        }
    }
    Ok(())
}

fn bellman_optimality(seed: u64) -> Result<(), String> {
    let post = small(seed, 3, 2, 3, 3, 4);
    for env in post.hypotheses() {
        let (_, v) = optimal_policy(env);
        let r = env.mean_rewards();
        for h in 0..env.horizon() {
            for s in 0..env.num_states() {
                let best = (0..env.num_actions())
                    .map(|a| {
                        r.get(h, s, a)
                            + env
                                .transition_row(h, s, a)
                                .iter()
                                .zip(v.layer(h + 1))
                                .map(|(p, x)| p * x)
                                .sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                if (best - v.get(h, s)).abs() > 1e-10 {
                    return Err(format!("Bellman residual at ({h}, {s})"));
                }
            }
        }
    }
    Ok(())
}

fn occupancy_normalized(seed: u64) -> Result<(), String> {
    let post = small(seed, 3, 2, 3, 3, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi = random_policy(&mut rng, &post);
    let d = occupancy(&post.hypotheses()[0], &pi).map_err(|e| e.to_string())?;
    for h in 0..3 {
        let total: f64 = d.layer(h).iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(format!("layer {h} occupancy sums to {total}"));
        }
    }
    Ok(())
}

fn partitions_sound(seed: u64) -> Result<(), String> {
    let post = small(seed, 3, 2, 2, 3, 16);
    for eps in [0.5, 1.0] {
        let lg = build_value_partition(post.hypotheses(), eps, 1.0).map_err(|e| e.to_string())?;
        let bins = tabular_bin_partition(post.hypotheses(), eps).map_err(|e| e.to_string())?;
        for p in [&lg, &bins] {
            let gap = max_same_cell_gap(post.hypotheses(), p).map_err(|e| e.to_string())?;
            if gap > eps {
                return Err(format!("same-cell value gap {gap} exceeds {eps}"));
            }
        }
    }
    Ok(())
}

fn surrogate_mixing_identity(seed: u64) -> Result<(), String> {
    let post = small(seed, 2, 2, 2, 3, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..8).map(|_| rng.random_range(0..3)).collect();
    let part = crate::cover::ValuePartition::from_labels(1.0, &labels);
    let map = post.surrogate_map(&part).map_err(|e| e.to_string())?;
    let mean = post.mean_environment().map_err(|e| e.to_string())?;
    let mut mixed = vec![0.0; mean.transitions().len()];
    for (e, z) in map.surrogates().iter().zip(map.zeta_weights()) {
        for (acc, x) in mixed.iter_mut().zip(e.transitions()) {
            *acc += z * x;
        }
    }
    let worst = mixed
        .iter()
        .zip(mean.transitions())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if worst > 1e-12 {
        return Err(format!("mixing identity off by {worst}"));
    }
    if zeta_entropy(&map) > (map.num_cells() as f64).ln() + 1e-12 {
        return Err("cell entropy exceeds log K".into());
    }
    Ok(())
}

fn surrogate_closeness(seed: u64) -> Result<(), String> {
    let post = small(seed, 3, 2, 2, 3, 24);
    let part = build_value_partition(post.hypotheses(), 1.0, 1.0).map_err(|e| e.to_string())?;
    let map = post.surrogate_map(&part).map_err(|e| e.to_string())?;
    let (dp, dr) = (part.delta_p().unwrap_or(0.0), part.delta_r().unwrap_or(0.0));
    for (i, e) in post.hypotheses().iter().enumerate() {
        for (h, (t, r)) in layer_distances(map.surrogate_of(i), e)
            .map_err(|e| e.to_string())?
            .into_iter()
            .enumerate()
        {
            if !t.le(3.0 * dp + 1e-12) || !r.le(3.0 * dr + 1e-12) {
                return Err(format!("hypothesis {i} layer {h}: distances {t}, {r}"));
            }
        }
    }
    Ok(())
}

fn mi_bounds(seed: u64) -> Result<(), String> {
    let post = small(seed, 2, 2, 2, 2, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let map = post
        .surrogate_map(&crate::cover::ValuePartition::singletons(6, 1.0))
        .map_err(|e| e.to_string())?;
    let pi0 = Policy::uniform(post.shape());
    let pi = random_policy(&mut rng, &post);
    let mi = exact_mutual_information(&map, &pi, &pi0, true).map_err(|e| e.to_string())?;
    let h = zeta_entropy(&map);
    if mi < -1e-12 || mi > h + 1e-9 {
        return Err(format!("MI {mi} outside [0, H(zeta) = {h}]"));
    }
    let merged = post
        .surrogate_map(&map.partition().merge_cells(0, 1))
        .map_err(|e| e.to_string())?;
    let coarse = exact_mutual_information(&merged, &pi, &pi0, true).map_err(|e| e.to_string())?;
    if coarse > mi + 1e-9 {
        return Err(format!("merging cells raised MI from {mi} to {coarse}"));
    }
    let lb = kl_sum_lower_bound(&map, &pi).map_err(|e| e.to_string())?;
    if lb < -1e-12 {
        return Err(format!("negative KL sum {lb}"));
    }
    Ok(())
}

fn posterior_normalized(seed: u64) -> Result<(), String> {
    let post = small(seed, 3, 2, 3, 3, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth = &post.hypotheses()[0];
    let pi = Policy::uniform(post.shape());
    let mut p = post.clone();
    for _ in 0..50 {
        let t1 = crate::env::sample_trajectory(truth, &pi, &mut rng);
        let t0 = crate::env::sample_trajectory(truth, &pi, &mut rng);
        let o = crate::harness::bt_preference(truth, &t1, &t0, &mut rng);
        p = p
            .update_with_episode(&t1, &t0, o, false)
            .map_err(|e| e.to_string())?;
        let total: f64 = p.weights().iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(format!("weights sum to {total}"));
        }
    }
    Ok(())
}

fn approx_ids_dominates_ids(seed: u64) -> Result<(), String> {
    let post = small(seed, 2, 2, 2, 2, 6);
    let map = post
        .surrogate_map(&crate::cover::ValuePartition::singletons(6, 1.0))
        .map_err(|e| e.to_string())?;
    let lambda = 2.0;
    let pi0 = Policy::uniform(post.shape());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sel = ids_policy(&map, lambda, &pi0, &AgentConfig::default(), &mut rng).map_err(|e| e.to_string())?;
    let (mean, shaped) = approx_ids_rewards(&post, lambda).map_err(|e| e.to_string())?;
    let (app, v_app) = crate::env::plan_with_rewards(&mean, &shaped).map_err(|e| e.to_string())?;
    let s1 = mean.initial_state();
    let v_ids = evaluate_with_rewards(&mean, &shaped, &sel.policy)
        .map_err(|e| e.to_string())?
        .get(0, s1);
    let v_check = evaluate_with_rewards(&mean, &shaped, &app)
        .map_err(|e| e.to_string())?
        .get(0, s1);
    if v_ids > v_app.get(0, s1) + 1e-9 || (v_check - v_app.get(0, s1)).abs() > 1e-9 {
        return Err(format!(
            "shaped value of IDS {v_ids} exceeds the planner's {}",
            v_app.get(0, s1)
        ));
    }
    Ok(())
}

fn regret_nonnegative(seed: u64) -> Result<(), String> {
    let post = small(seed, 3, 2, 2, 3, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for e in post.hypotheses() {
        let v = optimal_policy(e).1.get(0, e.initial_state());
        for _ in 0..10 {
            let pi = random_policy(&mut rng, &post);
            let vp = evaluate_policy(e, &pi)
                .map_err(|e| e.to_string())?
                .get(0, e.initial_state());
            if vp > v + 1e-9 {
                return Err(format!("policy value {vp} exceeds optimum {v}"));
            }
        }
    }
    Ok(())
}

/// Runs every check; returns `(name, outcome)` pairs in a fixed order.
pub fn run_all(seed: u64) -> Vec<(&'static str, Result<(), String>)> {
    let checks: [(&'static str, Check); 10] = [
        ("metric axioms on random families", metric_axioms),
        ("Bellman optimality of backward induction", bellman_optimality),
        ("occupancy layers sum to one", occupancy_normalized),
        (
            "same-cell value gap within epsilon (both builders)",
            partitions_sound,
        ),
        (
            "surrogates mix back to the posterior mean",
            surrogate_mixing_identity,
        ),
        ("surrogate within 3 delta of cell members", surrogate_closeness),
        ("MI within [0, H(zeta)] and monotone under merging", mi_bounds),
        ("posterior weights stay normalized", posterior_normalized),
        (
            "Approximate-IDS maximizes the shaped value",
            approx_ids_dominates_ids,
        ),
        ("optimal value dominates every policy", regret_nonnegative),
    ];
    checks.iter().map(|(name, f)| (*name, f(seed))).collect()
}
