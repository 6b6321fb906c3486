mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rlhf_ids::agents::ts_policy;
use rlhf_ids::cover::*;
use rlhf_ids::env::*;
use rlhf_ids::information::*;
use rlhf_ids::posterior::*;

fn tiny_cfg(horizon: usize) -> GenConfig {
    GenConfig {
        states: 2,
        actions: 2,
        horizon,
        reward_levels: 2,
        hypotheses: 4,
        ..GenConfig::default()
    }
}

/// Random weights and a random grouping of the hypotheses into cells.
fn random_setup(post: &HypothesisPosterior, rng: &mut ChaCha8Rng) -> (HypothesisPosterior, ValuePartition) {
    let n = post.len();
    let prior = random_prior(n, rng);
    let p = HypothesisPosterior::new(post.hypotheses().to_vec(), &prior).unwrap();
    let cells = rng.random_range(1..=n);
    let labels: Vec<usize> = (0..n)
        .map(|i| if i < cells { i } else { rng.random_range(0..cells) })
        .collect();
    (p, ValuePartition::from_labels(1.0, &labels))
}

fn env_2x1(first: [f64; 2]) -> TabularEnv {
    // S=2, A=1, H=2; only the layer-0 transition from state 0 differs.
    let shape = Shape::new(2, 1, 2).unwrap();
    let transitions = [first, [0.5, 0.5], [0.5, 0.5], [0.5, 0.5]].concat();
    TabularEnv::new(shape, 0, vec![0.0, 1.0], transitions, vec![0.5; 8], 0.05, 1.0).unwrap()
}

#[test]
fn exact_mi_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (horizon, seeds) in [(1, 0..6), (2, 6..10)] {
        for seed in seeds {
            let base = instance(&tiny_cfg(horizon), seed);
            let (post, part) = random_setup(&base, &mut rng);
            let map = post.surrogate_map(&part).unwrap();
            let pi = random_policy(post.shape(), &mut rng);
            let pi0 = random_policy(post.shape(), &mut rng);
            for rewards in [true, false] {
                let exact = exact_mutual_information(&map, &pi, &pi0, rewards).unwrap();
                let oracle = brute_mi(&post, &part, &pi, &pi0, rewards);
                assert!(
                    (exact - oracle).abs() < 1e-9,
                    "H={horizon} seed={seed}: {exact} vs {oracle}"
                );
            }
        }
    }
}

#[test]
fn mi_examples() {
    let shape = Shape::new(2, 1, 2).unwrap();
    let pi = Policy::uniform(shape);
    let post = HypothesisPosterior::uniform(vec![env_2x1([1.0, 0.0]), env_2x1([0.0, 1.0])]).unwrap();
    let map = post.surrogate_map(&ValuePartition::singletons(2, 1.0)).unwrap();
    let mi = exact_mutual_information(&map, &pi, &pi, true).unwrap();
    assert!((mi - 2f64.ln()).abs() < 1e-12);

    let point = HypothesisPosterior::new(post.hypotheses().to_vec(), &[0.0, 1.0]).unwrap();
    let map = point.surrogate_map(&ValuePartition::singletons(2, 1.0)).unwrap();
    assert_eq!(exact_mutual_information(&map, &pi, &pi, true).unwrap(), 0.0);
    let (est, se) =
        mc_mutual_information(&map, &pi, &pi, 100, true, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!((est, se), (0.0, 0.0));
}

#[test]
fn mi_is_nonnegative_and_shrinks_under_coarsening() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for seed in 0..8 {
        let base = instance(
            &GenConfig {
                hypotheses: 6,
                ..tiny_cfg(2)
            },
            seed,
        );
        let (post, part) = random_setup(&base, &mut rng);
        let pi = random_policy(post.shape(), &mut rng);
        let pi0 = Policy::uniform(post.shape());
        let fine = exact_mutual_information(&post.surrogate_map(&part).unwrap(), &pi, &pi0, true).unwrap();
        assert!(fine >= -1e-12);
        if part.num_cells() >= 2 {
            let coarse = part.merge_cells(0, 1);
            let c = exact_mutual_information(&post.surrogate_map(&coarse).unwrap(), &pi, &pi0, true).unwrap();
            assert!(c >= -1e-12 && c <= fine + 1e-12, "{c} > {fine}");
        }
        let map = post.surrogate_map(&part).unwrap();
        assert!(fine <= zeta_entropy(&map) + 1e-12);
    }
}

#[test]
fn kl_sum_lower_bound_is_dominated_by_mi() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for seed in 0..10 {
        let base = instance(
            &GenConfig {
                hypotheses: 8,
                ..tiny_cfg(2)
            },
            seed,
        );
        let (post, part) = random_setup(&base, &mut rng);
        let map = post.surrogate_map(&part).unwrap();
        let pi = random_policy(post.shape(), &mut rng);
        let pi0 = Policy::uniform(post.shape());
        let lb = kl_sum_lower_bound(&map, &pi).unwrap();
        let mi = exact_mutual_information(&map, &pi, &pi0, true).unwrap();
        assert!(lb >= -1e-12);
        assert!(lb <= mi + 1e-9, "seed {seed}: {lb} > {mi}");
    }
    // One cell: the surrogate is the mean, so the bound is 0.
    let base = instance(&tiny_cfg(2), 0);
    let map = base
        .surrogate_map(&ValuePartition::from_labels(1.0, &[0, 0, 0, 0]))
        .unwrap();
    assert!(
        kl_sum_lower_bound(&map, &Policy::uniform(base.shape()))
            .unwrap()
            .abs()
            < 1e-12
    );
}

#[test]
fn mc_estimate_tracks_exact_value() {
    let base = instance(
        &GenConfig {
            hypotheses: 8,
            ..tiny_cfg(2)
        },
        5,
    );
    let map = base.surrogate_map(&ValuePartition::singletons(8, 1.0)).unwrap();
    let pi0 = Policy::uniform(base.shape());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let pi = random_policy(base.shape(), &mut rng);
    let exact = exact_mutual_information(&map, &pi, &pi0, true).unwrap();
    let h = zeta_entropy(&map);
    let mut hits = 0;
    for _ in 0..40 {
        let (est, se) = mc_mutual_information(&map, &pi, &pi0, 200, true, &mut rng).unwrap();
        assert!(est <= h + 3.0 * se + 1e-12);
        if (est - exact).abs() <= 4.0 * se {
            hits += 1;
        }
    }
    assert!(hits >= 37, "{hits}/40");
}

#[test]
fn exact_guard_reports_infeasibility() {
    let cfg = GenConfig {
        states: 4,
        actions: 3,
        horizon: 3,
        reward_levels: 5,
        hypotheses: 4,
        ..GenConfig::default()
    };
    let post = instance(&cfg, 0);
    let map = post.surrogate_map(&ValuePartition::singletons(4, 1.0)).unwrap();
    let pi = Policy::uniform(post.shape());
    let err = exact_mutual_information(&map, &pi, &pi, true).unwrap_err();
    assert!(matches!(err, rlhf_ids::Error::Infeasible { .. }));
}

#[test]
fn kl_bonus_examples() {
    let post = HypothesisPosterior::uniform(vec![env_2x1([1.0, 0.0]), env_2x1([0.0, 1.0])]).unwrap();
    assert!((kl_bonus(&post, 0, 0, 0).unwrap() - 2f64.ln()).abs() < 1e-12);
    assert!(kl_bonus(&post, 1, 0, 0).unwrap().abs() < 1e-12);
    let point = HypothesisPosterior::new(post.hypotheses().to_vec(), &[1.0, 0.0]).unwrap();
    assert_eq!(kl_bonus(&point, 0, 0, 0).unwrap(), 0.0);

    // Against an independent product-KL recomputation.
    let base = instance(&tiny_cfg(2), 9);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let post = HypothesisPosterior::new(base.hypotheses().to_vec(), &random_prior(4, &mut rng)).unwrap();
    let mean = post.mean_environment().unwrap();
    let w = post.weights();
    for (h, s, a) in [(0, 0, 0), (0, 1, 1), (1, 0, 1)] {
        let product = |e: &TabularEnv| -> Vec<f64> {
            let mut out = Vec::new();
            for p in e.transition_row(h, s, a) {
                for q in e.reward_row(h, s, a) {
                    out.push(p * q);
                }
            }
            out
        };
        let m = product(&mean);
        let oracle: f64 = post
            .hypotheses()
            .iter()
            .zip(&w)
            .map(|(e, wi)| wi * kl(&product(e), &m))
            .sum();
        assert!((kl_bonus(&post, h, s, a).unwrap() - oracle).abs() < 1e-12);
    }
}

#[test]
fn mean_environment_and_surrogates_mix_back() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let base = instance(
        &GenConfig {
            hypotheses: 7,
            ..tiny_cfg(2)
        },
        4,
    );
    let (post, part) = random_setup(&base, &mut rng);
    let mean = post.mean_environment().unwrap();
    let w = post.weights();
    for (x, idx) in mean.transitions().iter().zip(0..) {
        let oracle: f64 = post
            .hypotheses()
            .iter()
            .zip(&w)
            .map(|(e, wi)| wi * e.transitions()[idx])
            .sum();
        assert!((x - oracle).abs() < 1e-12);
    }
    let map = post.surrogate_map(&part).unwrap();
    let z = map.zeta_weights();
    assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for idx in 0..mean.rewards().len() {
        let mixed: f64 = (0..map.num_cells())
            .map(|k| z[k] * map.surrogate(k).rewards()[idx])
            .sum();
        assert!((mixed - mean.rewards()[idx]).abs() < 1e-12);
    }
    let one = post
        .surrogate_map(&ValuePartition::from_labels(1.0, &[0; 7]))
        .unwrap();
    assert_eq!(one.surrogate(0).transitions().len(), mean.transitions().len());
    for (a, b) in one.surrogate(0).transitions().iter().zip(mean.transitions()) {
        assert!((a - b).abs() < 1e-12);
    }
    let entropy: f64 = z.iter().filter(|&&p| p > 0.0).map(|p| -p * p.ln()).sum();
    assert!((zeta_entropy(&map) - entropy).abs() < 1e-12);
}

#[test]
fn update_examples() {
    let post = HypothesisPosterior::uniform(vec![env_2x1([1.0, 0.0]), env_2x1([0.0, 1.0])]).unwrap();
    let tau = Trajectory {
        states: vec![0, 1],
        actions: vec![0, 0],
        rewards: None,
    };
    let next = post.update_with_episode(&tau, &tau, true, false).unwrap();
    assert_eq!(next.weights(), vec![0.0, 1.0]);
    let dead = next.update_with_episode(
        &Trajectory {
            states: vec![0, 0],
            actions: vec![0, 0],
            rewards: None,
        },
        &tau,
        true,
        false,
    );
    assert!(matches!(dead, Err(rlhf_ids::Error::DegeneratePosterior)));

    // Same transitions; returns differ by +1 and -1, o = 1 → ratio e.
    let shape = Shape::new(1, 2, 1).unwrap();
    let make = |good: usize| {
        let mut r = vec![1.0, 0.0, 1.0, 0.0];
        r[good * 2] = 0.0;
        r[good * 2 + 1] = 1.0;
        TabularEnv::new(shape, 0, vec![0.0, 1.0], vec![1.0, 1.0], r, 0.05, 1.0).unwrap()
    };
    let post = HypothesisPosterior::uniform(vec![make(1), make(0)]).unwrap();
    let t1 = Trajectory {
        states: vec![0],
        actions: vec![1],
        rewards: None,
    };
    let t0 = Trajectory {
        states: vec![0],
        actions: vec![0],
        rewards: None,
    };
    let w = post.update_with_episode(&t1, &t0, true, false).unwrap().weights();
    assert!((w[0] - sigmoid(1.0)).abs() < 1e-12 && (w[1] - sigmoid(-1.0)).abs() < 1e-12);
    assert!((w[0] / w[1] - std::f64::consts::E).abs() < 1e-12);
}

#[test]
fn uninformative_baseline_transitions_leave_the_posterior_alone() {
    // τ0 only visits layers where every hypothesis agrees, so conditioning
    // on it scales all likelihoods by one constant.
    let post = HypothesisPosterior::uniform(vec![env_2x1([0.3, 0.7]), env_2x1([0.6, 0.4])]).unwrap();
    let t1 = Trajectory {
        states: vec![0, 1],
        actions: vec![0, 0],
        rewards: None,
    };
    let t0 = Trajectory {
        states: vec![1, 0],
        actions: vec![0, 0],
        rewards: None,
    };
    let a = post
        .update_with_episode(&t1, &t0, false, false)
        .unwrap()
        .weights();
    let b = post.update_with_episode(&t1, &t0, false, true).unwrap().weights();
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
    assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn thompson_frequencies_match_weights() {
    let base = instance(&tiny_cfg(2), 3);
    let post = HypothesisPosterior::new(base.hypotheses().to_vec(), &[0.1, 0.2, 0.3, 0.4]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 10_000;
    let mut counts = [0usize; 4];
    for _ in 0..n {
        let (i, pi) = ts_policy(&post, &mut rng);
        assert_eq!(pi, post.set().optimal(i).0);
        counts[i] += 1;
    }
    for (i, &c) in counts.iter().enumerate() {
        let p = post.weight(i);
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((c as f64 / n as f64 - p).abs() <= 3.0 * se);
    }
}

#[test]
fn surrogates_stay_close_on_clustered_instances() {
    // Jitter of this size puts cell members near the cover radius.
    let cfg = GenConfig {
        states: 3,
        actions: 2,
        horizon: 2,
        reward_levels: 3,
        hypotheses: 40,
        ..GenConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for seed in 0..4 {
        let post = clustered(&cfg, 4, 0.01, seed);
        let part = build_value_partition(post.hypotheses(), 1.0, 1.0).unwrap();
        assert!(part.num_cells() < post.len());
        let weighted =
            HypothesisPosterior::new(post.hypotheses().to_vec(), &random_prior(post.len(), &mut rng))
                .unwrap();
        let map = weighted.surrogate_map(&part).unwrap();
        let (dp, dr) = (part.delta_p().unwrap(), part.delta_r().unwrap());
        let mut worst = (0.0f64, 0.0f64);
        for i in 0..post.len() {
            if weighted.weight(i) == 0.0 {
                continue;
            }
            for (t, r) in layer_distances(map.surrogate_of(i), &post.hypotheses()[i]).unwrap() {
                worst.0 = worst.0.max(t.to_f64() / dp);
                worst.1 = worst.1.max(r.to_f64() / dr);
            }
        }
        assert!(worst.0 <= 3.0 + 1e-9 && worst.1 <= 3.0 + 1e-9);
    }
}
