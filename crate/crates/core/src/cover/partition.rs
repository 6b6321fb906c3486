use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::metric::{greedy_cover, lg_rows, CondDistFamily, Cover, ExtendedReal};
use crate::env::{evaluate_policy, optimal_policy, Policy, TabularEnv, ValueTable};
use crate::{Error, Result};

/// Which construction produced a partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionBuilder {
    /// Per-layer greedy ℓ_g covers of transitions and rewards.
    #[default]
    LgCover,
    /// Uniform bins on backed-up values, rewards and next-layer values.
    TabularBins,
}

/// An ε-value partition of a finite hypothesis set.
///
/// Cell ids are dense: they are numbered by first appearance in hypothesis
/// order, so `num_cells` counts only nonempty cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePartition {
    epsilon: f64,
    builder: Option<PartitionBuilder>,
    delta_p: Option<f64>,
    delta_r: Option<f64>,
    cell_of: Vec<usize>,
    num_cells: usize,
    transition_covers: Vec<Cover>,
    reward_covers: Vec<Cover>,
    layer_counts: Vec<(usize, usize)>,
}

fn densify<K: std::hash::Hash + Eq>(keys: impl IntoIterator<Item = K>) -> (Vec<usize>, usize) {
    let mut ids: HashMap<K, usize> = HashMap::new();
    let cell_of = keys
        .into_iter()
        .map(|k| {
            let next = ids.len();
            *ids.entry(k).or_insert(next)
        })
        .collect();
    (cell_of, ids.len())
}

fn check_hypotheses(hyps: &[TabularEnv], eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("epsilon must be positive, got {eps}")));
    }
    let first = hyps
        .first()
        .ok_or_else(|| Error::Config("empty hypothesis set".into()))?;
    for e in &hyps[1..] {
        first.ensure_compatible(e)?;
    }
    Ok(())
}

impl ValuePartition {
    /// A partition from arbitrary labels, densified by first appearance.
    pub fn from_labels(epsilon: f64, labels: &[usize]) -> Self {
        let (cell_of, num_cells) = densify(labels.iter().copied());
        ValuePartition {
            epsilon,
            builder: None,
            delta_p: None,
            delta_r: None,
            cell_of,
            num_cells,
            transition_covers: Vec::new(),
            reward_covers: Vec::new(),
            layer_counts: Vec::new(),
        }
    }

    /// Every hypothesis in its own cell.
    pub fn singletons(n: usize, epsilon: f64) -> Self {
        Self::from_labels(epsilon, &(0..n).collect::<Vec<_>>())
    }

    /// The coarser partition with cells `a` and `b` merged.
    pub fn merge_cells(&self, a: usize, b: usize) -> Self {
        let labels: Vec<usize> = self.cell_of.iter().map(|&k| if k == b { a } else { k }).collect();
        Self::from_labels(self.epsilon, &labels)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn builder(&self) -> Option<PartitionBuilder> {
        self.builder
    }

    pub fn delta_p(&self) -> Option<f64> {
        self.delta_p
    }

    pub fn delta_r(&self) -> Option<f64> {
        self.delta_r
    }

    pub fn num_hypotheses(&self) -> usize {
        self.cell_of.len()
    }

    /// `K`, the number of nonempty cells.
    pub fn num_cells(&self) -> usize {
        self.num_cells
    }

    pub fn cell_of(&self, i: usize) -> usize {
        self.cell_of[i]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.cell_of
    }

    /// Hypothesis indices per cell, each list increasing.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_cells];
        for (i, &k) in self.cell_of.iter().enumerate() {
            out[k].push(i);
        }
        out
    }

    /// Per-layer transition covers (ℓ_g builder only).
    pub fn transition_covers(&self) -> &[Cover] {
        &self.transition_covers
    }

    /// Per-layer reward covers (ℓ_g builder only).
    pub fn reward_covers(&self) -> &[Cover] {
        &self.reward_covers
    }

    /// Per layer: (distinct transition groups, distinct reward groups).
    pub fn layer_counts(&self) -> &[(usize, usize)] {
        &self.layer_counts
    }
}

/// Partition by per-layer greedy covers with radii `δ_P = ε/(6BH²)` on
/// transitions and `δ_R = ε/(6BH)` on rewards. A cell is the tuple of ball
/// indices across all layers.
pub fn build_value_partition(hyps: &[TabularEnv], eps: f64, b_cap: f64) -> Result<ValuePartition> {
    check_hypotheses(hyps, eps)?;
    if !(b_cap >= 1.0) {
        return Err(Error::Config(format!("B must be at least 1, got {b_cap}")));
    }
    let horizon = hyps[0].horizon() as f64;
    let delta_p = eps / (6.0 * b_cap * horizon * horizon);
    let delta_r = eps / (6.0 * b_cap * horizon);
    let mut transition_covers = Vec::new();
    let mut reward_covers = Vec::new();
    for h in 0..hyps[0].horizon() {
        let ps: Vec<_> = hyps.iter().map(|e| CondDistFamily::transitions(e, h)).collect();
        let rs: Vec<_> = hyps.iter().map(|e| CondDistFamily::rewards(e, h)).collect();
        transition_covers.push(greedy_cover(&ps, delta_p)?);
        reward_covers.push(greedy_cover(&rs, delta_r)?);
    }
    let keys = (0..hyps.len()).map(|i| {
        transition_covers
            .iter()
            .chain(&reward_covers)
            .map(|c| c.assignment[i])
            .collect::<Vec<_>>()
    });
    let (cell_of, num_cells) = densify(keys);
    let layer_counts = transition_covers
        .iter()
        .zip(&reward_covers)
        .map(|(p, r)| (p.centers.len(), r.centers.len()))
        .collect();
    Ok(ValuePartition {
        epsilon: eps,
        builder: Some(PartitionBuilder::LgCover),
        delta_p: Some(delta_p),
        delta_r: Some(delta_r),
        cell_of,
        num_cells,
        transition_covers,
        reward_covers,
        layer_counts,
    })
}

#[inline]
fn bin(x: f64, width: f64, count: usize) -> usize {
    ((x / width).floor().max(0.0) as usize).min(count - 1)
}

/// Bin counts used by [`tabular_bin_partition`]: backed-up values
/// `P_h·V*_{h+1}` and next-layer state values over `[0, H]`, mean rewards
/// over `[0, 1]`.
pub fn tabular_bin_counts(horizon: usize, eps: f64) -> (usize, usize) {
    let h = horizon as f64;
    let value_bins = ((3.0 * h * h / eps).ceil() as usize).max(1);
    let reward_bins = ((3.0 * h / eps).ceil() as usize).max(1);
    (value_bins, reward_bins)
}

/// Partition by uniform bins on `P_h(·|s,a)·V*_{h+1}`, `r_h(s,a)` and each
/// `V*_{h+1}(s)`, all of width at most `ε/(3H)`.
///
/// Same-cell hypotheses then differ by at most `ε/(3H)` per layer in each of
/// the three terms of the value-difference decomposition, hence by at most
/// `ε` in value.
pub fn tabular_bin_partition(hyps: &[TabularEnv], eps: f64) -> Result<ValuePartition> {
    check_hypotheses(hyps, eps)?;
    let shape = hyps[0].shape();
    let horizon = shape.horizon;
    let (value_bins, reward_bins) = tabular_bin_counts(horizon, eps);
    let value_width = horizon as f64 / value_bins as f64;
    let reward_width = 1.0 / reward_bins as f64;

    let mut layer_sigs: Vec<Vec<(Vec<usize>, Vec<usize>)>> = Vec::with_capacity(hyps.len());
    for env in hyps {
        let (_, v) = optimal_policy(env);
        let mut per_layer = Vec::with_capacity(horizon);
        for h in 0..horizon {
            let next = v.layer(h + 1);
            let mut trans_sig: Vec<usize> = next.iter().map(|&x| bin(x, value_width, value_bins)).collect();
            let mut reward_sig = Vec::with_capacity(shape.states * shape.actions);
            for s in 0..shape.states {
                for a in 0..shape.actions {
                    let pv: f64 = env
                        .transition_row(h, s, a)
                        .iter()
                        .zip(next)
                        .map(|(p, x)| p * x)
                        .sum();
                    trans_sig.push(bin(pv, value_width, value_bins));
                    reward_sig.push(bin(env.mean_reward(h, s, a), reward_width, reward_bins));
                }
            }
            per_layer.push((trans_sig, reward_sig));
        }
        layer_sigs.push(per_layer);
    }
    let layer_counts = (0..horizon)
        .map(|h| {
            let (_, p) = densify(layer_sigs.iter().map(|sig| &sig[h].0));
            let (_, r) = densify(layer_sigs.iter().map(|sig| &sig[h].1));
            (p, r)
        })
        .collect();
    let (cell_of, num_cells) = densify(layer_sigs.iter());
    Ok(ValuePartition {
        epsilon: eps,
        builder: Some(PartitionBuilder::TabularBins),
        delta_p: None,
        delta_r: None,
        cell_of,
        num_cells,
        transition_covers: Vec::new(),
        reward_covers: Vec::new(),
        layer_counts,
    })
}

/// Builds a partition with the chosen construction.
pub fn build_partition(
    builder: PartitionBuilder,
    hyps: &[TabularEnv],
    eps: f64,
    b_cap: f64,
) -> Result<ValuePartition> {
    match builder {
        PartitionBuilder::LgCover => build_value_partition(hyps, eps, b_cap),
        PartitionBuilder::TabularBins => tabular_bin_partition(hyps, eps),
    }
}

/// Largest `V^E_{π*_E}(s1) − V^{E'}_{π*_E}(s1)` over ordered same-cell pairs
/// `E ≠ E'`; 0 when every cell is a singleton.
pub fn max_same_cell_gap(hyps: &[TabularEnv], partition: &ValuePartition) -> Result<f64> {
    if hyps.len() != partition.num_hypotheses() {
        return Err(Error::Shape(format!(
            "partition covers {} hypotheses, got {}",
            partition.num_hypotheses(),
            hyps.len()
        )));
    }
    let plans: Vec<(Policy, ValueTable)> = hyps.iter().map(optimal_policy).collect();
    let mut worst: f64 = 0.0;
    for cell in partition.members() {
        for &i in &cell {
            let s1 = hyps[i].initial_state();
            let own = plans[i].1.get(0, s1);
            for &j in &cell {
                if i != j {
                    let other = evaluate_policy(&hyps[j], &plans[i].0)?.get(0, s1);
                    worst = worst.max(own - other);
                }
            }
        }
    }
    Ok(worst)
}

/// Per-layer ℓ_g distance between two environments' transitions and
/// rewards, as `(transitions, rewards)` pairs.
pub fn layer_distances(a: &TabularEnv, b: &TabularEnv) -> Result<Vec<(ExtendedReal, ExtendedReal)>> {
    a.ensure_compatible(b)?;
    let shape = a.shape();
    let m = a.reward_grid().len();
    let tn = shape.states * shape.actions * shape.states;
    let rn = shape.states * shape.actions * m;
    Ok((0..shape.horizon)
        .map(|h| {
            let t = lg_rows(
                &a.transitions()[h * tn..(h + 1) * tn],
                &b.transitions()[h * tn..(h + 1) * tn],
                shape.states,
            );
            let r = lg_rows(
                &a.rewards()[h * rn..(h + 1) * rn],
                &b.rewards()[h * rn..(h + 1) * rn],
                m,
            );
            (t, r)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::test_support::deterministic_env;

    fn envs() -> Vec<TabularEnv> {
        vec![
            deterministic_env([[[0, 1], [1, 0]], [[0, 0], [1, 1]]], vec![0.0, 1.0]),
            deterministic_env([[[0, 1], [1, 0]], [[0, 0], [1, 1]]], vec![0.0, 1.0]),
            deterministic_env([[[1, 1], [1, 0]], [[0, 0], [1, 1]]], vec![0.0, 1.0]),
        ]
    }

    #[test]
    fn identical_hypotheses_share_a_cell() {
        let hyps = vec![envs()[0].clone(); 4];
        for eps in [1e-6, 1.0] {
            assert_eq!(build_value_partition(&hyps, eps, 1.0).unwrap().num_cells(), 1);
            assert_eq!(tabular_bin_partition(&hyps, eps).unwrap().num_cells(), 1);
        }
    }

    #[test]
    fn point_mass_rewards_separate_unless_equal() {
        let p = build_value_partition(&envs(), 0.5, 1.0).unwrap();
        assert_eq!(p.assignment(), &[0, 0, 1]);
        assert_eq!(p.members(), vec![vec![0, 1], vec![2]]);
        assert_eq!(max_same_cell_gap(&envs(), &p).unwrap(), 0.0);
        assert_eq!(p.layer_counts(), &[(1, 2), (1, 1)]);
    }

    #[test]
    fn huge_eps_collapses_bins() {
        let p = tabular_bin_partition(&envs(), 3.0 * 4.0 + 1.0).unwrap();
        assert_eq!(p.num_cells(), 1);
        assert_eq!(tabular_bin_counts(2, 12.0), (1, 1));
    }

    #[test]
    fn merging_and_singletons() {
        let s = ValuePartition::singletons(4, 1.0);
        assert_eq!(s.num_cells(), 4);
        let m = s.merge_cells(1, 3);
        assert_eq!(m.assignment(), &[0, 1, 2, 1]);
        assert_eq!(m.num_cells(), 3);
    }

    #[test]
    fn rejects_bad_eps() {
        assert!(build_value_partition(&envs(), 0.0, 1.0).is_err());
        assert!(tabular_bin_partition(&envs(), -1.0).is_err());
        assert!(build_value_partition(&[], 1.0, 1.0).is_err());
    }
}
