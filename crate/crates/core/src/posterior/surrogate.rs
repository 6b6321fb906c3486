use super::HypothesisPosterior;
use crate::cover::ValuePartition;
use crate::env::TabularEnv;
use crate::{Error, Result};

/// Per-cell surrogate environments and the distribution of the cell index
/// `ζ` of the true environment under the current posterior.
#[derive(Debug, Clone)]
pub struct SurrogateMap {
    posterior: HypothesisPosterior,
    partition: ValuePartition,
    surrogates: Vec<TabularEnv>,
    zeta_weights: Vec<f64>,
    inert: Vec<bool>,
    members: Vec<Vec<usize>>,
    conditional: Vec<Vec<f64>>,
}

impl SurrogateMap {
    pub(super) fn new(post: &HypothesisPosterior, partition: &ValuePartition) -> Result<Self> {
        if partition.num_hypotheses() != post.len() {
            return Err(Error::Shape(format!(
                "partition covers {} hypotheses, posterior has {}",
                partition.num_hypotheses(),
                post.len()
            )));
        }
        let members = partition.members();
        let lw = post.log_weights();
        let prior = post.prior_log_weights();
        let mut surrogates = Vec::with_capacity(members.len());
        let mut zeta_weights = Vec::with_capacity(members.len());
        let mut inert = Vec::with_capacity(members.len());
        let mut conditional = Vec::with_capacity(members.len());
        for cell in &members {
            let mass: f64 = cell.iter().map(|&i| lw[i].exp()).sum();
            let (weights, is_inert) = if mass > 0.0 {
                (
                    cell.iter().map(|&i| lw[i].exp() / mass).collect::<Vec<_>>(),
                    false,
                )
            } else {
                let prior_mass: f64 = cell.iter().map(|&i| prior[i].exp()).sum();
                let w = if prior_mass > 0.0 {
                    cell.iter().map(|&i| prior[i].exp() / prior_mass).collect()
                } else {
                    vec![1.0 / cell.len() as f64; cell.len()]
                };
                (w, true)
            };
            let envs: Vec<&TabularEnv> = cell.iter().map(|&i| &post.hypotheses()[i]).collect();
            surrogates.push(TabularEnv::mixture(&envs, &weights)?);
            zeta_weights.push(mass);
            inert.push(is_inert);
            conditional.push(weights);
        }
        Ok(SurrogateMap {
            posterior: post.clone(),
            partition: partition.clone(),
            surrogates,
            zeta_weights,
            inert,
            members,
            conditional,
        })
    }

    /// The posterior this map was built from.
    pub fn posterior(&self) -> &HypothesisPosterior {
        &self.posterior
    }

    pub fn partition(&self) -> &ValuePartition {
        &self.partition
    }

    pub fn num_cells(&self) -> usize {
        self.surrogates.len()
    }

    pub fn surrogate(&self, k: usize) -> &TabularEnv {
        &self.surrogates[k]
    }

    pub fn surrogates(&self) -> &[TabularEnv] {
        &self.surrogates
    }

    /// Posterior mass of each cell.
    pub fn zeta_weights(&self) -> &[f64] {
        &self.zeta_weights
    }

    /// Whether cell `k` has zero posterior mass (its surrogate then uses the
    /// prior-conditional mean).
    pub fn is_inert(&self, k: usize) -> bool {
        self.inert[k]
    }

    /// Hypothesis indices in cell `k`.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.members[k]
    }

    /// Weights of the members of cell `k` conditional on the cell, aligned
    /// with [`Self::members`].
    pub fn conditional_weights(&self, k: usize) -> &[f64] {
        &self.conditional[k]
    }

    /// The surrogate of the cell containing hypothesis `i`.
    pub fn surrogate_of(&self, i: usize) -> &TabularEnv {
        &self.surrogates[self.partition.cell_of(i)]
    }
}

/// Shannon entropy of the cell distribution, in nats.
pub fn zeta_entropy(map: &SurrogateMap) -> f64 {
    -map.zeta_weights
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::test_support::deterministic_env;

    fn post() -> HypothesisPosterior {
        let envs = vec![
            deterministic_env([[[0, 1], [1, 0]], [[0, 0], [1, 1]]], vec![0.0, 1.0]),
            deterministic_env([[[1, 1], [1, 0]], [[0, 0], [1, 1]]], vec![0.0, 1.0]),
            deterministic_env([[[1, 1], [1, 1]], [[0, 0], [1, 1]]], vec![0.0, 1.0]),
            deterministic_env([[[1, 1], [1, 1]], [[1, 1], [1, 1]]], vec![0.0, 1.0]),
        ];
        HypothesisPosterior::new(envs, &[0.1, 0.2, 0.3, 0.4]).unwrap()
    }

    #[test]
    fn one_cell_is_the_mean() {
        let p = post();
        let map = p
            .surrogate_map(&ValuePartition::from_labels(1.0, &[0; 4]))
            .unwrap();
        assert_eq!(map.num_cells(), 1);
        let mean = p.mean_environment().unwrap();
        for (a, b) in map.surrogate(0).rewards().iter().zip(mean.rewards()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(zeta_entropy(&map), 0.0);
    }

    #[test]
    fn uniform_four_cells_entropy() {
        let envs = post().hypotheses().to_vec();
        let p = HypothesisPosterior::uniform(envs).unwrap();
        let map = p.surrogate_map(&ValuePartition::singletons(4, 1.0)).unwrap();
        assert!((zeta_entropy(&map) - 4f64.ln()).abs() < 1e-12);
        assert_eq!(map.surrogate_of(2), &p.hypotheses()[2]);
    }

    #[test]
    fn zero_mass_cells_are_inert() {
        let p = post();
        let point = HypothesisPosterior::new(p.hypotheses().to_vec(), &[0.0, 0.0, 1.0, 0.0]).unwrap();
        // Point prior on hypothesis 2; the other cells carry no mass.
        let map = point
            .surrogate_map(&ValuePartition::from_labels(1.0, &[0, 0, 1, 2]))
            .unwrap();
        assert_eq!(map.zeta_weights(), &[0.0, 1.0, 0.0]);
        assert!(map.is_inert(0) && !map.is_inert(1) && map.is_inert(2));
        assert_eq!(map.conditional_weights(0), &[0.5, 0.5]);
        assert_eq!(map.surrogate(1), &p.hypotheses()[2]);
    }
}
