//! JSON form of an environment.
//!
//! serde_json writes the shortest decimal that round-trips each `f64`, so
//! loading and re-saving a document reproduces it byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Shape, TabularEnv};
use crate::{Error, Result};

/// Nested-array document for one environment. `s1` is the 0-based initial
/// state; `B` is the probability cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvDocument {
    #[serde(rename = "S")]
    pub states: usize,
    #[serde(rename = "A")]
    pub actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub s1: usize,
    pub reward_grid: Vec<f64>,
    /// `[h][s][a][s']`
    pub transitions: Vec<Vec<Vec<Vec<f64>>>>,
    /// `[h][s][a][g]`
    pub rewards: Vec<Vec<Vec<Vec<f64>>>>,
    pub beta: f64,
    #[serde(rename = "B")]
    pub b_cap: f64,
}

fn nest(flat: &[f64], shape: Shape, width: usize) -> Vec<Vec<Vec<Vec<f64>>>> {
    let mut rows = flat.chunks(width).map(<[f64]>::to_vec);
    (0..shape.horizon)
        .map(|_| {
            (0..shape.states)
                .map(|_| (0..shape.actions).map(|_| rows.next().unwrap()).collect())
                .collect()
        })
        .collect()
}

fn flatten(nested: &[Vec<Vec<Vec<f64>>>], shape: Shape, width: usize, what: &str) -> Result<Vec<f64>> {
    let bad = || {
        Error::Shape(format!(
            "{what} array does not match S={}, A={}, H={}",
            shape.states, shape.actions, shape.horizon
        ))
    };
    if nested.len() != shape.horizon {
        return Err(bad());
    }
    let mut out = Vec::with_capacity(shape.num_contexts() * width);
    for layer in nested {
        if layer.len() != shape.states {
            return Err(bad());
        }
        for state in layer {
            if state.len() != shape.actions {
                return Err(bad());
            }
            for row in state {
                if row.len() != width {
                    return Err(bad());
                }
                out.extend_from_slice(row);
            }
        }
    }
    Ok(out)
}

impl EnvDocument {
    pub fn from_env(env: &TabularEnv) -> Self {
        let shape = env.shape();
        EnvDocument {
            states: shape.states,
            actions: shape.actions,
            horizon: shape.horizon,
            s1: env.initial_state(),
            reward_grid: env.reward_grid().to_vec(),
            transitions: nest(env.transitions(), shape, shape.states),
            rewards: nest(env.rewards(), shape, env.reward_grid().len()),
            beta: env.beta(),
            b_cap: env.b_cap(),
        }
    }

    /// Validates the document, including the probability floor.
    pub fn to_env(&self) -> Result<TabularEnv> {
        let shape = Shape::new(self.states, self.actions, self.horizon)?;
        let transitions = flatten(&self.transitions, shape, shape.states, "transitions")?;
        let rewards = flatten(&self.rewards, shape, self.reward_grid.len(), "rewards")?;
        TabularEnv::new(
            shape,
            self.s1,
            self.reward_grid.clone(),
            transitions,
            rewards,
            self.beta,
            self.b_cap,
        )
    }

    pub fn load(path: &Path) -> Result<TabularEnv> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let doc: EnvDocument = serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        doc.to_env()
    }

    pub fn save(env: &TabularEnv, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&EnvDocument::from_env(env))
            .expect("environment documents always serialize");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::test_support::deterministic_env;

    #[test]
    fn round_trip_is_bit_identical() {
        let shape = Shape::new(3, 1, 1).unwrap();
        let t = vec![0.1, 0.2, 0.7, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 0.25, 0.25, 0.5];
        let r = vec![0.3, 0.7, 0.6, 0.4, 1.0, 0.0];
        let env = TabularEnv::new(shape, 2, vec![0.0, 1.0], t, r, 0.1, 1.0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.json");
        let p2 = dir.path().join("b.json");
        EnvDocument::save(&env, &p1).unwrap();
        let back = EnvDocument::load(&p1).unwrap();
        assert_eq!(back, env);
        EnvDocument::save(&back, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn field_names_are_stable() {
        let env = deterministic_env([[[0; 2]; 2]; 2], vec![0.0, 1.0]);
        let v = serde_json::to_value(EnvDocument::from_env(&env)).unwrap();
        for key in [
            "S",
            "A",
            "H",
            "s1",
            "reward_grid",
            "transitions",
            "rewards",
            "beta",
            "B",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["transitions"][1][0][1], serde_json::json!([0.0, 1.0]));
    }

    #[test]
    fn ragged_arrays_are_rejected() {
        let env = deterministic_env([[[0; 2]; 2]; 2], vec![0.0, 1.0]);
        let mut doc = EnvDocument::from_env(&env);
        doc.transitions[0][1].pop();
        assert!(matches!(doc.to_env(), Err(Error::Shape(_))));
    }
}
