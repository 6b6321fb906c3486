use std::fmt;
use std::ops::Add;

use crate::env::TabularEnv;
use crate::{Error, Result, ROW_SUM_TOL};

/// A nonnegative real or `+∞`. Infinity absorbs addition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub const ZERO: ExtendedReal = ExtendedReal::Finite(0.0);

    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::Infinite => None,
        }
    }

    /// `f64::INFINITY` for the infinite case.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn max(self, other: ExtendedReal) -> ExtendedReal {
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a.max(b)),
            _ => ExtendedReal::Infinite,
        }
    }

    /// `self ≤ x` for a finite threshold.
    pub fn le(self, x: f64) -> bool {
        self.finite().is_some_and(|v| v <= x)
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::Infinite,
        }
    }
}

impl PartialOrd for ExtendedReal {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        use std::cmp::Ordering::*;
        match (self, other) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => a.partial_cmp(b),
            (ExtendedReal::Finite(_), ExtendedReal::Infinite) => Some(Less),
            (ExtendedReal::Infinite, ExtendedReal::Finite(_)) => Some(Greater),
            (ExtendedReal::Infinite, ExtendedReal::Infinite) => Some(Equal),
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::Infinite => f.write_str("inf"),
        }
    }
}

/// A conditional distribution: one probability vector per context, all over
/// the same outcome set. Contexts are stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct CondDistFamily {
    outcomes: usize,
    rows: Vec<f64>,
}

impl CondDistFamily {
    pub fn new(outcomes: usize, rows: Vec<f64>) -> Result<Self> {
        if outcomes == 0 || rows.is_empty() || rows.len() % outcomes != 0 {
            return Err(Error::Shape(format!(
                "{} entries do not split into rows of {outcomes}",
                rows.len()
            )));
        }
        for row in rows.chunks(outcomes) {
            let sum: f64 = row.iter().sum();
            if row.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Config(format!("row {row:?} is not a probability vector")));
            }
        }
        Ok(CondDistFamily { outcomes, rows })
    }

    /// The layer-`h` transition kernel, contexts ordered `(s, a)`.
    pub fn transitions(env: &TabularEnv, h: usize) -> Self {
        let n = env.num_states() * env.num_actions() * env.num_states();
        CondDistFamily {
            outcomes: env.num_states(),
            rows: env.transitions()[h * n..(h + 1) * n].to_vec(),
        }
    }

    /// The layer-`h` reward distributions, contexts ordered `(s, a)`.
    pub fn rewards(env: &TabularEnv, h: usize) -> Self {
        let m = env.reward_grid().len();
        let n = env.num_states() * env.num_actions() * m;
        CondDistFamily {
            outcomes: m,
            rows: env.rewards()[h * n..(h + 1) * n].to_vec(),
        }
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn contexts(&self) -> usize {
        self.rows.len() / self.outcomes
    }

    pub fn row(&self, c: usize) -> &[f64] {
        &self.rows[c * self.outcomes..(c + 1) * self.outcomes]
    }

    pub fn rows(&self) -> &[f64] {
        &self.rows
    }

    /// Context-wise mixture `w · self + (1 − w) · other`.
    pub fn mix(&self, other: &CondDistFamily, w: f64) -> Result<CondDistFamily> {
        self.check_same(other)?;
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| w * a + (1.0 - w) * b)
            .collect();
        Ok(CondDistFamily {
            outcomes: self.outcomes,
            rows,
        })
    }

    fn check_same(&self, other: &CondDistFamily) -> Result<()> {
        if self.outcomes != other.outcomes || self.rows.len() != other.rows.len() {
            return Err(Error::Config(format!(
                "families differ in shape: {}x{} vs {}x{}",
                self.contexts(),
                self.outcomes,
                other.contexts(),
                other.outcomes
            )));
        }
        Ok(())
    }
}

/// `Σ_x |log p(x) − log q(x)|` for one context.
#[inline]
pub(crate) fn row_log_l1(p: &[f64], q: &[f64]) -> ExtendedReal {
    let mut acc = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        match (a > 0.0, b > 0.0) {
            (false, false) => {}
            (true, true) => acc += (a.ln() - b.ln()).abs(),
            _ => return ExtendedReal::Infinite,
        }
    }
    ExtendedReal::Finite(acc)
}

/// Sup over contexts of the per-context log-ratio sums, on raw row slices.
pub(crate) fn lg_rows(p: &[f64], q: &[f64], outcomes: usize) -> ExtendedReal {
    p.chunks(outcomes)
        .zip(q.chunks(outcomes))
        .map(|(a, b)| row_log_l1(a, b))
        .fold(ExtendedReal::ZERO, ExtendedReal::max)
}

/// The ℓ_g distance: sup over contexts of `Σ_x |log P(x|c) − log Q(x|c)|`.
///
/// Two zeros contribute nothing; a zero against a positive entry makes the
/// distance infinite.
pub fn lg_distance(p: &CondDistFamily, q: &CondDistFamily) -> Result<ExtendedReal> {
    p.check_same(q)?;
    Ok(lg_rows(&p.rows, &q.rows, p.outcomes))
}

/// ℓ_g for vector-valued kernels: per context, the component sums are added
/// before taking the sup.
pub fn lg_distance_vec(p: &[CondDistFamily], q: &[CondDistFamily]) -> Result<ExtendedReal> {
    if p.len() != q.len() || p.is_empty() {
        return Err(Error::Config(format!(
            "component counts differ or are zero: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let contexts = p[0].contexts();
    for (a, b) in p.iter().zip(q) {
        a.check_same(b)?;
        if a.contexts() != contexts {
            return Err(Error::Config("components have different context counts".into()));
        }
    }
    let mut best = ExtendedReal::ZERO;
    for c in 0..contexts {
        let total = p
            .iter()
            .zip(q)
            .map(|(a, b)| row_log_l1(a.row(c), b.row(c)))
            .fold(ExtendedReal::ZERO, |x, y| x + y);
        best = best.max(total);
        if !best.is_finite() {
            break;
        }
    }
    Ok(best)
}

/// Result of a greedy cover: centers as item indices, and for every item
/// the position of its center in `centers`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cover {
    pub centers: Vec<usize>,
    pub assignment: Vec<usize>,
}

/// First-fit cover: scan items in order, join the first center within
/// `eps`, otherwise become a new center. The count upper-bounds the covering
/// number; it is not minimal in general.
pub fn greedy_cover(items: &[CondDistFamily], eps: f64) -> Result<Cover> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("cover radius must be positive, got {eps}")));
    }
    let mut centers: Vec<usize> = Vec::new();
    let mut assignment = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let mut found = None;
        for (k, &c) in centers.iter().enumerate() {
            if lg_distance(&items[c], item)?.le(eps) {
                found = Some(k);
                break;
            }
        }
        let k = found.unwrap_or_else(|| {
            centers.push(i);
            centers.len() - 1
        });
        assignment.push(k);
    }
    Ok(Cover { centers, assignment })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fam(rows: &[&[f64]]) -> CondDistFamily {
        CondDistFamily::new(rows[0].len(), rows.concat()).unwrap()
    }

    const PAIR: f64 = 1.0986122886681098;

    #[test]
    fn worked_distances() {
        let p = fam(&[&[0.5, 0.5]]);
        let q = fam(&[&[0.25, 0.75]]);
        let d = lg_distance(&p, &q).unwrap().finite().unwrap();
        assert!((d - (2f64.ln() + 1.5f64.ln())).abs() < 1e-15);
        assert!((d - PAIR).abs() < 1e-12);
        assert_eq!(lg_distance(&p, &p).unwrap(), ExtendedReal::ZERO);
        let z = fam(&[&[1.0, 0.0]]);
        assert_eq!(lg_distance(&z, &p).unwrap(), ExtendedReal::Infinite);
        assert_eq!(lg_distance(&p, &z).unwrap(), ExtendedReal::Infinite);
        assert_eq!(lg_distance(&z, &z).unwrap(), ExtendedReal::ZERO);
    }

    #[test]
    fn vector_version_sums_components() {
        let p = fam(&[&[0.5, 0.5]]);
        let q = fam(&[&[0.25, 0.75]]);
        let one = lg_distance_vec(&[p.clone()], &[q.clone()]).unwrap();
        assert_eq!(one, lg_distance(&p, &q).unwrap());
        let two = lg_distance_vec(&[p.clone(), p.clone()], &[q.clone(), q.clone()])
            .unwrap()
            .finite()
            .unwrap();
        assert!((two - 2.0 * PAIR).abs() < 1e-12);
        let z = fam(&[&[1.0, 0.0]]);
        assert_eq!(
            lg_distance_vec(&[p.clone(), z], &[q.clone(), p.clone()]).unwrap(),
            ExtendedReal::Infinite
        );
    }

    #[test]
    fn sup_is_over_contexts() {
        let p = fam(&[&[0.5, 0.5], &[0.5, 0.5]]);
        let q = fam(&[&[0.5, 0.5], &[0.25, 0.75]]);
        let d = lg_distance(&p, &q).unwrap().finite().unwrap();
        assert!((d - PAIR).abs() < 1e-12);
    }

    #[test]
    fn cover_examples() {
        let p = fam(&[&[0.5, 0.5]]);
        let q = fam(&[&[0.25, 0.75]]);
        assert_eq!(greedy_cover(&[p.clone()], 0.1).unwrap().centers, vec![0]);
        let copies = vec![p.clone(); 5];
        assert_eq!(greedy_cover(&copies, 0.1).unwrap().centers, vec![0]);
        let two = [p.clone(), q.clone()];
        let small = greedy_cover(&two, 0.5).unwrap();
        assert_eq!(small.centers, vec![0, 1]);
        assert_eq!(small.assignment, vec![0, 1]);
        let big = greedy_cover(&two, 1.2).unwrap();
        assert_eq!(big.centers, vec![0]);
        assert_eq!(big.assignment, vec![0, 0]);
        assert!(greedy_cover(&two, 0.0).is_err());
    }

    #[test]
    fn extended_arithmetic() {
        let a = ExtendedReal::Finite(1.0);
        assert_eq!(a + ExtendedReal::Infinite, ExtendedReal::Infinite);
        assert!(a < ExtendedReal::Infinite);
        assert!(!ExtendedReal::Infinite.le(1e300));
        assert_eq!(ExtendedReal::Infinite.to_string(), "inf");
    }

    #[test]
    fn mismatched_shapes_error() {
        let p = fam(&[&[0.5, 0.5]]);
        let q = fam(&[&[0.2, 0.3, 0.5]]);
        assert!(lg_distance(&p, &q).is_err());
    }
}
