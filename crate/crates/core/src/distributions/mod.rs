//! Supervisory conditional distributions `p(j|i)` and the transforms applied
//! to them before training.
//!
//! Every builder returns a [`ConditionalDistribution`]: a dense row-stochastic
//! matrix whose row `i` is the neighbor distribution of anchor `i`. Square
//! matrices built from data geometry exclude the anchor itself; bipartite
//! tables (contexts × vocabulary, points × classes) have no diagonal.

mod builders;
mod graph;
pub mod io;
mod transforms;

pub use builders::{
    calibrate_perplexity, cooccurrence_counts, cross_modal_indicator, gaussian_affinity,
    knn_graph, knn_uniform, label_uniform, pair_indicator, window_counts, Calibration, Metric,
};
pub use graph::NeighborGraph;
pub use transforms::{debias_uniform, mix_supervisory, propagate_walks, WalkMode};

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on row sums for every distribution in the crate.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Dense row-stochastic matrix housing `p(j|i)` or `q(j|i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalDistribution {
    probs: Array2<f64>,
    excludes_self: bool,
}

impl ConditionalDistribution {
    /// Validates and wraps a matrix. Rows must be nonnegative and sum to one;
    /// with `excludes_self` on a square matrix the diagonal must be zero.
    pub fn new(probs: Array2<f64>, excludes_self: bool) -> Result<Self> {
        let square = probs.nrows() == probs.ncols();
        for (i, row) in probs.rows().into_iter().enumerate() {
            let mut sum = 0.0;
            for &v in row {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::NonFinite(format!("row {i} has entry {v}")));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Shape(format!("row {i} sums to {sum}")));
            }
            if excludes_self && square && row[i] != 0.0 {
                return Err(Error::Shape(format!("row {i} has self mass {}", row[i])));
            }
        }
        Ok(Self {
            probs,
            excludes_self,
        })
    }

    /// Row-normalizes a nonnegative weight matrix. Zero rows are rejected.
    pub fn from_weights(mut weights: Array2<f64>, excludes_self: bool) -> Result<Self> {
        let square = weights.nrows() == weights.ncols();
        for (i, mut row) in weights.rows_mut().into_iter().enumerate() {
            if excludes_self && square {
                row[i] = 0.0;
            }
            let sum: f64 = row.sum();
            if !(sum > 0.0) || !sum.is_finite() {
                return Err(Error::ZeroRow(i));
            }
            row.mapv_inplace(|v| v / sum);
        }
        Self::new(weights, excludes_self)
    }

    /// Wraps a matrix produced by code that guarantees the invariants.
    pub(crate) fn from_trusted(probs: Array2<f64>, excludes_self: bool) -> Self {
        debug_assert!(Self::new(probs.clone(), excludes_self).is_ok());
        Self {
            probs,
            excludes_self,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.probs.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.probs.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows() == self.n_cols()
    }

    pub fn excludes_self(&self) -> bool {
        self.excludes_self
    }

    pub fn probs(&self) -> ArrayView2<'_, f64> {
        self.probs.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.probs.row(i)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probs[[i, j]]
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.probs
    }

    /// Number of admissible columns for a row: every column, minus the
    /// diagonal when self is excluded.
    pub fn support_size(&self) -> usize {
        if self.excludes_self && self.is_square() {
            self.n_cols() - 1
        } else {
            self.n_cols()
        }
    }

    pub fn row_entropy(&self, i: usize) -> f64 {
        crate::math::entropy(self.row(i).iter().copied())
    }

    pub fn row_entropies(&self) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row_entropy(i)).collect()
    }
}

/// Positive-pair relation with an optional two-way modality partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSet {
    positives: Vec<Vec<usize>>,
    modality: Option<Vec<u8>>,
}

impl PairSet {
    /// Builds a pair set over `n` indices. Positives are deduplicated and
    /// sorted; an anchor listed as its own positive is rejected.
    pub fn new(n: usize, positives: Vec<Vec<usize>>, modality: Option<Vec<u8>>) -> Result<Self> {
        if positives.len() != n {
            return Err(Error::Shape(format!(
                "{} positive lists for {n} indices",
                positives.len()
            )));
        }
        let mut cleaned = Vec::with_capacity(n);
        for (i, mut list) in positives.into_iter().enumerate() {
            list.sort_unstable();
            list.dedup();
            if let Some(&j) = list.iter().find(|&&j| j == i || j >= n) {
                return Err(Error::Shape(format!("anchor {i} has invalid positive {j}")));
            }
            cleaned.push(list);
        }
        if let Some(m) = &modality {
            if m.len() != n {
                return Err(Error::Shape(format!(
                    "modality partition covers {} of {n} indices",
                    m.len()
                )));
            }
        }
        Ok(Self {
            positives: cleaned,
            modality,
        })
    }

    /// Symmetric pair set from an undirected list of `(i, j)` pairs.
    pub fn from_pairs(n: usize, pairs: &[(usize, usize)], modality: Option<Vec<u8>>) -> Result<Self> {
        let mut positives = vec![Vec::new(); n];
        for &(i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::Shape(format!("pair ({i}, {j}) out of range for {n}")));
            }
            positives[i].push(j);
            positives[j].push(i);
        }
        Self::new(n, positives, modality)
    }

    /// Same-label pairs: every point is paired with every other member of its class.
    pub fn from_labels(labels: &[i64]) -> Result<Self> {
        let n = labels.len();
        let positives = (0..n)
            .map(|i| (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect())
            .collect();
        Self::new(n, positives, None)
    }

    pub fn len(&self) -> usize {
        self.positives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty()
    }

    pub fn positives(&self, i: usize) -> &[usize] {
        &self.positives[i]
    }

    pub fn modality(&self) -> Option<&[u8]> {
        self.modality.as_deref()
    }
}

/// Bandwidth choice for Gaussian affinities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthProfile {
    Global(f64),
    PerPoint(Vec<f64>),
    Perplexity(f64),
}

impl BandwidthProfile {
    /// Per-row bandwidths, calibrating perplexity targets against `points`.
    pub fn resolve(&self, points: ArrayView2<f64>) -> Result<Vec<f64>> {
        let n = points.nrows();
        let sigmas = match self {
            Self::Global(s) => vec![*s; n],
            Self::PerPoint(v) => {
                if v.len() != n {
                    return Err(Error::Shape(format!("{} bandwidths for {n} points", v.len())));
                }
                v.clone()
            }
            Self::Perplexity(target) => calibrate_perplexity(points, *target)?.sigmas,
        };
        if let Some(&bad) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::InvalidBandwidth(bad));
        }
        Ok(sigmas)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn rejects_unnormalized_rows() {
        assert!(ConditionalDistribution::new(array![[0.5, 0.4]], false).is_err());
        assert!(ConditionalDistribution::new(array![[-0.5, 1.5]], false).is_err());
    }

    #[test]
    fn rejects_self_mass_when_excluded() {
        let m = array![[0.5, 0.5], [1.0, 0.0]];
        assert!(ConditionalDistribution::new(m.clone(), true).is_err());
        assert!(ConditionalDistribution::new(m, false).is_ok());
    }

    #[test]
    fn from_weights_zeroes_diagonal() {
        let d = ConditionalDistribution::from_weights(array![[5.0, 1.0, 1.0], [1.0, 1.0, 0.0], [0.0, 2.0, 2.0]], true)
            .unwrap();
        assert_eq!(d.get(0, 0), 0.0);
        assert_eq!(d.get(0, 1), 0.5);
        assert_eq!(d.get(1, 0), 1.0);
        assert_eq!(d.get(2, 1), 1.0);
    }

    #[test]
    fn pair_set_rejects_self_positive() {
        assert!(PairSet::new(2, vec![vec![0], vec![0]], None).is_err());
        assert!(PairSet::new(2, vec![vec![1], vec![0]], Some(vec![0])).is_err());
    }
}
