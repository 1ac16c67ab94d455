use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{BandwidthProfile, ConditionalDistribution, NeighborGraph, PairSet};
use crate::error::{invalid, Error, Result};
use crate::math::{masked_softmax, sq_distances};

const SIGMA_MIN: f64 = 1e-10;
const SIGMA_MAX: f64 = 1e10;
const BISECTION_STEPS: usize = 64;
const PERPLEXITY_TOL: f64 = 1e-4;

/// Gaussian neighbor distribution
/// `p(j|i) ∝ exp(-‖x_i - x_j‖² / 2σ_i²)` over `j ≠ i` (or over every `j`
/// when `exclude_self` is false).
pub fn gaussian_affinity(
    points: ArrayView2<f64>,
    bw: &BandwidthProfile,
    exclude_self: bool,
) -> Result<ConditionalDistribution> {
    let n = points.nrows();
    if n < 2 {
        return Err(Error::Shape(format!("need at least 2 points, got {n}")));
    }
    let sigmas = bw.resolve(points)?;
    let d = sq_distances(points);
    Ok(affinity_from_sq_distances(&d, &sigmas, exclude_self))
}

pub(crate) fn affinity_from_sq_distances(
    d: &Array2<f64>,
    sigmas: &[f64],
    exclude_self: bool,
) -> ConditionalDistribution {
    let n = d.nrows();
    let mut probs = Array2::zeros((n, n));
    let mut logits = vec![0.0; n];
    let mut out = vec![0.0; n];
    for i in 0..n {
        let scale = 2.0 * sigmas[i] * sigmas[i];
        for j in 0..n {
            logits[j] = -d[[i, j]] / scale;
        }
        masked_softmax(&logits, |j| !exclude_self || j != i, &mut out);
        probs.row_mut(i).assign(&ndarray::ArrayView1::from(&out[..]));
    }
    ConditionalDistribution::from_trusted(probs, exclude_self)
}

/// Per-point bandwidths and the rows whose perplexity target was unreachable.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub sigmas: Vec<f64>,
    pub perplexities: Vec<f64>,
    /// Rows that could not reach the target; they fall back to uniform.
    pub unreachable: Vec<usize>,
}

fn row_perplexity(d_row: &[f64], i: usize, sigma: f64, buf: &mut [f64]) -> f64 {
    let scale = 2.0 * sigma * sigma;
    let logits: Vec<f64> = d_row.iter().map(|&v| -v / scale).collect();
    masked_softmax(&logits, |j| j != i, buf);
    crate::math::entropy(buf.iter().copied()).exp()
}

/// Finds `σ_i` per row so that `exp(H(p(·|i)))` matches `target`, by
/// bisection on `log σ` over `[1e-10, 1e10]`.
pub fn calibrate_perplexity(points: ArrayView2<f64>, target: f64) -> Result<Calibration> {
    let n = points.nrows();
    if !(target > 1.0 && target < n as f64) {
        return Err(invalid("perplexity", format!("{target} must lie in (1, {n})")));
    }
    let d = sq_distances(points);
    let mut sigmas = vec![1.0; n];
    let mut perplexities = vec![0.0; n];
    let mut unreachable = Vec::new();
    let mut buf = vec![0.0; n];
    for i in 0..n {
        let row: Vec<f64> = d.row(i).to_vec();
        let max_d = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .fold(0.0, f64::max);
        let min_d = row
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &v)| v)
            .fold(f64::INFINITY, f64::min);
        if max_d == min_d {
            // every neighbor is equidistant: the row is uniform for any σ
            let perp = row_perplexity(&row, i, 1.0, &mut buf);
            if (perp - target).abs() > PERPLEXITY_TOL {
                unreachable.push(i);
            }
            perplexities[i] = perp;
            continue;
        }
        let (mut lo, mut hi) = (SIGMA_MIN.ln(), SIGMA_MAX.ln());
        let mut best = (f64::INFINITY, 1.0, 0.0);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            let sigma = mid.exp();
            let perp = row_perplexity(&row, i, sigma, &mut buf);
            let err = (perp - target).abs();
            if err < best.0 {
                best = (err, sigma, perp);
            }
            if err <= PERPLEXITY_TOL {
                break;
            }
            // perplexity grows with σ
            if perp < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        sigmas[i] = best.1;
        perplexities[i] = best.2;
        if best.0 > PERPLEXITY_TOL {
            unreachable.push(i);
        }
    }
    Ok(Calibration {
        sigmas,
        perplexities,
        unreachable,
    })
}

/// `p(j|i) = 1/k_i` on the positives of `i`.
pub fn pair_indicator(pairs: &PairSet) -> Result<ConditionalDistribution> {
    let n = pairs.len();
    let mut probs = Array2::zeros((n, n));
    for i in 0..n {
        let pos = pairs.positives(i);
        if pos.is_empty() {
            return Err(Error::EmptyAnchor(i));
        }
        let w = 1.0 / pos.len() as f64;
        for &j in pos {
            probs[[i, j]] = w;
        }
    }
    Ok(ConditionalDistribution::from_trusted(probs, true))
}

/// Uniform over the other members of each point's class.
pub fn label_uniform(labels: &[i64]) -> Result<ConditionalDistribution> {
    let mut counts = std::collections::BTreeMap::new();
    for &l in labels {
        *counts.entry(l).or_insert(0usize) += 1;
    }
    if let Some((&c, _)) = counts.iter().find(|(_, &k)| k < 2) {
        return Err(Error::SingletonClass(c));
    }
    let n = labels.len();
    let mut probs = Array2::zeros((n, n));
    for i in 0..n {
        let w = 1.0 / (counts[&labels[i]] - 1) as f64;
        for j in 0..n {
            if j != i && labels[j] == labels[i] {
                probs[[i, j]] = w;
            }
        }
    }
    Ok(ConditionalDistribution::from_trusted(probs, true))
}

/// Distance used to rank neighbors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Euclidean,
    Cosine,
}

impl Metric {
    pub(crate) fn distances(self, points: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            Metric::Euclidean => Ok(sq_distances(points)),
            Metric::Cosine => {
                let n = points.nrows();
                let mut unit = points.to_owned();
                for (i, mut row) in unit.rows_mut().into_iter().enumerate() {
                    let norm = row.dot(&row).sqrt();
                    if norm == 0.0 {
                        return Err(Error::ZeroVector(i));
                    }
                    row.mapv_inplace(|v| v / norm);
                }
                let mut d = Array2::zeros((n, n));
                for i in 0..n {
                    for j in 0..n {
                        d[[i, j]] = 1.0 - unit.row(i).dot(&unit.row(j));
                    }
                }
                Ok(d)
            }
        }
    }
}

/// Exact k-nearest-neighbor digraph with unit weights. Ties at the k-th
/// distance go to the lowest index.
pub fn knn_graph(points: ArrayView2<f64>, k: usize, metric: Metric) -> Result<NeighborGraph> {
    let n = points.nrows();
    if k == 0 || k >= n {
        return Err(invalid("k", format!("{k} must lie in [1, {n})")));
    }
    let d = metric.distances(points)?;
    let mut edges = Vec::with_capacity(n * k);
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| d[[i, a]].total_cmp(&d[[i, b]]).then(a.cmp(&b)));
        edges.extend(order.into_iter().take(k).map(|j| (i, j, 1.0)));
    }
    NeighborGraph::new(n, edges, false)
}

/// `p(j|i) = 1/k` when `j` is among the k nearest neighbors of `i`.
pub fn knn_uniform(points: ArrayView2<f64>, k: usize, metric: Metric) -> Result<ConditionalDistribution> {
    knn_graph(points, k, metric)?.transition()
}

/// Count-normalized bipartite table (contexts × vocabulary).
pub fn cooccurrence_counts(counts: ArrayView2<u64>) -> Result<ConditionalDistribution> {
    let weights = counts.mapv(|c| c as f64);
    for (i, row) in weights.rows().into_iter().enumerate() {
        if row.sum() == 0.0 {
            return Err(Error::ZeroRow(i));
        }
    }
    ConditionalDistribution::from_weights(weights, false)
}

/// Context → next-token counts from a token stream, using the preceding
/// `window` tokens as the context. Returns the distinct contexts (in first
/// appearance order) and the count table over `vocab_size` tokens.
pub fn window_counts(tokens: &[usize], window: usize, vocab_size: usize) -> (Vec<Vec<usize>>, Array2<u64>) {
    let mut contexts: Vec<Vec<usize>> = Vec::new();
    let mut rows: Vec<Vec<u64>> = Vec::new();
    for t in window..tokens.len() {
        let ctx = tokens[t - window..t].to_vec();
        let idx = match contexts.iter().position(|c| *c == ctx) {
            Some(idx) => idx,
            None => {
                contexts.push(ctx);
                rows.push(vec![0; vocab_size]);
                rows.len() - 1
            }
        };
        rows[idx][tokens[t]] += 1;
    }
    let mut table = Array2::zeros((rows.len(), vocab_size));
    for (i, r) in rows.iter().enumerate() {
        for (j, &c) in r.iter().enumerate() {
            table[[i, j]] = c;
        }
    }
    (contexts, table)
}

/// Uniform over cross-modal positives; same-modality entries are zero.
pub fn cross_modal_indicator(pairs: &PairSet) -> Result<ConditionalDistribution> {
    let modality = pairs
        .modality()
        .ok_or_else(|| invalid("modality", "cross-modal pairs need a modality partition"))?;
    for i in 0..pairs.len() {
        if let Some(&j) = pairs.positives(i).iter().find(|&&j| modality[j] == modality[i]) {
            return Err(Error::SameModalityPositive { anchor: i, positive: j });
        }
    }
    pair_indicator(pairs)
}
