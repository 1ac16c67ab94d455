use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::math::sq_dist;
use crate::optim::restart_rng;

/// Iteration cap for a single Lloyd run.
const MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Cluster id per point, in `[0, m)`.
    pub partition: Vec<usize>,
    pub centroids: Array2<f64>,
    pub objective: f64,
    /// Objective after each assignment step of the winning restart.
    pub history: Vec<f64>,
    pub restart: usize,
}

fn centroids_of(points: ArrayView2<f64>, labels: &[usize], m: usize) -> (Array2<f64>, Vec<usize>) {
    let mut c = Array2::zeros((m, points.ncols()));
    let mut counts = vec![0usize; m];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        c.row_mut(l).scaled_add(1.0, &points.row(i));
    }
    for (l, &k) in counts.iter().enumerate() {
        if k > 0 {
            c.row_mut(l).mapv_inplace(|v| v / k as f64);
        }
    }
    (c, counts)
}

/// `Σ_i ‖x_i − μ_{c(i)}‖²` with `μ` the centroids of the partition.
pub fn hard_objective(points: ArrayView2<f64>, labels: &[usize], m: usize) -> f64 {
    let (c, _) = centroids_of(points, labels, m);
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| sq_dist(points.row(i), c.row(l)))
        .sum()
}

/// k-means++ seeding.
fn seed_centroids(points: ArrayView2<f64>, m: usize, rng: &mut impl Rng) -> Array2<f64> {
    let n = points.nrows();
    let mut chosen = vec![rng.random_range(0..n)];
    let mut best: Vec<f64> = (0..n).map(|i| sq_dist(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < m {
        let total: f64 = best.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in best.iter().enumerate() {
                if u < d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            // all remaining mass is zero: take the first unchosen point
            (0..n).find(|i| !chosen.contains(i)).expect("m <= n")
        };
        chosen.push(next);
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    let mut c = Array2::zeros((m, points.ncols()));
    for (k, &i) in chosen.iter().enumerate() {
        c.row_mut(k).assign(&points.row(i));
    }
    c
}

fn assign(points: ArrayView2<f64>, centroids: &Array2<f64>) -> Vec<usize> {
    (0..points.nrows())
        .map(|i| {
            let mut best = (0, f64::INFINITY);
            for k in 0..centroids.nrows() {
                let d = sq_dist(points.row(i), centroids.row(k));
                if d < best.1 {
                    best = (k, d);
                }
            }
            best.0
        })
        .collect()
}

/// Moves the point farthest from its centroid into each empty cluster.
fn reseed_empty(points: ArrayView2<f64>, labels: &mut [usize], m: usize) {
    loop {
        let (c, counts) = centroids_of(points, labels, m);
        let Some(empty) = counts.iter().position(|&k| k == 0) else {
            return;
        };
        let far = (0..points.nrows())
            .filter(|&i| counts[labels[i]] > 1)
            .map(|i| (i, sq_dist(points.row(i), c.row(labels[i]))))
            .fold((usize::MAX, -1.0), |a, b| if b.1 > a.1 { b } else { a })
            .0;
        labels[far] = empty;
    }
}

fn lloyd_once(points: ArrayView2<f64>, m: usize, restart: usize, seed: u64) -> KMeansResult {
    let mut rng = restart_rng(seed, restart);
    let mut centroids = seed_centroids(points, m, &mut rng);
    let mut labels = assign(points, &centroids);
    reseed_empty(points, &mut labels, m);
    let mut history = vec![hard_objective(points, &labels, m)];
    for _ in 0..MAX_ITERS {
        centroids = centroids_of(points, &labels, m).0;
        let mut next = assign(points, &centroids);
        reseed_empty(points, &mut next, m);
        let obj = hard_objective(points, &next, m);
        // a reassignment that does not lower the objective is a fixed point
        if next == labels || obj >= *history.last().expect("nonempty") {
            break;
        }
        labels = next;
        history.push(obj);
    }
    let centroids = centroids_of(points, &labels, m).0;
    KMeansResult {
        objective: *history.last().expect("nonempty"),
        partition: labels,
        centroids,
        history,
        restart,
    }
}

/// Lloyd's algorithm with k-means++ seeding; best of `restarts`.
pub fn lloyd_kmeans(points: ArrayView2<f64>, m: usize, restarts: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.nrows();
    if m == 0 || m > n {
        return Err(invalid("m", format!("{m} clusters for {n} points")));
    }
    if restarts == 0 {
        return Err(invalid("restarts", "must be at least 1"));
    }
    if !points.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("points".into()));
    }
    let runs: Vec<KMeansResult> = (0..restarts).into_par_iter().map(|r| lloyd_once(points, m, r, seed)).collect();
    Ok(runs
        .into_iter()
        .reduce(|a, b| if b.objective < a.objective { b } else { a })
        .expect("restarts >= 1"))
}

/// Probabilistic k-means objective `Σ_i Σ_c φ_ic ‖x_i − μ_c‖²` with
/// `μ_c = Σ_i φ_ic x_i / Σ_i φ_ic`; clusters with zero mass are skipped.
pub fn kmeans_objective(points: ArrayView2<f64>, phi: ArrayView2<f64>) -> Result<f64> {
    if points.nrows() != phi.nrows() {
        return Err(Error::Shape(format!("{} points, {} assignment rows", points.nrows(), phi.nrows())));
    }
    let mut total = 0.0;
    for c in 0..phi.ncols() {
        let w = phi.column(c);
        let mass = w.sum();
        if mass <= 0.0 {
            continue;
        }
        let mu = w.dot(&points) / mass;
        total += (0..points.nrows()).map(|i| w[i] * sq_dist(points.row(i), mu.view())).sum::<f64>();
    }
    Ok(total)
}

/// One-hot matrix for a hard partition.
pub fn one_hot(labels: &[usize], m: usize) -> Array2<f64> {
    let mut phi = Array2::zeros((labels.len(), m));
    for (i, &l) in labels.iter().enumerate() {
        phi[[i, l]] = 1.0;
    }
    phi
}

/// Relabels clusters in first-use order.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}
