//! Clustering correspondences: probabilistic k-means, spectral clustering,
//! normalized cuts, PMI clustering and the debiased cluster kernel.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::{instance_rng, normal, uniform, Tally, TheoremId, TheoremReport};
use crate::classic::{
    enumerate_partitions, hard_objective, kmeans_objective, lloyd_kmeans, ncut_objective, one_hot, spectral_embedding,
};
use crate::distributions::{
    debias_uniform, gaussian_affinity, knn_uniform, BandwidthProfile, ConditionalDistribution, Metric, NeighborGraph,
};
use crate::error::{Error, Result};
use crate::kernels::{
    cluster_kernel, cluster_kernel_from_assignments, degree_cluster_kernel_from_assignments, simplex_params, Kernel,
    LearnedKernel, ParamSpace,
};
use crate::loss::{icon_cross_entropy, icon_loss, Direction, IconObjective};
use crate::math::sq_distances;
use crate::optim::{init_logits, minimize, Init, OptimizerConfig};
use crate::pipeline::{hungarian_accuracy, synth_generate, SynthKind};

/// Spread tolerance for identities that hold up to a constant.
pub const CONSTANCY_TOL: f64 = 1e-8;
/// Relative excess of the I-Con k-means objective over Lloyd's.
pub const KMEANS_OBJECTIVE_TOL: f64 = 0.01;
/// Minimum Hungarian agreement between the two spectral pipelines.
pub const SPECTRAL_AGREEMENT: f64 = 0.99;
/// Fraction of random graphs whose argmins must coincide.
pub const NCUT_AGREEMENT: f64 = 0.9;

/// Bandwidth making every Gaussian affinity at least `e^{-20}` times the
/// largest entry of its row, which keeps `p` clear of the log floor.
pub fn kmeans_sigma(points: ArrayView2<f64>) -> f64 {
    let max_d = sq_distances(points).iter().copied().fold(0.0, f64::max);
    if max_d > 0.0 {
        (max_d / 40.0).sqrt()
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IconKMeans {
    pub labels: Vec<usize>,
    /// Soft assignments at the end of training.
    pub assignments: Array2<f64>,
    /// `Σ_i ‖x_i − μ_{c(i)}‖²` of the argmax partition.
    pub objective: f64,
    pub final_loss: f64,
    pub sigma: f64,
}

/// K-means as I-Con: Gaussian affinities (self included) against the cluster
/// kernel, reverse KL with the entropy of `q` added back, Adam on logits.
pub fn icon_kmeans(points: ArrayView2<f64>, m: usize, restarts: usize, seed: u64) -> Result<IconKMeans> {
    let n = points.nrows();
    if m == 0 || m > n {
        return Err(crate::error::invalid("m", format!("{m} clusters for {n} points")));
    }
    let sigma = kmeans_sigma(points);
    let p = gaussian_affinity(points, &BandwidthProfile::Global(sigma), false)?;
    let objective =
        IconObjective::new(p, LearnedKernel::new(Kernel::Cluster), Direction::Reverse).with_entropy_weight(1.0);
    let cfg = OptimizerConfig {
        learning_rate: 0.05,
        epochs: 300,
        restarts,
        seed,
        entropy_weight: 1.0,
        ..Default::default()
    };
    let init = Init::Random(Box::new(move |rng| init_logits(n, m, rng)));
    let result = minimize(&objective, &init, &cfg)?;
    let logits = match &result.params {
        ParamSpace::ClusterLogits(z) => z.clone(),
        _ => unreachable!("cluster logits in, cluster logits out"),
    };
    let phi = simplex_params(logits.view());
    let labels: Vec<usize> = phi
        .rows()
        .into_iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (c, &v)| if v > acc.1 { (c, v) } else { acc })
                .0
        })
        .collect();
    Ok(IconKMeans {
        objective: hard_objective(points, &labels, m),
        labels,
        assignments: phi,
        final_loss: result.final_loss,
        sigma,
    })
}

/// I-Con k-means against Lloyd's algorithm with the same restart budget:
/// the I-Con partition's objective may exceed Lloyd's by at most 1%.
pub fn verify_icon_kmeans(points: ArrayView2<f64>, m: usize, restarts: usize, seed: u64) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Kmeans, KMEANS_OBJECTIVE_TOL);
    t.instance();
    let icon = icon_kmeans(points, m, restarts, seed)?;
    let lloyd = lloyd_kmeans(points, m, restarts, seed)?;
    let excess = (icon.objective - lloyd.objective) / lloyd.objective.max(f64::MIN_POSITIVE);
    t.gap(excess.max(0.0));
    t.metric("icon_objective", icon.objective);
    t.metric("lloyd_objective", lloyd.objective);
    t.metric("partition_agreement", hungarian_accuracy(&icon.labels, &lloyd.partition)?);
    let min_max_prob = icon.assignments.rows().into_iter().map(|r| r.fold(0.0f64, |a, &b| a.max(b))).fold(1.0, f64::min);
    t.metric("min_max_assignment", min_max_prob);
    Ok(t.finish())
}

/// `Δ(φ) = KL(q ‖ p) − [(1/2σ²)(1/N)·2·kmeans(φ) − mean H(q)]` must not
/// depend on `φ`; also checks `Σ q d = 2·kmeans(φ)`, the inner-product form
/// `Σ q d = 2Σ‖x‖² − 2Σ q x_i·x_j`, and `H = log N` for one hard cluster.
pub fn verify_kmeans_identity(points: ArrayView2<f64>, sigma: f64, samples: &[Array2<f64>]) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Kmeans, CONSTANCY_TOL);
    let n = points.nrows();
    let nf = n as f64;
    let p = gaussian_affinity(points, &BandwidthProfile::Global(sigma), false)?;
    let d = sq_distances(points);
    let gram = points.dot(&points.t());
    let norms: f64 = (0..n).map(|i| gram[[i, i]]).sum();
    let mut deltas = Vec::with_capacity(samples.len());
    for phi in samples {
        t.instance();
        let q = cluster_kernel_from_assignments(phi.view())?;
        let kl = icon_loss(&p, &q, Direction::Reverse)?;
        let mean_h = kl.per_row_entropy_q.iter().sum::<f64>() / nf;
        let kobj = kmeans_objective(points, phi.view())?;
        let delta = kl.total - ((1.0 / (2.0 * sigma * sigma)) * 2.0 * kobj / nf - mean_h);
        deltas.push(delta);
        let qd: f64 = q.probs().iter().zip(d.iter()).map(|(a, b)| a * b).sum();
        t.identity(qd, 2.0 * kobj);
        let qg: f64 = q.probs().iter().zip(gram.iter()).map(|(a, b)| a * b).sum();
        t.identity(qd, 2.0 * norms - 2.0 * qg);
    }
    let (lo, hi) = deltas.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    t.gap(hi - lo);
    t.metric("delta_spread", hi - lo);
    // expected constant: mean log partition function of p
    let log_z: f64 = (0..n)
        .map(|i| (0..n).map(|j| (-d[[i, j]] / (2.0 * sigma * sigma)).exp()).sum::<f64>().ln())
        .sum::<f64>()
        / nf;
    t.identity(deltas[0], log_z);
    // one hard cluster: q is uniform over all N points
    let single = cluster_kernel_from_assignments(Array2::ones((n, 1)).view())?;
    let h = single.row_entropies().iter().sum::<f64>() / nf;
    t.identity(h, nf.ln());
    Ok(t.finish())
}

fn random_soft(rng: &mut rand_chacha::ChaCha20Rng, n: usize, m: usize) -> Array2<f64> {
    simplex_params(normal(rng, n, m, 2.0).view())
}

/// The three datasets of the identity check.
fn identity_datasets(seed: u64) -> Result<Vec<Array2<f64>>> {
    let mut rng = instance_rng(seed, TheoremId::Kmeans, 0);
    Ok(vec![
        normal(&mut rng, 6, 2, 1.0),
        synth_generate(SynthKind::Blobs, 24, 0.7, seed)?.points,
        normal(&mut rng, 15, 4, 2.0),
    ])
}

/// Identity on three datasets with ten soft assignments each, plus the
/// 60-point three-blob comparison with Lloyd (five restarts).
pub fn kmeans_suite(seed: u64) -> Result<TheoremReport> {
    let mut reports = Vec::new();
    for (k, x) in identity_datasets(seed)?.into_iter().enumerate() {
        let mut rng = instance_rng(seed, TheoremId::Kmeans, k + 1);
        let m = 2 + k % 2;
        let samples: Vec<Array2<f64>> = (0..10).map(|_| random_soft(&mut rng, x.nrows(), m)).collect();
        reports.push(verify_kmeans_identity(x.view(), kmeans_sigma(x.view()), &samples)?);
    }
    let blobs = synth_generate(SynthKind::Blobs, 60, 1.0, seed)?;
    reports.push(verify_icon_kmeans(blobs.points.view(), 3, 5, seed)?);
    Ok(TheoremReport::merge(reports).expect("nonempty"))
}

/// Spectral embedding followed by I-Con k-means agrees with spectral
/// embedding followed by Lloyd's algorithm.
pub fn verify_spectral(graph: &NeighborGraph, m: usize, seed: u64) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Spectral, 1.0 - SPECTRAL_AGREEMENT);
    t.instance();
    let emb = spectral_embedding(graph, m, true)?;
    let icon = icon_kmeans(emb.vectors.view(), m, 5, seed)?;
    let lloyd = lloyd_kmeans(emb.vectors.view(), m, 5, seed)?;
    let agreement = hungarian_accuracy(&icon.labels, &lloyd.partition)?;
    t.gap(1.0 - agreement);
    t.metric("agreement", agreement);
    t.metric("eigen_residual", emb.max_residual);
    Ok(t.finish())
}

/// Two cliques, a noisy three-blob kNN graph and a complete graph.
pub fn spectral_suite(seed: u64) -> Result<TheoremReport> {
    let mut edges = Vec::new();
    for base in [0, 5] {
        for i in 0..5 {
            for j in (i + 1)..5 {
                edges.push((base + i, base + j, 1.0));
            }
        }
    }
    let cliques = NeighborGraph::undirected(10, &edges)?;
    let blobs = synth_generate(SynthKind::Blobs, 60, 1.0, seed)?;
    let knn = crate::distributions::knn_graph(blobs.points.view(), 8, Metric::Euclidean)?;
    let complete: Vec<(usize, usize, f64)> =
        (0..6).flat_map(|i| ((i + 1)..6).map(move |j| (i, j, 1.0))).collect();
    let complete = NeighborGraph::undirected(6, &complete)?;
    let reports = vec![
        verify_spectral(&cliques, 2, seed)?,
        verify_spectral(&knn, 3, seed)?,
        verify_spectral(&complete, 1, seed)?,
    ];
    Ok(TheoremReport::merge(reports).expect("nonempty"))
}

/// `p(j|i) = exp(w_ij/d_j) / Σ_k exp(w_ik/d_k)` over every node, with `W`
/// symmetrized.
pub fn ncut_supervisory(graph: &NeighborGraph) -> Result<ConditionalDistribution> {
    let w = graph.weights();
    let w = (&w + &w.t()) / 2.0;
    let deg: Vec<f64> = w.rows().into_iter().map(|r| r.sum()).collect();
    if let Some(i) = deg.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::ZeroDegree(i));
    }
    let n = w.nrows();
    let logits = Array2::from_shape_fn((n, n), |(i, j)| w[[i, j]] / deg[j]);
    let mut probs = Array2::zeros((n, n));
    for i in 0..n {
        let max = logits.row(i).fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let z: f64 = logits.row(i).iter().map(|v| (v - max).exp()).sum();
        for j in 0..n {
            probs[[i, j]] = (logits[[i, j]] - max).exp() / z;
        }
    }
    ConditionalDistribution::new(probs, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcutOutcome {
    pub graph: usize,
    pub ncut_argmin: Vec<usize>,
    pub icon_argmin: Vec<usize>,
    /// The I-Con argmin attains the minimum normalized cut.
    pub agree: bool,
    /// Same, for the reverse KL without the entropy of `q`.
    pub plain_agree: bool,
    pub spearman: f64,
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && (v[order[j + 1]] - v[order[i]]).abs() <= 1e-12 * v[order[i]].abs().max(1.0) {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &order[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        1.0
    } else {
        cov / (va * vb).sqrt()
    }
}

fn argmin_by(values: &[f64]) -> usize {
    values.iter().enumerate().fold(0, |best, (k, &v)| if v < values[best] { k } else { best })
}

/// Brute force over every two-block partition of a small graph: the
/// normalized cut against the reverse-KL I-Con loss with the degree-weighted
/// cluster kernel, `q`'s entropy added back. Returns the outcome per graph.
pub fn verify_ncut(graphs: &[NeighborGraph]) -> Result<(TheoremReport, Vec<NcutOutcome>)> {
    let mut t = Tally::new(TheoremId::Ncut, 1.0 - NCUT_AGREEMENT);
    let mut outcomes = Vec::with_capacity(graphs.len());
    let mut spread_max: f64 = 0.0;
    for (g, graph) in graphs.iter().enumerate() {
        t.instance();
        let n = graph.n_nodes();
        let p = ncut_supervisory(graph)?;
        let w = graph.weights();
        let w = (&w + &w.t()) / 2.0;
        let deg: Vec<f64> = w.rows().into_iter().map(|r| r.sum()).collect();
        let nf = n as f64;
        let (mut parts, mut ncuts, mut losses, mut plain) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for labels in enumerate_partitions(n, 2)? {
            if labels.iter().all(|&l| l == 0) {
                continue;
            }
            let q = degree_cluster_kernel_from_assignments(one_hot(&labels, 2).view(), &deg)?;
            let r = icon_loss(&p, &q, Direction::Reverse)?;
            let h = r.per_row_entropy_q.iter().sum::<f64>() / nf;
            ncuts.push(ncut_objective(graph, &labels)?);
            losses.push(r.total + h);
            plain.push(r.total);
            parts.push(labels);
        }
        // (loss − (ncut − 2)/N) is the mean log partition function of p
        let offsets: Vec<f64> = losses.iter().zip(&ncuts).map(|(l, c)| l - (c - 2.0) / nf).collect();
        let (lo, hi) = offsets.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        spread_max = spread_max.max(hi - lo);
        let best_ncut = ncuts[argmin_by(&ncuts)];
        let tie = |k: usize| ncuts[k] <= best_ncut + 1e-12 * best_ncut.abs().max(1.0);
        let icon_k = argmin_by(&losses);
        let plain_k = argmin_by(&plain);
        let outcome = NcutOutcome {
            graph: g,
            ncut_argmin: parts[argmin_by(&ncuts)].clone(),
            icon_argmin: parts[icon_k].clone(),
            agree: tie(icon_k),
            plain_agree: tie(plain_k),
            spearman: pearson(&ranks(&ncuts), &ranks(&losses)),
        };
        if !outcome.agree {
            t.note(format!(
                "graph {g}: ncut argmin {:?}, I-Con argmin {:?}",
                outcome.ncut_argmin, outcome.icon_argmin
            ));
        }
        outcomes.push(outcome);
    }
    let count = outcomes.len().max(1) as f64;
    let agree = outcomes.iter().filter(|o| o.agree).count() as f64;
    let plain = outcomes.iter().filter(|o| o.plain_agree).count() as f64;
    let rho = outcomes.iter().map(|o| o.spearman).fold(f64::INFINITY, f64::min);
    t.gap(1.0 - agree / count);
    t.metric("argmin_agreements", agree);
    t.metric("plain_reverse_kl_agreements", plain);
    t.metric("min_spearman", rho);
    t.metric("offset_spread", spread_max);
    t.note("supervisory side exp(w_ij/d_j) (listed as the learned side in the method table); learned side is the degree-weighted cluster kernel");
    Ok((t.finish(), outcomes))
}

/// Random weighted graph on `n` nodes with no isolated node.
fn random_graph(rng: &mut rand_chacha::ChaCha20Rng, n: usize) -> Result<NeighborGraph> {
    let mut edges = Vec::new();
    let mut touched = vec![false; n];
    for i in 0..n {
        for j in (i + 1)..n {
            if uniform(rng, 0.0, 1.0) < 0.4 {
                edges.push((i, j, uniform(rng, 0.1, 1.0)));
                touched[i] = true;
                touched[j] = true;
            }
        }
    }
    for i in 0..n {
        if !touched[i] {
            let j = (i + 1) % n;
            edges.push((i.min(j), i.max(j), uniform(rng, 0.1, 1.0)));
            touched[i] = true;
            touched[j] = true;
        }
    }
    NeighborGraph::undirected(n, &edges)
}

/// `count` random 8-node graphs.
pub fn ncut_suite(seed: u64, count: usize) -> Result<(TheoremReport, Vec<NcutOutcome>)> {
    let graphs = (0..count)
        .map(|k| random_graph(&mut instance_rng(seed, TheoremId::Ncut, k), 8))
        .collect::<Result<Vec<_>>>()?;
    verify_ncut(&graphs)
}

/// kNN supervision against the cluster kernel equals the directly coded
/// `−(1/N) Σ_i (1/k) Σ_{j∈kNN(i)} log Σ_c φ_ic φ_jc / Σ_l φ_lc`.
pub fn verify_pmi(points: ArrayView2<f64>, k: usize, logits: ArrayView2<f64>) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Pmi, 1e-10);
    t.instance();
    let n = points.nrows();
    let p = knn_uniform(points, k, Metric::Euclidean)?;
    let q = cluster_kernel(logits)?;
    let lib = icon_cross_entropy(&p, &q)?;
    let phi = simplex_params(logits);
    let mass: Vec<f64> = phi.columns().into_iter().map(|c| c.sum()).collect();
    let d = sq_distances(points);
    let mut direct = 0.0;
    for i in 0..n {
        let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| d[[i, a]].total_cmp(&d[[i, b]]).then(a.cmp(&b)));
        for &j in &order[..k] {
            let qij: f64 = (0..phi.ncols()).map(|c| phi[[i, c]] * phi[[j, c]] / mass[c]).sum();
            direct -= qij.ln() / k as f64;
        }
    }
    t.identity(lib, direct / n as f64);
    Ok(t.finish())
}

/// Brute force over hard partitions of two separated groups: the kNN
/// cross-entropy is minimized by the group split.
fn pmi_recovers_components(seed: u64) -> Result<bool> {
    let mut rng = instance_rng(seed, TheoremId::Pmi, usize::MAX);
    let mut x = normal(&mut rng, 8, 2, 0.2);
    for i in 4..8 {
        x[[i, 0]] += 10.0;
    }
    let p = knn_uniform(x.view(), 2, Metric::Euclidean)?;
    let mut best = (f64::INFINITY, Vec::new());
    for labels in enumerate_partitions(8, 2)? {
        let q = cluster_kernel_from_assignments(one_hot(&labels, 2).view())?;
        let h = icon_cross_entropy(&p, &q)?;
        if h < best.0 {
            best = (h, labels);
        }
    }
    Ok(best.1 == vec![0, 0, 0, 0, 1, 1, 1, 1])
}

pub(super) fn pmi_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let mut reports = (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, TheoremId::Pmi, k);
            let n = 5 + (k * 3) % 20;
            let x = normal(&mut rng, n, 3, 1.0);
            let z = normal(&mut rng, n, 2 + k % 3, 1.5);
            verify_pmi(x.view(), 1 + k % 3, z.view())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut t = Tally::new(TheoremId::Pmi, 1e-10);
    t.instance();
    t.require(pmi_recovers_components(seed)?, "hard-partition argmin is not the component split");
    reports.push(t.finish());
    Ok(TheoremReport::merge(reports).expect("nonempty"))
}

/// Debiasing on both sides: the learned cluster kernel becomes
/// `(1−α) q + α/N` over all `N` columns, the supervisory kNN side
/// `(1−α) p + α/(N−1)` off the diagonal, and the loss is their KL.
pub fn verify_debiased_clustering(points: ArrayView2<f64>, k: usize, logits: ArrayView2<f64>, alpha: f64) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::DebiasedClustering, 1e-12);
    t.instance();
    let n = points.nrows();
    let nf = n as f64;
    let p = knn_uniform(points, k, Metric::Euclidean)?;
    let p_tilde = debias_uniform(&p, alpha)?;
    let kernel = LearnedKernel::new(Kernel::Cluster).with_debias(alpha);
    let params = ParamSpace::ClusterLogits(logits.to_owned());
    let q_tilde = kernel.evaluate(&params)?;
    let q = cluster_kernel(logits)?;
    for i in 0..n {
        for j in 0..n {
            t.identity(q_tilde.get(i, j), (1.0 - alpha) * q.get(i, j) + alpha / nf);
            let expected = if i == j { 0.0 } else { (1.0 - alpha) * p.get(i, j) + alpha / (nf - 1.0) };
            t.identity(p_tilde.get(i, j), expected);
        }
    }
    let lib = icon_loss(&p_tilde, &q_tilde, Direction::Forward)?.total;
    let mut direct = 0.0;
    for i in 0..n {
        for j in 0..n {
            let a = p_tilde.get(i, j);
            if a > 0.0 {
                direct += a * (a / q_tilde.get(i, j)).ln();
            }
        }
    }
    t.identity(lib, direct / nf);
    Ok(t.finish())
}

pub(super) fn debiased_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let reports = (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, TheoremId::DebiasedClustering, k);
            let n = 5 + (k * 3) % 20;
            let x = normal(&mut rng, n, 2, 1.0);
            let z = normal(&mut rng, n, 2 + k % 3, 1.5);
            let alpha = match k {
                0 => 0.0,
                1 => 1.0,
                _ => uniform(&mut rng, 0.0, 1.0),
            };
            verify_debiased_clustering(x.view(), 1 + k % 3, z.view(), alpha)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kmeans_identity_is_constant() {
        for (k, x) in identity_datasets(11).unwrap().into_iter().enumerate() {
            let mut rng = instance_rng(11, TheoremId::Kmeans, k + 1);
            let samples: Vec<_> = (0..10).map(|_| random_soft(&mut rng, x.nrows(), 3)).collect();
            let r = verify_kmeans_identity(x.view(), kmeans_sigma(x.view()), &samples).unwrap();
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn icon_kmeans_on_separated_blobs_is_hard_and_exact() {
        let blobs = synth_generate(SynthKind::Blobs, 30, 0.3, 2).unwrap();
        let r = icon_kmeans(blobs.points.view(), 3, 3, 2).unwrap();
        assert_eq!(hungarian_accuracy(&r.labels, &blobs.labels).unwrap(), 1.0);
        let worst = r.assignments.iter().map(|&v| v.min(1.0 - v)).fold(0.0, f64::max);
        assert!(worst < 1e-2, "{worst}");
    }

    #[test]
    fn ncut_examples() {
        // two disconnected triangles plus an edge count check
        let g = NeighborGraph::undirected(
            6,
            &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)],
        )
        .unwrap();
        let single = NeighborGraph::undirected(2, &[(0, 1, 1.0)]).unwrap();
        let (r, outcomes) = verify_ncut(&[g, single]).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(outcomes[0].icon_argmin, vec![0, 0, 0, 1, 1, 1]);
        assert_eq!(outcomes[1].icon_argmin, vec![0, 1]);
        assert!(r.metrics["offset_spread"] < 1e-12);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(ranks(&[3.0, 1.0, 3.0, 2.0]), vec![2.5, 0.0, 2.5, 1.0]);
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn small_suites_pass() {
        assert!(pmi_suite(0, 6).unwrap().passed);
        assert!(debiased_suite(0, 6).unwrap().passed);
    }
}
