//! Dimensionality-reduction and embedding-geometry checks.

use std::f64::consts::LN_2;

use ndarray::{Array2, ArrayView2, Axis};

use super::{instance_rng, normal, uniform, Tally, TheoremId, TheoremReport};
use crate::classic::{classical_triplet, orthonormalize, pca_subspace, principal_angle_cosines};
use crate::distributions::{gaussian_affinity, pair_indicator, BandwidthProfile, ConditionalDistribution, PairSet};
use crate::error::Result;
use crate::kernels::{gaussian_kernel, student_t_kernel};
use crate::loss::{cohesion_variance_loss, cohesion_variance_with_grad, icon_cross_entropy, icon_loss, pairwise_variance, Direction};

const IDENTITY_TOL: f64 = 1e-10;

fn sq(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Mean over anchors of `Σ_j p ln(p/q)` with both sides given as log-weights
/// over `j ≠ i`, coded from scratch.
fn textbook_kl(log_p: impl Fn(usize, usize) -> f64, log_q: impl Fn(usize, usize) -> f64, n: usize) -> f64 {
    let mut total = 0.0;
    for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let lp: Vec<f64> = others.iter().map(|&j| log_p(i, j)).collect();
        let lq: Vec<f64> = others.iter().map(|&j| log_q(i, j)).collect();
        let (zp, zq) = (log_sum_exp(&lp), log_sum_exp(&lq));
        for (a, b) in lp.iter().zip(&lq) {
            let p = (a - zp).exp();
            if p > 0.0 {
                total += p * ((a - zp) - (b - zq));
            }
        }
    }
    total / n as f64
}

/// Gaussian affinities on the data against `exp(−‖φ_i − φ_j‖²)` on the
/// embedding, compared with a direct SNE implementation.
pub fn verify_sne(points: ArrayView2<f64>, sigma: &BandwidthProfile, embeddings: ArrayView2<f64>) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Sne, IDENTITY_TOL);
    t.instance();
    let n = points.nrows();
    let sigmas = sigma.resolve(points)?;
    let p = gaussian_affinity(points, &BandwidthProfile::PerPoint(sigmas.clone()), true)?;
    let q = gaussian_kernel(embeddings, std::f64::consts::FRAC_1_SQRT_2)?;
    let lib = icon_loss(&p, &q, Direction::Forward)?.total;
    let direct = textbook_kl(
        |i, j| -sq(points.row(i), points.row(j)) / (2.0 * sigmas[i] * sigmas[i]),
        |i, j| -sq(embeddings.row(i), embeddings.row(j)),
        n,
    );
    t.identity(lib, direct);
    Ok(t.finish())
}

/// As [`verify_sne`] with the one-degree Student-t kernel on the embedding.
pub fn verify_tsne(points: ArrayView2<f64>, sigma: &BandwidthProfile, embeddings: ArrayView2<f64>) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Tsne, IDENTITY_TOL);
    t.instance();
    let n = points.nrows();
    let sigmas = sigma.resolve(points)?;
    let p = gaussian_affinity(points, &BandwidthProfile::PerPoint(sigmas.clone()), true)?;
    let q = student_t_kernel(embeddings, 1.0)?;
    let lib = icon_loss(&p, &q, Direction::Forward)?.total;
    let direct = textbook_kl(
        |i, j| -sq(points.row(i), points.row(j)) / (2.0 * sigmas[i] * sigmas[i]),
        |i, j| -(1.0 + sq(embeddings.row(i), embeddings.row(j))).ln(),
        n,
    );
    t.identity(lib, direct);
    Ok(t.finish())
}

fn sne_instances(seed: u64, count: usize, id: TheoremId) -> Vec<(Array2<f64>, BandwidthProfile, Array2<f64>)> {
    (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, id, k);
            match k {
                // two points: both rows are one-hot on both sides
                0 => (normal(&mut rng, 2, 4, 1.0), BandwidthProfile::Global(1.0), normal(&mut rng, 2, 2, 0.5)),
                // data and embedding coincide with matching widths
                1 => {
                    let x = normal(&mut rng, 12, 2, 0.7);
                    (x.clone(), BandwidthProfile::Global(std::f64::consts::FRAC_1_SQRT_2), x)
                }
                _ => {
                    let n = 5 + (k * 7) % 26;
                    let x = normal(&mut rng, n, 5, 1.0);
                    let profile = if k % 4 == 0 {
                        BandwidthProfile::Perplexity(((n - 1) as f64 / 3.0).max(2.0))
                    } else {
                        BandwidthProfile::PerPoint((0..n).map(|_| uniform(&mut rng, 0.5, 2.0)).collect())
                    };
                    let y = normal(&mut rng, n, 2, 0.5);
                    (x, profile, y)
                }
            }
        })
        .collect()
}

pub fn sne_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let reports = sne_instances(seed, count, TheoremId::Sne)
        .iter()
        .map(|(x, s, y)| verify_sne(x.view(), s, y.view()))
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

pub fn tsne_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let reports = sne_instances(seed, count, TheoremId::Tsne)
        .iter()
        .map(|(x, s, y)| verify_tsne(x.view(), s, y.view()))
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

/// Cohesion-variance bound for the kernel `exp(−‖f_i − f_j‖²/σ²)`.
///
/// By Jensen's inequality on the log-mean-exp over the `c` candidates of a
/// row, `H(p, q) ≥ (1/σ²)(cohesion − 2κ·Var) + log c`, where `c = n − 1`,
/// `κ = n/(n−1)` when `q` excludes the anchor and `c = n`, `κ = 1` when it
/// does not. The gap is a convex cumulant in `1/σ²` vanishing at zero, so it
/// shrinks monotonically as `σ` grows.
pub fn verify_cohesion_variance(
    embeddings: ArrayView2<f64>,
    p: &ConditionalDistribution,
    sigmas: &[f64],
) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::CohesionVariance, 1e-12);
    t.instance();
    let n = embeddings.nrows();
    let nf = n as f64;
    let include_self = !p.excludes_self();
    let d = crate::math::sq_distances(embeddings);
    let cohesion = p.probs().iter().zip(d.iter()).map(|(a, b)| a * b).sum::<f64>() / nf;
    let var = pairwise_variance(embeddings);
    let cv = cohesion_variance_loss(p, embeddings)?;
    let (c, kappa) = if include_self { (nf, 1.0) } else { (nf - 1.0, nf / (nf - 1.0)) };
    let mut gaps = Vec::with_capacity(sigmas.len());
    let mut stated_violated = false;
    for &s in sigmas {
        let q = if include_self {
            ConditionalDistribution::from_weights(d.mapv(|v| (-v / (s * s)).exp()), false)?
        } else {
            gaussian_kernel(embeddings, s / std::f64::consts::SQRT_2)?
        };
        let min_q = q.probs().iter().copied().filter(|&v| v > 0.0).fold(1.0, f64::min);
        if min_q < 1e-11 {
            t.note(format!("sigma {s}: kernel entries near the log floor ({min_q:e})"));
        }
        let h = icon_cross_entropy(p, &q)?;
        let bound = (cohesion - 2.0 * kappa * var) / (s * s) + c.ln();
        let gap = h - bound;
        t.bound(gap);
        gaps.push(gap);
        // the upper-bound reading with log n and no correction factor
        stated_violated |= cv / (s * s) + nf.ln() < h;
    }
    for w in gaps.windows(2) {
        t.require(w[1] <= w[0] + 1e-12, format!("gap grew from {} to {}", w[0], w[1]));
    }
    if let (Some(first), Some(last)) = (gaps.first(), gaps.last()) {
        t.metric("gap_first_sigma", *first);
        t.metric("gap_last_sigma", *last);
    }
    t.metric("upper_bound_reading_violated", if stated_violated { 1.0 } else { 0.0 });
    Ok(t.finish())
}

pub const COHESION_SIGMAS: [f64; 4] = [1.0, 10.0, 100.0, 1000.0];

pub fn cohesion_variance_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let reports = (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, TheoremId::CohesionVariance, k);
            let n = 4 + (k * 5) % 17;
            let f = match k {
                0 => Array2::from_elem((n, 3), 0.3),
                _ => normal(&mut rng, n, 3, 0.5),
            };
            let p = if k == 1 {
                ConditionalDistribution::new(Array2::eye(n), false)?
            } else {
                let mut w = Array2::from_shape_simple_fn((n, n), || uniform(&mut rng, 0.0, 1.0));
                w.diag_mut().fill(0.0);
                ConditionalDistribution::from_weights(w, true)?
            };
            verify_cohesion_variance(f.view(), &p, &COHESION_SIGMAS)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

/// Maximum principal angle accepted between the learned and PCA spans.
pub const PCA_ANGLE_TOL: f64 = 1e-2;
/// Relative variance shortfall accepted against the eigenvalue sum.
pub const PCA_VARIANCE_TOL: f64 = 1e-3;

/// Minimizes the cohesion-variance loss with `p` the identity indicator
/// over an orthonormal linear map (projected gradient steps; the loss is
/// unbounded below without the constraint) and compares with PCA.
pub fn verify_pca(points: ArrayView2<f64>, m: usize, seed: u64) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Pca, PCA_ANGLE_TOL);
    t.instance();
    let (n, d) = points.dim();
    let oracle = pca_subspace(points, m)?;
    let p = ConditionalDistribution::new(Array2::eye(n), false)?;
    let mut rng = instance_rng(seed, TheoremId::Pca, usize::MAX);
    let mut w = orthonormalize(normal(&mut rng, d, m, 1.0).view());
    let mean = points.mean_axis(Axis(0)).expect("n > 0");
    let centered = &points - &mean;
    let trace = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let step = 25.0 / trace.max(f64::MIN_POSITIVE);
    let mut iters = 0;
    for _ in 0..20_000 {
        iters += 1;
        let e = points.dot(&w);
        let (_, ge) = cohesion_variance_with_grad(&p, e.view())?;
        let gw = points.t().dot(&ge);
        let next = orthonormalize((&w - &(gw * step)).view());
        let moved = 1.0 - principal_angle_cosines(w.view(), next.view()).last().copied().unwrap_or(1.0);
        w = next;
        if moved < 1e-15 {
            break;
        }
    }
    let cosines = principal_angle_cosines(w.view(), oracle.basis.view());
    let min_cos = cosines.last().copied().unwrap_or(1.0).clamp(-1.0, 1.0);
    let angle = min_cos.acos();
    let achieved = pairwise_variance(points.dot(&w).view());
    let eigensum: f64 = oracle.variances.iter().sum();
    let shortfall = (eigensum - achieved).abs() / eigensum.max(f64::MIN_POSITIVE);
    t.gap(angle);
    t.require(shortfall <= PCA_VARIANCE_TOL, format!("variance {achieved} vs eigensum {eigensum}"));
    let loss = cohesion_variance_loss(&p, points.dot(&w).view())?;
    t.require((loss + 2.0 * achieved).abs() <= 1e-9 * achieved.max(1.0), "identity indicator must give -2 Var");
    t.metric("max_principal_angle", angle);
    t.metric("variance_shortfall", shortfall);
    t.metric("iterations", iters as f64);
    Ok(t.finish())
}

/// Anisotropic Gaussian sample with the given per-axis scales.
pub fn anisotropic(seed: u64, n: usize, scales: &[f64]) -> Array2<f64> {
    let mut rng = instance_rng(seed, TheoremId::Pca, 0);
    let mut x = normal(&mut rng, n, scales.len(), 1.0);
    for (k, s) in scales.iter().enumerate() {
        x.column_mut(k).mapv_inplace(|v| v * s + 0.5);
    }
    x
}

pub fn pca_suite(seed: u64, seeds: usize) -> Result<TheoremReport> {
    let mut reports = Vec::new();
    for s in 0..seeds as u64 {
        let x = anisotropic(seed.wrapping_add(s), 50, &[4.0, 2.5, 1.0, 0.5, 0.2]);
        reports.push(verify_pca(x.view(), 2, seed.wrapping_add(s))?);
    }
    // points on a line in 3-D
    let line = Array2::from_shape_fn((15, 3), |(i, k)| (i as f64 - 7.0) * [1.0, -2.0, 0.5][k]);
    reports.push(verify_pca(line.view(), 1, seed)?);
    // full span
    let x = anisotropic(seed, 30, &[3.0, 1.0, 0.3]);
    reports.push(verify_pca(x.view(), 3, seed)?);
    Ok(TheoremReport::merge(reports).expect("nonempty"))
}

/// Cohesion-variance loss with a positive-pair indicator against
/// `(1/n) Σ_i mean_{j ∈ pos(i)} ‖f_i − f_j‖² − 2·(1/n) Σ_i ‖f_i − f̄‖²`.
pub fn verify_vicreg(features: ArrayView2<f64>, pairs: &PairSet) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Vicreg, 1e-12);
    t.instance();
    let n = features.nrows();
    let p = pair_indicator(pairs)?;
    let lib = cohesion_variance_loss(&p, features)?;
    let mean = features.mean_axis(Axis(0)).expect("n > 0");
    let mut invariance = 0.0;
    let mut variance = 0.0;
    for i in 0..n {
        let pos = pairs.positives(i);
        invariance += pos.iter().map(|&j| sq(features.row(i), features.row(j))).sum::<f64>() / pos.len() as f64;
        variance += sq(features.row(i), mean.view());
    }
    let direct = invariance / n as f64 - 2.0 * variance / n as f64;
    t.identity(lib, direct);
    Ok(t.finish())
}

pub fn vicreg_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let reports = (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, TheoremId::Vicreg, k);
            let n = 2 * (2 + (k * 3) % 14);
            let pairs = PairSet::from_pairs(n, &(0..n / 2).map(|i| (2 * i, 2 * i + 1)).collect::<Vec<_>>(), None)?;
            let mut f = normal(&mut rng, n, 4, 1.0);
            match k {
                0 => {
                    for i in 0..n / 2 {
                        let row = f.row(2 * i).to_owned();
                        f.row_mut(2 * i + 1).assign(&row);
                    }
                }
                1 => f.fill(0.7),
                _ => {}
            }
            verify_vicreg(f.view(), &pairs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

pub const TRIPLET_SIGMAS: [f64; 3] = [1.0, 0.5, 0.1];

/// Two-candidate loss `σ² · H(p, q)` for one anchor with positive at squared
/// distance `dp` and negative at `dn`, `q ∝ exp(−d/σ²)`, in log space.
fn two_candidate_loss(dp: f64, dn: f64, sigma: f64) -> f64 {
    let s2 = sigma * sigma;
    s2 * (log_sum_exp(&[-dp / s2, -dn / s2]) + dp / s2)
}

/// The same quantity through the library kernel and loss on the three-point
/// configuration (anchor, positive, negative); `None` when the positive's
/// probability would hit the log floor.
fn two_candidate_loss_via_kernel(e: ArrayView2<f64>, sigma: f64) -> Result<Option<f64>> {
    let q = gaussian_kernel(e, sigma / std::f64::consts::SQRT_2)?;
    if q.get(0, 1) < 1e-12 {
        return Ok(None);
    }
    let mut p = Array2::zeros((3, 3));
    p[[0, 1]] = 1.0;
    p[[1, 0]] = 1.0;
    p[[2, 0]] = 1.0;
    let p = ConditionalDistribution::new(p, true)?;
    let r = icon_loss(&p, &q, Direction::Forward)?;
    Ok(Some(sigma * sigma * (r.per_row_kl[0] + r.per_row_entropy_p[0])))
}

/// Checks `L_σ − σ² log 2 ≤ L_triplet ≤ L_σ` on `count` random batches at
/// each `σ`, and that the mean gap `L_σ − L_triplet` is smaller at the
/// smallest `σ` than at the largest.
pub fn verify_triplet_bounds(seed: u64, count: usize, sigmas: &[f64]) -> Result<TheoremReport> {
    const BATCH: usize = 8;
    let mut t = Tally::new(TheoremId::Triplet, 1e-12);
    let mut mean_gaps = Vec::with_capacity(sigmas.len());
    let mut kernel_checked = 0usize;
    for (si, &sigma) in sigmas.iter().enumerate() {
        let mut gap_sum = 0.0;
        for k in 0..count {
            t.instance();
            let mut rng = instance_rng(seed, TheoremId::Triplet, si * count + k);
            let (mut dps, mut dns, mut l_sigma) = (Vec::new(), Vec::new(), 0.0);
            for _ in 0..BATCH {
                let e = normal(&mut rng, 3, 3, 1.0);
                let dp = sq(e.row(0), e.row(1));
                let dn = sq(e.row(0), e.row(2));
                let l = two_candidate_loss(dp, dn, sigma);
                if let Some(via) = two_candidate_loss_via_kernel(e.view(), sigma)? {
                    t.identity(via, l);
                    kernel_checked += 1;
                }
                dps.push(dp);
                dns.push(dn);
                l_sigma += l;
            }
            let l_sigma = l_sigma / BATCH as f64;
            let l_triplet = classical_triplet(&dps, &dns)?;
            t.bound(l_triplet - (l_sigma - sigma * sigma * LN_2));
            t.bound(l_sigma - l_triplet);
            gap_sum += l_sigma - l_triplet;
        }
        mean_gaps.push(gap_sum / count as f64);
        t.metric(&format!("mean_gap_sigma_{sigma}"), gap_sum / count as f64);
    }
    if let (Some(first), Some(last)) = (mean_gaps.first(), mean_gaps.last()) {
        if sigmas.len() > 1 {
            t.require(last < first, format!("mean gap at the last sigma {last} not below the first {first}"));
        }
    }
    // degenerate and saturated instances
    for &sigma in sigmas {
        let l = two_candidate_loss(1.3, 1.3, sigma);
        t.identity(l - classical_triplet(&[1.3], &[1.3])?, sigma * sigma * LN_2);
        let z = 40.0;
        let l = two_candidate_loss(z + 1.0, 1.0, sigma);
        t.identity(l, z);
    }
    t.metric("kernel_cross_checks", kernel_checked as f64);
    t.note("bounds evaluated in log space; the library kernel cross-check skips rows below the log floor");
    Ok(t.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sne_trivial_instances_vanish() {
        let inst = sne_instances(1, 2, TheoremId::Sne);
        for (x, s, y) in &inst {
            let r = verify_sne(x.view(), s, y.view()).unwrap();
            assert!(r.passed, "{r:?}");
        }
        // the coincident instance has zero loss
        let (x, s, _) = &inst[1];
        let p = gaussian_affinity(x.view(), s, true).unwrap();
        let q = gaussian_kernel(x.view(), std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!(icon_loss(&p, &q, Direction::Forward).unwrap().total.abs() < 1e-12);
    }

    #[test]
    fn suites_pass() {
        for r in [
            sne_suite(3, 6).unwrap(),
            tsne_suite(3, 6).unwrap(),
            vicreg_suite(3, 6).unwrap(),
            cohesion_variance_suite(3, 6).unwrap(),
        ] {
            assert!(r.passed, "{r:?}");
        }
    }

    #[test]
    fn triplet_bounds_hold() {
        let r = verify_triplet_bounds(0, 50, &TRIPLET_SIGMAS).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.metrics["kernel_cross_checks"] > 0.0);
    }

    #[test]
    fn pca_recovers_the_top_subspace() {
        let r = pca_suite(0, 1).unwrap();
        assert!(r.passed, "{r:?}");
    }
}
