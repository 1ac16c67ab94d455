//! Contrastive-learning correspondences: pair, label, neighbor and
//! cross-modal supervision against cosine or Student-t kernels.

use ndarray::{Array2, ArrayView2};

use super::{instance_rng, normal, uniform, Tally, TheoremId, TheoremReport};
use crate::classic::{classical_infonce, classical_infonce_terms};
use crate::distributions::{cross_modal_indicator, knn_uniform, label_uniform, pair_indicator, Metric, PairSet};
use crate::error::Result;
use crate::kernels::{
    cosine_gaussian_kernel, cross_modal_cosine_kernel, student_t_kernel, Kernel, LearnedKernel, ParamSpace,
};
use crate::loss::{finite_diff_check, icon_cross_entropy, icon_loss, Direction, IconObjective, Objective};

const IDENTITY_TOL: f64 = 1e-10;
/// Finite-difference tolerance for the learned-side gradient.
pub const GRADIENT_TOL: f64 = 1e-4;

fn unit(f: ArrayView2<f64>) -> Array2<f64> {
    let mut u = f.to_owned();
    for mut row in u.rows_mut() {
        let n = row.dot(&row).sqrt();
        row.mapv_inplace(|v| v / n);
    }
    u
}

/// `−log softmax` of `scores[j]` over the candidates `cands`.
fn neg_log_softmax(scores: &[f64], j: usize, cands: impl Iterator<Item = usize>) -> f64 {
    let cands: Vec<usize> = cands.collect();
    let m = cands.iter().map(|&k| scores[k]).fold(f64::NEG_INFINITY, f64::max);
    let z = m + cands.iter().map(|&k| (scores[k] - m).exp()).sum::<f64>().ln();
    z - scores[j]
}

/// Mean over anchors of the mean over positives of `−log q(j|i)` with
/// cosine scores over `j ≠ i`, coded directly.
fn direct_cosine_ce(f: ArrayView2<f64>, positives: &[Vec<usize>], tau: f64) -> f64 {
    let n = f.nrows();
    let u = unit(f);
    let mut total = 0.0;
    for (i, pos) in positives.iter().enumerate() {
        let scores: Vec<f64> = (0..n).map(|k| u.row(i).dot(&u.row(k)) / tau).collect();
        total += pos.iter().map(|&j| neg_log_softmax(&scores, j, (0..n).filter(|&k| k != i))).sum::<f64>()
            / pos.len() as f64;
    }
    total / n as f64
}

/// Pair-indicator supervision with a cosine kernel against InfoNCE.
///
/// The cross-entropy equals InfoNCE averaged per anchor over its positives;
/// scaled by `Σ_i k_i` it equals the InfoNCE sum over all positive pairs
/// when every anchor has the same number of positives `k_i`.
pub fn verify_infonce(features: ArrayView2<f64>, pairs: &PairSet, tau: f64) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Infonce, IDENTITY_TOL);
    t.instance();
    let n = features.nrows();
    let p = pair_indicator(pairs)?;
    let q = cosine_gaussian_kernel(features, tau)?;
    let h = icon_cross_entropy(&p, &q)?;
    t.identity(h, classical_infonce(features, pairs, tau)?);
    let terms = classical_infonce_terms(features, pairs, tau)?;
    let ks: Vec<usize> = (0..n).map(|i| pairs.positives(i).len()).collect();
    let total_k: usize = ks.iter().sum();
    let summed: f64 = terms.iter().flatten().sum();
    if ks.iter().all(|&k| k == ks[0]) {
        t.identity(h * total_k as f64, summed);
    } else {
        // per-anchor weights 1/k_i make the scaled form inexact; check the weighted sum instead
        let weighted: f64 = terms.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).sum();
        t.identity(h * n as f64, weighted);
        t.note("unequal positive counts: checked n·H against Σ_i (1/k_i) Σ_j ℓ_ij");
    }
    Ok(t.finish())
}

pub fn infonce_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let reports = (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, TheoremId::Infonce, k);
            let tau = uniform(&mut rng, 0.1, 1.0);
            match k {
                // one positive pair among orthogonal vectors: log-uniform value
                0 => {
                    let f = Array2::eye(3);
                    let pairs = PairSet::new(3, vec![vec![1], vec![2], vec![0]], None)?;
                    let r = verify_infonce(f.view(), &pairs, tau)?;
                    let h = icon_cross_entropy(&pair_indicator(&pairs)?, &cosine_gaussian_kernel(f.view(), tau)?)?;
                    let mut t = Tally::new(TheoremId::Infonce, IDENTITY_TOL);
                    t.instance();
                    t.identity(h, 2f64.ln());
                    Ok(TheoremReport::merge(vec![r, t.finish()]).expect("nonempty"))
                }
                // two positives per anchor at N = 4
                1 => {
                    let f = normal(&mut rng, 4, 3, 1.0);
                    let pairs = PairSet::new(4, vec![vec![1, 2], vec![2, 3], vec![3, 0], vec![0, 1]], None)?;
                    verify_infonce(f.view(), &pairs, tau)
                }
                _ => {
                    let n = 2 * (2 + (k * 5) % 14);
                    let f = normal(&mut rng, n, 4, 1.0);
                    let pairs = if k % 3 == 0 {
                        // two views per sample plus one extra cross pair: two positives each
                        let mut pos = vec![Vec::new(); n];
                        for i in 0..n {
                            pos[i].push(i ^ 1);
                            pos[i].push((i + 2) % n);
                        }
                        PairSet::new(n, pos, None)?
                    } else {
                        PairSet::from_pairs(n, &(0..n / 2).map(|i| (2 * i, 2 * i + 1)).collect::<Vec<_>>(), None)?
                    };
                    verify_infonce(f.view(), &pairs, tau)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

/// Pair-indicator supervision with the Cauchy kernel against the direct
/// t-SimCLR loss `−log (1+d_ij)^{-1} / Σ_{k≠i} (1+d_ik)^{-1}`.
pub fn verify_tsimclr(features: ArrayView2<f64>, pairs: &PairSet) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Tsimclr, IDENTITY_TOL);
    t.instance();
    let n = features.nrows();
    let p = pair_indicator(pairs)?;
    let q = student_t_kernel(features, 1.0)?;
    let lib = icon_cross_entropy(&p, &q)?;
    let mut direct = 0.0;
    for i in 0..n {
        let scores: Vec<f64> = (0..n)
            .map(|k| {
                let d: f64 = features.row(i).iter().zip(features.row(k)).map(|(a, b)| (a - b) * (a - b)).sum();
                -(1.0 + d).ln()
            })
            .collect();
        let pos = pairs.positives(i);
        direct += pos.iter().map(|&j| neg_log_softmax(&scores, j, (0..n).filter(|&k| k != i))).sum::<f64>()
            / pos.len() as f64;
    }
    t.identity(lib, direct / n as f64);
    Ok(t.finish())
}

pub(super) fn tsimclr_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let reports = (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, TheoremId::Tsimclr, k);
            let n = 2 * (1 + (k * 7) % 15);
            let f = normal(&mut rng, n, 3, 1.0);
            let pairs = PairSet::from_pairs(n, &(0..n / 2).map(|i| (2 * i, 2 * i + 1)).collect::<Vec<_>>(), None)?;
            verify_tsimclr(f.view(), &pairs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

/// Same-label supervision with a cosine kernel against the direct SupCon
/// loss (positives averaged outside the log).
pub fn verify_supcon(features: ArrayView2<f64>, labels: &[i64], tau: f64) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Supcon, IDENTITY_TOL);
    t.instance();
    let n = features.nrows();
    let p = label_uniform(labels)?;
    let q = cosine_gaussian_kernel(features, tau)?;
    let lib = icon_cross_entropy(&p, &q)?;
    let positives: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect())
        .collect();
    t.identity(lib, direct_cosine_ce(features, &positives, tau));
    Ok(t.finish())
}

pub(super) fn supcon_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let reports = (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, TheoremId::Supcon, k);
            let classes = 2 + k % 4;
            let n = classes * (2 + k % 5);
            let labels: Vec<i64> = (0..n).map(|i| (i % classes) as i64).collect();
            let f = normal(&mut rng, n, 5, 1.0);
            verify_supcon(f.view(), &labels, uniform(&mut rng, 0.05, 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

/// k-nearest-neighbor supervision from the inputs with a cosine kernel on
/// the features, against neighbors found by a direct scan.
pub fn verify_lgsimclr(points: ArrayView2<f64>, features: ArrayView2<f64>, k: usize, tau: f64) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Lgsimclr, IDENTITY_TOL);
    t.instance();
    let n = points.nrows();
    let p = knn_uniform(points, k, Metric::Euclidean)?;
    let q = cosine_gaussian_kernel(features, tau)?;
    let lib = icon_cross_entropy(&p, &q)?;
    let positives: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut dist: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d: f64 = points.row(i).iter().zip(points.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d, j)
                })
                .collect();
            dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            dist.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect();
    t.identity(lib, direct_cosine_ce(features, &positives, tau));
    Ok(t.finish())
}

pub(super) fn lgsimclr_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let reports = (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, TheoremId::Lgsimclr, k);
            let n = 6 + (k * 5) % 25;
            let x = normal(&mut rng, n, 3, 1.0);
            let f = normal(&mut rng, n, 4, 1.0);
            verify_lgsimclr(x.view(), f.view(), 1 + k % 4, uniform(&mut rng, 0.1, 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

/// Cosine neighbors of fixed embeddings `g` supervise a cosine kernel on
/// learned features `f`: the loss is finite, its analytic gradient passes a
/// finite-difference check in both directions, and `f = g` gives zero.
pub fn verify_xsample(targets: ArrayView2<f64>, features: ArrayView2<f64>, tau: f64) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Xsample, GRADIENT_TOL);
    t.instance();
    let p = cosine_gaussian_kernel(targets, tau)?;
    let kernel = LearnedKernel::new(Kernel::CosineGaussian { tau });
    let template = ParamSpace::EmbeddingTable(features.to_owned());
    for direction in [Direction::Forward, Direction::Reverse] {
        let obj = IconObjective::new(p.clone(), kernel.clone(), direction);
        let value = obj.value(&template)?;
        t.require(value.is_finite() && value >= -1e-12, format!("{direction:?} loss {value}"));
        let check = finite_diff_check(
            |x| {
                let params = template.with_flat(x)?;
                let (v, g) = obj.value_and_grad(&params)?;
                Ok((v, g.to_flat()))
            },
            &template.to_flat(),
            1e-5,
            GRADIENT_TOL,
        )?;
        t.gap(check.max_rel_error);
        let at_target = obj.value(&ParamSpace::EmbeddingTable(targets.to_owned()))?;
        t.require(at_target.abs() <= 1e-12, format!("{direction:?} loss at f = g is {at_target}"));
    }
    Ok(t.finish())
}

pub(super) fn xsample_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let reports = (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, TheoremId::Xsample, k);
            let n = 4 + (k * 3) % 9;
            let g = normal(&mut rng, n, 3, 1.0);
            let f = normal(&mut rng, n, 3, 1.0);
            verify_xsample(g.view(), f.view(), uniform(&mut rng, 0.3, 1.0))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

/// Cross-modal supervision with the cross-modal cosine kernel: rows carry no
/// same-modality mass and the loss equals the directly coded CLIP/CMC loss.
pub fn verify_cmc(features: ArrayView2<f64>, pairs: &PairSet, tau: f64) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Cmc, IDENTITY_TOL);
    t.instance();
    let n = features.nrows();
    let modality = pairs
        .modality()
        .ok_or_else(|| crate::error::invalid("modality", "cross-modal pairs need a modality partition"))?
        .to_vec();
    let p = cross_modal_indicator(pairs)?;
    let q = cross_modal_cosine_kernel(features, &modality, tau)?;
    let mut leaked = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if modality[i] == modality[j] {
                leaked = leaked.max(q.get(i, j));
            }
        }
    }
    t.require(leaked == 0.0, format!("same-modality mass {leaked}"));
    let lib = icon_cross_entropy(&p, &q)?;
    let u = unit(features);
    let mut direct = 0.0;
    for i in 0..n {
        let scores: Vec<f64> = (0..n).map(|k| u.row(i).dot(&u.row(k)) / tau).collect();
        let pos = pairs.positives(i);
        direct += pos
            .iter()
            .map(|&j| neg_log_softmax(&scores, j, (0..n).filter(|&k| modality[k] != modality[i])))
            .sum::<f64>()
            / pos.len() as f64;
    }
    t.identity(lib, direct / n as f64);
    Ok(t.finish())
}

pub(super) fn cmc_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let reports = (0..count)
        .map(|k| {
            let mut rng = instance_rng(seed, TheoremId::Cmc, k);
            // image i pairs with caption n/2 + i
            let half = 1 + (k * 3) % 12;
            let n = 2 * half;
            let modality: Vec<u8> = (0..n).map(|i| u8::from(i >= half)).collect();
            let pairs = PairSet::from_pairs(n, &(0..half).map(|i| (i, half + i)).collect::<Vec<_>>(), Some(modality))?;
            let f = normal(&mut rng, n, 4, 1.0);
            let r = verify_cmc(f.view(), &pairs, uniform(&mut rng, 0.1, 1.0))?;
            if half == 1 {
                // one sample per modality: the only candidate is the positive
                let p = cross_modal_indicator(&pairs)?;
                let q = cross_modal_cosine_kernel(f.view(), pairs.modality().expect("set"), 0.5)?;
                let mut t = Tally::new(TheoremId::Cmc, IDENTITY_TOL);
                t.instance();
                t.identity(icon_loss(&p, &q, Direction::Forward)?.total, 0.0);
                return Ok(TheoremReport::merge(vec![r, t.finish()]).expect("nonempty"));
            }
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

/// Runs the X-Sample and CMC checks on one set of paired embeddings: the
/// first half of the rows is one modality, the second half the other.
pub fn verify_xsample_and_cmc(
    targets: ArrayView2<f64>,
    features: ArrayView2<f64>,
    tau: f64,
) -> Result<(TheoremReport, TheoremReport)> {
    let n = features.nrows();
    let half = n / 2;
    let modality: Vec<u8> = (0..n).map(|i| u8::from(i >= half)).collect();
    let pairs = PairSet::from_pairs(n, &(0..half).map(|i| (i, half + i)).collect::<Vec<_>>(), Some(modality))?;
    Ok((verify_xsample(targets, features, tau)?, verify_cmc(features, &pairs, tau)?))
}
