//! Supervised correspondences: classification cross-entropy, harmonic loss
//! and masked-language modeling as bipartite point → class problems.

use std::collections::HashMap;

use ndarray::{Array1, Array2, ArrayView2};

use super::{instance_rng, normal, uniform, Tally, TheoremId, TheoremReport};
use crate::distributions::{cooccurrence_counts, window_counts, ConditionalDistribution};
use crate::error::{Error, Result};
use crate::kernels::{harmonic_kernel, prototype_softmax_kernel};
use crate::loss::icon_cross_entropy;

const IDENTITY_TOL: f64 = 1e-10;

fn one_hot_rows(labels: &[usize], classes: usize) -> Result<ConditionalDistribution> {
    let mut p = Array2::zeros((labels.len(), classes));
    for (i, &c) in labels.iter().enumerate() {
        if c >= classes {
            return Err(Error::Shape(format!("label {c} with {classes} prototypes")));
        }
        p[[i, c]] = 1.0;
    }
    ConditionalDistribution::new(p, false)
}

fn log_softmax_at(scores: &[f64], j: usize) -> f64 {
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    scores[j] - m - scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
}

/// One-hot label rows against the prototype softmax equal the mean
/// categorical cross-entropy of the logits `f_i · φ_c`.
pub fn verify_cross_entropy(features: ArrayView2<f64>, labels: &[usize], prototypes: ArrayView2<f64>) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::CrossEntropy, IDENTITY_TOL);
    t.instance();
    let p = one_hot_rows(labels, prototypes.nrows())?;
    let q = prototype_softmax_kernel(features, prototypes)?;
    let lib = icon_cross_entropy(&p, &q)?;
    let mut direct = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let logits: Vec<f64> = prototypes.rows().into_iter().map(|w| features.row(i).dot(&w)).collect();
        direct -= log_softmax_at(&logits, y);
    }
    t.identity(lib, direct / labels.len() as f64);
    Ok(t.finish())
}

/// The harmonic kernel reproduces `d_ic^{-n} / Σ_k d_ik^{-n}` at `σ = 0`
/// and `((2n−1)σ² + d_ic)^{-n}` normalized at `σ > 0`, and its
/// cross-entropy with one-hot labels is the harmonic loss.
pub fn verify_harmonic(
    features: ArrayView2<f64>,
    labels: &[usize],
    prototypes: ArrayView2<f64>,
    degree: u32,
    sigma: f64,
) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Harmonic, IDENTITY_TOL);
    t.instance();
    let q = harmonic_kernel(features, prototypes, degree, sigma)?;
    let offset = (2.0 * f64::from(degree) - 1.0) * sigma * sigma;
    let mut direct_loss = 0.0;
    for i in 0..features.nrows() {
        let w: Vec<f64> = prototypes
            .rows()
            .into_iter()
            .map(|c| {
                let d: f64 = features.row(i).iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                (offset + d).powi(-(degree as i32))
            })
            .collect();
        let total: f64 = w.iter().sum();
        for (c, wc) in w.iter().enumerate() {
            t.identity(q.get(i, c), wc / total);
        }
        direct_loss -= (w[labels[i]] / total).ln();
    }
    let p = one_hot_rows(labels, prototypes.nrows())?;
    t.identity(icon_cross_entropy(&p, &q)?, direct_loss / features.nrows() as f64);
    Ok(t.finish())
}

/// Cross-entropy and harmonic checks on one labeled instance.
pub fn verify_supervised(features: ArrayView2<f64>, labels: &[usize], prototypes: ArrayView2<f64>) -> Result<Vec<TheoremReport>> {
    Ok(vec![
        verify_cross_entropy(features, labels, prototypes)?,
        verify_harmonic(features, labels, prototypes, 2, 0.0)?,
    ])
}

/// Feature of a context: a position-weighted sum of token embeddings.
fn context_feature(ctx: &[usize], token_embed: ArrayView2<f64>) -> Array1<f64> {
    let mut f = Array1::zeros(token_embed.ncols());
    for (k, &tok) in ctx.iter().enumerate() {
        f.scaled_add(1.0 / (k + 1) as f64, &token_embed.row(tok));
    }
    f
}

/// Context → next-token count table with a prototype softmax over the
/// vocabulary equals the masked-token negative log-likelihood, averaged over
/// occurrences within each context and then over distinct contexts.
pub fn verify_mlm(
    tokens: &[usize],
    window: usize,
    token_embed: ArrayView2<f64>,
    prototypes: ArrayView2<f64>,
) -> Result<TheoremReport> {
    let mut t = Tally::new(TheoremId::Mlm, IDENTITY_TOL);
    t.instance();
    let vocab = prototypes.nrows();
    let (contexts, counts) = window_counts(tokens, window, vocab);
    let p = cooccurrence_counts(counts.view())?;
    let mut features = Array2::zeros((contexts.len(), token_embed.ncols()));
    for (i, ctx) in contexts.iter().enumerate() {
        features.row_mut(i).assign(&context_feature(ctx, token_embed));
    }
    let q = prototype_softmax_kernel(features.view(), prototypes)?;
    let lib = icon_cross_entropy(&p, &q)?;

    // corpus scan
    let mut per_context: HashMap<&[usize], (f64, usize)> = HashMap::new();
    for pos in window..tokens.len() {
        let ctx = &tokens[pos - window..pos];
        let f = context_feature(ctx, token_embed);
        let logits: Vec<f64> = prototypes.rows().into_iter().map(|w| f.dot(&w)).collect();
        let e = per_context.entry(ctx).or_insert((0.0, 0));
        e.0 -= log_softmax_at(&logits, tokens[pos]);
        e.1 += 1;
    }
    let direct = per_context.values().map(|(s, c)| s / *c as f64).sum::<f64>() / per_context.len() as f64;
    t.identity(lib, direct);
    t.metric("contexts", per_context.len() as f64);
    Ok(t.finish())
}

fn labeled_instance(seed: u64, id: TheoremId, k: usize) -> (Array2<f64>, Vec<usize>, Array2<f64>) {
    let mut rng = instance_rng(seed, id, k);
    let classes = 2 + k % 5;
    let n = 3 + (k * 7) % 28;
    let protos = normal(&mut rng, classes, 3, 1.0);
    let labels: Vec<usize> = (0..n).map(|i| (i * 7 + k) % classes).collect();
    // features near their prototype, so the argmax usually matches
    let noise = normal(&mut rng, n, 3, 0.4);
    let features = Array2::from_shape_fn((n, 3), |(i, d)| protos[[labels[i], d]] + noise[[i, d]]);
    (features, labels, protos)
}

pub(super) fn cross_entropy_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let mut reports = Vec::with_capacity(count);
    for k in 0..count {
        if k == 0 {
            // identical prototypes: every row is uniform over the classes
            let mut rng = instance_rng(seed, TheoremId::CrossEntropy, k);
            let f = normal(&mut rng, 5, 2, 1.0);
            let protos = Array2::from_elem((4, 2), 0.3);
            let labels = [0, 1, 2, 3, 0];
            let mut r = verify_cross_entropy(f.view(), &labels, protos.view())?;
            let q = prototype_softmax_kernel(f.view(), protos.view())?;
            let h = icon_cross_entropy(&one_hot_rows(&labels, 4)?, &q)?;
            let mut t = Tally::new(TheoremId::CrossEntropy, IDENTITY_TOL);
            t.instance();
            t.identity(h, 4f64.ln());
            r = TheoremReport::merge(vec![r, t.finish()]).expect("nonempty");
            reports.push(r);
            continue;
        }
        let (f, labels, protos) = labeled_instance(seed, TheoremId::CrossEntropy, k);
        reports.push(verify_cross_entropy(f.view(), &labels, protos.view())?);
    }
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

pub(super) fn harmonic_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let mut reports = Vec::with_capacity(count);
    for k in 0..count {
        let (f, labels, protos) = labeled_instance(seed, TheoremId::Harmonic, k);
        let degree = 1 + (k % 4) as u32;
        let sigma = if k % 2 == 0 { 0.0 } else { 0.1 * (k % 5) as f64 };
        reports.push(verify_harmonic(f.view(), &labels, protos.view(), degree, sigma)?);
    }
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

pub(super) fn mlm_suite(seed: u64, count: usize) -> Result<TheoremReport> {
    let mut reports = Vec::with_capacity(count);
    for k in 0..count {
        let mut rng = instance_rng(seed, TheoremId::Mlm, k);
        let vocab = 3 + k % 5;
        let len = 20 + (k * 11) % 60;
        let tokens: Vec<usize> = if k == 0 {
            // toy corpus "a b a b a c"
            vec![0, 1, 0, 1, 0, 2]
        } else {
            (0..len).map(|_| (uniform(&mut rng, 0.0, vocab as f64) as usize).min(vocab - 1)).collect()
        };
        let embed = normal(&mut rng, vocab, 4, 1.0);
        let protos = normal(&mut rng, vocab, 4, 1.0);
        reports.push(verify_mlm(&tokens, 1 + k % 3, embed.view(), protos.view())?);
    }
    Ok(TheoremReport::merge(reports).expect("count > 0"))
}

/// Cross-entropy, harmonic and MLM suites.
pub fn supervised_suite(seed: u64, count: usize) -> Result<Vec<TheoremReport>> {
    Ok(vec![
        cross_entropy_suite(seed, count)?,
        harmonic_suite(seed, count)?,
        mlm_suite(seed, count)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn toy_corpus_by_hand() {
        // contexts of width 1 in "a b a b a c": a→b twice, a→c once, b→a twice
        let (contexts, counts) = window_counts(&[0, 1, 0, 1, 0, 2], 1, 3);
        assert_eq!(contexts, vec![vec![0], vec![1]]);
        assert_eq!(counts, array![[0, 2, 1], [2, 0, 0]]);
        let embed = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let protos = array![[0.5, 0.0], [0.0, 0.5], [0.2, 0.2]];
        let r = verify_mlm(&[0, 1, 0, 1, 0, 2], 1, embed.view(), protos.view()).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.metrics["contexts"], 2.0);
    }

    #[test]
    fn harmonic_on_a_prototype_is_one_hot() {
        let protos = array![[0.0, 0.0], [1.0, 0.0]];
        let f = array![[1.0, 0.0]];
        let q = harmonic_kernel(f.view(), protos.view(), 2, 0.0).unwrap();
        assert_eq!(q.row(0).to_vec(), vec![0.0, 1.0]);
    }

    #[test]
    fn suites_pass() {
        for r in supervised_suite(4, 10).unwrap() {
            assert!(r.passed, "{r:?}");
        }
        let (f, labels, protos) = labeled_instance(2, TheoremId::CrossEntropy, 3);
        for r in verify_supervised(f.view(), &labels, protos.view()).unwrap() {
            assert!(r.passed, "{r:?}");
        }
    }
}
