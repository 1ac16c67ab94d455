//! Small dense helpers shared by the builders, kernels and oracles.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

/// Pairwise squared euclidean distances between the rows of `x`.
pub fn sq_distances(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        for j in (i + 1)..n {
            let v = sq_dist(x.row(i), x.row(j));
            d[[i, j]] = v;
            d[[j, i]] = v;
        }
    }
    d
}

/// Squared distances between every row of `a` and every row of `b`.
pub fn cross_sq_distances(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let mut d = Array2::zeros((a.nrows(), b.nrows()));
    for (i, ra) in a.axis_iter(Axis(0)).enumerate() {
        for (j, rb) in b.axis_iter(Axis(0)).enumerate() {
            d[[i, j]] = sq_dist(ra, rb);
        }
    }
    d
}

pub fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Softmax of `logits` restricted to the entries where `mask` is true.
/// Masked-out entries are exactly zero.
pub fn masked_softmax(logits: &[f64], mask: impl Fn(usize) -> bool, out: &mut [f64]) {
    let mut max = f64::NEG_INFINITY;
    for (j, &l) in logits.iter().enumerate() {
        if mask(j) && l > max {
            max = l;
        }
    }
    let mut total = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        *o = if mask(j) { (logits[j] - max).exp() } else { 0.0 };
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Row-wise softmax of a matrix (no masking).
pub fn softmax_rows(logits: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(logits.raw_dim());
    for (i, row) in logits.axis_iter(Axis(0)).enumerate() {
        let l: Vec<f64> = row.to_vec();
        let mut o = vec![0.0; l.len()];
        masked_softmax(&l, |_| true, &mut o);
        for (j, v) in o.into_iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    out
}

/// Shannon entropy in nats with `0 log 0 = 0`.
pub fn entropy(row: impl IntoIterator<Item = f64>) -> f64 {
    row.into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

pub fn all_finite(x: ArrayView2<f64>) -> bool {
    x.iter().all(|v| v.is_finite())
}
