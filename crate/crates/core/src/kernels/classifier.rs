//! Bipartite point → class kernels over a set of prototypes.

use ndarray::{Array2, ArrayView2};

use crate::distributions::ConditionalDistribution;
use crate::error::{invalid, Error, Result};
use crate::math::{cross_sq_distances, masked_softmax};

fn check_dims(features: ArrayView2<f64>, prototypes: ArrayView2<f64>) -> Result<()> {
    if features.ncols() != prototypes.ncols() {
        return Err(Error::Shape(format!(
            "features have {} columns, prototypes {}",
            features.ncols(),
            prototypes.ncols()
        )));
    }
    if prototypes.nrows() < 2 {
        return Err(Error::Shape(format!("need at least 2 prototypes, got {}", prototypes.nrows())));
    }
    Ok(())
}

fn softmax_of(scores: &Array2<f64>) -> Array2<f64> {
    let (n, c) = scores.dim();
    let mut q = Array2::zeros((n, c));
    let mut out = vec![0.0; c];
    for i in 0..n {
        let row = scores.row(i).to_vec();
        masked_softmax(&row, |_| true, &mut out);
        q.row_mut(i).assign(&ndarray::ArrayView1::from(&out[..]));
    }
    q
}

/// `∂L/∂s` for a row softmax `q = softmax(s)`.
fn softmax_jacobian(q: ArrayView2<f64>, g: ArrayView2<f64>) -> Array2<f64> {
    let mut a = Array2::zeros(q.raw_dim());
    for i in 0..q.nrows() {
        let mean: f64 = q.row(i).dot(&g.row(i));
        for j in 0..q.ncols() {
            a[[i, j]] = q[[i, j]] * (g[[i, j]] - mean);
        }
    }
    a
}

pub(super) fn prototype_forward(features: ArrayView2<f64>, prototypes: ArrayView2<f64>) -> Result<ConditionalDistribution> {
    check_dims(features, prototypes)?;
    let scores = features.dot(&prototypes.t());
    Ok(ConditionalDistribution::from_trusted(softmax_of(&scores), false))
}

pub(super) fn prototype_backward(
    features: ArrayView2<f64>,
    prototypes: ArrayView2<f64>,
    q: ArrayView2<f64>,
    g: ArrayView2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let a = softmax_jacobian(q, g);
    (a.dot(&prototypes), a.t().dot(&features))
}

/// Softmax over classes of `f_i · φ_j`.
pub fn prototype_softmax_kernel(features: ArrayView2<f64>, prototypes: ArrayView2<f64>) -> Result<ConditionalDistribution> {
    prototype_forward(features, prototypes)
}

pub(super) fn harmonic_forward(
    features: ArrayView2<f64>,
    prototypes: ArrayView2<f64>,
    degree: u32,
    sigma: f64,
) -> Result<ConditionalDistribution> {
    check_dims(features, prototypes)?;
    if degree < 1 {
        return Err(invalid("n", "harmonic degree must be at least 1"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(invalid("sigma", format!("{sigma} must be nonnegative")));
    }
    let n = f64::from(degree);
    let offset = (2.0 * n - 1.0) * sigma * sigma;
    let d = cross_sq_distances(features, prototypes);
    let (rows, classes) = d.dim();
    let mut q = Array2::zeros((rows, classes));
    for i in 0..rows {
        let hits: Vec<usize> = (0..classes).filter(|&j| offset + d[[i, j]] == 0.0).collect();
        match hits.len() {
            0 => {
                let scores: Vec<f64> = (0..classes).map(|j| -n * (offset + d[[i, j]]).ln()).collect();
                let mut out = vec![0.0; classes];
                masked_softmax(&scores, |_| true, &mut out);
                q.row_mut(i).assign(&ndarray::ArrayView1::from(&out[..]));
            }
            1 => q[[i, hits[0]]] = 1.0,
            _ => return Err(Error::AmbiguousCoincidence { row: i }),
        }
    }
    Ok(ConditionalDistribution::from_trusted(q, false))
}

/// Gradient of the harmonic kernel. Rows where a feature coincides with a
/// prototype at `σ = 0` are locally constant and contribute nothing.
pub(super) fn harmonic_backward(
    features: ArrayView2<f64>,
    prototypes: ArrayView2<f64>,
    degree: u32,
    sigma: f64,
    q: ArrayView2<f64>,
    g: ArrayView2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let n = f64::from(degree);
    let offset = (2.0 * n - 1.0) * sigma * sigma;
    let d = cross_sq_distances(features, prototypes);
    let a = softmax_jacobian(q, g);
    let mut gf = Array2::zeros(features.raw_dim());
    let mut gp = Array2::zeros(prototypes.raw_dim());
    for i in 0..features.nrows() {
        if (0..prototypes.nrows()).any(|j| offset + d[[i, j]] == 0.0) {
            continue;
        }
        for j in 0..prototypes.nrows() {
            // s_ij = -n ln(offset + d_ij), ∂d/∂f_i = 2 (f_i - φ_j)
            let c = a[[i, j]] * (-n / (offset + d[[i, j]])) * 2.0;
            for k in 0..features.ncols() {
                let diff = features[[i, k]] - prototypes[[j, k]];
                gf[[i, k]] += c * diff;
                gp[[j, k]] -= c * diff;
            }
        }
    }
    (gf, gp)
}

/// `q(j|i) ∝ ((2n-1)σ² + ‖f_i - φ_j‖²)^{-n}` over classes. At `σ = 0` a
/// feature sitting exactly on one prototype puts all its mass there.
pub fn harmonic_kernel(
    features: ArrayView2<f64>,
    prototypes: ArrayView2<f64>,
    degree: u32,
    sigma: f64,
) -> Result<ConditionalDistribution> {
    harmonic_forward(features, prototypes, degree, sigma)
}
