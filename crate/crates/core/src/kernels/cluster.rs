//! Cluster kernels: `q(j|i) = Σ_c φ_ic φ_jc w_j / Σ_k φ_kc w_k`, the
//! probability that `j` is drawn from the cluster of `i` with weights `w`
//! (unit weights for the plain kernel, node degrees for normalized cuts).
//! The sum over `k` includes `i`, so these kernels keep the diagonal.

use ndarray::{Array2, ArrayView2};

use crate::distributions::ConditionalDistribution;
use crate::error::{Error, Result};
use crate::math::softmax_rows;

/// Row softmax of cluster logits: soft assignments on the simplex.
pub fn simplex_params(logits: ArrayView2<f64>) -> Array2<f64> {
    softmax_rows(logits)
}

pub(super) fn weighted_forward(phi: ArrayView2<f64>, weights: Option<&[f64]>) -> Result<ConditionalDistribution> {
    let (n, m) = phi.dim();
    if n == 0 || m == 0 {
        return Err(Error::Shape(format!("assignments must be nonempty, got {n}x{m}")));
    }
    let ones;
    let w = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::Shape(format!("{} degrees for {n} points", w.len())));
            }
            if let Some(i) = w.iter().position(|&d| !(d > 0.0 && d.is_finite())) {
                return Err(Error::ZeroDegree(i));
            }
            w
        }
        None => {
            ones = vec![1.0; n];
            &ones[..]
        }
    };
    let mass = cluster_mass(phi, w);
    let mut q = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut v = 0.0;
            for c in 0..m {
                if mass[c] > 0.0 {
                    v += phi[[i, c]] * phi[[j, c]] * w[j] / mass[c];
                }
            }
            q[[i, j]] = v;
        }
    }
    // soft assignments are only simplex-valued up to rounding
    ConditionalDistribution::from_weights(q, false)
}

fn cluster_mass(phi: ArrayView2<f64>, w: &[f64]) -> Vec<f64> {
    let (n, m) = phi.dim();
    (0..m).map(|c| (0..n).map(|k| phi[[k, c]] * w[k]).sum()).collect()
}

/// `∂L/∂φ` given `∂L/∂q`. The row renormalization in the forward pass is
/// the identity on the simplex and is ignored here.
pub(super) fn weighted_backward(phi: ArrayView2<f64>, weights: Option<&[f64]>, g: ArrayView2<f64>) -> Array2<f64> {
    let (n, m) = phi.dim();
    let w: Vec<f64> = weights.map(<[f64]>::to_vec).unwrap_or_else(|| vec![1.0; n]);
    let mass = cluster_mass(phi, &w);
    // b[j][c] = φ_jc w_j
    let mut b = phi.to_owned();
    for j in 0..n {
        for c in 0..m {
            b[[j, c]] *= w[j];
        }
    }
    let gb = g.dot(&b); // Σ_j g_aj φ_jc w_j
    let gt_phi = g.t().dot(&phi); // Σ_i g_ia φ_ic
    let mut grad = Array2::zeros((n, m));
    for c in 0..m {
        if mass[c] <= 0.0 {
            continue;
        }
        let quad: f64 = (0..n).map(|i| phi[[i, c]] * gb[[i, c]]).sum();
        for a in 0..n {
            grad[[a, c]] = gb[[a, c]] / mass[c] + w[a] * gt_phi[[a, c]] / mass[c]
                - w[a] * quad / (mass[c] * mass[c]);
        }
    }
    grad
}

/// Pulls a gradient on soft assignments back through the row softmax.
pub(super) fn softmax_backward(phi: ArrayView2<f64>, g_phi: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(phi.raw_dim());
    for (i, (p, g)) in phi.rows().into_iter().zip(g_phi.rows()).enumerate() {
        let dot = p.dot(&g);
        for c in 0..p.len() {
            out[[i, c]] = p[c] * (g[c] - dot);
        }
    }
    out
}

/// Cluster kernel on explicit soft (or hard) assignments.
pub fn cluster_kernel_from_assignments(phi: ArrayView2<f64>) -> Result<ConditionalDistribution> {
    weighted_forward(phi, None)
}

/// Cluster kernel on logits; assignments are the row softmax.
pub fn cluster_kernel(logits: ArrayView2<f64>) -> Result<ConditionalDistribution> {
    weighted_forward(simplex_params(logits).view(), None)
}

pub fn degree_cluster_kernel_from_assignments(
    phi: ArrayView2<f64>,
    degrees: &[f64],
) -> Result<ConditionalDistribution> {
    weighted_forward(phi, Some(degrees))
}

/// Degree-weighted cluster kernel on logits.
pub fn degree_cluster_kernel(logits: ArrayView2<f64>, degrees: &[f64]) -> Result<ConditionalDistribution> {
    weighted_forward(simplex_params(logits).view(), Some(degrees))
}
