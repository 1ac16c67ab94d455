//! Textbook implementations and brute-force oracles, written independently
//! of the kernel and loss code they are used to check.

mod graph;
pub mod kmeans;
mod partitions;

pub use graph::{ncut_objective, normalized_laplacian, spectral_embedding, symmetric_eigen, SpectralEmbedding};
pub use kmeans::{canonical, hard_objective, kmeans_objective, lloyd_kmeans, one_hot, KMeansResult};
pub use partitions::{enumerate_partitions, stirling2, Partitions, MAX_ENUMERATION};

use ndarray::{Array2, ArrayView2, Axis};

use crate::distributions::PairSet;
use crate::error::{Error, Result};

/// Per anchor, `−log exp(s_ij/τ) / Σ_{k≠i} exp(s_ik/τ)` for each positive
/// `j`, with `s` the cosine similarity.
pub fn classical_infonce_terms(features: ArrayView2<f64>, pairs: &PairSet, tau: f64) -> Result<Vec<Vec<f64>>> {
    let n = features.nrows();
    if pairs.len() != n {
        return Err(Error::Shape(format!("{} anchors for {n} features", pairs.len())));
    }
    if !(tau > 0.0) {
        return Err(crate::error::invalid("tau", format!("{tau} must be positive")));
    }
    let mut u = features.to_owned();
    for (i, mut row) in u.rows_mut().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector(i));
        }
        row.mapv_inplace(|x| x / norm);
    }
    let sims = u.dot(&u.t());
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let pos = pairs.positives(i);
        if pos.is_empty() {
            return Err(Error::EmptyAnchor(i));
        }
        let max = (0..n).filter(|&k| k != i).map(|k| sims[[i, k]] / tau).fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + (0..n).filter(|&k| k != i).map(|k| (sims[[i, k]] / tau - max).exp()).sum::<f64>().ln();
        out.push(pos.iter().map(|&j| log_z - sims[[i, j]] / tau).collect());
    }
    Ok(out)
}

/// InfoNCE averaged over each anchor's positives, then over anchors.
pub fn classical_infonce(features: ArrayView2<f64>, pairs: &PairSet, tau: f64) -> Result<f64> {
    let terms = classical_infonce_terms(features, pairs, tau)?;
    let n = terms.len() as f64;
    Ok(terms.iter().map(|t| t.iter().sum::<f64>() / t.len() as f64).sum::<f64>() / n)
}

/// Mean hinge `max(d⁺ − d⁻, 0)`.
pub fn classical_triplet(d_pos: &[f64], d_neg: &[f64]) -> Result<f64> {
    if d_pos.len() != d_neg.len() || d_pos.is_empty() {
        return Err(Error::Shape(format!("{} positive and {} negative distances", d_pos.len(), d_neg.len())));
    }
    if d_pos.iter().chain(d_neg).any(|&d| !(d >= 0.0)) {
        return Err(crate::error::invalid("distances", "must be nonnegative"));
    }
    Ok(d_pos.iter().zip(d_neg).map(|(p, n)| (p - n).max(0.0)).sum::<f64>() / d_pos.len() as f64)
}

#[derive(Debug, Clone)]
pub struct PcaResult {
    /// `d × m` orthonormal basis, leading component first.
    pub basis: Array2<f64>,
    /// Covariance eigenvalues of the returned components.
    pub variances: Vec<f64>,
}

/// Top-`m` eigenvectors of the (1/n) covariance.
pub fn pca_subspace(points: ArrayView2<f64>, m: usize) -> Result<PcaResult> {
    let (n, d) = points.dim();
    if m == 0 || m > d || n == 0 {
        return Err(crate::error::invalid("m", format!("{m} components in dimension {d}")));
    }
    let mean = points.mean_axis(Axis(0)).expect("n > 0");
    let centered = &points - &mean;
    let cov = centered.t().dot(&centered) / n as f64;
    let (values, vectors) = symmetric_eigen(&cov);
    let basis = Array2::from_shape_fn((d, m), |(i, c)| vectors[[i, d - 1 - c]]);
    let variances = (0..m).map(|c| values[d - 1 - c]).collect();
    Ok(PcaResult { basis, variances })
}

/// Cosines of the principal angles between the column spans of two
/// orthonormal bases, largest first.
pub fn principal_angle_cosines(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Vec<f64> {
    let m = a.t().dot(&b);
    let dm = nalgebra::DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[[i, j]]);
    let mut s: Vec<f64> = dm.singular_values().iter().map(|v| v.min(1.0)).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Orthonormal basis of the column span (modified Gram–Schmidt).
pub fn orthonormalize(a: ArrayView2<f64>) -> Array2<f64> {
    let mut q = a.to_owned();
    for c in 0..q.ncols() {
        for prev in 0..c {
            let proj = q.column(prev).dot(&q.column(c));
            let p = q.column(prev).to_owned();
            q.column_mut(c).scaled_add(-proj, &p);
        }
        let norm = q.column(c).dot(&q.column(c)).sqrt();
        if norm > 0.0 {
            q.column_mut(c).mapv_inplace(|x| x / norm);
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn infonce_examples() {
        // all similarities equal: 3 mutually orthogonal vectors, one positive each
        let e = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let pairs = PairSet::from_pairs(3, &[(0, 1), (1, 2), (2, 0)], None).unwrap();
        let l = classical_infonce(e.view(), &pairs, 0.5).unwrap();
        assert!((l - 2f64.ln()).abs() < 1e-15);

        let e = array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let pairs = PairSet::new(3, vec![vec![1], vec![0], vec![0]], None).unwrap();
        let only_anchor0 = {
            let sims = [1.0f64, 0.0];
            -(sims[0].exp() / (sims[0].exp() + sims[1].exp())).ln()
        };
        assert!((only_anchor0 - 0.3133).abs() < 1e-4);
        // anchor 0 contributes −log σ(1)
        let l = classical_infonce(e.view(), &pairs, 1.0).unwrap();
        let anchor1 = only_anchor0;
        let anchor2 = 2f64.ln();
        assert!((l - (only_anchor0 + anchor1 + anchor2) / 3.0).abs() < 1e-12);

        let lonely = PairSet::new(3, vec![vec![1], vec![], vec![0]], None).unwrap();
        assert!(matches!(classical_infonce(e.view(), &lonely, 1.0), Err(Error::EmptyAnchor(1))));
    }

    #[test]
    fn triplet_examples() {
        assert_eq!(classical_triplet(&[1.5], &[1.5]).unwrap(), 0.0);
        assert_eq!(classical_triplet(&[2.0], &[1.0]).unwrap(), 1.0);
        assert!(classical_triplet(&[-1.0], &[1.0]).is_err());
    }

    #[test]
    fn pca_on_a_line() {
        let dir = array![1.0, 2.0, -2.0] / 3.0;
        let x = Array2::from_shape_fn((20, 3), |(i, k)| (i as f64 - 7.0) * 0.3 * dir[k]);
        let p = pca_subspace(x.view(), 1).unwrap();
        let dot = p.basis.column(0).dot(&dir);
        assert!((dot.abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn pca_projection_variance_is_the_eigensum() {
        let mut rng = crate::optim::restart_rng(3, 0);
        let scales = [5.0, 3.0, 1.0, 0.5, 0.1];
        let x = Array2::from_shape_fn((50, 5), |(_, k)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            scales[k] * z + rng.random::<f64>()
        });
        let p = pca_subspace(x.view(), 2).unwrap();
        let mean = x.mean_axis(Axis(0)).unwrap();
        let proj = (&x - &mean).dot(&p.basis);
        let var = proj.iter().map(|v| v * v).sum::<f64>() / 50.0;
        assert!((var - p.variances.iter().sum::<f64>()).abs() < 1e-9);
        let gram = p.basis.t().dot(&p.basis);
        assert!((gram[[0, 1]]).abs() < 1e-12 && (gram[[0, 0]] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn principal_angles_of_equal_spans() {
        let a = orthonormalize(array![[1.0, 1.0], [0.0, 1.0], [0.0, 0.0]].view());
        let b = array![[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]];
        let cos = principal_angle_cosines(a.view(), b.view());
        assert!(cos.iter().all(|c| (c - 1.0).abs() < 1e-12));
        let c = array![[0.0], [0.0], [1.0]];
        assert!(principal_angle_cosines(a.view(), c.view())[0].abs() < 1e-12);
    }
}
