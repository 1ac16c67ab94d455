use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;

use crate::distributions::NeighborGraph;
use crate::error::{invalid, Error, Result};

/// `Σ_c cut(A_c, Ā_c) / vol(A_c)` over the nonempty clusters of `labels`.
/// Directed graphs are symmetrized as `(W + Wᵀ) / 2`.
pub fn ncut_objective(graph: &NeighborGraph, labels: &[usize]) -> Result<f64> {
    let n = graph.n_nodes();
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} nodes", labels.len())));
    }
    let w = symmetric_weights(graph);
    let m = labels.iter().max().map_or(0, |&l| l + 1);
    let mut cut = vec![0.0; m];
    let mut vol = vec![0.0; m];
    let mut used = vec![false; m];
    for i in 0..n {
        used[labels[i]] = true;
        for j in 0..n {
            vol[labels[i]] += w[[i, j]];
            if labels[i] != labels[j] {
                cut[labels[i]] += w[[i, j]];
            }
        }
    }
    let mut total = 0.0;
    for c in 0..m {
        if !used[c] {
            continue;
        }
        if !(vol[c] > 0.0) {
            return Err(Error::ZeroVolume(c));
        }
        total += cut[c] / vol[c];
    }
    Ok(total)
}

fn symmetric_weights(graph: &NeighborGraph) -> Array2<f64> {
    let w = graph.weights();
    (&w + &w.t()) / 2.0
}

/// Symmetric normalized Laplacian `I − D^{-1/2} W D^{-1/2}`.
pub fn normalized_laplacian(graph: &NeighborGraph) -> Result<Array2<f64>> {
    let w = symmetric_weights(graph);
    let n = w.nrows();
    let d: Vec<f64> = w.rows().into_iter().map(|r| r.sum()).collect();
    if let Some(i) = d.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::ZeroDegree(i));
    }
    let mut l = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            l[[i, j]] = delta - w[[i, j]] / (d[i] * d[j]).sqrt();
        }
    }
    Ok(l)
}

#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    /// `N × k`, one eigenvector per column, ascending eigenvalue.
    pub vectors: Array2<f64>,
    pub eigenvalues: Vec<f64>,
    /// `max_k ‖L v_k − λ_k v_k‖`.
    pub max_residual: f64,
}

/// Eigenpairs of `m` as `(values ascending, vectors as columns)`.
pub fn symmetric_eigen(m: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = m.nrows();
    let dm = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[[i, j]] + m[[j, i]]));
    let eig = SymmetricEigen::new(dm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors = Array2::from_shape_fn((n, n), |(i, c)| eig.eigenvectors[(i, order[c])]);
    (values, vectors)
}

/// The `k` eigenvectors of the normalized Laplacian with the smallest
/// eigenvalues, optionally with unit-normalized rows.
pub fn spectral_embedding(graph: &NeighborGraph, k: usize, normalize_rows: bool) -> Result<SpectralEmbedding> {
    let n = graph.n_nodes();
    if k == 0 || k >= n {
        return Err(invalid("k", format!("{k} eigenvectors for {n} nodes")));
    }
    let components = graph.components().into_iter().max().map_or(0, |c| c + 1);
    if k < components {
        return Err(Error::Disconnected { components, k });
    }
    let l = normalized_laplacian(graph)?;
    let (values, all) = symmetric_eigen(&l);
    let mut vectors = all.slice(ndarray::s![.., ..k]).to_owned();
    let eigenvalues = values[..k].to_vec();
    let mut max_residual: f64 = 0.0;
    for (c, &lam) in eigenvalues.iter().enumerate() {
        let v = vectors.column(c);
        let r = l.dot(&v) - &v.mapv(|x| lam * x);
        max_residual = max_residual.max(r.dot(&r).sqrt());
    }
    if normalize_rows {
        for mut row in vectors.rows_mut() {
            let norm = row.dot(&row).sqrt();
            if norm > 0.0 {
                row.mapv_inplace(|x| x / norm);
            }
        }
    }
    Ok(SpectralEmbedding {
        vectors,
        eigenvalues,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classic::lloyd_kmeans;
    use crate::classic::kmeans::canonical;

    fn triangles() -> NeighborGraph {
        NeighborGraph::undirected(
            6,
            &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn ncut_examples() {
        let g = triangles();
        assert_eq!(ncut_objective(&g, &[0, 0, 0, 1, 1, 1]).unwrap(), 0.0);
        assert_eq!(ncut_objective(&g, &[0; 6]).unwrap(), 0.0);
        let e = NeighborGraph::undirected(2, &[(0, 1, 2.5)]).unwrap();
        assert_eq!(ncut_objective(&e, &[0, 1]).unwrap(), 2.0);
        let iso = NeighborGraph::undirected(3, &[(0, 1, 1.0)]).unwrap();
        assert!(matches!(ncut_objective(&iso, &[0, 0, 1]), Err(Error::ZeroVolume(1))));
    }

    #[test]
    fn ncut_is_label_invariant() {
        let g = NeighborGraph::undirected(5, &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (3, 4, 1.0), (0, 4, 0.3)]).unwrap();
        let a = ncut_objective(&g, &[0, 0, 1, 1, 2]).unwrap();
        let b = ncut_objective(&g, &[2, 2, 0, 0, 1]).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!((0.0..=3.0).contains(&a));
    }

    #[test]
    fn complete_graph_spectrum() {
        let n = 5;
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j, 1.0))).collect();
        let g = NeighborGraph::undirected(n, &edges).unwrap();
        let s = spectral_embedding(&g, 2, false).unwrap();
        assert!(s.eigenvalues[0].abs() < 1e-12);
        assert!((s.eigenvalues[1] - 1.25).abs() < 1e-12);
        let v = s.vectors.column(0);
        assert!(v.iter().all(|&x| (x.abs() - 1.0 / (n as f64).sqrt()).abs() < 1e-10));
        assert!(s.max_residual <= 1e-8);
    }

    #[test]
    fn path_of_three_closed_form() {
        let g = NeighborGraph::undirected(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let (values, _) = symmetric_eigen(&normalized_laplacian(&g).unwrap());
        for (v, e) in values.iter().zip([0.0, 1.0, 2.0]) {
            assert!((v - e).abs() < 1e-8);
        }
        let s = spectral_embedding(&g, 2, false).unwrap();
        assert!(s.max_residual <= 1e-8);
    }

    #[test]
    fn two_cliques_separate() {
        let mut edges = Vec::new();
        for base in [0, 4] {
            for i in 0..4 {
                for j in i + 1..4 {
                    edges.push((base + i, base + j, 1.0));
                }
            }
        }
        let g = NeighborGraph::undirected(8, &edges).unwrap();
        let s = spectral_embedding(&g, 2, true).unwrap();
        assert!(s.max_residual <= 1e-8);
        let r = lloyd_kmeans(s.vectors.view(), 2, 3, 0).unwrap();
        assert_eq!(canonical(&r.partition), vec![0, 0, 0, 0, 1, 1, 1, 1]);
        assert!(matches!(spectral_embedding(&g, 1, false), Err(Error::Disconnected { components: 2, k: 1 })));
    }
}
