use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ConditionalDistribution;
use crate::error::{Error, Result};

/// Weighted adjacency with cached degrees `d_i = Σ_j w_ij` (row sums).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborGraph {
    n_nodes: usize,
    edges: Vec<(usize, usize, f64)>,
    degrees: Vec<f64>,
    self_loops: bool,
}

impl NeighborGraph {
    /// Directed edges `(i, j, w)`. Duplicate edges accumulate.
    pub fn new(n_nodes: usize, edges: Vec<(usize, usize, f64)>, self_loops: bool) -> Result<Self> {
        let mut degrees = vec![0.0; n_nodes];
        for &(i, j, w) in &edges {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::Shape(format!("edge ({i}, {j}) out of range for {n_nodes} nodes")));
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "weight",
                    reason: format!("edge ({i}, {j}) has weight {w}"),
                });
            }
            if i == j && !self_loops {
                return Err(Error::Shape(format!("self-loop at node {i}")));
            }
            degrees[i] += w;
        }
        Ok(Self {
            n_nodes,
            edges,
            degrees,
            self_loops,
        })
    }

    /// Undirected graph: every `(i, j, w)` is stored in both directions.
    pub fn undirected(n_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mirrored = edges
            .iter()
            .flat_map(|&(i, j, w)| [(i, j, w), (j, i, w)])
            .collect();
        Self::new(n_nodes, mirrored, false)
    }

    /// Graph whose weights are the entries of a square nonnegative matrix.
    pub fn from_dense(w: &Array2<f64>) -> Result<Self> {
        if w.nrows() != w.ncols() {
            return Err(Error::Shape("adjacency must be square".into()));
        }
        let n = w.nrows();
        let self_loops = (0..n).any(|i| w[[i, i]] != 0.0);
        let edges = w
            .indexed_iter()
            .filter(|(_, &v)| v != 0.0)
            .map(|((i, j), &v)| (i, j, v))
            .collect();
        Self::new(n, edges, self_loops)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn has_self_loops(&self) -> bool {
        self.self_loops
    }

    pub fn weights(&self) -> Array2<f64> {
        let mut w = Array2::zeros((self.n_nodes, self.n_nodes));
        for &(i, j, v) in &self.edges {
            w[[i, j]] += v;
        }
        w
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.edges.iter().filter(|e| e.0 == i && e.2 > 0.0).count()
    }

    /// Random-walk transition matrix `w_ij / d_i`.
    pub fn transition(&self) -> Result<ConditionalDistribution> {
        if let Some(i) = self.degrees.iter().position(|&d| !(d > 0.0)) {
            return Err(Error::ZeroDegree(i));
        }
        ConditionalDistribution::from_weights(self.weights(), !self.self_loops)
    }

    /// Connected components of the undirected skeleton, as a label per node.
    pub fn components(&self) -> Vec<usize> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(i, j, w) in &self.edges {
            if w > 0.0 {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let mut label = vec![usize::MAX; self.n_nodes];
        let mut next = 0;
        for s in 0..self.n_nodes {
            if label[s] != usize::MAX {
                continue;
            }
            let mut stack = vec![s];
            label[s] = next;
            while let Some(u) = stack.pop() {
                for &v in &adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        stack.push(v);
                    }
                }
            }
            next += 1;
        }
        label
    }
}
