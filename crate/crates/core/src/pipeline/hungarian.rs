//! Clustering accuracy under the best one-to-one cluster → class matching.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{invalid, Error, Result};

/// Largest number of distinct clusters or classes accepted.
pub const MAX_LABELS: usize = 512;

fn dense<T: Ord + Copy>(labels: &[T]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    for &l in labels {
        ids.entry(l).or_insert(0usize);
    }
    for (k, v) in ids.values_mut().enumerate() {
        *v = k;
    }
    (labels.iter().map(|l| ids[l]).collect(), ids.len())
}

/// Counts `[cluster, class]`, labels densified in sorted order.
pub fn confusion_matrix<A: Ord + Copy, B: Ord + Copy>(predicted: &[A], truth: &[B]) -> Result<Array2<i64>> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", predicted.len(), truth.len())));
    }
    if predicted.is_empty() {
        return Err(invalid("labels", "empty input"));
    }
    let (p, np) = dense(predicted);
    let (t, nt) = dense(truth);
    if np > MAX_LABELS || nt > MAX_LABELS {
        return Err(invalid("labels", format!("{np} clusters and {nt} classes exceed {MAX_LABELS}")));
    }
    let mut m = Array2::zeros((np, nt));
    for (&a, &b) in p.iter().zip(&t) {
        m[[a, b]] += 1;
    }
    Ok(m)
}

/// Maximum-weight matching of rows to columns of a (possibly rectangular)
/// nonnegative matrix, padded to square with zeros. Returns the total and,
/// per row, the matched column when it is a real one.
pub fn max_weight_matching(weights: &Array2<i64>) -> (i64, Vec<Option<usize>>) {
    let (rows, cols) = weights.dim();
    let n = rows.max(cols);
    let max = weights.iter().copied().max().unwrap_or(0);
    // minimize (max - w); padded cells cost `max`
    let cost = |i: usize, j: usize| -> i64 {
        if i < rows && j < cols {
            max - weights[[i, j]]
        } else {
            max
        }
    };
    // potentials-based shortest augmenting path, 1-indexed
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![None; rows];
    let mut total = 0;
    for j in 1..=n {
        let i = owner[j];
        if i >= 1 && i <= rows && j <= cols {
            assignment[i - 1] = Some(j - 1);
            total += weights[[i - 1, j - 1]];
        }
    }
    (total, assignment)
}

/// Fraction of points whose cluster maps to their class under the best
/// one-to-one matching.
pub fn hungarian_accuracy<A: Ord + Copy, B: Ord + Copy>(predicted: &[A], truth: &[B]) -> Result<f64> {
    let m = confusion_matrix(predicted, truth)?;
    let (total, _) = max_weight_matching(&m);
    Ok(total as f64 / predicted.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn examples() {
        let t = [0, 0, 1, 1, 2, 2];
        assert_eq!(hungarian_accuracy(&t, &t).unwrap(), 1.0);
        let permuted = [2, 2, 0, 0, 1, 1];
        assert_eq!(hungarian_accuracy(&permuted, &t).unwrap(), 1.0);
        let (total, assignment) = max_weight_matching(&array![[5, 1], [2, 4]]);
        assert_eq!(total, 9);
        assert_eq!(assignment, vec![Some(0), Some(1)]);
        assert!(hungarian_accuracy::<i64, i64>(&[], &[]).is_err());
    }

    #[test]
    fn confusion_example() {
        // [[5,1],[2,4]] as labels
        let mut pred = Vec::new();
        let mut truth = Vec::new();
        for (c, k, count) in [(0, 0, 5), (0, 1, 1), (1, 0, 2), (1, 1, 4)] {
            for _ in 0..count {
                pred.push(c);
                truth.push(k);
            }
        }
        assert_eq!(hungarian_accuracy(&pred, &truth).unwrap(), 0.75);
    }

    #[test]
    fn rectangular_and_constant() {
        let (total, a) = max_weight_matching(&array![[3, 0, 1]]);
        assert_eq!(total, 3);
        assert_eq!(a, vec![Some(0)]);
        let (total, a) = max_weight_matching(&array![[1], [4], [2]]);
        assert_eq!(total, 4);
        assert_eq!(a, vec![None, Some(0), None]);
        let truth = [0, 0, 0, 1, 2];
        assert_eq!(hungarian_accuracy(&[7; 5], &truth).unwrap(), 0.6);
    }
}
