use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{ConditionalDistribution, ROW_SUM_TOL};
use crate::error::{invalid, Error, Result};

/// Uniform mixture `(1 - α) p(j|i) + α / N`, with `N` the number of
/// admissible columns (the diagonal is skipped when self is excluded).
pub fn debias_uniform(p: &ConditionalDistribution, alpha: f64) -> Result<ConditionalDistribution> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(invalid("alpha", format!("{alpha} outside [0, 1]")));
    }
    let support = p.support_size();
    let skip_diag = p.excludes_self() && p.is_square();
    let uniform = 1.0 / support as f64;
    let mut out = p.probs().to_owned();
    for ((i, j), v) in out.indexed_iter_mut() {
        if skip_diag && i == j {
            continue;
        }
        *v = (1.0 - alpha) * *v + alpha * uniform;
    }
    Ok(ConditionalDistribution::from_trusted(out, p.excludes_self()))
}

/// How walk powers are turned into a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WalkMode {
    /// `P̃ ∝ P + P² + … + P^k`
    #[default]
    Weighted,
    /// Uniform over every node reachable within `k` steps.
    UniformSupport,
}

/// Neighbor propagation over walks of length up to `steps`. When `p`
/// excludes self, return-to-anchor mass is dropped before renormalizing.
pub fn propagate_walks(
    p: &ConditionalDistribution,
    steps: usize,
    mode: WalkMode,
) -> Result<ConditionalDistribution> {
    if !p.is_square() {
        return Err(Error::Shape(format!(
            "walks need a square matrix, got {}x{}",
            p.n_rows(),
            p.n_cols()
        )));
    }
    if steps == 0 {
        return Err(invalid("steps", "walk length must be at least 1"));
    }
    let base = p.probs().to_owned();
    let mut power = base.clone();
    let mut total = base.clone();
    for _ in 1..steps {
        power = power.dot(&base);
        total += &power;
    }
    let n = p.n_rows();
    let mut weights = match mode {
        WalkMode::Weighted => total,
        WalkMode::UniformSupport => total.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 }),
    };
    if p.excludes_self() {
        for i in 0..n {
            weights[[i, i]] = 0.0;
        }
    }
    if steps == 1 && mode == WalkMode::Weighted {
        return Ok(p.clone());
    }
    ConditionalDistribution::from_weights(weights, p.excludes_self())
}

/// Convex combination of distributions of equal shape.
pub fn mix_supervisory(ps: &[ConditionalDistribution], weights: &[f64]) -> Result<ConditionalDistribution> {
    let first = ps.first().ok_or_else(|| invalid("ps", "nothing to mix"))?;
    if ps.len() != weights.len() {
        return Err(Error::Shape(format!("{} inputs, {} weights", ps.len(), weights.len())));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0)) {
        return Err(invalid("weights", format!("negative weight {w}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(invalid("weights", format!("sum to {sum}, not 1")));
    }
    let shape = (first.n_rows(), first.n_cols());
    let mut out = Array2::zeros(shape);
    for (p, &w) in ps.iter().zip(weights) {
        if (p.n_rows(), p.n_cols()) != shape {
            return Err(Error::Shape(format!(
                "cannot mix {}x{} with {}x{}",
                p.n_rows(),
                p.n_cols(),
                shape.0,
                shape.1
            )));
        }
        out.scaled_add(w, &p.probs());
    }
    if ps.len() == 1 {
        return Ok(first.clone());
    }
    // renormalize away the rounding of the weight sum
    let excludes = ps.iter().all(|p| p.excludes_self());
    ConditionalDistribution::from_weights(out, excludes)
}
