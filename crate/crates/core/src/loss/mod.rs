//! The integrated KL objective: mean over anchors of the KL divergence
//! between the supervisory and learned neighbor distributions.

mod gradcheck;

pub use gradcheck::{finite_diff_check, GradCheckReport};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::distributions::ConditionalDistribution;
use crate::error::{Error, Result};
use crate::kernels::{LearnedKernel, ParamSpace};
use crate::math::sq_distances;

/// Floor applied to the divided-by side inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `KL(p ‖ q)`
    #[default]
    Forward,
    /// `KL(q ‖ p)`
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub per_row_kl: Vec<f64>,
    pub per_row_entropy_p: Vec<f64>,
    pub per_row_entropy_q: Vec<f64>,
    pub direction: Direction,
    /// Rows where the reference side has mass the other side assigns zero.
    pub infinite_rows: Vec<usize>,
}

fn check_shapes(p: &ConditionalDistribution, q: &ConditionalDistribution) -> Result<()> {
    if p.n_rows() != q.n_rows() || p.n_cols() != q.n_cols() {
        return Err(Error::Shape(format!(
            "p is {}x{}, q is {}x{}",
            p.n_rows(),
            p.n_cols(),
            q.n_rows(),
            q.n_cols()
        )));
    }
    Ok(())
}

/// Row KL `Σ_j a_j ln(a_j / b_j)`; `None` when `a_j > 0` but `b_j = 0`.
fn row_kl(a: impl Iterator<Item = f64>, b: impl Iterator<Item = f64>) -> Option<f64> {
    let mut kl = 0.0;
    for (x, y) in a.zip(b) {
        if x > 0.0 {
            if y == 0.0 {
                return None;
            }
            kl += x * (x.ln() - y.max(LOG_FLOOR).ln());
        }
    }
    Some(kl)
}

/// Mean-over-rows KL divergence in the requested direction.
pub fn icon_loss(p: &ConditionalDistribution, q: &ConditionalDistribution, direction: Direction) -> Result<LossReport> {
    check_shapes(p, q)?;
    let n = p.n_rows();
    let mut per_row_kl = Vec::with_capacity(n);
    let mut infinite_rows = Vec::new();
    for i in 0..n {
        let (pr, qr) = (p.row(i), q.row(i));
        let kl = match direction {
            Direction::Forward => row_kl(pr.iter().copied(), qr.iter().copied()),
            Direction::Reverse => row_kl(qr.iter().copied(), pr.iter().copied()),
        };
        per_row_kl.push(kl.unwrap_or_else(|| {
            infinite_rows.push(i);
            f64::INFINITY
        }));
    }
    // fixed-order reduction
    let total = per_row_kl.iter().sum::<f64>() / n as f64;
    Ok(LossReport {
        total,
        per_row_kl,
        per_row_entropy_p: p.row_entropies(),
        per_row_entropy_q: q.row_entropies(),
        direction,
        infinite_rows,
    })
}

/// Mean-over-rows cross-entropy `-Σ_j p(j|i) ln q(j|i)`.
pub fn icon_cross_entropy(p: &ConditionalDistribution, q: &ConditionalDistribution) -> Result<f64> {
    check_shapes(p, q)?;
    let n = p.n_rows();
    let mut total = 0.0;
    for i in 0..n {
        for (&a, &b) in p.row(i).iter().zip(q.row(i).iter()) {
            if a > 0.0 {
                if b == 0.0 {
                    return Ok(f64::INFINITY);
                }
                total -= a * b.max(LOG_FLOOR).ln();
            }
        }
    }
    Ok(total / n as f64)
}

/// `(1/n) Σ_ij p(j|i) ‖f_i - f_j‖² - 2 Var(f)` with
/// `Var(f) = (1/2n²) Σ_ik ‖f_i - f_k‖²`.
pub fn cohesion_variance_loss(p: &ConditionalDistribution, embeddings: ArrayView2<f64>) -> Result<f64> {
    Ok(cohesion_variance_with_grad(p, embeddings)?.0)
}

/// Cohesion-variance loss and its gradient with respect to the embeddings.
pub fn cohesion_variance_with_grad(
    p: &ConditionalDistribution,
    embeddings: ArrayView2<f64>,
) -> Result<(f64, Array2<f64>)> {
    let n = embeddings.nrows();
    if !p.is_square() || p.n_rows() != n {
        return Err(Error::Shape(format!(
            "p is {}x{} for {n} embeddings",
            p.n_rows(),
            p.n_cols()
        )));
    }
    let nf = n as f64;
    let d = sq_distances(embeddings);
    let probs = p.probs();
    let cohesion: f64 = probs.iter().zip(d.iter()).map(|(a, b)| a * b).sum::<f64>() / nf;
    let variance = d.sum() / (2.0 * nf * nf);
    let mut grad = Array2::zeros(embeddings.raw_dim());
    for i in 0..n {
        for j in 0..n {
            let w = 2.0 * (probs[[i, j]] + probs[[j, i]]) / nf - 4.0 / (nf * nf);
            if w == 0.0 {
                continue;
            }
            for k in 0..embeddings.ncols() {
                grad[[i, k]] += w * (embeddings[[i, k]] - embeddings[[j, k]]);
            }
        }
    }
    Ok((cohesion - 2.0 * variance, grad))
}

/// Total variance of the rows, `(1/2n²) Σ_ik ‖f_i - f_k‖²`.
pub fn pairwise_variance(embeddings: ArrayView2<f64>) -> f64 {
    let n = embeddings.nrows() as f64;
    sq_distances(embeddings).sum() / (2.0 * n * n)
}

/// A differentiable scalar objective over a parameter space.
pub trait Objective {
    fn value_and_grad(&self, params: &ParamSpace) -> Result<(f64, ParamSpace)>;

    fn value(&self, params: &ParamSpace) -> Result<f64> {
        Ok(self.value_and_grad(params)?.0)
    }

    /// Called after each optimizer step when an EMA teacher is active.
    fn observe_teacher(&mut self, _teacher: &ParamSpace) -> Result<()> {
        Ok(())
    }
}

/// `mean_i KL + λ · mean_i H(q(·|i))` for a fixed `p` and a learned kernel.
/// With `λ = 1` and the reverse direction the entropy of `q` cancels and the
/// objective is the cluster-assignment distortion up to a data constant.
#[derive(Debug, Clone)]
pub struct IconObjective {
    pub p: ConditionalDistribution,
    pub kernel: LearnedKernel,
    pub direction: Direction,
    pub entropy_weight: f64,
    /// Weight given to the teacher's cluster kernel in the supervisory side.
    pub teacher_weight: f64,
    teacher_p: Option<ConditionalDistribution>,
}

impl IconObjective {
    pub fn new(p: ConditionalDistribution, kernel: LearnedKernel, direction: Direction) -> Self {
        Self {
            p,
            kernel,
            direction,
            entropy_weight: 0.0,
            teacher_weight: 0.0,
            teacher_p: None,
        }
    }

    pub fn with_entropy_weight(mut self, weight: f64) -> Self {
        self.entropy_weight = weight;
        self
    }

    pub fn with_teacher_weight(mut self, weight: f64) -> Self {
        self.teacher_weight = weight;
        self
    }

    /// Supervisory side in use: `p`, or its mixture with the teacher kernel.
    pub fn supervisory(&self) -> &ConditionalDistribution {
        self.teacher_p.as_ref().unwrap_or(&self.p)
    }

    pub fn report(&self, params: &ParamSpace) -> Result<LossReport> {
        let q = self.kernel.evaluate(params)?;
        icon_loss(self.supervisory(), &q, self.direction)
    }

    /// Value and `∂/∂q` of the objective for a given `q`.
    pub fn value_and_grad_q(&self, q: &ConditionalDistribution) -> Result<(f64, Array2<f64>)> {
        let p = self.supervisory();
        check_shapes(p, q)?;
        let n = p.n_rows() as f64;
        let report = icon_loss(p, q, self.direction)?;
        if let Some(&row) = report.infinite_rows.first() {
            return Err(Error::NonFinite(format!("row {row} has infinite divergence")));
        }
        let mut grad = Array2::zeros((p.n_rows(), p.n_cols()));
        let (pp, qq) = (p.probs(), q.probs());
        for ((i, j), g) in grad.indexed_iter_mut() {
            let (a, b) = (pp[[i, j]], qq[[i, j]]);
            *g = match self.direction {
                Direction::Forward if a > 0.0 => -a / b.max(LOG_FLOOR) / n,
                Direction::Forward => 0.0,
                Direction::Reverse if b > 0.0 => (b.max(LOG_FLOOR).ln() - a.max(LOG_FLOOR).ln() + 1.0) / n,
                Direction::Reverse => 0.0,
            };
        }
        let mut value = report.total;
        if self.entropy_weight != 0.0 {
            let h: f64 = report.per_row_entropy_q.iter().sum::<f64>() / n;
            value += self.entropy_weight * h;
            for ((i, j), g) in grad.indexed_iter_mut() {
                let b = qq[[i, j]];
                if b > 0.0 {
                    *g -= self.entropy_weight * (b.ln() + 1.0) / n;
                }
            }
        }
        Ok((value, grad))
    }
}

impl Objective for IconObjective {
    fn value_and_grad(&self, params: &ParamSpace) -> Result<(f64, ParamSpace)> {
        let fwd = self.kernel.forward(params)?;
        let (value, grad_q) = self.value_and_grad_q(&fwd.q)?;
        let grad = self.kernel.backward(params, &fwd, grad_q.view())?;
        Ok((value, grad))
    }

    fn observe_teacher(&mut self, teacher: &ParamSpace) -> Result<()> {
        if self.teacher_weight == 0.0 {
            return Ok(());
        }
        let tq = self.kernel.evaluate(teacher)?;
        let mixed = crate::distributions::mix_supervisory(
            &[self.p.clone(), tq],
            &[1.0 - self.teacher_weight, self.teacher_weight],
        )?;
        self.teacher_p = Some(mixed);
        Ok(())
    }
}
