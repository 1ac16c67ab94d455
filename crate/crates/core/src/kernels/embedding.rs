//! Pairwise kernels over an embedding table: a masked row softmax of a
//! per-pair score.

use ndarray::{Array2, ArrayView2};

use super::Kernel;
use crate::distributions::ConditionalDistribution;
use crate::error::{invalid, Error, Result};
use crate::math::{masked_softmax, sq_distances};

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(name, format!("{v} must be positive and finite")))
    }
}

fn unit_rows(e: ArrayView2<f64>) -> Result<(Array2<f64>, Vec<f64>)> {
    let mut unit = e.to_owned();
    let mut norms = Vec::with_capacity(e.nrows());
    for (i, mut row) in unit.rows_mut().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroVector(i));
        }
        row.mapv_inplace(|v| v / norm);
        norms.push(norm);
    }
    Ok((unit, norms))
}

/// Scores `s_ij` and the admissibility mask for a pairwise kernel.
fn scores(kernel: &Kernel, e: ArrayView2<f64>) -> Result<Array2<f64>> {
    match kernel {
        Kernel::Gaussian { sigma } => {
            check_positive("sigma", *sigma)?;
            let scale = 2.0 * sigma * sigma;
            Ok(sq_distances(e).mapv(|d| -d / scale))
        }
        Kernel::StudentT { nu } => {
            check_positive("nu", *nu)?;
            let expo = (nu + 1.0) / 2.0;
            Ok(sq_distances(e).mapv(|d| -expo * (d / nu).ln_1p()))
        }
        Kernel::CosineGaussian { tau } | Kernel::CrossModalCosine { tau, .. } => {
            check_positive("tau", *tau)?;
            let (u, _) = unit_rows(e)?;
            Ok(u.dot(&u.t()) / *tau)
        }
        other => Err(Error::Unsupported(format!("{other:?} is not a pairwise kernel"))),
    }
}

fn admissible(kernel: &Kernel, i: usize, j: usize) -> bool {
    match kernel {
        Kernel::CrossModalCosine { modality, .. } => modality[i] != modality[j],
        _ => i != j,
    }
}

pub(super) fn forward(kernel: &Kernel, e: ArrayView2<f64>) -> Result<ConditionalDistribution> {
    let n = e.nrows();
    match kernel {
        Kernel::CrossModalCosine { modality, .. } => {
            if modality.len() != n {
                return Err(Error::Shape(format!("modality covers {} of {n} points", modality.len())));
            }
            for m in [0u8, 1] {
                if !modality.contains(&m) {
                    return Err(Error::EmptyModality(m));
                }
            }
        }
        _ if n < 2 => return Err(Error::Shape(format!("need at least 2 embeddings, got {n}"))),
        _ => {}
    }
    let s = scores(kernel, e)?;
    let mut q = Array2::zeros((n, n));
    let mut out = vec![0.0; n];
    for i in 0..n {
        let row = s.row(i).to_vec();
        masked_softmax(&row, |j| admissible(kernel, i, j), &mut out);
        q.row_mut(i).assign(&ndarray::ArrayView1::from(&out[..]));
    }
    Ok(ConditionalDistribution::from_trusted(q, true))
}

/// `∂L/∂E` given `∂L/∂q` and the forward output `q`.
pub(super) fn backward(kernel: &Kernel, e: ArrayView2<f64>, q: ArrayView2<f64>, grad_q: ArrayView2<f64>) -> Array2<f64> {
    let n = e.nrows();
    // softmax Jacobian: ∂L/∂s_ij = q_ij (g_ij - Σ_k q_ik g_ik)
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        let mean: f64 = (0..n).map(|k| q[[i, k]] * grad_q[[i, k]]).sum();
        for j in 0..n {
            if q[[i, j]] != 0.0 {
                a[[i, j]] = q[[i, j]] * (grad_q[[i, j]] - mean);
            }
        }
    }
    let mut ge = Array2::zeros(e.raw_dim());
    match kernel {
        Kernel::Gaussian { .. } | Kernel::StudentT { .. } => {
            let d = sq_distances(e);
            for i in 0..n {
                for j in 0..n {
                    if a[[i, j]] == 0.0 {
                        continue;
                    }
                    let ds_dd = match kernel {
                        Kernel::Gaussian { sigma } => -1.0 / (2.0 * sigma * sigma),
                        Kernel::StudentT { nu } => -(nu + 1.0) / (2.0 * (nu + d[[i, j]])),
                        _ => unreachable!(),
                    };
                    let c = 2.0 * a[[i, j]] * ds_dd;
                    for k in 0..e.ncols() {
                        let diff = e[[i, k]] - e[[j, k]];
                        ge[[i, k]] += c * diff;
                        ge[[j, k]] -= c * diff;
                    }
                }
            }
        }
        Kernel::CosineGaussian { tau } | Kernel::CrossModalCosine { tau, .. } => {
            let (u, norms) = unit_rows(e).expect("validated in forward");
            // ∂L/∂u_i = Σ_j (a_ij + a_ji) u_j / τ
            let sym = (&a + &a.t()) / *tau;
            let gu = sym.dot(&u);
            for i in 0..n {
                let ui = u.row(i);
                let gi = gu.row(i);
                let radial = ui.dot(&gi);
                for k in 0..e.ncols() {
                    ge[[i, k]] = (gi[k] - radial * ui[k]) / norms[i];
                }
            }
        }
        _ => unreachable!("pairwise kernels only"),
    }
    ge
}

/// `q(j|i) ∝ exp(-‖φ_i - φ_j‖² / 2σ²)` over `j ≠ i`.
pub fn gaussian_kernel(embeddings: ArrayView2<f64>, sigma: f64) -> Result<ConditionalDistribution> {
    forward(&Kernel::Gaussian { sigma }, embeddings)
}

/// `q(j|i) ∝ (1 + ‖φ_i - φ_j‖² / ν)^{-(ν+1)/2}` over `j ≠ i`.
pub fn student_t_kernel(embeddings: ArrayView2<f64>, nu: f64) -> Result<ConditionalDistribution> {
    forward(&Kernel::StudentT { nu }, embeddings)
}

/// `q(j|i) ∝ exp(u_i · u_j / τ)` over `j ≠ i`, with `u` the unit-normalized rows.
pub fn cosine_gaussian_kernel(embeddings: ArrayView2<f64>, tau: f64) -> Result<ConditionalDistribution> {
    forward(&Kernel::CosineGaussian { tau }, embeddings)
}

/// Cosine softmax whose support is the opposite modality of each anchor.
pub fn cross_modal_cosine_kernel(
    embeddings: ArrayView2<f64>,
    modality: &[u8],
    tau: f64,
) -> Result<ConditionalDistribution> {
    forward(
        &Kernel::CrossModalCosine {
            modality: modality.to_vec(),
            tau,
        },
        embeddings,
    )
}
