//! Learned conditional distributions `q_φ(j|i)`.
//!
//! A [`Kernel`] maps a [`ParamSpace`] to a [`ConditionalDistribution`] and
//! back-propagates a gradient with respect to `q` into a gradient with
//! respect to the parameters. Gradients are analytic for every family.

mod classifier;
mod cluster;
mod embedding;
mod spec;

pub use classifier::{harmonic_kernel, prototype_softmax_kernel};
pub use cluster::{
    cluster_kernel, cluster_kernel_from_assignments, degree_cluster_kernel,
    degree_cluster_kernel_from_assignments, simplex_params,
};
pub use embedding::{cosine_gaussian_kernel, cross_modal_cosine_kernel, gaussian_kernel, student_t_kernel};
pub use spec::{Family, KernelSpec};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::distributions::{debias_uniform, ConditionalDistribution};
use crate::error::{invalid, Error, Result};

/// The learnable object `φ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSpace {
    /// One free vector per point.
    EmbeddingTable(Array2<f64>),
    /// `d × m` map applied to fixed input points.
    LinearMap(Array2<f64>),
    /// Per-point logits; the row softmax gives soft cluster assignments.
    ClusterLogits(Array2<f64>),
    /// Class prototypes alone.
    Prototypes(Array2<f64>),
    /// Point features together with class prototypes.
    Classifier {
        features: Array2<f64>,
        prototypes: Array2<f64>,
    },
}

impl ParamSpace {
    pub fn arrays(&self) -> Vec<&Array2<f64>> {
        match self {
            Self::EmbeddingTable(a) | Self::LinearMap(a) | Self::ClusterLogits(a) | Self::Prototypes(a) => vec![a],
            Self::Classifier { features, prototypes } => vec![features, prototypes],
        }
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Array2<f64>> {
        match self {
            Self::EmbeddingTable(a) | Self::LinearMap(a) | Self::ClusterLogits(a) | Self::Prototypes(a) => vec![a],
            Self::Classifier { features, prototypes } => vec![features, prototypes],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for a in out.arrays_mut() {
            a.fill(0.0);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.arrays().iter().map(|a| a.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All coordinates in a fixed order (arrays in declaration order, row-major).
    pub fn to_flat(&self) -> Vec<f64> {
        self.arrays().into_iter().flat_map(|a| a.iter().copied()).collect()
    }

    /// Same shape as `self`, values taken from `flat`.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self> {
        if flat.len() != self.len() {
            return Err(Error::Shape(format!("{} values for {} parameters", flat.len(), self.len())));
        }
        let mut out = self.clone();
        let mut it = flat.iter();
        for a in out.arrays_mut() {
            for v in a.iter_mut() {
                *v = *it.next().expect("length checked");
            }
        }
        Ok(out)
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
            && self
                .arrays()
                .iter()
                .zip(other.arrays())
                .all(|(a, b)| a.shape() == b.shape())
    }

    pub fn is_finite(&self) -> bool {
        self.arrays().iter().all(|a| a.iter().all(|v| v.is_finite()))
    }
}

/// A kernel family with its hyperparameters and attachments resolved.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Gaussian { sigma: f64 },
    StudentT { nu: f64 },
    CosineGaussian { tau: f64 },
    Cluster,
    DegreeCluster { degrees: Vec<f64> },
    PrototypeSoftmax,
    Harmonic { degree: u32, sigma: f64 },
    CrossModalCosine { modality: Vec<u8>, tau: f64 },
}

/// Everything a kernel forward pass keeps for its backward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Final distribution (after optional debiasing).
    pub q: ConditionalDistribution,
    raw: Array2<f64>,
    embeddings: Option<Array2<f64>>,
    assignments: Option<Array2<f64>>,
}

/// A kernel plus the optional learned-side debiasing and, for
/// [`ParamSpace::LinearMap`], the fixed inputs the map is applied to.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedKernel {
    pub kernel: Kernel,
    pub debias: Option<f64>,
    pub inputs: Option<Array2<f64>>,
}

impl LearnedKernel {
    pub fn new(kernel: Kernel) -> Self {
        Self {
            kernel,
            debias: None,
            inputs: None,
        }
    }

    pub fn with_debias(mut self, alpha: f64) -> Self {
        self.debias = Some(alpha);
        self
    }

    pub fn with_inputs(mut self, inputs: Array2<f64>) -> Self {
        self.inputs = Some(inputs);
        self
    }

    fn apply_map(&self, w: &Array2<f64>) -> Result<Array2<f64>> {
        let x = self
            .inputs
            .as_ref()
            .ok_or_else(|| invalid("inputs", "a linear map needs input points"))?;
        if x.ncols() != w.nrows() {
            return Err(Error::Shape(format!(
                "inputs have {} columns, map has {} rows",
                x.ncols(),
                w.nrows()
            )));
        }
        Ok(x.dot(w))
    }

    fn embeddings(&self, params: &ParamSpace) -> Result<Array2<f64>> {
        match params {
            ParamSpace::EmbeddingTable(e) => Ok(e.clone()),
            ParamSpace::LinearMap(w) => self.apply_map(w),
            other => Err(mismatch(&self.kernel, other)),
        }
    }

    /// Cluster logits: free per point, or a linear head on the inputs.
    fn logits(&self, params: &ParamSpace) -> Result<Array2<f64>> {
        match params {
            ParamSpace::ClusterLogits(z) => Ok(z.clone()),
            ParamSpace::LinearMap(w) => self.apply_map(w),
            other => Err(mismatch(&self.kernel, other)),
        }
    }

    pub fn forward(&self, params: &ParamSpace) -> Result<Forward> {
        if !params.is_finite() {
            return Err(Error::NonFinite("parameters".into()));
        }
        let mut embeddings = None;
        let mut assignments = None;
        let raw = match (&self.kernel, params) {
            (Kernel::Gaussian { .. } | Kernel::StudentT { .. } | Kernel::CosineGaussian { .. } | Kernel::CrossModalCosine { .. }, _) => {
                let e = self.embeddings(params)?;
                let q = embedding::forward(&self.kernel, e.view())?;
                embeddings = Some(e);
                q
            }
            (Kernel::Cluster, ParamSpace::ClusterLogits(_) | ParamSpace::LinearMap(_)) => {
                let phi = simplex_params(self.logits(params)?.view());
                let q = cluster::weighted_forward(phi.view(), None)?;
                assignments = Some(phi);
                q
            }
            (Kernel::DegreeCluster { degrees }, ParamSpace::ClusterLogits(_) | ParamSpace::LinearMap(_)) => {
                let phi = simplex_params(self.logits(params)?.view());
                let q = cluster::weighted_forward(phi.view(), Some(degrees))?;
                assignments = Some(phi);
                q
            }
            (Kernel::PrototypeSoftmax, ParamSpace::Classifier { features, prototypes }) => {
                classifier::prototype_forward(features.view(), prototypes.view())?
            }
            (Kernel::Harmonic { degree, sigma }, ParamSpace::Classifier { features, prototypes }) => {
                classifier::harmonic_forward(features.view(), prototypes.view(), *degree, *sigma)?
            }
            (k, p) => return Err(mismatch(k, p)),
        };
        let q = match self.debias {
            Some(alpha) => debias_uniform(&raw, alpha)?,
            None => raw.clone(),
        };
        Ok(Forward {
            q,
            raw: raw.into_inner(),
            embeddings,
            assignments,
        })
    }

    pub fn evaluate(&self, params: &ParamSpace) -> Result<ConditionalDistribution> {
        Ok(self.forward(params)?.q)
    }

    /// Pulls `∂L/∂q` back to `∂L/∂φ`.
    pub fn backward(&self, params: &ParamSpace, fwd: &Forward, grad_q: ArrayView2<f64>) -> Result<ParamSpace> {
        if grad_q.shape() != fwd.raw.shape() {
            return Err(Error::Shape("gradient does not match kernel output".into()));
        }
        let grad_raw = match self.debias {
            Some(alpha) => grad_q.mapv(|g| (1.0 - alpha) * g),
            None => grad_q.to_owned(),
        };
        match (&self.kernel, params) {
            (Kernel::Cluster | Kernel::DegreeCluster { .. }, ParamSpace::ClusterLogits(_) | ParamSpace::LinearMap(_)) => {
                let phi = fwd.assignments.as_ref().expect("cached by forward");
                let degrees = match &self.kernel {
                    Kernel::DegreeCluster { degrees } => Some(degrees.as_slice()),
                    _ => None,
                };
                let g_phi = cluster::weighted_backward(phi.view(), degrees, grad_raw.view());
                let g_z = cluster::softmax_backward(phi.view(), g_phi.view());
                match params {
                    ParamSpace::LinearMap(_) => {
                        let x = self.inputs.as_ref().expect("checked in forward");
                        Ok(ParamSpace::LinearMap(x.t().dot(&g_z)))
                    }
                    _ => Ok(ParamSpace::ClusterLogits(g_z)),
                }
            }
            (Kernel::PrototypeSoftmax, ParamSpace::Classifier { features, prototypes }) => {
                let (gf, gp) = classifier::prototype_backward(features.view(), prototypes.view(), fwd.raw.view(), grad_raw.view());
                Ok(ParamSpace::Classifier { features: gf, prototypes: gp })
            }
            (Kernel::Harmonic { degree, sigma }, ParamSpace::Classifier { features, prototypes }) => {
                let (gf, gp) = classifier::harmonic_backward(
                    features.view(),
                    prototypes.view(),
                    *degree,
                    *sigma,
                    fwd.raw.view(),
                    grad_raw.view(),
                );
                Ok(ParamSpace::Classifier { features: gf, prototypes: gp })
            }
            (_, ParamSpace::EmbeddingTable(_) | ParamSpace::LinearMap(_)) => {
                let e = fwd.embeddings.as_ref().expect("cached by forward");
                let ge = embedding::backward(&self.kernel, e.view(), fwd.raw.view(), grad_raw.view());
                match params {
                    ParamSpace::LinearMap(_) => {
                        let x = self.inputs.as_ref().expect("checked in forward");
                        Ok(ParamSpace::LinearMap(x.t().dot(&ge)))
                    }
                    _ => Ok(ParamSpace::EmbeddingTable(ge)),
                }
            }
            (k, p) => Err(mismatch(k, p)),
        }
    }
}

fn mismatch(kernel: &Kernel, params: &ParamSpace) -> Error {
    let kind = match params {
        ParamSpace::EmbeddingTable(_) => "embedding table",
        ParamSpace::LinearMap(_) => "linear map",
        ParamSpace::ClusterLogits(_) => "cluster logits",
        ParamSpace::Prototypes(_) => "prototypes",
        ParamSpace::Classifier { .. } => "classifier",
    };
    Error::Unsupported(format!("{kernel:?} cannot be evaluated on a {kind}"))
}

/// Learned-side debiasing; same contract as the supervisory mixture.
pub fn debias_kernel(q: &ConditionalDistribution, alpha: f64) -> Result<ConditionalDistribution> {
    debias_uniform(q, alpha)
}
