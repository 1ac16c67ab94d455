use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{Kernel, LearnedKernel};
use crate::distributions::{io::read_graph_json, NeighborGraph};
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    StudentT,
    CosineGaussian,
    Cluster,
    DegreeCluster,
    PrototypeSoftmax,
    Harmonic,
    CrossModalCosine,
}

/// Declarative kernel description, as found in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modality: Option<Vec<u8>>,
    /// Number of clusters (cluster families) or embedding width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<usize>,
}

/// Default harmonic offset width, used when `sigma` is not given.
pub const HARMONIC_DEFAULT_SIGMA: f64 = 1e-3;

impl KernelSpec {
    pub fn new(family: Family) -> Self {
        Self {
            family,
            sigma: None,
            tau: None,
            nu: None,
            n: None,
            alpha: None,
            graph: None,
            modality: None,
            clusters: None,
        }
    }

    fn positive(name: &'static str, v: Option<f64>, default: f64) -> Result<f64> {
        let v = v.unwrap_or(default);
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(invalid(name, format!("{v} must be positive and finite")))
        }
    }

    /// Resolves hyperparameters and attachments. `graph` supplies degrees
    /// for the degree-weighted family when the spec names no graph file.
    pub fn build(&self, graph: Option<&NeighborGraph>) -> Result<LearnedKernel> {
        let kernel = match self.family {
            Family::Gaussian => Kernel::Gaussian {
                sigma: Self::positive("sigma", self.sigma, 1.0)?,
            },
            Family::StudentT => Kernel::StudentT {
                nu: Self::positive("nu", self.nu, 1.0)?,
            },
            Family::CosineGaussian => Kernel::CosineGaussian {
                tau: Self::positive("tau", self.tau, 1.0)?,
            },
            Family::Cluster => Kernel::Cluster,
            Family::DegreeCluster => {
                let loaded;
                let g = match (&self.graph, graph) {
                    (Some(path), _) => {
                        loaded = read_graph_json(path)?;
                        &loaded
                    }
                    (None, Some(g)) => g,
                    (None, None) => return Err(invalid("graph", "degree_cluster needs a graph")),
                };
                Kernel::DegreeCluster {
                    degrees: g.degrees().to_vec(),
                }
            }
            Family::PrototypeSoftmax => Kernel::PrototypeSoftmax,
            Family::Harmonic => {
                let sigma = self.sigma.unwrap_or(HARMONIC_DEFAULT_SIGMA);
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(invalid("sigma", format!("{sigma} must be nonnegative")));
                }
                let degree = self.n.unwrap_or(1);
                if degree < 1 {
                    return Err(invalid("n", "harmonic degree must be at least 1"));
                }
                Kernel::Harmonic { degree, sigma }
            }
            Family::CrossModalCosine => Kernel::CrossModalCosine {
                modality: self
                    .modality
                    .clone()
                    .ok_or_else(|| invalid("modality", "cross_modal_cosine needs a modality partition"))?,
                tau: Self::positive("tau", self.tau, 1.0)?,
            },
        };
        let mut k = LearnedKernel::new(kernel);
        if let Some(alpha) = self.alpha {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(invalid("alpha", format!("{alpha} outside [0, 1]")));
            }
            k = k.with_debias(alpha);
        }
        Ok(k)
    }

    pub fn is_cluster_family(&self) -> bool {
        matches!(self.family, Family::Cluster | Family::DegreeCluster)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            pointer: crate::pipeline::json_pointer(e.path()),
            reason: e.inner().to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_shape() {
        let s = KernelSpec::from_json(r#"{"family": "student_t", "nu": 3.0, "alpha": 0.2}"#).unwrap();
        assert_eq!(s.family, Family::StudentT);
        let k = s.build(None).unwrap();
        assert_eq!(k.kernel, Kernel::StudentT { nu: 3.0 });
        assert_eq!(k.debias, Some(0.2));
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        let mut s = KernelSpec::new(Family::Gaussian);
        s.sigma = Some(-1.0);
        assert!(s.build(None).is_err());
        let mut s = KernelSpec::new(Family::Cluster);
        s.alpha = Some(1.2);
        assert!(s.build(None).is_err());
        assert!(KernelSpec::new(Family::DegreeCluster).build(None).is_err());
        assert!(KernelSpec::new(Family::CrossModalCosine).build(None).is_err());
        let err = KernelSpec::from_json(r#"{"family": "gaussian", "sigma": "wide"}"#).unwrap_err();
        assert!(matches!(err, Error::Config { ref pointer, .. } if pointer == "/sigma"), "{err}");
    }

    #[test]
    fn harmonic_defaults_to_small_sigma() {
        let k = KernelSpec::new(Family::Harmonic).build(None).unwrap();
        assert_eq!(k.kernel, Kernel::Harmonic { degree: 1, sigma: HARMONIC_DEFAULT_SIGMA });
    }
}
