//! Numerical checks of each claimed identity, bound and correspondence.
//!
//! Every check builds both sides independently, records the worst gap over
//! its instances and compares it with a declared tolerance. Identities that
//! hold "up to an additive constant" are checked as constancy across random
//! parameter draws.

mod clustering;
mod contrastive;
mod embedding;
mod supervised;

pub use clustering::{
    icon_kmeans, kmeans_sigma, ncut_supervisory, verify_debiased_clustering, verify_icon_kmeans, verify_kmeans_identity,
    verify_ncut, verify_pmi, verify_spectral, IconKMeans, NcutOutcome,
};
pub use contrastive::{
    verify_cmc, verify_infonce, verify_lgsimclr, verify_supcon, verify_tsimclr, verify_xsample,
    verify_xsample_and_cmc,
};
pub use embedding::{
    anisotropic, verify_cohesion_variance, verify_pca, verify_sne, verify_triplet_bounds, verify_tsne, verify_vicreg,
    TRIPLET_SIGMAS,
};
pub use supervised::{verify_cross_entropy, verify_harmonic, verify_mlm, verify_supervised};

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::optim::restart_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    Sne,
    Tsne,
    Pca,
    CohesionVariance,
    Infonce,
    Triplet,
    Tsimclr,
    Vicreg,
    Supcon,
    Xsample,
    Lgsimclr,
    Cmc,
    CrossEntropy,
    Harmonic,
    Mlm,
    Kmeans,
    Spectral,
    Ncut,
    Pmi,
    DebiasedClustering,
}

impl TheoremId {
    /// Every registered check, in table order.
    pub const ALL: [TheoremId; 20] = [
        Self::Sne,
        Self::Tsne,
        Self::Pca,
        Self::CohesionVariance,
        Self::Infonce,
        Self::Triplet,
        Self::Tsimclr,
        Self::Vicreg,
        Self::Supcon,
        Self::Xsample,
        Self::Lgsimclr,
        Self::Cmc,
        Self::CrossEntropy,
        Self::Harmonic,
        Self::Mlm,
        Self::Kmeans,
        Self::Spectral,
        Self::Ncut,
        Self::Pmi,
        Self::DebiasedClustering,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sne => "sne",
            Self::Tsne => "tsne",
            Self::Pca => "pca",
            Self::CohesionVariance => "cohesion_variance",
            Self::Infonce => "infonce",
            Self::Triplet => "triplet",
            Self::Tsimclr => "tsimclr",
            Self::Vicreg => "vicreg",
            Self::Supcon => "supcon",
            Self::Xsample => "xsample",
            Self::Lgsimclr => "lgsimclr",
            Self::Cmc => "cmc",
            Self::CrossEntropy => "cross_entropy",
            Self::Harmonic => "harmonic",
            Self::Mlm => "mlm",
            Self::Kmeans => "kmeans",
            Self::Spectral => "spectral",
            Self::Ncut => "ncut",
            Self::Pmi => "pmi",
            Self::DebiasedClustering => "debiased_clustering",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|id| id.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub id: TheoremId,
    pub instances: usize,
    pub max_abs_gap: f64,
    /// `|a − b| / max(1, |a|, |b|)`, or the measured quantity itself for
    /// checks that are not identities.
    pub max_rel_gap: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub notes: Vec<String>,
    /// Named side measurements (angles, counts, correlations).
    pub metrics: BTreeMap<String, f64>,
}

impl TheoremReport {
    /// Combines reports of the same check over disjoint instance sets.
    pub fn merge(reports: Vec<TheoremReport>) -> Option<TheoremReport> {
        let mut it = reports.into_iter();
        let mut out = it.next()?;
        for r in it {
            out.instances += r.instances;
            out.max_abs_gap = out.max_abs_gap.max(r.max_abs_gap);
            out.max_rel_gap = out.max_rel_gap.max(r.max_rel_gap);
            out.tolerance = out.tolerance.max(r.tolerance);
            out.passed &= r.passed;
            out.notes.extend(r.notes);
            for (k, v) in r.metrics {
                out.metrics
                    .entry(k)
                    .and_modify(|x| *x = x.max(v))
                    .or_insert(v);
            }
        }
        Some(out)
    }
}

/// Accumulates gaps for one report.
#[derive(Debug, Clone)]
pub(crate) struct Tally {
    id: TheoremId,
    tol: f64,
    instances: usize,
    abs: f64,
    rel: f64,
    ok: bool,
    notes: Vec<String>,
    metrics: BTreeMap<String, f64>,
}

impl Tally {
    pub(crate) fn new(id: TheoremId, tol: f64) -> Self {
        Self {
            id,
            tol,
            instances: 0,
            abs: 0.0,
            rel: 0.0,
            ok: true,
            notes: Vec::new(),
            metrics: BTreeMap::new(),
        }
    }

    pub(crate) fn instance(&mut self) {
        self.instances += 1;
    }

    /// Records `lhs = rhs`.
    pub(crate) fn identity(&mut self, lhs: f64, rhs: f64) {
        let abs = (lhs - rhs).abs();
        let rel = abs / 1f64.max(lhs.abs()).max(rhs.abs());
        if !(abs.is_finite() && rel.is_finite()) {
            self.ok = false;
            self.notes.push(format!("non-finite side: {lhs} vs {rhs}"));
        }
        self.abs = self.abs.max(abs);
        self.rel = self.rel.max(rel);
    }

    /// Records a measured quantity that must stay within the tolerance.
    pub(crate) fn gap(&mut self, value: f64) {
        if !value.is_finite() {
            self.ok = false;
            self.notes.push(format!("non-finite gap {value}"));
        }
        self.abs = self.abs.max(value);
        self.rel = self.rel.max(value);
    }

    /// Records an inequality with the given slack (negative means violated).
    pub(crate) fn bound(&mut self, slack: f64) {
        self.gap((-slack).max(0.0));
        if slack.is_nan() {
            self.ok = false;
        }
    }

    pub(crate) fn require(&mut self, cond: bool, note: impl Into<String>) {
        if !cond {
            self.ok = false;
            self.notes.push(note.into());
        }
    }

    pub(crate) fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub(crate) fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub(crate) fn finish(self) -> TheoremReport {
        TheoremReport {
            id: self.id,
            instances: self.instances,
            max_abs_gap: self.abs,
            max_rel_gap: self.rel,
            tolerance: self.tol,
            passed: self.ok && self.rel <= self.tol,
            notes: self.notes,
            metrics: self.metrics,
        }
    }
}

pub(crate) fn normal(rng: &mut ChaCha20Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

pub(crate) fn uniform(rng: &mut ChaCha20Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// Stream for the `k`-th instance of a check.
pub(crate) fn instance_rng(seed: u64, id: TheoremId, k: usize) -> ChaCha20Rng {
    restart_rng(seed ^ ((id as u64 + 1) << 40), k)
}

/// Instances per suite for the identity checks.
pub const DEFAULT_INSTANCES: usize = 20;

/// Runs the default suite of one check.
pub fn run(id: TheoremId, seed: u64) -> Result<TheoremReport> {
    let n = DEFAULT_INSTANCES;
    match id {
        TheoremId::Sne => embedding::sne_suite(seed, n),
        TheoremId::Tsne => embedding::tsne_suite(seed, n),
        TheoremId::Pca => embedding::pca_suite(seed, 3),
        TheoremId::CohesionVariance => embedding::cohesion_variance_suite(seed, n),
        TheoremId::Infonce => contrastive::infonce_suite(seed, n),
        TheoremId::Triplet => verify_triplet_bounds(seed, 1000, &TRIPLET_SIGMAS),
        TheoremId::Tsimclr => contrastive::tsimclr_suite(seed, n),
        TheoremId::Vicreg => embedding::vicreg_suite(seed, n),
        TheoremId::Supcon => contrastive::supcon_suite(seed, n),
        TheoremId::Xsample => contrastive::xsample_suite(seed, 5),
        TheoremId::Lgsimclr => contrastive::lgsimclr_suite(seed, n),
        TheoremId::Cmc => contrastive::cmc_suite(seed, n),
        TheoremId::CrossEntropy => supervised::cross_entropy_suite(seed, n),
        TheoremId::Harmonic => supervised::harmonic_suite(seed, n),
        TheoremId::Mlm => supervised::mlm_suite(seed, n),
        TheoremId::Kmeans => clustering::kmeans_suite(seed),
        TheoremId::Spectral => clustering::spectral_suite(seed),
        TheoremId::Ncut => clustering::ncut_suite(seed, 20).map(|(r, _)| r),
        TheoremId::Pmi => clustering::pmi_suite(seed, n),
        TheoremId::DebiasedClustering => clustering::debiased_suite(seed, n),
    }
}

/// Runs every registered check in parallel.
pub fn run_all(seed: u64) -> Result<Vec<TheoremReport>> {
    TheoremId::ALL.par_iter().map(|&id| run(id, seed)).collect()
}

pub use clustering::{kmeans_suite, ncut_suite, spectral_suite};
pub use contrastive::infonce_suite;
pub use embedding::{cohesion_variance_suite, pca_suite, sne_suite, tsne_suite, vicreg_suite};
pub use supervised::supervised_suite;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_is_complete_and_named_uniquely() {
        let names: std::collections::HashSet<_> = TheoremId::ALL.iter().map(|id| id.name()).collect();
        assert_eq!(names.len(), TheoremId::ALL.len());
        for id in TheoremId::ALL {
            assert_eq!(TheoremId::parse(id.name()), Some(id));
            // declaration order matches the registry
            assert_eq!(TheoremId::ALL[id as usize], id);
        }
    }

    #[test]
    fn tally_semantics() {
        let mut t = Tally::new(TheoremId::Sne, 1e-10);
        t.instance();
        t.identity(1.0, 1.0 + 1e-12);
        t.bound(0.5);
        let r = t.clone().finish();
        assert!(r.passed);
        t.bound(-1.0);
        assert!(!t.finish().passed);
        let mut t = Tally::new(TheoremId::Sne, 1.0);
        t.identity(f64::INFINITY, 0.0);
        assert!(!t.finish().passed);
    }
}
