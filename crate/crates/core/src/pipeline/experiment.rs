//! Running one configured experiment and sweeping its debiasing settings.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{BuilderSpec, DatasetSpec, DebiasOrder, ExperimentConfig, Head};
use super::hungarian::hungarian_accuracy;
use super::synth::synth_generate;
use crate::classic::lloyd_kmeans;
use crate::distributions::io::{fmt_f64, read_pairs_json, read_points_csv};
use crate::distributions::{
    debias_uniform, gaussian_affinity, knn_graph, label_uniform, mix_supervisory, pair_indicator, propagate_walks,
    BandwidthProfile, ConditionalDistribution, Metric, NeighborGraph,
};
use crate::error::{invalid, Error, Result};
use crate::kernels::{simplex_params, ParamSpace};
use crate::loss::IconObjective;
use crate::optim::{init_embeddings, init_logits, minimize, Init, TraceEntry};

/// Bins of the max-probability histogram over `[0, 1]`.
pub const HISTOGRAM_BINS: usize = 20;

/// Exact kNN digraph with unit weights: every node has out-degree `k`.
pub fn build_knn_graph(points: ArrayView2<f64>, k: usize, metric: Metric) -> Result<NeighborGraph> {
    knn_graph(points, k, metric)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub points: Array2<f64>,
    pub labels: Option<Vec<i64>>,
}

pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match &cfg.dataset {
        DatasetSpec::Synthetic { kind, n, noise } => {
            let d = synth_generate(*kind, *n, *noise, cfg.seed)?;
            Ok(Dataset {
                points: d.points,
                labels: Some(d.labels),
            })
        }
        DatasetSpec::Csv { path } => {
            let d = read_points_csv(cfg.resolve(path))?;
            Ok(Dataset {
                points: d.points,
                labels: d.labels,
            })
        }
    }
}

/// Supervisory distribution and the first kNN graph (used for degrees).
pub fn build_supervisory(cfg: &ExperimentConfig, data: &Dataset) -> Result<(ConditionalDistribution, Option<NeighborGraph>)> {
    let s = &cfg.supervisory;
    let n = data.points.nrows();
    let mut graph = None;
    let mut parts = Vec::with_capacity(s.builders.len());
    for builder in &s.builders {
        let p = match builder {
            BuilderSpec::Knn { k, metric } => {
                let g = build_knn_graph(data.points.view(), *k, *metric)?;
                let mut p = g.transition()?;
                if graph.is_none() {
                    graph = Some(g);
                }
                if s.order == DebiasOrder::DebiasThenPropagate {
                    p = debias_uniform(&p, s.alpha)?;
                }
                propagate_walks(&p, s.walk_steps, s.walk_mode)?
            }
            BuilderSpec::Gaussian { sigma, perplexity } => {
                let profile = match (sigma, perplexity) {
                    (Some(v), _) => BandwidthProfile::Global(*v),
                    (_, Some(v)) => BandwidthProfile::Perplexity(*v),
                    _ => unreachable!("validated"),
                };
                gaussian_affinity(data.points.view(), &profile, true)?
            }
            BuilderSpec::Pairs { path } => {
                let pairs = read_pairs_json(cfg.resolve(path))?;
                if pairs.len() != n {
                    return Err(Error::Shape(format!("pairs cover {} of {n} points", pairs.len())));
                }
                pair_indicator(&pairs)?
            }
            BuilderSpec::Labels => {
                let labels = data
                    .labels
                    .as_ref()
                    .ok_or_else(|| invalid("builders", "the labels builder needs labeled data"))?;
                label_uniform(labels)?
            }
        };
        parts.push(p);
    }
    let weights = s
        .weights
        .clone()
        .unwrap_or_else(|| vec![1.0 / parts.len() as f64; parts.len()]);
    let mut p = mix_supervisory(&parts, &weights)?;
    if s.order == DebiasOrder::PropagateThenDebias {
        p = debias_uniform(&p, s.alpha)?;
    }
    Ok((p, graph))
}

/// The four frozen keys of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    /// Absent when the data carry no labels.
    pub hungarian_accuracy: Option<f64>,
    pub final_loss: f64,
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub metrics: MetricsRecord,
    pub trace: Vec<TraceEntry>,
    pub predicted: Vec<usize>,
    /// Largest assignment probability per point.
    pub max_prob: Vec<f64>,
    pub histogram: [u64; HISTOGRAM_BINS],
    pub labels: Option<Vec<i64>>,
    /// Trained parameters.
    pub params: ParamSpace,
}

impl ExperimentOutcome {
    pub fn mean_max_prob(&self) -> f64 {
        self.max_prob.iter().sum::<f64>() / self.max_prob.len() as f64
    }
}

/// Counts of `values` in equal-width bins over `[0, 1]`; 1.0 falls in the
/// last bin.
pub fn max_prob_histogram(values: &[f64]) -> [u64; HISTOGRAM_BINS] {
    let mut h = [0u64; HISTOGRAM_BINS];
    for &v in values {
        let b = ((v.clamp(0.0, 1.0) * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        h[b] += 1;
    }
    h
}

/// Inputs of the linear head: standardized columns plus a bias column.
pub fn head_inputs(points: ArrayView2<f64>) -> Array2<f64> {
    let (n, d) = points.dim();
    let mut x = Array2::ones((n, d + 1));
    for c in 0..d {
        let col = points.column(c);
        let mean = col.sum() / n as f64;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64).sqrt();
        let scale = if sd > 0.0 { 1.0 / sd } else { 1.0 };
        for i in 0..n {
            x[[i, c]] = (points[[i, c]] - mean) * scale;
        }
    }
    x
}

fn argmax_rows(m: ArrayView2<f64>) -> (Vec<usize>, Vec<f64>) {
    m.axis_iter(Axis(0))
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (c, &v)| if v > acc.1 { (c, v) } else { acc })
        })
        .unzip()
}

/// Builds `p`, trains the configured kernel and evaluates, without touching
/// the file system beyond reading inputs.
pub fn run_in_memory(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    cfg.check_paths()?;
    let data = load_dataset(cfg)?;
    let n = data.points.nrows();
    let classes = data.labels.as_ref().map(|l| l.iter().collect::<std::collections::BTreeSet<_>>().len());
    let (p, graph) = build_supervisory(cfg, &data)?;
    let mut spec = cfg.kernel.clone();
    spec.alpha = None;
    let mut kernel = spec.build(graph.as_ref())?;
    if cfg.head == Head::Linear {
        kernel = kernel.with_inputs(head_inputs(data.points.view()));
    }
    let q_alpha = cfg.q_alpha();
    if q_alpha > 0.0 {
        kernel = kernel.with_debias(q_alpha);
    }
    let width = spec.clusters.or(classes).ok_or_else(|| invalid("clusters", "set kernel.clusters for unlabeled data"))?;
    let cluster_family = spec.is_cluster_family();
    let objective = IconObjective::new(p, kernel.clone(), cfg.direction)
        .with_entropy_weight(cfg.optimizer.entropy_weight)
        .with_teacher_weight(cfg.supervisory.teacher_weight);
    let mut opt = cfg.optimizer.clone();
    opt.seed = cfg.seed;
    let rows = data.points.ncols() + 1;
    let init = match (cfg.head, cluster_family) {
        (Head::Free, true) => Init::Random(Box::new(move |rng| init_logits(n, width, rng))),
        (Head::Free, false) => Init::Random(Box::new(move |rng| init_embeddings(n, width, rng))),
        (Head::Linear, _) => Init::Random(Box::new(move |rng| match init_logits(rows, width, rng) {
            ParamSpace::ClusterLogits(w) => ParamSpace::LinearMap(w),
            _ => unreachable!(),
        })),
    };
    let result = minimize(&objective, &init, &opt)?;
    let (predicted, max_prob) = if cluster_family {
        let z = match &result.params {
            ParamSpace::ClusterLogits(z) => z.clone(),
            ParamSpace::LinearMap(w) => head_inputs(data.points.view()).dot(w),
            _ => unreachable!("initializer matches the family"),
        };
        argmax_rows(simplex_params(z.view()).view())
    } else {
        let e = match &result.params {
            ParamSpace::EmbeddingTable(e) => e.clone(),
            ParamSpace::LinearMap(w) => head_inputs(data.points.view()).dot(w),
            _ => unreachable!("initializer matches the family"),
        };
        let q = kernel.evaluate(&result.params)?;
        let (_, mp) = argmax_rows(q.probs());
        let m = classes.unwrap_or(width).min(n);
        (lloyd_kmeans(e.view(), m, 5, cfg.seed)?.partition, mp)
    };
    let hungarian = match &data.labels {
        Some(l) if cfg.metrics.iter().any(|m| m == "hungarian_accuracy") => Some(hungarian_accuracy(&predicted, l)?),
        _ => None,
    };
    Ok(ExperimentOutcome {
        metrics: MetricsRecord {
            hungarian_accuracy: hungarian,
            final_loss: result.final_loss,
            config_hash: cfg.hash(),
            seed: cfg.seed,
        },
        histogram: max_prob_histogram(&max_prob),
        trace: result.trace,
        predicted,
        max_prob,
        labels: data.labels,
        params: result.params,
    })
}

/// Writes `metrics.json`, `trace.csv`, `assignments.csv` and
/// `histogram.csv` into `dir`.
pub fn write_artifacts(outcome: &ExperimentOutcome, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let json = serde_json::to_string_pretty(&outcome.metrics)?;
    fs::write(dir.join("metrics.json"), json + "\n")?;

    let mut w = csv::Writer::from_path(dir.join("trace.csv"))?;
    w.write_record(["epoch", "loss", "lr"])?;
    for t in &outcome.trace {
        w.write_record([t.epoch.to_string(), fmt_f64(t.loss), fmt_f64(t.lr)])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("assignments.csv"))?;
    let mut header = vec!["index", "cluster", "max_prob"];
    if outcome.labels.is_some() {
        header.push("label");
    }
    w.write_record(&header)?;
    for (i, (&c, &mp)) in outcome.predicted.iter().zip(&outcome.max_prob).enumerate() {
        let mut rec = vec![i.to_string(), c.to_string(), fmt_f64(mp)];
        if let Some(l) = &outcome.labels {
            rec.push(l[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("histogram.csv"))?;
    w.write_record(["bin", "lower", "upper", "count"])?;
    for (b, &count) in outcome.histogram.iter().enumerate() {
        let lo = b as f64 / HISTOGRAM_BINS as f64;
        let hi = (b + 1) as f64 / HISTOGRAM_BINS as f64;
        w.write_record([b.to_string(), fmt_f64(lo), fmt_f64(hi), count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the experiment and writes its artifacts to `out`, or to the
/// configured output directory.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentOutcome> {
    let outcome = run_in_memory(cfg)?;
    let dir = match (out, &cfg.output_dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => cfg.resolve(d),
        (None, None) => return Err(invalid("output_dir", "no output directory given")),
    };
    write_artifacts(&outcome, &dir)?;
    Ok(outcome)
}

/// Which side(s) a swept `α` is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sides {
    P,
    Q,
    #[default]
    Both,
}

impl std::str::FromStr for Sides {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" => Ok(Self::P),
            "q" => Ok(Self::Q),
            "both" => Ok(Self::Both),
            other => Err(invalid("sides", format!("`{other}` is not p, q or both"))),
        }
    }
}

/// One grid point, averaged over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub walk_steps: usize,
    pub runs: usize,
    pub hungarian_accuracy: Option<f64>,
    pub final_loss: f64,
    pub mean_max_prob: f64,
}

/// Configuration at one grid point.
pub fn grid_config(base: &ExperimentConfig, alpha: f64, walk_steps: usize, sides: Sides, seed: u64) -> ExperimentConfig {
    let mut cfg = base.clone();
    cfg.seed = seed;
    cfg.supervisory.walk_steps = walk_steps;
    cfg.kernel.alpha = None;
    let (p_alpha, q_alpha) = match sides {
        Sides::P => (alpha, 0.0),
        Sides::Q => (0.0, alpha),
        Sides::Both => (alpha, alpha),
    };
    cfg.supervisory.alpha = p_alpha;
    cfg.supervisory.q_alpha = q_alpha;
    cfg
}

/// Directory name of one sweep run.
pub fn run_dir_name(alpha: f64, walk_steps: usize, seed: u64) -> String {
    format!("alpha_{alpha}_walk_{walk_steps}_seed_{seed}")
}

/// Every `(α, walk)` grid point, each averaged over `seeds`; grid points run
/// in parallel. With `out`, each run writes its artifacts to its own
/// subdirectory.
pub fn ablation_sweep(
    base: &ExperimentConfig,
    alphas: &[f64],
    walks: &[usize],
    seeds: &[u64],
    sides: Sides,
    out: Option<&Path>,
) -> Result<Vec<SweepRow>> {
    if alphas.is_empty() || walks.is_empty() || seeds.is_empty() {
        return Err(invalid("grid", "alpha, walk and seed grids must be nonempty"));
    }
    let points: Vec<(f64, usize)> = alphas.iter().flat_map(|&a| walks.iter().map(move |&w| (a, w))).collect();
    points
        .par_iter()
        .map(|&(alpha, walk_steps)| {
            let outcomes = seeds
                .iter()
                .map(|&s| {
                    let outcome = run_in_memory(&grid_config(base, alpha, walk_steps, sides, s))?;
                    if let Some(root) = out {
                        write_artifacts(&outcome, &root.join(run_dir_name(alpha, walk_steps, s)))?;
                    }
                    Ok(outcome)
                })
                .collect::<Result<Vec<_>>>()?;
            let k = outcomes.len() as f64;
            let acc: Option<Vec<f64>> = outcomes.iter().map(|o| o.metrics.hungarian_accuracy).collect();
            Ok(SweepRow {
                alpha,
                walk_steps,
                runs: outcomes.len(),
                hungarian_accuracy: acc.map(|a| a.iter().sum::<f64>() / k),
                final_loss: outcomes.iter().map(|o| o.metrics.final_loss).sum::<f64>() / k,
                mean_max_prob: outcomes.iter().map(ExperimentOutcome::mean_max_prob).sum::<f64>() / k,
            })
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["alpha", "walk_steps", "runs", "hungarian_accuracy", "final_loss", "mean_max_prob"])?;
    for r in rows {
        w.write_record([
            fmt_f64(r.alpha),
            r.walk_steps.to_string(),
            r.runs.to_string(),
            r.hungarian_accuracy.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.final_loss),
            fmt_f64(r.mean_max_prob),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_conserves_mass() {
        let h = max_prob_histogram(&[0.0, 0.05, 0.5, 0.999, 1.0]);
        assert_eq!(h.iter().sum::<u64>(), 5);
        assert_eq!(h[0], 1);
        assert_eq!(h[1], 1);
        assert_eq!(h[10], 1);
        assert_eq!(h[19], 2);
    }

    #[test]
    fn knn_graph_examples() {
        let line = ndarray::array![[0.0], [1.0], [2.5], [4.5]];
        let g = build_knn_graph(line.view(), 1, Metric::Euclidean).unwrap();
        let mut edges: Vec<_> = g.edges().iter().map(|e| (e.0, e.1)).collect();
        edges.sort();
        assert_eq!(edges, vec![(0, 1), (1, 0), (2, 1), (3, 2)]);
        let full = build_knn_graph(line.view(), 3, Metric::Euclidean).unwrap();
        assert!((0..4).all(|i| full.out_degree(i) == 3));
        assert!(build_knn_graph(line.view(), 4, Metric::Euclidean).is_err());
    }

    #[test]
    fn uniform_supervision_gives_kl_from_uniform() {
        let text = r#"{
            "dataset": {"synthetic": {"kind": "blobs", "n": 12, "noise": 0.3}},
            "supervisory": {"builders": [{"kind": "knn", "k": 2}], "alpha": 1.0},
            "kernel": {"family": "cluster", "clusters": 3},
            "optimizer": {"epochs": 3, "learning_rate": 0.05}
        }"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let data = load_dataset(&cfg).unwrap();
        let (p, _) = build_supervisory(&cfg, &data).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                let expected = if i == j { 0.0 } else { 1.0 / 11.0 };
                assert_eq!(p.get(i, j), expected);
            }
        }
        let out = run_in_memory(&cfg).unwrap();
        assert_eq!(out.histogram.iter().sum::<u64>(), 12);
    }
}
