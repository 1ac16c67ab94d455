//! Gradient checks of every kernel family composed with the I-Con loss.

#![allow(dead_code)]

use icon_core::distributions::{ConditionalDistribution, NeighborGraph};
use icon_core::kernels::{Family, Kernel, KernelSpec, LearnedKernel, ParamSpace};
use icon_core::loss::{finite_diff_check, Direction, GradCheckReport, IconObjective, Objective};
use icon_core::optim::restart_rng;
use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

pub const GRADIENT_TOL: f64 = 1e-4;
pub const FD_STEP: f64 = 1e-6;

pub fn normal(rng: &mut ChaCha20Rng, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

/// Random positive rows on the support of `q`.
pub fn supervisory_like(q: &ConditionalDistribution, rng: &mut ChaCha20Rng) -> ConditionalDistribution {
    let w = q.probs().mapv(|v| if v > 0.0 { rng.random_range(0.1..1.0) } else { 0.0 });
    ConditionalDistribution::from_weights(w, q.excludes_self()).unwrap()
}

pub struct Case {
    pub name: String,
    pub kernel: LearnedKernel,
    pub params: ParamSpace,
    pub entropy_weight: f64,
}

fn spec(family: Family) -> KernelSpec {
    KernelSpec::new(family)
}

/// One or more instances per kernel family, with at most 12 points.
pub fn cases(seed: u64) -> Vec<Case> {
    let mut rng = restart_rng(seed, 0);
    let n = 10;
    let mut out = Vec::new();
    let mut push = |name: &str, kernel: LearnedKernel, params: ParamSpace, entropy_weight: f64| {
        out.push(Case {
            name: name.to_string(),
            kernel,
            params,
            entropy_weight,
        })
    };

    let mut s = spec(Family::Gaussian);
    s.sigma = Some(1.3);
    push("gaussian", s.build(None).unwrap(), ParamSpace::EmbeddingTable(normal(&mut rng, n, 3, 0.7)), 0.0);
    let inputs = normal(&mut rng, n, 4, 1.0);
    push(
        "gaussian_linear_map",
        s.build(None).unwrap().with_inputs(inputs.clone()),
        ParamSpace::LinearMap(normal(&mut rng, 4, 2, 0.5)),
        0.0,
    );
    s.alpha = Some(0.3);
    push("gaussian_debiased", s.build(None).unwrap(), ParamSpace::EmbeddingTable(normal(&mut rng, n, 3, 0.7)), 0.0);

    for nu in [1.0, 3.5] {
        let mut s = spec(Family::StudentT);
        s.nu = Some(nu);
        push(&format!("student_t_nu{nu}"), s.build(None).unwrap(), ParamSpace::EmbeddingTable(normal(&mut rng, n, 2, 1.0)), 0.0);
    }

    let mut s = spec(Family::CosineGaussian);
    s.tau = Some(0.5);
    push("cosine_gaussian", s.build(None).unwrap(), ParamSpace::EmbeddingTable(normal(&mut rng, n, 3, 1.0)), 0.0);

    let cluster = spec(Family::Cluster).build(None).unwrap();
    push("cluster", cluster.clone(), ParamSpace::ClusterLogits(normal(&mut rng, n, 3, 1.0)), 0.0);
    push("cluster_entropy", cluster.clone(), ParamSpace::ClusterLogits(normal(&mut rng, n, 3, 1.0)), 1.0);
    push(
        "cluster_linear_head",
        cluster.clone().with_inputs(inputs),
        ParamSpace::LinearMap(normal(&mut rng, 4, 3, 0.8)),
        0.0,
    );
    push("cluster_debiased", cluster.with_debias(0.4), ParamSpace::ClusterLogits(normal(&mut rng, n, 3, 1.0)), 0.0);

    let mut edges = Vec::new();
    for i in 0..n {
        edges.push((i, (i + 1) % n, rng.random_range(0.5..2.0)));
        edges.push((i, (i + 3) % n, rng.random_range(0.5..2.0)));
    }
    let graph = NeighborGraph::undirected(n, &edges).unwrap();
    push(
        "degree_cluster",
        spec(Family::DegreeCluster).build(Some(&graph)).unwrap(),
        ParamSpace::ClusterLogits(normal(&mut rng, n, 2, 1.0)),
        0.0,
    );

    let classifier = |rng: &mut ChaCha20Rng| ParamSpace::Classifier {
        features: normal(rng, 8, 3, 1.0),
        prototypes: normal(rng, 4, 3, 1.0),
    };
    push("prototype_softmax", spec(Family::PrototypeSoftmax).build(None).unwrap(), classifier(&mut rng), 0.0);
    for (degree, sigma) in [(1, 0.5), (2, 0.1), (3, 0.3)] {
        let mut s = spec(Family::Harmonic);
        s.n = Some(degree);
        s.sigma = Some(sigma);
        push(&format!("harmonic_n{degree}"), s.build(None).unwrap(), classifier(&mut rng), 0.0);
    }

    let mut s = spec(Family::CrossModalCosine);
    s.tau = Some(0.5);
    s.modality = Some((0..n).map(|i| (i % 2) as u8).collect());
    push("cross_modal_cosine", s.build(None).unwrap(), ParamSpace::EmbeddingTable(normal(&mut rng, n, 3, 1.0)), 0.0);
    out
}

pub fn family_of(kernel: &Kernel) -> &'static str {
    match kernel {
        Kernel::Gaussian { .. } => "gaussian",
        Kernel::StudentT { .. } => "student_t",
        Kernel::CosineGaussian { .. } => "cosine_gaussian",
        Kernel::Cluster => "cluster",
        Kernel::DegreeCluster { .. } => "degree_cluster",
        Kernel::PrototypeSoftmax => "prototype_softmax",
        Kernel::Harmonic { .. } => "harmonic",
        Kernel::CrossModalCosine { .. } => "cross_modal_cosine",
    }
}

pub fn check(case: &Case, direction: Direction, seed: u64) -> GradCheckReport {
    let mut rng = restart_rng(seed, 1);
    let q = case.kernel.evaluate(&case.params).unwrap();
    let p = supervisory_like(&q, &mut rng);
    let objective = IconObjective::new(p, case.kernel.clone(), direction).with_entropy_weight(case.entropy_weight);
    let template = case.params.clone();
    finite_diff_check(
        |x| {
            let params = template.with_flat(x)?;
            let (v, g) = objective.value_and_grad(&params)?;
            Ok((v, g.to_flat()))
        },
        &case.params.to_flat(),
        FD_STEP,
        GRADIENT_TOL,
    )
    .unwrap()
}

/// Best total over every assignment of rows to distinct columns, by
/// enumerating permutations of the zero-padded square matrix.
pub fn brute_force_matching(w: &Array2<i64>) -> i64 {
    let n = w.nrows().max(w.ncols());
    let at = |i: usize, j: usize| if i < w.nrows() && j < w.ncols() { w[[i, j]] } else { 0 };
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = i64::MIN;
    permute(&mut perm, 0, &mut |p| {
        best = best.max((0..n).map(|i| at(i, p[i])).sum());
    });
    best
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Random confusion matrix of size up to `max × max` with entries in `0..10`.
pub fn random_confusion(rng: &mut ChaCha20Rng, max: usize) -> Array2<i64> {
    let r = rng.random_range(1..=max);
    let c = rng.random_range(1..=max);
    Array2::from_shape_simple_fn((r, c), || rng.random_range(0..10))
}

/// Predictions and labels realizing a confusion matrix.
pub fn labels_from_confusion(m: &Array2<i64>) -> (Vec<usize>, Vec<usize>) {
    let (mut pred, mut truth) = (Vec::new(), Vec::new());
    for ((i, j), &count) in m.indexed_iter() {
        for _ in 0..count {
            pred.push(i);
            truth.push(j);
        }
    }
    (pred, truth)
}

/// Violations of the debiasing contract on `p` over an increasing α grid.
pub fn debias_violations(p: &ConditionalDistribution, alphas: &[f64]) -> Vec<String> {
    use icon_core::distributions::debias_uniform;
    let mut bad = Vec::new();
    let n = p.n_rows();
    let mut prev: Option<Vec<f64>> = None;
    for &a in alphas {
        let d = debias_uniform(p, a).unwrap();
        for i in 0..n {
            let s: f64 = d.probs().row(i).sum();
            if (s - 1.0).abs() > 1e-12 {
                bad.push(format!("α={a} row {i} sums to {s}"));
            }
        }
        let h: Vec<f64> = (0..n).map(|i| d.row_entropy(i)).collect();
        if let Some(prev) = &prev {
            for i in 0..n {
                if h[i] < prev[i] - 1e-12 {
                    bad.push(format!("α={a} row {i} entropy fell from {} to {}", prev[i], h[i]));
                }
            }
        }
        prev = Some(h);
    }
    let u = debias_uniform(p, 1.0).unwrap();
    let support = if p.excludes_self() && p.is_square() { p.n_cols() - 1 } else { p.n_cols() };
    for ((i, j), &v) in u.probs().indexed_iter() {
        let expected = if p.excludes_self() && p.is_square() && i == j { 0.0 } else { 1.0 / support as f64 };
        if v != expected {
            bad.push(format!("α=1 entry ({i}, {j}) is {v}, not {expected}"));
        }
    }
    bad
}

/// Violations of support monotonicity of uniform-support walks.
pub fn walk_violations(p: &ConditionalDistribution, max_steps: usize) -> Vec<String> {
    use icon_core::distributions::{propagate_walks, WalkMode};
    let mut bad = Vec::new();
    let mut prev = propagate_walks(p, 1, WalkMode::UniformSupport).unwrap();
    for k in 2..=max_steps {
        let next = propagate_walks(p, k, WalkMode::UniformSupport).unwrap();
        for ((i, j), &v) in prev.probs().indexed_iter() {
            if v > 0.0 && next.get(i, j) == 0.0 {
                bad.push(format!("step {k} dropped ({i}, {j})"));
            }
        }
        prev = next;
    }
    bad
}

/// Random sparse row-stochastic matrix without self mass.
pub fn random_sparse(rng: &mut ChaCha20Rng, n: usize, density: f64) -> ConditionalDistribution {
    let mut w = Array2::zeros((n, n));
    for i in 0..n {
        let forced = (i + 1 + rng.random_range(0..n - 1)) % n;
        for j in 0..n {
            if j != i && (j == forced || rng.random::<f64>() < density) {
                w[[i, j]] = rng.random_range(0.1..1.0);
            }
        }
    }
    ConditionalDistribution::from_weights(w, true).unwrap()
}
