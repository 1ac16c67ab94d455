//! Full-batch gradient minimization with restarts, a step learning-rate
//! schedule and an optional parameter-space EMA teacher.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::ParamSpace;
use crate::loss::Objective;

pub use crate::kernels::simplex_params;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    Adam,
    Sgd,
}

fn default_lr() -> f64 {
    1e-3
}
fn default_betas() -> [f64; 2] {
    [0.9, 0.999]
}
fn default_epochs() -> usize {
    100
}
fn default_one() -> f64 {
    1.0
}
fn default_restarts() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    #[serde(default)]
    pub method: Method,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_betas")]
    pub betas: [f64; 2],
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_one")]
    pub lr_decay_factor: f64,
    /// Epochs between decays; no decay when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay_interval: Option<usize>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ema_momentum: Option<f64>,
    /// Weight of the mean row entropy of `q` added to the objective.
    #[serde(default)]
    pub entropy_weight: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Adam,
            learning_rate: default_lr(),
            betas: default_betas(),
            epochs: default_epochs(),
            lr_decay_factor: 1.0,
            decay_interval: None,
            restarts: 1,
            seed: 0,
            ema_momentum: None,
            entropy_weight: 0.0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate", format!("{} must be positive", self.learning_rate)));
        }
        if self.epochs < 1 {
            return Err(invalid("epochs", "must be at least 1"));
        }
        if self.restarts < 1 {
            return Err(invalid("restarts", "must be at least 1"));
        }
        if self.betas.iter().any(|b| !(0.0..1.0).contains(b)) {
            return Err(invalid("betas", format!("{:?} must lie in [0, 1)", self.betas)));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return Err(invalid("lr_decay_factor", format!("{} outside (0, 1]", self.lr_decay_factor)));
        }
        if self.decay_interval == Some(0) {
            return Err(invalid("decay_interval", "must be at least 1"));
        }
        if let Some(m) = self.ema_momentum {
            if !(0.0..1.0).contains(&m) {
                return Err(invalid("ema_momentum", format!("{m} outside [0, 1)")));
            }
        }
        if !(self.entropy_weight >= 0.0 && self.entropy_weight.is_finite()) {
            return Err(invalid("entropy_weight", format!("{} must be nonnegative", self.entropy_weight)));
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (zero-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.decay_interval {
            Some(k) => self.learning_rate * self.lr_decay_factor.powi((epoch / k) as i32),
            None => self.learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub restart: usize,
    /// Objective at the returned parameters; `None` if the restart diverged.
    pub final_loss: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainResult {
    pub params: ParamSpace,
    pub teacher: Option<ParamSpace>,
    /// Objective before each epoch's update, then once more at the end.
    pub trace: Vec<TraceEntry>,
    pub best_restart: usize,
    pub final_loss: f64,
    pub restarts: Vec<RestartOutcome>,
}

/// Per-restart random stream derived from `(seed, restart)`.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn normal_array(rows: usize, cols: usize, scale: f64, rng: &mut ChaCha20Rng) -> ndarray::Array2<f64> {
    ndarray::Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = StandardNormal.sample(rng);
        scale * z
    })
}

/// Cluster logits drawn from `0.01 · N(0, 1)`.
pub fn init_logits(n: usize, clusters: usize, rng: &mut ChaCha20Rng) -> ParamSpace {
    ParamSpace::ClusterLogits(normal_array(n, clusters, 0.01, rng))
}

/// Embedding table drawn from `1e-2 · N(0, 1)`.
pub fn init_embeddings(n: usize, dim: usize, rng: &mut ChaCha20Rng) -> ParamSpace {
    ParamSpace::EmbeddingTable(normal_array(n, dim, 1e-2, rng))
}

/// Random values of the same shape as `template`, at scale 1e-2.
pub fn init_like(template: &ParamSpace, rng: &mut ChaCha20Rng) -> ParamSpace {
    let mut out = template.clone();
    for a in out.arrays_mut() {
        let (r, c) = a.dim();
        *a = normal_array(r, c, 1e-2, rng);
    }
    out
}

/// Starting point for each restart.
pub enum Init<'a> {
    /// Every restart starts here.
    Fixed(ParamSpace),
    /// Seeded draw per restart.
    Random(Box<dyn Fn(&mut ChaCha20Rng) -> ParamSpace + Sync + 'a>),
}

impl Init<'_> {
    /// Random init shaped like `template`.
    pub fn like(template: ParamSpace) -> Init<'static> {
        Init::Random(Box::new(move |rng| init_like(&template, rng)))
    }
}

/// `momentum · teacher + (1 − momentum) · student`.
pub fn ema_update(teacher: &ParamSpace, student: &ParamSpace, momentum: f64) -> Result<ParamSpace> {
    if !teacher.same_shape(student) {
        return Err(Error::Shape("teacher and student differ in shape".into()));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(invalid("momentum", format!("{momentum} outside [0, 1)")));
    }
    let mut out = teacher.clone();
    for (t, s) in out.arrays_mut().into_iter().zip(student.arrays()) {
        t.zip_mut_with(s, |a, &b| *a = momentum * *a + (1.0 - momentum) * b);
    }
    Ok(out)
}

struct Run {
    params: ParamSpace,
    teacher: Option<ParamSpace>,
    trace: Vec<TraceEntry>,
    final_loss: f64,
}

fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::NonFinite(_))
}

fn run_restart<O: Objective + Clone>(objective: &O, start: ParamSpace, cfg: &OptimizerConfig) -> Result<Option<Run>> {
    let mut obj = objective.clone();
    let mut params = start;
    let mut teacher = cfg.ema_momentum.map(|_| params.clone());
    if let Some(t) = &teacher {
        obj.observe_teacher(t)?;
    }
    let mut m = params.zeros_like();
    let mut v = params.zeros_like();
    let [b1, b2] = cfg.betas;
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    macro_rules! eval {
        ($p:expr) => {
            match obj.value_and_grad($p) {
                Ok((l, g)) if l.is_finite() && g.is_finite() => (l, g),
                Ok(_) => return Ok(None),
                Err(e) if is_divergence(&e) => return Ok(None),
                Err(e) => return Err(e),
            }
        };
    }
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        let (loss, grad) = eval!(&params);
        trace.push(TraceEntry { epoch, loss, lr });
        match cfg.method {
            Method::Sgd => {
                for (p, g) in params.arrays_mut().into_iter().zip(grad.arrays()) {
                    p.scaled_add(-lr, g);
                }
            }
            Method::Adam => {
                let t = (epoch + 1) as i32;
                let (c1, c2) = (1.0 - b1.powi(t), 1.0 - b2.powi(t));
                let arrays = params.arrays_mut().into_iter().zip(grad.arrays()).zip(m.arrays_mut()).zip(v.arrays_mut());
                for (((p, g), mm), vv) in arrays {
                    ndarray::Zip::from(p).and(g).and(mm).and(vv).for_each(|p, &g, mm, vv| {
                        *mm = b1 * *mm + (1.0 - b1) * g;
                        *vv = b2 * *vv + (1.0 - b2) * g * g;
                        *p -= lr * (*mm / c1) / ((*vv / c2).sqrt() + 1e-8);
                    });
                }
            }
        }
        if !params.is_finite() {
            return Ok(None);
        }
        if let (Some(mom), Some(t)) = (cfg.ema_momentum, teacher.as_mut()) {
            *t = ema_update(t, &params, mom)?;
            obj.observe_teacher(t)?;
        }
    }
    let (final_loss, _) = eval!(&params);
    trace.push(TraceEntry {
        epoch: cfg.epochs,
        loss: final_loss,
        lr: cfg.lr_at(cfg.epochs),
    });
    Ok(Some(Run {
        params,
        teacher,
        trace,
        final_loss,
    }))
}

/// Minimizes `objective` from each restart's starting point and keeps the
/// lowest final objective (lowest restart index on ties). Restarts run in
/// parallel; each one is sequential and seeded by `(seed, restart)`.
pub fn minimize<O>(objective: &O, init: &Init<'_>, cfg: &OptimizerConfig) -> Result<TrainResult>
where
    O: Objective + Clone + Sync,
{
    cfg.validate()?;
    let runs: Vec<Result<Option<Run>>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let start = match init {
                Init::Fixed(p) => p.clone(),
                Init::Random(f) => f(&mut restart_rng(cfg.seed, r)),
            };
            run_restart(objective, start, cfg)
        })
        .collect();
    let mut best: Option<(usize, Run)> = None;
    let mut outcomes = Vec::with_capacity(cfg.restarts);
    for (r, run) in runs.into_iter().enumerate() {
        let run = run?;
        outcomes.push(RestartOutcome {
            restart: r,
            final_loss: run.as_ref().map(|x| x.final_loss),
        });
        if let Some(run) = run {
            if best.as_ref().is_none_or(|(_, b)| run.final_loss < b.final_loss) {
                best = Some((r, run));
            }
        }
    }
    let (best_restart, run) = best.ok_or(Error::AllRestartsDiverged(cfg.restarts))?;
    Ok(TrainResult {
        params: run.params,
        teacher: run.teacher,
        trace: run.trace,
        best_restart,
        final_loss: run.final_loss,
        restarts: outcomes,
    })
}
