//! Parameter initialization, reverse-mode gradients, training and scoring
//! of single graphs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{compute_stats_for, Dataset, FeatureStats, InputStats};
use crate::graph::{Graph, NodeOp, ParamId, Params, SemanticType, Task};
use crate::graph::{Batch, Program};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Upper bound accepted for `epochs`.
    pub epoch_cap: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            learning_rate: 0.01,
            epochs: 30,
            seed: 0,
            optimizer: Optimizer::Adam,
            epoch_cap: 100_000,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive and finite".into()));
        }
        if self.epochs > self.epoch_cap {
            return Err(Error::Config(format!(
                "{} epochs exceeds the cap of {}",
                self.epochs, self.epoch_cap
            )));
        }
        Ok(())
    }
}

/// Scores used to rank graphs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    CrossEntropy,
    Rmse,
    Aic,
    Bic,
}

impl Criterion {
    /// The task's own loss: cross-entropy for classifiers, RMSE for regressors.
    pub fn task_loss(task: Task) -> Self {
        match task {
            Task::Classifier => Criterion::CrossEntropy,
            Task::Regressor => Criterion::Rmse,
        }
    }

    pub fn supports(self, task: Task) -> bool {
        !matches!(
            (self, task),
            (Criterion::CrossEntropy, Task::Regressor) | (Criterion::Rmse, Task::Classifier)
        )
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Criterion::CrossEntropy => "cross_entropy",
            Criterion::Rmse => "rmse",
            Criterion::Aic => "aic",
            Criterion::Bic => "bic",
        })
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross_entropy" => Ok(Criterion::CrossEntropy),
            "rmse" => Ok(Criterion::Rmse),
            "aic" => Ok(Criterion::Aic),
            "bic" => Ok(Criterion::Bic),
            _ => Err(Error::InvalidInput(format!("unknown criterion `{s}`"))),
        }
    }
}

/// Sets register scalings from `stats` and draws fresh trainable values.
///
/// Numerical registers map the training `[min, max]` onto `[-1, 1]` with
/// `w = 1, b = 0`; categorical registers get a zero weight per training
/// category and a zero bias; `linear` nodes and the output register get
/// `w ~ U(-0.5, 0.5)` and `b = 0`.
pub fn init_params(graph: &Graph, stats: &InputStats, seed: u64) -> Result<Graph> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = graph.clone();
    let order = graph.topo_order()?;
    for id in order {
        let node = out.nodes.iter_mut().find(|n| n.id == id).expect("ordered id exists");
        node.params = match &node.op {
            NodeOp::InputRegister { feature, stype } => match (stype, stats.get(feature)) {
                (_, None) => return Err(Error::MissingFeature(feature.clone())),
                (SemanticType::Numerical, Some(FeatureStats::Numerical { min, max, .. })) => {
                    if min == max {
                        log::warn!("feature `{feature}` is constant in training data; it encodes to a constant");
                    }
                    Params::Scaling { min: *min, max: *max, w: 1.0, b: 0.0 }
                }
                (SemanticType::Categorical, Some(FeatureStats::Categorical { frequencies })) => Params::Categorical {
                    weights: frequencies.keys().map(|c| (c.clone(), 0.0)).collect(),
                    bias: 0.0,
                },
                (stype, Some(_)) => {
                    return Err(Error::Type(format!("statistics of `{feature}` do not match its {stype} register")))
                }
            },
            NodeOp::Interaction { kind, .. } if kind.param_count() > 0 => Params::Affine {
                w: rng.random_range(-0.5..0.5),
                b: 0.0,
            },
            NodeOp::Interaction { .. } => Params::Empty,
            NodeOp::OutputRegister { .. } => Params::Affine {
                w: rng.random_range(-0.5..0.5),
                b: 0.0,
            },
        };
    }
    out.train_loss = None;
    out.unusable = false;
    Ok(out)
}

/// Mean binary cross-entropy (classifier) or mean squared error (regressor).
pub fn loss(task: Task, y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} targets, {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::InvalidInput("loss of an empty set".into()));
    }
    let terms = y_true.iter().zip(y_pred).map(|(&y, &p)| pointwise_loss(task, y, p));
    let mut total = 0.0;
    for t in terms {
        total += t?;
    }
    Ok(total / y_true.len() as f64)
}

/// Loss of a single prediction.
pub fn pointwise_loss(task: Task, y: f64, p: f64) -> Result<f64> {
    match task {
        Task::Classifier => {
            if y != 0.0 && y != 1.0 {
                return Err(Error::InvalidInput(format!("classifier target {y} is not 0 or 1")));
            }
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::InvalidInput(format!("probability {p} is outside (0, 1)")));
            }
            Ok(-(y * p.ln() + (1.0 - y) * (1.0 - p).ln()))
        }
        Task::Regressor => {
            if !y.is_finite() || !p.is_finite() {
                return Err(Error::InvalidInput("non-finite regression value".into()));
            }
            Ok((p - y) * (p - y))
        }
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Loss and its derivative with respect to the output pre-activation.
fn loss_from_logit(task: Task, z: f64, y: f64) -> (f64, f64) {
    match task {
        // BCE of σ(z), written in terms of z so it stays finite when σ saturates.
        Task::Classifier => (softplus(z) - y * z, logistic_unclamped(z) - y),
        Task::Regressor => ((z - y) * (z - y), 2.0 * (z - y)),
    }
}

fn logistic_unclamped(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean training loss and its gradient at `params`.
fn objective(program: &Program, params: &[f64], batch: &Batch) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; params.len()];
    let mut values = Vec::with_capacity(program.steps.len());
    let mut adjoint = Vec::with_capacity(program.steps.len());
    let n = batch.len() as f64;
    let mut total = 0.0;
    for i in 0..batch.len() {
        let row = batch.row(i);
        let z = program
            .forward_with(params, row, &mut values)
            .map_err(|e| e.at_sample(batch.rows[i]))?;
        let (l, dz) = loss_from_logit(program.task, z, batch.targets[i]);
        total += l;
        program.backward_with(params, row, &values, dz / n, &mut grad, &mut adjoint);
    }
    Ok((total / n, grad))
}

fn is_numerical_failure(e: &Error) -> bool {
    match e {
        Error::Singular { .. } | Error::NonFinite { .. } => true,
        Error::Sample { source, .. } => is_numerical_failure(source),
        _ => false,
    }
}

fn bind_training(graph: &Graph, train: &Dataset) -> Result<(Program, Batch)> {
    let target = graph
        .target()
        .ok_or_else(|| Error::InvalidGraph("no output register".into()))?
        .to_string();
    if train.column(&target).is_none() {
        return Err(Error::MissingFeature(target));
    }
    let program = Program::compile(graph)?;
    let batch = program.bind_dataset(train, Some(&target))?;
    if batch.len() == 0 {
        return Err(Error::InvalidInput("no complete rows to fit on".into()));
    }
    Ok((program, batch))
}

/// Exact gradient of the mean task loss over `data` with respect to every
/// trainable parameter. Frozen register scalings are not included.
pub fn gradient(graph: &Graph, data: &Dataset) -> Result<BTreeMap<ParamId, f64>> {
    let (program, batch) = bind_training(graph, data)?;
    let (_, grad) = objective(&program, &program.params, &batch)?;
    Ok(program.param_ids.iter().cloned().zip(grad).collect())
}

/// Mean task loss of `graph` over the complete rows of `data`.
pub fn training_loss(graph: &Graph, data: &Dataset) -> Result<f64> {
    let (program, batch) = bind_training(graph, data)?;
    Ok(objective(&program, &program.params, &batch)?.0)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::BETA1 * self.m[i] + (1.0 - Self::BETA1) * grad[i];
            self.v[i] = Self::BETA2 * self.v[i] + (1.0 - Self::BETA2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Trains `graph` on `train`; initializes it first from the training
/// statistics when it has no parameters yet.
///
/// A graph that cannot be evaluated at its starting parameters comes back
/// with `unusable` set. If an optimizer step lands on a singular point, the
/// last evaluable parameters are kept and training stops.
pub fn fit_graph(graph: &Graph, train: &Dataset, config: &FitConfig) -> Result<Graph> {
    Ok(fit_graph_with_history(graph, train, config)?.0)
}

/// As [`fit_graph`], also returning the training loss before each epoch
/// followed by the final loss.
pub fn fit_graph_with_history(graph: &Graph, train: &Dataset, config: &FitConfig) -> Result<(Graph, Vec<f64>)> {
    config.validate()?;
    let graph = if graph.is_initialized() {
        graph.clone()
    } else {
        let names: Vec<String> = graph.inputs().into_keys().collect();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        let stats = compute_stats_for(train, &names)?;
        init_params(graph, &stats, config.seed)?
    };
    fit_initialized(graph, train, config)
}

pub(crate) fn fit_initialized(mut graph: Graph, train: &Dataset, config: &FitConfig) -> Result<(Graph, Vec<f64>)> {
    let (program, batch) = bind_training(&graph, train)?;
    let mut params = program.params.clone();
    let mut history = Vec::with_capacity(config.epochs + 1);
    let (mut current, mut grad) = match objective(&program, &params, &batch) {
        Ok(v) => v,
        Err(e) if is_numerical_failure(&e) => {
            log::debug!("graph unusable at initial parameters: {e}");
            graph.unusable = true;
            graph.train_loss = None;
            return Ok((graph, history));
        }
        Err(e) => return Err(e),
    };
    let mut adam = Adam::new(params.len());
    for _ in 0..config.epochs {
        history.push(current);
        let mut next = params.clone();
        match config.optimizer {
            Optimizer::Adam => adam.step(&mut next, &grad, config.learning_rate),
            Optimizer::Sgd => {
                for (p, g) in next.iter_mut().zip(&grad) {
                    *p -= config.learning_rate * g;
                }
            }
        }
        match objective(&program, &next, &batch) {
            Ok((l, g)) => {
                params = next;
                current = l;
                grad = g;
            }
            Err(e) if is_numerical_failure(&e) => {
                log::debug!("stopping fit at a singular step: {e}");
                break;
            }
            Err(e) => return Err(e),
        }
    }
    history.push(current);
    program.write_back(&mut graph, &params)?;
    graph.train_loss = Some(current);
    graph.unusable = false;
    Ok((graph, history))
}

/// Predictions for every row of `data`, in row order.
#[derive(Clone, Debug, PartialEq)]
pub struct Predictions {
    /// Rows that could be evaluated (no missing inputs).
    pub rows: Vec<usize>,
    pub values: Vec<f64>,
    /// Target values of those rows, when the target column is present.
    pub targets: Option<Vec<f64>>,
    pub unseen_categories: usize,
}

/// Evaluates `graph` on every complete row of `data`.
pub fn predict(graph: &Graph, data: &Dataset) -> Result<Predictions> {
    let program = Program::compile(graph)?;
    let target = graph.target().filter(|t| data.column(t).is_some());
    let batch = program.bind_dataset(data, target)?;
    let mut values = Vec::with_capacity(batch.len());
    let mut scratch = Vec::new();
    for i in 0..batch.len() {
        let z = program
            .forward_with(&program.params, batch.row(i), &mut scratch)
            .map_err(|e| e.at_sample(batch.rows[i]))?;
        values.push(program.finish(z));
    }
    Ok(Predictions {
        rows: batch.rows,
        values,
        targets: target.map(|_| batch.targets),
        unseen_categories: batch.unseen,
    })
}

pub fn aic(k: usize, log_likelihood: f64) -> f64 {
    2.0 * k as f64 - 2.0 * log_likelihood
}

pub fn bic(k: usize, n: usize, log_likelihood: f64) -> f64 {
    k as f64 * (n as f64).ln() - 2.0 * log_likelihood
}

/// Scores a fitted graph on `data`.
///
/// The log-likelihood behind AIC/BIC is `-n·BCE` for classifiers and the
/// Gaussian `-n/2·(ln(2π·MSE) + 1)` for regressors.
pub fn criterion_value(graph: &Graph, data: &Dataset, criterion: Criterion) -> Result<f64> {
    if !criterion.supports(graph.task) {
        return Err(Error::IncompatibleCriterion {
            criterion: criterion.to_string(),
            task: graph.task.to_string(),
        });
    }
    let (program, batch) = bind_training(graph, data)?;
    let (mean_loss, _) = objective(&program, &program.params, &batch)?;
    Ok(score_from_loss(graph.task, criterion, mean_loss, graph.param_count(), batch.len()))
}

pub(crate) fn score_from_loss(task: Task, criterion: Criterion, mean_loss: f64, k: usize, n: usize) -> f64 {
    let log_likelihood = match task {
        Task::Classifier => -(n as f64) * mean_loss,
        Task::Regressor => -(n as f64) / 2.0 * ((2.0 * std::f64::consts::PI * mean_loss).ln() + 1.0),
    };
    match criterion {
        Criterion::CrossEntropy => mean_loss,
        Criterion::Rmse => mean_loss.sqrt(),
        Criterion::Aic => aic(k, log_likelihood),
        Criterion::Bic => bic(k, n, log_likelihood),
    }
}
