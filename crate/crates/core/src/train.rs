//! Adam on the bound objective (or the plain linear loss) with early
//! stopping and best-snapshot selection.
//!
//! All randomness derives from `TrainConfig::seed` through separate ChaCha
//! streams, and every reduction runs in a fixed order, so a run is a pure
//! function of its configuration and data.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::arch::{Architecture, Matrix, WeightStack};
use crate::dataset::LabeledDataset;
use crate::data::split_indices;
use crate::engine::DpNetwork;
use crate::error::{Error, Result};
use crate::exact::{bam_forward, sgn, ExactNetwork};
use crate::gradients::{loss_gradient, objective_gradient_dp};
use crate::pacbayes::{
    empirical_loss, kl_divergence, optimal_bound, pac_bayes_bound, BoundContext, BoundReport,
    Predictor, DEFAULT_DELTA,
};
use crate::stochastic::{sample_representations, SampledRepresentationSets, StochasticNetwork};

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_SETS: u64 = 2;
const STREAM_EVAL_SETS: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Minimize the PAC-Bayes bound jointly over the weights and `C`.
    Bound,
    /// Minimize the empirical linear loss; select on a validation split.
    Loss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ForwardMode {
    Exact,
    /// Sampled representation sets of this size, redrawn for every batch.
    Stochastic { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub objective: Objective,
    pub forward: ForwardMode,
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub delta: f64,
    /// Fraction held out for model selection; `None` means 0.2 in loss
    /// mode and 0 in bound mode.
    pub validation_fraction: Option<f64>,
    /// Standard deviation of the initialization; `None` means `1/√d_{k−1}`.
    #[serde(default)]
    pub init_sd: Option<f64>,
}

impl TrainConfig {
    pub fn new(architecture: Architecture, objective: Objective) -> Self {
        Self {
            architecture,
            objective,
            forward: ForwardMode::Exact,
            learning_rate: 0.01,
            epochs: 100,
            patience: 20,
            batch_size: 32,
            seed: 0,
            delta: DEFAULT_DELTA,
            validation_fraction: None,
            init_sd: None,
        }
    }

    pub fn effective_validation_fraction(&self) -> f64 {
        self.validation_fraction.unwrap_or(match self.objective {
            Objective::Bound => 0.0,
            Objective::Loss => 0.2,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad(format!("learning rate {} is not a non-negative number", self.learning_rate));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive".into());
        }
        if self.patience == 0 || self.patience > self.epochs {
            return bad(format!("patience {} is not in 1..={}", self.patience, self.epochs));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta {} is not in (0, 1)", self.delta));
        }
        let vf = self.effective_validation_fraction();
        if !(0.0..1.0).contains(&vf) {
            return bad(format!("validation fraction {vf} is not in [0, 1)"));
        }
        if let Some(sd) = self.init_sd {
            if !(sd > 0.0 && sd.is_finite()) {
                return bad(format!("initialization standard deviation {sd} is not positive"));
            }
        }
        if let ForwardMode::Stochastic { samples: 0 } = self.forward {
            return bad("stochastic forward needs at least one sample".into());
        }
        Ok(())
    }
}

/// Entries `~ N(0, 1/d_{k−1})` per layer; the standard deviation is `1/√d_{k−1}`.
pub fn init_weights(arch: &Architecture, seed: u64) -> WeightStack {
    init_weights_with(arch, seed, None)
}

/// As [`init_weights`], with a fixed standard deviation for every layer when given.
pub fn init_weights_with(arch: &Architecture, seed: u64, sd: Option<f64>) -> WeightStack {
    let mut rng = stream(seed, STREAM_INIT);
    let w = arch.widths();
    let layers = w
        .windows(2)
        .map(|p| {
            let sd = sd.unwrap_or(1.0 / (p[0] as f64).sqrt());
            let normal = Normal::new(0.0, sd).expect("positive standard deviation");
            let data = (0..p[0] * p[1]).map(|_| normal.sample(&mut rng)).collect();
            Matrix::from_vec(p[1], p[0], data).expect("consistent shape")
        })
        .collect();
    WeightStack::new(layers).expect("valid architecture")
}

/// Adam moments with bias correction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} parameters, {} gradients, {} optimizer slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            context: format!("gradient entry {i}"),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (v_hat.sqrt() + state.epsilon);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean minibatch objective over the epoch.
    pub objective: f64,
    pub train_loss: f64,
    pub kl: f64,
    /// Certificate at the optimal `C` for the current weights.
    pub bound: f64,
    /// Learned `C` (bound mode) or the optimal one (loss mode).
    pub c: f64,
    pub validation_loss: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainingHistory {
    /// The early-stop metric of a record under `objective`.
    pub fn metric(record: &EpochRecord, objective: Objective) -> f64 {
        match objective {
            Objective::Bound => record.bound,
            Objective::Loss => record.validation_loss.unwrap_or(record.train_loss),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub weights: WeightStack,
    pub c: f64,
    pub prior: WeightStack,
    pub history: TrainingHistory,
    /// Frozen sets used for evaluation in stochastic mode.
    pub eval_sets: Option<SampledRepresentationSets>,
    pub best_epoch: usize,
    /// Certificate of the returned weights on the training part.
    pub report: BoundReport,
    pub context: BoundContext,
    /// Examples used for fitting (the rest, if any, was the validation split).
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
}

/// Network for the given weights: exact, or restricted to `sets`.
pub fn build_network(weights: &WeightStack, sets: Option<&SampledRepresentationSets>) -> Result<DpNetwork> {
    match sets {
        None => Ok(ExactNetwork::new(weights.clone())?.into_dp()),
        Some(s) => Ok(StochasticNetwork::new(weights.clone(), s)?.into_dp()),
    }
}

struct Snapshot {
    flat: Vec<f64>,
    epoch: usize,
    metric: f64,
}

fn diverged(epoch: usize, batch: usize, e: Error) -> Error {
    match e {
        Error::NonFinite { context } => Error::Diverged {
            epoch,
            batch,
            detail: context,
        },
        Error::DegenerateNormalizer { layer } => Error::Diverged {
            epoch,
            batch,
            detail: format!("all sampled representations of layer {layer} have zero probability"),
        },
        other => other,
    }
}

pub fn train(config: &TrainConfig, data: &LabeledDataset) -> Result<TrainOutcome> {
    config.validate()?;
    if data.dim() != config.architecture.input_dim() {
        return Err(Error::ShapeMismatch(format!(
            "data of dimension {} for an architecture expecting {}",
            data.dim(),
            config.architecture.input_dim()
        )));
    }
    if let Some(i) = data.first_zero_norm() {
        return Err(Error::InvalidArgument(format!("example {i} has zero norm")));
    }
    let vf = config.effective_validation_fraction();
    let (train_idx, val_idx) = if vf > 0.0 {
        split_indices(data.len(), 1.0 - vf, config.seed)?
    } else {
        ((0..data.len()).collect(), Vec::new())
    };
    if train_idx.is_empty() {
        return Err(Error::EmptyDataset("training split".into()));
    }
    let train_set = data.subset(&train_idx);
    let val_set = (!val_idx.is_empty()).then(|| data.subset(&val_idx));
    let ctx = BoundContext::new(train_set.len(), config.delta)?;

    let arch = &config.architecture;
    let prior = init_weights_with(arch, config.seed, config.init_sd);
    let mut weights = prior.clone();
    let eval_sets = match config.forward {
        ForwardMode::Exact => {
            arch.check_exact(crate::arch::DEFAULT_WIDTH_CAP)?;
            None
        }
        ForwardMode::Stochastic { samples } => {
            let seed = stream(config.seed, STREAM_EVAL_SETS).random();
            Some(sample_representations(arch, samples, seed)?)
        }
    };

    let initial_loss = empirical_loss(&build_network(&weights, eval_sets.as_ref())?, &train_set)?;
    let mut c = optimal_bound(initial_loss, 0.0, &ctx).c_star;

    let n_weights = weights.param_count();
    let bound_mode = config.objective == Objective::Bound;
    let mut adam = AdamState::new(n_weights + usize::from(bound_mode));
    let mut params = weights.flat();
    if bound_mode {
        params.push(c.ln());
    }

    let mut shuffle_rng = stream(config.seed, STREAM_SHUFFLE);
    let mut sets_rng = stream(config.seed, STREAM_SETS);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = TrainingHistory::default();
    let mut best: Option<Snapshot> = None;
    let start = Instant::now();
    let mut grads = vec![0.0; params.len()];

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut objective_sum = 0.0;
        let mut batches = 0usize;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = train_set.subset(chunk);
            let sets = match config.forward {
                ForwardMode::Exact => None,
                ForwardMode::Stochastic { samples } => {
                    Some(sample_representations(arch, samples, sets_rng.random())?)
                }
            };
            let net = build_network(&weights, sets.as_ref())?;
            let value = if bound_mode {
                let g = objective_gradient_dp(&net, &prior, &batch, c, &ctx)
                    .map_err(|e| diverged(epoch, b, e))?;
                grads[..n_weights].copy_from_slice(&g.weights.flat());
                grads[n_weights] = g.d_c * c;
                g.value
            } else {
                let (loss, g) = loss_gradient(&net, &batch).map_err(|e| diverged(epoch, b, e))?;
                grads.copy_from_slice(&g.flat());
                loss
            };
            if !value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    batch: b,
                    detail: format!("objective is {value}"),
                });
            }
            objective_sum += value;
            batches += 1;
            adam_step(&mut params, &grads, &mut adam, config.learning_rate)
                .map_err(|e| diverged(epoch, b, e))?;
            weights.assign_flat(&params[..n_weights])?;
            if bound_mode {
                c = params[n_weights].exp();
            }
        }

        let eval_net = build_network(&weights, eval_sets.as_ref())?;
        let train_loss = empirical_loss(&eval_net, &train_set)?;
        let kl = kl_divergence(&weights, &prior)?;
        let report = optimal_bound(train_loss, kl, &ctx);
        let validation_loss = match &val_set {
            Some(v) => Some(empirical_loss(&eval_net, v)?),
            None => None,
        };
        let record = EpochRecord {
            epoch,
            objective: objective_sum / batches as f64,
            train_loss,
            kl,
            bound: report.bound_value,
            c: if bound_mode { c } else { report.c_star },
            validation_loss,
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        let metric = TrainingHistory::metric(&record, config.objective);
        if !metric.is_finite() {
            return Err(Error::Diverged {
                epoch,
                batch: batches,
                detail: format!("early-stop metric is {metric}"),
            });
        }
        history.records.push(record);
        if best.as_ref().is_none_or(|s| metric < s.metric) {
            best = Some(Snapshot {
                flat: params.clone(),
                epoch,
                metric,
            });
        }
        if epoch - best.as_ref().unwrap().epoch >= config.patience {
            break;
        }
    }

    let best = best.expect("at least one epoch");
    weights.assign_flat(&best.flat[..n_weights])?;
    let c = if bound_mode {
        best.flat[n_weights].exp()
    } else {
        history.records[best.epoch - 1].c
    };
    let eval_net = build_network(&weights, eval_sets.as_ref())?;
    let report = optimal_bound(
        empirical_loss(&eval_net, &train_set)?,
        kl_divergence(&weights, &prior)?,
        &ctx,
    );
    Ok(TrainOutcome {
        weights,
        c,
        prior,
        history,
        eval_sets,
        best_epoch: best.epoch,
        report,
        context: ctx,
        train_indices: train_idx,
        validation_indices: val_idx,
    })
}

/// Bound objective at a given `C` on the full training set.
pub fn objective_at(outcome: &TrainOutcome, data: &LabeledDataset) -> Result<f64> {
    let net = build_network(&outcome.weights, outcome.eval_sets.as_ref())?;
    let loss = empirical_loss(&net, data)?;
    let kl = kl_divergence(&outcome.weights, &outcome.prior)?;
    Ok(pac_bayes_bound(loss, kl, &outcome.context, outcome.c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub examples: usize,
    pub linear_loss: f64,
    /// Misclassification rate of `sgn(F(x))`, with `sgn(0) = +1`.
    pub error_rate_aggregate: f64,
    /// Misclassification rate of the deterministic sign network at the posterior mean.
    pub error_rate_map: Option<f64>,
    pub bound: Option<BoundReport>,
}

/// Metrics of `predictor` on `data`; the MAP error needs the posterior mean
/// and the bound needs a context with the KL term.
pub fn evaluate<P: Predictor + ?Sized>(
    predictor: &P,
    data: &LabeledDataset,
    map_weights: Option<&WeightStack>,
    bound: Option<(&BoundContext, f64)>,
) -> Result<EvalMetrics> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("evaluation".into()));
    }
    let outputs = predictor.predict_all(data)?;
    let n = data.len() as f64;
    let mut loss = 0.0;
    let mut wrong = 0usize;
    for (&f, &y) in outputs.iter().zip(data.labels()) {
        loss += crate::pacbayes::linear_loss(f, y);
        if sgn(f) != f64::from(y) {
            wrong += 1;
        }
    }
    let linear_loss = loss / n;
    let error_rate_map = map_weights.map(|w| {
        let wrong = data.iter().filter(|(x, y)| bam_forward(w, x) != *y).count();
        wrong as f64 / n
    });
    Ok(EvalMetrics {
        examples: data.len(),
        linear_loss,
        error_rate_aggregate: wrong as f64 / n,
        error_rate_map,
        bound: bound.map(|(ctx, kl)| optimal_bound(linear_loss, kl, ctx)),
    })
}
