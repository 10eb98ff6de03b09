//! Linear loss, the Gaussian-posterior KL term and the Catoni-style bound
//!
//! `B(C) = (1 − exp(−C·L̂ − (KL + ln(2√n/δ))/n)) / (1 − e^{−C})`,
//!
//! which doubles as the training objective with a minibatch `L̂`.

use serde::{Deserialize, Serialize};

use crate::arch::WeightStack;
use crate::compact::CompactModel;
use crate::dataset::LabeledDataset;
use crate::engine::DpNetwork;
use crate::error::{Error, Result};
use crate::exact::ExactNetwork;
use crate::stochastic::StochasticNetwork;

pub const DEFAULT_DELTA: f64 = 0.05;
pub const C_GRID_MIN: f64 = 1e-4;
pub const C_GRID_MAX: f64 = 1e4;
const C_GRID_POINTS: usize = 161;
const GOLDEN_REL_TOL: f64 = 1e-8;

/// Anything that maps an input to a real output in `[−1, 1]`.
pub trait Predictor {
    fn predict(&self, x: &[f64]) -> Result<f64>;

    fn predict_all(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        data.iter().map(|(x, _)| self.predict(x)).collect()
    }
}

impl<F: Fn(&[f64]) -> Result<f64>> Predictor for F {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        self(x)
    }
}

/// Inputs per forward batch when predicting a whole dataset.
const PREDICT_CHUNK: usize = 256;

fn dp_predict_all(net: &DpNetwork, data: &LabeledDataset) -> Result<Vec<f64>> {
    let rows = batch_rows(data);
    let mut out = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(PREDICT_CHUNK) {
        out.extend(net.outputs(chunk)?);
    }
    Ok(out)
}

impl Predictor for DpNetwork {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.output(x)
    }

    fn predict_all(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        dp_predict_all(self, data)
    }
}

impl Predictor for ExactNetwork {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.output(x)
    }

    fn predict_all(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        dp_predict_all(self.dp(), data)
    }
}

impl Predictor for StochasticNetwork {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.output(x)
    }

    fn predict_all(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        dp_predict_all(self.dp(), data)
    }
}

impl Predictor for CompactModel {
    fn predict(&self, x: &[f64]) -> Result<f64> {
        CompactModel::predict(self, x)
    }
}

pub fn linear_loss(y_pred: f64, y: i8) -> f64 {
    0.5 * (1.0 - f64::from(y) * y_pred)
}

/// Mean linear loss of `predictions` against the dataset labels.
pub fn mean_linear_loss(predictions: &[f64], data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("empirical loss".into()));
    }
    if predictions.len() != data.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions for {} examples",
            predictions.len(),
            data.len()
        )));
    }
    let total: f64 = predictions
        .iter()
        .zip(data.labels())
        .map(|(&p, &y)| linear_loss(p, y))
        .sum();
    Ok(total / data.len() as f64)
}

pub fn empirical_loss<P: Predictor + ?Sized>(predictor: &P, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset("empirical loss".into()));
    }
    mean_linear_loss(&predictor.predict_all(data)?, data)
}

/// `½ Σ_k ‖W_k − W_k^p‖²`.
pub fn kl_divergence(weights: &WeightStack, prior: &WeightStack) -> Result<f64> {
    if !weights.same_shape(prior) {
        return Err(Error::ShapeMismatch(
            "weights and prior have different shapes".into(),
        ));
    }
    let mut total = 0.0;
    for (w, p) in weights.layers().iter().zip(prior.layers()) {
        for (a, b) in w.as_slice().iter().zip(p.as_slice()) {
            let d = a - b;
            total += d * d;
        }
    }
    Ok(0.5 * total)
}

/// Sample size and confidence of the certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundContext {
    pub n: usize,
    pub delta: f64,
}

impl BoundContext {
    pub fn new(n: usize, delta: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("bound needs n ≥ 1".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument(format!("delta {delta} is not in (0, 1)")));
        }
        Ok(Self { n, delta })
    }

    /// `ln(2√n / δ)`.
    pub fn confidence_term(&self) -> f64 {
        (2.0 * (self.n as f64).sqrt() / self.delta).ln()
    }

    /// `(KL + ln(2√n/δ)) / n`.
    pub fn complexity(&self, kl: f64) -> f64 {
        (kl + self.confidence_term()) / self.n as f64
    }
}

pub fn pac_bayes_bound(emp_loss: f64, kl: f64, ctx: &BoundContext, c: f64) -> f64 {
    let a = c * emp_loss + ctx.complexity(kl);
    -(-a).exp_m1() / -(-c).exp_m1()
}

/// Value of the bound and its partial derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectivePartials {
    pub value: f64,
    pub d_loss: f64,
    pub d_kl: f64,
    pub d_c: f64,
}

pub fn objective_partials(emp_loss: f64, kl: f64, ctx: &BoundContext, c: f64) -> ObjectivePartials {
    let a = c * emp_loss + ctx.complexity(kl);
    let num = -(-a).exp_m1();
    let den = -(-c).exp_m1();
    let ea = (-a).exp();
    let ec = (-c).exp();
    ObjectivePartials {
        value: num / den,
        d_loss: c * ea / den,
        d_kl: ea / (ctx.n as f64 * den),
        d_c: (emp_loss * ea * den - num * ec) / (den * den),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub empirical_loss: f64,
    pub kl: f64,
    pub c_star: f64,
    pub bound_value: f64,
}

/// Log grid over `C ∈ [1e−4, 1e4]`, then golden-section search in `ln C`
/// around the best grid point.
pub fn optimal_bound(emp_loss: f64, kl: f64, ctx: &BoundContext) -> BoundReport {
    let f = |t: f64| pac_bayes_bound(emp_loss, kl, ctx, t.exp());
    let lo = C_GRID_MIN.ln();
    let hi = C_GRID_MAX.ln();
    let step = (hi - lo) / (C_GRID_POINTS - 1) as f64;
    let grid: Vec<f64> = (0..C_GRID_POINTS).map(|i| lo + step * i as f64).collect();
    let (best_i, best_v) = grid
        .iter()
        .map(|&t| f(t))
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let a = grid[best_i.saturating_sub(1)];
    let b = grid[(best_i + 1).min(C_GRID_POINTS - 1)];
    let (t_ref, v_ref) = golden_section(f, a, b);
    let (t, v) = if v_ref < best_v {
        (t_ref, v_ref)
    } else {
        (grid[best_i], best_v)
    };
    BoundReport {
        empirical_loss: emp_loss,
        kl,
        c_star: t.exp(),
        bound_value: v,
    }
}

/// Minimizes a unimodal `f` on `[a, b]` until the bracket's relative width
/// in `C = e^t` (equal to the width in `t`) is below the tolerance.
fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - inv_phi * (b - a);
    let mut x2 = a + inv_phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while (b - a) > GOLDEN_REL_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// The bound with the minibatch loss of the exact network plugged in.
pub fn training_objective(
    weights: &WeightStack,
    prior: &WeightStack,
    batch: &LabeledDataset,
    c: f64,
    ctx: &BoundContext,
) -> Result<f64> {
    let net = ExactNetwork::new(weights.clone())?;
    let loss = mean_linear_loss(&net.outputs(&batch_rows(batch))?, batch)?;
    let kl = kl_divergence(weights, prior)?;
    Ok(pac_bayes_bound(loss, kl, ctx, c))
}

pub(crate) fn batch_rows(data: &LabeledDataset) -> Vec<&[f64]> {
    data.iter().map(|(x, _)| x).collect()
}
