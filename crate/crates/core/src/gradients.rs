//! Reverse-mode gradients of the aggregated output and of the bound objective.

use serde::{Deserialize, Serialize};

use crate::arch::{Matrix, WeightStack};
use crate::dataset::LabeledDataset;
use crate::engine::{DpNetwork, ForwardCache};
use crate::error::{Error, Result};
use crate::exact::ExactNetwork;
use crate::pacbayes::{batch_rows, kl_divergence, mean_linear_loss, objective_partials, BoundContext};

/// One gradient matrix per layer, shaped like the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientStack {
    layers: Vec<Matrix>,
}

impl GradientStack {
    pub fn zeros_like(weights: &WeightStack) -> Self {
        Self {
            layers: weights
                .layers()
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
        }
    }

    pub(crate) fn from_layers(layers: Vec<Matrix>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    /// Gradient of layer `k` (1-based).
    pub fn layer(&self, k: usize) -> &Matrix {
        &self.layers[k - 1]
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|m| m.as_slice().iter().copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Matrix::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|m| m.as_slice().iter())
            .fold(0.0, |a, &v| a.max(v.abs()))
    }

    /// `self += a · (w − p)` layerwise.
    fn add_scaled_difference(&mut self, a: f64, w: &WeightStack, p: &WeightStack) {
        for ((g, wl), pl) in self.layers.iter_mut().zip(w.layers()).zip(p.layers()) {
            for ((gv, &wv), &pv) in g
                .as_mut_slice()
                .iter_mut()
                .zip(wl.as_slice())
                .zip(pl.as_slice())
            {
                *gv += a * (wv - pv);
            }
        }
    }

    fn scale(&mut self, a: f64) {
        for g in &mut self.layers {
            g.as_mut_slice().iter_mut().for_each(|v| *v *= a);
        }
    }
}

/// `∂(upstream · F(x)) / ∂W` for the exact network.
pub fn backward(weights: &WeightStack, x: &[f64], upstream: f64) -> Result<GradientStack> {
    let net = ExactNetwork::new(weights.clone())?;
    let cache = net.dp().forward(x)?;
    backward_with_cache(net.dp(), x, &cache, upstream)
}

/// Same as [`backward`] on any network, reusing a forward cache.
pub fn backward_with_cache(
    net: &DpNetwork,
    x: &[f64],
    cache: &ForwardCache,
    upstream: f64,
) -> Result<GradientStack> {
    Ok(GradientStack::from_layers(net.backward_batch(&[(x, cache, upstream)])?))
}

/// Outputs on a batch together with `∂(Σₑ upstreamₑ·F(xₑ))/∂W`, where the
/// upstream values are produced from the outputs.
pub fn batch_output_gradient<U>(
    net: &DpNetwork,
    batch: &LabeledDataset,
    upstream: U,
) -> Result<(Vec<f64>, GradientStack)>
where
    U: Fn(&[f64]) -> Vec<f64>,
{
    let rows = batch_rows(batch);
    let caches = net.forward_batch(&rows)?;
    let outputs: Vec<f64> = caches.iter().map(ForwardCache::output).collect();
    let ups = upstream(&outputs);
    let items: Vec<(&[f64], &ForwardCache, f64)> = rows
        .iter()
        .zip(&caches)
        .zip(&ups)
        .map(|((&x, c), &u)| (x, c, u))
        .collect();
    let grads = GradientStack::from_layers(net.backward_batch(&items)?);
    Ok((outputs, grads))
}

/// Gradient of the mean linear loss on a batch; `∂ℓ/∂F = −y/2` per example.
pub fn loss_gradient(net: &DpNetwork, batch: &LabeledDataset) -> Result<(f64, GradientStack)> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset("loss gradient".into()));
    }
    let m = batch.len() as f64;
    let (outputs, grads) = batch_output_gradient(net, batch, |_| {
        batch.labels().iter().map(|&y| -0.5 * f64::from(y) / m).collect()
    })?;
    Ok((mean_linear_loss(&outputs, batch)?, grads))
}

/// Objective value, its pieces, and its gradient in `(W, C)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGradient {
    pub value: f64,
    pub batch_loss: f64,
    pub kl: f64,
    pub weights: GradientStack,
    /// `∂O/∂C`.
    pub d_c: f64,
}

pub fn objective_gradient_dp(
    net: &DpNetwork,
    prior: &WeightStack,
    batch: &LabeledDataset,
    c: f64,
    ctx: &BoundContext,
) -> Result<ObjectiveGradient> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!("C = {c} is not positive and finite")));
    }
    let weights = net.weights();
    let kl = kl_divergence(weights, prior)?;
    let (batch_loss, mut grads) = loss_gradient(net, batch)?;
    let partials = objective_partials(batch_loss, kl, ctx, c);
    grads.scale(partials.d_loss);
    grads.add_scaled_difference(partials.d_kl, weights, prior);
    for (k, g) in grads.layers().iter().enumerate() {
        if !g.is_finite() {
            return Err(Error::NonFinite {
                context: format!("objective gradient of layer {}", k + 1),
            });
        }
    }
    if !partials.value.is_finite() || !partials.d_c.is_finite() {
        return Err(Error::NonFinite {
            context: format!(
                "objective {} or its C-derivative {} (loss {batch_loss}, KL {kl}, C {c})",
                partials.value, partials.d_c
            ),
        });
    }
    Ok(ObjectiveGradient {
        value: partials.value,
        batch_loss,
        kl,
        weights: grads,
        d_c: partials.d_c,
    })
}

/// Gradient of the bound objective of the exact network on a batch.
pub fn objective_gradient(
    weights: &WeightStack,
    prior: &WeightStack,
    batch: &LabeledDataset,
    c: f64,
    n: usize,
    delta: f64,
) -> Result<(GradientStack, f64)> {
    let ctx = BoundContext::new(n, delta)?;
    let net = ExactNetwork::new(weights.clone())?;
    let g = objective_gradient_dp(net.dp(), prior, batch, c, &ctx)?;
    Ok((g.weights, g.d_c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteDifferenceReport {
    pub max_abs_error: f64,
    /// Relative deviation, where entries smaller than `abs_floor / tolerance`
    /// are judged against `abs_floor` instead of their magnitude.
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub coordinates: usize,
    pub passed: bool,
}

/// Central differences of `f` in every weight coordinate, compared with `analytic`.
pub fn finite_difference_check<F>(
    f: F,
    weights: &WeightStack,
    analytic: &GradientStack,
    h: f64,
    tolerance: f64,
    abs_floor: f64,
) -> Result<FiniteDifferenceReport>
where
    F: Fn(&WeightStack) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("step must be positive".into()));
    }
    let flat = analytic.flat();
    if flat.len() != weights.param_count() {
        return Err(Error::ShapeMismatch("gradient does not match the weights".into()));
    }
    let mut probe = weights.clone();
    let mut report = FiniteDifferenceReport {
        max_abs_error: 0.0,
        max_rel_error: 0.0,
        worst_index: 0,
        coordinates: flat.len(),
        passed: true,
    };
    let scale_floor = abs_floor / tolerance;
    for (i, &a) in flat.iter().enumerate() {
        let w0 = weights.flat_get(i);
        probe.flat_set(i, w0 + h);
        let fp = f(&probe)?;
        probe.flat_set(i, w0 - h);
        let fm = f(&probe)?;
        probe.flat_set(i, w0);
        let numeric = (fp - fm) / (2.0 * h);
        let abs = (a - numeric).abs();
        let rel = abs / a.abs().max(numeric.abs()).max(scale_floor);
        report.max_abs_error = report.max_abs_error.max(abs);
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_index = i;
        }
    }
    report.passed = report.max_rel_error <= tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::Architecture;
    use crate::exact::aggregate_output;
    use crate::math::TWO_OVER_SQRT_PI;

    #[test]
    fn zero_weights_single_layer() {
        let arch = Architecture::new(vec![2, 1]).unwrap();
        let w = WeightStack::zeros(&arch);
        let x = [3.0, -4.0];
        let g = backward(&w, &x, 1.0).unwrap();
        let scale = TWO_OVER_SQRT_PI / (2f64.sqrt() * 5.0);
        assert!((g.layer(1).get(0, 0) - 3.0 * scale).abs() < 1e-15);
        assert!((g.layer(1).get(0, 1) + 4.0 * scale).abs() < 1e-15);
    }

    #[test]
    fn constant_function_has_zero_deviation() {
        let arch = Architecture::new(vec![2, 2, 1]).unwrap();
        let w = WeightStack::zeros(&arch);
        let g = GradientStack::zeros_like(&w);
        let r = finite_difference_check(|_| Ok(3.0), &w, &g, 1e-5, 1e-4, 1e-8).unwrap();
        assert_eq!(r.max_abs_error, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn single_entry_function_is_indicator() {
        let arch = Architecture::new(vec![2, 2, 1]).unwrap();
        let w = WeightStack::zeros(&arch);
        let mut g = GradientStack::zeros_like(&w);
        g.layers[1].set(0, 1, 1.0);
        let r = finite_difference_check(|s| Ok(s.layer(2).get(0, 1)), &w, &g, 1e-3, 1e-10, 1e-12)
            .unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn small_net_matches_differences() {
        let w = WeightStack::new(vec![
            Matrix::from_rows(&[vec![0.3, -0.8, 0.5], vec![1.1, 0.2, -0.4]]).unwrap(),
            Matrix::from_rows(&[vec![0.9, -1.2], vec![0.1, 0.7]]).unwrap(),
            Matrix::from_rows(&[vec![-0.6, 1.4]]).unwrap(),
        ])
        .unwrap();
        let x = [0.4, -1.0, 2.0];
        let g = backward(&w, &x, 1.0).unwrap();
        let r = finite_difference_check(|s| aggregate_output(s, &x), &w, &g, 1e-5, 1e-4, 1e-8)
            .unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn prior_fixed_point() {
        let arch = Architecture::new(vec![2, 2, 1]).unwrap();
        let w = WeightStack::zeros(&arch);
        // Zero weights output 0 everywhere, and a balanced batch makes the
        // loss gradient cancel.
        let batch = LabeledDataset::from_rows(&[vec![1.0, 0.5], vec![1.0, 0.5]], vec![1, -1]).unwrap();
        let (g, _) = objective_gradient(&w, &w, &batch, 2.0, 100, 0.05).unwrap();
        assert!(g.max_abs() < 1e-12);
    }
}
