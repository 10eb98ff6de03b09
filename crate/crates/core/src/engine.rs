//! Shared dynamic program over representation distributions.
//!
//! Every layer `k` carries a set of representations (all of `R_k`, or a
//! sampled subset `R′_k`). Layer 1 turns an input into a distribution over
//! its set, and each later layer multiplies by a transition matrix whose
//! rows and columns are the sets of layers `k` and `k−1`. Sampled layers are
//! renormalized after propagation; full layers never are, so the exact DP is
//! the special case where every set is full.

use serde::{Deserialize, Serialize};

use crate::arch::{dot, norm, Matrix, WeightStack};
use crate::error::{Error, Result};
use crate::math::{erf, erf_prime};
use crate::repr::{rep_count, write_signs, SignVector};

/// Default budget on stored transition-matrix entries (2 GiB of f64).
pub const DEFAULT_MEMORY_BUDGET: u128 = 1 << 28;

/// Representations tracked at one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RepSet {
    /// Every sign vector of the layer, in lexicographic order.
    Full { width: usize },
    /// An ordered subset of distinct sign vectors.
    Sampled { width: usize, reps: Vec<SignVector> },
}

impl RepSet {
    pub fn width(&self) -> usize {
        match self {
            RepSet::Full { width } | RepSet::Sampled { width, .. } => *width,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            RepSet::Full { width } => rep_count(*width).expect("full set too wide to enumerate"),
            RepSet::Sampled { reps, .. } => reps.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_full(&self) -> bool {
        matches!(self, RepSet::Full { .. })
    }

    /// Writes the ±1.0 coordinates of member `j` into `out`.
    #[inline]
    pub fn write_member(&self, j: usize, out: &mut [f64]) {
        match self {
            RepSet::Full { .. } => write_signs(j, out),
            RepSet::Sampled { reps, .. } => reps[j].write_f64(out),
        }
    }

    /// Fills `out[j]` with `∏ᵢ q(sⁱ)` for every member `s`, where
    /// `q(−1) = q_minus[i]` and `q(+1) = q_plus[i]`.
    pub(crate) fn fill_products(&self, q_minus: &[f64], q_plus: &[f64], out: &mut [f64]) {
        match self {
            RepSet::Full { .. } => {
                out[0] = 1.0;
                let mut len = 1;
                for (qm, qp) in q_minus.iter().zip(q_plus) {
                    for j in (0..len).rev() {
                        let v = out[j];
                        out[2 * j + 1] = v * qp;
                        out[2 * j] = v * qm;
                    }
                    len *= 2;
                }
            }
            RepSet::Sampled { reps, .. } => {
                for (o, s) in out.iter_mut().zip(reps) {
                    *o = s
                        .entries()
                        .iter()
                        .zip(q_minus.iter().zip(q_plus))
                        .map(|(&e, (&qm, &qp))| if e > 0 { qp } else { qm })
                        .product();
                }
            }
        }
    }
}

/// Per-neuron sign probabilities `(Pr(−1), Pr(+1))` from erf arguments.
#[inline]
pub(crate) fn sign_probabilities(z: &[f64], q_minus: &mut [f64], q_plus: &mut [f64]) {
    for ((&zi, qm), qp) in z.iter().zip(q_minus.iter_mut()).zip(q_plus.iter_mut()) {
        let e = erf(zi);
        *qp = 0.5 + 0.5 * e;
        *qm = 0.5 - 0.5 * e;
    }
}

/// Column-major matrix of conditional representation probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub(crate) layer: usize,
    pub(crate) rows: usize,
    pub(crate) cols: usize,
    pub(crate) data: Vec<f64>,
}

impl TransitionMatrix {
    /// Layer index `k` (the matrix maps layer `k−1` to layer `k`).
    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Entry for row representation `r` (layer `k`) given column `c` (layer `k−1`).
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[c * self.rows + r]
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.data[c * self.rows..(c + 1) * self.rows]
    }

    /// `Ψ · p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        for (c, &pc) in p.iter().enumerate() {
            if pc != 0.0 {
                axpy(&mut out, pc, self.column(c));
            }
        }
        out
    }

    /// `hᵀ · Ψ`.
    pub fn apply_transpose(&self, h: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|c| dot(self.column(c), h)).collect()
    }

    pub(crate) fn build(
        layer: usize,
        weights: &Matrix,
        rows: &RepSet,
        cols: &RepSet,
    ) -> TransitionMatrix {
        let d_out = weights.rows();
        let d_in = weights.cols();
        let n_rows = rows.len();
        let n_cols = cols.len();
        let scale = 1.0 / (2.0 * d_in as f64).sqrt();
        let mut data = vec![0.0; n_rows * n_cols];
        let mut prev = vec![0.0; d_in];
        let mut z = vec![0.0; d_out];
        let mut qm = vec![0.0; d_out];
        let mut qp = vec![0.0; d_out];
        for (c, column) in data.chunks_exact_mut(n_rows).enumerate() {
            cols.write_member(c, &mut prev);
            for (i, zi) in z.iter_mut().enumerate() {
                *zi = dot(weights.row(i), &prev) * scale;
            }
            sign_probabilities(&z, &mut qm, &mut qp);
            rows.fill_products(&qm, &qp, column);
        }
        TransitionMatrix {
            layer,
            rows: n_rows,
            cols: n_cols,
            data,
        }
    }
}

#[inline]
fn axpy(out: &mut [f64], a: f64, x: &[f64]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += a * v;
    }
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// erf arguments of the leading layer, `W₁ⁱ·x / (√2‖x‖)`.
    pub(crate) z1: Vec<f64>,
    /// `1 / (√2‖x‖)`.
    pub(crate) x_scale: f64,
    /// Distributions `P₁ … P_L` (renormalized on sampled layers).
    pub(crate) layers: Vec<Vec<f64>>,
    /// Pre-normalization mass of each layer (1 for full layers).
    pub(crate) normalizers: Vec<f64>,
}

impl ForwardCache {
    pub fn distributions(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn into_distributions(self) -> Vec<Vec<f64>> {
        self.layers
    }

    /// `Pr(+1) − Pr(−1)` at the output layer.
    pub fn output(&self) -> f64 {
        let last = self.layers.last().expect("empty cache");
        last[1] - last[0]
    }
}

/// A weight stack with its representation sets and prebuilt transition matrices.
#[derive(Debug, Clone)]
pub struct DpNetwork {
    weights: WeightStack,
    sets: Vec<RepSet>,
    transitions: Vec<TransitionMatrix>,
}

impl DpNetwork {
    /// `sets[k−1]` is the set for layer `k`; the last must be the full output set.
    pub(crate) fn new(weights: WeightStack, sets: Vec<RepSet>, budget: u128) -> Result<Self> {
        let arch = weights.architecture();
        if sets.len() != arch.depth() {
            return Err(Error::ShapeMismatch(format!(
                "{} representation sets for {} layers",
                sets.len(),
                arch.depth()
            )));
        }
        for (k, set) in sets.iter().enumerate() {
            if set.width() != arch.width(k + 1) {
                return Err(Error::ShapeMismatch(format!(
                    "representation set of width {} for layer {} of width {}",
                    set.width(),
                    k + 1,
                    arch.width(k + 1)
                )));
            }
            if let RepSet::Sampled { reps, .. } = set {
                if reps.is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "layer {} has no sampled representations",
                        k + 1
                    )));
                }
                if reps.iter().any(|s| s.len() != set.width()) {
                    return Err(Error::ShapeMismatch(format!(
                        "sampled representation of wrong width at layer {}",
                        k + 1
                    )));
                }
            }
        }
        if !sets.last().unwrap().is_full() {
            return Err(Error::InvalidArgument("output layer must be full".into()));
        }
        let mut needed: u128 = 0;
        for k in 0..sets.len() {
            let rows = set_size(&sets[k])?;
            let cols = if k == 0 { 1 } else { set_size(&sets[k - 1])? };
            needed += rows * cols;
        }
        if needed > budget {
            return Err(Error::ResourceLimit { needed, budget });
        }
        let transitions = (1..sets.len())
            .map(|k| TransitionMatrix::build(k + 1, weights.layer(k + 1), &sets[k], &sets[k - 1]))
            .collect();
        Ok(Self {
            weights,
            sets,
            transitions,
        })
    }

    pub fn weights(&self) -> &WeightStack {
        &self.weights
    }

    pub fn sets(&self) -> &[RepSet] {
        &self.sets
    }

    /// `Ψ_k` for `k` in `2..=L`.
    pub fn transition(&self, k: usize) -> &TransitionMatrix {
        &self.transitions[k - 2]
    }

    pub fn transitions(&self) -> &[TransitionMatrix] {
        &self.transitions
    }

    /// Leading-layer distribution over `sets[0]` (unnormalized) and its erf arguments.
    pub(crate) fn leading(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let w1 = self.weights.layer(1);
        if x.len() != w1.cols() {
            return Err(Error::ShapeMismatch(format!(
                "input of dimension {} for a network expecting {}",
                x.len(),
                w1.cols()
            )));
        }
        let n = norm(x);
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        if !n.is_finite() {
            return Err(Error::NonFinite {
                context: "input".into(),
            });
        }
        let x_scale = 1.0 / (std::f64::consts::SQRT_2 * n);
        let d1 = w1.rows();
        let z1: Vec<f64> = (0..d1).map(|i| dot(w1.row(i), x) * x_scale).collect();
        let mut qm = vec![0.0; d1];
        let mut qp = vec![0.0; d1];
        sign_probabilities(&z1, &mut qm, &mut qp);
        let mut p = vec![0.0; self.sets[0].len()];
        self.sets[0].fill_products(&qm, &qp, &mut p);
        Ok((p, z1, x_scale))
    }

    /// Forward pass for a batch; every transition matrix is streamed once.
    pub fn forward_batch<X: AsRef<[f64]>>(&self, xs: &[X]) -> Result<Vec<ForwardCache>> {
        let mut caches = Vec::with_capacity(xs.len());
        for x in xs {
            let (mut p, z1, x_scale) = self.leading(x.as_ref())?;
            let s = normalize(&self.sets[0], &mut p, 1)?;
            caches.push(ForwardCache {
                z1,
                x_scale,
                layers: vec![p],
                normalizers: vec![s],
            });
        }
        for (t, psi) in self.transitions.iter().enumerate() {
            let k = t + 2;
            let mut outs = vec![vec![0.0; psi.rows]; caches.len()];
            for c in 0..psi.cols {
                let column = psi.column(c);
                for (out, cache) in outs.iter_mut().zip(&caches) {
                    let pc = cache.layers[k - 2][c];
                    if pc != 0.0 {
                        axpy(out, pc, column);
                    }
                }
            }
            for (mut out, cache) in outs.into_iter().zip(caches.iter_mut()) {
                let s = normalize(&self.sets[k - 1], &mut out, k)?;
                cache.layers.push(out);
                cache.normalizers.push(s);
            }
        }
        Ok(caches)
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardCache> {
        Ok(self.forward_batch(&[x])?.pop().unwrap())
    }

    pub fn output(&self, x: &[f64]) -> Result<f64> {
        Ok(self.forward(x)?.output())
    }

    pub fn outputs<X: AsRef<[f64]>>(&self, xs: &[X]) -> Result<Vec<f64>> {
        Ok(self.forward_batch(xs)?.iter().map(ForwardCache::output).collect())
    }

    fn check_cache(&self, x: &[f64], cache: &ForwardCache) -> Result<()> {
        if cache.layers.len() != self.sets.len()
            || cache.normalizers.len() != self.sets.len()
            || cache.z1.len() != self.weights.layer(1).rows()
            || x.len() != self.weights.layer(1).cols()
        {
            return Err(Error::CacheMismatch("layer count or widths differ".into()));
        }
        for (k, (p, set)) in cache.layers.iter().zip(&self.sets).enumerate() {
            if p.len() != set.len() {
                return Err(Error::CacheMismatch(format!(
                    "layer {} holds {} probabilities, expected {}",
                    k + 1,
                    p.len(),
                    set.len()
                )));
            }
        }
        Ok(())
    }

    /// Gradient of `Σₑ upstreamₑ · F(xₑ)` with respect to every weight.
    ///
    /// Transition-matrix sensitivities are summed over the batch before the
    /// (more expensive) chain rule into the weights, which is valid because
    /// the matrices do not depend on the input.
    pub fn backward_batch(&self, items: &[(&[f64], &ForwardCache, f64)]) -> Result<Vec<Matrix>> {
        for (x, cache, _) in items {
            self.check_cache(x, cache)?;
        }
        let depth = self.sets.len();
        let mut grads: Vec<Matrix> = self
            .weights
            .layers()
            .iter()
            .map(|m| Matrix::zeros(m.rows(), m.cols()))
            .collect();

        // Sensitivities w.r.t. the pre-normalization distribution of layer k.
        let mut hs: Vec<Vec<f64>> = items.iter().map(|&(_, _, u)| vec![-u, u]).collect();

        for k in (2..=depth).rev() {
            let psi = self.transition(k);
            let mut sens = vec![0.0; psi.rows * psi.cols];
            for (h, (_, cache, _)) in hs.iter().zip(items) {
                let prev = &cache.layers[k - 2];
                for (c, &pc) in prev.iter().enumerate() {
                    if pc != 0.0 {
                        axpy(&mut sens[c * psi.rows..(c + 1) * psi.rows], pc, h);
                    }
                }
            }
            let mut next = Vec::with_capacity(hs.len());
            for (h, (_, cache, _)) in hs.iter().zip(items) {
                let mut g = psi.apply_transpose(h);
                normalize_backward(&self.sets[k - 2], &cache.layers[k - 2], cache.normalizers[k - 2], &mut g);
                next.push(g);
            }
            hs = next;
            grads[k - 1] = transition_weight_gradient(
                self.weights.layer(k),
                &self.sets[k - 1],
                &self.sets[k - 2],
                &sens,
            );
        }

        let d1 = self.weights.layer(1).rows();
        let mut qm = vec![0.0; d1];
        let mut qp = vec![0.0; d1];
        let mut dz = vec![0.0; d1];
        let mut signs = vec![0.0; d1];
        let mut factors = vec![0.0; d1];
        let mut prefix = vec![0.0; d1 + 1];
        let mut suffix = vec![0.0; d1 + 1];
        for (h, &(x, cache, _)) in hs.iter().zip(items) {
            sign_probabilities(&cache.z1, &mut qm, &mut qp);
            dz.iter_mut().for_each(|v| *v = 0.0);
            for (r, &hr) in h.iter().enumerate() {
                if hr == 0.0 {
                    continue;
                }
                self.sets[0].write_member(r, &mut signs);
                accumulate_exclusion(&signs, &qm, &qp, hr, &mut factors, &mut prefix, &mut suffix, &mut dz);
            }
            let g1 = &mut grads[0];
            for (i, &dzi) in dz.iter().enumerate().take(d1) {
                let coeff = dzi * 0.5 * erf_prime(cache.z1[i]) * cache.x_scale;
                if coeff != 0.0 {
                    axpy(g1.row_mut(i), coeff, x);
                }
            }
        }

        for (k, g) in grads.iter().enumerate() {
            if !g.is_finite() {
                return Err(Error::NonFinite {
                    context: format!("gradient of layer {}", k + 1),
                });
            }
        }
        Ok(grads)
    }
}

fn set_size(set: &RepSet) -> Result<u128> {
    match set {
        RepSet::Full { width } => {
            if *width >= 64 {
                Err(Error::ResourceLimit {
                    needed: u128::MAX,
                    budget: DEFAULT_MEMORY_BUDGET,
                })
            } else {
                Ok(1u128 << width)
            }
        }
        RepSet::Sampled { reps, .. } => Ok(reps.len() as u128),
    }
}

/// Renormalizes sampled layers in place, returning the mass divided out.
fn normalize(set: &RepSet, p: &mut [f64], layer: usize) -> Result<f64> {
    if set.is_full() {
        return Ok(1.0);
    }
    let s: f64 = p.iter().sum();
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::DegenerateNormalizer { layer });
    }
    p.iter_mut().for_each(|v| *v /= s);
    Ok(s)
}

/// Maps `∂/∂P̃` to `∂/∂P` through `P̃ = P / ΣP` (no-op on full layers).
fn normalize_backward(set: &RepSet, normalized: &[f64], mass: f64, g: &mut [f64]) {
    if set.is_full() {
        return;
    }
    let mean = dot(g, normalized);
    g.iter_mut().for_each(|v| *v = (*v - mean) / mass);
}

/// Adds `weight · sⁱ · ∏_{j≠i} q(sʲ)` to `dz[i]` for every coordinate, using
/// prefix and suffix products so no factor is ever divided out.
#[allow(clippy::too_many_arguments)]
#[inline]
fn accumulate_exclusion(
    signs: &[f64],
    qm: &[f64],
    qp: &[f64],
    weight: f64,
    factors: &mut [f64],
    prefix: &mut [f64],
    suffix: &mut [f64],
    dz: &mut [f64],
) {
    let d = signs.len();
    for i in 0..d {
        factors[i] = if signs[i] > 0.0 { qp[i] } else { qm[i] };
    }
    prefix[0] = 1.0;
    for i in 0..d {
        prefix[i + 1] = prefix[i] * factors[i];
    }
    suffix[d] = 1.0;
    for i in (0..d).rev() {
        suffix[i] = suffix[i + 1] * factors[i];
    }
    for i in 0..d {
        dz[i] += weight * signs[i] * prefix[i] * suffix[i + 1];
    }
}

/// Chain rule from transition-entry sensitivities `sens` (column-major,
/// rows × cols) into the weights of that layer.
fn transition_weight_gradient(
    weights: &Matrix,
    rows: &RepSet,
    cols: &RepSet,
    sens: &[f64],
) -> Matrix {
    let d_out = weights.rows();
    let d_in = weights.cols();
    let n_rows = rows.len();
    let scale = 1.0 / (2.0 * d_in as f64).sqrt();
    let mut grad = Matrix::zeros(d_out, d_in);
    let mut prev = vec![0.0; d_in];
    let mut z = vec![0.0; d_out];
    let mut qm = vec![0.0; d_out];
    let mut qp = vec![0.0; d_out];
    let mut dz = vec![0.0; d_out];
    let mut signs = vec![0.0; d_out];
    let mut factors = vec![0.0; d_out];
    let mut prefix = vec![0.0; d_out + 1];
    let mut suffix = vec![0.0; d_out + 1];
    for (c, column) in sens.chunks_exact(n_rows).enumerate() {
        if column.iter().all(|&v| v == 0.0) {
            continue;
        }
        cols.write_member(c, &mut prev);
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = dot(weights.row(i), &prev) * scale;
        }
        sign_probabilities(&z, &mut qm, &mut qp);
        dz.iter_mut().for_each(|v| *v = 0.0);
        for (r, &g) in column.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            rows.write_member(r, &mut signs);
            accumulate_exclusion(&signs, &qm, &qp, g, &mut factors, &mut prefix, &mut suffix, &mut dz);
        }
        for i in 0..d_out {
            let coeff = dz[i] * 0.5 * erf_prime(z[i]) * scale;
            if coeff != 0.0 {
                axpy(grad.row_mut(i), coeff, &prev);
            }
        }
    }
    grad
}
