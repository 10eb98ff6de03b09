//! Depth-independent form `F(x) = H · P₁(x)`.
//!
//! Every layer after the first only contributes an input-independent linear
//! map, so folding `[−1, +1] · Ψ_L ⋯ Ψ₂` into a head vector leaves a network
//! whose inference cost does not depend on the source depth.
//!
//! The stochastic variant has a per-layer renormalization, which is not
//! linear. Renormalization is scale invariant, though, so all of it can be
//! deferred to the end: the model keeps a second folded vector (the mass of
//! the last hidden layer as a function of `P′₁`) and divides by it at predict
//! time.

use serde::{Deserialize, Serialize};

use crate::arch::{dot, norm, Architecture, Matrix, WeightStack, DEFAULT_WIDTH_CAP};
use crate::engine::{sign_probabilities, RepSet, TransitionMatrix};
use crate::error::{Error, Result};
use crate::stochastic::SampledRepresentationSets;

/// Expected output of layers `2 … L` for each leading-layer representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactHead {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactModel {
    pub w1: Matrix,
    pub head: CompactHead,
    /// Folded mass of the last hidden layer; present only for sampled models.
    pub normalizer: Option<Vec<f64>>,
    /// Leading-layer representations the head is indexed by.
    pub leading: RepSet,
    pub source_architecture: Architecture,
    pub source_fingerprint: String,
}

/// `[−1, +1]` as a head over the output layer's two representations.
fn output_row() -> Vec<f64> {
    vec![-1.0, 1.0]
}

/// Folds `[−1, +1] · Ψ_L ⋯ Ψ₂` right to left with vector–matrix products.
pub fn compact_head(weights: &WeightStack) -> Result<CompactHead> {
    let arch = weights.architecture();
    arch.check_exact(DEFAULT_WIDTH_CAP)?;
    let mut h = output_row();
    for k in (2..=weights.depth()).rev() {
        let psi = TransitionMatrix::build(
            k,
            weights.layer(k),
            &RepSet::Full { width: arch.width(k) },
            &RepSet::Full { width: arch.width(k - 1) },
        );
        h = psi.apply_transpose(&h);
    }
    Ok(CompactHead { values: h })
}

pub fn compact_model(weights: &WeightStack) -> Result<CompactModel> {
    let head = compact_head(weights)?;
    Ok(CompactModel {
        w1: weights.layer(1).clone(),
        head,
        normalizer: None,
        leading: RepSet::Full {
            width: weights.layer(1).rows(),
        },
        source_architecture: weights.architecture(),
        source_fingerprint: weights.fingerprint(),
    })
}

/// Compact form of the stochastic network with frozen sets.
pub fn compact_stochastic(
    weights: &WeightStack,
    sets: &SampledRepresentationSets,
) -> Result<CompactModel> {
    let arch = weights.architecture();
    if sets.layers.len() + 1 != arch.depth() {
        return Err(Error::ShapeMismatch(format!(
            "{} sampled sets for {} hidden layers",
            sets.layers.len(),
            arch.depth() - 1
        )));
    }
    if sets.is_full() {
        return compact_model(weights);
    }
    let all = sets.all_layers();
    let depth = arch.depth();
    let mut num = output_row();
    let mut den = vec![1.0; all[depth - 2].len()];
    for k in (2..=depth).rev() {
        let psi = TransitionMatrix::build(k, weights.layer(k), &all[k - 1], &all[k - 2]);
        num = psi.apply_transpose(&num);
        if k < depth {
            den = psi.apply_transpose(&den);
        }
        rescale_pair(&mut num, &mut den);
    }
    if !den.iter().any(|&v| v > 0.0) {
        return Err(Error::DegenerateNormalizer { layer: 1 });
    }
    Ok(CompactModel {
        w1: weights.layer(1).clone(),
        head: CompactHead { values: num },
        normalizer: Some(den),
        leading: all[0].clone(),
        source_architecture: arch,
        source_fingerprint: weights.fingerprint(),
    })
}

/// Multiplies both vectors by the power of two that brings `max(den)` near 1;
/// exact in floating point, and the prediction only depends on their ratio.
fn rescale_pair(num: &mut [f64], den: &mut [f64]) {
    let m = den.iter().copied().fold(0.0, f64::max);
    if m > 0.0 && m.is_finite() {
        let exp = m.log2().floor() as i32;
        if exp != 0 {
            let f = 2f64.powi(-exp);
            num.iter_mut().for_each(|v| *v *= f);
            den.iter_mut().for_each(|v| *v *= f);
        }
    }
}

impl CompactModel {
    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn is_stochastic(&self) -> bool {
        self.normalizer.is_some()
    }

    /// Probabilities of the leading-layer representations in `self.leading`
    /// (unnormalized when the set is sampled).
    pub fn leading_distribution(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.w1.cols() {
            return Err(Error::ShapeMismatch(format!(
                "input of dimension {} for a model expecting {}",
                x.len(),
                self.w1.cols()
            )));
        }
        let n = norm(x);
        if n == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let scale = 1.0 / (std::f64::consts::SQRT_2 * n);
        let d1 = self.w1.rows();
        let z: Vec<f64> = (0..d1).map(|i| dot(self.w1.row(i), x) * scale).collect();
        let mut qm = vec![0.0; d1];
        let mut qp = vec![0.0; d1];
        sign_probabilities(&z, &mut qm, &mut qp);
        let mut p = vec![0.0; self.leading.len()];
        self.leading.fill_products(&qm, &qp, &mut p);
        Ok(p)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let p = self.leading_distribution(x)?;
        let num = dot(&self.head.values, &p);
        match &self.normalizer {
            None => Ok(num),
            Some(den) => {
                let d = dot(den, &p);
                if !(d > 0.0) || !d.is_finite() {
                    return Err(Error::DegenerateNormalizer { layer: 1 });
                }
                Ok(num / d)
            }
        }
    }

    /// Stored reals: `W₁`, the head and (if any) the normalizer.
    pub fn stored_reals(&self) -> usize {
        self.w1.as_slice().len()
            + self.head.values.len()
            + self.normalizer.as_ref().map_or(0, Vec::len)
    }
}

pub fn compact_predict(model: &CompactModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}
