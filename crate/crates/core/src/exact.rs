//! Exact aggregation output by propagating distributions over every
//! representation, plus the two reference forward passes it is compared
//! against: the deterministic MAP network and the PBGNet mean-field recursion.

use crate::arch::{dot, norm, Matrix, WeightStack, DEFAULT_WIDTH_CAP};
use crate::engine::{sign_probabilities, DpNetwork, ForwardCache, RepSet, DEFAULT_MEMORY_BUDGET};
use crate::error::{Error, Result};
use crate::math::erf;
use crate::repr::write_signs;

pub use crate::engine::TransitionMatrix;

/// Distribution over the representations of layer `k`, lexicographically indexed.
#[derive(Debug, Clone, PartialEq)]
pub struct RepDistribution {
    pub layer: usize,
    pub probabilities: Vec<f64>,
}

impl RepDistribution {
    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

/// `Pr(sgn(v·a) = s)` for `v ~ N(w, I)`.
pub fn neuron_sign_probability(w: &[f64], a: &[f64], a_norm: f64, s: i8) -> Result<f64> {
    if !(a_norm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    if s != 1 && s != -1 {
        return Err(Error::InvalidArgument(format!("sign {s} is not ±1")));
    }
    let e = erf(dot(w, a) / (std::f64::consts::SQRT_2 * a_norm));
    Ok(0.5 + 0.5 * f64::from(s) * e)
}

/// `P₁(x)` over all `2^{d₁}` leading-layer representations.
pub fn leading_layer_distribution(w1: &Matrix, x: &[f64]) -> Result<RepDistribution> {
    if x.len() != w1.cols() {
        return Err(Error::ShapeMismatch(format!(
            "input of dimension {} for W₁ with {} columns",
            x.len(),
            w1.cols()
        )));
    }
    let n = norm(x);
    if n == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let d1 = w1.rows();
    check_enumerable(1, d1)?;
    let scale = 1.0 / (std::f64::consts::SQRT_2 * n);
    let z: Vec<f64> = (0..d1).map(|i| dot(w1.row(i), x) * scale).collect();
    let mut qm = vec![0.0; d1];
    let mut qp = vec![0.0; d1];
    sign_probabilities(&z, &mut qm, &mut qp);
    let set = RepSet::Full { width: d1 };
    let mut p = vec![0.0; set.len()];
    set.fill_products(&qm, &qp, &mut p);
    Ok(RepDistribution {
        layer: 1,
        probabilities: p,
    })
}

/// `Ψ_k` for weights `W_k` of shape `d_k × d_prev`.
pub fn transition_matrix(wk: &Matrix, d_prev: usize) -> Result<TransitionMatrix> {
    if wk.cols() != d_prev {
        return Err(Error::ShapeMismatch(format!(
            "W_k has {} columns but the previous layer has width {d_prev}",
            wk.cols()
        )));
    }
    check_enumerable(0, wk.rows())?;
    check_enumerable(0, d_prev)?;
    Ok(TransitionMatrix::build(
        0,
        wk,
        &RepSet::Full { width: wk.rows() },
        &RepSet::Full { width: d_prev },
    ))
}

fn check_enumerable(layer: usize, width: usize) -> Result<()> {
    if width > DEFAULT_WIDTH_CAP {
        Err(Error::WidthCap {
            layer,
            width,
            cap: DEFAULT_WIDTH_CAP,
        })
    } else {
        Ok(())
    }
}

/// The exact aggregation network: all `Ψ_k` built once from the weights.
#[derive(Debug, Clone)]
pub struct ExactNetwork {
    inner: DpNetwork,
}

impl ExactNetwork {
    pub fn new(weights: WeightStack) -> Result<Self> {
        Self::with_limits(weights, DEFAULT_WIDTH_CAP, DEFAULT_MEMORY_BUDGET)
    }

    /// `cap` bounds each layer width, `budget` the number of stored matrix entries.
    pub fn with_limits(weights: WeightStack, cap: usize, budget: u128) -> Result<Self> {
        let arch = weights.architecture();
        arch.check_exact(cap)?;
        let sets = arch.widths()[1..]
            .iter()
            .map(|&width| RepSet::Full { width })
            .collect();
        Ok(Self {
            inner: DpNetwork::new(weights, sets, budget)?,
        })
    }

    pub fn weights(&self) -> &WeightStack {
        self.inner.weights()
    }

    pub fn dp(&self) -> &DpNetwork {
        &self.inner
    }

    pub fn into_dp(self) -> DpNetwork {
        self.inner
    }

    pub fn transition(&self, k: usize) -> &TransitionMatrix {
        self.inner.transition(k)
    }

    pub fn propagate(&self, x: &[f64]) -> Result<Vec<RepDistribution>> {
        Ok(self
            .inner
            .forward(x)?
            .into_distributions()
            .into_iter()
            .enumerate()
            .map(|(k, probabilities)| RepDistribution {
                layer: k + 1,
                probabilities,
            })
            .collect())
    }

    pub fn output(&self, x: &[f64]) -> Result<f64> {
        self.inner.output(x)
    }

    pub fn outputs<X: AsRef<[f64]>>(&self, xs: &[X]) -> Result<Vec<f64>> {
        self.inner.outputs(xs)
    }

    pub fn forward_batch<X: AsRef<[f64]>>(&self, xs: &[X]) -> Result<Vec<ForwardCache>> {
        self.inner.forward_batch(xs)
    }
}

/// `P₁ … P_L` for input `x`.
pub fn propagate(weights: &WeightStack, x: &[f64]) -> Result<Vec<RepDistribution>> {
    ExactNetwork::new(weights.clone())?.propagate(x)
}

/// `F_{A(B)}(x) = Pr(F^L = +1) − Pr(F^L = −1)`.
pub fn aggregate_output(weights: &WeightStack, x: &[f64]) -> Result<f64> {
    ExactNetwork::new(weights.clone())?.output(x)
}

/// `sgn(x) = −1` if `x < 0`, `+1` otherwise.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Deterministic output of the single BAM `B` (the MAP network when `B = B_M`).
pub fn bam_forward(weights: &WeightStack, x: &[f64]) -> i8 {
    let mut a: Vec<f64> = x.to_vec();
    for w in weights.layers() {
        a = w.mul_vec(&a).into_iter().map(sgn).collect();
    }
    a[0] as i8
}

/// PBGNet forward pass: per-layer expectations only, treating neurons of the
/// previous layer as independent.
pub fn pbgnet_forward(weights: &WeightStack, x: &[f64]) -> Result<f64> {
    let arch = weights.architecture();
    arch.check_exact(DEFAULT_WIDTH_CAP)?;
    let n = norm(x);
    if n == 0.0 {
        return Err(Error::ZeroNorm);
    }
    if x.len() != arch.input_dim() {
        return Err(Error::ShapeMismatch("input dimension".into()));
    }
    let scale = 1.0 / (std::f64::consts::SQRT_2 * n);
    let mut f: Vec<f64> = weights
        .layer(1)
        .mul_vec(x)
        .into_iter()
        .map(|v| erf(v * scale))
        .collect();
    for k in 2..=weights.depth() {
        let w = weights.layer(k);
        let d_prev = w.cols();
        let s_scale = 1.0 / (2.0 * d_prev as f64).sqrt();
        let mut next = vec![0.0; w.rows()];
        let mut s = vec![0.0; d_prev];
        for idx in 0..(1usize << d_prev) {
            write_signs(idx, &mut s);
            let weight: f64 = s
                .iter()
                .zip(&f)
                .map(|(&si, &fi)| 0.5 + 0.5 * si * fi)
                .product();
            for (j, nj) in next.iter_mut().enumerate() {
                *nj += erf(dot(w.row(j), &s) * s_scale) * weight;
            }
        }
        f = next;
    }
    Ok(f[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::Architecture;
    use crate::math::erf;

    fn stack(rows: &[&[&[f64]]]) -> WeightStack {
        WeightStack::new(
            rows.iter()
                .map(|m| Matrix::from_rows(&m.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_neuron_probabilities() {
        assert_eq!(neuron_sign_probability(&[1.0, -1.0], &[1.0, 1.0], 2f64.sqrt(), 1).unwrap(), 0.5);
        // w·a / (√2‖a‖) = 1
        let a = [1.0, 0.0];
        let w = [std::f64::consts::SQRT_2, 3.0];
        let p = neuron_sign_probability(&w, &a, 1.0, 1).unwrap();
        assert!((p - 0.9213503964748574).abs() < 1e-15);
        let q = neuron_sign_probability(&w, &a, 1.0, -1).unwrap();
        assert!((p + q - 1.0).abs() < 1e-15);
        assert!(matches!(neuron_sign_probability(&w, &a, 0.0, 1), Err(Error::ZeroNorm)));
    }

    #[test]
    fn sign_flip_equals_weight_flip() {
        let w = [0.3, -1.2, 0.7];
        let neg: Vec<f64> = w.iter().map(|v| -v).collect();
        let a = [0.5, 0.1, -2.0];
        let n = norm(&a);
        let lhs = neuron_sign_probability(&w, &a, n, -1).unwrap();
        let rhs = neuron_sign_probability(&neg, &a, n, 1).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn leading_layer_known_values() {
        let w1 = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let p = leading_layer_distribution(&w1, &[1.0, 2.0]).unwrap();
        assert_eq!(p.probabilities, vec![0.5, 0.5]);

        let w1 = Matrix::from_rows(&[vec![std::f64::consts::SQRT_2, 0.0]]).unwrap();
        let p = leading_layer_distribution(&w1, &[1.0, 0.0]).unwrap();
        assert!((p.probabilities[0] - 0.07864960352514257).abs() < 1e-15);
        assert!((p.probabilities[1] - 0.9213503964748574).abs() < 1e-15);

        assert!(matches!(
            leading_layer_distribution(&w1, &[0.0, 0.0]),
            Err(Error::ZeroNorm)
        ));
    }

    #[test]
    fn transition_zero_weights_and_scalar_case() {
        let psi = transition_matrix(&Matrix::zeros(1, 2), 2).unwrap();
        assert_eq!((psi.rows(), psi.cols()), (2, 4));
        for r in 0..2 {
            for c in 0..4 {
                assert_eq!(psi.get(r, c), 0.5);
            }
        }
        let c = 0.8;
        let psi = transition_matrix(&Matrix::from_rows(&[vec![c]]).unwrap(), 1).unwrap();
        let e = erf(c / 2f64.sqrt());
        assert!((psi.get(0, 1) - (0.5 - 0.5 * e)).abs() < 1e-16);
        assert!((psi.get(1, 1) - (0.5 + 0.5 * e)).abs() < 1e-16);
        assert!((psi.get(1, 0) - (0.5 - 0.5 * e)).abs() < 1e-16);
        assert!(transition_matrix(&Matrix::zeros(1, 2), 3).is_err());
    }

    #[test]
    fn single_layer_output_is_erf() {
        let w = stack(&[&[&[0.7, -0.2, 1.1]]]);
        let x = [0.3, 1.0, -0.4];
        let expected = erf(dot(w.layer(1).row(0), &x) / (2f64.sqrt() * norm(&x)));
        let dists = propagate(&w, &x).unwrap();
        assert_eq!(dists.len(), 1);
        assert!((aggregate_output(&w, &x).unwrap() - expected).abs() < 1e-15);
        assert!((pbgnet_forward(&w, &x).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_weights_are_uniform() {
        let arch = Architecture::new(vec![3, 2, 3, 1]).unwrap();
        let w = WeightStack::zeros(&arch);
        let x = [1.0, 0.0, 2.0];
        for p in propagate(&w, &x).unwrap() {
            let u = 1.0 / p.probabilities.len() as f64;
            assert!(p.probabilities.iter().all(|&v| (v - u).abs() < 1e-15));
        }
        assert_eq!(aggregate_output(&w, &x).unwrap(), 0.0);
        assert_eq!(bam_forward(&w, &x), 1);
    }

    #[test]
    fn bam_forward_signs() {
        let w = stack(&[&[&[1.0, 0.0]]]);
        assert_eq!(bam_forward(&w, &[0.5, 1.0]), 1);
        assert_eq!(bam_forward(&w, &[-0.5, 1.0]), -1);
        let w = stack(&[&[&[1.0, 0.0], &[0.0, -1.0]], &[&[1.0, 1.0]]]);
        assert_eq!(bam_forward(&w, &[-1.0, 1.0]), -1);
    }

    #[test]
    fn width_cap_enforced() {
        let arch = Architecture::new(vec![2, 17, 1]).unwrap();
        assert!(matches!(
            ExactNetwork::new(WeightStack::zeros(&arch)),
            Err(Error::WidthCap { .. })
        ));
        let arch = Architecture::new(vec![2, 12, 12, 1]).unwrap();
        assert!(matches!(
            ExactNetwork::with_limits(WeightStack::zeros(&arch), 16, 1 << 20),
            Err(Error::ResourceLimit { .. })
        ));
    }
}
