//! Sub-exponential approximation: each hidden layer tracks only a uniformly
//! drawn subset of its representations, renormalized after every layer.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arch::{Architecture, WeightStack};
use crate::engine::{DpNetwork, ForwardCache, DEFAULT_MEMORY_BUDGET};
use crate::error::{Error, Result};
use crate::repr::{index_rep, rep_count, SignVector};

pub use crate::engine::RepSet;

/// Widths up to this use index sampling; wider layers draw random sign
/// vectors and reject duplicates.
const INDEX_SAMPLING_MAX_WIDTH: usize = 24;

/// Sampled sets `R′₁ … R′_{L−1}` for the hidden layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledRepresentationSets {
    pub seed: u64,
    pub samples: usize,
    pub layers: Vec<RepSet>,
}

impl SampledRepresentationSets {
    /// Sets that cover every representation (the exact DP).
    pub fn full(arch: &Architecture) -> Self {
        Self {
            seed: 0,
            samples: usize::MAX,
            layers: arch
                .hidden_widths()
                .iter()
                .map(|&width| RepSet::Full { width })
                .collect(),
        }
    }

    pub fn is_full(&self) -> bool {
        self.layers.iter().all(RepSet::is_full)
    }

    /// Representation sets for all `L` layers, output included.
    pub(crate) fn all_layers(&self) -> Vec<RepSet> {
        let mut sets = self.layers.clone();
        sets.push(RepSet::Full { width: 1 });
        sets
    }
}

/// Draws `min(n, 2^{d_k})` distinct representations uniformly per hidden
/// layer. Deterministic in `seed`; full coverage yields [`RepSet::Full`].
pub fn sample_representations(
    arch: &Architecture,
    n: usize,
    seed: u64,
) -> Result<SampledRepresentationSets> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "representation sample count must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = arch
        .hidden_widths()
        .iter()
        .map(|&width| sample_layer(&mut rng, width, n))
        .collect::<Result<_>>()?;
    Ok(SampledRepresentationSets {
        seed,
        samples: n,
        layers,
    })
}

fn sample_layer(rng: &mut ChaCha8Rng, width: usize, n: usize) -> Result<RepSet> {
    if let Some(total) = rep_count(width) {
        if n >= total {
            return Ok(RepSet::Full { width });
        }
    }
    let reps = if width <= INDEX_SAMPLING_MAX_WIDTH {
        let total = 1usize << width;
        let mut idx = rand::seq::index::sample(rng, total, n).into_vec();
        idx.sort_unstable();
        idx.into_iter()
            .map(|i| index_rep(i, width))
            .collect::<Result<Vec<_>>>()?
    } else {
        let mut seen = BTreeSet::new();
        let mut reps = Vec::with_capacity(n);
        while reps.len() < n {
            let s: Vec<i8> = (0..width)
                .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                .collect();
            if seen.insert(s.clone()) {
                reps.push(SignVector::new(s)?);
            }
        }
        reps.sort();
        reps
    };
    Ok(RepSet::Sampled { width, reps })
}

/// The renormalized DP restricted to fixed sampled sets.
#[derive(Debug, Clone)]
pub struct StochasticNetwork {
    inner: DpNetwork,
}

impl StochasticNetwork {
    pub fn new(weights: WeightStack, sets: &SampledRepresentationSets) -> Result<Self> {
        Self::with_budget(weights, sets, DEFAULT_MEMORY_BUDGET)
    }

    pub fn with_budget(
        weights: WeightStack,
        sets: &SampledRepresentationSets,
        budget: u128,
    ) -> Result<Self> {
        Ok(Self {
            inner: DpNetwork::new(weights, sets.all_layers(), budget)?,
        })
    }

    pub fn dp(&self) -> &DpNetwork {
        &self.inner
    }

    pub fn into_dp(self) -> DpNetwork {
        self.inner
    }

    pub fn output(&self, x: &[f64]) -> Result<f64> {
        self.inner.output(x)
    }

    pub fn outputs<X: AsRef<[f64]>>(&self, xs: &[X]) -> Result<Vec<f64>> {
        self.inner.outputs(xs)
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardCache> {
        self.inner.forward(x)
    }
}

pub fn stochastic_aggregate_output(
    weights: &WeightStack,
    x: &[f64],
    sets: &SampledRepresentationSets,
) -> Result<f64> {
    StochasticNetwork::new(weights.clone(), sets)?.output(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repr::rep_index;

    #[test]
    fn exhaustive_sampling_is_full() {
        let arch = Architecture::new(vec![3, 3, 2, 1]).unwrap();
        let sets = sample_representations(&arch, 8, 1).unwrap();
        assert!(sets.is_full());
        let sets = sample_representations(&arch, 4, 1).unwrap();
        assert!(!sets.layers[0].is_full());
        assert!(sets.layers[1].is_full());
    }

    #[test]
    fn sampling_is_deterministic_and_distinct() {
        let arch = Architecture::new(vec![3, 8, 40, 1]).unwrap();
        let a = sample_representations(&arch, 50, 7).unwrap();
        let b = sample_representations(&arch, 50, 7).unwrap();
        assert_eq!(a, b);
        for set in &a.layers {
            let RepSet::Sampled { reps, .. } = set else { panic!("expected sampled set") };
            assert_eq!(reps.len(), 50);
            let unique: BTreeSet<_> = reps.iter().collect();
            assert_eq!(unique.len(), 50);
        }
        let c = sample_representations(&arch, 50, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn first_coordinate_is_uniform() {
        let arch = Architecture::new(vec![3, 8, 1]).unwrap();
        let mut plus = 0usize;
        let mut total = 0usize;
        for seed in 0..1000 {
            let sets = sample_representations(&arch, 50, seed).unwrap();
            let RepSet::Sampled { reps, .. } = &sets.layers[0] else { panic!() };
            plus += reps.iter().filter(|s| s.entries()[0] > 0).count();
            total += reps.len();
            assert!(reps.windows(2).all(|w| rep_index(&w[0]) < rep_index(&w[1])));
        }
        let freq = plus as f64 / total as f64;
        assert!((freq - 0.5).abs() < 0.05, "frequency {freq}");
    }

    #[test]
    fn zero_samples_rejected() {
        let arch = Architecture::new(vec![3, 2, 1]).unwrap();
        assert!(sample_representations(&arch, 0, 0).is_err());
    }
}
