//! Monte Carlo estimate of the aggregated output: draw concrete BAMs from
//! `N(B_M, I)` and average their ±1 outputs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::arch::{dot, norm, WeightStack};
use crate::error::{Error, Result};

/// Samples per independent random stream.
const BLOCK: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub samples: u64,
    pub seed: u64,
}

impl MonteCarloEstimate {
    /// `(value − mean) / standard_error`; infinite when the error is zero and the values differ.
    pub fn z_score(&self, value: f64) -> f64 {
        let diff = value - self.mean;
        if self.standard_error > 0.0 {
            diff / self.standard_error
        } else if diff == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(diff)
        }
    }
}

/// Block `b` uses ChaCha stream `b` of `seed`, so results do not depend on
/// how blocks are scheduled.
pub fn monte_carlo_output(
    weights: &WeightStack,
    x: &[f64],
    samples: u64,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if samples == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    if x.len() != weights.layer(1).cols() {
        return Err(Error::ShapeMismatch(format!(
            "input of dimension {} for a network expecting {}",
            x.len(),
            weights.layer(1).cols()
        )));
    }
    if norm(x) == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let max_width = weights.layers().iter().map(|m| m.rows()).max().unwrap_or(1);
    let mut sampled: Vec<Vec<f64>> = weights.layers().iter().map(|m| vec![0.0; m.as_slice().len()]).collect();
    let mut current = x.to_vec();
    let mut next = Vec::with_capacity(max_width);
    let mut sum: i64 = 0;
    let blocks = samples.div_ceil(BLOCK);
    for b in 0..blocks {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(b);
        let count = BLOCK.min(samples - b * BLOCK);
        for _ in 0..count {
            for (buf, layer) in sampled.iter_mut().zip(weights.layers()) {
                for (s, &m) in buf.iter_mut().zip(layer.as_slice()) {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    *s = m + e;
                }
            }
            current.clear();
            current.extend_from_slice(x);
            for (buf, layer) in sampled.iter().zip(weights.layers()) {
                let cols = layer.cols();
                next.clear();
                next.extend(
                    buf.chunks_exact(cols)
                        .map(|row| if dot(row, &current) >= 0.0 { 1.0 } else { -1.0 }),
                );
                std::mem::swap(&mut current, &mut next);
            }
            sum += if current[0] > 0.0 { 1 } else { -1 };
        }
    }
    let n = samples as f64;
    let mean = sum as f64 / n;
    let standard_error = if samples > 1 {
        let variance = (1.0 - mean * mean).max(0.0) * n / (n - 1.0);
        (variance / n).sqrt()
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        standard_error,
        samples,
        seed,
    })
}
