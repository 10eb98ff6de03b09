#![allow(dead_code)]

use abnet::{Architecture, Matrix, WeightStack};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Weights with i.i.d. `N(0, scale²)` entries.
pub fn random_net(rng: &mut ChaCha8Rng, widths: &[usize], scale: f64) -> WeightStack {
    let layers = widths
        .windows(2)
        .map(|p| {
            let data = (0..p[0] * p[1])
                .map(|_| scale * Distribution::<f64>::sample(&StandardNormal, rng))
                .collect::<Vec<f64>>();
            Matrix::from_vec(p[1], p[0], data).unwrap()
        })
        .collect();
    WeightStack::new(layers).unwrap()
}

pub fn random_input(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..dim).map(|_| Distribution::<f64>::sample(&StandardNormal, rng)).collect();
        if x.iter().any(|v: &f64| *v != 0.0) {
            return x;
        }
    }
}

/// Random widths: input dimension in `2..=4`, `depth` layers with hidden
/// widths drawn from `widths`, and a single output.
pub fn random_arch(rng: &mut ChaCha8Rng, depth: usize, widths: &[usize]) -> Architecture {
    let mut w = vec![rng.random_range(2..=4)];
    for _ in 1..depth {
        w.push(widths[rng.random_range(0..widths.len())]);
    }
    w.push(1);
    Architecture::new(w).unwrap()
}
