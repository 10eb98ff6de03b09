mod common;

use abnet::exact::{aggregate_output, pbgnet_forward, propagate};
use abnet::math::erf;
use abnet::oracle::monte_carlo_output;
use abnet::repr::index_rep;
use abnet::{Architecture, WeightStack};
use common::{random_input, random_net, rng};
use rand::Rng;

/// `Pr(layer = s | previous layer = prev)` straight from the neuron formula.
fn conditional(w: &abnet::Matrix, prev: &[f64], s: &[f64], scale: f64) -> f64 {
    (0..w.rows())
        .map(|i| {
            let a: f64 = w.row(i).iter().zip(prev).map(|(u, v)| u * v).sum();
            0.5 + 0.5 * s[i] * erf(a * scale)
        })
        .product()
}

fn all_reps(width: usize) -> Vec<Vec<f64>> {
    (0..1usize << width)
        .map(|i| index_rep(i, width).unwrap().to_f64())
        .collect()
}

/// Probability of each representation of every layer, summing the product
/// of conditionals over every path through the earlier layers.
fn enumerate_paths(weights: &WeightStack, x: &[f64]) -> Vec<Vec<f64>> {
    let arch = weights.architecture();
    let xn: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let reps: Vec<Vec<Vec<f64>>> = (1..=arch.depth()).map(|k| all_reps(arch.width(k))).collect();
    let mut out: Vec<Vec<f64>> = reps.iter().map(|r| vec![0.0; r.len()]).collect();
    // Depth-first over complete paths s₁ → … → s_L.
    fn walk(
        k: usize,
        prefix_prob: f64,
        prev: &[f64],
        weights: &WeightStack,
        reps: &[Vec<Vec<f64>>],
        xn: f64,
        out: &mut [Vec<f64>],
    ) {
        let w = weights.layer(k + 1);
        let scale = if k == 0 {
            1.0 / (2f64.sqrt() * xn)
        } else {
            1.0 / (2.0 * prev.len() as f64).sqrt()
        };
        for (j, s) in reps[k].iter().enumerate() {
            let p = prefix_prob * conditional(w, prev, s, scale);
            out[k][j] += p;
            if k + 1 < reps.len() {
                walk(k + 1, p, s, weights, reps, xn, out);
            }
        }
    }
    walk(0, 1.0, x, weights, &reps, xn, &mut out);
    // Every deeper layer was visited once per complete prefix, so each entry
    // already sums over all paths ending in that representation.
    out
}

#[test]
fn propagation_matches_path_enumeration() {
    let mut r = rng(1);
    let mut checked = 0;
    for d0 in 1..=3 {
        for depth in 1..=3usize {
            let hidden_choices: Vec<Vec<usize>> = match depth {
                1 => vec![vec![]],
                2 => (1..=3).map(|a| vec![a]).collect(),
                _ => (1..=3).flat_map(|a| (1..=3).map(move |b| vec![a, b])).collect(),
            };
            for hidden in hidden_choices {
                let arch = Architecture::from_hidden(d0, &hidden).unwrap();
                for _ in 0..3 {
                    let w = random_net(&mut r, arch.widths(), 1.0);
                    let x = random_input(&mut r, d0);
                    let dist = propagate(&w, &x).unwrap();
                    let oracle = enumerate_paths(&w, &x);
                    for (k, (got, want)) in dist.iter().zip(&oracle).enumerate() {
                        for (a, b) in got.probabilities.iter().zip(want) {
                            assert!((a - b).abs() <= 1e-12, "layer {} of {:?}: {a} vs {b}", k + 1, arch);
                        }
                    }
                    let f = oracle.last().unwrap()[1] - oracle.last().unwrap()[0];
                    assert!((aggregate_output(&w, &x).unwrap() - f).abs() <= 1e-12);
                    checked += 1;
                }
            }
        }
    }
    assert_eq!(checked, 3 * (1 + 3 + 9) * 3);
}

#[test]
fn pbgnet_equals_exact_for_two_layers() {
    let mut r = rng(2);
    for _ in 0..100 {
        let d0 = r.random_range(2..=5);
        let d1 = r.random_range(1..=5);
        let w = random_net(&mut r, &[d0, d1, 1], 1.0);
        let x = random_input(&mut r, d0);
        let a = pbgnet_forward(&w, &x).unwrap();
        let b = aggregate_output(&w, &x).unwrap();
        assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }
}

#[test]
fn pbgnet_differs_for_three_layers() {
    let mut r = rng(3);
    let found = (0..1000).find_map(|t| {
        let w = random_net(&mut r, &[3, 3, 3, 1], 2.0);
        let x = random_input(&mut r, 3);
        let diff = (pbgnet_forward(&w, &x).unwrap() - aggregate_output(&w, &x).unwrap()).abs();
        (diff > 1e-3).then_some((t, diff))
    });
    let (trial, diff) = found.expect("no three-layer counterexample");
    assert!(trial < 1000 && diff > 1e-3);
}

#[test]
fn monte_carlo_agrees_with_exact() {
    let mut r = rng(4);
    for widths in [vec![3, 3, 3, 1], vec![2, 4, 2, 1], vec![3, 2, 1]] {
        let w = random_net(&mut r, &widths, 1.0);
        let x = random_input(&mut r, widths[0]);
        let exact = aggregate_output(&w, &x).unwrap();
        let est = monte_carlo_output(&w, &x, 100_000, 17).unwrap();
        assert!(est.z_score(exact).abs() <= 4.0, "{widths:?}: {exact} vs {est:?}");
    }
}

#[test]
fn monte_carlo_error_shrinks_with_samples() {
    let mut r = rng(5);
    let w = random_net(&mut r, &[3, 2, 1], 0.5);
    let x = random_input(&mut r, 3);
    let small = monte_carlo_output(&w, &x, 10_000, 1).unwrap();
    let large = monte_carlo_output(&w, &x, 1_000_000, 1).unwrap();
    let ratio = small.standard_error / large.standard_error;
    assert!((5.0..=20.0).contains(&ratio), "ratio {ratio}");
}
