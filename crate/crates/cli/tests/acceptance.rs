//! Acceptance criteria, one `criterion N: PASS|FAIL|NOT RUN` line each.
//!
//! Runs sequentially without the test harness so the timing criterion sees
//! an otherwise idle process. Exits non-zero when any criterion fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use abnet::bench::{bench_median, random_batch, Variant};
use abnet::compact::compact_model;
use abnet::exact::{aggregate_output, pbgnet_forward, propagate};
use abnet::gradients::{backward, finite_difference_check, objective_gradient};
use abnet::math::erf;
use abnet::oracle::monte_carlo_output;
use abnet::pacbayes::{optimal_bound, pac_bayes_bound, training_objective, BoundContext};
use abnet::repr::index_rep;
use abnet::stochastic::{sample_representations, stochastic_aggregate_output, SampledRepresentationSets};
use abnet::train::init_weights_with;
use abnet::{Architecture, LabeledDataset, WeightStack};
use abnet_cli::commands::{cmd_compact, cmd_eval, cmd_grid, cmd_train, cmd_verify, run_training};
use abnet_cli::config::RunConfig;
use abnet_cli::model_file::ModelFile;

enum Outcome {
    Pass(String),
    Fail(String),
    NotRun(String),
}

fn judge(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn net(widths: &[usize], sd: f64, seed: u64) -> WeightStack {
    init_weights_with(&Architecture::new(widths.to_vec()).unwrap(), seed, Some(sd))
}

fn inputs(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    random_batch(dim, count, seed)
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data_root() -> PathBuf {
    std::env::var_os("ABNET_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace().join("data"))
}

fn load_config(name: &str, extra: &[String]) -> RunConfig {
    let mut overrides = vec![format!("data.dir='{}'", data_root().display())];
    overrides.extend_from_slice(extra);
    RunConfig::load(Some(&workspace().join("configs").join(name)), &overrides).unwrap()
}

fn oracle_monte_carlo() -> Outcome {
    let start = Instant::now();
    let (mut within, mut total, mut worst) = (0, 0, 0.0f64);
    for i in 0..20u64 {
        let depth = 2 + (i % 3) as usize;
        let width = 2 + ((i / 3) % 3) as usize;
        let mut widths = vec![3];
        widths.extend(std::iter::repeat_n(width, depth - 1));
        widths.push(1);
        let w = net(&widths, 1.0, 100 + i);
        for (j, x) in inputs(3, 5, 200 + i).iter().enumerate() {
            let exact = aggregate_output(&w, x).unwrap();
            let est = monte_carlo_output(&w, x, 1_000_000, 1000 * i + j as u64).unwrap();
            let z = est.z_score(exact).abs();
            worst = worst.max(z);
            within += usize::from(z <= 4.0);
            total += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let share = within as f64 / total as f64;
    judge(
        share >= 0.99 && secs <= 600.0,
        format!("{within}/{total} within 4 standard errors, max |z| {worst:.2}, {secs:.0} s"),
    )
}

/// Layer distributions by summing products of conditionals over every path.
fn enumerate_paths(w: &WeightStack, x: &[f64]) -> Vec<Vec<f64>> {
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let widths = w.architecture().widths().to_vec();
    let mut out: Vec<Vec<f64>> = widths[1..].iter().map(|&d| vec![0.0; 1 << d]).collect();
    let mut stack: Vec<(usize, f64, Vec<f64>)> = vec![(0, 1.0, x.to_vec())];
    while let Some((k, p, prev)) = stack.pop() {
        let m = w.layer(k + 1);
        let scale = if k == 0 { 1.0 / (2f64.sqrt() * xn) } else { 1.0 / (2.0 * prev.len() as f64).sqrt() };
        for (r, slot) in out[k].iter_mut().enumerate() {
            let s = index_rep(r, m.rows()).unwrap().to_f64();
            let cond: f64 = (0..m.rows())
                .map(|i| {
                    let a: f64 = m.row(i).iter().zip(&prev).map(|(u, v)| u * v).sum();
                    0.5 + 0.5 * s[i] * erf(a * scale)
                })
                .product();
            *slot += p * cond;
            if k + 1 < widths.len() - 1 {
                stack.push((k + 1, p * cond, s));
            }
        }
    }
    out
}

fn brute_force() -> Outcome {
    let (mut worst, mut nets) = (0.0f64, 0);
    let mut seed = 0;
    for d0 in 1..=3 {
        for hidden in [vec![], vec![1], vec![2], vec![3]]
            .into_iter()
            .chain((1..=3).flat_map(|a| (1..=3).map(move |b| vec![a, b])))
        {
            let mut widths = vec![d0];
            widths.extend(&hidden);
            widths.push(1);
            for x in inputs(d0, 3, seed) {
                seed += 1;
                let w = net(&widths, 1.0, seed);
                let dp = propagate(&w, &x).unwrap();
                for (got, want) in dp.iter().zip(enumerate_paths(&w, &x)) {
                    for (a, b) in got.probabilities.iter().zip(want) {
                        worst = worst.max((a - b).abs());
                    }
                }
                nets += 1;
            }
        }
    }
    judge(worst <= 1e-12, format!("{nets} nets with L <= 3, d <= 3, max deviation {worst:.1e}"))
}

fn pbgnet_relationship() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let (d0, d1) = (2 + (i % 4) as usize, 1 + (i % 5) as usize);
        let w = net(&[d0, d1, 1], 1.0, 300 + i);
        let x = &inputs(d0, 1, 400 + i)[0];
        worst = worst.max((pbgnet_forward(&w, x).unwrap() - aggregate_output(&w, x).unwrap()).abs());
    }
    let found = (0..1000u64).find_map(|t| {
        let w = net(&[3, 3, 3, 1], 2.0, 500 + t);
        let x = &inputs(3, 1, 600 + t)[0];
        let diff = (pbgnet_forward(&w, x).unwrap() - aggregate_output(&w, x).unwrap()).abs();
        (diff > 1e-3).then_some((t, diff))
    });
    let counter = match found {
        Some((t, d)) => format!("L=3 counterexample at trial {t} with difference {d:.3e}"),
        None => "no L=3 counterexample in 1000 trials".into(),
    };
    judge(worst <= 1e-10 && found.is_some(), format!("L=2 max deviation {worst:.1e}; {counter}"))
}

fn compact_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for i in 0..50u64 {
        let depth = 1 + (i % 6) as usize;
        let mut widths = vec![4];
        widths.extend((1..depth).map(|k| 1 + ((i as usize + k) % 4)));
        widths.push(1);
        let w = net(&widths, 1.0, 700 + i);
        let compact = compact_model(&w).unwrap();
        for x in inputs(4, 20, 800 + i) {
            worst = worst.max((compact.predict(&x).unwrap() - aggregate_output(&w, &x).unwrap()).abs());
        }
    }
    judge(worst <= 1e-10, format!("50 nets x 20 inputs, L <= 6, max deviation {worst:.1e}"))
}

fn stochastic_recovery() -> Outcome {
    let arch = Architecture::new(vec![4, 8, 8, 1]).unwrap();
    let full = SampledRepresentationSets::full(&arch);
    let mut recovery = 0.0f64;
    let cases: Vec<(WeightStack, Vec<f64>, f64)> = (0..5u64)
        .map(|i| {
            let w = net(arch.widths(), 1.0, 900 + i);
            let x = inputs(4, 1, 950 + i).remove(0);
            let exact = aggregate_output(&w, &x).unwrap();
            recovery = recovery.max((stochastic_aggregate_output(&w, &x, &full).unwrap() - exact).abs());
            (w, x, exact)
        })
        .collect();
    let errors: Vec<f64> = [8usize, 32, 128, 256]
        .iter()
        .map(|&n| {
            let mut sum = 0.0;
            for (i, (w, x, exact)) in cases.iter().enumerate() {
                for seed in 0..100u64 {
                    let sets = sample_representations(&arch, n, 10_000 * i as u64 + seed).unwrap();
                    sum += (stochastic_aggregate_output(w, x, &sets).unwrap() - exact).abs();
                }
            }
            sum / (100 * cases.len()) as f64
        })
        .collect();
    // Non-increasing up to the noise of 500-draw averages.
    let monotone = errors.windows(2).all(|p| p[1] <= p[0] * 1.1 + 1e-3);
    judge(
        recovery <= 1e-12 && monotone,
        format!("full coverage deviation {recovery:.1e}; mean |error| at n=8,32,128,256: {errors:.4?}"),
    )
}

fn gradient_checks() -> Outcome {
    let (h, tol, floor) = (1e-5, 1e-4, 1e-8);
    let (mut worst, mut passed) = (0.0f64, true);
    for i in 0..10u64 {
        let depth = 1 + (i % 4) as usize;
        let mut widths = vec![3];
        widths.extend((1..depth).map(|k| 1 + ((i as usize * 3 + k) % 4)));
        widths.push(1);
        let w = net(&widths, 0.8, 1100 + i);
        let prior = net(&widths, 0.8, 1200 + i);
        let rows = inputs(3, 6, 1300 + i);
        let labels = (0..6).map(|j| if (i + j) % 3 == 0 { -1 } else { 1 }).collect();
        let batch = LabeledDataset::from_rows(&rows, labels).unwrap();
        let x = &rows[0];
        let g = backward(&w, x, 1.0).unwrap();
        let out = finite_difference_check(|s| aggregate_output(s, x), &w, &g, h, tol, floor).unwrap();
        let (c, n) = (0.5 + i as f64 * 0.4, 50);
        let ctx = BoundContext::new(n, 0.05).unwrap();
        let (go, _) = objective_gradient(&w, &prior, &batch, c, n, 0.05).unwrap();
        let obj =
            finite_difference_check(|s| training_objective(s, &prior, &batch, c, &ctx), &w, &go, h, tol, floor).unwrap();
        worst = worst.max(out.max_rel_error).max(obj.max_rel_error);
        passed &= out.passed && obj.passed;
    }
    judge(passed, format!("10 configurations, output and objective, max relative error {worst:.1e}"))
}

fn bound_formula() -> Outcome {
    let ctx = BoundContext::new(1000, 0.05).unwrap();
    let closed = optimal_bound(0.0, 0.0, &ctx).bound_value;
    let closed_ok = (closed - 0.007117308).abs() <= 1e-6;
    let grid: Vec<f64> = (0..100).map(|i| 10f64.powf(-4.0 + 8.0 * i as f64 / 99.0)).collect();
    let mut below_grid = true;
    let mut monotone = true;
    for loss in [0.0, 0.05, 0.2, 0.45] {
        for kl in [0.0, 1.0, 30.0, 400.0] {
            let best = optimal_bound(loss, kl, &ctx).bound_value;
            let grid_min = grid.iter().map(|&c| pac_bayes_bound(loss, kl, &ctx, c)).fold(f64::INFINITY, f64::min);
            below_grid &= best <= grid_min + 1e-12;
            monotone &= optimal_bound(loss + 0.01, kl, &ctx).bound_value >= best;
            monotone &= optimal_bound(loss, kl + 1.0, &ctx).bound_value >= best;
        }
    }
    judge(
        closed_ok && below_grid && monotone,
        format!("closed form {closed:.9} (target 0.007117308), optimum below grid: {below_grid}, monotone: {monotone}"),
    )
}

fn table_reproduction() -> Vec<(String, Outcome)> {
    let mnist = data_root().join("mnist");
    let mnist17 = if mnist.join("train-images-idx3-ubyte").exists() {
        let start = Instant::now();
        let m = run_training(&load_config("mnist17.toml", &[])).unwrap().metrics;
        judge(
            m.bound <= 0.06 && m.test.error_rate_aggregate <= 0.012,
            format!(
                "bound {:.4} (<= 0.06), test error {:.4} (<= 0.012), {:.0} s",
                m.bound,
                m.test.error_rate_aggregate,
                start.elapsed().as_secs_f64()
            ),
        )
    } else {
        Outcome::NotRun(format!("no MNIST files under {}", mnist.display()))
    };
    let ads_file = data_root().join("ads/ad.data");
    let ads = if ads_file.exists() {
        let best = (1..=3)
            .map(|layers| {
                let hidden = format!("model.hidden={:?}", vec![2; layers]);
                run_training(&load_config("ads.toml", &[hidden])).unwrap().metrics
            })
            .min_by(|a, b| a.bound.total_cmp(&b.bound))
            .unwrap();
        judge(
            best.bound <= 0.25 && best.test.error_rate_aggregate <= 0.18,
            format!("bound {:.4} (<= 0.25), test error {:.4} (<= 0.18)", best.bound, best.test.error_rate_aggregate),
        )
    } else {
        Outcome::NotRun(format!("{} is not available", ads_file.display()))
    };
    vec![("mnist17".into(), mnist17), ("ads".into(), ads)]
}

fn depth_stability() -> Outcome {
    if !data_root().join("mnist/train-images-idx3-ubyte").exists() {
        return Outcome::NotRun("no MNIST files".into());
    }
    let best = |layers: usize| {
        [0.1, 0.01, 0.001, 0.0001]
            .iter()
            .map(|lr| {
                let extra = [format!("model.hidden={:?}", vec![4; layers]), format!("train.learning_rate={lr}")];
                (run_training(&load_config("mnistlh_depth.toml", &extra)).unwrap().metrics.bound, *lr)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .unwrap()
    };
    let (b2, lr2) = best(2);
    let (b8, lr8) = best(8);
    judge(
        b8 <= 1.5 * b2,
        format!("bound 2 layers {b2:.4} (lr {lr2}), 8 layers {b8:.4} (lr {lr8}), ratio {:.2} (<= 1.5)", b8 / b2),
    )
}

fn timing(variant: Variant, widths: &[usize], reps: usize, samples: usize) -> f64 {
    let arch = Architecture::new(widths.to_vec()).unwrap();
    bench_median(variant, &arch, 32, reps, samples, 5).unwrap().expect("configuration within limits")
}

fn complexity_shapes() -> Outcome {
    let exact: Vec<f64> = (9..=12).map(|d| timing(Variant::Exact, &[16, d, d, 1], 2, 0)).collect();
    let ratios: Vec<f64> = exact.windows(2).map(|p| p[1] / p[0]).collect();
    let width_ok = ratios.iter().all(|r| (2.5..=6.0).contains(r));
    let compact: Vec<f64> = [2usize, 4, 8]
        .iter()
        .map(|&l| {
            let mut widths = vec![16];
            widths.extend(std::iter::repeat_n(8, l - 1));
            widths.push(1);
            timing(Variant::CompactExact, &widths, 200, 0)
        })
        .collect();
    let spread = compact.iter().cloned().fold(0.0, f64::max) / compact.iter().cloned().fold(f64::INFINITY, f64::min);
    let ns = [25usize, 50, 100, 200];
    let stochastic: Vec<f64> = ns.iter().map(|&n| timing(Variant::Stochastic, &[16, 8, 8, 8, 1], 5, n)).collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = ns.iter().zip(&stochastic).map(|(&n, t)| ((n as f64).ln(), t.ln())).unzip();
    let (mx, my) = (lx.iter().sum::<f64>() / 4.0, ly.iter().sum::<f64>() / 4.0);
    let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    judge(
        width_ok && spread <= 2.0 && slope <= 2.3,
        format!(
            "exact per-increment ratios d=9..12 {ratios:.2?} (in [2.5, 6]); compact L=2,4,8 spread {spread:.2} (<= 2); stochastic slope {slope:.2} (<= 2.3)"
        ),
    )
}

/// Bench-module shape: deep exact time roughly linear in depth.
fn depth_linearity() -> Outcome {
    let deep: Vec<f64> = [4usize, 8]
        .iter()
        .map(|&l| {
            let mut widths = vec![16];
            widths.extend(std::iter::repeat_n(8, l - 1));
            widths.push(1);
            timing(Variant::Exact, &widths, 5, 0)
        })
        .collect();
    let ratio = deep[1] / deep[0];
    judge((1.5..=3.0).contains(&ratio), format!("deep exact L=8/L=4 time ratio {ratio:.3} (in [1.5, 3])"))
}

/// Serialized outputs of train, eval, compact, verify and grid for one seed.
fn command_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let cfg = load_config("circles.toml", &["train.epochs=30".into()]);
    cmd_train(&cfg, dir).unwrap();
    let model = ModelFile::load(&dir.join("model.json")).unwrap();
    let eval = serde_json::to_vec(&cmd_eval(&model, None).unwrap()).unwrap();
    let compact = cmd_compact(&model).unwrap().to_json().unwrap();
    let verify = serde_json::to_vec(&cmd_verify(&model, 100_000, 3, cfg.seed).unwrap()).unwrap();
    let grid = cmd_grid(&model, &cfg.grid).unwrap().into_bytes();
    vec![
        ("metrics.json".into(), std::fs::read(dir.join("metrics.json")).unwrap()),
        ("model.json".into(), std::fs::read(dir.join("model.json")).unwrap()),
        ("eval".into(), eval),
        ("compact".into(), compact),
        ("verify".into(), verify),
        ("grid".into(), grid),
    ]
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let a = command_outputs(&tmp.path().join("a"));
    let b = command_outputs(&tmp.path().join("b"));
    let differing: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x.1 != y.1).map(|(x, _)| x.0.as_str()).collect();
    let names: Vec<&str> = a.iter().map(|x| x.0.as_str()).collect();
    judge(
        differing.is_empty(),
        format!("identical on rerun: {names:?}; differing: {differing:?} (bench timings excluded)"),
    )
}

fn main() {
    let mut results: Vec<(String, Outcome)> = vec![
        ("1".into(), oracle_monte_carlo()),
        ("2".into(), brute_force()),
        ("3".into(), pbgnet_relationship()),
        ("4".into(), compact_equivalence()),
        ("5".into(), stochastic_recovery()),
        ("6".into(), gradient_checks()),
        ("7".into(), bound_formula()),
    ];
    results.extend(table_reproduction().into_iter().map(|(name, o)| (format!("8 ({name})"), o)));
    results.push(("9".into(), depth_stability()));
    results.push(("10".into(), complexity_shapes()));
    results.push(("10 (bench depth example)".into(), depth_linearity()));
    results.push(("11".into(), determinism()));
    let mut failed = 0;
    for (name, outcome) in &results {
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::NotRun(d) => ("NOT RUN", d),
        };
        println!("criterion {name}: {tag}: {detail}");
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
