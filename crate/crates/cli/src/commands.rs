//! The six commands, each usable as a library call.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use abnet::bench::{bench_forward, random_batch, to_csv, BenchResult, Variant};
use abnet::compact::{compact_model, compact_stochastic};
use abnet::exact::{aggregate_output, bam_forward, leading_layer_distribution, sgn};
use abnet::oracle::monte_carlo_output;
use abnet::pacbayes::BoundReport;
use abnet::train::{build_network, evaluate, train, EvalMetrics, Objective, TrainConfig, TrainingHistory};
use abnet::data::RawDataset;
use abnet::{Architecture, LabeledDataset};
use serde::{Deserialize, Serialize};

use crate::config::{BenchSection, GridSection, RunConfig};
use crate::error::{CliError, Result};
use crate::input::{prepare, PreparedData};
use crate::model_file::{ModelFile, ModelKind, ProbeCheck, TrainingMetadata, FORMAT_VERSION};

/// Probe points used to check a compact model against its source.
pub const PROBE_POINTS: usize = 100;
pub const PROBE_TOLERANCE: f64 = 1e-10;
/// Verification fails when any probe's `|z|` exceeds this.
pub const Z_THRESHOLD: f64 = 5.0;

/// Final metrics of a training run; free of timings so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub dataset: String,
    pub architecture: Architecture,
    pub objective: Objective,
    pub seed: u64,
    pub train: EvalMetrics,
    pub test: EvalMetrics,
    /// Linear loss on the examples the bound is computed on.
    pub empirical_loss: f64,
    pub kl: f64,
    pub c_star: f64,
    pub bound: f64,
    pub c_learned: f64,
    pub bound_examples: usize,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

pub struct TrainRun {
    pub model: ModelFile,
    pub history: TrainingHistory,
    pub metrics: TrainMetrics,
}

pub fn train_config(cfg: &RunConfig, input_dim: usize) -> Result<TrainConfig> {
    let arch = Architecture::from_hidden(input_dim, &cfg.model.hidden)?;
    let t = &cfg.train;
    Ok(TrainConfig {
        forward: t.forward_mode(),
        learning_rate: t.learning_rate,
        epochs: t.epochs,
        patience: t.patience,
        batch_size: t.batch_size,
        seed: cfg.seed,
        delta: t.delta,
        validation_fraction: t.validation_fraction,
        init_sd: t.init_sd,
        ..TrainConfig::new(arch, t.objective)
    })
}

pub fn run_training(cfg: &RunConfig) -> Result<TrainRun> {
    let data = prepare(&cfg.data, cfg.seed)?;
    run_training_on(cfg, &data)
}

pub fn run_training_on(cfg: &RunConfig, data: &PreparedData) -> Result<TrainRun> {
    let tc = train_config(cfg, data.train.dim())?;
    let out = train(&tc, &data.train)?;
    let net = build_network(&out.weights, out.eval_sets.as_ref())?;
    let train_m = evaluate(&net, &data.train, Some(&out.weights), None)?;
    let test_m = evaluate(&net, &data.test, Some(&out.weights), None)?;
    let metrics = TrainMetrics {
        dataset: data.name.clone(),
        architecture: tc.architecture.clone(),
        objective: tc.objective,
        seed: cfg.seed,
        train: train_m,
        test: test_m,
        empirical_loss: out.report.empirical_loss,
        kl: out.report.kl,
        c_star: out.report.c_star,
        bound: out.report.bound_value,
        c_learned: out.c,
        bound_examples: out.context.n,
        best_epoch: out.best_epoch,
        epochs_run: out.history.records.len(),
    };
    let model = ModelFile {
        format_version: FORMAT_VERSION,
        kind: ModelKind::Full,
        architecture: tc.architecture.clone(),
        preprocessor: data.preprocessor.clone(),
        weights: Some(out.weights),
        prior: Some(out.prior),
        sets: out.eval_sets,
        compact: None,
        c: out.c,
        context: out.context,
        certificate: out.report,
        probe: None,
        metadata: TrainingMetadata {
            seed: cfg.seed,
            dataset: data.name.clone(),
            data: cfg.data.clone(),
            objective: tc.objective,
            forward: tc.forward,
            learning_rate: tc.learning_rate,
            batch_size: tc.batch_size,
            init_sd: tc.init_sd,
            epochs_run: metrics.epochs_run,
            best_epoch: metrics.best_epoch,
        },
    };
    Ok(TrainRun {
        model,
        history: out.history,
        metrics,
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn json_line<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Writes `model.json`, `history.jsonl` and `metrics.json` into `out_dir`.
pub fn cmd_train(cfg: &RunConfig, out_dir: &Path) -> Result<TrainMetrics> {
    let run = run_training(cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    run.model.save(&out_dir.join("model.json"))?;
    let mut history = Vec::new();
    for r in &run.history.records {
        serde_json::to_writer(&mut history, r)?;
        history.push(b'\n');
    }
    write(&out_dir.join("history.jsonl"), &history)?;
    write(&out_dir.join("metrics.json"), &json_line(&run.metrics)?)?;
    Ok(run.metrics)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    pub kind: ModelKind,
    pub train: EvalMetrics,
    pub test: EvalMetrics,
    pub certificate: BoundReport,
}

/// Re-evaluates a model on the data it was trained on, or on `data` when
/// given; the refitted preprocessing must match the stored one.
pub fn cmd_eval(model: &ModelFile, data: Option<&PreparedData>) -> Result<EvalReport> {
    let owned;
    let data = match data {
        Some(d) => d,
        None => {
            owned = prepare(&model.metadata.data, model.metadata.seed)?;
            &owned
        }
    };
    if data.preprocessor != model.preprocessor {
        return Err(CliError::Data(
            "preprocessing fitted on this data differs from the model's".into(),
        ));
    }
    let predictor = model.predictor()?;
    let map = model.full_weights().ok().map(|(w, _)| w);
    Ok(EvalReport {
        dataset: data.name.clone(),
        kind: model.kind,
        train: evaluate(&*predictor, &data.train, map, None)?,
        test: evaluate(&*predictor, &data.test, map, None)?,
        certificate: model.recompute_certificate()?,
    })
}

pub fn probe_inputs(dim: usize, seed: u64) -> Vec<Vec<f64>> {
    random_batch(dim, PROBE_POINTS, seed)
}

/// Compact form of a full model, checked on the probe set.
pub fn cmd_compact(model: &ModelFile) -> Result<ModelFile> {
    let (w, _) = model.full_weights()?;
    let compact = match &model.sets {
        Some(sets) => compact_stochastic(w, sets)?,
        None => compact_model(w)?,
    };
    let kind = if compact.is_stochastic() {
        ModelKind::CompactStochastic
    } else {
        ModelKind::Compact
    };
    let deep = model.predictor()?;
    let seed = model.metadata.seed;
    let mut worst: f64 = 0.0;
    for x in probe_inputs(model.architecture.input_dim(), seed) {
        worst = worst.max((deep.predict(&x)? - compact.predict(&x)?).abs());
    }
    if worst > PROBE_TOLERANCE || worst.is_nan() {
        return Err(CliError::ProbeMismatch {
            deviation: worst,
            tolerance: PROBE_TOLERANCE,
        });
    }
    let out = ModelFile {
        kind,
        weights: None,
        prior: None,
        sets: None,
        compact: Some(compact),
        probe: Some(ProbeCheck {
            seed,
            points: PROBE_POINTS,
            max_abs_deviation: worst,
            tolerance: PROBE_TOLERANCE,
        }),
        ..model.clone()
    };
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub exact: f64,
    pub mc_mean: f64,
    pub standard_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub samples: u64,
    pub seed: u64,
    pub probes: Vec<ProbeResult>,
    pub max_abs_z: f64,
    pub passed: bool,
}

/// Exact aggregation against a Monte Carlo average of sampled sign
/// networks on seeded Gaussian probes.
pub fn cmd_verify(model: &ModelFile, samples: u64, probes: usize, seed: u64) -> Result<VerifyReport> {
    let (w, _) = model.full_weights()?;
    let mut results = Vec::with_capacity(probes);
    for (i, x) in random_batch(w.layer(1).cols(), probes, seed).iter().enumerate() {
        let exact = aggregate_output(w, x)?;
        let est = monte_carlo_output(w, x, samples, seed.wrapping_add(i as u64))?;
        results.push(ProbeResult {
            exact,
            mc_mean: est.mean,
            standard_error: est.standard_error,
            z: est.z_score(exact),
        });
    }
    let max_abs_z = results.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
    Ok(VerifyReport {
        samples,
        seed,
        probes: results,
        max_abs_z,
        passed: max_abs_z <= Z_THRESHOLD,
    })
}

impl VerifyReport {
    pub fn table(&self) -> String {
        let mut s = String::from("probe,exact,mc_mean,standard_error,z\n");
        for (i, r) in self.probes.iter().enumerate() {
            let _ = writeln!(s, "{i},{},{},{},{}", r.exact, r.mc_mean, r.standard_error, r.z);
        }
        s
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed {
            Ok(self)
        } else {
            Err(CliError::VerificationFailed {
                failed: self.probes.iter().filter(|r| r.z.abs() > Z_THRESHOLD).count(),
                total: self.probes.len(),
                threshold: Z_THRESHOLD,
            })
        }
    }
}

/// Inputs of the grid after the model's preprocessing, row-major in `x₂`.
fn grid_points(model: &ModelFile, grid: &GridSection) -> Result<(Vec<[f64; 2]>, LabeledDataset)> {
    if model.preprocessor.columns.len() != 2 {
        return Err(CliError::Model(format!(
            "grid needs a model of two raw features, this one has {}",
            model.preprocessor.columns.len()
        )));
    }
    if grid.resolution < 2 {
        return Err(CliError::Model("grid resolution must be at least 2".into()));
    }
    let [x1a, x1b, x2a, x2b] = grid.bounds;
    let step = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (grid.resolution - 1) as f64;
    let mut coords = Vec::with_capacity(grid.resolution * grid.resolution);
    for j in 0..grid.resolution {
        for i in 0..grid.resolution {
            coords.push([step(x1a, x1b, i), step(x2a, x2b, j)]);
        }
    }
    let rows: Vec<Vec<f64>> = coords.iter().map(|c| c.to_vec()).collect();
    let raw = RawDataset::from_labeled(&LabeledDataset::from_rows(&rows, vec![1; rows.len()])?, "grid");
    Ok((coords, model.preprocessor.transform(&raw)?))
}

/// CSV of `x1, x2, F, sgn, map, p1_*` over a regular grid; the MAP column
/// is empty for compact models.
pub fn cmd_grid(model: &ModelFile, grid: &GridSection) -> Result<String> {
    let (coords, inputs) = grid_points(model, grid)?;
    let predictor = model.predictor()?;
    let outputs = predictor.predict_all(&inputs)?;
    let (w1, map) = match (&model.compact, model.full_weights()) {
        (_, Ok((w, _))) => (w.layer(1).clone(), Some(w)),
        (Some(c), _) => (c.w1.clone(), None),
        _ => unreachable!("validated model"),
    };
    let width = w1.rows();
    let mut s = String::from("x1,x2,F,sgn,map");
    for r in 0..1usize << width {
        let _ = write!(s, ",p1_{r}");
    }
    s.push('\n');
    for (c, ((x, _), f)) in coords.iter().zip(inputs.iter().zip(&outputs)) {
        let _ = write!(s, "{},{},{},{},", c[0], c[1], f, sgn(*f));
        if let Some(w) = map {
            let _ = write!(s, "{}", bam_forward(w, x));
        }
        for p in leading_layer_distribution(&w1, x)?.probabilities {
            let _ = write!(s, ",{p}");
        }
        s.push('\n');
    }
    Ok(s)
}

/// Every variant on every `hidden_layers × widths` architecture.
pub fn cmd_bench(bench: &BenchSection, seed: u64) -> Result<Vec<BenchResult>> {
    let mut results = Vec::new();
    for &layers in &bench.hidden_layers {
        for &width in &bench.widths {
            let arch = Architecture::from_hidden(bench.input_dim, &vec![width; layers])?;
            for &variant in &bench.variants {
                let samples: &[usize] = match variant {
                    Variant::Stochastic | Variant::CompactStochastic => &bench.samples,
                    _ => &[0],
                };
                for &n in samples {
                    results.push(bench_forward(variant, &arch, bench.batch_size, bench.repetitions, n, seed)?);
                }
            }
        }
    }
    Ok(results)
}

pub fn bench_csv(results: &[BenchResult]) -> String {
    to_csv(results)
}
