//! Forward-pass timing for the deep, compact and baseline variants.

use std::fmt::Write as _;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::arch::{Architecture, WeightStack};
use crate::compact::{compact_model, compact_stochastic, CompactModel};
use crate::error::{Error, Result};
use crate::exact::{pbgnet_forward, ExactNetwork};
use crate::stochastic::{sample_representations, StochasticNetwork};
use crate::train::init_weights;

pub const WARMUP_ITERATIONS: usize = 3;
pub const RESOURCE_NOTE: &str = "exceeds available resources";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Exact,
    Stochastic,
    CompactExact,
    CompactStochastic,
    Pbgnet,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Exact,
        Variant::Stochastic,
        Variant::CompactExact,
        Variant::CompactStochastic,
        Variant::Pbgnet,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Exact => "exact",
            Variant::Stochastic => "stochastic",
            Variant::CompactExact => "compact_exact",
            Variant::CompactStochastic => "compact_stochastic",
            Variant::Pbgnet => "pbgnet",
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown bench variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub variant: Variant,
    pub architecture: Architecture,
    pub batch_size: usize,
    pub repetitions: usize,
    pub samples: usize,
    pub mean_s: f64,
    pub sd_s: f64,
    pub median_s: f64,
    /// Reals held by the dominant data structures of one pass.
    pub est_reals: u128,
    pub threads: usize,
    /// Set when the configuration could not run.
    pub note: Option<String>,
}

impl BenchResult {
    pub fn ran(&self) -> bool {
        self.note.is_none()
    }
}

/// Stored reals of a forward pass over a batch: transition matrices plus
/// per-example distributions (or the compact head and embeddings).
pub fn estimate_reals(variant: Variant, arch: &Architecture, batch: usize, samples: usize) -> u128 {
    let set = |k: usize, sampled: bool| -> u128 {
        let full = 1u128.checked_shl(arch.width(k) as u32).unwrap_or(u128::MAX);
        if sampled && k < arch.depth() {
            full.min(samples as u128)
        } else {
            full
        }
    };
    let b = batch as u128;
    let params: u128 = arch.widths().windows(2).map(|p| (p[0] * p[1]) as u128).sum();
    match variant {
        Variant::Exact | Variant::Stochastic => {
            let sampled = variant == Variant::Stochastic;
            let mut total = params;
            for k in 1..=arch.depth() {
                let rows = set(k, sampled);
                let cols = if k == 1 { 1 } else { set(k - 1, sampled) };
                total = total.saturating_add(rows.saturating_mul(cols));
                total = total.saturating_add(rows.saturating_mul(b));
            }
            total
        }
        Variant::CompactExact | Variant::CompactStochastic => {
            let lead = set(1, variant == Variant::CompactStochastic);
            let heads = if variant == Variant::CompactStochastic { 2 } else { 1 };
            let w1 = (arch.width(0) * arch.width(1)) as u128;
            w1 + heads * lead + lead.saturating_mul(b)
        }
        Variant::Pbgnet => params + b * arch.widths().iter().map(|&w| w as u128).sum::<u128>(),
    }
}

/// A fixed batch of Gaussian inputs.
pub fn random_batch(dim: usize, batch: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..batch)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect()
}

fn mean_sd(times: &[f64]) -> (f64, f64, f64) {
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let sd = if times.len() > 1 {
        (times.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd, median(times))
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Times `reps` forward passes over a fixed batch after warm-up.
///
/// Deep variants rebuild their transition matrices inside the timed region,
/// as a training step must; compact variants are built once beforehand.
pub fn bench_forward(
    variant: Variant,
    arch: &Architecture,
    batch_size: usize,
    reps: usize,
    samples: usize,
    seed: u64,
) -> Result<BenchResult> {
    if reps == 0 || batch_size == 0 {
        return Err(Error::InvalidArgument("repetitions and batch size must be positive".into()));
    }
    let weights = init_weights(arch, seed);
    let batch = random_batch(arch.input_dim(), batch_size, seed ^ 0x5eed);
    let mut result = BenchResult {
        variant,
        architecture: arch.clone(),
        batch_size,
        repetitions: reps,
        samples,
        mean_s: f64::NAN,
        sd_s: f64::NAN,
        median_s: f64::NAN,
        est_reals: estimate_reals(variant, arch, batch_size, samples),
        threads: 1,
        note: None,
    };
    let pass = match prepare(variant, &weights, samples, seed) {
        Ok(p) => p,
        Err(Error::ResourceLimit { .. }) | Err(Error::WidthCap { .. }) => {
            result.note = Some(RESOURCE_NOTE.into());
            return Ok(result);
        }
        Err(e) => return Err(e),
    };
    let mut sink = 0.0;
    for _ in 0..WARMUP_ITERATIONS {
        sink += pass.run(&weights, &batch)?;
    }
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t0 = Instant::now();
        sink += pass.run(&weights, &batch)?;
        times.push(t0.elapsed().as_secs_f64());
    }
    std::hint::black_box(sink);
    let (mean, sd, med) = mean_sd(&times);
    result.mean_s = mean;
    result.sd_s = sd;
    result.median_s = med;
    Ok(result)
}

enum Pass {
    Exact,
    Stochastic { samples: usize, seed: u64 },
    Compact(CompactModel),
    Pbgnet,
}

fn prepare(variant: Variant, weights: &WeightStack, samples: usize, seed: u64) -> Result<Pass> {
    let arch = weights.architecture();
    Ok(match variant {
        Variant::Exact => {
            ExactNetwork::new(weights.clone())?;
            Pass::Exact
        }
        Variant::Stochastic => {
            let sets = sample_representations(&arch, samples, seed)?;
            StochasticNetwork::new(weights.clone(), &sets)?;
            Pass::Stochastic { samples, seed }
        }
        Variant::CompactExact => Pass::Compact(compact_model(weights)?),
        Variant::CompactStochastic => {
            let sets = sample_representations(&arch, samples, seed)?;
            Pass::Compact(compact_stochastic(weights, &sets)?)
        }
        Variant::Pbgnet => Pass::Pbgnet,
    })
}

impl Pass {
    fn run(&self, weights: &WeightStack, batch: &[Vec<f64>]) -> Result<f64> {
        let outputs = match self {
            Pass::Exact => ExactNetwork::new(weights.clone())?.outputs(batch)?,
            Pass::Stochastic { samples, seed } => {
                let sets = sample_representations(&weights.architecture(), *samples, *seed)?;
                StochasticNetwork::new(weights.clone(), &sets)?.outputs(batch)?
            }
            Pass::Compact(model) => batch.iter().map(|x| model.predict(x)).collect::<Result<_>>()?,
            Pass::Pbgnet => batch
                .iter()
                .map(|x| pbgnet_forward(weights, x))
                .collect::<Result<_>>()?,
        };
        Ok(outputs.iter().sum())
    }
}

/// Median over `runs` harness runs of the per-run mean time.
pub fn bench_median(
    variant: Variant,
    arch: &Architecture,
    batch_size: usize,
    reps: usize,
    samples: usize,
    runs: usize,
) -> Result<Option<f64>> {
    let mut means = Vec::with_capacity(runs);
    for r in 0..runs {
        let res = bench_forward(variant, arch, batch_size, reps, samples, r as u64)?;
        if !res.ran() {
            return Ok(None);
        }
        means.push(res.mean_s);
    }
    Ok(Some(median(&means)))
}

pub const CSV_HEADER: &str = "variant,L,d,n,batch,mean_s,sd_s,est_reals,note";

/// One CSV row per result; `d` is the widest hidden layer.
pub fn to_csv(results: &[BenchResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in results {
        let d = r.architecture.hidden_widths().iter().copied().max().unwrap_or(1);
        let (mean, sd) = if r.ran() {
            (format!("{:e}", r.mean_s), format!("{:e}", r.sd_s))
        } else {
            (String::new(), String::new())
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.variant.name(),
            r.architecture.depth(),
            d,
            r.samples,
            r.batch_size,
            mean,
            sd,
            r.est_reals,
            r.note.as_deref().unwrap_or("")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_every_variant() {
        let arch = Architecture::new(vec![4, 3, 3, 1]).unwrap();
        for v in Variant::ALL {
            let r = bench_forward(v, &arch, 4, 2, 4, 0).unwrap();
            assert!(r.ran());
            assert!(r.mean_s > 0.0 && r.mean_s.is_finite());
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
    }

    #[test]
    fn oversized_exact_is_reported() {
        let arch = Architecture::new(vec![4, 20, 1]).unwrap();
        let r = bench_forward(Variant::Exact, &arch, 2, 1, 4, 0).unwrap();
        assert_eq!(r.note.as_deref(), Some(RESOURCE_NOTE));
        let csv = to_csv(&[r]);
        assert!(csv.lines().nth(1).unwrap().ends_with(RESOURCE_NOTE));
    }

    #[test]
    fn compact_estimate_is_depth_free() {
        let a = Architecture::new(vec![8, 4, 4, 1]).unwrap();
        let b = Architecture::new(vec![8, 4, 4, 4, 4, 4, 4, 1]).unwrap();
        assert_eq!(
            estimate_reals(Variant::CompactExact, &a, 32, 0),
            estimate_reals(Variant::CompactExact, &b, 32, 0)
        );
        assert!(estimate_reals(Variant::Exact, &a, 32, 0) < estimate_reals(Variant::Exact, &b, 32, 0));
    }

    #[test]
    fn median_values() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
