//! Run configuration: a strict TOML document plus `key=value` overrides.

use std::path::{Path, PathBuf};

use abnet::bench::Variant;
use abnet::data::{CsvSchema, MnistVariant, Scaling, CIRCLES_INNER, CIRCLES_NOISE, CIRCLES_OUTER};
use abnet::pacbayes::DEFAULT_DELTA;
use abnet::train::{ForwardMode, Objective};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// The single source of randomness: splits, initialization, sampling.
    pub seed: u64,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub bench: BenchSection,
    pub verify: VerifySection,
    pub grid: GridSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Circles,
    Mnist,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvPreset {
    Ads,
    Adult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: DataSource,
    /// Data directory; falls back to `ABNET_DATA_DIR`, then `data`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mnist_variant: Option<MnistVariant>,
    /// Random subset of the training examples to keep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_subset: Option<usize>,
    /// CSV file, relative to the data directory unless absolute.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// Separate CSV test file; without it the data is split.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_preset: Option<CsvPreset>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv: Option<CsvSchema>,
    /// Training share when the source has no fixed test split.
    pub train_fraction: f64,
    pub n_per_class: usize,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub noise: f64,
    /// Overrides the source's default scaling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaling: Option<Scaling>,
    pub bias: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Circles,
            dir: None,
            mnist_variant: None,
            train_subset: None,
            path: None,
            test_path: None,
            csv_preset: None,
            csv: None,
            train_fraction: 0.75,
            n_per_class: 200,
            inner_radius: CIRCLES_INNER,
            outer_radius: CIRCLES_OUTER,
            noise: CIRCLES_NOISE,
            scaling: None,
            bias: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Hidden widths; the input width comes from the data.
    pub hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { hidden: vec![2] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForwardKind {
    Exact,
    Stochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub objective: Objective,
    pub forward: ForwardKind,
    /// Sampled representations per hidden layer in stochastic mode.
    pub samples: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub delta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation_fraction: Option<f64>,
    /// Initialization standard deviation; unset means `1/√d_{k−1}` per layer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_sd: Option<f64>,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            objective: Objective::Bound,
            forward: ForwardKind::Exact,
            samples: 100,
            learning_rate: 0.01,
            epochs: 100,
            patience: 20,
            batch_size: 32,
            delta: DEFAULT_DELTA,
            validation_fraction: None,
            init_sd: None,
        }
    }
}

impl TrainSection {
    pub fn forward_mode(&self) -> ForwardMode {
        match self.forward {
            ForwardKind::Exact => ForwardMode::Exact,
            ForwardKind::Stochastic => ForwardMode::Stochastic { samples: self.samples },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSection {
    pub variants: Vec<Variant>,
    pub input_dim: usize,
    /// Hidden-layer counts crossed with `widths`.
    pub hidden_layers: Vec<usize>,
    pub widths: Vec<usize>,
    /// Sample counts for the stochastic variants.
    pub samples: Vec<usize>,
    pub batch_size: usize,
    pub repetitions: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        Self {
            variants: Variant::ALL.to_vec(),
            input_dim: 16,
            hidden_layers: vec![2],
            widths: vec![2, 4, 6, 8],
            samples: vec![100],
            batch_size: 32,
            repetitions: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub samples: u64,
    pub probes: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            probes: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// `[x1_min, x1_max, x2_min, x2_max]`.
    pub bounds: [f64; 4],
    pub resolution: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            bounds: [-1.5, 1.5, -1.5, 1.5],
            resolution: 61,
        }
    }
}

/// Sets `value` at a dotted key path, creating tables as needed. The value
/// is read as a TOML literal and falls back to a bare string.
fn apply_override(doc: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Override(format!("{assignment:?} is not key=value")))?;
    let key = key.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {}", raw.trim())) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Override(format!("malformed key {key:?}")));
    }
    let (last, tables) = parts.split_last().expect("non-empty");
    let mut cur = doc;
    for part in tables {
        let entry = cur
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Override(format!("{key}: {part} is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Parses `text` after applying `overrides`; unknown keys are reported
    /// with their full path.
    pub fn parse(text: &str, overrides: &[String], origin: &str) -> Result<Self> {
        let mut doc: toml::Table = toml::from_str(text).map_err(|e| CliError::Config {
            origin: origin.to_string(),
            path: String::new(),
            message: e.to_string(),
        })?;
        for o in overrides {
            apply_override(&mut doc, o)?;
        }
        serde_path_to_error::deserialize(toml::Value::Table(doc)).map_err(|e| CliError::Config {
            origin: origin.to_string(),
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::parse(&text, overrides, &p.display().to_string())
            }
            None => Self::parse("", overrides, "<defaults>"),
        }
    }
}
