//! Turns a `[data]` section into preprocessed train and test sets.

use std::path::PathBuf;

use abnet::data::{
    binary_mnist, data_dir, generate_circles, load_csv_dataset, load_mnist, preprocess, split_indices,
    CsvSchema, PreprocessSpec, Preprocessor, RawDataset, Scaling,
};
use abnet::LabeledDataset;

use crate::config::{CsvPreset, DataConfig, DataSource};
use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub name: String,
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub preprocessor: Preprocessor,
}

fn root(cfg: &DataConfig) -> PathBuf {
    cfg.dir.clone().unwrap_or_else(data_dir)
}

fn resolve(cfg: &DataConfig, p: &PathBuf) -> PathBuf {
    if p.is_absolute() {
        p.clone()
    } else {
        root(cfg).join(p)
    }
}

fn spec(cfg: &DataConfig, default: Scaling) -> PreprocessSpec {
    PreprocessSpec {
        scaling: cfg.scaling.unwrap_or(default),
        bias: cfg.bias,
    }
}

fn schema(cfg: &DataConfig) -> Result<CsvSchema> {
    match (&cfg.csv, cfg.csv_preset) {
        (Some(s), None) => Ok(s.clone()),
        (None, Some(CsvPreset::Ads)) => Ok(CsvSchema::ads()),
        (None, Some(CsvPreset::Adult)) => Ok(CsvSchema::adult()),
        (Some(_), Some(_)) => Err(CliError::Data("give either data.csv or data.csv_preset, not both".into())),
        (None, None) => Err(CliError::Data("csv source needs data.csv or data.csv_preset".into())),
    }
}

/// Keeps a seeded random subset of `keep` rows, in their original order.
fn subsample(raw: RawDataset, keep: Option<usize>, seed: u64) -> Result<RawDataset> {
    match keep {
        Some(k) if k < raw.len() => {
            let (mut idx, _) = split_indices(raw.len(), k as f64 / raw.len() as f64, seed)?;
            idx.sort_unstable();
            Ok(raw.subset(&idx))
        }
        _ => Ok(raw),
    }
}

/// Splits one raw table with the run seed and fits on the training part.
fn split_and_fit(raw: &RawDataset, cfg: &DataConfig, spec: &PreprocessSpec, seed: u64) -> Result<(LabeledDataset, LabeledDataset, Preprocessor)> {
    let (tr, te) = split_indices(raw.len(), cfg.train_fraction, seed)?;
    Ok(preprocess(raw, spec, &tr, &te)?)
}

pub fn prepare(cfg: &DataConfig, seed: u64) -> Result<PreparedData> {
    let (name, (train, test, preprocessor)) = match cfg.source {
        DataSource::Circles => {
            let data = generate_circles(cfg.n_per_class, cfg.inner_radius, cfg.outer_radius, cfg.noise, seed)?;
            let raw = RawDataset::from_labeled(&data, "circles");
            ("circles".to_string(), split_and_fit(&raw, cfg, &spec(cfg, Scaling::Identity), seed)?)
        }
        DataSource::Mnist => {
            let variant = cfg
                .mnist_variant
                .ok_or_else(|| CliError::Data("mnist source needs data.mnist_variant".into()))?;
            let dir = root(cfg).join("mnist");
            let train = binary_mnist(&load_mnist(&dir, true)?, variant)?;
            let train = subsample(train, cfg.train_subset, seed)?;
            let test = binary_mnist(&load_mnist(&dir, false)?, variant)?;
            let pre = Preprocessor::fit(&train, &spec(cfg, Scaling::Pixel))?;
            let name = serde_json::to_value(variant)?;
            (
                format!("mnist{}", name.as_str().unwrap_or_default()),
                (pre.transform(&train)?, pre.transform(&test)?, pre),
            )
        }
        DataSource::Csv => {
            let path = cfg
                .path
                .as_ref()
                .ok_or_else(|| CliError::Data("csv source needs data.path".into()))?;
            let schema = schema(cfg)?;
            let raw = load_csv_dataset(&resolve(cfg, path), &schema)?;
            let spec = spec(cfg, Scaling::Standardize);
            let name = path.file_stem().map_or("csv".into(), |s| s.to_string_lossy().into_owned());
            let parts = match &cfg.test_path {
                Some(tp) => {
                    let train = subsample(raw, cfg.train_subset, seed)?;
                    let test = load_csv_dataset(&resolve(cfg, tp), &schema)?;
                    let pre = Preprocessor::fit(&train, &spec)?;
                    (pre.transform(&train)?, pre.transform(&test)?, pre)
                }
                None => split_and_fit(&subsample(raw, cfg.train_subset, seed)?, cfg, &spec, seed)?,
            };
            (name, parts)
        }
    };
    Ok(PreparedData {
        name,
        train,
        test,
        preprocessor,
    })
}
