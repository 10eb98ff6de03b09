//! Self-contained JSON model files.
//!
//! A full model carries its weights, the prior and the bound context, so the
//! certificate can be recomputed without the training run. Compact models
//! replace the weights by the leading layer and the precomputed head.

use std::path::Path;

use abnet::compact::CompactModel;
use abnet::data::Preprocessor;
use abnet::exact::ExactNetwork;
use abnet::pacbayes::{kl_divergence, optimal_bound, BoundContext, BoundReport, Predictor};
use abnet::stochastic::{SampledRepresentationSets, StochasticNetwork};
use abnet::train::{ForwardMode, Objective};
use abnet::{Architecture, WeightStack};
use serde::{Deserialize, Serialize};

use crate::config::DataConfig;
use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Full,
    Compact,
    CompactStochastic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingMetadata {
    pub seed: u64,
    pub dataset: String,
    pub data: DataConfig,
    pub objective: Objective,
    pub forward: ForwardMode,
    pub learning_rate: f64,
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_sd: Option<f64>,
    pub epochs_run: usize,
    pub best_epoch: usize,
}

/// Equivalence check of a compact model against its source on seeded
/// Gaussian inputs; the inputs are regenerated from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeCheck {
    pub seed: u64,
    pub points: usize,
    pub max_abs_deviation: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub kind: ModelKind,
    /// Architecture of the trained network (also for compact files).
    pub architecture: Architecture,
    pub preprocessor: Preprocessor,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<WeightStack>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<WeightStack>,
    /// Frozen evaluation sets of a stochastic model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<SampledRepresentationSets>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compact: Option<CompactModel>,
    /// Trade-off learned during training.
    pub c: f64,
    pub context: BoundContext,
    pub certificate: BoundReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probe: Option<ProbeCheck>,
    pub metadata: TrainingMetadata,
}

impl ModelFile {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Model(m));
        if self.format_version != FORMAT_VERSION {
            return bad(format!("format version {} (expected {FORMAT_VERSION})", self.format_version));
        }
        match self.kind {
            ModelKind::Full => {
                let (Some(w), Some(p)) = (&self.weights, &self.prior) else {
                    return bad("full model without weights or prior".into());
                };
                if w.architecture() != self.architecture || !w.same_shape(p) {
                    return bad("weights, prior and architecture disagree".into());
                }
                if self.compact.is_some() {
                    return bad("full model with a compact section".into());
                }
            }
            ModelKind::Compact | ModelKind::CompactStochastic => {
                let Some(m) = &self.compact else {
                    return bad("compact model without its compact section".into());
                };
                if m.is_stochastic() != (self.kind == ModelKind::CompactStochastic) {
                    return bad("compact section does not match the model kind".into());
                }
                if m.source_architecture != self.architecture {
                    return bad("compact section was built from another architecture".into());
                }
            }
        }
        if self.preprocessor.output_dim() != self.architecture.input_dim() {
            return bad(format!(
                "preprocessor produces {} features for an input width of {}",
                self.preprocessor.output_dim(),
                self.architecture.input_dim()
            ));
        }
        Ok(())
    }

    pub fn full_weights(&self) -> Result<(&WeightStack, &WeightStack)> {
        match (self.kind, &self.weights, &self.prior) {
            (ModelKind::Full, Some(w), Some(p)) => Ok((w, p)),
            _ => Err(CliError::Model(format!("{:?} model has no full weights", self.kind))),
        }
    }

    /// The network that produces this model's predictions.
    pub fn predictor(&self) -> Result<Box<dyn Predictor>> {
        Ok(match self.kind {
            ModelKind::Full => {
                let (w, _) = self.full_weights()?;
                match &self.sets {
                    Some(s) => Box::new(StochasticNetwork::new(w.clone(), s)?),
                    None => Box::new(ExactNetwork::new(w.clone())?),
                }
            }
            ModelKind::Compact | ModelKind::CompactStochastic => {
                Box::new(self.compact.clone().expect("validated compact section"))
            }
        })
    }

    /// Certificate recomputed from the stored loss, the weights' KL and the
    /// context; compact files return the stored certificate.
    pub fn recompute_certificate(&self) -> Result<BoundReport> {
        match self.kind {
            ModelKind::Full => {
                let (w, p) = self.full_weights()?;
                let kl = kl_divergence(w, p)?;
                Ok(optimal_bound(self.certificate.empirical_loss, kl, &self.context))
            }
            _ => Ok(self.certificate),
        }
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut v = serde_json::to_vec_pretty(self)?;
        v.push(b'\n');
        Ok(v)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| CliError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_slice(&bytes);
        let model: ModelFile = serde_path_to_error::deserialize(de).map_err(|source| CliError::ModelFormat {
            path: path.to_path_buf(),
            source,
        })?;
        model.validate()?;
        Ok(model)
    }
}
