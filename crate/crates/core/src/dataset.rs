use serde::{Deserialize, Serialize};

use crate::arch::norm;
use crate::error::{Error, Result};

/// `n` inputs of dimension `d₀` with labels in {−1, +1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    dim: usize,
    inputs: Vec<f64>,
    labels: Vec<i8>,
}

impl LabeledDataset {
    pub fn new(dim: usize, inputs: Vec<f64>, labels: Vec<i8>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("input dimension must be positive".into()));
        }
        if inputs.len() != dim * labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} input values for {} labels of dimension {dim}",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::InvalidArgument(format!("label {bad} is not ±1")));
        }
        Ok(Self {
            dim,
            inputs,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<i8>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch("ragged input rows".into()));
        }
        Self::new(dim, rows.concat(), labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> i8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn inputs_flat(&self) -> &[f64] {
        &self.inputs
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], i8)> + '_ {
        self.inputs
            .chunks_exact(self.dim)
            .zip(self.labels.iter().copied())
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut inputs = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            inputs.extend_from_slice(self.input(i));
        }
        Self {
            dim: self.dim,
            inputs,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Index of the first input with zero Euclidean norm, if any.
    pub fn first_zero_norm(&self) -> Option<usize> {
        self.inputs
            .chunks_exact(self.dim)
            .position(|x| norm(x) == 0.0)
    }
}
