//! Architectures and weight containers.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default cap on hidden widths in exact mode (2^16 representations).
pub const DEFAULT_WIDTH_CAP: usize = 16;

/// Layer widths `⟨d₀, d₁, …, d_L⟩`; the last one is always 1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Architecture {
    widths: Vec<usize>,
}

impl Architecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArchitecture(
                "need an input width and at least one layer".into(),
            ));
        }
        if let Some(k) = widths.iter().position(|&d| d == 0) {
            return Err(Error::InvalidArchitecture(format!("layer {k} has width 0")));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::InvalidArchitecture(
                "output layer must have width 1".into(),
            ));
        }
        Ok(Self { widths })
    }

    /// Input width followed by hidden widths, with the scalar output appended.
    pub fn from_hidden(input_dim: usize, hidden: &[usize]) -> Result<Self> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input_dim);
        widths.extend_from_slice(hidden);
        widths.push(1);
        Self::new(widths)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Number of weight layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    /// `d_k`, with `k = 0` the input.
    pub fn width(&self, k: usize) -> usize {
        self.widths[k]
    }

    /// Widths of layers `1 … L−1`.
    pub fn hidden_widths(&self) -> &[usize] {
        &self.widths[1..self.widths.len() - 1]
    }

    /// Largest layer width, `max_k d_k` for `k ≥ 1`.
    pub fn max_width(&self) -> usize {
        self.widths[1..].iter().copied().max().unwrap_or(1)
    }

    /// Rejects hidden widths above `cap` (exact-mode construction).
    pub fn check_exact(&self, cap: usize) -> Result<()> {
        for (k, &width) in self.widths.iter().enumerate().skip(1) {
            if width > cap {
                return Err(Error::WidthCap {
                    layer: k,
                    width,
                    cap,
                });
            }
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for Architecture {
    type Error = Error;
    fn try_from(widths: Vec<usize>) -> Result<Self> {
        Self::new(widths)
    }
}

impl From<Architecture> for Vec<usize> {
    fn from(a: Architecture) -> Self {
        a.widths
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {rows}×{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `self · x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Per-layer weights `⟨W₁ … W_L⟩`, matrix `k` shaped `d_k × d_{k−1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Matrix>", into = "Vec<Matrix>")]
pub struct WeightStack {
    layers: Vec<Matrix>,
}

impl WeightStack {
    pub fn new(layers: Vec<Matrix>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArchitecture("no layers".into()));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[1].cols() != pair[0].rows() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {} expects {} inputs but layer {} has {} outputs",
                    k + 2,
                    pair[1].cols(),
                    k + 1,
                    pair[0].rows()
                )));
            }
        }
        if layers.last().unwrap().rows() != 1 {
            return Err(Error::InvalidArchitecture(
                "output layer must have one row".into(),
            ));
        }
        if let Some(k) = layers.iter().position(|m| m.rows() == 0 || m.cols() == 0) {
            return Err(Error::InvalidArchitecture(format!("layer {} is empty", k + 1)));
        }
        if let Some(k) = layers.iter().position(|m| !m.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("weights of layer {}", k + 1),
            });
        }
        Ok(Self { layers })
    }

    pub fn zeros(arch: &Architecture) -> Self {
        let w = arch.widths();
        Self {
            layers: w.windows(2).map(|p| Matrix::zeros(p[1], p[0])).collect(),
        }
    }

    pub fn architecture(&self) -> Architecture {
        let mut widths = vec![self.layers[0].cols()];
        widths.extend(self.layers.iter().map(Matrix::rows));
        Architecture { widths }
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `W_k` for `k` in `1..=L`.
    pub fn layer(&self, k: usize) -> &Matrix {
        &self.layers[k - 1]
    }

    pub fn layers(&self) -> &[Matrix] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Matrix] {
        &mut self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|m| m.as_slice().len()).sum()
    }

    /// All entries, layer by layer in row-major order.
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|m| m.as_slice().iter().copied())
            .collect()
    }

    /// Overwrites every entry from `values`, in the order of [`Self::flat`].
    pub fn assign_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} weights",
                values.len(),
                self.param_count()
            )));
        }
        let mut rest = values;
        for m in &mut self.layers {
            let n = m.as_slice().len();
            m.as_mut_slice().copy_from_slice(&rest[..n]);
            rest = &rest[n..];
        }
        Ok(())
    }

    pub fn flat_get(&self, mut i: usize) -> f64 {
        for m in &self.layers {
            let n = m.as_slice().len();
            if i < n {
                return m.as_slice()[i];
            }
            i -= n;
        }
        panic!("flat index out of range")
    }

    pub fn flat_set(&mut self, mut i: usize, v: f64) {
        for m in &mut self.layers {
            let n = m.as_slice().len();
            if i < n {
                m.as_mut_slice()[i] = v;
                return;
            }
            i -= n;
        }
        panic!("flat index out of range")
    }

    pub fn same_shape(&self, other: &WeightStack) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.shape() == b.shape())
    }

    /// Hex SHA-256 of the shapes and IEEE bit patterns of every entry.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for m in &self.layers {
            h.update((m.rows() as u64).to_le_bytes());
            h.update((m.cols() as u64).to_le_bytes());
            for v in m.as_slice() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

impl TryFrom<Vec<Matrix>> for WeightStack {
    type Error = Error;
    fn try_from(layers: Vec<Matrix>) -> Result<Self> {
        Self::new(layers)
    }
}

impl From<WeightStack> for Vec<Matrix> {
    fn from(w: WeightStack) -> Self {
        w.layers
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn architecture_validation() {
        assert!(Architecture::new(vec![3]).is_err());
        assert!(Architecture::new(vec![3, 0, 1]).is_err());
        assert!(Architecture::new(vec![3, 2, 2]).is_err());
        let a = Architecture::new(vec![4, 3, 4, 2, 1]).unwrap();
        assert_eq!(a.depth(), 4);
        assert_eq!(a.hidden_widths(), &[3, 4, 2]);
        assert_eq!(Architecture::from_hidden(4, &[3, 4, 2]).unwrap(), a);
    }

    #[test]
    fn width_cap() {
        let a = Architecture::new(vec![5, 17, 1]).unwrap();
        assert!(matches!(
            a.check_exact(DEFAULT_WIDTH_CAP),
            Err(Error::WidthCap { layer: 1, width: 17, cap: 16 })
        ));
        assert!(a.check_exact(17).is_ok());
    }

    #[test]
    fn weight_stack_shapes() {
        let a = Architecture::new(vec![3, 2, 2, 1]).unwrap();
        let w = WeightStack::zeros(&a);
        assert_eq!(w.architecture(), a);
        assert_eq!(w.param_count(), 6 + 4 + 2);
        let bad = WeightStack::new(vec![Matrix::zeros(2, 3), Matrix::zeros(1, 3)]);
        assert!(matches!(bad, Err(Error::ShapeMismatch(_))));
        let nan = WeightStack::new(vec![Matrix::from_vec(1, 1, vec![f64::NAN]).unwrap()]);
        assert!(matches!(nan, Err(Error::NonFinite { .. })));
    }

    #[test]
    fn flat_access_and_fingerprint() {
        let a = Architecture::new(vec![2, 2, 1]).unwrap();
        let mut w = WeightStack::zeros(&a);
        let before = w.fingerprint();
        w.flat_set(5, 1.5);
        assert_eq!(w.layer(2).get(0, 1), 1.5);
        assert_eq!(w.flat_get(5), 1.5);
        assert_ne!(before, w.fingerprint());
        assert_eq!(w.flat().len(), 6);
    }
}
