//! Dataset ingestion and preprocessing.
//!
//! Raw data ([`RawDataset`]) keeps features as loaded: dense pixel tensors
//! from IDX files, or typed columns with missing entries from delimited text.
//! A [`Preprocessor`] is fitted on a training split only and then turns any
//! raw split into a [`LabeledDataset`].

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

pub const DATA_DIR_ENV: &str = "ABNET_DATA_DIR";
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;
const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;

/// `$ABNET_DATA_DIR`, or `./data` when unset.
pub fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("data"))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric { name: String, values: Vec<Option<f64>> },
    Categorical { name: String, values: Vec<Option<String>> },
}

impl Column {
    fn len(&self) -> usize {
        match self {
            Column::Numeric { values, .. } => values.len(),
            Column::Categorical { values, .. } => values.len(),
        }
    }

    fn subset(&self, idx: &[usize]) -> Self {
        match self {
            Column::Numeric { name, values } => Column::Numeric {
                name: name.clone(),
                values: idx.iter().map(|&i| values[i]).collect(),
            },
            Column::Categorical { name, values } => Column::Categorical {
                name: name.clone(),
                values: idx.iter().map(|&i| values[i].clone()).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    /// Row-major `rows × dim` values (image pixels).
    Dense { dim: usize, values: Vec<f32> },
    Tabular { columns: Vec<Column> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawLabels {
    /// Class indices, such as MNIST digits.
    Classes(Vec<u8>),
    Signs(Vec<i8>),
}

impl RawLabels {
    pub fn len(&self) -> usize {
        match self {
            RawLabels::Classes(v) => v.len(),
            RawLabels::Signs(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub features: Features,
    pub labels: RawLabels,
    pub source: String,
}

impl RawDataset {
    pub fn new(features: Features, labels: RawLabels, source: impl Into<String>) -> Result<Self> {
        let rows = match &features {
            Features::Dense { dim, values } => {
                if *dim == 0 || values.len() % dim != 0 {
                    return Err(Error::ShapeMismatch("dense features are not a whole number of rows".into()));
                }
                values.len() / dim
            }
            Features::Tabular { columns } => {
                let rows = columns.first().map_or(0, Column::len);
                if columns.iter().any(|c| c.len() != rows) {
                    return Err(Error::ShapeMismatch("columns have different lengths".into()));
                }
                rows
            }
        };
        if rows != labels.len() {
            return Err(Error::ShapeMismatch(format!(
                "{rows} feature rows for {} labels",
                labels.len()
            )));
        }
        Ok(Self {
            features,
            labels,
            source: source.into(),
        })
    }

    /// Numeric columns holding the inputs of an already vectorized dataset.
    pub fn from_labeled(data: &LabeledDataset, source: impl Into<String>) -> Self {
        let columns = (0..data.dim())
            .map(|j| Column::Numeric {
                name: format!("x{}", j + 1),
                values: data.iter().map(|(x, _)| Some(x[j])).collect(),
            })
            .collect();
        Self {
            features: Features::Tabular { columns },
            labels: RawLabels::Signs(data.labels().to_vec()),
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let features = match &self.features {
            Features::Dense { dim, values } => {
                let mut out = Vec::with_capacity(idx.len() * dim);
                for &i in idx {
                    out.extend_from_slice(&values[i * dim..(i + 1) * dim]);
                }
                Features::Dense { dim: *dim, values: out }
            }
            Features::Tabular { columns } => Features::Tabular {
                columns: columns.iter().map(|c| c.subset(idx)).collect(),
            },
        };
        let labels = match &self.labels {
            RawLabels::Classes(v) => RawLabels::Classes(idx.iter().map(|&i| v[i]).collect()),
            RawLabels::Signs(v) => RawLabels::Signs(idx.iter().map(|&i| v[i]).collect()),
        };
        Self {
            features,
            labels,
            source: self.source.clone(),
        }
    }
}

/// A parsed IDX tensor of unsigned bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

fn idx_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Idx {
        offset,
        message: message.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| idx_err(offset, "file truncated inside the header"))
}

/// Parses a big-endian IDX file whose magic must equal `expected_magic`.
pub fn parse_idx(bytes: &[u8], expected_magic: u32) -> Result<IdxArray> {
    let magic = read_u32(bytes, 0)?;
    if magic != expected_magic {
        return Err(idx_err(
            0,
            format!("bad magic {magic:#010x}, expected {expected_magic:#010x}"),
        ));
    }
    let ndim = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(ndim);
    for i in 0..ndim {
        dims.push(read_u32(bytes, 4 + 4 * i)? as usize);
    }
    let header = 4 + 4 * ndim;
    let count: usize = dims.iter().product();
    let available = bytes.len() - header;
    if available < count {
        return Err(idx_err(
            bytes.len(),
            format!("file truncated: {count} data bytes declared, {available} present"),
        ));
    }
    if available > count {
        return Err(idx_err(header + count, "trailing bytes after the declared data"));
    }
    Ok(IdxArray {
        dims,
        data: bytes[header..].to_vec(),
    })
}

/// Loads an image file (magic `0x803`) and its label file (magic `0x801`).
pub fn load_idx(images: &Path, labels: &Path) -> Result<RawDataset> {
    let img = parse_idx(&fs::read(images)?, IDX_IMAGE_MAGIC)?;
    let lab = parse_idx(&fs::read(labels)?, IDX_LABEL_MAGIC)?;
    if img.dims[0] != lab.dims[0] {
        return Err(idx_err(
            4,
            format!("{} images but {} labels", img.dims[0], lab.dims[0]),
        ));
    }
    let dim = img.dims[1..].iter().product();
    RawDataset::new(
        Features::Dense {
            dim,
            values: img.data.iter().map(|&b| f32::from(b)).collect(),
        },
        RawLabels::Classes(lab.data),
        images.display().to_string(),
    )
}

/// The MNIST training or test split from the standard file names in `dir`.
pub fn load_mnist(dir: &Path, train: bool) -> Result<RawDataset> {
    let prefix = if train { "train" } else { "t10k" };
    load_idx(
        &dir.join(format!("{prefix}-images-idx3-ubyte")),
        &dir.join(format!("{prefix}-labels-idx1-ubyte")),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MnistVariant {
    #[serde(rename = "LH")]
    LowHigh,
    #[serde(rename = "17")]
    OneSeven,
    #[serde(rename = "49")]
    FourNine,
    #[serde(rename = "56")]
    FiveSix,
}

impl std::str::FromStr for MnistVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "LH" | "lh" => Ok(Self::LowHigh),
            "17" => Ok(Self::OneSeven),
            "49" => Ok(Self::FourNine),
            "56" => Ok(Self::FiveSix),
            other => Err(Error::InvalidArgument(format!(
                "unknown MNIST variant {other:?} (expected LH, 17, 49 or 56)"
            ))),
        }
    }
}

impl MnistVariant {
    /// Sign of a digit, or `None` if the digit is dropped.
    pub fn sign(self, digit: u8) -> Option<i8> {
        let pair = |neg: u8, pos: u8| {
            if digit == neg {
                Some(-1)
            } else if digit == pos {
                Some(1)
            } else {
                None
            }
        };
        match self {
            Self::LowHigh => Some(if digit <= 4 { -1 } else { 1 }),
            Self::OneSeven => pair(1, 7),
            Self::FourNine => pair(4, 9),
            Self::FiveSix => pair(5, 6),
        }
    }
}

/// Keeps the rows of the variant's digits and relabels them as signs.
pub fn binary_mnist(raw: &RawDataset, variant: MnistVariant) -> Result<RawDataset> {
    let RawLabels::Classes(digits) = &raw.labels else {
        return Err(Error::InvalidArgument("binary MNIST needs digit labels".into()));
    };
    if let Some(&d) = digits.iter().find(|&&d| d > 9) {
        return Err(Error::InvalidArgument(format!("label {d} is not a digit")));
    }
    let (keep, signs): (Vec<usize>, Vec<i8>) = digits
        .iter()
        .enumerate()
        .filter_map(|(i, &d)| variant.sign(d).map(|s| (i, s)))
        .unzip();
    let mut out = raw.subset(&keep);
    out.labels = RawLabels::Signs(signs);
    Ok(out)
}

/// Binary MNIST with pixels scaled to `[0, 1]` and a bias feature.
pub fn make_binary_mnist(raw: &RawDataset, variant: MnistVariant) -> Result<LabeledDataset> {
    let bin = binary_mnist(raw, variant)?;
    Preprocessor::fit(&bin, &PreprocessSpec::mnist())?.transform(&bin)
}

/// Column layout and label mapping of a delimited text file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvSchema {
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_quote")]
    pub quote: char,
    #[serde(default)]
    pub has_header: bool,
    /// Lines starting with this prefix are skipped.
    #[serde(default)]
    pub comment_prefix: Option<char>,
    /// Label column; `None` means the last column.
    #[serde(default)]
    pub label_column: Option<usize>,
    pub positive_labels: Vec<String>,
    pub negative_labels: Vec<String>,
    #[serde(default)]
    pub categorical_columns: Vec<usize>,
    #[serde(default)]
    pub ignored_columns: Vec<usize>,
    #[serde(default = "default_missing")]
    pub missing_marker: String,
}

fn default_delimiter() -> char {
    ','
}

fn default_quote() -> char {
    '"'
}

fn default_missing() -> String {
    "?".into()
}

impl CsvSchema {
    /// UCI internet advertisements: 1558 numeric columns, label `ad.` / `nonad.`.
    pub fn ads() -> Self {
        Self {
            delimiter: ',',
            quote: '"',
            has_header: false,
            comment_prefix: None,
            label_column: None,
            positive_labels: vec!["ad.".into()],
            negative_labels: vec!["nonad.".into()],
            categorical_columns: vec![],
            ignored_columns: vec![],
            missing_marker: "?".into(),
        }
    }

    /// UCI adult; the test file's labels carry a trailing period.
    pub fn adult() -> Self {
        Self {
            delimiter: ',',
            quote: '"',
            has_header: false,
            comment_prefix: Some('|'),
            label_column: None,
            positive_labels: vec![">50K".into(), ">50K.".into()],
            negative_labels: vec!["<=50K".into(), "<=50K.".into()],
            categorical_columns: vec![1, 3, 5, 6, 7, 8, 9, 13],
            ignored_columns: vec![],
            missing_marker: "?".into(),
        }
    }
}

fn ascii_byte(c: char, what: &str) -> Result<u8> {
    u8::try_from(c)
        .ok()
        .filter(u8::is_ascii)
        .ok_or_else(|| Error::InvalidArgument(format!("{what} {c:?} is not ASCII")))
}

pub fn load_csv_dataset(path: &Path, schema: &CsvSchema) -> Result<RawDataset> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text, schema, &path.display().to_string())
}

pub fn parse_csv(text: &str, schema: &CsvSchema, source: &str) -> Result<RawDataset> {
    let mut builder = csv::ReaderBuilder::new();
    builder
        .delimiter(ascii_byte(schema.delimiter, "delimiter")?)
        .quote(ascii_byte(schema.quote, "quote")?)
        .has_headers(schema.has_header)
        .flexible(true)
        .trim(csv::Trim::All);
    if let Some(c) = schema.comment_prefix {
        builder.comment(Some(ascii_byte(c, "comment prefix")?));
    }
    let mut reader = builder.from_reader(text.as_bytes());
    let categorical: BTreeSet<usize> = schema.categorical_columns.iter().copied().collect();
    let ignored: BTreeSet<usize> = schema.ignored_columns.iter().copied().collect();
    let mut arity: Option<usize> = None;
    let mut columns: Vec<Column> = Vec::new();
    let mut feature_ids: Vec<usize> = Vec::new();
    let mut signs = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let width = *arity.get_or_insert_with(|| record.len());
        if record.len() != width {
            return Err(Error::Csv {
                line,
                message: format!("{} fields, expected {width}", record.len()),
            });
        }
        let label_col = schema.label_column.unwrap_or(width - 1);
        if label_col >= width {
            return Err(Error::Csv {
                line,
                message: format!("label column {label_col} out of range"),
            });
        }
        if columns.is_empty() {
            for j in (0..width).filter(|j| *j != label_col && !ignored.contains(j)) {
                feature_ids.push(j);
                let name = format!("c{j}");
                columns.push(if categorical.contains(&j) {
                    Column::Categorical { name, values: vec![] }
                } else {
                    Column::Numeric { name, values: vec![] }
                });
            }
        }
        let label = &record[label_col];
        let sign = if schema.positive_labels.iter().any(|l| l == label) {
            1
        } else if schema.negative_labels.iter().any(|l| l == label) {
            -1
        } else {
            return Err(Error::Csv {
                line,
                message: format!("label {label:?} is not in the schema's label mapping"),
            });
        };
        signs.push(sign);
        for (col, &j) in columns.iter_mut().zip(&feature_ids) {
            let field = &record[j];
            let missing = field == schema.missing_marker;
            match col {
                Column::Categorical { values, .. } => {
                    values.push((!missing).then(|| field.to_string()));
                }
                Column::Numeric { values, .. } => {
                    let v = if missing {
                        None
                    } else {
                        Some(field.parse::<f64>().map_err(|_| Error::Csv {
                            line,
                            message: format!("column {j}: {field:?} is not a number"),
                        })?)
                    };
                    values.push(v);
                }
            }
        }
    }
    if signs.is_empty() {
        return Err(Error::EmptyDataset(format!("no rows in {source}")));
    }
    RawDataset::new(Features::Tabular { columns }, RawLabels::Signs(signs), source)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    Identity,
    /// Divide every numeric feature by 255.
    Pixel,
    /// Zero mean, unit variance on the training split.
    Standardize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSpec {
    pub scaling: Scaling,
    /// Append a constant feature 1.
    #[serde(default = "default_true")]
    pub bias: bool,
}

fn default_true() -> bool {
    true
}

impl PreprocessSpec {
    pub fn mnist() -> Self {
        Self {
            scaling: Scaling::Pixel,
            bias: true,
        }
    }

    pub fn tabular() -> Self {
        Self {
            scaling: Scaling::Standardize,
            bias: true,
        }
    }
}

/// Per-column transform fitted on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnTransform {
    /// `(v − shift) / scale`, missing values replaced by `impute` first.
    Numeric { impute: f64, shift: f64, scale: f64 },
    /// One-hot over `levels` followed by one level for missing or unseen values.
    OneHot { levels: Vec<String> },
}

impl ColumnTransform {
    fn width(&self) -> usize {
        match self {
            ColumnTransform::Numeric { .. } => 1,
            ColumnTransform::OneHot { levels } => levels.len() + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub spec: PreprocessSpec,
    pub columns: Vec<ColumnTransform>,
}

fn numeric_transform(values: impl Iterator<Item = Option<f64>> + Clone, scaling: Scaling) -> ColumnTransform {
    let (sum, count) = values
        .clone()
        .flatten()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    match scaling {
        Scaling::Identity => ColumnTransform::Numeric {
            impute: mean,
            shift: 0.0,
            scale: 1.0,
        },
        Scaling::Pixel => ColumnTransform::Numeric {
            impute: mean,
            shift: 0.0,
            scale: 255.0,
        },
        Scaling::Standardize => {
            let ss: f64 = values.flatten().map(|v| (v - mean) * (v - mean)).sum();
            let sd = if count > 0 { (ss / count as f64).sqrt() } else { 0.0 };
            ColumnTransform::Numeric {
                impute: mean,
                shift: mean,
                scale: if sd > 0.0 { sd } else { 1.0 },
            }
        }
    }
}

impl Preprocessor {
    /// Fits column statistics on `train`.
    pub fn fit(train: &RawDataset, spec: &PreprocessSpec) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyDataset("training split".into()));
        }
        let columns = match &train.features {
            Features::Dense { dim, values } => (0..*dim)
                .map(|j| {
                    numeric_transform(
                        values.iter().skip(j).step_by(*dim).map(|&v| Some(f64::from(v))),
                        spec.scaling,
                    )
                })
                .collect(),
            Features::Tabular { columns } => columns
                .iter()
                .map(|c| match c {
                    Column::Numeric { values, .. } => {
                        numeric_transform(values.iter().copied(), spec.scaling)
                    }
                    Column::Categorical { values, .. } => ColumnTransform::OneHot {
                        levels: values
                            .iter()
                            .flatten()
                            .cloned()
                            .collect::<BTreeSet<_>>()
                            .into_iter()
                            .collect(),
                    },
                })
                .collect(),
        };
        Ok(Self { spec: *spec, columns })
    }

    pub fn output_dim(&self) -> usize {
        self.columns.iter().map(ColumnTransform::width).sum::<usize>() + usize::from(self.spec.bias)
    }

    pub fn transform(&self, raw: &RawDataset) -> Result<LabeledDataset> {
        let RawLabels::Signs(signs) = &raw.labels else {
            return Err(Error::InvalidArgument(
                "labels must be mapped to signs before preprocessing".into(),
            ));
        };
        let n = raw.len();
        let dim = self.output_dim();
        let mut out = vec![0.0; n * dim];
        let mut offset = 0;
        match &raw.features {
            Features::Dense { dim: width, values } => {
                if *width != self.columns.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "{width} raw features for a preprocessor fitted on {}",
                        self.columns.len()
                    )));
                }
                for (j, t) in self.columns.iter().enumerate() {
                    fill_numeric(&mut out, dim, offset, n, t, |i| Some(f64::from(values[i * width + j])));
                    offset += 1;
                }
            }
            Features::Tabular { columns } => {
                if columns.len() != self.columns.len() {
                    return Err(Error::ShapeMismatch(format!(
                        "{} raw columns for a preprocessor fitted on {}",
                        columns.len(),
                        self.columns.len()
                    )));
                }
                for (col, t) in columns.iter().zip(&self.columns) {
                    match (col, t) {
                        (Column::Numeric { values, .. }, ColumnTransform::Numeric { .. }) => {
                            fill_numeric(&mut out, dim, offset, n, t, |i| values[i]);
                        }
                        (Column::Categorical { values, .. }, ColumnTransform::OneHot { levels }) => {
                            for (i, v) in values.iter().enumerate() {
                                let level = v
                                    .as_ref()
                                    .and_then(|s| levels.binary_search(s).ok())
                                    .unwrap_or(levels.len());
                                out[i * dim + offset + level] = 1.0;
                            }
                        }
                        _ => {
                            return Err(Error::ShapeMismatch(
                                "column kinds differ from the fitted preprocessor".into(),
                            ))
                        }
                    }
                    offset += t.width();
                }
            }
        }
        if self.spec.bias {
            for i in 0..n {
                out[i * dim + dim - 1] = 1.0;
            }
        }
        let data = LabeledDataset::new(dim, out, signs.clone())?;
        if let Some(i) = data.first_zero_norm() {
            return Err(Error::InvalidArgument(format!(
                "example {i} has zero norm after preprocessing (enable the bias feature)"
            )));
        }
        Ok(data)
    }
}

fn fill_numeric(
    out: &mut [f64],
    dim: usize,
    offset: usize,
    n: usize,
    t: &ColumnTransform,
    get: impl Fn(usize) -> Option<f64>,
) {
    let ColumnTransform::Numeric { impute, shift, scale } = t else {
        unreachable!("numeric column with a one-hot transform")
    };
    for i in 0..n {
        let v = get(i).unwrap_or(*impute);
        out[i * dim + offset] = (v - shift) / scale;
    }
}

/// Fits on the `train` rows of `raw` and transforms both index sets.
pub fn preprocess(
    raw: &RawDataset,
    spec: &PreprocessSpec,
    train: &[usize],
    test: &[usize],
) -> Result<(LabeledDataset, LabeledDataset, Preprocessor)> {
    let raw_train = raw.subset(train);
    let pre = Preprocessor::fit(&raw_train, spec)?;
    let tr = pre.transform(&raw_train)?;
    let te = pre.transform(&raw.subset(test))?;
    Ok((tr, te, pre))
}

/// Seeded permutation of `0..n` cut at `round(fraction · n)`.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("split fraction {fraction} is not in (0, 1)")));
    }
    let cut = (fraction * n as f64).round() as usize;
    if cut == 0 || cut == n {
        return Err(Error::InvalidArgument(format!(
            "split of {n} rows at {fraction} leaves an empty part"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let rest = idx.split_off(cut);
    Ok((idx, rest))
}

pub fn split(data: &LabeledDataset, fraction: f64, seed: u64) -> Result<(LabeledDataset, LabeledDataset)> {
    let (a, b) = split_indices(data.len(), fraction, seed)?;
    Ok((data.subset(&a), data.subset(&b)))
}

pub const CIRCLES_INNER: f64 = 0.5;
pub const CIRCLES_OUTER: f64 = 1.0;
pub const CIRCLES_NOISE: f64 = 0.05;

/// Two concentric classes in the plane: `+1` on the inner circle, `−1` on
/// the outer, uniform angles and Gaussian radial noise. Rows alternate
/// between the classes.
pub fn generate_circles(
    n_per_class: usize,
    inner: f64,
    outer: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if !(inner > 0.0 && inner < outer) {
        return Err(Error::InvalidArgument(format!(
            "radii must satisfy 0 < inner < outer, got {inner} and {outer}"
        )));
    }
    let noise = Normal::new(0.0, noise_sd)
        .map_err(|e| Error::InvalidArgument(format!("noise: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(4 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for _ in 0..n_per_class {
        for (radius, label) in [(inner, 1i8), (outer, -1i8)] {
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let r = radius + noise.sample(&mut rng);
            inputs.push(r * angle.cos());
            inputs.push(r * angle.sin());
            labels.push(label);
        }
    }
    LabeledDataset::new(2, inputs, labels)
}
