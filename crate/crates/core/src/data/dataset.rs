use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid_field, Error, Result};

/// Features and integer labels in `[0, num_classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.nrows() == 0 {
            return Err(Error::EmptyDataset);
        }
        if num_classes == 0 {
            return Err(invalid_field("num_classes", "must be positive"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::Precondition(format!("label {bad} outside [0, {num_classes})")));
        }
        Ok(Self {
            features,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

/// Which CSV column holds the label. Serialized as `"last"`, a column
/// number or a header name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "LabelColumnRepr", into = "String")]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

impl FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "last" => LabelColumn::Last,
            _ => match s.parse() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(s.to_owned()),
            },
        })
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LabelColumnRepr {
    Index(usize),
    Text(String),
}

impl From<LabelColumnRepr> for LabelColumn {
    fn from(r: LabelColumnRepr) -> Self {
        match r {
            LabelColumnRepr::Index(i) => LabelColumn::Index(i),
            LabelColumnRepr::Text(s) => s.parse().unwrap_or_else(|never| match never {}),
        }
    }
}

impl From<LabelColumn> for String {
    fn from(c: LabelColumn) -> Self {
        c.to_string()
    }
}

impl fmt::Display for LabelColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelColumn::Last => f.write_str("last"),
            LabelColumn::Index(i) => write!(f, "{i}"),
            LabelColumn::Name(n) => f.write_str(n),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvOptions {
    #[serde(default)]
    pub has_header: bool,
    #[serde(default)]
    pub label_column: LabelColumn,
}

/// Reads a numeric CSV. Every column except the label column is a feature.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions, num_classes: usize) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::MissingFile(path.to_owned()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let named_column = match &options.label_column {
        LabelColumn::Name(name) => {
            if !options.has_header {
                return Err(Error::UnknownColumn(name.clone()));
            }
            let pos = reader
                .headers()?
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::UnknownColumn(name.clone()))?;
            Some(pos)
        }
        _ => None,
    };

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let label_col = match (&options.label_column, named_column) {
            (_, Some(pos)) => pos,
            (LabelColumn::Index(i), _) => *i,
            _ => record.len().saturating_sub(1),
        };
        if label_col >= record.len() || record.len() < 2 {
            return Err(Error::Shape(format!(
                "line {line} has {} columns, label column is {label_col}",
                record.len()
            )));
        }
        width.get_or_insert(record.len() - 1);
        for (column, cell) in record.iter().enumerate() {
            if column == label_col {
                let label: i64 = cell.parse().map_err(|_| Error::NonNumeric {
                    line,
                    column,
                    value: cell.to_owned(),
                })?;
                if label < 0 || label as u64 >= num_classes as u64 {
                    return Err(Error::LabelOutOfRange {
                        line,
                        label,
                        num_classes,
                    });
                }
                labels.push(label as usize);
            } else {
                let v: f64 = cell.parse().map_err(|_| Error::NonNumeric {
                    line,
                    column,
                    value: cell.to_owned(),
                })?;
                values.push(v);
            }
        }
    }
    let Some(width) = width else {
        return Err(Error::EmptyDataset);
    };
    let features = Array2::from_shape_vec((labels.len(), width), values).map_err(|e| Error::Shape(e.to_string()))?;
    Dataset::new(features, labels, num_classes)
}

/// Two isotropic Gaussian classes in the plane, centred at `(∓separation/2, 0)`.
///
/// Rows are ordered class 0 first, then class 1.
pub fn make_two_gaussians(n_per_class: usize, separation: f64, noise_sd: f64, seed: u64) -> Result<Dataset> {
    if n_per_class == 0 {
        return Err(invalid_field("n_per_class", "must be positive"));
    }
    if !separation.is_finite() {
        return Err(invalid_field("separation", "must be finite"));
    }
    let noise = Normal::new(0.0, noise_sd).map_err(|_| invalid_field("noise_sd", "must be finite and >= 0"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(4 * n_per_class);
    let mut labels = Vec::with_capacity(2 * n_per_class);
    for (class, cx) in [(0, -separation / 2.0), (1, separation / 2.0)] {
        for _ in 0..n_per_class {
            values.push(cx + noise.sample(&mut rng));
            values.push(noise.sample(&mut rng));
            labels.push(class);
        }
    }
    let features = Array2::from_shape_vec((2 * n_per_class, 2), values).expect("sized above");
    Dataset::new(features, labels, 2)
}
