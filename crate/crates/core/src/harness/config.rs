use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, make_two_gaussians, CsvOptions, Dataset, LabelColumn, Scheme};
use crate::error::{invalid_field, Result};
use crate::strategies::{StrategyConfig, StrategyKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Csv {
        path: PathBuf,
        num_classes: usize,
        #[serde(default)]
        has_header: bool,
        #[serde(default)]
        label_column: LabelColumn,
        /// Set for flattened grayscale images so clients can render rows.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        image_width: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        image_height: Option<usize>,
    },
    TwoGaussians {
        n_per_class: usize,
        separation: f64,
        noise_sd: f64,
    },
}

impl DatasetSpec {
    pub fn load(&self, seed: u64) -> Result<Dataset> {
        match self {
            DatasetSpec::Csv {
                path,
                num_classes,
                has_header,
                label_column,
                ..
            } => load_csv(
                path,
                &CsvOptions {
                    has_header: *has_header,
                    label_column: label_column.clone(),
                },
                *num_classes,
            ),
            DatasetSpec::TwoGaussians {
                n_per_class,
                separation,
                noise_sd,
            } => make_two_gaussians(*n_per_class, *separation, *noise_sd, seed),
        }
    }

    /// `(width, height)` when rows are flattened images.
    pub fn image_shape(&self) -> Option<(usize, usize)> {
        match self {
            DatasetSpec::Csv {
                image_width: Some(w),
                image_height: Some(h),
                ..
            } => Some((*w, *h)),
            _ => None,
        }
    }
}

/// Hidden layers and dropout; input and output widths come from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetSpec {
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
}

impl Default for NetSpec {
    fn default() -> Self {
        Self {
            hidden: vec![16],
            dropout_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 16,
            learning_rate: 0.1,
        }
    }
}

/// Missing fields take their [`Default`] values when deserializing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub preprocess: Scheme,
    pub test_fraction: f64,
    pub n_init: usize,
    /// Examples queried per round.
    pub n_query: usize,
    pub rounds: usize,
    pub net: NetSpec,
    pub train: TrainSpec,
    pub strategy: StrategyConfig,
    pub seed: u64,
    /// Continue from the previous round's parameters instead of a fresh init.
    pub warm_start: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSpec::TwoGaussians {
                n_per_class: 300,
                separation: 3.0,
                noise_sd: 1.0,
            },
            preprocess: Scheme::None,
            test_fraction: 1.0 / 3.0,
            n_init: 10,
            n_query: 5,
            rounds: 10,
            net: NetSpec::default(),
            train: TrainSpec::default(),
            strategy: StrategyConfig::new(StrategyKind::Entropy),
            seed: 0,
            warm_start: false,
        }
    }
}

impl ExperimentConfig {
    /// Checks everything that does not need the data; the pool-capacity
    /// constraint is checked once the pool exists.
    pub fn validate(&self) -> Result<()> {
        if self.n_init == 0 {
            return Err(invalid_field("n_init", "must be at least 1"));
        }
        if self.n_query == 0 {
            return Err(invalid_field("n_query", "must be at least 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(invalid_field("test_fraction", "must lie in (0, 1)"));
        }
        if self.net.hidden.contains(&0) {
            return Err(invalid_field("hidden", "every hidden width must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.net.dropout_rate) {
            return Err(invalid_field("dropout_rate", "must lie in [0, 1)"));
        }
        if self.train.epochs == 0 {
            return Err(invalid_field("epochs", "must be positive"));
        }
        if self.train.batch_size == 0 {
            return Err(invalid_field("batch_size", "must be positive"));
        }
        if !(self.train.learning_rate > 0.0 && self.train.learning_rate.is_finite()) {
            return Err(invalid_field("learning_rate", "must be positive"));
        }
        match &self.dataset {
            DatasetSpec::TwoGaussians {
                n_per_class, noise_sd, ..
            } => {
                if *n_per_class == 0 {
                    return Err(invalid_field("n_per_class", "must be positive"));
                }
                if noise_sd.is_nan() || *noise_sd < 0.0 {
                    return Err(invalid_field("noise_sd", "must be non-negative"));
                }
            }
            DatasetSpec::Csv { num_classes, .. } if *num_classes == 0 => {
                return Err(invalid_field("num_classes", "must be positive"));
            }
            DatasetSpec::Csv { .. } => {}
        }
        self.strategy.validate()
    }
}
