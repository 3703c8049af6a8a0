use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    None,
    MinMax,
    Standardize,
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Scheme::None),
            "min_max" | "minmax" => Ok(Scheme::MinMax),
            "standardize" => Ok(Scheme::Standardize),
            other => Err(Error::Config(format!("unknown preprocessing scheme {other:?}"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::None => "none",
            Scheme::MinMax => "min_max",
            Scheme::Standardize => "standardize",
        })
    }
}

/// Per-feature affine map `x ↦ (x - offset) / scale`, fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    scheme: Scheme,
    offset: Array1<f64>,
    scale: Array1<f64>,
}

impl Preprocessor {
    pub fn fit(scheme: Scheme, x_train: ArrayView2<'_, f64>) -> Result<Self> {
        let d = x_train.ncols();
        let (offset, scale) = match scheme {
            Scheme::None => (Array1::zeros(d), Array1::ones(d)),
            _ if x_train.nrows() == 0 => return Err(Error::EmptyDataset),
            Scheme::MinMax => {
                let min = x_train.fold_axis(Axis(0), f64::INFINITY, |m, &v| m.min(v));
                let max = x_train.fold_axis(Axis(0), f64::NEG_INFINITY, |m, &v| m.max(v));
                (min.clone(), &max - &min)
            }
            Scheme::Standardize => {
                let mean = x_train.mean_axis(Axis(0)).expect("non-empty");
                let sd = x_train.std_axis(Axis(0), 0.0);
                (mean, sd)
            }
        };
        // Constant features keep their centred value instead of dividing by zero.
        let scale = scale.mapv(|s| if s > 0.0 && s.is_finite() { s } else { 1.0 });
        Ok(Self { scheme, offset, scale })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.offset.len() {
            return Err(Error::Shape(format!(
                "preprocessor fitted on {} features, got {}",
                self.offset.len(),
                x.ncols()
            )));
        }
        if self.scheme == Scheme::None {
            return Ok(x.to_owned());
        }
        Ok((&x - &self.offset) / &self.scale)
    }
}
