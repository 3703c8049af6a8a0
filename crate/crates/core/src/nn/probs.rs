//! Class-probability matrices produced by the classifier.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Tolerance on row sums accepted by [`ProbMatrix::new`].
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Row drift beyond which averaged stacks are renormalized.
const RENORM_TOL: f64 = 1e-12;

/// Per-example class probabilities `P(y|x)`: rows are examples, columns classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMatrix(Array2<f64>);

impl ProbMatrix {
    /// Wraps a matrix after checking that every row is a probability vector.
    pub fn new(probs: Array2<f64>) -> Result<Self> {
        if probs.ncols() == 0 {
            return Err(Error::Shape("probability matrix has no columns".into()));
        }
        for (i, row) in probs.outer_iter().enumerate() {
            if row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(Error::Numeric(format!(
                    "row {i} has a negative or non-finite probability"
                )));
            }
            let sum: f64 = row.sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::Numeric(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self(probs))
    }

    /// Row-wise softmax with max subtraction.
    pub fn from_logits(logits: ArrayView2<'_, f64>) -> Result<Self> {
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite logits".into()));
        }
        let mut probs = logits.to_owned();
        for mut row in probs.outer_iter_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        Ok(Self(probs))
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.0.row(i)
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.0.ncols()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }

    /// Row-wise argmax, ties broken by the lowest class index.
    pub fn argmax(&self) -> Vec<usize> {
        self.0.outer_iter().map(|row| argmax(row)).collect()
    }
}

pub(crate) fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Probabilities from several dropout-active passes over the same examples.
#[derive(Debug, Clone, PartialEq)]
pub struct McProbStack {
    passes: Vec<ProbMatrix>,
}

impl McProbStack {
    pub fn new(passes: Vec<ProbMatrix>) -> Result<Self> {
        let Some(first) = passes.first() else {
            return Err(Error::Config("a dropout stack needs at least one pass".into()));
        };
        let shape = first.view().dim();
        if passes.iter().any(|p| p.view().dim() != shape) {
            return Err(Error::Shape("dropout passes differ in shape".into()));
        }
        Ok(Self { passes })
    }

    pub fn passes(&self) -> &[ProbMatrix] {
        &self.passes
    }

    pub fn n_drop(&self) -> usize {
        self.passes.len()
    }

    pub fn nrows(&self) -> usize {
        self.passes[0].nrows()
    }

    /// Mean predictive distribution across passes.
    pub fn mean(&self) -> ProbMatrix {
        let mut acc = self.passes[0].0.clone();
        for p in &self.passes[1..] {
            acc += &p.0;
        }
        acc /= self.passes.len() as f64;
        for mut row in acc.axis_iter_mut(Axis(0)) {
            let sum = row.sum();
            if (sum - 1.0).abs() > RENORM_TOL {
                row /= sum;
            }
        }
        ProbMatrix(acc)
    }
}
