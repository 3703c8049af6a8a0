//! The labeled pool, unlabeled pool and test set behind one training matrix
//! and a labeled mask.
//!
//! Ground-truth labels of training rows are held but not exposed: they are
//! only read when [`Pool::update`] plays the simulated oracle. Everything a
//! query strategy can see goes through [`Pool::labeled_view`] and
//! [`Pool::unlabeled_view`].

use std::collections::HashSet;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dataset, Preprocessor, Scheme};
use crate::error::{invalid_field, Error, Result};

const DIVERSITY_RETRIES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pool {
    x_train: Array2<f64>,
    x_train_raw: Array2<f64>,
    ground_truth: Vec<usize>,
    /// Label assigned by the oracle, `Some` exactly for labeled rows.
    assigned: Vec<Option<usize>>,
    x_test: Array2<f64>,
    y_test: Vec<usize>,
    num_classes: usize,
}

#[derive(Debug, Clone)]
pub struct LabeledView {
    pub x: Array2<f64>,
    pub y: Vec<usize>,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct UnlabeledView {
    pub x: Array2<f64>,
    pub indices: Vec<usize>,
}

impl Pool {
    /// Builds a pool from explicit parts; labeled rows take their ground truth.
    pub fn new(
        x_train: Array2<f64>,
        y_train: Vec<usize>,
        labeled_mask: &[bool],
        x_test: Array2<f64>,
        y_test: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if x_train.nrows() != y_train.len() || y_train.len() != labeled_mask.len() {
            return Err(Error::Shape(format!(
                "train rows {}, labels {}, mask {}",
                x_train.nrows(),
                y_train.len(),
                labeled_mask.len()
            )));
        }
        if x_test.nrows() != y_test.len() {
            return Err(Error::Shape(format!(
                "test rows {}, labels {}",
                x_test.nrows(),
                y_test.len()
            )));
        }
        if x_test.ncols() != x_train.ncols() {
            return Err(Error::Shape("train and test widths differ".into()));
        }
        if num_classes == 0 {
            return Err(invalid_field("num_classes", "must be positive"));
        }
        if y_train.iter().chain(&y_test).any(|&y| y >= num_classes) {
            return Err(Error::Precondition(format!("labels must lie in [0, {num_classes})")));
        }
        let assigned = labeled_mask
            .iter()
            .zip(&y_train)
            .map(|(&m, &y)| m.then_some(y))
            .collect();
        Ok(Self {
            x_train_raw: x_train.clone(),
            x_train,
            ground_truth: y_train,
            assigned,
            x_test,
            y_test,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.assigned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assigned.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.x_train.ncols()
    }

    pub fn n_labeled(&self) -> usize {
        self.assigned.iter().filter(|a| a.is_some()).count()
    }

    pub fn n_unlabeled(&self) -> usize {
        self.len() - self.n_labeled()
    }

    pub fn is_labeled(&self, index: usize) -> bool {
        self.assigned.get(index).is_some_and(|a| a.is_some())
    }

    pub fn labeled_mask(&self) -> Vec<bool> {
        self.assigned.iter().map(Option::is_some).collect()
    }

    /// Model-space training features (after preprocessing).
    pub fn x_train(&self) -> ArrayView2<'_, f64> {
        self.x_train.view()
    }

    /// Training features as loaded, before preprocessing.
    pub fn x_train_raw(&self) -> ArrayView2<'_, f64> {
        self.x_train_raw.view()
    }

    pub fn x_test(&self) -> ArrayView2<'_, f64> {
        self.x_test.view()
    }

    pub fn y_test(&self) -> &[usize] {
        &self.y_test
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.is_labeled(i)).collect()
    }

    pub fn unlabeled_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.is_labeled(i)).collect()
    }

    /// Labeled rows in ascending global-index order.
    pub fn labeled_view(&self) -> LabeledView {
        let indices = self.labeled_indices();
        LabeledView {
            x: self.x_train.select(Axis(0), &indices),
            y: indices.iter().map(|&i| self.assigned[i].expect("labeled")).collect(),
            indices,
        }
    }

    /// Unlabeled rows in ascending global-index order.
    pub fn unlabeled_view(&self) -> UnlabeledView {
        let indices = self.unlabeled_indices();
        UnlabeledView {
            x: self.x_train.select(Axis(0), &indices),
            indices,
        }
    }

    /// Fits `scheme` on the training rows and applies it to train and test.
    pub fn preprocess(&mut self, scheme: Scheme) -> Result<Preprocessor> {
        let p = Preprocessor::fit(scheme, self.x_train_raw.view())?;
        self.x_train = p.transform(self.x_train_raw.view())?;
        self.x_test = p.transform(self.x_test.view())?;
        Ok(p)
    }

    fn check_query(&self, indices: impl IntoIterator<Item = usize>) -> Result<()> {
        let mut seen = HashSet::new();
        for index in indices {
            if index >= self.len() {
                return Err(Error::IndexOutOfRange { index, len: self.len() });
            }
            if self.is_labeled(index) {
                return Err(Error::AlreadyLabeled { index });
            }
            if !seen.insert(index) {
                return Err(Error::DuplicateIndex { index });
            }
        }
        Ok(())
    }

    /// Moves the queried rows to the labeled pool using the held ground truth.
    ///
    /// Validation happens before any change, so a failed update leaves the
    /// pool untouched.
    pub fn update(&mut self, query: &[usize]) -> Result<()> {
        self.check_query(query.iter().copied())?;
        for &i in query {
            self.assigned[i] = Some(self.ground_truth[i]);
        }
        Ok(())
    }

    /// Moves rows to the labeled pool with labels supplied by an external oracle.
    pub fn update_with_labels(&mut self, labeled: &[(usize, usize)]) -> Result<()> {
        self.check_query(labeled.iter().map(|&(i, _)| i))?;
        if let Some(&(index, label)) = labeled.iter().find(|&&(_, y)| y >= self.num_classes) {
            return Err(Error::Precondition(format!(
                "label {label} for index {index} outside [0, {})",
                self.num_classes
            )));
        }
        for &(i, y) in labeled {
            self.assigned[i] = Some(y);
        }
        Ok(())
    }
}

/// Shuffles, holds out a test split, and labels `n_init` training rows.
///
/// When the training rows contain at least two classes and `n_init >= 2`, the
/// initial labeled set is redrawn (up to a bounded number of times) until it
/// contains two classes; if every draw fails, one member is swapped for the
/// first training row of a different class.
pub fn initialize_pool(dataset: &Dataset, test_fraction: f64, n_init: usize, seed: u64) -> Result<Pool> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(invalid_field("test_fraction", "must lie in (0, 1)"));
    }
    if n_init == 0 {
        return Err(invalid_field("n_init", "must be at least 1"));
    }
    let n = dataset.len();
    let n_test = ((n as f64 * test_fraction).round() as usize).max(1);
    if n_test >= n {
        return Err(invalid_field("test_fraction", "leaves no training rows"));
    }
    let n_train = n - n_test;
    if n_init > n_train {
        return Err(invalid_field(
            "n_init",
            format!("{n_init} exceeds the {n_train} available training rows"),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let (test_rows, train_rows) = order.split_at(n_test);

    let y_train: Vec<usize> = train_rows.iter().map(|&i| dataset.labels[i]).collect();
    let y_test: Vec<usize> = test_rows.iter().map(|&i| dataset.labels[i]).collect();

    let distinct = |idx: &[usize]| idx.iter().map(|&i| y_train[i]).collect::<HashSet<_>>().len();
    let all: Vec<usize> = (0..n_train).collect();
    let want_diverse = n_init >= 2 && distinct(&all) >= 2;

    let mut candidates = all.clone();
    let mut chosen = Vec::new();
    for _ in 0..DIVERSITY_RETRIES {
        candidates.shuffle(&mut rng);
        chosen = candidates[..n_init].to_vec();
        if !want_diverse || distinct(&chosen) >= 2 {
            break;
        }
    }
    if want_diverse && distinct(&chosen) < 2 {
        let present = y_train[chosen[0]];
        let other = all
            .iter()
            .copied()
            .find(|&i| y_train[i] != present)
            .expect("two classes present");
        *chosen.last_mut().expect("n_init >= 2") = other;
    }

    let mut mask = vec![false; n_train];
    for i in chosen {
        mask[i] = true;
    }
    Pool::new(
        dataset.features.select(Axis(0), train_rows),
        y_train,
        &mask,
        dataset.features.select(Axis(0), test_rows),
        y_test,
        dataset.num_classes,
    )
}

/// Fraction of predictions equal to the reference labels.
pub fn evaluate_accuracy(predictions: &[usize], truth: &[usize]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}
