use std::collections::{BTreeMap, HashSet};

use poolal_core::harness::{Experiment, ExperimentConfig, RoundRecord};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

/// Who answers label queries.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Labels come from the held ground truth.
    #[default]
    Simulated,
    /// Labels are posted by an annotator.
    Human,
}

/// One submitted label. `label` is signed so that negative values can be
/// reported as validation errors rather than parse failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSubmission {
    pub index: usize,
    pub label: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPair {
    pub index: usize,
    pub label: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShape {
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingItem {
    pub index: usize,
    /// The row as loaded, before preprocessing.
    pub features: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub coordinates: Option<[f64; 2]>,
}

/// A training point drawn behind the queries in 2-D views. Only labeled
/// points carry a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextPoint {
    pub index: usize,
    pub coordinates: [f64; 2],
    pub label: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendingView {
    /// The round these queries belong to.
    pub round: usize,
    pub num_classes: usize,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub image: Option<ImageShape>,
    pub items: Vec<PendingItem>,
    /// Labels accepted so far for this round.
    pub submitted: Vec<LabelPair>,
    pub remaining: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub context: Option<Vec<ContextPoint>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub mode: Mode,
    pub config: ExperimentConfig,
    /// Last completed round.
    pub round: usize,
    pub rounds: usize,
    pub done: bool,
    pub n_labeled: usize,
    pub num_classes: usize,
    pub pending: usize,
}

/// Everything the read endpoints serve, rebuilt after each mutation.
#[derive(Debug, Clone)]
pub struct SessionView {
    pub summary: SessionSummary,
    pub records: Vec<RoundRecord>,
    pub pending: PendingView,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Advance {
    RoundCompleted { record: RoundRecord, done: bool },
    Pending { pending: PendingView },
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Submitted {
    pub remaining: usize,
    /// Present when this submission completed the round.
    pub record: Option<RoundRecord>,
    pub done: bool,
}

/// Mutable state of one session.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionState {
    id: String,
    mode: Mode,
    experiment: Experiment,
    pending: Vec<usize>,
    submitted: BTreeMap<usize, usize>,
}

impl SessionState {
    /// Builds the pool and trains the round-0 classifier.
    pub fn create(id: String, config: ExperimentConfig, mode: Mode) -> Result<Self, ApiError> {
        Ok(Self {
            id,
            mode,
            experiment: Experiment::start(config)?,
            pending: vec![],
            submitted: BTreeMap::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn experiment(&self) -> &Experiment {
        &self.experiment
    }

    pub fn advance(&mut self) -> Result<Advance, ApiError> {
        if !self.pending.is_empty() {
            return Err(ApiError::conflict(format!(
                "{} labels are still pending for round {}",
                self.pending.len() - self.submitted.len(),
                self.experiment.round() + 1
            )));
        }
        if self.experiment.is_done() {
            return Ok(Advance::Done);
        }
        match self.mode {
            Mode::Simulated => {
                let record = self.experiment.step()?.clone();
                Ok(Advance::RoundCompleted {
                    record,
                    done: self.experiment.is_done(),
                })
            }
            Mode::Human => {
                self.pending = self.experiment.query()?.selected;
                Ok(Advance::Pending {
                    pending: self.pending_view(),
                })
            }
        }
    }

    /// Validates the whole batch before recording any of it. The round is
    /// retrained only once every pending index has a label.
    pub fn submit(&mut self, labels: &[LabelSubmission]) -> Result<Submitted, ApiError> {
        if self.mode != Mode::Human {
            return Err(ApiError::wrong_mode(
                "labels can only be submitted to human-mode sessions",
            ));
        }
        if self.pending.is_empty() {
            return Err(ApiError::conflict("no labels are pending; advance the session first"));
        }
        if labels.is_empty() {
            return Err(ApiError::validation(Some("labels"), "no labels in request"));
        }
        let k = self.experiment.pool().num_classes();
        let mut seen = HashSet::new();
        for s in labels {
            if !self.pending.contains(&s.index) {
                return Err(ApiError::validation(
                    Some("index"),
                    format!("index {} is not pending", s.index),
                ));
            }
            if !seen.insert(s.index) {
                return Err(ApiError::validation(
                    Some("index"),
                    format!("index {} appears more than once", s.index),
                ));
            }
            if s.label < 0 || s.label as u64 >= k as u64 {
                return Err(ApiError::validation(
                    Some("label"),
                    format!("label {} for index {} is outside [0, {k})", s.label, s.index),
                ));
            }
        }
        for s in labels {
            self.submitted.insert(s.index, s.label as usize);
        }
        let remaining = self.pending.len() - self.submitted.len();
        let mut record = None;
        if remaining == 0 {
            let labels: Vec<usize> = self.pending.iter().map(|i| self.submitted[i]).collect();
            // On failure the experiment is untouched and the labels stay recorded.
            let r = self.experiment.complete_round(self.pending.clone(), Some(&labels))?;
            record = Some(r.clone());
            self.pending.clear();
            self.submitted.clear();
        }
        Ok(Submitted {
            remaining,
            record,
            done: self.experiment.is_done(),
        })
    }

    /// True between rounds, where snapshots are taken.
    pub fn at_round_boundary(&self) -> bool {
        self.pending.is_empty()
    }

    fn pending_view(&self) -> PendingView {
        let pool = self.experiment.pool();
        let raw = pool.x_train_raw();
        let planar = pool.dim() == 2;
        let coords = |i: usize| [raw[[i, 0]], raw[[i, 1]]];
        let items = self
            .pending
            .iter()
            .map(|&i| PendingItem {
                index: i,
                features: raw.row(i).to_vec(),
                coordinates: planar.then(|| coords(i)),
            })
            .collect();
        let context = (planar && !self.pending.is_empty()).then(|| {
            let labeled = pool.labeled_view();
            let mut labels = vec![None; pool.len()];
            for (&i, &y) in labeled.indices.iter().zip(&labeled.y) {
                labels[i] = Some(y);
            }
            (0..pool.len())
                .map(|i| ContextPoint {
                    index: i,
                    coordinates: coords(i),
                    label: labels[i],
                })
                .collect()
        });
        PendingView {
            round: self.experiment.round() + 1,
            num_classes: pool.num_classes(),
            dim: pool.dim(),
            image: self
                .experiment
                .config()
                .dataset
                .image_shape()
                .map(|(width, height)| ImageShape { width, height }),
            items,
            submitted: self
                .submitted
                .iter()
                .map(|(&index, &label)| LabelPair { index, label })
                .collect(),
            remaining: self.pending.len() - self.submitted.len(),
            context,
        }
    }

    pub fn view(&self) -> SessionView {
        let exp = &self.experiment;
        SessionView {
            summary: SessionSummary {
                session_id: self.id.clone(),
                mode: self.mode,
                config: exp.config().clone(),
                round: exp.round(),
                rounds: exp.config().rounds,
                done: exp.is_done(),
                n_labeled: exp.pool().n_labeled(),
                num_classes: exp.pool().num_classes(),
                pending: self.pending.len(),
            },
            records: exp.records().to_vec(),
            pending: self.pending_view(),
        }
    }
}
