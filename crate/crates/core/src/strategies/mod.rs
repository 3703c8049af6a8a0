//! Query strategies: rank the unlabeled pool and select `n` examples.
//!
//! Strategies only see what [`Pool::unlabeled_view`] and the labeled mask
//! expose, together with classifier outputs. Hidden labels never reach them.

mod adversarial;
mod coreset;
mod uncertainty;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adversarial::{adv_bim_distance, adv_deepfool_distance, adversarial_query, AdvDistance, AdvMethod};
pub use coreset::{kcenter_greedy, kmeans_query};
pub use uncertainty::{
    bald_scores, dropout_uncertainty_scores, entropy, entropy_scores, least_confidence_scores, margin_scores,
    uncertainty_scores, Uncertainty,
};

use crate::data::Pool;
use crate::error::{invalid_field, Error, Result};
use crate::nn::Classifier;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    SelectMax,
    SelectMin,
}

/// One informativeness score per candidate, plus which end is preferred.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    scores: Vec<f64>,
    direction: Direction,
}

impl ScoreVector {
    pub fn new(scores: Vec<f64>, direction: Direction) -> Self {
        Self { scores, direction }
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Positions of the `n` best scores, best first, lower position on ties.
    ///
    /// `+∞` is allowed and ranks last under [`Direction::SelectMin`]; NaN is not.
    pub fn select_top(&self, n: usize) -> Result<Vec<usize>> {
        if n > self.scores.len() {
            return Err(Error::Capacity {
                requested: n,
                available: self.scores.len(),
            });
        }
        if let Some(i) = self.scores.iter().position(|s| s.is_nan()) {
            return Err(Error::Numeric(format!("score {i} is NaN")));
        }
        let mut order: Vec<usize> = (0..self.scores.len()).collect();
        let s = &self.scores;
        match self.direction {
            Direction::SelectMax => order.sort_by(|&a, &b| s[b].total_cmp(&s[a])),
            Direction::SelectMin => order.sort_by(|&a, &b| s[a].total_cmp(&s[b])),
        }
        order.truncate(n);
        Ok(order)
    }
}

/// Selects `n` candidates by score and returns their global indices.
///
/// `candidates[j]` is the global index whose score is `scores.scores()[j]`.
pub fn select_top(scores: &ScoreVector, candidates: &[usize], n: usize) -> Result<Vec<usize>> {
    if scores.len() != candidates.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} candidates",
            scores.len(),
            candidates.len()
        )));
    }
    Ok(scores.select_top(n)?.into_iter().map(|j| candidates[j]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    LeastConfidence,
    Margin,
    Entropy,
    LcDropout,
    MarginDropout,
    EntropyDropout,
    Bald,
    KcenterGreedy,
    Kmeans,
    AdvBim,
    AdvDeepfool,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 12] = [
        StrategyKind::Random,
        StrategyKind::LeastConfidence,
        StrategyKind::Margin,
        StrategyKind::Entropy,
        StrategyKind::LcDropout,
        StrategyKind::MarginDropout,
        StrategyKind::EntropyDropout,
        StrategyKind::Bald,
        StrategyKind::KcenterGreedy,
        StrategyKind::Kmeans,
        StrategyKind::AdvBim,
        StrategyKind::AdvDeepfool,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::LeastConfidence => "least_confidence",
            StrategyKind::Margin => "margin",
            StrategyKind::Entropy => "entropy",
            StrategyKind::LcDropout => "lc_dropout",
            StrategyKind::MarginDropout => "margin_dropout",
            StrategyKind::EntropyDropout => "entropy_dropout",
            StrategyKind::Bald => "bald",
            StrategyKind::KcenterGreedy => "kcenter_greedy",
            StrategyKind::Kmeans => "kmeans",
            StrategyKind::AdvBim => "adv_bim",
            StrategyKind::AdvDeepfool => "adv_deepfool",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid_field("strategy", format!("unknown strategy {s:?}")))
    }
}

fn default_n_drop() -> usize {
    10
}
fn default_bim_eps() -> f64 {
    0.05
}
fn default_adv_max_iter() -> usize {
    100
}
fn default_overshoot() -> f64 {
    0.02
}
fn default_kmeans_max_iter() -> usize {
    100
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    /// Dropout passes for the `*_dropout` kinds and BALD.
    #[serde(default = "default_n_drop")]
    pub n_drop: usize,
    #[serde(default = "default_bim_eps")]
    pub bim_eps: f64,
    #[serde(default = "default_adv_max_iter")]
    pub adv_max_iter: usize,
    #[serde(default = "default_overshoot")]
    pub deepfool_overshoot: f64,
    #[serde(default = "default_kmeans_max_iter")]
    pub kmeans_max_iter: usize,
    #[serde(default)]
    pub seed: u64,
}

impl StrategyConfig {
    pub fn new(kind: StrategyKind) -> Self {
        Self {
            kind,
            n_drop: default_n_drop(),
            bim_eps: default_bim_eps(),
            adv_max_iter: default_adv_max_iter(),
            deepfool_overshoot: default_overshoot(),
            kmeans_max_iter: default_kmeans_max_iter(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        use StrategyKind::*;
        match self.kind {
            LcDropout | MarginDropout | EntropyDropout | Bald if self.n_drop == 0 => {
                Err(invalid_field("n_drop", "must be positive"))
            }
            AdvBim if !(self.bim_eps > 0.0 && self.bim_eps.is_finite()) => {
                Err(invalid_field("bim_eps", "must be positive"))
            }
            AdvBim | AdvDeepfool if self.adv_max_iter == 0 => Err(invalid_field("adv_max_iter", "must be positive")),
            AdvDeepfool if !(self.deepfool_overshoot >= 0.0 && self.deepfool_overshoot.is_finite()) => {
                Err(invalid_field("deepfool_overshoot", "must be non-negative"))
            }
            Kmeans if self.kmeans_max_iter == 0 => Err(invalid_field("kmeans_max_iter", "must be positive")),
            _ => Ok(()),
        }
    }

    /// Runs this strategy against the current pool and classifier.
    pub fn query(&self, pool: &Pool, clf: &Classifier, n: usize) -> Result<QueryResult> {
        self.validate()?;
        let unlabeled = pool.unlabeled_view();
        if n > unlabeled.indices.len() {
            return Err(Error::Capacity {
                requested: n,
                available: unlabeled.indices.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let by_scores = |scores: ScoreVector| -> Result<QueryResult> {
            Ok(QueryResult {
                selected: select_top(&scores, &unlabeled.indices, n)?,
                candidates: unlabeled.indices.clone(),
                scores: Some(scores),
                diagnostics: None,
            })
        };
        let x = unlabeled.x.view();
        use StrategyKind::*;
        match self.kind {
            Random => {
                let picks = rand::seq::index::sample(&mut rng, unlabeled.indices.len(), n);
                Ok(QueryResult {
                    selected: picks.into_iter().map(|j| unlabeled.indices[j]).collect(),
                    candidates: unlabeled.indices.clone(),
                    scores: None,
                    diagnostics: None,
                })
            }
            LeastConfidence => by_scores(least_confidence_scores(&clf.predict_prob(x)?)),
            Margin => by_scores(margin_scores(&clf.predict_prob(x)?)),
            Entropy => by_scores(entropy_scores(&clf.predict_prob(x)?)),
            LcDropout | MarginDropout | EntropyDropout => {
                let measure = match self.kind {
                    LcDropout => Uncertainty::LeastConfidence,
                    MarginDropout => Uncertainty::Margin,
                    _ => Uncertainty::Entropy,
                };
                let stack = clf.mc_dropout_probs(x, self.n_drop, &mut rng)?;
                by_scores(dropout_uncertainty_scores(&stack, measure))
            }
            Bald => by_scores(bald_scores(&clf.mc_dropout_probs(x, self.n_drop, &mut rng)?)),
            KcenterGreedy => {
                let embeddings = clf.embeddings(pool.x_train())?;
                kcenter_greedy(embeddings.view(), &pool.labeled_mask(), n)
            }
            Kmeans => {
                let embeddings = clf.embeddings(x)?;
                kmeans_query(
                    embeddings.view(),
                    &unlabeled.indices,
                    n,
                    self.seed,
                    self.kmeans_max_iter,
                )
            }
            AdvBim | AdvDeepfool => adversarial_query(
                clf,
                x,
                &unlabeled.indices,
                if self.kind == AdvBim {
                    AdvMethod::Bim { eps: self.bim_eps }
                } else {
                    AdvMethod::DeepFool {
                        overshoot: self.deepfool_overshoot,
                    }
                },
                n,
                self.adv_max_iter,
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryDiagnostics {
    pub perturbation_norms: Vec<f64>,
    pub iterations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResult {
    /// Selected global indices, best first.
    pub selected: Vec<usize>,
    /// Global indices the scores (and diagnostics) are aligned with.
    pub candidates: Vec<usize>,
    pub scores: Option<ScoreVector>,
    pub diagnostics: Option<QueryDiagnostics>,
}

impl QueryResult {
    /// Writes per-candidate scores and diagnostics keyed by global index.
    pub fn write_diagnostics_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["global_index", "selected"];
        if self.scores.is_some() {
            header.push("score");
        }
        if self.diagnostics.is_some() {
            header.extend(["perturbation_norm", "iterations"]);
        }
        w.write_record(&header)?;
        for (j, &g) in self.candidates.iter().enumerate() {
            let mut row = vec![g.to_string(), self.selected.contains(&g).to_string()];
            if let Some(s) = &self.scores {
                row.push(s.scores()[j].to_string());
            }
            if let Some(d) = &self.diagnostics {
                row.push(d.perturbation_norms[j].to_string());
                row.push(d.iterations[j].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
