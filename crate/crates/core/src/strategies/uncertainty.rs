//! Scores computed from predictive distributions over the unlabeled rows.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use super::{Direction, ScoreVector};
use crate::nn::{McProbStack, ProbMatrix};

/// Which uncertainty measure to apply to a (mean) predictive distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Uncertainty {
    LeastConfidence,
    Margin,
    Entropy,
}

fn top_two(row: ArrayView1<'_, f64>) -> (f64, f64) {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &p in row {
        if p > first {
            second = first;
            first = p;
        } else if p > second {
            second = p;
        }
    }
    (first, second.max(0.0))
}

/// Shannon entropy in nats, with `0 · ln 0 = 0`.
pub fn entropy(row: ArrayView1<'_, f64>) -> f64 {
    -row.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// `1 - max_y P(y|x)`; larger is more uncertain.
pub fn least_confidence_scores(probs: &ProbMatrix) -> ScoreVector {
    let scores = probs.view().outer_iter().map(|row| 1.0 - top_two(row).0).collect();
    ScoreVector::new(scores, Direction::SelectMax)
}

/// Gap between the two most probable classes; smaller is more uncertain.
pub fn margin_scores(probs: &ProbMatrix) -> ScoreVector {
    let scores = probs
        .view()
        .outer_iter()
        .map(|row| {
            let (a, b) = top_two(row);
            a - b
        })
        .collect();
    ScoreVector::new(scores, Direction::SelectMin)
}

pub fn entropy_scores(probs: &ProbMatrix) -> ScoreVector {
    let scores = probs.view().outer_iter().map(entropy).collect();
    ScoreVector::new(scores, Direction::SelectMax)
}

pub fn uncertainty_scores(probs: &ProbMatrix, measure: Uncertainty) -> ScoreVector {
    match measure {
        Uncertainty::LeastConfidence => least_confidence_scores(probs),
        Uncertainty::Margin => margin_scores(probs),
        Uncertainty::Entropy => entropy_scores(probs),
    }
}

/// Applies `measure` to the mean of the dropout passes.
pub fn dropout_uncertainty_scores(stack: &McProbStack, measure: Uncertainty) -> ScoreVector {
    uncertainty_scores(&stack.mean(), measure)
}

/// Mutual information between the label and the dropout mask:
/// entropy of the mean prediction minus the mean per-pass entropy.
pub fn bald_scores(stack: &McProbStack) -> ScoreVector {
    let mean = stack.mean();
    let t = stack.n_drop() as f64;
    let scores = (0..stack.nrows())
        .map(|i| {
            let expected: f64 = stack.passes().iter().map(|p| entropy(p.row(i))).sum::<f64>() / t;
            entropy(mean.row(i)) - expected
        })
        .collect();
    ScoreVector::new(scores, Direction::SelectMax)
}
