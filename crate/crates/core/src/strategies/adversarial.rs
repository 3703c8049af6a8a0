//! Distance-to-boundary estimates from adversarial perturbations.
//!
//! Both methods start at `x` with predicted class `c` and move until the
//! predicted class changes. The length of the perturbation is the score:
//! small perturbations mean the example sits close to the decision boundary.

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;

use super::{Direction, QueryDiagnostics, QueryResult, ScoreVector};
use crate::error::{Error, Result};
use crate::nn::Classifier;

/// Below this norm a logit-difference gradient is treated as vanishing.
const VANISHING_GRAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvDistance {
    /// `‖x_adv − x‖₂`; `+∞` when the method gave up.
    pub norm: f64,
    pub iterations: usize,
    pub flipped: bool,
}

fn argmax(v: &Array1<f64>) -> usize {
    crate::nn::probs_argmax(v.view())
}

/// Highest-scoring class other than `c`, lowest index on ties.
fn runner_up(logits: &Array1<f64>, c: usize) -> usize {
    let mut best = None;
    for (k, &v) in logits.iter().enumerate() {
        if k != c && best.is_none_or(|b: usize| v > logits[b]) {
            best = Some(k);
        }
    }
    best.expect("at least two classes")
}

fn check_classes(clf: &Classifier) -> Result<()> {
    if clf.num_classes() < 2 {
        return Err(Error::Precondition(
            "adversarial margins need at least two classes".into(),
        ));
    }
    Ok(())
}

/// Basic iterative method: signed steps of size `eps` up the gradient of
/// `logit_runner_up − logit_c` until the label flips.
///
/// Returns a `+∞` norm if the label never flips within `max_iter` steps.
pub fn adv_bim_distance(clf: &Classifier, x: ArrayView1<'_, f64>, eps: f64, max_iter: usize) -> Result<AdvDistance> {
    check_classes(clf)?;
    let x0 = x.to_owned();
    let (mut logits, mut jac) = clf.logit_jacobian(x)?;
    let c = argmax(&logits);
    let mut cur = x0.clone();
    for iter in 1..=max_iter {
        let r = runner_up(&logits, c);
        let grad = &jac.row(r) - &jac.row(c);
        if grad.iter().all(|&g| g == 0.0) {
            break;
        }
        cur.zip_mut_with(&grad, |xi, &g| *xi += eps * sign(g));
        (logits, jac) = clf.logit_jacobian(cur.view())?;
        if argmax(&logits) != c {
            return Ok(AdvDistance {
                norm: l2(&(&cur - &x0)),
                iterations: iter,
                flipped: true,
            });
        }
    }
    Ok(AdvDistance {
        norm: f64::INFINITY,
        iterations: max_iter,
        flipped: false,
    })
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn l2(v: &Array1<f64>) -> f64 {
    v.dot(v).sqrt()
}

/// Multiclass DeepFool. Each step linearizes every `logit_k − logit_c`,
/// moves to the nearest linearized boundary, and the accumulated step is
/// scaled by `1 + overshoot` before checking the label.
///
/// Unlike BIM, running out of iterations returns the norm reached so far.
pub fn adv_deepfool_distance(
    clf: &Classifier,
    x: ArrayView1<'_, f64>,
    max_iter: usize,
    overshoot: f64,
) -> Result<AdvDistance> {
    check_classes(clf)?;
    let x0 = x.to_owned();
    let (mut logits, mut jac) = clf.logit_jacobian(x)?;
    let c = argmax(&logits);
    let mut total = Array1::<f64>::zeros(x0.len());
    let scale = 1.0 + overshoot;
    for iter in 1..=max_iter {
        let mut best: Option<(f64, f64, Array1<f64>)> = None;
        for k in (0..logits.len()).filter(|&k| k != c) {
            let w = &jac.row(k) - &jac.row(c);
            let w_norm = l2(&w);
            if w_norm < VANISHING_GRAD {
                continue;
            }
            let f = (logits[k] - logits[c]).abs();
            let ratio = f / w_norm;
            if best.as_ref().is_none_or(|(r, _, _)| ratio < *r) {
                best = Some((ratio, f / (w_norm * w_norm), w));
            }
        }
        let Some((_, step, w)) = best else {
            return Err(Error::Numeric(format!(
                "vanishing boundary gradient at iteration {iter}"
            )));
        };
        total.scaled_add(step, &w);
        let cur = &x0 + &(&total * scale);
        (logits, jac) = clf.logit_jacobian(cur.view())?;
        if argmax(&logits) != c {
            return Ok(AdvDistance {
                norm: scale * l2(&total),
                iterations: iter,
                flipped: true,
            });
        }
    }
    Ok(AdvDistance {
        norm: scale * l2(&total),
        iterations: max_iter,
        flipped: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdvMethod {
    /// Signed gradient steps of size `eps`.
    Bim {
        eps: f64,
    },
    DeepFool {
        overshoot: f64,
    },
}

/// Scores every row of `x` by its perturbation norm and picks the `n`
/// smallest. Rows whose estimate failed score `+∞` and come last.
pub fn adversarial_query(
    clf: &Classifier,
    x: ndarray::ArrayView2<'_, f64>,
    candidates: &[usize],
    method: AdvMethod,
    n: usize,
    max_iter: usize,
) -> Result<QueryResult> {
    if candidates.len() != x.nrows() {
        return Err(Error::Shape(format!(
            "{} rows for {} candidates",
            x.nrows(),
            candidates.len()
        )));
    }
    if n > candidates.len() {
        return Err(Error::Capacity {
            requested: n,
            available: candidates.len(),
        });
    }
    check_classes(clf)?;
    let distances: Vec<AdvDistance> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            let res = match method {
                AdvMethod::Bim { eps } => adv_bim_distance(clf, row, eps, max_iter),
                AdvMethod::DeepFool { overshoot } => adv_deepfool_distance(clf, row, max_iter, overshoot),
            };
            match res {
                Ok(d) => Ok(d),
                Err(Error::Numeric(_)) => Ok(AdvDistance {
                    norm: f64::INFINITY,
                    iterations: 0,
                    flipped: false,
                }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let norms: Vec<f64> = distances.iter().map(|d| d.norm).collect();
    let scores = ScoreVector::new(norms.clone(), Direction::SelectMin);
    let picked = scores.select_top(n)?;
    Ok(QueryResult {
        selected: picked.iter().map(|&j| candidates[j]).collect(),
        candidates: candidates.to_vec(),
        scores: Some(scores),
        diagnostics: Some(QueryDiagnostics {
            perturbation_norms: norms,
            iterations: distances.iter().map(|d| d.iterations).collect(),
        }),
    })
}
