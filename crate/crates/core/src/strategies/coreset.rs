//! Geometric selection in embedding space: k-center greedy and a k-means
//! variant that picks the point nearest each centroid.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Direction, QueryResult, ScoreVector};
use crate::error::{Error, Result};

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Farthest-first traversal from the labeled set.
///
/// `embeddings` covers every training row; `labeled_mask` marks the current
/// labeled pool. Each step picks the unlabeled row farthest from its nearest
/// labeled-or-already-picked row, lowest index on ties.
pub fn kcenter_greedy(embeddings: ArrayView2<'_, f64>, labeled_mask: &[bool], n: usize) -> Result<QueryResult> {
    if embeddings.nrows() != labeled_mask.len() {
        return Err(Error::Shape(format!(
            "{} embeddings for a mask of {}",
            embeddings.nrows(),
            labeled_mask.len()
        )));
    }
    let centers: Vec<usize> = (0..labeled_mask.len()).filter(|&i| labeled_mask[i]).collect();
    if centers.is_empty() {
        return Err(Error::Precondition(
            "k-center greedy needs at least one labeled example".into(),
        ));
    }
    let candidates: Vec<usize> = (0..labeled_mask.len()).filter(|&i| !labeled_mask[i]).collect();
    if n > candidates.len() {
        return Err(Error::Capacity {
            requested: n,
            available: candidates.len(),
        });
    }

    let mut min_d2: Vec<f64> = candidates
        .iter()
        .map(|&i| {
            centers
                .iter()
                .map(|&c| sq_dist(embeddings.row(i), embeddings.row(c)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let initial = ScoreVector::new(min_d2.iter().map(|d| d.sqrt()).collect(), Direction::SelectMax);

    let mut taken = vec![false; candidates.len()];
    let mut selected = Vec::with_capacity(n);
    for _ in 0..n {
        let mut best: Option<usize> = None;
        for (j, &d) in min_d2.iter().enumerate() {
            if !taken[j] && best.is_none_or(|b| d > min_d2[b]) {
                best = Some(j);
            }
        }
        let pick = best.expect("n <= candidates");
        taken[pick] = true;
        selected.push(candidates[pick]);
        let new_center = embeddings.row(candidates[pick]);
        for (j, d) in min_d2.iter_mut().enumerate() {
            if !taken[j] {
                *d = d.min(sq_dist(embeddings.row(candidates[j]), new_center));
            }
        }
    }
    Ok(QueryResult {
        selected,
        candidates,
        scores: Some(initial),
        diagnostics: None,
    })
}

fn nearest(point: ArrayView1<'_, f64>, centroids: &Array2<f64>) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.outer_iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best_d {
            best_d = d;
            best = c;
        }
    }
    best
}

/// k-means++ seeding: first centre uniform, then proportional to squared
/// distance from the nearest chosen centre.
fn plus_plus_seeds<R: Rng>(points: ArrayView2<'_, f64>, k: usize, rng: &mut R) -> Vec<usize> {
    let m = points.nrows();
    let mut chosen = vec![rng.random_range(0..m)];
    let mut d2: Vec<f64> = (0..m).map(|i| sq_dist(points.row(i), points.row(chosen[0]))).collect();
    while chosen.len() < k {
        let next = match WeightedIndex::new(&d2) {
            Ok(dist) => dist.sample(rng),
            // All remaining mass is zero (duplicates): pick uniformly among unchosen.
            Err(_) => {
                let rest: Vec<usize> = (0..m).filter(|i| !chosen.contains(i)).collect();
                rest[rng.random_range(0..rest.len())]
            }
        };
        chosen.push(next);
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points.row(i), points.row(next)));
        }
    }
    chosen
}

/// Lloyd's algorithm with `k = n` on the unlabeled embeddings, then the
/// nearest still-available point to each centroid in centroid order.
///
/// `candidates[j]` is the global index of row `j` of `embeddings`.
pub fn kmeans_query(
    embeddings: ArrayView2<'_, f64>,
    candidates: &[usize],
    n: usize,
    seed: u64,
    max_iter: usize,
) -> Result<QueryResult> {
    let m = embeddings.nrows();
    if candidates.len() != m {
        return Err(Error::Shape(format!(
            "{} embeddings for {} candidates",
            m,
            candidates.len()
        )));
    }
    if n > m {
        return Err(Error::Capacity {
            requested: n,
            available: m,
        });
    }
    if n == 0 {
        return Ok(QueryResult {
            selected: vec![],
            candidates: candidates.to_vec(),
            scores: None,
            diagnostics: None,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = plus_plus_seeds(embeddings, n, &mut rng);
    let mut centroids = Array2::zeros((n, embeddings.ncols()));
    for (c, &i) in seeds.iter().enumerate() {
        centroids.row_mut(c).assign(&embeddings.row(i));
    }

    let mut assignment: Vec<usize> = vec![usize::MAX; m];
    for _ in 0..max_iter {
        let next: Vec<usize> = embeddings.outer_iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
        let mut sums = Array2::<f64>::zeros(centroids.dim());
        let mut counts = vec![0usize; n];
        for (p, &c) in embeddings.outer_iter().zip(&assignment) {
            let mut row = sums.row_mut(c);
            row += &p;
            counts[c] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mean = &sums.row(c) / count as f64;
                centroids.row_mut(c).assign(&mean);
            }
        }
    }

    let mut taken = vec![false; m];
    let mut selected = Vec::with_capacity(n);
    for centroid in centroids.outer_iter() {
        let mut best: Option<(usize, f64)> = None;
        for (j, p) in embeddings.outer_iter().enumerate() {
            if taken[j] {
                continue;
            }
            let d = sq_dist(p, centroid);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        let (j, _) = best.expect("n <= m");
        taken[j] = true;
        selected.push(candidates[j]);
    }
    Ok(QueryResult {
        selected,
        candidates: candidates.to_vec(),
        scores: None,
        diagnostics: None,
    })
}
