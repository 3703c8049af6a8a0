use std::fmt;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::{run_experiment, ExperimentConfig, RoundRecord};
use crate::error::Result;
use crate::strategies::StrategyKind;

/// Area under a learning curve: mean accuracy over its rounds.
pub fn aulc(records: &[RoundRecord]) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records.iter().map(|r| r.accuracy).sum::<f64>() / records.len() as f64
}

/// First round whose accuracy reaches `threshold`, or `rounds + 1` when
/// the curve never gets there.
pub fn rounds_to_reach(records: &[RoundRecord], threshold: f64) -> usize {
    records
        .iter()
        .find(|r| r.accuracy >= threshold)
        .map_or(records.len(), |r| r.round)
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategySummary {
    pub strategy: StrategyKind,
    pub n_labeled: Vec<usize>,
    pub mean_accuracy: Vec<f64>,
    /// Sample standard deviation across seeds (0 for a single seed).
    pub std_accuracy: Vec<f64>,
    pub mean_aulc: f64,
    pub std_aulc: f64,
    /// One curve per seed, in seed order.
    pub curves: Vec<Vec<RoundRecord>>,
}

impl StrategySummary {
    fn from_curves(strategy: StrategyKind, curves: Vec<Vec<RoundRecord>>) -> Self {
        let rounds = curves[0].len();
        let (mean_accuracy, std_accuracy) = (0..rounds)
            .map(|t| mean_std(&curves.iter().map(|c| c[t].accuracy).collect::<Vec<_>>()))
            .unzip();
        let aulcs: Vec<f64> = curves.iter().map(|c| aulc(c)).collect();
        let (mean_aulc, std_aulc) = mean_std(&aulcs);
        Self {
            strategy,
            n_labeled: curves[0].iter().map(|r| r.n_labeled).collect(),
            mean_accuracy,
            std_accuracy,
            mean_aulc,
            std_aulc,
            curves,
        }
    }

    pub fn mean_rounds_to_reach(&self, threshold: f64) -> f64 {
        let total: usize = self.curves.iter().map(|c| rounds_to_reach(c, threshold)).sum();
        total as f64 / self.curves.len() as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonTable {
    pub seeds: Vec<u64>,
    pub rows: Vec<StrategySummary>,
}

impl ComparisonTable {
    pub fn get(&self, strategy: StrategyKind) -> Option<&StrategySummary> {
        self.rows.iter().find(|r| r.strategy == strategy)
    }

    /// Long-format CSV: one line per (strategy, round).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("strategy,round,n_labeled,mean_accuracy,std_accuracy,mean_aulc,std_aulc\n");
        for row in &self.rows {
            for t in 0..row.mean_accuracy.len() {
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6},{:.6},{:.6},{:.6}",
                    row.strategy,
                    t,
                    row.n_labeled[t],
                    row.mean_accuracy[t],
                    row.std_accuracy[t],
                    row.mean_aulc,
                    row.std_aulc
                );
            }
        }
        out
    }
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<18} {:>10} {:>10} {:>12}  final accuracy",
            "strategy", "mean AULC", "std AULC", "rounds→90%"
        )?;
        for row in &self.rows {
            writeln!(
                f,
                "{:<18} {:>10.4} {:>10.4} {:>12.2}  {:.4}",
                row.strategy.name(),
                row.mean_aulc,
                row.std_aulc,
                row.mean_rounds_to_reach(0.9),
                row.mean_accuracy.last().copied().unwrap_or(f64::NAN)
            )?;
        }
        Ok(())
    }
}

/// Runs every (strategy, seed) cell and summarizes per strategy.
///
/// Each cell is `base` with its strategy kind and master seed replaced.
/// Cells run in parallel; results are gathered in input order.
pub fn compare_strategies(
    base: &ExperimentConfig,
    strategies: &[StrategyKind],
    seeds: &[u64],
) -> Result<ComparisonTable> {
    if strategies.is_empty() || seeds.is_empty() {
        return Err(crate::Error::Config("need at least one strategy and one seed".into()));
    }
    let cells: Vec<(StrategyKind, u64)> = strategies
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();
    let curves: Vec<Vec<RoundRecord>> = cells
        .par_iter()
        .map(|&(kind, seed)| {
            let mut config = base.clone();
            config.strategy.kind = kind;
            config.seed = seed;
            run_experiment(&config)
        })
        .collect::<Result<_>>()?;
    let mut curves = curves.into_iter();
    let rows = strategies
        .iter()
        .map(|&kind| StrategySummary::from_curves(kind, curves.by_ref().take(seeds.len()).collect()))
        .collect();
    Ok(ComparisonTable {
        seeds: seeds.to_vec(),
        rows,
    })
}
