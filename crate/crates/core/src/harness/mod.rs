//! The active learning loop: train `f(0)` on the initial labeled pool, then
//! for each round query `n` examples, label them, retrain and evaluate.

mod compare;
mod config;
mod experiment;
mod export;

pub use compare::{aulc, compare_strategies, rounds_to_reach, ComparisonTable, StrategySummary};
pub use config::{DatasetSpec, ExperimentConfig, NetSpec, TrainSpec};
pub use experiment::{derive_seed, run_experiment, Experiment, RoundRecord, SeedStream};
pub use export::{export_curve, format_curve, parse_curve, CurveFormat};
