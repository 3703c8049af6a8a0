//! Multi-seed strategy comparison on the two-Gaussians benchmark.
//!
//! cargo run --release -p poolal-core --example benchmark

use std::time::Instant;

use poolal_core::harness::{compare_strategies, ExperimentConfig};
use poolal_core::strategies::StrategyKind;

fn main() -> poolal_core::Result<()> {
    let config = ExperimentConfig::default();
    let strategies = [
        StrategyKind::Random,
        StrategyKind::Entropy,
        StrategyKind::Margin,
        StrategyKind::LeastConfidence,
        StrategyKind::Bald,
        StrategyKind::EntropyDropout,
        StrategyKind::KcenterGreedy,
        StrategyKind::Kmeans,
        StrategyKind::AdvDeepfool,
        StrategyKind::AdvBim,
    ];
    let seeds: Vec<u64> = (0..10).collect();
    let started = Instant::now();
    let table = compare_strategies(&config, &strategies, &seeds)?;
    print!("{table}");
    println!("({:.1}s)", started.elapsed().as_secs_f64());
    Ok(())
}
