//! Experiment settings shared by `run` and `compare`, from flags and from
//! an optional TOML file using the same kebab-case names. Flags win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use poolal_core::data::{LabelColumn, Scheme};
use poolal_core::harness::{DatasetSpec, ExperimentConfig};
use poolal_core::strategies::StrategyKind;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// TOML file with any of these settings; flags take precedence
    #[arg(long, value_name = "FILE")]
    #[serde(skip)]
    pub config: Option<PathBuf>,

    /// `two_gaussians` or the path of a CSV file
    #[arg(long)]
    pub dataset: Option<String>,
    /// Classes in a CSV dataset (default: 1 + largest label)
    #[arg(long)]
    pub num_classes: Option<usize>,
    /// CSV has a header row
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub has_header: Option<bool>,
    /// `last`, a column number or a header name
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub image_width: Option<usize>,
    #[arg(long)]
    pub image_height: Option<usize>,
    #[arg(long)]
    pub n_per_class: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,

    /// `none`, `min_max` or `standardize`
    #[arg(long)]
    pub preprocess: Option<String>,
    #[arg(long)]
    pub test_fraction: Option<f64>,
    #[arg(long)]
    pub n_init: Option<usize>,
    #[arg(long)]
    pub n_query: Option<usize>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Keep training the previous round's network instead of a fresh one
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub warm_start: Option<bool>,

    /// Hidden layer widths, e.g. `32,16`; empty for a linear model
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long)]
    pub dropout_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,

    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub n_drop: Option<usize>,
    #[arg(long)]
    pub bim_eps: Option<f64>,
    #[arg(long)]
    pub adv_max_iter: Option<usize>,
    #[arg(long)]
    pub deepfool_overshoot: Option<f64>,
    #[arg(long)]
    pub kmeans_max_iter: Option<usize>,

    // Subcommand-specific keys accepted in the file only.
    #[arg(skip)]
    pub strategies: Option<String>,
    #[arg(skip)]
    pub seeds: Option<String>,
    #[arg(skip)]
    pub out: Option<PathBuf>,
    #[arg(skip)]
    pub scores_dir: Option<PathBuf>,
}

macro_rules! prefer {
    ($flags:ident, $file:ident; $($field:ident),* $(,)?) => {
        Settings {
            config: $flags.config,
            $($field: $flags.$field.or($file.$field),)*
        }
    };
}

impl Settings {
    /// Reads `--config` if given and lays the flags over it.
    pub fn resolve(self) -> Result<Settings> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = read_file(&path)?;
        let flags = self;
        Ok(prefer!(flags, file;
            dataset, num_classes, has_header, label_column, image_width, image_height,
            n_per_class, separation, noise_sd, preprocess, test_fraction, n_init, n_query,
            rounds, seed, warm_start, hidden, dropout_rate, epochs, batch_size, learning_rate,
            strategy, n_drop, bim_eps, adv_max_iter, deepfool_overshoot, kmeans_max_iter,
            strategies, seeds, out, scores_dir,
        ))
    }

    pub fn experiment(&self) -> Result<ExperimentConfig> {
        let mut c = ExperimentConfig {
            dataset: self.dataset_spec()?,
            ..Default::default()
        };
        if let Some(p) = &self.preprocess {
            c.preprocess = p.parse::<Scheme>()?;
        }
        set(&mut c.test_fraction, self.test_fraction);
        set(&mut c.n_init, self.n_init);
        set(&mut c.n_query, self.n_query);
        set(&mut c.rounds, self.rounds);
        set(&mut c.seed, self.seed);
        set(&mut c.warm_start, self.warm_start);
        if let Some(h) = &self.hidden {
            c.net.hidden = parse_list(h).context("invalid value for `hidden`")?;
        }
        set(&mut c.net.dropout_rate, self.dropout_rate);
        set(&mut c.train.epochs, self.epochs);
        set(&mut c.train.batch_size, self.batch_size);
        set(&mut c.train.learning_rate, self.learning_rate);
        if let Some(s) = &self.strategy {
            c.strategy.kind = s.parse()?;
        }
        set(&mut c.strategy.n_drop, self.n_drop);
        set(&mut c.strategy.bim_eps, self.bim_eps);
        set(&mut c.strategy.adv_max_iter, self.adv_max_iter);
        set(&mut c.strategy.deepfool_overshoot, self.deepfool_overshoot);
        set(&mut c.strategy.kmeans_max_iter, self.kmeans_max_iter);
        c.validate()?;
        Ok(c)
    }

    fn dataset_spec(&self) -> Result<DatasetSpec> {
        let name = self.dataset.as_deref().unwrap_or("two_gaussians");
        if name == "two_gaussians" {
            let DatasetSpec::TwoGaussians {
                mut n_per_class,
                mut separation,
                mut noise_sd,
            } = ExperimentConfig::default().dataset
            else {
                unreachable!("default dataset is two_gaussians")
            };
            set(&mut n_per_class, self.n_per_class);
            set(&mut separation, self.separation);
            set(&mut noise_sd, self.noise_sd);
            return Ok(DatasetSpec::TwoGaussians {
                n_per_class,
                separation,
                noise_sd,
            });
        }
        let path = PathBuf::from(name);
        let has_header = self.has_header.unwrap_or(false);
        let label_column: LabelColumn = match &self.label_column {
            Some(s) => s.parse().unwrap_or_else(|never| match never {}),
            None => LabelColumn::Last,
        };
        let num_classes = match self.num_classes {
            Some(k) => k,
            None => infer_num_classes(&path, has_header, &label_column)?,
        };
        Ok(DatasetSpec::Csv {
            path,
            num_classes,
            has_header,
            label_column,
            image_width: self.image_width,
            image_height: self.image_height,
        })
    }

    pub fn strategy_list(&self) -> Result<Vec<StrategyKind>> {
        match &self.strategies {
            None => Ok(vec![
                StrategyKind::Random,
                StrategyKind::LeastConfidence,
                StrategyKind::Margin,
                StrategyKind::Entropy,
            ]),
            Some(s) if s.trim() == "all" => Ok(StrategyKind::ALL.to_vec()),
            Some(s) => s
                .split(',')
                .map(|k| k.trim().parse().map_err(anyhow::Error::from))
                .collect(),
        }
    }

    pub fn seed_list(&self) -> Result<Vec<u64>> {
        match &self.seeds {
            None => Ok((0..10).collect()),
            Some(s) => parse_seeds(s),
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn read_file(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {}", path.display(), e.message()))
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().with_context(|| format!("{t:?} is not a width")))
        .collect()
}

/// `0-9`, `1,4,7` or a mix such as `0-2,10`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let mut seeds = vec![];
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || format!("invalid seed list entry {part:?}");
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().with_context(bad)?, b.trim().parse().with_context(bad)?);
                if a > b {
                    bail!("invalid seed range {part:?}");
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().with_context(bad)?),
        }
    }
    if seeds.is_empty() {
        bail!("no seeds given");
    }
    Ok(seeds)
}

/// One more than the largest label, for CSVs given without `--num-classes`.
fn infer_num_classes(path: &Path, has_header: bool, column: &LabelColumn) -> Result<usize> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let index = match column {
        LabelColumn::Name(name) => Some(
            reader
                .headers()?
                .iter()
                .position(|h| h == name)
                .with_context(|| format!("label column {name:?} not found in header"))?,
        ),
        LabelColumn::Index(i) => Some(*i),
        LabelColumn::Last => None,
    };
    let mut max = None;
    for record in reader.records() {
        let record = record?;
        let i = index.unwrap_or(record.len().saturating_sub(1));
        // Malformed labels are reported by the loader with their position.
        if let Some(label) = record.get(i).and_then(|v| v.parse::<usize>().ok()) {
            max = max.max(Some(label));
        }
    }
    max.map(|m| m + 1)
        .with_context(|| format!("{} has no labeled rows", path.display()))
}
