//! Learning-curve files. Both formats carry `round`, `n_labeled`,
//! `accuracy` (always six decimals) and the selected indices.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use super::RoundRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum CurveFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for CurveFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(CurveFormat::Csv),
            "json" => Ok(CurveFormat::Json),
            other => Err(Error::Config(format!("unknown curve format {other:?}"))),
        }
    }
}

impl CurveFormat {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => CurveFormat::Json,
            _ => CurveFormat::Csv,
        }
    }
}

const HEADER: &str = "round,n_labeled,accuracy,selected_indices";

fn join(indices: &[usize]) -> String {
    indices.iter().map(usize::to_string).collect::<Vec<_>>().join(";")
}

pub fn format_curve(records: &[RoundRecord], format: CurveFormat) -> String {
    let mut out = String::new();
    match format {
        CurveFormat::Csv => {
            out.push_str(HEADER);
            out.push('\n');
            for r in records {
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{}",
                    r.round,
                    r.n_labeled,
                    r.accuracy,
                    join(&r.selected)
                );
            }
        }
        CurveFormat::Json => {
            out.push('[');
            for (i, r) in records.iter().enumerate() {
                let sep = if i == 0 { "\n" } else { ",\n" };
                let _ = write!(
                    out,
                    "{sep}  {{\"round\": {}, \"n_labeled\": {}, \"accuracy\": {:.6}, \"selected_indices\": [{}]}}",
                    r.round,
                    r.n_labeled,
                    r.accuracy,
                    r.selected.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
                );
            }
            out.push_str(if records.is_empty() { "]\n" } else { "\n]\n" });
        }
    }
    out
}

pub fn export_curve(records: &[RoundRecord], path: impl AsRef<Path>, format: CurveFormat) -> Result<()> {
    fs::write(path, format_curve(records, format))?;
    Ok(())
}

#[derive(Deserialize)]
struct JsonRow {
    round: usize,
    n_labeled: usize,
    accuracy: f64,
    selected_indices: Vec<usize>,
}

/// Parses an exported curve. Wall times are not exported and come back as 0.
pub fn parse_curve(text: &str, format: CurveFormat) -> Result<Vec<RoundRecord>> {
    match format {
        CurveFormat::Json => {
            let rows: Vec<JsonRow> = serde_json::from_str(text)?;
            Ok(rows
                .into_iter()
                .map(|r| RoundRecord {
                    round: r.round,
                    n_labeled: r.n_labeled,
                    accuracy: r.accuracy,
                    selected: r.selected_indices,
                    wall_time_secs: 0.0,
                })
                .collect())
        }
        CurveFormat::Csv => {
            let mut lines = text.lines();
            if lines.next() != Some(HEADER) {
                return Err(Error::Config("curve file has an unexpected header".into()));
            }
            lines
                .filter(|l| !l.is_empty())
                .map(|line| {
                    let bad = || Error::Config(format!("malformed curve line {line:?}"));
                    let mut cols = line.splitn(4, ',');
                    let mut next = || cols.next().ok_or_else(bad);
                    let round = next()?.parse().map_err(|_| bad())?;
                    let n_labeled = next()?.parse().map_err(|_| bad())?;
                    let accuracy = next()?.parse().map_err(|_| bad())?;
                    let sel = next()?;
                    let selected = if sel.is_empty() {
                        vec![]
                    } else {
                        sel.split(';')
                            .map(|s| s.parse().map_err(|_| bad()))
                            .collect::<Result<_>>()?
                    };
                    Ok(RoundRecord {
                        round,
                        n_labeled,
                        accuracy,
                        selected,
                        wall_time_secs: 0.0,
                    })
                })
                .collect()
        }
    }
}
