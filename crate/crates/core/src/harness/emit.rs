use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

use super::{ExperimentKind, SummaryRow, TrialRecord};

/// Row types with a fixed, documented CSV column order.
pub trait Tabular {
    const COLUMNS: &'static [&'static str];
}

impl Tabular for TrialRecord {
    const COLUMNS: &'static [&'static str] = &[
        "experiment",
        "backend",
        "kind",
        "coverage",
        "alpha",
        "variant",
        "trial",
        "seed",
        "success",
        "start_ok",
        "challenge_ok",
        "response_ok",
        "finish_ok",
        "failed_stage",
        "attempts",
        "final_alpha",
        "bits",
        "bit_errors",
        "perfect_chunks",
        "corrected",
        "sync_offset",
        "true_offset",
        "delay_samples",
        "elapsed_secs",
        "mac_verified",
    ];
}

impl Tabular for SummaryRow {
    const COLUMNS: &'static [&'static str] = &[
        "experiment",
        "variant",
        "condition",
        "alpha",
        "attempt",
        "metric",
        "n",
        "value",
        "lo",
        "hi",
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json" => Ok(Format::Jsonl),
            other => Err(Error::Parse(format!("unknown output format {other:?}"))),
        }
    }
}

/// Writes rows in `format`; an empty set still produces a header (CSV) or an empty file.
pub fn emit<T: Serialize + Tabular>(
    rows: &[T],
    format: Format,
    path: impl AsRef<Path>,
) -> Result<()> {
    match format {
        Format::Csv => write_csv(rows, path),
        Format::Jsonl => write_jsonl(rows, path),
    }
}

pub fn write_csv<T: Serialize + Tabular>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path.as_ref())?;
    w.write_record(T::COLUMNS)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

pub fn write_jsonl<T: Serialize>(rows: &[T], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for row in rows {
        serde_json::to_writer(&mut w, row)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".into(), |x| format!("{x:.6}"))
}

fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# {}", header.join(" "))?;
    for row in rows {
        writeln!(w, "{}", row.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

/// Table with one row per `row_key`, one column per `col_key`, holding
/// the value of rows accepted by `keep`.
fn pivot(
    rows: &[SummaryRow],
    keep: impl Fn(&SummaryRow) -> bool,
    row_key: impl Fn(&SummaryRow) -> String,
    col_key: impl Fn(&SummaryRow) -> String,
) -> (Vec<String>, Vec<Vec<String>>) {
    let mut cols = BTreeSet::new();
    let mut cells: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in rows.iter().filter(|r| keep(r)) {
        let (rk, ck) = (row_key(r), col_key(r));
        if !cells.contains_key(&rk) {
            order.push(rk.clone());
        }
        cols.insert(ck.clone());
        cells.entry(rk).or_default().insert(ck, r.value);
    }
    let cols: Vec<String> = cols.into_iter().collect();
    let table = order
        .iter()
        .map(|rk| {
            let mut line = vec![rk.clone()];
            line.extend(cols.iter().map(|c| num(cells[rk].get(c).copied())));
            line
        })
        .collect();
    (cols, table)
}

/// Gnuplot data files: one long-format file per experiment plus
/// pivoted tables laid out like the corresponding figures.
pub fn write_plot_data(rows: &[SummaryRow], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let experiments: BTreeSet<&str> = rows.iter().map(|r| r.experiment.as_str()).collect();
    for exp in experiments {
        let path = dir.join(format!("{exp}.dat"));
        let header: Vec<String> = [
            "variant",
            "condition",
            "alpha",
            "attempt",
            "metric",
            "n",
            "value",
            "lo",
            "hi",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let body: Vec<Vec<String>> = rows
            .iter()
            .filter(|r| r.experiment.as_str() == exp)
            .map(|r| {
                vec![
                    if r.variant.is_empty() {
                        "-".into()
                    } else {
                        r.variant.clone()
                    },
                    r.condition.clone(),
                    num(r.alpha),
                    r.attempt.map_or_else(|| "NaN".into(), |a| a.to_string()),
                    r.metric.clone(),
                    r.n.to_string(),
                    num(Some(r.value)),
                    num(r.lo),
                    num(r.hi),
                ]
            })
            .collect();
        write_table(&path, &header, &body)?;
        written.push(path);
    }

    let mut figure =
        |name: &str, first: &str, (cols, table): (Vec<String>, Vec<Vec<String>>)| -> Result<()> {
            if table.is_empty() {
                return Ok(());
            }
            let path = dir.join(name);
            let mut header = vec![first.to_string()];
            header.extend(cols);
            write_table(&path, &header, &table)?;
            written.push(path);
            Ok(())
        };

    // Sync study: pattern x {clean, dist}.
    figure(
        "sync_table.dat",
        "pattern",
        pivot(
            rows,
            |r| {
                r.experiment == ExperimentKind::SyncEval
                    && r.metric == "accuracy"
                    && (r.condition == "clean" || r.condition == "dist")
            },
            |r| r.variant.clone(),
            |r| r.condition.clone(),
        ),
    )?;
    // Stage success: coverage x distortion kind, one file per stage.
    for stage in ["start", "challenge", "response", "finish", "overall"] {
        figure(
            &format!("stages_{stage}.dat"),
            "coverage",
            pivot(
                rows,
                |r| {
                    r.experiment == ExperimentKind::ProtocolStages
                        && r.metric == stage
                        && r.condition.contains('@')
                },
                |r| r.condition.split('@').nth(1).unwrap_or("").to_string(),
                |r| r.condition.split('@').next().unwrap_or("").to_string(),
            ),
        )?;
    }
    // Retries: condition x attempt, one file per strategy.
    let strategies: BTreeSet<String> = rows
        .iter()
        .filter(|r| r.experiment == ExperimentKind::RetryComparison)
        .map(|r| r.variant.clone())
        .collect();
    for s in strategies {
        figure(
            &format!("retry_{s}.dat"),
            "condition",
            pivot(
                rows,
                |r| {
                    r.experiment == ExperimentKind::RetryComparison
                        && r.variant == s
                        && r.metric == "success_by_attempt"
                },
                |r| r.condition.clone(),
                |r| format!("attempt{}", r.attempt.unwrap_or(0)),
            ),
        )?;
    }
    // Timing: attempts x {mean, min, max}.
    figure(
        "timing_table.dat",
        "attempts",
        pivot(
            rows,
            |r| {
                r.experiment == ExperimentKind::Timing
                    && r.metric.starts_with("elapsed_")
                    && r.attempt.is_some()
            },
            |r| r.attempt.unwrap_or(0).to_string(),
            |r| r.metric.clone(),
        ),
    )?;
    Ok(written)
}
