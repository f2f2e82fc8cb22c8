//! Wind-direction case study on the circle.
//!
//! Ingests hourly wind-direction records in the NOAA Integrated Surface
//! Database CSV schema, splits the month into twenty contiguous blocks
//! with every fifth block held out for testing, tunes each estimator by
//! four-fold cross validation on the sixteen training blocks, and scores
//! predictions by geodesic error on the circle. Wind direction is an
//! angle in [0, 360) degrees relative to true north; all errors are
//! computed intrinsically, so 350 degrees and 10 degrees are twenty
//! degrees apart, never 340.
//!
//! The raw NOAA file is not vendored. The repository ships a synthetic
//! fixture in the same schema plus download instructions
//! (`data/wind/README.md`); real-data numbers are reproduced only when
//! the downloaded file is present.

use crate::error::FitError;
use crate::manifold::{ManifoldKind, ManifoldPoint};
use crate::sim::Method;
use crate::spline::Dataset;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One non-calm hourly observation.
#[derive(Debug, Clone, PartialEq)]
pub struct WindRecord {
    /// Epoch seconds.
    pub timestamp: i64,
    /// Direction in degrees, in [0, 360).
    pub direction_deg: f64,
}

/// Column configuration for the ISD-style CSV.
#[derive(Debug, Clone)]
pub struct IsdColumns {
    pub timestamp: String,
    pub direction: String,
}

impl Default for IsdColumns {
    fn default() -> Self {
        IsdColumns { timestamp: "DATE".into(), direction: "WND".into() }
    }
}

/// Parse summary: retained records plus skip counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParseSummary {
    pub kept: usize,
    pub calm: usize,
    pub missing: usize,
    pub malformed: usize,
    pub subhourly_dropped: usize,
}

/// Reads ISD-style CSV records. The direction column is either a plain
/// degree value or the packed ISD `WND` field
/// (`angle,quality,type,speed,speed_quality`); a 999 angle means missing
/// and a `C` type code means calm. Timestamps are ISO-8601
/// (`YYYY-MM-DDTHH:MM:SS`) or epoch seconds. Sub-hourly duplicates keep
/// the first record of each hour.
pub fn parse_isd<R: std::io::Read>(
    reader: R,
    cols: &IsdColumns,
) -> Result<(Vec<WindRecord>, ParseSummary), FitError> {
    let mut csv = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = csv
        .headers()
        .map_err(|e| FitError::InvalidInput(format!("csv header: {e}")))?
        .clone();
    let find = |name: &str| -> Result<usize, FitError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| FitError::InvalidInput(format!("missing column {name}")))
    };
    let ti = find(&cols.timestamp)?;
    let di = find(&cols.direction)?;

    let mut records = Vec::new();
    let mut summary =
        ParseSummary { kept: 0, calm: 0, missing: 0, malformed: 0, subhourly_dropped: 0 };
    let mut last_hour: Option<i64> = None;
    for row in csv.records() {
        let row = match row {
            Ok(r) => r,
            Err(_) => {
                summary.malformed += 1;
                continue;
            }
        };
        let (Some(ts_raw), Some(dir_raw)) = (row.get(ti), row.get(di)) else {
            summary.malformed += 1;
            continue;
        };
        let Some(timestamp) = parse_timestamp(ts_raw) else {
            summary.malformed += 1;
            continue;
        };
        match parse_direction(dir_raw) {
            Direction::Missing => {
                summary.missing += 1;
                continue;
            }
            Direction::Calm => {
                summary.calm += 1;
                continue;
            }
            Direction::Malformed => {
                summary.malformed += 1;
                continue;
            }
            Direction::Degrees(direction_deg) => {
                let hour = timestamp.div_euclid(3600);
                if last_hour == Some(hour) {
                    summary.subhourly_dropped += 1;
                    continue;
                }
                last_hour = Some(hour);
                records.push(WindRecord { timestamp, direction_deg });
                summary.kept += 1;
            }
        }
    }
    if records.is_empty() {
        return Err(FitError::InsufficientData("no usable wind records".into()));
    }
    Ok((records, summary))
}

enum Direction {
    Degrees(f64),
    Calm,
    Missing,
    Malformed,
}

fn parse_direction(raw: &str) -> Direction {
    let raw = raw.trim();
    // Packed ISD WND field: angle,quality,type,speed,speed_quality.
    if raw.contains(',') {
        let parts: Vec<&str> = raw.split(',').collect();
        if parts.len() < 3 {
            return Direction::Malformed;
        }
        if parts[2].trim() == "C" {
            return Direction::Calm;
        }
        return match parts[0].trim().parse::<f64>() {
            Ok(a) if a == 999.0 => Direction::Missing,
            Ok(a) if (0.0..360.0).contains(&a) || a == 360.0 => {
                Direction::Degrees(a.rem_euclid(360.0))
            }
            _ => Direction::Malformed,
        };
    }
    if raw.eq_ignore_ascii_case("c") || raw.eq_ignore_ascii_case("calm") {
        return Direction::Calm;
    }
    match raw.parse::<f64>() {
        Ok(a) if a == 999.0 => Direction::Missing,
        Ok(a) if (0.0..=360.0).contains(&a) => Direction::Degrees(a.rem_euclid(360.0)),
        _ => Direction::Malformed,
    }
}

fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    if let Ok(epoch) = raw.parse::<i64>() {
        return Some(epoch);
    }
    // ISO-8601 without timezone, e.g. 2023-06-01T13:00:00.
    let bytes = raw.as_bytes();
    if bytes.len() < 16 {
        return None;
    }
    let num = |s: &str| s.parse::<i64>().ok();
    let year = num(raw.get(0..4)?)?;
    let month = num(raw.get(5..7)?)?;
    let day = num(raw.get(8..10)?)?;
    let hour = num(raw.get(11..13)?)?;
    let minute = num(raw.get(14..16)?)?;
    let second = raw.get(17..19).and_then(num).unwrap_or(0);
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
        return None;
    }
    // Days since the epoch by the standard civil-calendar formula.
    let y = if month <= 2 { year - 1 } else { year };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = (month + 9) % 12;
    let doy = (153 * mp + 2) / 5 + day - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    let days = era * 146097 + doe - 719468;
    Some(days * 86400 + hour * 3600 + minute * 60 + second)
}

/// Converts records to a circle-valued dataset: directions in radians on
/// Circle(2 pi), timestamps affinely mapped to [0, 1] over the observed
/// range.
pub fn records_to_dataset(records: &[WindRecord]) -> Result<Dataset, FitError> {
    if records.len() < 2 {
        return Err(FitError::InsufficientData("need at least two records".into()));
    }
    let kind = ManifoldKind::circle(2.0 * PI);
    let t0 = records.iter().map(|r| r.timestamp).min().unwrap() as f64;
    let t1 = records.iter().map(|r| r.timestamp).max().unwrap() as f64;
    if t1 <= t0 {
        return Err(FitError::InvalidInput("all records share one timestamp".into()));
    }
    let obs = records
        .iter()
        .map(|r| {
            let t = (r.timestamp as f64 - t0) / (t1 - t0);
            let angle = (r.direction_deg * PI / 180.0).rem_euclid(2.0 * PI);
            ManifoldPoint::new(kind.clone(), vec![angle]).map(|p| (t, p))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::from_observations(kind, obs)
}

/// Deterministic block split: 20 contiguous blocks by record order, every
/// fifth block (indices 4, 9, 14, 19) held out, training blocks assigned
/// to 4 folds round-robin.
#[derive(Debug, Clone)]
pub struct BlockSplit {
    /// Block index per record.
    pub block: Vec<usize>,
    /// True where the record is in a test block.
    pub test: Vec<bool>,
    /// Fold per record (meaningful on training records only).
    pub fold: Vec<usize>,
    pub n_blocks: usize,
    pub n_folds: usize,
}

impl BlockSplit {
    pub fn new(n_records: usize) -> Result<Self, FitError> {
        const BLOCKS: usize = 20;
        const FOLDS: usize = 4;
        if n_records < BLOCKS {
            return Err(FitError::InsufficientData(format!(
                "{n_records} records for {BLOCKS} blocks"
            )));
        }
        let mut block = vec![0usize; n_records];
        for (i, b) in block.iter_mut().enumerate() {
            *b = (i * BLOCKS / n_records).min(BLOCKS - 1);
        }
        let test: Vec<bool> = block.iter().map(|b| (b + 1) % 5 == 0).collect();
        // Training blocks in order, round-robin into folds.
        let mut fold_of_block = vec![usize::MAX; BLOCKS];
        let mut next = 0usize;
        for (b, f) in fold_of_block.iter_mut().enumerate() {
            if (b + 1) % 5 == 0 {
                continue;
            }
            *f = next % FOLDS;
            next += 1;
        }
        let fold: Vec<usize> = block.iter().map(|b| fold_of_block[*b]).collect();
        Ok(BlockSplit { block, test, fold, n_blocks: BLOCKS, n_folds: FOLDS })
    }
}

/// Per-method evaluation metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindMetrics {
    pub method: String,
    /// Mean squared geodesic error on the test blocks, in squared radians.
    pub msge: f64,
    /// Root mean geodesic error, in degrees.
    pub rmge_deg: f64,
    /// Median absolute geodesic error, in degrees.
    pub median_deg: f64,
    /// Hyperparameter constant selected by cross validation.
    pub selected: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// Fits every requested method on the training blocks (hyperparameters
/// tuned by block-fold cross validation) and scores geodesic errors on
/// the held-out blocks.
pub fn evaluate_wind(
    records: &[WindRecord],
    methods: &[Method],
    split: &BlockSplit,
) -> Result<Vec<WindMetrics>, FitError> {
    if records.len() != split.test.len() {
        return Err(FitError::InvalidInput("split does not match record count".into()));
    }
    let data = records_to_dataset(records)?;
    let obs: Vec<(f64, ManifoldPoint)> = data.observations().map(|(t, y)| (t, y.clone())).collect();
    // records_to_dataset keeps record order (timestamps ascending), so the
    // i-th observation is the i-th record unless timestamps were unsorted.
    let train: Vec<(f64, ManifoldPoint)> = obs
        .iter()
        .zip(&split.test)
        .filter(|(_, is_test)| !**is_test)
        .map(|(o, _)| o.clone())
        .collect();
    let test: Vec<(f64, ManifoldPoint)> = obs
        .iter()
        .zip(&split.test)
        .filter(|(_, is_test)| **is_test)
        .map(|(o, _)| o.clone())
        .collect();
    if train.is_empty() || test.is_empty() {
        return Err(FitError::InsufficientData("empty train or test set".into()));
    }
    let train_folds: Vec<usize> = split
        .fold
        .iter()
        .zip(&split.test)
        .filter(|(_, is_test)| !**is_test)
        .map(|(f, _)| *f)
        .collect();
    let train_data = Dataset::from_observations(data.kind().clone(), train.clone())?;

    let mut out = Vec::new();
    for &method in methods {
        let selected = tune_on_blocks(&train, &train_folds, data.kind(), method, split.n_folds)?;
        let hyper = method.hyper(selected, train.len(), -2.0 / 3.0);
        let pred = method.fit(&train_data, hyper)?;
        let mut sq = Vec::with_capacity(test.len());
        for (t, y) in &test {
            let d = pred.predict(*t)?.dist(y)?;
            sq.push(d);
        }
        let msge = sq.iter().map(|d| d * d).sum::<f64>() / sq.len() as f64;
        let mut abs_deg: Vec<f64> = sq.iter().map(|d| d * 180.0 / PI).collect();
        abs_deg.sort_by(f64::total_cmp);
        let median_deg = if abs_deg.len() % 2 == 1 {
            abs_deg[abs_deg.len() / 2]
        } else {
            0.5 * (abs_deg[abs_deg.len() / 2 - 1] + abs_deg[abs_deg.len() / 2])
        };
        out.push(WindMetrics {
            method: method.name().into(),
            msge,
            rmge_deg: msge.sqrt() * 180.0 / PI,
            median_deg,
            selected,
            n_train: train.len(),
            n_test: test.len(),
        });
    }
    Ok(out)
}

/// Block-structured cross validation on the training records: each fold's
/// blocks are held out in turn, the method is fit on the rest, and the
/// constant with the lowest mean squared geodesic error wins (ties take
/// the smaller constant).
fn tune_on_blocks(
    train: &[(f64, ManifoldPoint)],
    fold_of: &[usize],
    kind: &ManifoldKind,
    method: Method,
    n_folds: usize,
) -> Result<f64, FitError> {
    let grid = method.default_grid();
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let mut best: Option<(f64, f64)> = None;
    for &c in &grid {
        let mut fold_losses = Vec::new();
        for f in 0..n_folds {
            let fit_set: Vec<(f64, ManifoldPoint)> = train
                .iter()
                .zip(fold_of)
                .filter(|(_, ff)| **ff != f)
                .map(|(o, _)| o.clone())
                .collect();
            let held: Vec<&(f64, ManifoldPoint)> =
                train.iter().zip(fold_of).filter(|(_, ff)| **ff == f).map(|(o, _)| o).collect();
            if fit_set.is_empty() || held.is_empty() {
                continue;
            }
            let n_fit = fit_set.len();
            let fit_data = Dataset::from_observations(kind.clone(), fit_set)?;
            let pred = method.fit(&fit_data, method.hyper(c, n_fit, -2.0 / 3.0))?;
            let mut loss = 0.0;
            for (t, y) in &held {
                let d = pred.predict(*t)?.dist(y)?;
                loss += d * d;
            }
            fold_losses.push(loss / held.len() as f64);
        }
        let loss = fold_losses.iter().sum::<f64>() / fold_losses.len() as f64;
        match best {
            Some((_, l)) if loss >= l => {}
            _ => best = Some((c, loss)),
        }
    }
    Ok(best.expect("nonempty grid").0)
}

#[cfg(test)]
mod tests;
