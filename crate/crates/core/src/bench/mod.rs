//! Success-rate evaluation over an annotated dataset.
//!
//! Each run predicts one point per record and scores it against the
//! record's mask. Per-run rates are split by category and summarized across
//! runs by median and quartiles.

mod dataset;
mod stats;

use std::fmt::Write as _;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dataset::{load_dataset, score_prediction, DatasetRecord, Mask};
pub use stats::{percentile, Summary};

use crate::error::PipelineError;
use crate::intent::Utterance;
use crate::par::{self, Execution};
use crate::prediction::{PixelPoint, PositionType, Predictor};
use crate::vision::ImageRef;

/// Runs per evaluation when not configured.
pub const DEFAULT_RUNS: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BenchError {
    #[error("{0}")]
    Io(String),
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error("record {record}: image is {image:?} but mask is {mask:?}")]
    DimensionMismatch {
        record: String,
        image: (u32, u32),
        mask: (u32, u32),
    },
    #[error("record {record}: mask has no positive pixel")]
    EmptyMask { record: String },
    #[error("at least one run is required")]
    NoRuns,
    #[error("report: {0}")]
    Report(String),
}

/// Something that places one point per record.
pub trait PredictionSource: Sync {
    fn predict(&self, record: &DatasetRecord, run: usize, run_seed: u64) -> Result<PixelPoint, PipelineError>;
}

impl PredictionSource for Predictor {
    fn predict(&self, record: &DatasetRecord, _run: usize, run_seed: u64) -> Result<PixelPoint, PipelineError> {
        let image = ImageRef::open(record.id.clone(), &record.image_path)?;
        let utterance = Utterance::new(record.prompt.clone())?;
        let predictor = self.clone().with_seed(Some(run_seed));
        Ok(Predictor::predict(&predictor, &image, &utterance)?.point)
    }
}

/// Uniform pixel sampling, independent per (seed, run, record).
#[derive(Debug, Clone, Copy)]
pub struct RandomSampler {
    pub seed: u64,
}

impl RandomSampler {
    fn rng(&self, run: usize, record: usize) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&(run as u64).to_le_bytes());
        key[16..24].copy_from_slice(&(record as u64).to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }
}

impl PredictionSource for RandomSampler {
    fn predict(&self, record: &DatasetRecord, run: usize, _run_seed: u64) -> Result<PixelPoint, PipelineError> {
        let mut rng = self.rng(run, record.index);
        Ok(PixelPoint::new(
            rng.random_range(0..record.width()),
            rng.random_range(0..record.height()),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryCounts {
    pub absolute: usize,
    pub relative: usize,
    pub overall: usize,
}

impl CategoryCounts {
    pub fn of(records: &[DatasetRecord]) -> Self {
        let absolute = records.iter().filter(|r| r.category == PositionType::Absolute).count();
        Self {
            absolute,
            relative: records.len() - absolute,
            overall: records.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRates {
    pub run: usize,
    pub seed: u64,
    pub absolute: Option<f64>,
    pub relative: Option<f64>,
    pub overall: f64,
    /// Records whose prediction failed; they score as misses.
    pub errors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub label: String,
    pub seed: u64,
    pub runs_requested: usize,
    /// Completed runs; the statistics cover these only.
    pub runs: usize,
    pub partial: bool,
    pub abort_reason: Option<String>,
    pub records: CategoryCounts,
    pub absolute: Option<Summary>,
    pub relative: Option<Summary>,
    pub overall: Option<Summary>,
    pub per_run: Vec<RunRates>,
}

impl BenchmarkReport {
    pub fn save(&self, path: &Path) -> Result<(), BenchError> {
        let text = serde_json::to_string_pretty(self).map_err(|e| BenchError::Report(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| BenchError::Report(e.to_string()))
    }
}

fn rate(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

enum Outcome {
    Hit,
    Miss,
    Error,
    Skipped,
}

/// The seed forwarded to backends on a given run.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    seed.wrapping_add(run as u64)
}

/// Evaluates every record once per run. Prediction errors count as misses;
/// an unreachable backend stops the evaluation and the report covers the
/// runs completed before it, flagged partial.
pub fn evaluate_combination(
    source: &dyn PredictionSource,
    label: &str,
    records: &[DatasetRecord],
    runs: usize,
    seed: u64,
    execution: Execution,
) -> Result<BenchmarkReport, BenchError> {
    if runs == 0 {
        return Err(BenchError::NoRuns);
    }
    let mut per_run = Vec::with_capacity(runs);
    let mut abort_reason = None;
    for run in 0..runs {
        let rs = run_seed(seed, run);
        let abort = AtomicBool::new(false);
        let reason = Mutex::new(None);
        let outcomes = par::map_indexed(execution, records, |_, record| {
            if abort.load(Ordering::Relaxed) {
                return Outcome::Skipped;
            }
            match source.predict(record, run, rs) {
                Ok(p) if score_prediction(record, p) => Outcome::Hit,
                Ok(_) => Outcome::Miss,
                Err(e) if e.is_unavailable() => {
                    abort.store(true, Ordering::Relaxed);
                    reason.lock().unwrap_or_else(|p| p.into_inner()).get_or_insert(e.to_string());
                    Outcome::Skipped
                }
                Err(e) => {
                    tracing::debug!(record = %record.id, error = %e, "prediction failed");
                    Outcome::Error
                }
            }
        });
        if abort.load(Ordering::Relaxed) {
            let why = reason.into_inner().unwrap_or_else(|p| p.into_inner()).unwrap_or_default();
            tracing::warn!(run, reason = %why, "backend unavailable; evaluation aborted");
            abort_reason = Some(why);
            break;
        }
        let mut hits = [0usize; 2];
        let mut totals = [0usize; 2];
        let mut errors = 0;
        for (record, outcome) in records.iter().zip(&outcomes) {
            let c = (record.category == PositionType::Relative) as usize;
            totals[c] += 1;
            match outcome {
                Outcome::Hit => hits[c] += 1,
                Outcome::Error => errors += 1,
                Outcome::Miss | Outcome::Skipped => {}
            }
        }
        per_run.push(RunRates {
            run,
            seed: rs,
            absolute: rate(hits[0], totals[0]),
            relative: rate(hits[1], totals[1]),
            overall: (hits[0] + hits[1]) as f64 / records.len().max(1) as f64,
            errors,
        });
    }
    let column = |f: fn(&RunRates) -> Option<f64>| -> Option<Summary> {
        let values: Vec<f64> = per_run.iter().filter_map(f).collect();
        Summary::of(&values)
    };
    Ok(BenchmarkReport {
        label: label.to_string(),
        seed,
        runs_requested: runs,
        runs: per_run.len(),
        partial: abort_reason.is_some(),
        abort_reason,
        records: CategoryCounts::of(records),
        absolute: column(|r| r.absolute),
        relative: column(|r| r.relative),
        overall: column(|r| Some(r.overall)),
        per_run,
    })
}

/// Uniformly sampled points, aggregated like any other combination.
pub fn random_baseline(
    records: &[DatasetRecord],
    runs: usize,
    seed: u64,
    execution: Execution,
) -> Result<BenchmarkReport, BenchError> {
    evaluate_combination(&RandomSampler { seed }, "Random Point Sampling", records, runs, seed, execution)
}

fn cell(s: Option<Summary>) -> String {
    match s {
        Some(s) => format!("{:.2} [{:.2}, {:.2}]", s.median, s.p25, s.p75),
        None => "n/a".to_string(),
    }
}

/// Plain-text table: one row per report, median [25%, 75%] per category.
pub fn render_table(reports: &[BenchmarkReport]) -> String {
    let headers = ["Combination", "Absolute", "Relative", "Overall", "Runs"];
    let rows: Vec<[String; 5]> = reports
        .iter()
        .map(|r| {
            let runs = if r.partial {
                format!("{}/{} (partial)", r.runs, r.runs_requested)
            } else {
                r.runs.to_string()
            };
            [r.label.clone(), cell(r.absolute), cell(r.relative), cell(r.overall), runs]
        })
        .collect();
    let mut widths = headers.map(str::len);
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[&str]| {
        let padded: Vec<String> = cells.iter().zip(widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join(" | ").trim_end());
    };
    line(&mut out, &headers);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "{}", rule.join("-+-"));
    for row in &rows {
        line(&mut out, &row.each_ref().map(String::as_str));
    }
    out
}
