//! ANLS and one-word accuracies over model predictions.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decimal::Decimal;

pub const DEFAULT_TAU: f64 = 0.5;
/// Separates alternative ground truths when multi-truth scoring is on.
pub const TRUTH_SEPARATOR: char = '|';

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("no rows to evaluate")]
    EmptyEvaluation,
    #[error("no measurement rows")]
    NoMeasurementRows,
    #[error("no unit rows")]
    NoUnitRows,
    #[error("{path}: {message}")]
    MalformedCsv { path: PathBuf, message: String },
    #[error("tau {0} is outside [0, 1]")]
    InvalidTau(f64),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalTarget {
    Measurement,
    Unit,
    #[serde(alias = "device_summary")]
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub image: String,
    pub question: String,
    pub prediction: String,
    pub ground_truth: String,
    pub target: EvalTarget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub device: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringOptions {
    pub tau: f64,
    /// Treat `|` in a ground truth as separating alternatives and keep the
    /// best-scoring one.
    pub multi_truth: bool,
}

impl Default for ScoringOptions {
    fn default() -> Self {
        Self {
            tau: DEFAULT_TAU,
            multi_truth: false,
        }
    }
}

impl ScoringOptions {
    fn truths<'a>(&self, gt: &'a str) -> Vec<&'a str> {
        if self.multi_truth {
            gt.split(TRUTH_SEPARATOR).collect()
        } else {
            vec![gt]
        }
    }
}

/// Edit distance over Unicode scalar values with unit costs.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

/// `1 − NL` when the normalized distance `NL` is at most `tau`, else 0.
/// Both strings are trimmed and lower-cased first.
pub fn anls_item(prediction: &str, ground_truth: &str, tau: f64) -> f64 {
    let (p, g) = (normalize(prediction), normalize(ground_truth));
    let longest = p.chars().count().max(g.chars().count());
    if longest == 0 {
        return 1.0;
    }
    let nl = levenshtein(&p, &g) as f64 / longest as f64;
    if nl <= tau {
        1.0 - nl
    } else {
        0.0
    }
}

fn row_anls(row: &PredictionRow, opts: &ScoringOptions) -> f64 {
    opts.truths(&row.ground_truth)
        .into_iter()
        .map(|gt| anls_item(&row.prediction, gt, opts.tau))
        .fold(0.0, f64::max)
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn anls(rows: &[PredictionRow], opts: &ScoringOptions) -> Result<f64, EvaluationError> {
    if rows.is_empty() {
        return Err(EvaluationError::EmptyEvaluation);
    }
    let scores: Vec<f64> = rows.par_iter().map(|r| row_anls(r, opts)).collect();
    Ok(mean(&scores))
}

/// Decimal equality when the truth parses as a number (`"76" == "76.0"`),
/// trimmed string equality otherwise (`"17:57"`).
pub fn numeric_match(prediction: &str, ground_truth: &str) -> bool {
    match Decimal::parse(ground_truth) {
        Some(truth) => Decimal::parse(prediction) == Some(truth),
        None => prediction.trim() == ground_truth.trim(),
    }
}

pub fn unit_match(prediction: &str, ground_truth: &str) -> bool {
    normalize(prediction) == normalize(ground_truth)
}

fn row_hit(row: &PredictionRow, opts: &ScoringOptions) -> bool {
    let matcher = match row.target {
        EvalTarget::Measurement => numeric_match,
        EvalTarget::Unit => unit_match,
        EvalTarget::Other => return false,
    };
    opts.truths(&row.ground_truth).into_iter().any(|gt| matcher(&row.prediction, gt))
}

fn accuracy(rows: &[PredictionRow], target: EvalTarget, opts: &ScoringOptions) -> Option<f64> {
    let hits: Vec<bool> = rows
        .iter()
        .filter(|r| r.target == target)
        .map(|r| row_hit(r, opts))
        .collect();
    (!hits.is_empty()).then(|| hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneWordAccuracies {
    pub numeric: f64,
    pub unit: f64,
    pub word_level: f64,
}

pub fn one_word_accuracies(
    rows: &[PredictionRow],
    opts: &ScoringOptions,
) -> Result<OneWordAccuracies, EvaluationError> {
    let numeric = accuracy(rows, EvalTarget::Measurement, opts).ok_or(EvaluationError::NoMeasurementRows)?;
    let unit = accuracy(rows, EvalTarget::Unit, opts).ok_or(EvaluationError::NoUnitRows)?;
    Ok(OneWordAccuracies {
        numeric,
        unit,
        word_level: (numeric + unit) / 2.0,
    })
}

/// Scores for a group of rows. Accuracies are absent when the group has no
/// rows of that kind; the word-level figure needs both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub n_items: usize,
    pub anls: f64,
    pub numeric_accuracy: Option<f64>,
    pub unit_accuracy: Option<f64>,
    pub word_level_accuracy: Option<f64>,
}

impl ScoreSummary {
    fn of(rows: &[PredictionRow], opts: &ScoringOptions) -> Result<Self, EvaluationError> {
        let numeric = accuracy(rows, EvalTarget::Measurement, opts);
        let unit = accuracy(rows, EvalTarget::Unit, opts);
        Ok(Self {
            n_items: rows.len(),
            anls: anls(rows, opts)?,
            numeric_accuracy: numeric,
            unit_accuracy: unit,
            word_level_accuracy: numeric.zip(unit).map(|(n, u)| (n + u) / 2.0),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tau: f64,
    pub multi_truth: bool,
    #[serde(flatten)]
    pub overall: ScoreSummary,
    /// Present when the predictions carry a `device` column.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_device: BTreeMap<String, ScoreSummary>,
}

pub fn evaluate(rows: &[PredictionRow], opts: &ScoringOptions) -> Result<EvalReport, EvaluationError> {
    if !(0.0..=1.0).contains(&opts.tau) {
        return Err(EvaluationError::InvalidTau(opts.tau));
    }
    let mut groups: BTreeMap<String, Vec<PredictionRow>> = BTreeMap::new();
    for r in rows {
        if let Some(d) = &r.device {
            groups.entry(d.clone()).or_default().push(r.clone());
        }
    }
    let per_device = groups
        .iter()
        .map(|(d, g)| Ok((d.clone(), ScoreSummary::of(g, opts)?)))
        .collect::<Result<_, EvaluationError>>()?;
    Ok(EvalReport {
        tau: opts.tau,
        multi_truth: opts.multi_truth,
        overall: ScoreSummary::of(rows, opts)?,
        per_device,
    })
}

const REQUIRED_COLUMNS: [&str; 5] = ["image", "question", "prediction", "ground_truth", "target"];

/// Reads `image,question,prediction,ground_truth,target[,device]`.
pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRow>, EvaluationError> {
    let malformed = |message: String| EvaluationError::MalformedCsv {
        path: path.to_owned(),
        message,
    };
    let mut reader = csv::Reader::from_path(path).map_err(|e| malformed(e.to_string()))?;
    let headers = reader.headers().map_err(|e| malformed(e.to_string()))?.clone();
    if headers.iter().all(str::is_empty) {
        return Err(malformed("no header row".into()));
    }
    for col in REQUIRED_COLUMNS {
        if !headers.iter().any(|h| h == col) {
            return Err(malformed(format!("missing column {col}")));
        }
    }
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize::<PredictionRow>().enumerate() {
        let mut row = row.map_err(|e| malformed(format!("row {}: {e}", i + 1)))?;
        if row.ground_truth.trim().is_empty() {
            return Err(malformed(format!("row {}: empty ground_truth", i + 1)));
        }
        if row.device.as_deref().is_some_and(str::is_empty) {
            row.device = None;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Scores a predictions CSV and, when `out` is given, writes the report as
/// pretty JSON.
pub fn run_benchmark(
    predictions: &Path,
    out: Option<&Path>,
    opts: &ScoringOptions,
) -> Result<EvalReport, EvaluationError> {
    let rows = read_predictions(predictions)?;
    let report = evaluate(&rows, opts)?;
    if let Some(out) = out {
        let mut json = serde_json::to_string_pretty(&report).map_err(|e| EvaluationError::Json {
            path: out.to_owned(),
            source: e,
        })?;
        json.push('\n');
        fs::write(out, json).map_err(|e| EvaluationError::Io {
            path: out.to_owned(),
            source: e,
        })?;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(pred: &str, gt: &str, target: EvalTarget) -> PredictionRow {
        PredictionRow {
            image: "img".into(),
            question: "q".into(),
            prediction: pred.into(),
            ground_truth: gt.into(),
            target,
            device: None,
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("30", "30"), 0);
        assert_eq!(levenshtein("0.022 V", "0.022 A"), 1);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("°C", "C"), 1);
    }

    #[test]
    fn anls_examples() {
        assert_eq!(anls_item("30", "30", 0.5), 1.0);
        assert_eq!(anls_item("abcd", "wxyz", 0.5), 0.0);
        assert!((anls_item("0.022 A", "0.022 V", 0.5) - 6.0 / 7.0).abs() < 1e-12);
        assert_eq!(anls_item("  BPM ", "bpm", 0.5), 1.0);
        // NL = 0.5 sits on the threshold and still scores.
        assert_eq!(anls_item("ab", "ax", 0.5), 0.5);
        let half = [row("x", "x", EvalTarget::Other), row("ab", "cd", EvalTarget::Other)];
        assert_eq!(anls(&half, &ScoringOptions::default()).unwrap(), 0.5);
        assert!(matches!(anls(&[], &ScoringOptions::default()), Err(EvaluationError::EmptyEvaluation)));
    }

    #[test]
    fn one_word_examples() {
        assert!(numeric_match("76", "76"));
        assert!(numeric_match("76.0", "76"));
        assert!(!numeric_match("36.9", "35.9"));
        assert!(numeric_match("17:57", "17:57"));
        assert!(!numeric_match("1757", "17:57"));
        assert!(unit_match("bpm", "BPM"));
        assert!(!unit_match("1/min", "BPM"));
        let rows = [
            row("76", "76", EvalTarget::Measurement),
            row("36.9", "35.9", EvalTarget::Measurement),
            row("bpm", "BPM", EvalTarget::Unit),
        ];
        let acc = one_word_accuracies(&rows, &ScoringOptions::default()).unwrap();
        assert_eq!((acc.numeric, acc.unit, acc.word_level), (0.5, 1.0, 0.75));
        assert!(matches!(
            one_word_accuracies(&rows[..2], &ScoringOptions::default()),
            Err(EvaluationError::NoUnitRows)
        ));
    }

    #[test]
    fn multi_truth_takes_the_best_alternative() {
        let r = row("5.0", "five|5", EvalTarget::Measurement);
        let multi = ScoringOptions {
            multi_truth: true,
            ..ScoringOptions::default()
        };
        assert!(row_hit(&r, &multi));
        assert!(!row_hit(&r, &ScoringOptions::default()));
        assert_eq!(row_anls(&row("five", "5|five", EvalTarget::Other), &multi), 1.0);
    }
}
