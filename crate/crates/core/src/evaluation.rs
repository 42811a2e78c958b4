//! Scoring of estimate series against weekly ground truth: mean absolute
//! error and Pearson correlation, per season.
//!
//! Pairing is strict on (week-ending date, region): weekly truth is
//! authoritative and nothing is interpolated. A correlation that is
//! undefined (zero variance) is an error, never a sentinel value that
//! could silently poison averages across seasons.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::domain::{
    DateStamp, GroundTruthEntry, GroundTruthSeries, IliRate, Region, SourceKind,
};
use crate::inference::IliEstimate;

const TRUTH_CSV_HEADER: &str = "week_ending,region,ili_rate";

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("vectors have different lengths: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("undefined correlation: {side} vector has zero variance")]
    UndefinedCorrelation { side: &'static str },

    #[error("insufficient overlap: {matched} matched weeks in season, need >= {needed}")]
    InsufficientOverlap { matched: usize, needed: usize },

    #[error("estimates mix regions or sources; a report covers one (region, source)")]
    MixedSeries,

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error(transparent)]
    Domain(#[from] crate::domain::DomainError),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Minimum matched weeks for a season report.
pub const MIN_MATCHED_WEEKS: usize = 3;

/// Mean absolute error between two equal-length rate vectors.
pub fn mae(estimates: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    if estimates.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: estimates.len(),
            right: truth.len(),
        });
    }
    if estimates.is_empty() {
        return Err(EvalError::TooShort { needed: 1, got: 0 });
    }
    let total: f64 = estimates
        .iter()
        .zip(truth)
        .map(|(e, t)| (e - t).abs())
        .sum();
    Ok(total / estimates.len() as f64)
}

/// Sample Pearson correlation coefficient.
pub fn pearson(estimates: &[f64], truth: &[f64]) -> Result<f64, EvalError> {
    if estimates.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: estimates.len(),
            right: truth.len(),
        });
    }
    if estimates.len() < 3 {
        return Err(EvalError::TooShort {
            needed: 3,
            got: estimates.len(),
        });
    }
    let n = estimates.len() as f64;
    let me = estimates.iter().sum::<f64>() / n;
    let mt = truth.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut ve = 0.0;
    let mut vt = 0.0;
    for (e, t) in estimates.iter().zip(truth) {
        let de = e - me;
        let dt = t - mt;
        cov += de * dt;
        ve += de * de;
        vt += dt * dt;
    }
    if ve == 0.0 {
        return Err(EvalError::UndefinedCorrelation { side: "estimate" });
    }
    if vt == 0.0 {
        return Err(EvalError::UndefinedCorrelation { side: "truth" });
    }
    Ok(cov / (ve.sqrt() * vt.sqrt()))
}

/// One matched (estimate, truth) week.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedWeek {
    pub week_ending: DateStamp,
    pub estimate: f64,
    pub truth: f64,
}

/// Season-level scorecard.
#[derive(Debug, Clone, Serialize)]
pub struct EvaluationReport {
    pub region: Region,
    pub source: SourceKind,
    pub season: String,
    pub n_weeks: usize,
    pub mae: f64,
    pub pearson_r: f64,
    pub paired_weeks: Vec<PairedWeek>,
    /// Weeks with an estimate but no truth entry in range.
    pub unmatched_estimate_weeks: Vec<DateStamp>,
    /// Weeks with truth but no estimate in range.
    pub unmatched_truth_weeks: Vec<DateStamp>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// Pair weekly estimates with ground truth over `[start, end]` and score.
///
/// Unmatched weeks on either side are listed and excluded from the
/// metrics. Fewer than [`MIN_MATCHED_WEEKS`] matches is an error.
pub fn season_report(
    estimates: &[IliEstimate],
    truth: &GroundTruthSeries,
    season: &str,
    start: DateStamp,
    end: DateStamp,
) -> Result<EvaluationReport, EvalError> {
    let Some(first) = estimates.first() else {
        return Err(EvalError::InsufficientOverlap {
            matched: 0,
            needed: MIN_MATCHED_WEEKS,
        });
    };
    let region = first.region;
    let source = first.source;
    if estimates
        .iter()
        .any(|e| e.region != region || e.source != source)
    {
        return Err(EvalError::MixedSeries);
    }
    let in_range =
        |d: DateStamp| d >= start && d <= end;
    let mut paired = Vec::new();
    let mut unmatched_estimates = Vec::new();
    let mut unmatched_truth = Vec::new();
    for e in estimates.iter().filter(|e| in_range(e.date)) {
        match truth
            .for_region(region)
            .find(|t| t.week_ending == e.date)
        {
            Some(t) => paired.push(PairedWeek {
                week_ending: e.date,
                estimate: e.value.value(),
                truth: t.rate.value(),
            }),
            None => unmatched_estimates.push(e.date),
        }
    }
    for t in truth.for_region(region).filter(|t| in_range(t.week_ending)) {
        if !estimates.iter().any(|e| e.date == t.week_ending) {
            unmatched_truth.push(t.week_ending);
        }
    }
    if paired.len() < MIN_MATCHED_WEEKS {
        return Err(EvalError::InsufficientOverlap {
            matched: paired.len(),
            needed: MIN_MATCHED_WEEKS,
        });
    }
    let est: Vec<f64> = paired.iter().map(|p| p.estimate).collect();
    let tru: Vec<f64> = paired.iter().map(|p| p.truth).collect();
    Ok(EvaluationReport {
        region,
        source,
        season: season.to_string(),
        n_weeks: paired.len(),
        mae: mae(&est, &tru)?,
        pearson_r: pearson(&est, &tru)?,
        paired_weeks: paired,
        unmatched_estimate_weeks: unmatched_estimates,
        unmatched_truth_weeks: unmatched_truth,
    })
}

/// Multi-season aggregate, reported under both weighting conventions
/// (the upstream convention is unstated, so both are published).
#[derive(Debug, Clone, Serialize)]
pub struct AggregateMetrics {
    pub n_seasons: usize,
    pub n_weeks: usize,
    /// Mean of per-season MAEs: every season counts equally.
    pub mae_per_season: f64,
    /// MAE pooled over all matched weeks: every week counts equally.
    pub mae_per_week: f64,
    /// Mean of per-season Pearson correlations.
    pub pearson_per_season: f64,
    /// Pearson over all matched weeks pooled into one series.
    pub pearson_pooled: f64,
}

pub fn aggregate_reports(reports: &[EvaluationReport]) -> Result<AggregateMetrics, EvalError> {
    if reports.is_empty() {
        return Err(EvalError::TooShort { needed: 1, got: 0 });
    }
    let n_seasons = reports.len();
    let mae_per_season = reports.iter().map(|r| r.mae).sum::<f64>() / n_seasons as f64;
    let pearson_per_season = reports.iter().map(|r| r.pearson_r).sum::<f64>() / n_seasons as f64;
    let mut est = Vec::new();
    let mut tru = Vec::new();
    for r in reports {
        for p in &r.paired_weeks {
            est.push(p.estimate);
            tru.push(p.truth);
        }
    }
    Ok(AggregateMetrics {
        n_seasons,
        n_weeks: est.len(),
        mae_per_season,
        mae_per_week: mae(&est, &tru)?,
        pearson_per_season,
        pearson_pooled: pearson(&est, &tru)?,
    })
}

/// Read a `week_ending,region,ili_rate` CSV.
pub fn read_ground_truth_csv(path: &Path) -> Result<GroundTruthSeries, EvalError> {
    let raw = fs::read_to_string(path)?;
    let err = |line: usize, reason: String| EvalError::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = raw.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == TRUTH_CSV_HEADER => {}
        Some((_, header)) => {
            return Err(err(
                1,
                format!("bad header {header:?}, expected {TRUTH_CSV_HEADER:?}"),
            ))
        }
        None => return Err(err(1, "empty file".to_string())),
    }
    let mut entries = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(err(line_no, "expected 3 comma-separated fields".to_string()));
        }
        let week_ending: DateStamp = fields[0]
            .parse()
            .map_err(|e| err(line_no, format!("{e}")))?;
        let region: Region = fields[1]
            .parse()
            .map_err(|e| err(line_no, format!("{e}")))?;
        let value: f64 = fields[2]
            .parse()
            .map_err(|_| err(line_no, format!("unparseable rate {:?}", fields[2])))?;
        let rate = IliRate::new(value).map_err(|e| err(line_no, format!("{e}")))?;
        entries.push(GroundTruthEntry {
            week_ending,
            region,
            rate,
        });
    }
    Ok(GroundTruthSeries::new(entries)?)
}

/// Write ground truth in the same CSV form the reader accepts.
pub fn write_ground_truth_csv(truth: &GroundTruthSeries, path: &Path) -> Result<(), EvalError> {
    let mut content = format!("{TRUTH_CSV_HEADER}\n");
    for e in truth.entries() {
        let _ = writeln!(
            content,
            "{},{},{:.6}",
            e.week_ending,
            e.region,
            e.rate.value()
        );
    }
    crate::store::write_atomic(path, content.as_bytes())?;
    Ok(())
}
