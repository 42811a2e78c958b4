//! Daily and weekly ILI estimates from the feature store.
//!
//! Every estimate for date `i` aggregates the trailing week of term
//! frequencies (`i-6 ..= i`), mirroring how the models are trained on
//! weekly ground truth. Predictions are clamped at zero here, at the
//! estimate boundary, so the regression core stays linear and testable
//! against algebraic oracles while published estimates respect the rate
//! invariants.

use chrono::Weekday;
use serde::Serialize;
use thiserror::Error;

use crate::domain::{window_dates, DateStamp, FrequencySeries, IliRate, Region, SourceKind};
use crate::model::{predict, ModelArtifact, ModelError};
use crate::store::StoreSnapshot;

/// Default centered moving-average width for smoothed series.
pub const DEFAULT_SMOOTHING_WINDOW: usize = 7;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("window for {date} extends outside the series range {start}..{end}")]
    OutOfRange {
        date: DateStamp,
        start: DateStamp,
        end: DateStamp,
    },

    #[error("incomplete window: {date} has no usable data")]
    IncompleteWindow { date: DateStamp },

    #[error("model is for {model_region}/{model_source}, snapshot holds {key_region}/{key_source}")]
    ModelMismatch {
        model_region: Region,
        model_source: SourceKind,
        key_region: Region,
        key_source: SourceKind,
    },

    #[error("snapshot terms do not match model terms")]
    TermMismatch,

    #[error("{date} is a {got:?}, expected week-ending weekday {expected:?}")]
    WrongWeekday {
        date: DateStamp,
        got: Weekday,
        expected: Weekday,
    },

    #[error("smoothing window must be an odd integer >= 3, got {0}")]
    InvalidSmoothingWindow(usize),

    #[error("invalid range: start {start} after end {end}")]
    InvalidRange { start: DateStamp, end: DateStamp },

    #[error("estimates not in ascending date order at {date}")]
    UnsortedEstimates { date: DateStamp },

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error("estimate {value} is not a valid rate")]
    InvalidEstimate { value: f64 },
}

/// What to do when a window day has no stored data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MissingDayPolicy {
    /// Any missing day fails the window.
    #[default]
    Strict,
    /// A missing day takes the nearest earlier present day's value and
    /// the estimate is flagged incomplete.
    CarryForward,
}

impl MissingDayPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            MissingDayPolicy::Strict => "strict",
            MissingDayPolicy::CarryForward => "carry_forward",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "strict" => Some(MissingDayPolicy::Strict),
            "carry_forward" => Some(MissingDayPolicy::CarryForward),
            _ => None,
        }
    }
}

/// One dated, region-tagged estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct IliEstimate {
    pub date: DateStamp,
    pub region: Region,
    pub source: SourceKind,
    pub value: IliRate,
    pub smoothed_value: Option<IliRate>,
    pub model_id: String,
    /// False when a fill policy papered over missing window days.
    pub window_complete: bool,
}

/// Window aggregation output: per-term means plus completeness.
#[derive(Debug, Clone)]
pub struct WindowFeatures {
    pub means: Vec<f64>,
    pub complete: bool,
}

/// Arithmetic mean of the 7 daily frequency rows for the window of `i`.
pub fn aggregate_window(
    series: &FrequencySeries,
    i: DateStamp,
    policy: MissingDayPolicy,
) -> Result<WindowFeatures, InferenceError> {
    let window = window_dates(i);
    let earliest = window[window.len() - 1];
    if !series.covers(earliest) || !series.covers(i) {
        return Err(InferenceError::OutOfRange {
            date: i,
            start: series.start(),
            end: series.end(),
        });
    }
    let p = series.terms().len();
    let mut sums = vec![0.0f64; p];
    let mut complete = true;
    for &day in &window {
        let row = match series.row(day) {
            Some(row) => row,
            None => match policy {
                MissingDayPolicy::Strict => {
                    return Err(InferenceError::IncompleteWindow { date: day })
                }
                MissingDayPolicy::CarryForward => {
                    complete = false;
                    match carried_row(series, day) {
                        Some(row) => row,
                        None => return Err(InferenceError::IncompleteWindow { date: day }),
                    }
                }
            },
        };
        for (s, &v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let nf = window.len() as f64;
    Ok(WindowFeatures {
        means: sums.into_iter().map(|s| s / nf).collect(),
        complete,
    })
}

/// Nearest earlier present day's row, if any.
fn carried_row(series: &FrequencySeries, day: DateStamp) -> Option<&[f64]> {
    let mut d = day;
    while d > series.start() {
        d = d.pred();
        if let Some(row) = series.row(d) {
            return Some(row);
        }
    }
    None
}

fn check_compatibility(
    model: &ModelArtifact,
    snapshot: &StoreSnapshot,
) -> Result<(), InferenceError> {
    if model.region != snapshot.key.region || model.source != snapshot.key.source {
        return Err(InferenceError::ModelMismatch {
            model_region: model.region,
            model_source: model.source,
            key_region: snapshot.key.region,
            key_source: snapshot.key.source,
        });
    }
    if snapshot.series.terms() != model.terms.as_slice() {
        return Err(InferenceError::TermMismatch);
    }
    Ok(())
}

/// Estimate the rate for date `i`: clamp-at-zero of the model prediction
/// on the aggregated window. Smoothing is a series-level operation and is
/// not applied here.
pub fn estimate_date(
    model: &ModelArtifact,
    snapshot: &StoreSnapshot,
    i: DateStamp,
    policy: MissingDayPolicy,
    model_id: &str,
) -> Result<IliEstimate, InferenceError> {
    check_compatibility(model, snapshot)?;
    estimate_date_unchecked(model, snapshot, i, policy, model_id)
}

fn estimate_date_unchecked(
    model: &ModelArtifact,
    snapshot: &StoreSnapshot,
    i: DateStamp,
    policy: MissingDayPolicy,
    model_id: &str,
) -> Result<IliEstimate, InferenceError> {
    let features = aggregate_window(&snapshot.series, i, policy)?;
    let raw = predict(model, &features.means)?;
    let value = IliRate::new(raw.max(0.0))
        .map_err(|_| InferenceError::InvalidEstimate { value: raw })?;
    Ok(IliEstimate {
        date: i,
        region: model.region,
        source: model.source,
        value,
        smoothed_value: None,
        model_id: model_id.to_string(),
        window_complete: features.complete,
    })
}

/// A day in an estimate series: either an estimate or an explicit gap.
#[derive(Debug, Clone, PartialEq)]
pub enum DailyOutcome {
    Estimate(IliEstimate),
    Gap { date: DateStamp, reason: String },
}

impl DailyOutcome {
    pub fn date(&self) -> DateStamp {
        match self {
            DailyOutcome::Estimate(e) => e.date,
            DailyOutcome::Gap { date, .. } => *date,
        }
    }

    pub fn as_estimate(&self) -> Option<&IliEstimate> {
        match self {
            DailyOutcome::Estimate(e) => Some(e),
            DailyOutcome::Gap { .. } => None,
        }
    }
}

/// One outcome per day in `[start, end]`. Days whose window fails the
/// policy come back as explicit gaps, never silently skipped.
pub fn estimate_range(
    model: &ModelArtifact,
    snapshot: &StoreSnapshot,
    start: DateStamp,
    end: DateStamp,
    policy: MissingDayPolicy,
    model_id: &str,
) -> Result<Vec<DailyOutcome>, InferenceError> {
    if start > end {
        return Err(InferenceError::InvalidRange { start, end });
    }
    check_compatibility(model, snapshot)?;
    let mut out = Vec::with_capacity(end.days_since(start) as usize + 1);
    let mut day = start;
    while day <= end {
        match estimate_date_unchecked(model, snapshot, day, policy, model_id) {
            Ok(e) => out.push(DailyOutcome::Estimate(e)),
            Err(
                e @ (InferenceError::IncompleteWindow { .. } | InferenceError::OutOfRange { .. }),
            ) => out.push(DailyOutcome::Gap {
                date: day,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
        day = day.succ();
    }
    Ok(out)
}

/// Weekly estimate: identical to the daily estimate at the week-ending
/// date, whose trailing window is exactly the surveillance week.
pub fn weekly_estimate(
    model: &ModelArtifact,
    snapshot: &StoreSnapshot,
    week_ending: DateStamp,
    policy: MissingDayPolicy,
    week_ending_day: Weekday,
    model_id: &str,
) -> Result<IliEstimate, InferenceError> {
    if week_ending.weekday() != week_ending_day {
        return Err(InferenceError::WrongWeekday {
            date: week_ending,
            got: week_ending.weekday(),
            expected: week_ending_day,
        });
    }
    estimate_date(model, snapshot, week_ending, policy, model_id)
}

/// Centered moving average over `window` days, per contiguous segment.
///
/// Date gaps split the input into segments smoothed independently. At
/// segment edges the window shrinks symmetrically to the largest centered
/// window that fits. Returns the same estimates with `smoothed_value`
/// filled in.
pub fn smooth(
    estimates: &[IliEstimate],
    window: usize,
) -> Result<Vec<IliEstimate>, InferenceError> {
    if window < 3 || window.is_multiple_of(2) {
        return Err(InferenceError::InvalidSmoothingWindow(window));
    }
    for pair in estimates.windows(2) {
        if pair[1].date <= pair[0].date {
            return Err(InferenceError::UnsortedEstimates {
                date: pair[1].date,
            });
        }
    }
    let mut out = estimates.to_vec();
    let mut seg_start = 0;
    for i in 0..out.len() {
        let is_last = i + 1 == out.len();
        let breaks = !is_last && out[i + 1].date.days_since(out[i].date) != 1;
        if is_last || breaks {
            smooth_segment(&mut out[seg_start..=i], window);
            seg_start = i + 1;
        }
    }
    Ok(out)
}

fn smooth_segment(segment: &mut [IliEstimate], window: usize) {
    let half = window / 2;
    let len = segment.len();
    let values: Vec<f64> = segment.iter().map(|e| e.value.value()).collect();
    for (i, est) in segment.iter_mut().enumerate() {
        let k = half.min(i).min(len - 1 - i);
        let slice = &values[i - k..=i + k];
        let mean = slice.iter().sum::<f64>() / slice.len() as f64;
        est.smoothed_value =
            Some(IliRate::new(mean.max(0.0)).expect("mean of valid rates is a valid rate"));
    }
}

// ---------------------------------------------------------------------------
// Export rows: the single serialization shared by the CLI and the HTTP API
// ---------------------------------------------------------------------------

/// Header of the estimate CSV; the JSON field names are identical.
pub const ESTIMATE_CSV_HEADER: &str =
    "date,region,source,model_id,value,smoothed_value,window_complete";

/// Round to 6 decimal places: the export precision of estimate values.
/// Both the CSV text and the JSON number are derived from this same
/// rounded value, so the two surfaces carry identical numbers.
pub fn round_rate(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

/// One export row; gaps have all value fields empty/null.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRow {
    pub date: DateStamp,
    pub region: Region,
    pub source: SourceKind,
    pub model_id: String,
    pub value: Option<f64>,
    pub smoothed_value: Option<f64>,
    pub window_complete: Option<bool>,
}

impl EstimateRow {
    pub fn from_outcome(outcome: &DailyOutcome, region: Region, source: SourceKind, model_id: &str) -> Self {
        match outcome {
            DailyOutcome::Estimate(e) => EstimateRow {
                date: e.date,
                region: e.region,
                source: e.source,
                model_id: e.model_id.clone(),
                value: Some(round_rate(e.value.value())),
                smoothed_value: e.smoothed_value.map(|r| round_rate(r.value())),
                window_complete: Some(e.window_complete),
            },
            DailyOutcome::Gap { date, .. } => EstimateRow {
                date: *date,
                region,
                source,
                model_id: model_id.to_string(),
                value: None,
                smoothed_value: None,
                window_complete: None,
            },
        }
    }

    pub fn to_csv_line(&self) -> String {
        let fmt_opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{}",
            self.date,
            self.region,
            self.source,
            self.model_id,
            fmt_opt(self.value),
            fmt_opt(self.smoothed_value),
            self.window_complete
                .map(|b| b.to_string())
                .unwrap_or_default(),
        )
    }
}
