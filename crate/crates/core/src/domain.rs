//! Shared vocabulary: calendar days, regions, data sources, ILI rates and
//! the series types every other module exchanges.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Length of the trailing observation window used for every estimate.
pub const WINDOW_DAYS: usize = 7;

/// Week-ending convention for weekly estimates and ground truth.
///
/// Weekly surveillance reports are dated by the last day of the week they
/// cover; the upstream reports do not state which weekday that is, so the
/// convention is fixed here (and overridable in service configuration)
/// rather than guessed per file.
pub const DEFAULT_WEEK_ENDING: Weekday = Weekday::Sun;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("invalid date {input:?}: expected ISO-8601 YYYY-MM-DD")]
    InvalidDate { input: String },

    #[error("unknown region label {input:?}")]
    UnknownRegion { input: String },

    #[error("unknown source label {input:?}")]
    UnknownSource { input: String },

    #[error("invalid ILI rate {value}: must be finite and >= 0")]
    InvalidRate { value: f64 },

    #[error("frequency series shape mismatch: {detail}")]
    SeriesShape { detail: String },

    #[error("frequency value {value} at day {date}, term {term:?} outside [0, 1]")]
    FrequencyOutOfRange {
        date: DateStamp,
        term: String,
        value: f64,
    },

    #[error("ground truth entries for {region} not strictly increasing at {week_ending}")]
    UnorderedGroundTruth {
        region: Region,
        week_ending: DateStamp,
    },
}

/// A calendar day (proleptic Gregorian), `YYYY-MM-DD` on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DateStamp(NaiveDate);

impl DateStamp {
    pub fn new(year: i32, month: u32, day: u32) -> Option<Self> {
        NaiveDate::from_ymd_opt(year, month, day).map(DateStamp)
    }

    pub fn parse(input: &str) -> Result<Self, DomainError> {
        NaiveDate::parse_from_str(input, "%Y-%m-%d")
            .map(DateStamp)
            .map_err(|_| DomainError::InvalidDate {
                input: input.to_string(),
            })
    }

    pub fn succ(self) -> Self {
        DateStamp(self.0 + Days::new(1))
    }

    pub fn pred(self) -> Self {
        DateStamp(self.0 - Days::new(1))
    }

    /// The day `offset` whole days after `self` (negative offsets go back).
    pub fn plus_days(self, offset: i64) -> Self {
        if offset >= 0 {
            DateStamp(self.0 + Days::new(offset as u64))
        } else {
            DateStamp(self.0 - Days::new(offset.unsigned_abs()))
        }
    }

    /// Signed whole-day distance `self - other`.
    pub fn days_since(self, other: DateStamp) -> i64 {
        (self.0 - other.0).num_days()
    }

    pub fn weekday(self) -> Weekday {
        self.0.weekday()
    }

    /// Days since the Unix epoch; stable integer form for seeding.
    pub fn ordinal(self) -> i64 {
        self.0
            .signed_duration_since(NaiveDate::from_ymd_opt(1970, 1, 1).unwrap())
            .num_days()
    }

    /// `YYYY-MM` partition label for store file layout.
    pub fn month_key(self) -> String {
        format!("{:04}-{:02}", self.0.year(), self.0.month())
    }
}

impl fmt::Display for DateStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.format("%Y-%m-%d"))
    }
}

impl FromStr for DateStamp {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        DateStamp::parse(s)
    }
}

impl Serialize for DateStamp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for DateStamp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        DateStamp::parse(&raw).map_err(de::Error::custom)
    }
}

/// The observation window for date `i`: `[i, i-1, ..., i-6]`, descending.
pub fn window_dates(i: DateStamp) -> [DateStamp; WINDOW_DAYS] {
    let mut out = [i; WINDOW_DAYS];
    for (k, slot) in out.iter_mut().enumerate() {
        *slot = i.plus_days(-(k as i64));
    }
    out
}

/// England plus the four sub-regions with dedicated models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Region {
    England,
    London,
    NorthEngland,
    SouthEngland,
    MidlandsEastEngland,
}

impl Region {
    pub const ALL: [Region; 5] = [
        Region::England,
        Region::London,
        Region::NorthEngland,
        Region::SouthEngland,
        Region::MidlandsEastEngland,
    ];

    /// Canonical wire label, used in all files and APIs.
    pub fn as_str(self) -> &'static str {
        match self {
            Region::England => "england",
            Region::London => "london",
            Region::NorthEngland => "north_england",
            Region::SouthEngland => "south_england",
            Region::MidlandsEastEngland => "midlands_east_england",
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Region {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Region::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| DomainError::UnknownRegion {
                input: s.to_string(),
            })
    }
}

impl Serialize for Region {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Region {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(de::Error::custom)
    }
}

/// The two kinds of upstream signal.
///
/// `TwitterLike` frequencies are per-document fractions; `SearchLike`
/// frequencies are short-session probabilities. Both live in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SourceKind {
    TwitterLike,
    SearchLike,
}

impl SourceKind {
    pub const ALL: [SourceKind; 2] = [SourceKind::TwitterLike, SourceKind::SearchLike];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::TwitterLike => "twitter",
            SourceKind::SearchLike => "search",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SourceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| DomainError::UnknownSource {
                input: s.to_string(),
            })
    }
}

impl Serialize for SourceKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for SourceKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        raw.parse().map_err(de::Error::custom)
    }
}

/// Doctor consultations reporting ILI symptoms, per 100,000 people per week.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct IliRate(f64);

impl IliRate {
    pub fn new(value: f64) -> Result<Self, DomainError> {
        if !value.is_finite() || value < 0.0 {
            return Err(DomainError::InvalidRate { value });
        }
        Ok(IliRate(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for IliRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Per-term daily frequency matrix over a contiguous date range.
///
/// Rows are days, columns are terms; `present` marks which days actually
/// hold data (a missing day is kept as an all-zero row behind a `false`
/// mask entry so the matrix stays rectangular).
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySeries {
    terms: Vec<String>,
    start: DateStamp,
    values: Vec<Vec<f64>>,
    present: Vec<bool>,
}

impl FrequencySeries {
    /// Build and validate a series. `rows[i]` is the data for day
    /// `start + i`; `None` marks a missing day.
    pub fn new(
        terms: Vec<String>,
        start: DateStamp,
        rows: Vec<Option<Vec<f64>>>,
    ) -> Result<Self, DomainError> {
        if rows.is_empty() {
            return Err(DomainError::SeriesShape {
                detail: "series must cover at least one day".to_string(),
            });
        }
        let mut values = Vec::with_capacity(rows.len());
        let mut present = Vec::with_capacity(rows.len());
        for (i, row) in rows.into_iter().enumerate() {
            let date = start.plus_days(i as i64);
            match row {
                Some(row) => {
                    if row.len() != terms.len() {
                        return Err(DomainError::SeriesShape {
                            detail: format!(
                                "day {date} has {} values for {} terms",
                                row.len(),
                                terms.len()
                            ),
                        });
                    }
                    for (j, &v) in row.iter().enumerate() {
                        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                            return Err(DomainError::FrequencyOutOfRange {
                                date,
                                term: terms[j].clone(),
                                value: v,
                            });
                        }
                    }
                    values.push(row);
                    present.push(true);
                }
                None => {
                    values.push(vec![0.0; terms.len()]);
                    present.push(false);
                }
            }
        }
        Ok(FrequencySeries {
            terms,
            start,
            values,
            present,
        })
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn start(&self) -> DateStamp {
        self.start
    }

    pub fn end(&self) -> DateStamp {
        self.start.plus_days(self.values.len() as i64 - 1)
    }

    pub fn len_days(&self) -> usize {
        self.values.len()
    }

    pub fn dates(&self) -> impl Iterator<Item = DateStamp> + '_ {
        (0..self.values.len()).map(|i| self.start.plus_days(i as i64))
    }

    pub fn covers(&self, date: DateStamp) -> bool {
        date >= self.start && date <= self.end()
    }

    /// Row index for a covered date.
    fn index_of(&self, date: DateStamp) -> Option<usize> {
        if self.covers(date) {
            Some(date.days_since(self.start) as usize)
        } else {
            None
        }
    }

    /// Whether the given day holds data (`false` for masked-missing days
    /// and days outside the covered range).
    pub fn is_present(&self, date: DateStamp) -> bool {
        self.index_of(date).is_some_and(|i| self.present[i])
    }

    /// The day's row, or `None` if the day is missing or out of range.
    pub fn row(&self, date: DateStamp) -> Option<&[f64]> {
        let i = self.index_of(date)?;
        if self.present[i] {
            Some(&self.values[i])
        } else {
            None
        }
    }

    pub fn missing_days(&self) -> usize {
        self.present.iter().filter(|p| !**p).count()
    }
}

/// One weekly ground-truth observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthEntry {
    pub week_ending: DateStamp,
    pub region: Region,
    pub rate: IliRate,
}

/// Weekly syndromic-surveillance ILI rates used for training and scoring.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthSeries {
    entries: Vec<GroundTruthEntry>,
}

impl GroundTruthSeries {
    /// Validates that week-ending dates are strictly increasing within
    /// each region (which also forbids duplicate (region, week) pairs).
    pub fn new(entries: Vec<GroundTruthEntry>) -> Result<Self, DomainError> {
        let mut latest: BTreeMap<Region, DateStamp> = BTreeMap::new();
        for e in &entries {
            if let Some(prev) = latest.get(&e.region) {
                if e.week_ending <= *prev {
                    return Err(DomainError::UnorderedGroundTruth {
                        region: e.region,
                        week_ending: e.week_ending,
                    });
                }
            }
            latest.insert(e.region, e.week_ending);
        }
        Ok(GroundTruthSeries { entries })
    }

    pub fn entries(&self) -> &[GroundTruthEntry] {
        &self.entries
    }

    pub fn for_region(&self, region: Region) -> impl Iterator<Item = &GroundTruthEntry> {
        self.entries.iter().filter(move |e| e.region == region)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }
}
