//! CSV-backed append-only store for daily per-term frequencies.
//!
//! One logical series per `(region, source)` key, laid out as
//! `<data_dir>/<region>/<source>/<YYYY-MM>.csv` in long format
//! (`date,term,frequency`). Plain text keeps the store inspectable and
//! diff-able at desk scale. Appends rewrite the affected month file via a
//! same-directory temp file and rename, so a crash leaves either the old
//! or the new month content, never a torn file.
//!
//! Frequencies are quantized to 10 significant digits at append time; the
//! stored decimal text is the value of record, and reads and exports
//! reproduce it bit-exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::domain::{DateStamp, DomainError, FrequencySeries, Region, SourceKind};
use crate::textpipe::DailyFrequencyRecord;

/// Environment variable naming the data directory.
pub const DATA_DIR_ENV: &str = "ILINOWCAST_DATA_DIR";

const CSV_HEADER: &str = "date,term,frequency";

/// One day's term -> frequency map.
type TermFrequencies = BTreeMap<String, f64>;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("record for {record} does not match store key {key}")]
    KeyMismatch { key: StoreKey, record: StoreKey },

    #[error("record for {date} has no term entries; a day with data must carry at least one row")]
    EmptyRecord { date: DateStamp },

    #[error("append out of order: {attempted} is not after latest stored day {latest}")]
    AppendOrder {
        latest: DateStamp,
        attempted: DateStamp,
    },

    #[error("duplicate day: {date} is already stored")]
    DuplicateDay { date: DateStamp },

    #[error("no store for key {key}")]
    NoSuchStore { key: StoreKey },

    #[error("invalid range: start {start} after end {end}")]
    InvalidRange { start: DateStamp, end: DateStamp },

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error(
        "import overlaps stored range: file starts {import_start}, store already holds {latest}"
    )]
    ConflictingRange {
        latest: DateStamp,
        import_start: DateStamp,
    },

    #[error("term {term:?} cannot be stored (empty or contains separator characters)")]
    InvalidTerm { term: String },

    #[error("frequency {value} for term {term:?} on {date} outside [0, 1]")]
    FrequencyOutOfRange {
        date: DateStamp,
        term: String,
        value: f64,
    },

    #[error(transparent)]
    Domain(#[from] DomainError),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Identifies one logical series store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StoreKey {
    pub region: Region,
    pub source: SourceKind,
}

impl StoreKey {
    pub fn new(region: Region, source: SourceKind) -> Self {
        StoreKey { region, source }
    }
}

impl fmt::Display for StoreKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.region, self.source)
    }
}

/// Serialize a frequency with 10 significant digits.
///
/// This fixed text form is what the store persists; parsing it back gives
/// the exact stored f64, which is what makes the export/import roundtrip
/// testable bit for bit.
pub fn format_frequency(value: f64) -> String {
    format!("{value:.9e}")
}

/// Round a frequency to its stored 10-significant-digit value.
pub fn quantize_frequency(value: f64) -> f64 {
    format_frequency(value)
        .parse()
        .expect("formatted float always parses")
}

fn validate_term(term: &str) -> Result<(), StoreError> {
    if term.is_empty() || term.contains(',') || term.contains('\n') || term.contains('\r') {
        return Err(StoreError::InvalidTerm {
            term: term.to_string(),
        });
    }
    Ok(())
}

/// Immutable view of one key's series as of a read instant.
#[derive(Debug, Clone)]
pub struct StoreSnapshot {
    pub key: StoreKey,
    pub series: FrequencySeries,
    pub as_of: DateStamp,
    /// Requested terms that have never been stored under this key; their
    /// columns in `series` are all zero.
    pub unknown_terms: Vec<String>,
}

/// Result of a range read.
#[derive(Debug, Clone)]
pub struct RangeResult {
    pub series: FrequencySeries,
    /// Requested terms never stored under this key (all-zero columns).
    pub unknown_terms: Vec<String>,
}

/// Handle on a data directory holding per-key series stores.
#[derive(Debug, Clone)]
pub struct FeatureStore {
    data_dir: PathBuf,
}

impl FeatureStore {
    pub fn open(data_dir: impl Into<PathBuf>) -> Self {
        FeatureStore {
            data_dir: data_dir.into(),
        }
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    fn key_dir(&self, key: StoreKey) -> PathBuf {
        self.data_dir
            .join(key.region.as_str())
            .join(key.source.as_str())
    }

    fn month_path(&self, key: StoreKey, month: &str) -> PathBuf {
        self.key_dir(key).join(format!("{month}.csv"))
    }

    /// Month partition labels present for a key, ascending.
    fn months(&self, key: StoreKey) -> Result<Vec<String>, StoreError> {
        let dir = self.key_dir(key);
        if !dir.is_dir() {
            return Ok(Vec::new());
        }
        let mut months = Vec::new();
        for entry in fs::read_dir(&dir)? {
            let name = entry?.file_name();
            let name = name.to_string_lossy();
            if let Some(stem) = name.strip_suffix(".csv") {
                if stem.len() == 7 && stem.as_bytes()[4] == b'-' {
                    months.push(stem.to_string());
                }
            }
        }
        months.sort();
        Ok(months)
    }

    fn exists(&self, key: StoreKey) -> Result<bool, StoreError> {
        Ok(!self.months(key)?.is_empty())
    }

    /// Greatest appended day, or `None` for an empty store.
    pub fn latest_date(&self, key: StoreKey) -> Result<Option<DateStamp>, StoreError> {
        let months = self.months(key)?;
        for month in months.iter().rev() {
            let rows = self.read_month(key, month)?;
            if let Some(max) = rows.keys().max() {
                return Ok(Some(*max));
            }
        }
        Ok(None)
    }

    fn read_month(
        &self,
        key: StoreKey,
        month: &str,
    ) -> Result<BTreeMap<DateStamp, TermFrequencies>, StoreError> {
        let path = self.month_path(key, month);
        let raw = fs::read_to_string(&path)?;
        parse_frequency_csv(&raw, &path)
    }

    /// Append one day of frequencies.
    ///
    /// The day must be strictly after the latest stored day; calendar gaps
    /// in between simply have no rows and read back as missing days.
    pub fn append_day(
        &self,
        key: StoreKey,
        record: &DailyFrequencyRecord,
    ) -> Result<(), StoreError> {
        let record_key = StoreKey::new(record.region, record.source);
        if record_key != key {
            return Err(StoreError::KeyMismatch {
                key,
                record: record_key,
            });
        }
        if record.frequencies.is_empty() {
            return Err(StoreError::EmptyRecord { date: record.date });
        }
        for (term, &value) in &record.frequencies {
            validate_term(term)?;
            if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                return Err(StoreError::FrequencyOutOfRange {
                    date: record.date,
                    term: term.clone(),
                    value,
                });
            }
        }
        match self.latest_date(key)? {
            Some(latest) if record.date == latest => {
                return Err(StoreError::DuplicateDay { date: record.date })
            }
            Some(latest) if record.date < latest => {
                return Err(StoreError::AppendOrder {
                    latest,
                    attempted: record.date,
                })
            }
            _ => {}
        }
        let quantized: TermFrequencies = record
            .frequencies
            .iter()
            .map(|(t, &v)| (t.clone(), quantize_frequency(v)))
            .collect();
        self.write_days(key, &[(record.date, quantized)])
    }

    /// Rewrite the month files touched by `days` (pre-sorted, pre-validated).
    fn write_days(
        &self,
        key: StoreKey,
        days: &[(DateStamp, TermFrequencies)],
    ) -> Result<(), StoreError> {
        fs::create_dir_all(self.key_dir(key))?;
        let mut by_month: BTreeMap<String, Vec<&(DateStamp, TermFrequencies)>> =
            BTreeMap::new();
        for day in days {
            by_month.entry(day.0.month_key()).or_default().push(day);
        }
        for (month, month_days) in by_month {
            let path = self.month_path(key, &month);
            let mut content = if path.is_file() {
                fs::read_to_string(&path)?
            } else {
                format!("{CSV_HEADER}\n")
            };
            for (date, freqs) in month_days {
                for (term, value) in freqs {
                    content.push_str(&format!("{date},{term},{}\n", format_frequency(*value)));
                }
            }
            write_atomic(&path, content.as_bytes())?;
        }
        Ok(())
    }

    /// Materialize a frequency matrix over exactly `[start, end]`.
    ///
    /// Days without stored rows come back masked as missing; requested
    /// terms never stored under this key yield all-zero columns and are
    /// reported in `unknown_terms`.
    pub fn get_range(
        &self,
        key: StoreKey,
        terms: &[String],
        start: DateStamp,
        end: DateStamp,
    ) -> Result<RangeResult, StoreError> {
        if start > end {
            return Err(StoreError::InvalidRange { start, end });
        }
        if !self.exists(key)? {
            return Err(StoreError::NoSuchStore { key });
        }
        let start_month = start.month_key();
        let end_month = end.month_key();
        let mut days: BTreeMap<DateStamp, TermFrequencies> = BTreeMap::new();
        let mut stored_terms: BTreeSet<String> = BTreeSet::new();
        for month in self.months(key)? {
            let rows = self.read_month(key, &month)?;
            for freqs in rows.values() {
                stored_terms.extend(freqs.keys().cloned());
            }
            if month >= start_month && month <= end_month {
                for (date, freqs) in rows {
                    if date >= start && date <= end {
                        days.insert(date, freqs);
                    }
                }
            }
        }
        let unknown_terms: Vec<String> = terms
            .iter()
            .filter(|t| !stored_terms.contains(*t))
            .cloned()
            .collect();
        let n_days = end.days_since(start) as usize + 1;
        let mut rows = Vec::with_capacity(n_days);
        for i in 0..n_days {
            let date = start.plus_days(i as i64);
            match days.get(&date) {
                Some(freqs) => rows.push(Some(
                    terms
                        .iter()
                        .map(|t| freqs.get(t).copied().unwrap_or(0.0))
                        .collect(),
                )),
                None => rows.push(None),
            }
        }
        let series = FrequencySeries::new(terms.to_vec(), start, rows)?;
        Ok(RangeResult {
            series,
            unknown_terms,
        })
    }

    /// Take an immutable snapshot of a range as of the latest stored day.
    pub fn snapshot(
        &self,
        key: StoreKey,
        terms: &[String],
        start: DateStamp,
        end: DateStamp,
    ) -> Result<StoreSnapshot, StoreError> {
        let as_of = self
            .latest_date(key)?
            .ok_or(StoreError::NoSuchStore { key })?;
        let range = self.get_range(key, terms, start, end)?;
        Ok(StoreSnapshot {
            key,
            series: range.series,
            as_of,
            unknown_terms: range.unknown_terms,
        })
    }

    /// Import a `date,term,frequency` CSV. The file's days must all lie
    /// strictly after the latest stored day. Returns the row count.
    pub fn import_csv(&self, key: StoreKey, path: &Path) -> Result<usize, StoreError> {
        let raw = fs::read_to_string(path)?;
        let days = parse_frequency_csv(&raw, path)?;
        let Some(first) = days.keys().next().copied() else {
            return Ok(0);
        };
        if let Some(latest) = self.latest_date(key)? {
            if first <= latest {
                return Err(StoreError::ConflictingRange {
                    latest,
                    import_start: first,
                });
            }
        }
        let mut rows = 0usize;
        let days: Vec<(DateStamp, TermFrequencies)> = days
            .into_iter()
            .map(|(date, freqs)| {
                rows += freqs.len();
                let quantized = freqs
                    .into_iter()
                    .map(|(t, v)| (t, quantize_frequency(v)))
                    .collect();
                (date, quantized)
            })
            .collect();
        self.write_days(key, &days)?;
        Ok(rows)
    }

    /// Export the whole store for a key as one CSV. Returns the row count.
    pub fn export_csv(&self, key: StoreKey, path: &Path) -> Result<usize, StoreError> {
        if !self.exists(key)? {
            return Err(StoreError::NoSuchStore { key });
        }
        let mut content = format!("{CSV_HEADER}\n");
        let mut rows = 0usize;
        for month in self.months(key)? {
            for (date, freqs) in self.read_month(key, &month)? {
                for (term, value) in freqs {
                    content.push_str(&format!("{date},{term},{}\n", format_frequency(value)));
                    rows += 1;
                }
            }
        }
        write_atomic(path, content.as_bytes())?;
        Ok(rows)
    }
}

/// Parse a long-format frequency CSV, rejecting malformed rows with their
/// line number.
fn parse_frequency_csv(
    raw: &str,
    path: &Path,
) -> Result<BTreeMap<DateStamp, TermFrequencies>, StoreError> {
    let err = |line: usize, reason: String| StoreError::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut lines = raw.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(err(
                1,
                format!("bad header {header:?}, expected {CSV_HEADER:?}"),
            ))
        }
        None => return Err(err(1, "empty file".to_string())),
    }
    let mut days: BTreeMap<DateStamp, TermFrequencies> = BTreeMap::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let (date, term, value) = match (parts.next(), parts.next(), parts.next()) {
            (Some(d), Some(t), Some(v)) => (d, t, v),
            _ => {
                return Err(err(
                    line_no,
                    "expected 3 comma-separated fields".to_string(),
                ))
            }
        };
        let date: DateStamp = date.parse().map_err(|e| err(line_no, format!("{e}")))?;
        validate_term(term).map_err(|e| err(line_no, format!("{e}")))?;
        let value: f64 = value
            .parse()
            .map_err(|_| err(line_no, format!("unparseable frequency {value:?}")))?;
        if !value.is_finite() || !(0.0..=1.0).contains(&value) {
            return Err(err(line_no, format!("frequency {value} outside [0, 1]")));
        }
        let day = days.entry(date).or_default();
        if day.insert(term.to_string(), value).is_some() {
            return Err(err(
                line_no,
                format!("duplicate entry for {date}, term {term:?}"),
            ));
        }
    }
    Ok(days)
}

/// Write via a same-directory temp file and rename so readers and crash
/// recovery never observe a partially written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".to_string());
    let tmp = dir.join(format!(".{file_name}.tmp"));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;
    use tempfile::TempDir;

    fn record(date: &str, freqs: &[(&str, f64)]) -> DailyFrequencyRecord {
        DailyFrequencyRecord {
            date: date.parse().unwrap(),
            region: Region::England,
            source: SourceKind::TwitterLike,
            frequencies: freqs
                .iter()
                .map(|(t, v)| (t.to_string(), *v))
                .collect::<BTreeMap<_, _>>(),
        }
    }

    fn key() -> StoreKey {
        StoreKey::new(Region::England, SourceKind::TwitterLike)
    }

    fn terms(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn append_then_read_back_is_exact() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        let r1 = record("2016-03-07", &[("flu", 1.0e-4), ("cough", 0.0)]);
        let r2 = record("2016-03-08", &[("flu", 2.5e-4), ("cough", 1.0e-5)]);
        store.append_day(key(), &r1).unwrap();
        store.append_day(key(), &r2).unwrap();

        let got = store
            .get_range(key(), &terms(&["flu", "cough"]), r1.date, r2.date)
            .unwrap();
        assert!(got.unknown_terms.is_empty());
        assert_eq!(got.series.row(r1.date).unwrap(), &[1.0e-4, 0.0]);
        assert_eq!(got.series.row(r2.date).unwrap(), &[2.5e-4, 1.0e-5]);
    }

    #[test]
    fn quantization_is_the_stored_value() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        let v = 1.0 / 3.0;
        store
            .append_day(key(), &record("2016-03-07", &[("flu", v)]))
            .unwrap();
        let got = store
            .get_range(
                key(),
                &terms(&["flu"]),
                "2016-03-07".parse().unwrap(),
                "2016-03-07".parse().unwrap(),
            )
            .unwrap();
        let stored = got.series.row("2016-03-07".parse().unwrap()).unwrap()[0];
        assert_eq!(stored, quantize_frequency(v));
        assert_eq!(format_frequency(stored), format_frequency(v));
    }

    #[test]
    fn gap_days_read_back_missing() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        store
            .append_day(key(), &record("2016-03-07", &[("flu", 0.1)]))
            .unwrap();
        store
            .append_day(key(), &record("2016-03-10", &[("flu", 0.2)]))
            .unwrap();
        assert_eq!(
            store.latest_date(key()).unwrap(),
            Some("2016-03-10".parse().unwrap())
        );
        let got = store
            .get_range(
                key(),
                &terms(&["flu"]),
                "2016-03-07".parse().unwrap(),
                "2016-03-10".parse().unwrap(),
            )
            .unwrap();
        assert_eq!(got.series.missing_days(), 2);
        assert!(!got.series.is_present("2016-03-08".parse().unwrap()));
        assert!(!got.series.is_present("2016-03-09".parse().unwrap()));
    }

    #[test]
    fn range_length_is_end_minus_start_plus_one() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        store
            .append_day(key(), &record("2016-03-08", &[("flu", 0.1)]))
            .unwrap();
        let got = store
            .get_range(
                key(),
                &terms(&["flu"]),
                "2016-03-05".parse().unwrap(),
                "2016-03-11".parse().unwrap(),
            )
            .unwrap();
        assert_eq!(got.series.len_days(), 7);
        assert_eq!(got.series.missing_days(), 6);
    }

    #[test]
    fn append_order_is_enforced() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        store
            .append_day(key(), &record("2016-03-08", &[("flu", 0.1)]))
            .unwrap();
        assert!(matches!(
            store.append_day(key(), &record("2016-03-07", &[("flu", 0.1)])),
            Err(StoreError::AppendOrder { .. })
        ));
        assert!(matches!(
            store.append_day(key(), &record("2016-03-08", &[("flu", 0.1)])),
            Err(StoreError::DuplicateDay { .. })
        ));
    }

    #[test]
    fn latest_date_cases() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        assert_eq!(store.latest_date(key()).unwrap(), None);
        store
            .append_day(key(), &record("2016-03-07", &[("flu", 0.1)]))
            .unwrap();
        store
            .append_day(key(), &record("2016-03-08", &[("flu", 0.1)]))
            .unwrap();
        assert_eq!(
            store.latest_date(key()).unwrap(),
            Some("2016-03-08".parse().unwrap())
        );
    }

    #[test]
    fn unknown_term_gives_zero_column_with_warning() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        store
            .append_day(key(), &record("2016-03-07", &[("flu", 0.1)]))
            .unwrap();
        let got = store
            .get_range(
                key(),
                &terms(&["flu", "never stored"]),
                "2016-03-07".parse().unwrap(),
                "2016-03-07".parse().unwrap(),
            )
            .unwrap();
        assert_eq!(got.unknown_terms, vec!["never stored".to_string()]);
        assert_eq!(
            got.series.row("2016-03-07".parse().unwrap()).unwrap(),
            &[0.1, 0.0]
        );
    }

    #[test]
    fn missing_store_is_an_error() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        assert!(matches!(
            store.get_range(
                key(),
                &terms(&["flu"]),
                "2016-03-07".parse().unwrap(),
                "2016-03-07".parse().unwrap()
            ),
            Err(StoreError::NoSuchStore { .. })
        ));
    }

    #[test]
    fn appends_span_month_files() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        store
            .append_day(key(), &record("2016-03-31", &[("flu", 0.1)]))
            .unwrap();
        store
            .append_day(key(), &record("2016-04-01", &[("flu", 0.2)]))
            .unwrap();
        let dir_path = dir.path().join("england").join("twitter");
        assert!(dir_path.join("2016-03.csv").is_file());
        assert!(dir_path.join("2016-04.csv").is_file());
        let got = store
            .get_range(
                key(),
                &terms(&["flu"]),
                "2016-03-31".parse().unwrap(),
                "2016-04-01".parse().unwrap(),
            )
            .unwrap();
        assert_eq!(got.series.missing_days(), 0);
    }

    #[test]
    fn export_import_roundtrip_is_identity() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        store
            .append_day(
                key(),
                &record("2016-03-30", &[("flu", 1.0 / 7.0), ("cough", 0.25)]),
            )
            .unwrap();
        store
            .append_day(
                key(),
                &record("2016-04-02", &[("flu", 1.0 / 13.0), ("cough", 0.5)]),
            )
            .unwrap();
        let out = dir.path().join("export.csv");
        let exported = store.export_csv(key(), &out).unwrap();
        assert_eq!(exported, 4);

        let dir2 = TempDir::new().unwrap();
        let store2 = FeatureStore::open(dir2.path());
        let imported = store2.import_csv(key(), &out).unwrap();
        assert_eq!(imported, 4);

        let t = terms(&["flu", "cough"]);
        let a = store
            .get_range(
                key(),
                &t,
                "2016-03-30".parse().unwrap(),
                "2016-04-02".parse().unwrap(),
            )
            .unwrap();
        let b = store2
            .get_range(
                key(),
                &t,
                "2016-03-30".parse().unwrap(),
                "2016-04-02".parse().unwrap(),
            )
            .unwrap();
        assert_eq!(a.series, b.series);

        // second export is byte-identical
        let out2 = dir2.path().join("export2.csv");
        store2.export_csv(key(), &out2).unwrap();
        assert_eq!(fs::read(&out).unwrap(), fs::read(&out2).unwrap());
    }

    #[test]
    fn import_rejects_bad_rows_with_line_numbers() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        let path = dir.path().join("bad_freq.csv");
        fs::write(&path, "date,term,frequency\n2016-03-07,flu,1.5\n").unwrap();
        match store.import_csv(key(), &path) {
            Err(StoreError::Parse { line, reason, .. }) => {
                assert_eq!(line, 2);
                assert!(reason.contains("1.5"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        let path = dir.path().join("bad_date.csv");
        fs::write(
            &path,
            "date,term,frequency\n2016-03-07,flu,0.1\nnot-a-date,flu,0.1\n",
        )
        .unwrap();
        match store.import_csv(key(), &path) {
            Err(StoreError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn import_into_overlapping_range_conflicts() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        store
            .append_day(key(), &record("2016-03-08", &[("flu", 0.1)]))
            .unwrap();
        let path = dir.path().join("overlap.csv");
        fs::write(&path, "date,term,frequency\n2016-03-08,flu,0.2\n").unwrap();
        assert!(matches!(
            store.import_csv(key(), &path),
            Err(StoreError::ConflictingRange { .. })
        ));
    }

    #[test]
    fn append_leaves_no_temp_files() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        store
            .append_day(key(), &record("2016-03-07", &[("flu", 0.1)]))
            .unwrap();
        let key_dir = dir.path().join("england").join("twitter");
        let leftovers: Vec<_> = fs::read_dir(&key_dir)
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn rejects_invalid_records() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        let empty = record("2016-03-07", &[]);
        assert!(matches!(
            store.append_day(key(), &empty),
            Err(StoreError::EmptyRecord { .. })
        ));
        let wrong_key = StoreKey::new(Region::London, SourceKind::TwitterLike);
        assert!(matches!(
            store.append_day(wrong_key, &record("2016-03-07", &[("flu", 0.1)])),
            Err(StoreError::KeyMismatch { .. })
        ));
        let bad_term = record("2016-03-07", &[("fl,u", 0.1)]);
        assert!(matches!(
            store.append_day(key(), &bad_term),
            Err(StoreError::InvalidTerm { .. })
        ));
    }

    #[test]
    fn keys_are_independent() {
        let dir = TempDir::new().unwrap();
        let store = FeatureStore::open(dir.path());
        let twitter = StoreKey::new(Region::England, SourceKind::TwitterLike);
        let search = StoreKey::new(Region::England, SourceKind::SearchLike);
        store
            .append_day(twitter, &record("2016-03-07", &[("flu", 0.1)]))
            .unwrap();
        assert_eq!(store.latest_date(search).unwrap(), None);
        let mut rec = record("2016-03-01", &[("flu", 0.3)]);
        rec.source = SourceKind::SearchLike;
        store.append_day(search, &rec).unwrap();
        assert_eq!(
            store.latest_date(twitter).unwrap(),
            Some("2016-03-07".parse().unwrap())
        );
    }
}
