//! Turns a day's raw documents into normalized per-term frequencies.
//!
//! Counting is per-document presence: a term contributes at most 1 per
//! document, so a frequency is the fraction of the day's documents that
//! mention the term. This matches the session-probability semantics of the
//! search source and keeps every frequency in `[0, 1]` for both sources.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

use crate::domain::{DateStamp, Region, SourceKind};

/// Largest n-gram order supported by the pipeline.
pub const MAX_NGRAM: usize = 3;

/// Fraction of unparseable replay lines above which ingestion aborts.
pub const REPLAY_FAILURE_THRESHOLD: f64 = 0.01;

#[derive(Debug, Error)]
pub enum TextError {
    #[error("n_max {0} out of range: must be in 1..={MAX_NGRAM}")]
    NgramOrder(usize),

    #[error("document dated {doc_date} ({doc_region}) in batch for {batch_date} ({batch_region})")]
    MixedBatch {
        batch_date: DateStamp,
        batch_region: Region,
        doc_date: DateStamp,
        doc_region: Region,
    },

    #[error("empty day: zero documents (day must be recorded as missing, not all-zero)")]
    EmptyDay,

    #[error("count {count} for term {term:?} exceeds total documents {total}")]
    CountExceedsTotal {
        term: String,
        count: u32,
        total: u32,
    },

    #[error("non-empty counts with zero total documents")]
    CountsWithoutDocuments,

    #[error("document text empty after trimming")]
    EmptyDocument,

    #[error("sessions_with_term {with} exceeds sampled_sessions {sampled}")]
    SessionsExceedSample { with: u64, sampled: u64 },

    #[error("replay line {line}: {reason}")]
    ReplayLine { line: usize, reason: String },

    #[error("replay parse failures above threshold: {failed} of {total} lines")]
    ReplayFailures { failed: usize, total: usize },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One raw ingested document with its day and pre-resolved region.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub text: String,
    pub date: DateStamp,
    pub region: Region,
}

impl Document {
    pub fn new(text: impl Into<String>, date: DateStamp, region: Region) -> Result<Self, TextError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(TextError::EmptyDocument);
        }
        Ok(Document { text, date, region })
    }
}

/// Ordered, deduplicated term list with fast membership lookup.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashSet<String>,
}

impl Vocabulary {
    /// Keeps the first occurrence of each term, preserving order.
    pub fn new(terms: impl IntoIterator<Item = String>) -> Self {
        let mut out = Vocabulary {
            terms: Vec::new(),
            index: HashSet::new(),
        };
        for t in terms {
            if out.index.insert(t.clone()) {
                out.terms.push(t);
            }
        }
        out
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn contains(&self, term: &str) -> bool {
        self.index.contains(term)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Per-term document-presence counts for one (day, region, source).
#[derive(Debug, Clone, PartialEq)]
pub struct DailyTermCounts {
    pub date: DateStamp,
    pub region: Region,
    pub source: SourceKind,
    pub counts: BTreeMap<String, u32>,
    pub total_documents: u32,
}

impl DailyTermCounts {
    pub fn new(
        date: DateStamp,
        region: Region,
        source: SourceKind,
        counts: BTreeMap<String, u32>,
        total_documents: u32,
    ) -> Result<Self, TextError> {
        if total_documents == 0 && !counts.is_empty() {
            return Err(TextError::CountsWithoutDocuments);
        }
        for (term, &count) in &counts {
            if count > total_documents {
                return Err(TextError::CountExceedsTotal {
                    term: term.clone(),
                    count,
                    total: total_documents,
                });
            }
        }
        Ok(DailyTermCounts {
            date,
            region,
            source,
            counts,
            total_documents,
        })
    }

    pub fn count(&self, term: &str) -> u32 {
        self.counts.get(term).copied().unwrap_or(0)
    }
}

/// Normalized per-term frequencies for one (day, region, source).
#[derive(Debug, Clone, PartialEq)]
pub struct DailyFrequencyRecord {
    pub date: DateStamp,
    pub region: Region,
    pub source: SourceKind,
    pub frequencies: BTreeMap<String, f64>,
}

impl DailyFrequencyRecord {
    /// Frequency for `term`, 0 when the term is absent from the record.
    pub fn frequency(&self, term: &str) -> f64 {
        self.frequencies.get(term).copied().unwrap_or(0.0)
    }
}

fn looks_like_url(word: &str) -> bool {
    let lower = word.to_lowercase();
    lower.starts_with("http://") || lower.starts_with("https://") || lower.starts_with("www.")
}

/// Lowercase and split text into alphanumeric tokens of length >= 2.
///
/// URLs and @-mentions are dropped whole; a leading `#` is stripped so
/// hashtag bodies count as ordinary words. Splitting is Unicode-aware: any
/// non-alphanumeric character is a boundary.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in text.split_whitespace() {
        if looks_like_url(word) || word.starts_with('@') {
            continue;
        }
        let word = word.strip_prefix('#').unwrap_or(word);
        for piece in word.to_lowercase().split(|c: char| !c.is_alphanumeric()) {
            if piece.chars().count() >= 2 {
                tokens.push(piece.to_string());
            }
        }
    }
    tokens
}

/// All contiguous n-grams for n = 1..=n_max, space-joined, grouped by
/// order and in positional order within each group; duplicates preserved.
pub fn extract_ngrams(tokens: &[String], n_max: usize) -> Result<Vec<String>, TextError> {
    if n_max == 0 || n_max > MAX_NGRAM {
        return Err(TextError::NgramOrder(n_max));
    }
    let mut grams = Vec::new();
    for n in 1..=n_max {
        for window in tokens.windows(n) {
            grams.push(window.join(" "));
        }
    }
    Ok(grams)
}

/// Count, per vocabulary term, how many documents in the batch contain it.
///
/// Every document must carry the batch's `(date, region)`. Counting is by
/// presence: repeated occurrences within one document count once. The
/// result is dense over the vocabulary (zero counts included) so a day
/// where no tracked term occurred is still distinguishable from a missing
/// day downstream; an empty batch yields empty counts.
pub fn count_daily(
    date: DateStamp,
    region: Region,
    source: SourceKind,
    documents: &[Document],
    vocabulary: &Vocabulary,
    n_max: usize,
) -> Result<DailyTermCounts, TextError> {
    if n_max == 0 || n_max > MAX_NGRAM {
        return Err(TextError::NgramOrder(n_max));
    }
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    if !documents.is_empty() {
        for term in vocabulary.terms() {
            counts.insert(term.clone(), 0);
        }
    }
    for doc in documents {
        if doc.date != date || doc.region != region {
            return Err(TextError::MixedBatch {
                batch_date: date,
                batch_region: region,
                doc_date: doc.date,
                doc_region: doc.region,
            });
        }
        let grams = extract_ngrams(&tokenize(&doc.text), n_max)?;
        let present: BTreeSet<&String> =
            grams.iter().filter(|g| vocabulary.contains(g)).collect();
        for term in present {
            *counts.get_mut(term.as_str()).expect("term from vocabulary") += 1;
        }
    }
    DailyTermCounts::new(date, region, source, counts, documents.len() as u32)
}

/// Normalize counts to document fractions. A zero-document day is an
/// error: it must be recorded as missing, never as all-zero.
pub fn to_frequency(counts: &DailyTermCounts) -> Result<DailyFrequencyRecord, TextError> {
    if counts.total_documents == 0 {
        return Err(TextError::EmptyDay);
    }
    let total = f64::from(counts.total_documents);
    let frequencies = counts
        .counts
        .iter()
        .map(|(term, &c)| (term.clone(), f64::from(c) / total))
        .collect();
    Ok(DailyFrequencyRecord {
        date: counts.date,
        region: counts.region,
        source: counts.source,
        frequencies,
    })
}

/// Unbiased estimate of the population probability that a short search
/// session contains the term, under uniform session sampling.
pub fn estimate_query_probability(
    sessions_with_term: u64,
    sampled_sessions: u64,
) -> Result<f64, TextError> {
    if sampled_sessions == 0 {
        return Err(TextError::EmptyDay);
    }
    if sessions_with_term > sampled_sessions {
        return Err(TextError::SessionsExceedSample {
            with: sessions_with_term,
            sampled: sampled_sessions,
        });
    }
    Ok(sessions_with_term as f64 / sampled_sessions as f64)
}

/// Outcome of reading a document replay file.
#[derive(Debug)]
pub struct ReplayBatch {
    pub documents: Vec<Document>,
    pub lines_total: usize,
    pub lines_failed: usize,
    /// First few failures, for reporting: (1-based line number, reason).
    pub failures: Vec<(usize, String)>,
}

const REPLAY_FAILURE_DETAIL_CAP: usize = 20;

/// Read a tab-separated `date<TAB>region<TAB>text` replay file.
///
/// Unparseable lines are counted and reported rather than fatal, unless
/// they exceed [`REPLAY_FAILURE_THRESHOLD`] of all non-empty lines, in
/// which case the whole read aborts. Tabs inside the text column survive
/// because only the first two separators split.
pub fn read_replay_file(path: &Path) -> Result<ReplayBatch, TextError> {
    let reader = BufReader::new(File::open(path)?);
    let mut batch = ReplayBatch {
        documents: Vec::new(),
        lines_total: 0,
        lines_failed: 0,
        failures: Vec::new(),
    };
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        batch.lines_total += 1;
        match parse_replay_line(&line) {
            Ok(doc) => batch.documents.push(doc),
            Err(reason) => {
                batch.lines_failed += 1;
                if batch.failures.len() < REPLAY_FAILURE_DETAIL_CAP {
                    batch.failures.push((idx + 1, reason));
                }
            }
        }
    }
    if batch.lines_total > 0 {
        let ratio = batch.lines_failed as f64 / batch.lines_total as f64;
        if ratio > REPLAY_FAILURE_THRESHOLD {
            return Err(TextError::ReplayFailures {
                failed: batch.lines_failed,
                total: batch.lines_total,
            });
        }
    }
    Ok(batch)
}

fn parse_replay_line(line: &str) -> Result<Document, String> {
    let mut parts = line.splitn(3, '\t');
    let date = parts.next().ok_or("missing date field")?;
    let region = parts.next().ok_or("missing region field")?;
    let text = parts.next().ok_or("missing text field")?;
    let date: DateStamp = date.parse().map_err(|e| format!("{e}"))?;
    let region: Region = region.parse().map_err(|e| format!("{e}"))?;
    Document::new(text, date, region).map_err(|e| format!("{e}"))
}
