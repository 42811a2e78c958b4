//! Seeded generator of epidemic curves and correlated term-frequency
//! streams under the two sampling regimes (thinned document stream,
//! subsampled search sessions).
//!
//! This module is openly an invented test harness: the production system
//! consumes real feeds, so end-to-end validation needs a scenario with a
//! planted, recoverable answer. With `noise_std = 0` the signal-term
//! frequencies are exactly affine in the daily rate, which is what lets
//! the full generate -> ingest -> train -> infer chain be checked against
//! the planted curve to near machine precision.
//!
//! All randomness comes from ChaCha8 streams derived per component (and
//! per day or term where applicable) via [`crate::rng::derive_rng`], so
//! output is bit-reproducible for a fixed seed and independent of
//! scheduling.

use std::collections::BTreeMap;

use chrono::Weekday;
use rand::Rng as _;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    DateStamp, GroundTruthEntry, GroundTruthSeries, IliRate, Region, SourceKind, WINDOW_DAYS,
};
use crate::rng::derive_rng;
use crate::textpipe::DailyTermCounts;

/// Shortest scenario the curve generator accepts.
pub const MIN_SCENARIO_DAYS: usize = 60;
/// One simulated season: 52 whole weeks.
pub const SEASON_DAYS: usize = 364;

const CURVE_STREAM: u64 = 0x6375_7276_6500;
const TERM_COEFF_STREAM: u64 = 0x636f_6566_6600;
const TERM_SERIES_STREAM: u64 = 0x7365_7269_6573;
const THIN_STREAM: u64 = 0x0074_6869_6e00;
const SEARCH_STREAM: u64 = 0x7365_6172_6368;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("sampling rate {0} outside (0, 1]")]
    InvalidRate(f64),

    #[error("population probability {value} for term {term:?} outside [0, 1]")]
    InvalidProbability { term: String, value: f64 },

    #[error(transparent)]
    Text(#[from] crate::textpipe::TextError),
}

/// Generative specification for one reproducible desk-scale experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScenario {
    pub seed: u64,
    pub start_date: DateStamp,
    pub n_days: usize,
    /// Off-season rate per 100,000.
    pub baseline_rate: f64,
    /// Seasonal maximum rate per 100,000.
    pub peak_rate: f64,
    pub n_terms: usize,
    pub n_signal_terms: usize,
    /// Relative noise level: 0 is the exactly-affine regime.
    pub noise_std: f64,
    pub twitter_daily_volume: u64,
    pub twitter_sample_rate: f64,
    pub search_daily_sessions: u64,
    pub search_sample_rate: f64,
    pub region: Region,
}

impl Default for SyntheticScenario {
    fn default() -> Self {
        SyntheticScenario {
            seed: 42,
            start_date: DateStamp::new(2012, 9, 3).unwrap(),
            n_days: 370,
            baseline_rate: 2.0,
            peak_rate: 30.0,
            n_terms: 60,
            n_signal_terms: 12,
            noise_std: 0.05,
            twitter_daily_volume: 350_000,
            twitter_sample_rate: 0.015,
            search_daily_sessions: 1_000_000,
            search_sample_rate: 0.125,
            region: Region::England,
        }
    }
}

impl SyntheticScenario {
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::InvalidScenario(msg));
        if self.n_days < MIN_SCENARIO_DAYS {
            return fail(format!(
                "n_days {} below minimum {MIN_SCENARIO_DAYS}",
                self.n_days
            ));
        }
        if !(self.baseline_rate.is_finite() && self.baseline_rate >= 0.0) {
            return fail(format!("baseline_rate {} invalid", self.baseline_rate));
        }
        if !(self.peak_rate.is_finite() && self.peak_rate > self.baseline_rate) {
            return fail(format!(
                "peak_rate {} must exceed baseline_rate {}",
                self.peak_rate, self.baseline_rate
            ));
        }
        if self.n_terms == 0 || self.n_signal_terms > self.n_terms {
            return fail(format!(
                "need 1 <= n_signal_terms <= n_terms, got {} of {}",
                self.n_signal_terms, self.n_terms
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return fail(format!("noise_std {} invalid", self.noise_std));
        }
        for (label, rate) in [
            ("twitter_sample_rate", self.twitter_sample_rate),
            ("search_sample_rate", self.search_sample_rate),
        ] {
            if !(rate.is_finite() && rate > 0.0 && rate <= 1.0) {
                return fail(format!("{label} {rate} outside (0, 1]"));
            }
        }
        if self.twitter_daily_volume == 0 || self.search_daily_sessions == 0 {
            return fail("daily volumes must be positive".to_string());
        }
        Ok(())
    }

    pub fn dates(&self) -> Vec<DateStamp> {
        (0..self.n_days)
            .map(|i| self.start_date.plus_days(i as i64))
            .collect()
    }
}

/// The planted role and coefficients of one vocabulary term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantedTerm {
    /// frequency(d) = a * rate(d) / 100000 + b (+ noise)
    Signal { name: String, a: f64, b: f64 },
    /// frequency(d) = base (+ noise), no seasonal component
    Noise { name: String, base: f64 },
}

impl PlantedTerm {
    pub fn name(&self) -> &str {
        match self {
            PlantedTerm::Signal { name, .. } | PlantedTerm::Noise { name, .. } => name,
        }
    }

    pub fn is_signal(&self) -> bool {
        matches!(self, PlantedTerm::Signal { .. })
    }
}

/// Daily true rates: baseline plus one Gaussian bump per 364-day season,
/// normalized so the global maximum equals `peak_rate` exactly.
///
/// With `noise_std > 0` each season's bump gets seeded jitter on location,
/// width and amplitude; at zero noise the curve is the deterministic
/// canonical form (peak mid-season, width 10% of the season).
pub fn generate_epidemic_curve(scenario: &SyntheticScenario) -> Result<Vec<f64>, SynthError> {
    scenario.validate()?;
    let season_len = scenario.n_days.min(SEASON_DAYS) as f64;
    let n_bumps = scenario.n_days.div_ceil(scenario.n_days.min(SEASON_DAYS));
    let mut rng = derive_rng(scenario.seed, &[CURVE_STREAM]);
    let jitter = scenario.noise_std > 0.0;
    let mut centers = Vec::with_capacity(n_bumps);
    let mut widths = Vec::with_capacity(n_bumps);
    let mut amps = Vec::with_capacity(n_bumps);
    for k in 0..n_bumps {
        let (u, v, a) = if jitter {
            (
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>(),
            )
        } else {
            (0.0, 0.0, 0.0)
        };
        centers.push(season_len * (k as f64 + 0.5 + 0.08 * u));
        widths.push(season_len * 0.1 * (1.0 + 0.25 * v));
        amps.push(1.0 - 0.25 * a);
    }
    let raw: Vec<f64> = (0..scenario.n_days)
        .map(|d| {
            let d = d as f64;
            (0..n_bumps)
                .map(|k| amps[k] * (-((d - centers[k]).powi(2)) / (2.0 * widths[k].powi(2))).exp())
                .sum()
        })
        .collect();
    let max = raw.iter().cloned().fold(0.0f64, f64::max);
    let span = scenario.peak_rate - scenario.baseline_rate;
    Ok(raw
        .into_iter()
        .map(|r| scenario.baseline_rate + span * r / max)
        .collect())
}

/// Trailing 7-day means of a daily curve; `None` while the window does
/// not fit. This is the day-level quantity every estimate targets, since
/// estimates are trained against weekly (7-day aggregate) ground truth.
pub fn window_mean_curve(curve: &[f64]) -> Vec<Option<f64>> {
    curve
        .iter()
        .enumerate()
        .map(|(i, _)| {
            if i + 1 >= WINDOW_DAYS {
                Some(curve[i + 1 - WINDOW_DAYS..=i].iter().sum::<f64>() / WINDOW_DAYS as f64)
            } else {
                None
            }
        })
        .collect()
}

/// Weekly ground truth: the mean of each surveillance week's 7 daily
/// rates, dated by the week-ending day.
pub fn weekly_truth(
    scenario: &SyntheticScenario,
    curve: &[f64],
    week_ending: Weekday,
) -> Result<GroundTruthSeries, SynthError> {
    let window_means = window_mean_curve(curve);
    let mut entries = Vec::new();
    for (i, date) in scenario.dates().into_iter().enumerate() {
        if date.weekday() == week_ending {
            if let Some(mean) = window_means[i] {
                entries.push(GroundTruthEntry {
                    week_ending: date,
                    region: scenario.region,
                    rate: IliRate::new(mean).expect("curve rates are valid"),
                });
            }
        }
    }
    Ok(GroundTruthSeries::new(entries).expect("weekly dates are strictly increasing"))
}

/// Population-level per-term daily frequencies plus the planted
/// coefficients that generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationSeries {
    pub terms: Vec<String>,
    /// day x term frequencies in [0, 1].
    pub values: Vec<Vec<f64>>,
    pub planted: Vec<PlantedTerm>,
}

impl PopulationSeries {
    /// Dense frequency record for one day under the given source label.
    pub fn frequency_record(
        &self,
        scenario: &SyntheticScenario,
        day: usize,
        source: SourceKind,
    ) -> crate::textpipe::DailyFrequencyRecord {
        crate::textpipe::DailyFrequencyRecord {
            date: scenario.start_date.plus_days(day as i64),
            region: scenario.region,
            source,
            frequencies: self
                .terms
                .iter()
                .cloned()
                .zip(self.values[day].iter().copied())
                .collect(),
        }
    }
}

/// Generate the population frequency matrix for a curve.
///
/// Signal terms are affine in the daily rate with seeded positive slope;
/// noise terms fluctuate around a small seasonal-free base. Per-term
/// noise scales with `noise_std` relative to the term's own signal
/// amplitude, and everything is clipped to [0, 1].
pub fn generate_term_frequencies(
    curve: &[f64],
    scenario: &SyntheticScenario,
) -> Result<PopulationSeries, SynthError> {
    scenario.validate()?;
    let mut terms = Vec::with_capacity(scenario.n_terms);
    let mut planted = Vec::with_capacity(scenario.n_terms);
    for j in 0..scenario.n_terms {
        let name = format!("term{j:03}");
        let mut rng = derive_rng(scenario.seed, &[TERM_COEFF_STREAM, j as u64]);
        if j < scenario.n_signal_terms {
            let a = 0.5 + 1.5 * rng.random::<f64>();
            let b = 1.0e-5 + 7.0e-5 * rng.random::<f64>();
            planted.push(PlantedTerm::Signal {
                name: name.clone(),
                a,
                b,
            });
        } else {
            let base = 2.0e-5 + 1.0e-4 * rng.random::<f64>();
            planted.push(PlantedTerm::Noise {
                name: name.clone(),
                base,
            });
        }
        terms.push(name);
    }
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(scenario.n_terms);
    for (j, term) in planted.iter().enumerate() {
        let mut rng = derive_rng(scenario.seed, &[TERM_SERIES_STREAM, j as u64]);
        let column: Vec<f64> = match term {
            PlantedTerm::Signal { a, b, .. } => {
                let sigma = scenario.noise_std * a * scenario.peak_rate / 100_000.0;
                curve
                    .iter()
                    .map(|rate| {
                        let mut f = a * rate / 100_000.0 + b;
                        if sigma > 0.0 {
                            f += sigma * normal.sample(&mut rng);
                        }
                        f.clamp(0.0, 1.0)
                    })
                    .collect()
            }
            PlantedTerm::Noise { base, .. } => {
                let sigma = scenario.noise_std * base;
                curve
                    .iter()
                    .map(|_| {
                        let mut f = *base;
                        if sigma > 0.0 {
                            f += sigma * normal.sample(&mut rng);
                        }
                        f.clamp(0.0, 1.0)
                    })
                    .collect()
            }
        };
        columns.push(column);
    }
    let values: Vec<Vec<f64>> = (0..curve.len())
        .map(|d| columns.iter().map(|c| c[d]).collect())
        .collect();
    Ok(PopulationSeries {
        terms,
        values,
        planted,
    })
}

/// Exact hypergeometric draw by sequential urn simulation over the
/// smaller margin (`Hypergeometric(N, K, n)` is symmetric in `K` and
/// `n`). rand_distr's sampler overflows internally for populations in
/// the hundreds of thousands with small sample fractions, which is
/// precisely the thinning regime here, so the draw is done directly in
/// integer arithmetic.
fn hypergeometric_sample<R: rand::Rng>(rng: &mut R, total: u64, feature: u64, sample: u64) -> u64 {
    debug_assert!(feature <= total && sample <= total);
    let (draws, marked) = if feature <= sample {
        (feature, sample)
    } else {
        (sample, feature)
    };
    let mut remaining_marked = marked;
    let mut remaining_total = total;
    let mut hits = 0;
    for _ in 0..draws {
        if rng.random_range(0..remaining_total) < remaining_marked {
            hits += 1;
            remaining_marked -= 1;
        }
        remaining_total -= 1;
    }
    hits
}

/// Binomial/hypergeometric thinning of one day's document counts,
/// modelling a fixed-rate subsample of the full stream.
///
/// The thinned total is `Binomial(total, rate)`; each term count is then
/// drawn hypergeometrically, consistent with sampling that many whole
/// documents, so thinned counts never exceed the thinned total. Seeded
/// per (seed, day), hence reproducible and parallelizable across days.
pub fn thin_twitter_sample(
    counts: &DailyTermCounts,
    rate: f64,
    seed: u64,
) -> Result<DailyTermCounts, SynthError> {
    if !(rate.is_finite() && rate > 0.0 && rate <= 1.0) {
        return Err(SynthError::InvalidRate(rate));
    }
    if rate == 1.0 || counts.total_documents == 0 {
        return Ok(counts.clone());
    }
    let mut rng = derive_rng(seed, &[THIN_STREAM, counts.date.ordinal() as u64]);
    let total = u64::from(counts.total_documents);
    let thinned_total = Binomial::new(total, rate)
        .expect("validated rate")
        .sample(&mut rng);
    let mut thinned = BTreeMap::new();
    for (term, &count) in &counts.counts {
        let count = u64::from(count);
        let drawn = if count == 0 || thinned_total == 0 {
            0
        } else {
            hypergeometric_sample(&mut rng, total, count, thinned_total)
        };
        thinned.insert(term.clone(), drawn as u32);
    }
    Ok(DailyTermCounts::new(
        counts.date,
        counts.region,
        counts.source,
        thinned,
        thinned_total as u32,
    )?)
}

/// One day's sampled search sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchDaySample {
    pub date: DateStamp,
    pub sampled_sessions: u64,
    pub sessions_with_term: BTreeMap<String, u64>,
}

/// Draw a uniformly subsampled day of search sessions.
///
/// `sampled_sessions ~ Binomial(daily_sessions, rate)` once per day, then
/// `sessions_with_term ~ Binomial(sampled_sessions, p_term)` per term, so
/// the downstream ratio estimator is unbiased for each population
/// probability.
pub fn sample_search_sessions(
    date: DateStamp,
    probabilities: &BTreeMap<String, f64>,
    daily_sessions: u64,
    rate: f64,
    seed: u64,
) -> Result<SearchDaySample, SynthError> {
    if !(rate.is_finite() && rate > 0.0 && rate <= 1.0) {
        return Err(SynthError::InvalidRate(rate));
    }
    if daily_sessions == 0 {
        return Err(SynthError::InvalidScenario(
            "daily_sessions must be positive".to_string(),
        ));
    }
    for (term, &p) in probabilities {
        if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
            return Err(SynthError::InvalidProbability {
                term: term.clone(),
                value: p,
            });
        }
    }
    let mut rng = derive_rng(seed, &[SEARCH_STREAM, date.ordinal() as u64]);
    let sampled_sessions = if rate == 1.0 {
        daily_sessions
    } else {
        Binomial::new(daily_sessions, rate)
            .expect("validated rate")
            .sample(&mut rng)
    };
    let mut sessions_with_term = BTreeMap::new();
    for (term, &p) in probabilities {
        let with = if sampled_sessions == 0 || p == 0.0 {
            0
        } else {
            Binomial::new(sampled_sessions, p)
                .expect("validated probability")
                .sample(&mut rng)
        };
        sessions_with_term.insert(term.clone(), with);
    }
    Ok(SearchDaySample {
        date,
        sampled_sessions,
        sessions_with_term,
    })
}

/// Fully realized scenario: curve, truth, and population frequencies.
#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub scenario: SyntheticScenario,
    pub dates: Vec<DateStamp>,
    pub curve: Vec<f64>,
    pub window_mean: Vec<Option<f64>>,
    pub truth: GroundTruthSeries,
    pub population: PopulationSeries,
}

/// Realize a scenario end to end (deterministic in the seed).
pub fn realize(
    scenario: &SyntheticScenario,
    week_ending: Weekday,
) -> Result<ScenarioData, SynthError> {
    let curve = generate_epidemic_curve(scenario)?;
    let window_mean = window_mean_curve(&curve);
    let truth = weekly_truth(scenario, &curve, week_ending)?;
    let population = generate_term_frequencies(&curve, scenario)?;
    Ok(ScenarioData {
        scenario: scenario.clone(),
        dates: scenario.dates(),
        curve,
        window_mean,
        truth,
        population,
    })
}

/// Contents of the planted-answer file a simulation writes next to its
/// data: everything an oracle needs to verify downstream estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedFile {
    pub scenario: SyntheticScenario,
    pub terms: Vec<PlantedTerm>,
    pub daily: Vec<PlantedDay>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedDay {
    pub date: DateStamp,
    pub rate: f64,
    /// Trailing 7-day mean rate: the quantity a window-trained estimate
    /// for this date targets. Absent for the lead-in days.
    pub window_mean_rate: Option<f64>,
}

impl PlantedFile {
    pub fn from_data(data: &ScenarioData) -> Self {
        PlantedFile {
            scenario: data.scenario.clone(),
            terms: data.population.planted.clone(),
            daily: data
                .dates
                .iter()
                .enumerate()
                .map(|(i, &date)| PlantedDay {
                    date,
                    rate: data.curve[i],
                    window_mean_rate: data.window_mean[i],
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("planted file serialization cannot fail")
    }

    pub fn from_json(raw: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DEFAULT_WEEK_ENDING;
    use crate::evaluation::pearson;
    use approx::assert_abs_diff_eq;

    fn scenario() -> SyntheticScenario {
        SyntheticScenario::default()
    }

    #[test]
    fn curve_peaks_at_peak_rate_and_stays_nonnegative() {
        let mut sc = scenario();
        sc.baseline_rate = 2.0;
        sc.peak_rate = 30.0;
        let curve = generate_epidemic_curve(&sc).unwrap();
        let max = curve.iter().cloned().fold(0.0f64, f64::max);
        let min = curve.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(max, 30.0, epsilon = 30.0 * 0.01);
        assert!(min >= 0.0);
        assert!(min >= sc.baseline_rate - 1e-12);
    }

    #[test]
    fn zero_noise_curve_is_the_canonical_bump_form() {
        let mut sc = scenario();
        sc.noise_std = 0.0;
        sc.n_days = 200;
        let curve = generate_epidemic_curve(&sc).unwrap();
        // independent recomputation of the canonical (jitter-free) form
        let season = 200.0;
        let center = season * 0.5;
        let width = season * 0.1;
        let raw: Vec<f64> = (0..200)
            .map(|d| (-((d as f64 - center).powi(2)) / (2.0 * width * width)).exp())
            .collect();
        let max = raw.iter().cloned().fold(0.0f64, f64::max);
        for (got, r) in curve.iter().zip(&raw) {
            let want = sc.baseline_rate + (sc.peak_rate - sc.baseline_rate) * r / max;
            assert_abs_diff_eq!(*got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn curve_is_deterministic_in_the_seed() {
        let sc = scenario();
        let a = generate_epidemic_curve(&sc).unwrap();
        let b = generate_epidemic_curve(&sc).unwrap();
        assert_eq!(a, b);
        let mut sc2 = sc.clone();
        sc2.seed += 1;
        assert_ne!(generate_epidemic_curve(&sc2).unwrap(), a);
    }

    #[test]
    fn multi_season_curve_has_one_bump_per_season() {
        let mut sc = scenario();
        sc.noise_std = 0.0;
        sc.n_days = 4 * SEASON_DAYS;
        let curve = generate_epidemic_curve(&sc).unwrap();
        // each season's mid-season day should be near the peak
        for k in 0..4 {
            let mid = k * SEASON_DAYS + SEASON_DAYS / 2;
            assert!(curve[mid] > 0.9 * sc.peak_rate, "season {k} has no bump");
            let edge = k * SEASON_DAYS + 5;
            assert!(curve[edge] < 0.2 * sc.peak_rate, "season {k} never drops");
        }
    }

    #[test]
    fn scenario_validation_rejects_bad_inputs() {
        let mut sc = scenario();
        sc.n_days = 30;
        assert!(generate_epidemic_curve(&sc).is_err());
        let mut sc = scenario();
        sc.twitter_sample_rate = 0.0;
        assert!(sc.validate().is_err());
        let mut sc = scenario();
        sc.n_signal_terms = sc.n_terms + 1;
        assert!(sc.validate().is_err());
        let mut sc = scenario();
        sc.peak_rate = sc.baseline_rate;
        assert!(sc.validate().is_err());
    }

    #[test]
    fn zero_noise_signal_terms_are_exactly_affine_in_the_rate() {
        let mut sc = scenario();
        sc.noise_std = 0.0;
        sc.n_days = 120;
        let curve = generate_epidemic_curve(&sc).unwrap();
        let pop = generate_term_frequencies(&curve, &sc).unwrap();
        let col: Vec<f64> = pop.values.iter().map(|row| row[0]).collect();
        assert_abs_diff_eq!(pearson(&col, &curve).unwrap(), 1.0, epsilon = 1e-12);
        let PlantedTerm::Signal { a, b, .. } = &pop.planted[0] else {
            panic!("term000 should be a signal term")
        };
        for (f, rate) in col.iter().zip(&curve) {
            assert_abs_diff_eq!(*f, a * rate / 100_000.0 + b, epsilon = 1e-18);
        }
    }

    #[test]
    fn noise_terms_are_uncorrelated_with_the_curve() {
        let mut sc = scenario();
        sc.n_days = 150;
        sc.noise_std = 0.1;
        let curve = generate_epidemic_curve(&sc).unwrap();
        let pop = generate_term_frequencies(&curve, &sc).unwrap();
        for j in sc.n_signal_terms..sc.n_terms {
            let col: Vec<f64> = pop.values.iter().map(|row| row[j]).collect();
            let r = pearson(&col, &curve).unwrap();
            assert!(r.abs() < 0.3, "noise term {j} correlates at {r}");
        }
    }

    #[test]
    fn frequencies_are_clipped_to_unit_interval() {
        let mut sc = scenario();
        sc.peak_rate = 5.0e7;
        sc.baseline_rate = 1.0e6;
        sc.n_days = 60;
        let curve: Vec<f64> = vec![5.0e7; 60];
        let pop = generate_term_frequencies(&curve, &sc).unwrap();
        for row in &pop.values {
            for &f in row {
                assert!((0.0..=1.0).contains(&f));
            }
        }
        assert!(pop.values[30][0] == 1.0, "extreme slope should saturate");
    }

    #[test]
    fn weekly_truth_lands_on_week_endings_with_window_means() {
        let mut sc = scenario();
        sc.noise_std = 0.0;
        let curve = generate_epidemic_curve(&sc).unwrap();
        let truth = weekly_truth(&sc, &curve, DEFAULT_WEEK_ENDING).unwrap();
        assert_eq!(truth.len(), 52);
        let first = truth.entries()[0];
        assert_eq!(first.week_ending.weekday(), DEFAULT_WEEK_ENDING);
        assert_eq!(first.week_ending, sc.start_date.plus_days(6));
        let want: f64 = curve[0..7].iter().sum::<f64>() / 7.0;
        assert_abs_diff_eq!(first.rate.value(), want, epsilon = 1e-12);
    }

    fn counts_for(total: u32, flu: u32) -> DailyTermCounts {
        DailyTermCounts::new(
            DateStamp::new(2016, 3, 7).unwrap(),
            Region::England,
            SourceKind::TwitterLike,
            [("flu".to_string(), flu), ("zzz".to_string(), 0)]
                .into_iter()
                .collect(),
            total,
        )
        .unwrap()
    }

    #[test]
    fn thinning_at_full_rate_is_identity() {
        let counts = counts_for(350_000, 35);
        let thinned = thin_twitter_sample(&counts, 1.0, 7).unwrap();
        assert_eq!(thinned, counts);
    }

    #[test]
    fn thinning_keeps_zero_counts_zero_and_respects_totals() {
        let counts = counts_for(10_000, 400);
        for seed in 0..50 {
            let thinned = thin_twitter_sample(&counts, 0.015, seed).unwrap();
            assert_eq!(thinned.count("zzz"), 0);
            assert!(thinned.count("flu") <= thinned.total_documents);
            assert!(thinned.count("flu") <= 400);
        }
    }

    #[test]
    fn thinned_total_matches_binomial_mean() {
        // Monte Carlo oracle: mean of Binomial(350000, 0.015) is 5250,
        // and the per-term hypergeometric mean is count * rate.
        let counts = counts_for(350_000, 3500);
        let mut total_sum = 0u64;
        let mut term_sum = 0u64;
        let draws = 1000;
        for seed in 0..draws {
            let thinned = thin_twitter_sample(&counts, 0.015, seed).unwrap();
            total_sum += u64::from(thinned.total_documents);
            term_sum += u64::from(thinned.count("flu"));
        }
        let total_mean = total_sum as f64 / draws as f64;
        assert!(
            (total_mean - 5250.0).abs() < 5250.0 * 0.02,
            "thinned mean {total_mean} off the binomial mean 5250"
        );
        let term_mean = term_sum as f64 / draws as f64;
        assert!(
            (term_mean - 52.5).abs() < 52.5 * 0.02,
            "per-term mean {term_mean} off the hypergeometric mean 52.5"
        );
    }

    #[test]
    fn thinning_is_deterministic_per_seed_and_day() {
        let counts = counts_for(50_000, 120);
        let a = thin_twitter_sample(&counts, 0.1, 99).unwrap();
        let b = thin_twitter_sample(&counts, 0.1, 99).unwrap();
        assert_eq!(a, b);
    }

    fn probs(p: f64) -> BTreeMap<String, f64> {
        [("flu".to_string(), p)].into_iter().collect()
    }

    #[test]
    fn search_sampling_edge_cases() {
        let date = DateStamp::new(2016, 3, 7).unwrap();
        let zero = sample_search_sessions(date, &probs(0.0), 1_000_000, 0.125, 1).unwrap();
        assert_eq!(zero.sessions_with_term["flu"], 0);

        let full = sample_search_sessions(date, &probs(1.0e-4), 1_000_000, 1.0, 1).unwrap();
        assert_eq!(full.sampled_sessions, 1_000_000);

        assert!(sample_search_sessions(date, &probs(0.5), 1_000_000, 0.0, 1).is_err());
        assert!(sample_search_sessions(date, &probs(1.5), 1_000_000, 0.5, 1).is_err());
    }

    #[test]
    fn search_estimator_is_unbiased() {
        // Monte Carlo oracle for the downstream ratio estimator.
        let date = DateStamp::new(2016, 3, 7).unwrap();
        let p = 1.0e-4;
        let draws = 1000;
        let mut sum = 0.0;
        for seed in 0..draws {
            let s = sample_search_sessions(date, &probs(p), 1_000_000, 0.125, seed).unwrap();
            sum += s.sessions_with_term["flu"] as f64 / s.sampled_sessions as f64;
        }
        let mean = sum / draws as f64;
        assert!(
            (mean - p).abs() < p * 0.05,
            "estimator mean {mean} off the population probability {p}"
        );
    }

    #[test]
    fn realize_is_bit_reproducible() {
        let sc = scenario();
        let a = realize(&sc, DEFAULT_WEEK_ENDING).unwrap();
        let b = realize(&sc, DEFAULT_WEEK_ENDING).unwrap();
        assert_eq!(a.curve, b.curve);
        assert_eq!(a.population, b.population);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn planted_file_round_trips() {
        let mut sc = scenario();
        sc.n_days = 70;
        sc.n_terms = 4;
        sc.n_signal_terms = 2;
        let data = realize(&sc, DEFAULT_WEEK_ENDING).unwrap();
        let file = PlantedFile::from_data(&data);
        let json = file.to_json();
        let back = PlantedFile::from_json(&json).unwrap();
        assert_eq!(back.scenario, sc);
        assert_eq!(back.terms, data.population.planted);
        assert_eq!(back.daily.len(), 70);
        assert_eq!(back.daily[6].window_mean_rate.is_some(), true);
        assert_eq!(back.daily[5].window_mean_rate, None);
        // byte-deterministic
        assert_eq!(json, back.to_json());
    }
}
