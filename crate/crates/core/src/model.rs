//! Regularized linear regression core: elastic-net fitting by cyclic
//! coordinate descent, time-respecting cross-validation for the
//! regularization strength, and bootstrap-lasso feature selection.
//!
//! Features are standardized internally (zero mean, unit population
//! standard deviation per column); targets are left in ground-truth units
//! so the bias stays interpretable as a rate per 100,000. The fitted
//! objective is
//!
//! ```text
//! (1/2n) * ||y - b - X w||^2  +  lambda * (alpha * |w|_1 + (1-alpha)/2 * |w|_2^2)
//! ```
//!
//! with `b` fixed at `mean(y)` (exact for standardized features).

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::domain::{DateStamp, Region, SourceKind};
use crate::rng::derive_rng;

/// Minimum samples a training set must have.
pub const MIN_TRAIN_SAMPLES: usize = 8;
/// Minimum samples per validation fold in cross-validation.
pub const MIN_VALIDATION_SAMPLES: usize = 4;
/// Smallest grid lambda as a fraction of lambda_max.
pub const LAMBDA_GRID_FLOOR: f64 = 1e-4;

pub const DEFAULT_ALPHA: f64 = 0.9;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_SWEEPS: usize = 1000;
pub const DEFAULT_GRID_SIZE: usize = 100;
pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 100;
pub const DEFAULT_SELECTION_THRESHOLD: f64 = 0.9;

const BOLASSO_STREAM: u64 = 0x626f_6c61_7373_6f00;
const ARTIFACT_SCHEMA: &str = "ilinowcast-model/1";

/// floor(n / (2 * folds)): half the samples are reserved for validation.
fn validation_block_len(n: usize, folds: usize) -> usize {
    n / (2 * folds)
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("invalid training set: {0}")]
    InvalidTrainingSet(String),

    #[error("feature vector has {got} entries, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("numerical failure: objective became non-finite at sweep {sweep}")]
    NumericalFailure { sweep: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("bootstrap aborted: {failed} of {resamples} resample fits failed")]
    BolassoAborted { failed: usize, resamples: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model artifact: {0}")]
    Artifact(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Regularization settings for one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparams {
    pub lambda: f64,
    pub alpha: f64,
    pub max_sweeps: usize,
    pub tolerance: f64,
}

impl Hyperparams {
    pub fn new(
        lambda: f64,
        alpha: f64,
        max_sweeps: usize,
        tolerance: f64,
    ) -> Result<Self, ModelError> {
        let hp = Hyperparams {
            lambda,
            alpha,
            max_sweeps,
            tolerance,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn with_lambda(lambda: f64) -> Result<Self, ModelError> {
        Hyperparams::new(lambda, DEFAULT_ALPHA, DEFAULT_MAX_SWEEPS, DEFAULT_TOLERANCE)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(ModelError::InvalidHyperparams(format!(
                "lambda must be finite and > 0, got {}",
                self.lambda
            )));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(ModelError::InvalidHyperparams(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.max_sweeps == 0 {
            return Err(ModelError::InvalidHyperparams(
                "max_sweeps must be >= 1".to_string(),
            ));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(ModelError::InvalidHyperparams(format!(
                "tolerance must be finite and > 0, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Window-aggregated features paired with weekly ground-truth rates.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    sample_dates: Vec<DateStamp>,
    terms: Vec<String>,
    region: Region,
    source: SourceKind,
}

impl TrainingSet {
    pub fn new(
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
        sample_dates: Vec<DateStamp>,
        terms: Vec<String>,
        region: Region,
        source: SourceKind,
    ) -> Result<Self, ModelError> {
        let n = x.len();
        if n < MIN_TRAIN_SAMPLES {
            return Err(ModelError::InvalidTrainingSet(format!(
                "{n} samples, need at least {MIN_TRAIN_SAMPLES}"
            )));
        }
        if terms.is_empty() {
            return Err(ModelError::InvalidTrainingSet("no terms".to_string()));
        }
        if y.len() != n || sample_dates.len() != n {
            return Err(ModelError::InvalidTrainingSet(format!(
                "inconsistent lengths: {} rows, {} targets, {} dates",
                n,
                y.len(),
                sample_dates.len()
            )));
        }
        for (i, row) in x.iter().enumerate() {
            if row.len() != terms.len() {
                return Err(ModelError::InvalidTrainingSet(format!(
                    "row {i} has {} values for {} terms",
                    row.len(),
                    terms.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::InvalidTrainingSet(format!(
                    "non-finite feature in row {i}"
                )));
            }
        }
        for (i, &v) in y.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::InvalidTrainingSet(format!(
                    "target {i} is {v}, must be a finite rate >= 0"
                )));
            }
        }
        for w in sample_dates.windows(2) {
            if w[1] <= w[0] {
                return Err(ModelError::InvalidTrainingSet(format!(
                    "sample dates not strictly increasing at {}",
                    w[1]
                )));
            }
        }
        Ok(TrainingSet {
            x,
            y,
            sample_dates,
            terms,
            region,
            source,
        })
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn p(&self) -> usize {
        self.terms.len()
    }

    pub fn x_rows(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn sample_dates(&self) -> &[DateStamp] {
        &self.sample_dates
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn source(&self) -> SourceKind {
        self.source
    }

    /// Restrict to the given term indices (used after feature selection).
    pub fn restrict_terms(&self, keep: &[usize]) -> Result<TrainingSet, ModelError> {
        if keep.is_empty() {
            return Err(ModelError::InvalidTrainingSet(
                "restriction keeps no terms".to_string(),
            ));
        }
        let x = self
            .x
            .iter()
            .map(|row| keep.iter().map(|&j| row[j]).collect())
            .collect();
        let terms = keep.iter().map(|&j| self.terms[j].clone()).collect();
        TrainingSet::new(
            x,
            self.y.clone(),
            self.sample_dates.clone(),
            terms,
            self.region,
            self.source,
        )
    }
}

/// Per-term training mean and population standard deviation.
///
/// `degenerate[j]` marks constant columns; those are excluded from the
/// model (weight fixed at 0) and their `std` entry is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub degenerate: Vec<bool>,
}

/// sign(z) * max(|z| - gamma, 0): the proximal operator of the L1 penalty.
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Standardize each column to mean 0 and population std 1.
///
/// Constant columns are flagged degenerate (and zeroed) rather than
/// rejected: real vocabularies routinely contain dead terms. The
/// degeneracy test uses a relative threshold so float dust from summing a
/// constant column still counts as constant.
pub fn standardize(x_rows: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Standardization), ModelError> {
    let n = x_rows.len();
    if n < 2 {
        return Err(ModelError::InvalidTrainingSet(format!(
            "standardize needs >= 2 rows, got {n}"
        )));
    }
    let p = x_rows[0].len();
    let nf = n as f64;
    let mut mean = vec![0.0; p];
    let mut std = vec![0.0; p];
    let mut degenerate = vec![false; p];
    for j in 0..p {
        let m = x_rows.iter().map(|r| r[j]).sum::<f64>() / nf;
        let var = x_rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / nf;
        let s = var.sqrt();
        mean[j] = m;
        if s <= 1e-12 * (1.0 + m.abs()) {
            degenerate[j] = true;
            std[j] = 0.0;
        } else {
            std[j] = s;
        }
    }
    let standardized = x_rows
        .iter()
        .map(|row| {
            (0..p)
                .map(|j| {
                    if degenerate[j] {
                        0.0
                    } else {
                        (row[j] - mean[j]) / std[j]
                    }
                })
                .collect()
        })
        .collect();
    Ok((
        standardized,
        Standardization {
            mean,
            std,
            degenerate,
        },
    ))
}

/// Standardized design ready for coordinate descent.
struct Prepared {
    /// p columns of length n; degenerate columns are all-zero.
    cols: Vec<Vec<f64>>,
    /// Squared norm per column.
    col_sq: Vec<f64>,
    /// Centered targets y - mean(y).
    yc: Vec<f64>,
    y_mean: f64,
    stdz: Standardization,
    n: usize,
}

fn prepare(x_rows: &[Vec<f64>], y: &[f64]) -> Result<Prepared, ModelError> {
    let (std_rows, stdz) = standardize(x_rows)?;
    let n = std_rows.len();
    let p = stdz.mean.len();
    let mut cols = vec![vec![0.0; n]; p];
    for (i, row) in std_rows.iter().enumerate() {
        for j in 0..p {
            cols[j][i] = row[j];
        }
    }
    let col_sq = cols.iter().map(|c| c.iter().map(|v| v * v).sum()).collect();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let yc = y.iter().map(|v| v - y_mean).collect();
    Ok(Prepared {
        cols,
        col_sq,
        yc,
        y_mean,
        stdz,
        n,
    })
}

impl Prepared {
    /// max_j |x_j^T yc| / (n * alpha) over retained columns.
    fn lambda_max(&self, alpha: f64) -> f64 {
        let nf = self.n as f64;
        let mut best = 0.0f64;
        for (j, col) in self.cols.iter().enumerate() {
            if self.stdz.degenerate[j] {
                continue;
            }
            let rho: f64 = col.iter().zip(&self.yc).map(|(a, b)| a * b).sum();
            best = best.max(rho.abs());
        }
        best / (nf * alpha)
    }
}

/// Result of one coordinate-descent run.
#[derive(Debug, Clone)]
pub struct FitDiagnostics {
    pub converged: bool,
    pub sweeps: usize,
    /// Objective value at the starting point and after each sweep.
    pub objective_history: Vec<f64>,
}

fn objective(prep: &Prepared, residual: &[f64], w: &[f64], hp: &Hyperparams) -> f64 {
    let nf = prep.n as f64;
    let sse: f64 = residual.iter().map(|r| r * r).sum();
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    let l2: f64 = w.iter().map(|v| v * v).sum();
    sse / (2.0 * nf) + hp.lambda * (hp.alpha * l1 + (1.0 - hp.alpha) / 2.0 * l2)
}

/// Cyclic coordinate descent on the standardized design.
///
/// `w0` is a warm start (zeros for a cold fit). Each update is the
/// closed-form elastic-net coordinate minimizer, so the objective is
/// non-increasing sweep over sweep; that invariant is asserted in test
/// builds.
fn coordinate_descent(
    prep: &Prepared,
    hp: &Hyperparams,
    w0: Vec<f64>,
) -> Result<(Vec<f64>, FitDiagnostics), ModelError> {
    hp.validate()?;
    let nf = prep.n as f64;
    let p = prep.cols.len();
    debug_assert_eq!(w0.len(), p);
    let mut w = w0;
    for (j, wj) in w.iter_mut().enumerate() {
        if prep.stdz.degenerate[j] {
            *wj = 0.0;
        }
    }
    // residual of the centered problem: yc - X w
    let mut residual = prep.yc.clone();
    for (j, col) in prep.cols.iter().enumerate() {
        if w[j] != 0.0 {
            for (r, &x) in residual.iter_mut().zip(col) {
                *r -= x * w[j];
            }
        }
    }
    let l1_penalty = hp.lambda * hp.alpha;
    let l2_penalty = hp.lambda * (1.0 - hp.alpha);
    let mut history = vec![objective(prep, &residual, &w, hp)];
    let mut converged = false;
    let mut sweeps = 0;
    while sweeps < hp.max_sweeps {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            if prep.stdz.degenerate[j] {
                continue;
            }
            let col = &prep.cols[j];
            let old = w[j];
            // partial-residual correlation: x_j^T (residual + x_j w_j)
            let mut rho: f64 = col.iter().zip(&residual).map(|(a, b)| a * b).sum();
            rho += prep.col_sq[j] * old;
            let new = soft_threshold(rho / nf, l1_penalty) / (prep.col_sq[j] / nf + l2_penalty);
            if new != old {
                let delta = new - old;
                for (r, &x) in residual.iter_mut().zip(col) {
                    *r -= x * delta;
                }
                w[j] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        sweeps += 1;
        let obj = objective(prep, &residual, &w, hp);
        if !obj.is_finite() {
            return Err(ModelError::NumericalFailure { sweep: sweeps });
        }
        let prev = *history.last().unwrap();
        debug_assert!(
            obj <= prev + 1e-10 * (1.0 + prev.abs()),
            "objective increased: {prev} -> {obj} at sweep {sweeps}"
        );
        history.push(obj);
        if max_delta < hp.tolerance {
            converged = true;
            break;
        }
    }
    Ok((
        w,
        FitDiagnostics {
            converged,
            sweeps,
            objective_history: history,
        },
    ))
}

/// Trained model: weights on the standardized feature scale plus
/// everything needed to reproduce predictions exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelArtifact {
    pub terms: Vec<String>,
    /// Weights on standardized columns; 0 for degenerate terms.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardization: Standardization,
    pub hyperparams: Hyperparams,
    pub trained_on: (DateStamp, DateStamp),
    pub region: Region,
    pub source: SourceKind,
    /// Populated when bootstrap-lasso selection produced this model.
    pub selected_terms: Option<Vec<String>>,
    pub converged: bool,
    pub n_sweeps: usize,
}

/// Fit the elastic net with full diagnostics (objective trace).
pub fn fit_elastic_net_with_diagnostics(
    train: &TrainingSet,
    hp: &Hyperparams,
) -> Result<(ModelArtifact, FitDiagnostics), ModelError> {
    let prep = prepare(train.x_rows(), train.y())?;
    let (weights, diag) = coordinate_descent(&prep, hp, vec![0.0; train.p()])?;
    let artifact = ModelArtifact {
        terms: train.terms().to_vec(),
        weights,
        bias: prep.y_mean,
        standardization: prep.stdz,
        hyperparams: hp.clone(),
        trained_on: (train.sample_dates[0], *train.sample_dates.last().unwrap()),
        region: train.region,
        source: train.source,
        selected_terms: None,
        converged: diag.converged,
        n_sweeps: diag.sweeps,
    };
    Ok((artifact, diag))
}

/// Fit the elastic net by cyclic coordinate descent.
///
/// A fit that exhausts `max_sweeps` is still returned, flagged
/// `converged = false`.
pub fn fit_elastic_net(train: &TrainingSet, hp: &Hyperparams) -> Result<ModelArtifact, ModelError> {
    fit_elastic_net_with_diagnostics(train, hp).map(|(artifact, _)| artifact)
}

/// Smallest lambda at which the fit is identically zero:
/// `max_j |x_j^T (y - mean(y))| / (n * alpha)` on standardized columns.
pub fn lambda_max(train: &TrainingSet, alpha: f64) -> Result<f64, ModelError> {
    if !(alpha.is_finite() && alpha > 0.0 && alpha <= 1.0) {
        return Err(ModelError::InvalidHyperparams(format!(
            "alpha must be in (0, 1], got {alpha}"
        )));
    }
    let prep = prepare(train.x_rows(), train.y())?;
    Ok(prep.lambda_max(alpha))
}

fn predict_with(
    stdz: &Standardization,
    weights: &[f64],
    bias: f64,
    x: &[f64],
) -> Result<f64, ModelError> {
    if x.len() != weights.len() {
        return Err(ModelError::DimensionMismatch {
            expected: weights.len(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("feature vector".to_string()));
    }
    let mut acc = bias;
    for j in 0..weights.len() {
        if stdz.degenerate[j] || weights[j] == 0.0 {
            continue;
        }
        acc += weights[j] * (x[j] - stdz.mean[j]) / stdz.std[j];
    }
    Ok(acc)
}

/// Raw (unclamped) prediction for one feature vector over the model's
/// terms. Clamping to valid rates is the inference layer's contract.
pub fn predict(model: &ModelArtifact, x: &[f64]) -> Result<f64, ModelError> {
    predict_with(&model.standardization, &model.weights, model.bias, x)
}

/// One validation fold: train on rows `[0, train_end)`, validate on
/// `[val_start, val_end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldPlan {
    pub train_end: usize,
    pub val_start: usize,
    pub val_end: usize,
}

/// Forward-chaining fold layout: the last `folds * block` samples are cut
/// into `folds` consecutive validation blocks, each preceded only by
/// earlier samples.
pub fn fold_plan(n: usize, folds: usize) -> Result<Vec<FoldPlan>, ModelError> {
    if folds < 2 {
        return Err(ModelError::InvalidArgument(format!(
            "folds must be >= 2, got {folds}"
        )));
    }
    let block = validation_block_len(n, folds);
    if block == 0 {
        return Err(ModelError::InsufficientData(format!(
            "{n} samples cannot host {folds} validation folds"
        )));
    }
    let first_val = n - folds * block;
    Ok((0..folds)
        .map(|k| {
            let val_start = first_val + k * block;
            FoldPlan {
                train_end: val_start,
                val_start,
                val_end: val_start + block,
            }
        })
        .collect())
}

/// Mean validation error for one grid point.
#[derive(Debug, Clone)]
pub struct LambdaDiagnostic {
    pub lambda: f64,
    pub mean_mae: f64,
    pub fold_maes: Vec<f64>,
}

/// Cross-validation outcome: the chosen hyperparameters plus the full
/// per-lambda error profile.
#[derive(Debug, Clone)]
pub struct CvReport {
    pub grid: Vec<LambdaDiagnostic>,
    pub best_lambda: f64,
}

/// Select lambda by forward-chaining cross-validation.
///
/// The grid is logarithmic from `lambda_max` down to
/// `LAMBDA_GRID_FLOOR * lambda_max`; fold k trains on all samples before
/// its validation block, so no fold ever sees future data. The winner
/// minimizes mean validation MAE, ties broken toward the larger lambda.
pub fn cv_select(
    train: &TrainingSet,
    alpha: f64,
    grid_size: usize,
    folds: usize,
) -> Result<(Hyperparams, CvReport), ModelError> {
    if grid_size < 2 {
        return Err(ModelError::InvalidArgument(format!(
            "grid_size must be >= 2, got {grid_size}"
        )));
    }
    let plans = fold_plan(train.n(), folds)?;
    let block = plans[0].val_end - plans[0].val_start;
    if block < MIN_VALIDATION_SAMPLES {
        return Err(ModelError::InsufficientData(format!(
            "validation folds of {block} samples; need >= {MIN_VALIDATION_SAMPLES} \
             ({} samples, {folds} folds)",
            train.n()
        )));
    }
    let full_prep = prepare(train.x_rows(), train.y())?;
    let lam_max = full_prep.lambda_max(alpha);
    if !(lam_max.is_finite() && lam_max > 0.0) {
        return Err(ModelError::InsufficientData(
            "targets carry no signal the grid can be anchored to (lambda_max = 0)".to_string(),
        ));
    }
    // descending logarithmic grid
    let lambdas: Vec<f64> = (0..grid_size)
        .map(|k| lam_max * LAMBDA_GRID_FLOOR.powf(k as f64 / (grid_size - 1) as f64))
        .collect();

    let mut fold_maes = vec![vec![0.0f64; plans.len()]; grid_size];
    for (f, plan) in plans.iter().enumerate() {
        let prep = prepare(&train.x_rows()[..plan.train_end], &train.y()[..plan.train_end])?;
        let mut warm = vec![0.0; train.p()];
        for (k, &lambda) in lambdas.iter().enumerate() {
            let hp = Hyperparams {
                lambda,
                alpha,
                max_sweeps: DEFAULT_MAX_SWEEPS,
                tolerance: DEFAULT_TOLERANCE,
            };
            let (w, _) = coordinate_descent(&prep, &hp, warm.clone())?;
            let mut abs_err = 0.0;
            for i in plan.val_start..plan.val_end {
                let pred = predict_with(&prep.stdz, &w, prep.y_mean, &train.x_rows()[i])?;
                abs_err += (pred - train.y()[i]).abs();
            }
            fold_maes[k][f] = abs_err / block as f64;
            warm = w;
        }
    }

    let grid: Vec<LambdaDiagnostic> = lambdas
        .iter()
        .enumerate()
        .map(|(k, &lambda)| LambdaDiagnostic {
            lambda,
            mean_mae: fold_maes[k].iter().sum::<f64>() / plans.len() as f64,
            fold_maes: fold_maes[k].clone(),
        })
        .collect();
    // grid is descending in lambda, so strict `<` keeps the larger lambda on ties
    let mut best = 0;
    for k in 1..grid.len() {
        if grid[k].mean_mae < grid[best].mean_mae {
            best = k;
        }
    }
    let best_lambda = grid[best].lambda;
    Ok((
        Hyperparams {
            lambda: best_lambda,
            alpha,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            tolerance: DEFAULT_TOLERANCE,
        },
        CvReport { grid, best_lambda },
    ))
}

/// Bootstrap-lasso selection outcome.
#[derive(Debug, Clone)]
pub struct BolassoReport {
    /// Terms nonzero in at least `pi * resamples` fits, in term order.
    pub selected: Vec<String>,
    /// Fraction of resamples in which each term was nonzero, aligned with
    /// the training set's term list.
    pub selection_frequency: Vec<f64>,
    pub failed_resamples: usize,
}

/// Bootstrap-lasso feature selection.
///
/// Fits a lasso (`alpha = 1`, other settings from `hp`) on `resamples`
/// bootstrap draws of the training rows and keeps the terms that come out
/// nonzero in at least `pi * resamples` fits. Resampling is seeded per
/// resample index, so results are bit-reproducible and independent of
/// evaluation order.
pub fn bolasso_select(
    train: &TrainingSet,
    resamples: usize,
    pi: f64,
    hp: &Hyperparams,
    seed: u64,
) -> Result<BolassoReport, ModelError> {
    if resamples < 10 {
        return Err(ModelError::InvalidArgument(format!(
            "bootstrap needs >= 10 resamples, got {resamples}"
        )));
    }
    if !(pi > 0.5 && pi <= 1.0) {
        return Err(ModelError::InvalidArgument(format!(
            "pi must be in (0.5, 1], got {pi}"
        )));
    }
    let lasso_hp = Hyperparams {
        alpha: 1.0,
        ..hp.clone()
    };
    lasso_hp.validate()?;
    let n = train.n();
    let p = train.p();
    let mut nonzero_counts = vec![0usize; p];
    let mut failed = 0usize;
    for b in 0..resamples {
        let mut rng = derive_rng(seed, &[BOLASSO_STREAM, b as u64]);
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| train.x_rows()[i].clone()).collect();
        let ys: Vec<f64> = idx.iter().map(|&i| train.y()[i]).collect();
        let fit = prepare(&rows, &ys)
            .and_then(|prep| coordinate_descent(&prep, &lasso_hp, vec![0.0; p]));
        match fit {
            Ok((w, _)) => {
                for (j, &wj) in w.iter().enumerate() {
                    if wj != 0.0 {
                        nonzero_counts[j] += 1;
                    }
                }
            }
            Err(_) => failed += 1,
        }
    }
    if failed as f64 > 0.1 * resamples as f64 {
        return Err(ModelError::BolassoAborted { failed, resamples });
    }
    let selection_frequency: Vec<f64> = nonzero_counts
        .iter()
        .map(|&c| c as f64 / resamples as f64)
        .collect();
    let threshold = pi * resamples as f64 - 1e-9;
    let selected = train
        .terms()
        .iter()
        .zip(&nonzero_counts)
        .filter(|(_, &c)| c as f64 >= threshold)
        .map(|(t, _)| t.clone())
        .collect();
    Ok(BolassoReport {
        selected,
        selection_frequency,
        failed_resamples: failed,
    })
}

// ---------------------------------------------------------------------------
// Artifact serialization
// ---------------------------------------------------------------------------

/// Format a float with 17 significant digits: enough to reload the exact
/// same f64 bit pattern.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

fn fmt_f64_array(values: &[f64]) -> String {
    let mut out = String::from("[");
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&fmt_f64(*v));
    }
    out.push(']');
    out
}

fn fmt_str_array(values: &[String]) -> String {
    let mut out = String::from("[");
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&json_str(v));
    }
    out.push(']');
    out
}

fn fmt_bool_array(values: &[bool]) -> String {
    let mut out = String::from("[");
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(if *v { "true" } else { "false" });
    }
    out.push(']');
    out
}

impl ModelArtifact {
    /// Serialize to a single JSON document. Floats are written with 17
    /// significant digits so reloading reproduces the exact weights.
    pub fn to_json(&self) -> String {
        let mut s = String::new();
        s.push_str("{\n");
        let _ = writeln!(s, "  \"schema\": {},", json_str(ARTIFACT_SCHEMA));
        let _ = writeln!(s, "  \"region\": {},", json_str(self.region.as_str()));
        let _ = writeln!(s, "  \"source\": {},", json_str(self.source.as_str()));
        let _ = writeln!(
            s,
            "  \"trained_on\": {{\"start\": {}, \"end\": {}}},",
            json_str(&self.trained_on.0.to_string()),
            json_str(&self.trained_on.1.to_string())
        );
        let _ = writeln!(
            s,
            "  \"hyperparams\": {{\"lambda\": {}, \"alpha\": {}, \"max_sweeps\": {}, \"tolerance\": {}}},",
            fmt_f64(self.hyperparams.lambda),
            fmt_f64(self.hyperparams.alpha),
            self.hyperparams.max_sweeps,
            fmt_f64(self.hyperparams.tolerance)
        );
        let _ = writeln!(s, "  \"converged\": {},", self.converged);
        let _ = writeln!(s, "  \"n_sweeps\": {},", self.n_sweeps);
        let _ = writeln!(s, "  \"bias\": {},", fmt_f64(self.bias));
        let _ = writeln!(s, "  \"terms\": {},", fmt_str_array(&self.terms));
        let _ = writeln!(s, "  \"weights\": {},", fmt_f64_array(&self.weights));
        let _ = writeln!(
            s,
            "  \"standardization\": {{\"mean\": {}, \"std\": {}, \"degenerate\": {}}},",
            fmt_f64_array(&self.standardization.mean),
            fmt_f64_array(&self.standardization.std),
            fmt_bool_array(&self.standardization.degenerate)
        );
        let _ = writeln!(
            s,
            "  \"selected_terms\": {}",
            match &self.selected_terms {
                Some(t) => fmt_str_array(t),
                None => "null".to_string(),
            }
        );
        s.push_str("}\n");
        s
    }

    pub fn from_json(raw: &str) -> Result<Self, ModelError> {
        let file: ArtifactFile =
            serde_json::from_str(raw).map_err(|e| ModelError::Artifact(e.to_string()))?;
        file.into_artifact()
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let raw = fs::read_to_string(path)?;
        Self::from_json(&raw)
    }
}

#[derive(Deserialize)]
struct ArtifactFile {
    schema: String,
    region: Region,
    source: SourceKind,
    trained_on: ArtifactRange,
    hyperparams: ArtifactHyperparams,
    converged: bool,
    n_sweeps: usize,
    bias: f64,
    terms: Vec<String>,
    weights: Vec<f64>,
    standardization: ArtifactStandardization,
    selected_terms: Option<Vec<String>>,
}

#[derive(Deserialize)]
struct ArtifactRange {
    start: DateStamp,
    end: DateStamp,
}

#[derive(Deserialize)]
struct ArtifactHyperparams {
    lambda: f64,
    alpha: f64,
    max_sweeps: usize,
    tolerance: f64,
}

#[derive(Deserialize)]
struct ArtifactStandardization {
    mean: Vec<f64>,
    std: Vec<f64>,
    degenerate: Vec<bool>,
}

impl ArtifactFile {
    fn into_artifact(self) -> Result<ModelArtifact, ModelError> {
        if self.schema != ARTIFACT_SCHEMA {
            return Err(ModelError::Artifact(format!(
                "unsupported schema {:?}, expected {ARTIFACT_SCHEMA:?}",
                self.schema
            )));
        }
        let p = self.terms.len();
        if self.weights.len() != p
            || self.standardization.mean.len() != p
            || self.standardization.std.len() != p
            || self.standardization.degenerate.len() != p
        {
            return Err(ModelError::Artifact(format!(
                "inconsistent artifact arrays for {p} terms"
            )));
        }
        for (j, (&s, &d)) in self
            .standardization
            .std
            .iter()
            .zip(&self.standardization.degenerate)
            .enumerate()
        {
            if !d && s <= 0.0 {
                return Err(ModelError::Artifact(format!(
                    "retained term {j} has non-positive std {s}"
                )));
            }
        }
        let hp = Hyperparams::new(
            self.hyperparams.lambda,
            self.hyperparams.alpha,
            self.hyperparams.max_sweeps,
            self.hyperparams.tolerance,
        )?;
        Ok(ModelArtifact {
            terms: self.terms,
            weights: self.weights,
            bias: self.bias,
            standardization: Standardization {
                mean: self.standardization.mean,
                std: self.standardization.std,
                degenerate: self.standardization.degenerate,
            },
            hyperparams: hp,
            trained_on: (self.trained_on.start, self.trained_on.end),
            region: self.region,
            source: self.source,
            selected_terms: self.selected_terms,
            converged: self.converged,
            n_sweeps: self.n_sweeps,
        })
    }
}
