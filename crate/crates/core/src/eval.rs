//! Repeated k-fold cross-validation, error metrics, and paired significance
//! tests against the mean-predictor baseline.
//!
//! One [`FoldPlan`] is shared by every algorithm and feature set of an
//! experiment, so per-fold scores pair up across cells. The test statistic
//! is the resampled paired t-test with the variance multiplier
//! `1/(R·k) + n_test/n_train`, compared against Student-t with `R·k - 1`
//! degrees of freedom.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::features::{assemble_matrix, FeatureMatrix, FeatureSet};
use crate::ingest::{Dataset, View};
use crate::numeric::{derive_seed, name_tag, RandomSource};
use crate::regress::{self, fold_seed, Algorithm, ModelSpec};
use crate::report::{ComparisonTable, TableCell, TableRow};

/// Version of the experiment JSON layout.
pub const RESULTS_SCHEMA_VERSION: u32 = 1;
/// Significance level of the baseline comparison.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "MAE")]
    Mae,
    #[serde(rename = "RMSE")]
    Rmse,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::Mae, Metric::Rmse];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Mae => "MAE",
            Metric::Rmse => "RMSE",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mae" => Ok(Metric::Mae),
            "rmse" => Ok(Metric::Rmse),
            other => Err(Error::Config(format!("unknown metric {other:?}"))),
        }
    }
}

/// Parallel real and predicted values; never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    real: Vec<f64>,
    pred: Vec<f64>,
}

impl PredictionSet {
    pub fn new(real: Vec<f64>, pred: Vec<f64>) -> Result<Self> {
        if real.len() != pred.len() {
            return Err(Error::DimensionMismatch {
                expected: real.len(),
                found: pred.len(),
            });
        }
        if real.is_empty() {
            return Err(Error::EmptyInput("prediction set has no pairs".into()));
        }
        Ok(PredictionSet { real, pred })
    }

    pub fn len(&self) -> usize {
        self.real.len()
    }

    pub fn is_empty(&self) -> bool {
        self.real.is_empty()
    }

    pub fn real(&self) -> &[f64] {
        &self.real
    }

    pub fn pred(&self) -> &[f64] {
        &self.pred
    }

    pub fn mae(&self) -> f64 {
        mae_of(&self.real, &self.pred)
    }

    pub fn rmse(&self) -> f64 {
        rmse_of(&self.real, &self.pred)
    }
}

pub fn mae(p: &PredictionSet) -> f64 {
    p.mae()
}

pub fn rmse(p: &PredictionSet) -> f64 {
    p.rmse()
}

fn mae_of(real: &[f64], pred: &[f64]) -> f64 {
    real.iter().zip(pred).map(|(r, p)| (r - p).abs()).sum::<f64>() / real.len() as f64
}

fn rmse_of(real: &[f64], pred: &[f64]) -> f64 {
    let mse = real
        .iter()
        .zip(pred)
        .map(|(r, p)| (r - p) * (r - p))
        .sum::<f64>()
        / real.len() as f64;
    mse.sqrt()
}

/// Row assignment of every `(repeat, fold)` test set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    n: usize,
    k: usize,
    repeats: usize,
    seed: u64,
    /// `folds[repeat][fold]`: ascending test-row indices.
    folds: Vec<Vec<Vec<usize>>>,
}

/// Shuffles `0..n` once per repeat and cuts it into `k` contiguous folds;
/// the first `n % k` folds get one extra row.
pub fn make_folds(n: usize, k: usize, repeats: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    if k > n {
        return Err(Error::Config(format!("{k} folds exceed {n} rows")));
    }
    if repeats == 0 {
        return Err(Error::Config("need at least one repeat".into()));
    }
    let root = RandomSource::new(derive_seed(seed, name_tag("folds")));
    let folds = (0..repeats)
        .map(|r| {
            let mut order: Vec<usize> = (0..n).collect();
            root.child(r as u64).shuffle(&mut order);
            let (base, extra) = (n / k, n % k);
            let mut start = 0;
            (0..k)
                .map(|f| {
                    let len = base + usize::from(f < extra);
                    let mut fold = order[start..start + len].to_vec();
                    start += len;
                    fold.sort_unstable();
                    fold
                })
                .collect()
        })
        .collect();
    Ok(FoldPlan {
        n,
        k,
        repeats,
        seed,
        folds,
    })
}

impl FoldPlan {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn repeats(&self) -> usize {
        self.repeats
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn test_indices(&self, repeat: usize, fold: usize) -> &[usize] {
        &self.folds[repeat][fold]
    }

    pub fn train_indices(&self, repeat: usize, fold: usize) -> Vec<usize> {
        let mut in_test = vec![false; self.n];
        for &i in self.test_indices(repeat, fold) {
            in_test[i] = true;
        }
        (0..self.n).filter(|&i| !in_test[i]).collect()
    }

    /// `(repeat, fold)` in evaluation order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.repeats).flat_map(move |r| (0..self.k).map(move |f| (r, f)))
    }

    /// `(n_train, n_test)` of the largest test fold.
    pub fn split_shape(&self) -> (usize, usize) {
        let n_test = self.n.div_ceil(self.k);
        (self.n - n_test, n_test)
    }

    /// Stable digest of the plan, used to check that two results pair up.
    pub fn fingerprint(&self) -> u64 {
        let mut h = derive_seed(self.seed, (self.n as u64) << 32 | self.k as u64);
        h = derive_seed(h, self.repeats as u64);
        for fold in self.folds.iter().flatten() {
            for &i in fold {
                h = derive_seed(h, i as u64);
            }
            h = derive_seed(h, u64::MAX);
        }
        h
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub repeat: usize,
    pub fold: usize,
    pub mae: f64,
    pub rmse: f64,
}

impl FoldScore {
    pub fn metric(&self, m: Metric) -> f64 {
        match m {
            Metric::Mae => self.mae,
            Metric::Rmse => self.rmse,
        }
    }
}

/// Cross-validation outcome for one algorithm on one feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub algorithm: Algorithm,
    pub spec: ModelSpec,
    pub feature_set: FeatureSet,
    pub folds: Vec<FoldScore>,
    pub mae: f64,
    pub rmse: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub plan_fingerprint: u64,
    /// Test-row predictions, fold after fold in plan order.
    #[serde(skip)]
    pub predictions: Vec<f64>,
}

impl EvalResult {
    pub fn aggregate(&self, m: Metric) -> f64 {
        match m {
            Metric::Mae => self.mae,
            Metric::Rmse => self.rmse,
        }
    }

    pub fn fold_metric(&self, m: Metric) -> Vec<f64> {
        self.folds.iter().map(|f| f.metric(m)).collect()
    }

    /// Predictions of fold `(repeat, fold)` aligned with
    /// `plan.test_indices(repeat, fold)`.
    pub fn fold_predictions<'a>(&'a self, plan: &FoldPlan, repeat: usize, fold: usize) -> &'a [f64] {
        let mut start = 0;
        for (r, f) in plan.cells() {
            let len = plan.test_indices(r, f).len();
            if (r, f) == (repeat, fold) {
                return &self.predictions[start..start + len];
            }
            start += len;
        }
        &[]
    }

    /// CSV `repeat,fold,account_id,y_real,y_pred`.
    pub fn write_predictions_csv<W: Write>(&self, w: W, plan: &FoldPlan, m: &FeatureMatrix) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let csv_err = |e: csv::Error| Error::Config(format!("writing predictions: {e}"));
        out.write_record(["repeat", "fold", "account_id", "y_real", "y_pred"])
            .map_err(csv_err)?;
        let mut preds = self.predictions.iter();
        for (r, f) in plan.cells() {
            for &i in plan.test_indices(r, f) {
                let p = preds.next().copied().unwrap_or(f64::NAN);
                out.write_record([
                    r.to_string(),
                    f.to_string(),
                    m.ids()[i].clone(),
                    format!("{:?}", m.targets()[i]),
                    format!("{p:?}"),
                ])
                .map_err(csv_err)?;
            }
        }
        out.flush().map_err(|e| Error::Config(format!("writing predictions: {e}")))?;
        Ok(())
    }
}

/// Evaluates `spec` on every fold of `plan`. Stochastic specs get the seed
/// `fold_seed(spec.seed, repeat, fold)` for each fit; any scaling happens
/// inside the fit and so sees training rows only.
pub fn cross_validate(spec: &ModelSpec, m: &FeatureMatrix, plan: &FoldPlan) -> Result<EvalResult> {
    if plan.n() != m.len() {
        return Err(Error::Config(format!(
            "fold plan covers {} rows but the matrix has {}",
            plan.n(),
            m.len()
        )));
    }
    let cells: Vec<(usize, usize)> = plan.cells().collect();
    let per_fold: Vec<(FoldScore, Vec<f64>)> = cells
        .par_iter()
        .map(|&(r, f)| {
            let annotate = |e: Error| Error::Fold {
                repeat: r,
                fold: f,
                source: Box::new(e),
            };
            let train = m.subset(&plan.train_indices(r, f));
            let fold_spec = match spec.seed() {
                Some(s) => spec.clone().with_seed(fold_seed(s, r, f)),
                None => spec.clone(),
            };
            let model = regress::fit(&fold_spec, &train).map_err(annotate)?;
            let test = plan.test_indices(r, f);
            let real: Vec<f64> = test.iter().map(|&i| m.targets()[i]).collect();
            let pred: Vec<f64> = test.iter().map(|&i| model.predict_row(&m.rows()[i])).collect();
            let score = FoldScore {
                repeat: r,
                fold: f,
                mae: mae_of(&real, &pred),
                rmse: rmse_of(&real, &pred),
            };
            Ok((score, pred))
        })
        .collect::<Result<_>>()?;

    let count = per_fold.len() as f64;
    let mae = per_fold.iter().map(|(s, _)| s.mae).sum::<f64>() / count;
    let rmse = per_fold.iter().map(|(s, _)| s.rmse).sum::<f64>() / count;
    let (n_train, n_test) = plan.split_shape();
    let mut folds = Vec::with_capacity(per_fold.len());
    let mut predictions = Vec::with_capacity(m.len() * plan.repeats());
    for (s, p) in per_fold {
        folds.push(s);
        predictions.extend(p);
    }
    Ok(EvalResult {
        algorithm: spec.algorithm(),
        spec: spec.clone(),
        feature_set: m.set(),
        folds,
        mae,
        rmse,
        n_train,
        n_test,
        plan_fingerprint: plan.fingerprint(),
        predictions,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMode {
    /// Variance multiplier `1/(R·k) + n_test/n_train`.
    Corrected,
    /// Plain paired t-test, multiplier `1/(R·k)`.
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `None` when the variance is zero and the mean difference is not.
    pub t_statistic: Option<f64>,
    pub degrees_of_freedom: usize,
    /// Mean of `baseline - candidate`; positive favours the candidate.
    pub mean_difference: f64,
    pub p_value: f64,
    pub significant_better: bool,
    pub alpha: f64,
    /// Zero variance of the differences.
    pub degenerate: bool,
    pub mode: TestMode,
}

/// Paired t-test over fold differences `d_j = baseline_j - candidate_j`.
pub fn paired_ttest(d: &[f64], n_train: usize, n_test: usize, alpha: f64, mode: TestMode) -> TestResult {
    let count = d.len();
    let mean = d.iter().sum::<f64>() / count.max(1) as f64;
    let var = if count > 1 {
        d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (count - 1) as f64
    } else {
        0.0
    };
    let df = count.saturating_sub(1);
    let degenerate = !(var > 0.0);
    if degenerate {
        let better = mean > 0.0;
        return TestResult {
            t_statistic: if mean == 0.0 { Some(0.0) } else { None },
            degrees_of_freedom: df,
            mean_difference: mean,
            p_value: if mean == 0.0 { 1.0 } else { 0.0 },
            significant_better: better,
            alpha,
            degenerate: true,
            mode,
        };
    }
    let multiplier = match mode {
        TestMode::Corrected => 1.0 / count as f64 + n_test as f64 / n_train as f64,
        TestMode::Naive => 1.0 / count as f64,
    };
    let t = mean / (var * multiplier).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1 when variance is positive");
    let p = (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0);
    TestResult {
        t_statistic: Some(t),
        degrees_of_freedom: df,
        mean_difference: mean,
        p_value: p,
        significant_better: p < alpha && mean > 0.0,
        alpha,
        degenerate: false,
        mode,
    }
}

/// Corrected paired t-test of `candidate` against `baseline` on `metric`.
pub fn corrected_paired_ttest(
    candidate: &EvalResult,
    baseline: &EvalResult,
    metric: Metric,
    alpha: f64,
) -> Result<TestResult> {
    compare(candidate, baseline, metric, alpha, TestMode::Corrected)
}

pub fn compare(
    candidate: &EvalResult,
    baseline: &EvalResult,
    metric: Metric,
    alpha: f64,
    mode: TestMode,
) -> Result<TestResult> {
    let paired = candidate.plan_fingerprint == baseline.plan_fingerprint
        && candidate.folds.len() == baseline.folds.len()
        && candidate
            .folds
            .iter()
            .zip(&baseline.folds)
            .all(|(a, b)| (a.repeat, a.fold) == (b.repeat, b.fold));
    if !paired {
        return Err(Error::Pairing);
    }
    let d: Vec<f64> = baseline
        .folds
        .iter()
        .zip(&candidate.folds)
        .map(|(b, c)| b.metric(metric) - c.metric(metric))
        .collect();
    Ok(paired_ttest(&d, candidate.n_train, candidate.n_test, alpha, mode))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOptions {
    pub k: usize,
    pub repeats: usize,
    pub seed: u64,
    pub alpha: f64,
    pub mode: TestMode,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        ExperimentOptions {
            k: 10,
            repeats: 10,
            seed: 1,
            alpha: DEFAULT_ALPHA,
            mode: TestMode::Corrected,
        }
    }
}

/// One evaluated grid cell with its tests against the baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub result: EvalResult,
    pub mae_test: TestResult,
    pub rmse_test: TestResult,
}

impl CellResult {
    pub fn test(&self, m: Metric) -> &TestResult {
        match m {
            Metric::Mae => &self.mae_test,
            Metric::Rmse => &self.rmse_test,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema_version: u32,
    pub view: View,
    pub rows: usize,
    pub options: ExperimentOptions,
    pub feature_sets: Vec<FeatureSet>,
    pub algorithms: Vec<Algorithm>,
    /// Feature-set major, algorithm minor, in the orders above.
    pub cells: Vec<CellResult>,
    #[serde(skip)]
    pub plan: Option<FoldPlan>,
}

/// Evaluates every `(spec, feature set)` pair on one shared fold plan and
/// tests each against the baseline of its feature set. The baseline is
/// added first when `specs` lacks it; stochastic specs without a seed get
/// one derived from `options.seed` and the algorithm name.
pub fn run_experiment(
    d: &Dataset,
    feature_sets: &[FeatureSet],
    specs: &[ModelSpec],
    options: &ExperimentOptions,
) -> Result<ExperimentResult> {
    if feature_sets.is_empty() || specs.is_empty() {
        return Err(Error::Config("experiment needs at least one feature set and one algorithm".into()));
    }
    if !(options.alpha > 0.0 && options.alpha < 1.0) {
        return Err(Error::Config(format!("alpha must lie in (0, 1), got {}", options.alpha)));
    }
    let mut specs: Vec<ModelSpec> = specs
        .iter()
        .map(|s| match s.seed() {
            None if s.is_stochastic() => s
                .clone()
                .with_seed(derive_seed(options.seed, name_tag(s.algorithm().name()))),
            _ => s.clone(),
        })
        .collect();
    let mut seen = std::collections::BTreeSet::new();
    for s in &specs {
        if !seen.insert(s.algorithm()) {
            return Err(Error::Config(format!("{} listed twice", s.algorithm())));
        }
    }
    if !seen.contains(&Algorithm::ZeroR) {
        specs.insert(0, ModelSpec::new(Algorithm::ZeroR));
    }
    let baseline_at = specs
        .iter()
        .position(|s| s.algorithm() == Algorithm::ZeroR)
        .unwrap_or(0);

    let matrices: Vec<FeatureMatrix> = feature_sets
        .iter()
        .map(|&set| assemble_matrix(d, set))
        .collect::<Result<_>>()?;
    if d.is_empty() {
        return Err(Error::EmptyInput("dataset has no records".into()));
    }
    let plan = make_folds(d.len(), options.k, options.repeats, options.seed)?;

    let grid: Vec<(usize, usize)> = (0..matrices.len())
        .flat_map(|s| (0..specs.len()).map(move |a| (s, a)))
        .collect();
    let evaluated: Vec<EvalResult> = grid
        .par_iter()
        .map(|&(s, a)| {
            let r = cross_validate(&specs[a], &matrices[s], &plan).map_err(|e| Error::Cell {
                algorithm: specs[a].algorithm().name().into(),
                feature_set: feature_sets[s].label().into(),
                source: Box::new(e),
            })?;
            log::info!(
                "{} on {}: MAE {:.4} RMSE {:.4}",
                specs[a].algorithm(),
                feature_sets[s].label(),
                r.mae,
                r.rmse
            );
            Ok(r)
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::with_capacity(evaluated.len());
    for (idx, &(s, _)) in grid.iter().enumerate() {
        let base = &evaluated[s * specs.len() + baseline_at];
        let r = &evaluated[idx];
        cells.push(CellResult {
            result: r.clone(),
            mae_test: compare(r, base, Metric::Mae, options.alpha, options.mode)?,
            rmse_test: compare(r, base, Metric::Rmse, options.alpha, options.mode)?,
        });
    }
    Ok(ExperimentResult {
        schema_version: RESULTS_SCHEMA_VERSION,
        view: d.view(),
        rows: d.len(),
        options: options.clone(),
        feature_sets: feature_sets.to_vec(),
        algorithms: specs.iter().map(|s| s.algorithm()).collect(),
        cells,
        plan: Some(plan),
    })
}

impl ExperimentResult {
    pub fn cell(&self, algorithm: Algorithm, set: FeatureSet) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.result.algorithm == algorithm && c.result.feature_set == set)
    }

    /// Algorithm-by-feature-set table of aggregate scores with stars on
    /// cells significantly better than the baseline.
    pub fn table(&self, metric: Metric) -> Result<ComparisonTable> {
        let baseline = self
            .feature_sets
            .iter()
            .map(|&s| {
                self.cell(Algorithm::ZeroR, s)
                    .map(|c| c.result.aggregate(metric))
                    .ok_or_else(|| Error::EmptyInput("experiment has no baseline cells".into()))
            })
            .collect::<Result<Vec<f64>>>()?;
        let rows = self
            .algorithms
            .iter()
            .filter(|&&a| a != Algorithm::ZeroR)
            .map(|&a| TableRow {
                algorithm: a.name().to_string(),
                cells: self
                    .feature_sets
                    .iter()
                    .map(|&s| {
                        let c = self.cell(a, s).expect("full grid");
                        TableCell {
                            score: c.result.aggregate(metric),
                            starred: c.test(metric).significant_better,
                        }
                    })
                    .collect(),
            })
            .collect();
        ComparisonTable::new(
            metric,
            self.view,
            self.feature_sets.iter().map(|s| s.label().to_string()).collect(),
            baseline,
            rows,
        )
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}
