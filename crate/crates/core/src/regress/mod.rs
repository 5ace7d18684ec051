//! The regression suite behind one fit/predict contract.
//!
//! Every algorithm is written from scratch here. Hyperparameters live in a
//! name → value map validated when the [`ModelSpec`] is built, so a spec that
//! exists is a spec that can be fitted.

mod ensemble;
mod gp;
mod linear;
mod neighbors;
pub mod smo;
pub mod split;
pub mod tree;

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ColumnScaler, FeatureMatrix, FeatureSet, FeatureVector};
use crate::numeric::{derive_seed, name_tag, RandomSource};

pub use ensemble::{AdditiveModel, DiscretizedModel, ForestModel, ForestParams};
pub use gp::GaussianProcessModel;
pub use linear::LinearModel;
pub use neighbors::{IbkModel, LwlModel};
pub use smo::{SmoModel, SmoSolution};
pub use tree::{Stump, Tree};

/// Bump when the serialized model layout changes.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    ZeroR,
    #[serde(rename = "REPTree")]
    RepTree,
    LinearRegression,
    #[serde(rename = "IBk")]
    Ibk,
    #[serde(rename = "LWL")]
    Lwl,
    AdditiveRegression,
    RegressionByDiscretization,
    DecisionStump,
    GaussianProcesses,
    #[serde(rename = "SMOreg")]
    SmoReg,
    RandomForest,
}

impl Algorithm {
    /// Row order of the result tables.
    pub const ALL: [Algorithm; 11] = [
        Algorithm::ZeroR,
        Algorithm::RepTree,
        Algorithm::LinearRegression,
        Algorithm::Ibk,
        Algorithm::Lwl,
        Algorithm::AdditiveRegression,
        Algorithm::RegressionByDiscretization,
        Algorithm::DecisionStump,
        Algorithm::GaussianProcesses,
        Algorithm::SmoReg,
        Algorithm::RandomForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ZeroR => "ZeroR",
            Algorithm::RepTree => "REPTree",
            Algorithm::LinearRegression => "LinearRegression",
            Algorithm::Ibk => "IBk",
            Algorithm::Lwl => "LWL",
            Algorithm::AdditiveRegression => "AdditiveRegression",
            Algorithm::RegressionByDiscretization => "RegressionByDiscretization",
            Algorithm::DecisionStump => "DecisionStump",
            Algorithm::GaussianProcesses => "GaussianProcesses",
            Algorithm::SmoReg => "SMOreg",
            Algorithm::RandomForest => "RandomForest",
        }
    }

    /// `(name, default)` for every accepted hyperparameter. `NaN` marks a
    /// parameter whose default depends on the data (resolved at fit time).
    fn defaults(self) -> &'static [(&'static str, f64)] {
        match self {
            Algorithm::ZeroR | Algorithm::DecisionStump | Algorithm::Lwl => &[],
            Algorithm::LinearRegression => &[("ridge", 1e-8)],
            Algorithm::Ibk => &[("k", 1.0)],
            Algorithm::AdditiveRegression => &[("iterations", 10.0), ("shrinkage", 1.0)],
            Algorithm::RegressionByDiscretization => &[("bins", 10.0), ("min_leaf", 2.0)],
            Algorithm::GaussianProcesses => &[("gamma", f64::NAN), ("noise", 1.0)],
            Algorithm::SmoReg => &[
                ("c", 1.0),
                ("epsilon", 1e-3),
                ("tolerance", 1e-3),
                ("max_iterations", 1e6),
            ],
            Algorithm::RepTree => &[("max_depth", -1.0), ("min_leaf", 2.0), ("prune", 1.0)],
            Algorithm::RandomForest => &[
                ("trees", 100.0),
                ("features_per_split", f64::NAN),
                ("bootstrap", 1.0),
                ("min_leaf", 1.0),
                ("max_depth", -1.0),
            ],
        }
    }

    fn validate(self, name: &str, v: f64) -> Result<()> {
        let bad = |why: &str| Err(Error::Config(format!("{}: {name} = {v} {why}", self.name())));
        if v.is_nan() {
            return bad("is not a number");
        }
        let integral = v.fract() == 0.0 && v.is_finite();
        match name {
            "ridge" | "noise" if v < 0.0 => bad("must be >= 0"),
            "gamma" | "c" | "epsilon" | "tolerance" if !(v > 0.0) || !v.is_finite() => {
                bad("must be > 0")
            }
            "shrinkage" if !(0.0..=1.0).contains(&v) => bad("must be in [0, 1]"),
            "k" | "bins" | "trees" | "features_per_split" | "max_iterations"
                if !integral || v < 1.0 =>
            {
                bad("must be a positive integer")
            }
            "min_leaf" if !integral || v < 1.0 => bad("must be a positive integer"),
            "iterations" if !integral || v < 0.0 => bad("must be a non-negative integer"),
            "max_depth" if !integral || v < -1.0 => bad("must be -1 (unlimited) or >= 0"),
            "prune" | "bootstrap" if v != 0.0 && v != 1.0 => bad("must be 0 or 1"),
            _ => Ok(()),
        }
    }

    /// Whether fitting consumes randomness under these hyperparameters.
    pub fn is_stochastic(self, params: &BTreeMap<String, f64>) -> bool {
        match self {
            Algorithm::RandomForest => true,
            Algorithm::RepTree => params.get("prune").copied().unwrap_or(1.0) != 0.0,
            _ => false,
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let wanted = s.trim().to_ascii_lowercase();
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().to_ascii_lowercase() == wanted)
            .or(match wanted.as_str() {
                "gaussianprocess" | "gp" => Some(Algorithm::GaussianProcesses),
                "knn" => Some(Algorithm::Ibk),
                "linear" | "ridge" => Some(Algorithm::LinearRegression),
                "smo" | "svr" => Some(Algorithm::SmoReg),
                _ => None,
            })
            .ok_or_else(|| Error::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Algorithm plus validated hyperparameters and optional seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    algorithm: Algorithm,
    hyperparameters: BTreeMap<String, f64>,
    seed: Option<u64>,
}

impl ModelSpec {
    /// Spec with the default hyperparameters.
    pub fn new(algorithm: Algorithm) -> Self {
        let hyperparameters = algorithm
            .defaults()
            .iter()
            .filter(|(_, v)| !v.is_nan())
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        ModelSpec {
            algorithm,
            hyperparameters,
            seed: None,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(Self::new(name.parse()?))
    }

    pub fn with_param(mut self, name: &str, value: f64) -> Result<Self> {
        let name = name.trim().to_ascii_lowercase();
        if !self.algorithm.defaults().iter().any(|(k, _)| *k == name) {
            return Err(Error::Config(format!(
                "{} has no hyperparameter {name:?}",
                self.algorithm.name()
            )));
        }
        self.algorithm.validate(&name, value)?;
        self.hyperparameters.insert(name, value);
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn hyperparameters(&self) -> &BTreeMap<String, f64> {
        &self.hyperparameters
    }

    pub fn is_stochastic(&self) -> bool {
        self.algorithm.is_stochastic(&self.hyperparameters)
    }

    fn param(&self, name: &str) -> Option<f64> {
        self.hyperparameters.get(name).copied()
    }

    fn count(&self, name: &str) -> usize {
        self.param(name).unwrap_or(0.0) as usize
    }

    fn depth(&self) -> Option<usize> {
        match self.param("max_depth") {
            Some(d) if d >= 0.0 => Some(d as usize),
            _ => None,
        }
    }

    /// Validation of a spec that came from outside (e.g. a model file).
    fn check(&self) -> Result<()> {
        for (k, v) in &self.hyperparameters {
            if !self.algorithm.defaults().iter().any(|(d, _)| d == k) {
                return Err(Error::Config(format!(
                    "{} has no hyperparameter {k:?}",
                    self.algorithm.name()
                )));
            }
            self.algorithm.validate(k, *v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FittedState {
    ZeroR { mean: f64 },
    Linear(LinearModel),
    Ibk(IbkModel),
    Lwl(LwlModel),
    Stump(Stump),
    Additive(AdditiveModel),
    Discretized(DiscretizedModel),
    GaussianProcess(GaussianProcessModel),
    Smo(SmoModel),
    Tree(Tree),
    Forest(ForestModel),
}

/// An immutable fitted predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    spec: ModelSpec,
    feature_set: FeatureSet,
    feature_names: Vec<String>,
    state: FittedState,
}

/// Fits `spec` on `m`. Never mutates `m`.
pub fn fit(spec: &ModelSpec, m: &FeatureMatrix) -> Result<TrainedModel> {
    if m.is_empty() {
        return Err(Error::EmptyInput(format!(
            "cannot fit {} on zero rows",
            spec.algorithm.name()
        )));
    }
    spec.check()?;
    let seed = match (spec.is_stochastic(), spec.seed) {
        (true, None) => {
            return Err(Error::Config(format!(
                "{} needs an explicit seed",
                spec.algorithm.name()
            )))
        }
        (_, s) => s.unwrap_or(0),
    };
    let rows = m.rows();
    let y = m.targets();
    let all: Vec<usize> = (0..m.len()).collect();

    let state = match spec.algorithm {
        Algorithm::ZeroR => FittedState::ZeroR {
            mean: y.iter().sum::<f64>() / y.len() as f64,
        },
        Algorithm::LinearRegression => {
            FittedState::Linear(LinearModel::fit(rows, y, spec.param("ridge").unwrap_or(1e-8))?)
        }
        Algorithm::Ibk => FittedState::Ibk(IbkModel::fit(rows, y, spec.count("k"))?),
        Algorithm::Lwl => FittedState::Lwl(LwlModel::fit(rows, y)?),
        Algorithm::DecisionStump => FittedState::Stump(Stump::fit(rows, y, None, &all)),
        Algorithm::AdditiveRegression => FittedState::Additive(AdditiveModel::fit(
            rows,
            y,
            spec.count("iterations"),
            spec.param("shrinkage").unwrap_or(1.0),
        )),
        Algorithm::RegressionByDiscretization => FittedState::Discretized(
            DiscretizedModel::fit(rows, y, spec.count("bins"), spec.count("min_leaf")),
        ),
        Algorithm::GaussianProcesses => {
            let gamma = spec
                .param("gamma")
                .unwrap_or(1.0 / m.set().dimension() as f64);
            FittedState::GaussianProcess(GaussianProcessModel::fit(
                rows,
                y,
                gamma,
                spec.param("noise").unwrap_or(1.0),
            )?)
        }
        Algorithm::SmoReg => FittedState::Smo(SmoModel::fit(
            rows,
            y,
            &smo::SmoParams {
                c: spec.param("c").unwrap_or(1.0),
                epsilon: spec.param("epsilon").unwrap_or(1e-3),
                tolerance: spec.param("tolerance").unwrap_or(1e-3),
                max_iterations: spec.count("max_iterations"),
            },
        )?),
        Algorithm::RepTree => {
            let params = tree::TreeParams {
                max_depth: spec.depth(),
                min_leaf: spec.count("min_leaf"),
                features_per_split: None,
            };
            let prune = spec.param("prune").unwrap_or(1.0) != 0.0;
            let mut rng = RandomSource::new(seed).child(name_tag("reptree-holdout"));
            FittedState::Tree(ensemble::fit_reptree(rows, y, params, prune, &mut rng))
        }
        Algorithm::RandomForest => {
            let d = m.set().dimension();
            let f = spec
                .param("features_per_split")
                .map(|v| v as usize)
                .unwrap_or_else(|| (d as f64).log2().floor() as usize + 1)
                .min(d);
            FittedState::Forest(ForestModel::fit(
                rows,
                y,
                &ensemble::ForestParams {
                    trees: spec.count("trees"),
                    features_per_split: f,
                    bootstrap: spec.param("bootstrap").unwrap_or(1.0) != 0.0,
                    tree: tree::TreeParams {
                        max_depth: spec.depth(),
                        min_leaf: spec.count("min_leaf"),
                        features_per_split: Some(f),
                    },
                },
                seed,
            ))
        }
    };
    Ok(TrainedModel {
        spec: spec.clone(),
        feature_set: m.set(),
        feature_names: m.set().names().iter().map(|s| s.to_string()).collect(),
        state,
    })
}

impl TrainedModel {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn feature_set(&self) -> FeatureSet {
        self.feature_set
    }

    pub fn state(&self) -> &FittedState {
        &self.state
    }

    /// Raw model output; not clamped to `[0, 100]`.
    pub fn predict(&self, x: &FeatureVector) -> Result<f64> {
        if x.set() != self.feature_set {
            return Err(Error::FeatureSetMismatch {
                expected: self.feature_set.label().into(),
                found: x.set().label().into(),
            });
        }
        Ok(self.predict_row(x.values()))
    }

    /// Prediction for a raw row already known to match the feature set.
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        match &self.state {
            FittedState::ZeroR { mean } => *mean,
            FittedState::Linear(m) => m.predict(x),
            FittedState::Ibk(m) => m.predict(x),
            FittedState::Lwl(m) => m.predict(x),
            FittedState::Stump(s) => s.predict(x),
            FittedState::Additive(m) => m.predict(x),
            FittedState::Discretized(m) => m.predict(x),
            FittedState::GaussianProcess(m) => m.predict(x),
            FittedState::Smo(m) => m.predict(x),
            FittedState::Tree(t) => t.predict(x),
            FittedState::Forest(f) => f.predict(x),
        }
    }

    pub fn predict_matrix(&self, m: &FeatureMatrix) -> Result<Vec<f64>> {
        if m.set() != self.feature_set {
            return Err(Error::FeatureSetMismatch {
                expected: self.feature_set.label().into(),
                found: m.set().label().into(),
            });
        }
        Ok(m.rows().iter().map(|r| self.predict_row(r)).collect())
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let file = ModelFile {
            format: "botshare-model".into(),
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        serde_json::to_writer(w, &file)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let file: ModelFile = serde_json::from_reader(r)
            .map_err(|e| Error::ModelFormat(format!("unreadable model: {e}")))?;
        if file.format != "botshare-model" {
            return Err(Error::ModelFormat(format!("unexpected format {:?}", file.format)));
        }
        if file.version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "format version {} (this build reads {MODEL_FORMAT_VERSION})",
                file.version
            )));
        }
        let model = file.model;
        let expected: Vec<String> = model
            .feature_set
            .names()
            .iter()
            .map(|s| s.to_string())
            .collect();
        if model.feature_names != expected {
            return Err(Error::ModelFormat(format!(
                "feature names do not match the {} layout",
                model.feature_set.label()
            )));
        }
        model.spec.check()?;
        let mut model = model;
        if let FittedState::Lwl(m) = &mut model.state {
            m.rebuild_index();
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_json(&mut buf)?;
        crate::write_atomic(path, &buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_json(std::io::BufReader::new(f))
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TrainedModel,
}

/// Fits a min/max scaler and returns the scaled rows.
pub(crate) fn scale(rows: &[Vec<f64>]) -> Result<(ColumnScaler, Vec<Vec<f64>>)> {
    let scaler = ColumnScaler::fit(rows)?;
    let scaled = scaler.transform_rows(rows);
    Ok((scaler, scaled))
}

/// Per-fit seed for a stochastic spec evaluated at `(repeat, fold)`.
pub fn fold_seed(seed: u64, repeat: usize, fold: usize) -> u64 {
    derive_seed(derive_seed(seed, repeat as u64), fold as u64)
}
