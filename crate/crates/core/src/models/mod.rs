//! Classifiers trained from scratch on standardized metric features:
//! logistic regression, k-nearest neighbours, a linear SVM, a random forest
//! and gradient-boosted trees.

mod cv;
mod linear;
mod prune;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::FeatureTable;
use tree::{Builder, Objective, Tree, TreeParams};

pub use cv::{
    auc_roc, evaluate_cv, evaluate_cv_detailed, f1_score, stratified_folds, Confusion, CvOutcome, EvalReport,
    FoldReport, Scores,
};
pub use linear::sigmoid;
pub use prune::{prune_features, CorrelatedDrop, PruneReport};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("non-finite value in row {row}, column {column}")]
    NonFiniteFeature { row: usize, column: usize },
    #[error("feature schema mismatch: expected {expected:?}, got {got:?}")]
    SchemaMismatch { expected: Vec<String>, got: Vec<String> },
    #[error("vector has {got} values, model expects {expected}")]
    WrongWidth { expected: usize, got: usize },
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("too few samples: {0}")]
    TooFewSamples(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("unknown model kind {0:?}")]
    UnknownKind(String),
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Logistic,
    Knn,
    SvmLinear,
    RandomForest,
    GradientBoosting,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Logistic,
        ModelKind::Knn,
        ModelKind::SvmLinear,
        ModelKind::RandomForest,
        ModelKind::GradientBoosting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Logistic => "logistic",
            ModelKind::Knn => "knn",
            ModelKind::SvmLinear => "svm-linear",
            ModelKind::RandomForest => "random-forest",
            ModelKind::GradientBoosting => "gradient-boosting",
        }
    }

    pub fn default_hyperparameters(self) -> Hyperparameters {
        let pairs: &[(&str, f64)] = match self {
            ModelKind::Logistic => &[("l2", 1e-3), ("epochs", 500.0), ("learning_rate", 0.5)],
            ModelKind::Knn => &[("k", 5.0)],
            ModelKind::SvmLinear => &[("l2", 1e-3), ("epochs", 50.0)],
            ModelKind::RandomForest => &[("n_trees", 100.0), ("max_depth", 12.0), ("min_samples_leaf", 1.0)],
            ModelKind::GradientBoosting => &[
                ("n_trees", 200.0),
                ("max_depth", 3.0),
                ("learning_rate", 0.1),
                ("l2", 1.0),
                ("min_samples_leaf", 1.0),
            ],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, ModelError> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| ModelError::UnknownKind(s.to_string()))
    }
}

pub type Hyperparameters = BTreeMap<String, f64>;

/// Defaults for `kind` with `overrides` applied; unknown names are rejected.
pub fn resolve_hyperparameters(kind: ModelKind, overrides: &Hyperparameters) -> Result<Hyperparameters, ModelError> {
    let mut h = kind.default_hyperparameters();
    for (k, v) in overrides {
        if !h.contains_key(k) {
            return Err(ModelError::InvalidHyperparameter(format!("{kind} has no {k:?}")));
        }
        if !v.is_finite() || *v < 0.0 {
            return Err(ModelError::InvalidHyperparameter(format!("{k} = {v}")));
        }
        h.insert(k.clone(), *v);
    }
    Ok(h)
}

fn count(h: &Hyperparameters, key: &str) -> Result<usize, ModelError> {
    let v = h[key];
    if v < 1.0 || v.fract() != 0.0 {
        return Err(ModelError::InvalidHyperparameter(format!("{key} must be a positive integer, got {v}")));
    }
    Ok(v as usize)
}

/// Per-feature z-scoring fitted on training rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

pub fn fit_standardization(rows: &[Vec<f64>]) -> Vec<Standardization> {
    let p = rows.first().map_or(0, Vec::len);
    let n = rows.len().max(1) as f64;
    (0..p)
        .map(|j| {
            let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
            Standardization { mean, std: var.sqrt() }
        })
        .collect()
}

/// Constant features (zero spread) map to 0.
pub fn standardize(stats: &[Standardization], x: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(stats)
        .map(|(v, s)| if s.std > 0.0 { (v - s.mean) / s.std } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Parameters {
    Logistic {
        weights: Vec<f64>,
        bias: f64,
    },
    Knn {
        k: usize,
        rows: Vec<Vec<f64>>,
        labels: Vec<bool>,
    },
    SvmLinear {
        weights: Vec<f64>,
        bias: f64,
        platt_a: f64,
        platt_b: f64,
    },
    RandomForest {
        trees: Vec<Tree>,
    },
    GradientBoosting {
        base_score: f64,
        learning_rate: f64,
        trees: Vec<Tree>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format_version: u32,
    pub kind: ModelKind,
    pub hyperparameters: Hyperparameters,
    pub feature_names: Vec<String>,
    pub standardization: Vec<Standardization>,
    pub parameters: Parameters,
    pub seed: u64,
}

fn check_training(rows: &FeatureTable, labels: &[bool]) -> Result<(), ModelError> {
    if rows.len() != labels.len() {
        return Err(ModelError::LabelCount {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    if !labels.iter().any(|l| *l) || labels.iter().all(|l| *l) {
        return Err(ModelError::DegenerateLabels);
    }
    for (row, r) in rows.rows().iter().enumerate() {
        if let Some(column) = r.iter().position(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteFeature { row, column });
        }
    }
    Ok(())
}

fn tree_stream(seed: u64, tree: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree);
    rng
}

fn fit_forest(rows: &[Vec<f64>], y: &[bool], h: &Hyperparameters, seed: u64) -> Result<Vec<Tree>, ModelError> {
    use rand::Rng;
    let n_trees = count(h, "n_trees")?;
    let max_depth = h["max_depth"] as usize;
    let min_leaf = h["min_samples_leaf"].max(1.0);
    let p = rows[0].len();
    let max_features = ((p as f64).sqrt().floor() as usize).max(1);
    let n = rows.len();
    Ok((0..n_trees as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = tree_stream(seed, t);
            let mut weight = vec![0.0; n];
            for _ in 0..n {
                weight[rng.random_range(0..n)] += 1.0;
            }
            let stats: Vec<[f64; 2]> = weight
                .iter()
                .zip(y)
                .map(|(&w, &t)| [w, if t { w } else { 0.0 }])
                .collect();
            let idx = (0..n).filter(|&i| weight[i] > 0.0).collect();
            Builder {
                rows,
                stats: &stats,
                weight: &weight,
                objective: Objective::Gini,
                params: TreeParams {
                    max_depth,
                    min_leaf,
                    max_features: Some(max_features),
                },
                rng,
            }
            .build(idx)
        })
        .collect())
}

fn fit_boosting(rows: &[Vec<f64>], y: &[bool], h: &Hyperparameters) -> Result<(f64, Vec<Tree>), ModelError> {
    let n_trees = count(h, "n_trees")?;
    let lr = h["learning_rate"];
    let max_depth = h["max_depth"] as usize;
    let min_leaf = h["min_samples_leaf"].max(1.0);
    let l2 = h["l2"];
    let n = rows.len();
    let pos = y.iter().filter(|v| **v).count() as f64;
    let base = (pos / (n as f64 - pos)).ln();
    let mut f = vec![base; n];
    let weight = vec![1.0; n];
    let mut trees = Vec::with_capacity(n_trees);
    for t in 0..n_trees {
        let stats: Vec<[f64; 2]> = f
            .iter()
            .zip(y)
            .map(|(fi, &yi)| {
                let p = sigmoid(*fi);
                [p * (1.0 - p), p - yi as u8 as f64]
            })
            .collect();
        let tree = Builder {
            rows,
            stats: &stats,
            weight: &weight,
            objective: Objective::Newton { l2 },
            params: TreeParams {
                max_depth,
                min_leaf,
                max_features: None,
            },
            rng: tree_stream(0, t as u64),
        }
        .build((0..n).collect());
        for (fi, x) in f.iter_mut().zip(rows) {
            *fi += lr * tree.predict(x);
        }
        trees.push(tree);
    }
    Ok((base, trees))
}

/// Fits a classifier; `labels[i]` is true for the positive (LLM) class.
pub fn train(
    kind: ModelKind,
    features: &FeatureTable,
    labels: &[bool],
    overrides: &Hyperparameters,
    seed: u64,
) -> Result<TrainedModel, ModelError> {
    check_training(features, labels)?;
    let hyperparameters = resolve_hyperparameters(kind, overrides)?;
    let h = &hyperparameters;
    let standardization = fit_standardization(features.rows());
    let rows: Vec<Vec<f64>> = features
        .rows()
        .iter()
        .map(|r| standardize(&standardization, r))
        .collect();
    let parameters = match kind {
        ModelKind::Logistic => {
            let (weights, bias) = linear::fit_logistic(&rows, labels, h["l2"], count(h, "epochs")?, h["learning_rate"]);
            Parameters::Logistic { weights, bias }
        }
        ModelKind::Knn => {
            let k = count(h, "k")?;
            if k > rows.len() {
                return Err(ModelError::TooFewSamples(format!("k = {k} exceeds {} rows", rows.len())));
            }
            Parameters::Knn {
                k,
                rows,
                labels: labels.to_vec(),
            }
        }
        ModelKind::SvmLinear => {
            if h["l2"] <= 0.0 {
                return Err(ModelError::InvalidHyperparameter("l2 must be positive".into()));
            }
            let (weights, bias) = linear::fit_svm(&rows, labels, h["l2"], count(h, "epochs")?, seed);
            let scores: Vec<f64> = rows.iter().map(|x| linear::linear_score(&weights, bias, x)).collect();
            let (platt_a, platt_b) = linear::fit_platt(&scores, labels);
            Parameters::SvmLinear {
                weights,
                bias,
                platt_a,
                platt_b,
            }
        }
        ModelKind::RandomForest => Parameters::RandomForest {
            trees: fit_forest(&rows, labels, h, seed)?,
        },
        ModelKind::GradientBoosting => {
            let (base_score, trees) = fit_boosting(&rows, labels, h)?;
            Parameters::GradientBoosting {
                base_score,
                learning_rate: h["learning_rate"],
                trees,
            }
        }
    };
    Ok(TrainedModel {
        format_version: FORMAT_VERSION,
        kind,
        hyperparameters,
        feature_names: features.names().to_vec(),
        standardization,
        parameters,
        seed,
    })
}

fn knn_vote(k: usize, rows: &[Vec<f64>], labels: &[bool], x: &[f64]) -> f64 {
    let mut d: Vec<(f64, usize)> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| (r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum(), i))
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, cmp);
    }
    let votes = d[..k].iter().filter(|(_, i)| labels[*i]).count();
    votes as f64 / k as f64
}

impl TrainedModel {
    /// Probability of the positive class for an already-validated vector.
    fn proba_unchecked(&self, x: &[f64]) -> f64 {
        let z = standardize(&self.standardization, x);
        let p = match &self.parameters {
            Parameters::Logistic { weights, bias } => sigmoid(linear::linear_score(weights, *bias, &z)),
            Parameters::Knn { k, rows, labels } => knn_vote(*k, rows, labels, &z),
            Parameters::SvmLinear {
                weights,
                bias,
                platt_a,
                platt_b,
            } => linear::platt_probability(*platt_a, *platt_b, linear::linear_score(weights, *bias, &z)),
            Parameters::RandomForest { trees } => {
                trees.iter().map(|t| t.predict(&z)).sum::<f64>() / trees.len().max(1) as f64
            }
            Parameters::GradientBoosting {
                base_score,
                learning_rate,
                trees,
            } => sigmoid(base_score + learning_rate * trees.iter().map(|t| t.predict(&z)).sum::<f64>()),
        };
        p.clamp(0.0, 1.0)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.feature_names.len() {
            return Err(ModelError::WrongWidth {
                expected: self.feature_names.len(),
                got: x.len(),
            });
        }
        Ok(self.proba_unchecked(x))
    }

    /// Hard label at the 0.5 threshold.
    pub fn predict(&self, x: &[f64]) -> Result<bool, ModelError> {
        Ok(self.predict_proba(x)? >= 0.5)
    }

    /// Probabilities for every row; column names must match the model's.
    pub fn predict_table(&self, table: &FeatureTable) -> Result<Vec<f64>, ModelError> {
        if table.names() != self.feature_names.as_slice() {
            return Err(ModelError::SchemaMismatch {
                expected: self.feature_names.clone(),
                got: table.names().to_vec(),
            });
        }
        Ok(table.rows().iter().map(|r| self.proba_unchecked(r)).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let m: TrainedModel = serde_json::from_str(text)?;
        if m.format_version != FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(m.format_version));
        }
        Ok(m)
    }
}
