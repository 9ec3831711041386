//! Stratified k-fold cross-validation and classification metrics.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{train, Hyperparameters, ModelError, ModelKind, TrainedModel};
use crate::stats::average_ranks;
use crate::table::FeatureTable;

/// Fold index per sample. Each class is shuffled and dealt round-robin,
/// continuing from where the previous class stopped.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Result<Vec<usize>, ModelError> {
    if k < 2 {
        return Err(ModelError::TooFewSamples(format!("k must be at least 2, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut next = 0;
    for class in [false, true] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.len() < k {
            return Err(ModelError::TooFewSamples(format!(
                "class {} has {} members, need {k}",
                if class { "llm" } else { "human" },
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for i in members {
            fold[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(fold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Confusion {
    /// Positive means `p >= 0.5`.
    pub fn from_scores(probabilities: &[f64], labels: &[bool]) -> Confusion {
        let mut c = Confusion::default();
        for (&p, &y) in probabilities.iter().zip(labels) {
            match (p >= 0.5, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.tp + self.fp + self.tn + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        f1_score(self.precision(), self.recall())
    }
}

/// Harmonic mean; zero when both inputs are zero.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Area under the ROC curve as the normalized rank-sum statistic; tied
/// scores count one half. `None` unless both classes are present.
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let ranks = average_ranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, l)| **l).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Some(u / (pos as f64 * neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub auc_roc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub confusion: Confusion,
    pub scores: Scores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: ModelKind,
    pub k: usize,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub folds: Vec<FoldReport>,
    /// Mean over folds.
    pub aggregate: Scores,
}

impl EvalReport {
    pub fn folds_csv(&self) -> String {
        let mut out = String::from("fold,tp,fp,tn,fn,precision,recall,accuracy,f1,auc_roc\n");
        for f in &self.folds {
            let c = f.confusion;
            let s = f.scores;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                f.fold, c.tp, c.fp, c.tn, c.fn_, s.precision, s.recall, s.accuracy, s.f1, s.auc_roc
            ));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// The report together with the model fitted for each fold.
#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub report: EvalReport,
    pub models: Vec<TrainedModel>,
    pub assignment: Vec<usize>,
}

fn fold_seed(seed: u64, fold: usize) -> u64 {
    seed.wrapping_add((fold as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

pub fn evaluate_cv_detailed(
    kind: ModelKind,
    features: &FeatureTable,
    labels: &[bool],
    hyperparameters: &Hyperparameters,
    k: usize,
    seed: u64,
) -> Result<CvOutcome, ModelError> {
    if features.len() != labels.len() {
        return Err(ModelError::LabelCount {
            rows: features.len(),
            labels: labels.len(),
        });
    }
    let assignment = stratified_folds(labels, k, seed)?;
    let results: Vec<Result<(FoldReport, TrainedModel), ModelError>> = (0..k)
        .into_par_iter()
        .map(|fold| {
            let train_idx: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] != fold).collect();
            let test_idx: Vec<usize> = (0..labels.len()).filter(|&i| assignment[i] == fold).collect();
            let train_y: Vec<bool> = train_idx.iter().map(|&i| labels[i]).collect();
            let test_y: Vec<bool> = test_idx.iter().map(|&i| labels[i]).collect();
            let model = train(kind, &features.subset_rows(&train_idx), &train_y, hyperparameters, fold_seed(seed, fold))?;
            let probs = model.predict_table(&features.subset_rows(&test_idx))?;
            let confusion = Confusion::from_scores(&probs, &test_y);
            let scores = Scores {
                precision: confusion.precision(),
                recall: confusion.recall(),
                accuracy: confusion.accuracy(),
                f1: confusion.f1(),
                auc_roc: auc_roc(&probs, &test_y).expect("stratified folds hold both classes"),
            };
            Ok((FoldReport { fold, confusion, scores }, model))
        })
        .collect();
    let mut folds = Vec::with_capacity(k);
    let mut models = Vec::with_capacity(k);
    for r in results {
        let (f, m) = r?;
        folds.push(f);
        models.push(m);
    }
    let mean = |get: fn(&Scores) -> f64| folds.iter().map(|f| get(&f.scores)).sum::<f64>() / k as f64;
    let aggregate = Scores {
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        accuracy: mean(|s| s.accuracy),
        f1: mean(|s| s.f1),
        auc_roc: mean(|s| s.auc_roc),
    };
    Ok(CvOutcome {
        report: EvalReport {
            kind,
            k,
            seed,
            feature_names: features.names().to_vec(),
            folds,
            aggregate,
        },
        models,
        assignment,
    })
}

pub fn evaluate_cv(
    kind: ModelKind,
    features: &FeatureTable,
    labels: &[bool],
    hyperparameters: &Hyperparameters,
    k: usize,
    seed: u64,
) -> Result<EvalReport, ModelError> {
    evaluate_cv_detailed(kind, features, labels, hyperparameters, k, seed).map(|o| o.report)
}
