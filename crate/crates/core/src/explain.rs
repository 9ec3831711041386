//! Permutation-sampling Shapley attributions and global importance.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::reservoir_sample;
use crate::models::TrainedModel;
use crate::stats::spearman_rho;
use crate::table::FeatureTable;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("instance has {got} features, model expects {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("attribution sets disagree on feature names")]
    MixedSchemas,
    #[error("background sample is empty")]
    EmptyBackground,
    #[error("no attribution sets given")]
    NoAttributions,
    #[error("n_samples must be positive")]
    NoSamples,
    #[error("cannot write {path}: {source}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Anything mapping a feature vector to a probability.
pub trait Predictor: Sync {
    fn n_features(&self) -> usize;
    fn proba(&self, x: &[f64]) -> f64;
}

impl Predictor for TrainedModel {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn proba(&self, x: &[f64]) -> f64 {
        self.predict_proba(x).expect("width checked before attribution")
    }
}

/// Wraps a closure as a [`Predictor`].
pub struct FnPredictor<F> {
    pub n_features: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Predictor for FnPredictor<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn proba(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionSet {
    pub instance_id: String,
    pub feature_names: Vec<String>,
    pub values: Vec<f64>,
    pub phi: Vec<f64>,
    /// Mean model output over the background rows.
    pub baseline: f64,
    pub output: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl AttributionSet {
    /// `|sum(phi) - (output - baseline)|`.
    pub fn efficiency_gap(&self) -> f64 {
        (self.phi.iter().sum::<f64>() - (self.output - self.baseline)).abs()
    }
}

/// Monte Carlo Shapley values over `n_samples` feature orderings.
///
/// Orderings are split as evenly as possible across the background rows. Each
/// ordering walks from its background row to the instance one feature at a
/// time, crediting each feature with the change in output; phi is the mean
/// over rows of the per-row mean credit. A row's orderings are drawn in blocks
/// of `2p`: the `p` rotations of a random permutation and their reversals, so
/// each feature visits each position equally often within a block.
///
/// Per-row credits sum to `output - f(row)`, so whenever `n_samples >= m`
/// the attributions sum to `output - baseline` up to rounding.
pub fn shapley<P: Predictor + ?Sized>(
    model: &P,
    instance_id: &str,
    feature_names: &[String],
    instance: &[f64],
    background: &[Vec<f64>],
    n_samples: usize,
    seed: u64,
) -> Result<AttributionSet, ExplainError> {
    let p = model.n_features();
    if instance.len() != p || feature_names.len() != p {
        return Err(ExplainError::SchemaMismatch {
            expected: p,
            got: instance.len(),
        });
    }
    if background.is_empty() {
        return Err(ExplainError::EmptyBackground);
    }
    if let Some(bad) = background.iter().find(|b| b.len() != p) {
        return Err(ExplainError::SchemaMismatch {
            expected: p,
            got: bad.len(),
        });
    }
    if n_samples == 0 {
        return Err(ExplainError::NoSamples);
    }
    let m = background.len();
    let used = m.min(n_samples);
    let per_row: Vec<Vec<f64>> = (0..used)
        .into_par_iter()
        .map(|r| {
            let count = n_samples / m + usize::from(r < n_samples % m);
            row_credit(model, instance, &background[r], count, seed, r as u64)
        })
        .collect();
    let mut phi = vec![0.0; p];
    for row in &per_row {
        for (acc, v) in phi.iter_mut().zip(row) {
            *acc += v;
        }
    }
    for v in &mut phi {
        *v /= used as f64;
    }
    let baseline = background.iter().map(|b| model.proba(b)).sum::<f64>() / background.len() as f64;
    Ok(AttributionSet {
        instance_id: instance_id.to_string(),
        feature_names: feature_names.to_vec(),
        values: instance.to_vec(),
        phi,
        baseline,
        output: model.proba(instance),
        n_samples,
        seed,
    })
}

fn row_credit<P: Predictor + ?Sized>(
    model: &P,
    instance: &[f64],
    row: &[f64],
    count: usize,
    seed: u64,
    stream: u64,
) -> Vec<f64> {
    let p = instance.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut sigma: Vec<usize> = (0..p).collect();
    let mut order = sigma.clone();
    let mut credit = vec![0.0; p];
    let mut z = vec![0.0; p];
    for t in 0..count {
        let k = t % (2 * p.max(1));
        if k == 0 {
            sigma.shuffle(&mut rng);
        }
        order.copy_from_slice(&sigma);
        order.rotate_left(k / 2);
        if k % 2 == 1 {
            order.reverse();
        }
        z.copy_from_slice(row);
        let mut prev = model.proba(&z);
        for &j in &order {
            z[j] = instance[j];
            let cur = model.proba(&z);
            credit[j] += cur - prev;
            prev = cur;
        }
    }
    for v in &mut credit {
        *v /= count as f64;
    }
    credit
}

/// Attributions for every row of `instances`, in row order. Row `i` uses
/// seed `seed + i`.
pub fn shapley_table<P: Predictor + ?Sized>(
    model: &P,
    instances: &FeatureTable,
    ids: &[String],
    background: &[Vec<f64>],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<AttributionSet>, ExplainError> {
    (0..instances.len())
        .into_par_iter()
        .map(|i| {
            shapley(
                model,
                &ids[i],
                instances.names(),
                instances.row(i),
                background,
                n_samples,
                seed.wrapping_add(i as u64),
            )
        })
        .collect()
}

/// `n` rows drawn without replacement with a fixed seed.
pub fn background_sample(table: &FeatureTable, n: usize, seed: u64) -> Vec<Vec<f64>> {
    reservoir_sample(table.rows(), n, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_abs_phi: f64,
    /// 1 is most important.
    pub rank: usize,
    /// Spearman correlation of feature value with its attribution.
    pub direction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalImportance {
    /// Ordered by rank.
    pub features: Vec<FeatureImportance>,
}

pub fn global_importance(sets: &[AttributionSet]) -> Result<GlobalImportance, ExplainError> {
    let first = sets.first().ok_or(ExplainError::NoAttributions)?;
    if sets.iter().any(|s| s.feature_names != first.feature_names) {
        return Err(ExplainError::MixedSchemas);
    }
    let n = sets.len() as f64;
    let mut features: Vec<FeatureImportance> = first
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let phi: Vec<f64> = sets.iter().map(|s| s.phi[j]).collect();
            let values: Vec<f64> = sets.iter().map(|s| s.values[j]).collect();
            let direction = if sets.len() >= 3 {
                spearman_rho(&values, &phi).ok().map(|r| r.rho)
            } else {
                None
            };
            FeatureImportance {
                feature: name.clone(),
                mean_abs_phi: phi.iter().map(|v| v.abs()).sum::<f64>() / n,
                rank: 0,
                direction,
            }
        })
        .collect();
    features.sort_by(|a, b| {
        b.mean_abs_phi
            .total_cmp(&a.mean_abs_phi)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    for (i, f) in features.iter_mut().enumerate() {
        f.rank = i + 1;
    }
    Ok(GlobalImportance { features })
}

#[derive(Serialize)]
struct ImportanceEntry {
    mean_abs_phi: f64,
    rank: usize,
    direction: Option<f64>,
}

impl GlobalImportance {
    /// `{feature: {mean_abs_phi, rank, direction}}`.
    pub fn to_json(&self) -> String {
        let map: BTreeMap<&str, ImportanceEntry> = self
            .features
            .iter()
            .map(|f| {
                (
                    f.feature.as_str(),
                    ImportanceEntry {
                        mean_abs_phi: f.mean_abs_phi,
                        rank: f.rank,
                        direction: f.direction,
                    },
                )
            })
            .collect();
        serde_json::to_string_pretty(&map).expect("importance serializes")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// `feature,instance_id,feature_value,phi`, most important feature first,
/// then by instance id.
pub fn violin_csv(sets: &[AttributionSet], importance: &GlobalImportance) -> String {
    let mut out = String::from("feature,instance_id,feature_value,phi\n");
    let mut by_id: Vec<&AttributionSet> = sets.iter().collect();
    by_id.sort_by(|a, b| a.instance_id.cmp(&b.instance_id));
    for f in &importance.features {
        let Some(j) = sets.first().and_then(|s| s.feature_names.iter().position(|n| *n == f.feature)) else {
            continue;
        };
        for s in &by_id {
            out.push_str(&format!(
                "{},{},{},{}\n",
                csv_field(&f.feature),
                csv_field(&s.instance_id),
                s.values[j],
                s.phi[j]
            ));
        }
    }
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

pub const SVG_BAR_MAX: f64 = 400.0;
const SVG_LABEL_WIDTH: f64 = 240.0;
const SVG_ROW: f64 = 24.0;

/// Horizontal bars of mean |phi|, longest = [`SVG_BAR_MAX`] pixels.
pub fn importance_svg(importance: &GlobalImportance) -> String {
    let max = importance
        .features
        .iter()
        .map(|f| f.mean_abs_phi)
        .fold(0.0, f64::max);
    let height = SVG_ROW * importance.features.len() as f64 + 16.0;
    let width = SVG_LABEL_WIDTH + SVG_BAR_MAX + 100.0;
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" font-family=\"sans-serif\" font-size=\"12\">\n"
    );
    for (i, f) in importance.features.iter().enumerate() {
        let y = 8.0 + SVG_ROW * i as f64;
        let len = if max > 0.0 { f.mean_abs_phi / max * SVG_BAR_MAX } else { 0.0 };
        let name = xml_escape(&f.feature);
        out.push_str(&format!(
            "  <text x=\"{:.0}\" y=\"{:.1}\" text-anchor=\"end\">{name}</text>\n",
            SVG_LABEL_WIDTH - 8.0,
            y + 14.0
        ));
        out.push_str(&format!(
            "  <rect x=\"{SVG_LABEL_WIDTH:.0}\" y=\"{y:.1}\" width=\"{len:.2}\" height=\"18\" fill=\"#3b75af\" data-feature=\"{name}\" data-value=\"{}\"/>\n",
            f.mean_abs_phi
        ));
        out.push_str(&format!(
            "  <text x=\"{:.2}\" y=\"{:.1}\">{:.4}</text>\n",
            SVG_LABEL_WIDTH + len + 6.0,
            y + 14.0,
            f.mean_abs_phi
        ));
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolinFiles {
    pub csv: PathBuf,
    pub svg: PathBuf,
    pub json: PathBuf,
}

/// Writes `violin.csv`, `importance.svg` and `importance.json` into `dir`.
pub fn emit_violin_data(sets: &[AttributionSet], dir: &Path) -> Result<ViolinFiles, ExplainError> {
    let importance = global_importance(sets)?;
    let write = |name: &str, body: String| -> Result<PathBuf, ExplainError> {
        let path = dir.join(name);
        fs::create_dir_all(dir)
            .and_then(|_| fs::write(&path, body))
            .map_err(|source| ExplainError::IoFailure {
                path: path.clone(),
                source,
            })?;
        Ok(path)
    };
    Ok(ViolinFiles {
        csv: write("violin.csv", violin_csv(sets, &importance))?,
        svg: write("importance.svg", importance_svg(&importance))?,
        json: write("importance.json", importance.to_json())?,
    })
}
