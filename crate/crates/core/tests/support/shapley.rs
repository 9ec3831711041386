//! Shapley property checks shared by the explain tests and the acceptance run.
//! Each returns the worst deviation seen.

use detect_core::explain::{background_sample, shapley, shapley_table, FnPredictor, Predictor};
use detect_core::models::{train, Hyperparameters, ModelKind};
use detect_core::table::FeatureTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::data::names;

pub const PERMUTATIONS: usize = 2000;

/// Kinds whose fitted function treats identical columns identically.
pub const SYMMETRIC_KINDS: [ModelKind; 3] = [ModelKind::Logistic, ModelKind::SvmLinear, ModelKind::Knn];

pub fn random_rows(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..p).map(|_| rng.random_range(-3.0..3.0)).collect()).collect()
}

/// Three informative features plus noise in the label.
pub fn training_set(n: usize, seed: u64) -> (FeatureTable, Vec<bool>) {
    let rows = random_rows(n, 3, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xff);
    let y = rows
        .iter()
        .map(|r| r[0] - 0.5 * r[1] + r[0] * r[2] * 0.3 + rng.random_range(-1.0..1.0) > 0.0)
        .collect();
    (FeatureTable::new(names(3), rows).unwrap(), y)
}

/// Largest |sum phi - (f(x) - baseline)| over 50 instances.
pub fn efficiency(kind: ModelKind) -> f64 {
    let (t, y) = training_set(300, 1);
    let bg = background_sample(&t, 100, 7);
    let instances = t.subset_rows(&(0..50).collect::<Vec<_>>());
    let ids: Vec<String> = (0..50).map(|i| format!("i{i:02}")).collect();
    let m = train(kind, &t, &y, &Hyperparameters::new(), 3).unwrap();
    let sets = shapley_table(&m, &instances, &ids, &bg, PERMUTATIONS, 11).unwrap();
    sets.iter().map(|s| s.efficiency_gap()).fold(0.0, f64::max)
}

/// Largest |phi| of a feature that was constant during training.
pub fn dummy(kind: ModelKind) -> f64 {
    let rows: Vec<Vec<f64>> = random_rows(200, 2, 4).into_iter().map(|r| vec![r[0], r[1], 1.0]).collect();
    let y: Vec<bool> = rows.iter().map(|r| r[0] + r[1] > 0.0).collect();
    let t = FeatureTable::new(names(3), rows).unwrap();
    let probe = random_rows(60, 3, 5);
    let m = train(kind, &t, &y, &Hyperparameters::new(), 0).unwrap();
    probe[..10]
        .iter()
        .enumerate()
        .map(|(i, x)| shapley(&m, "x", &names(3), x, &probe[10..], PERMUTATIONS, i as u64).unwrap().phi[2].abs())
        .fold(0.0, f64::max)
}

fn duplicated() -> (FeatureTable, Vec<bool>) {
    let base = random_rows(300, 2, 8);
    let rows: Vec<Vec<f64>> = base.iter().map(|r| vec![r[0], r[0], r[1]]).collect();
    let y: Vec<bool> = base.iter().map(|r| 2.0 * r[0] - r[1] > 0.0).collect();
    (FeatureTable::new(names(3), rows).unwrap(), y)
}

fn symmetry_gap(model: &dyn Predictor, t: &FeatureTable) -> f64 {
    let bg = background_sample(t, 100, 2);
    (0..10)
        .map(|i| {
            let s = shapley(model, "x", &names(3), t.row(i), &bg, PERMUTATIONS, i as u64).unwrap();
            (s.phi[0] - s.phi[1]).abs()
        })
        .fold(0.0, f64::max)
}

/// Largest |phi_0 - phi_1| for two identical columns.
pub fn symmetry(kind: ModelKind) -> f64 {
    let (t, y) = duplicated();
    let m = train(kind, &t, &y, &Hyperparameters::new(), 0).unwrap();
    symmetry_gap(&m, &t)
}

/// Same check on a smooth function symmetric in its first two inputs.
pub fn symmetry_smooth() -> f64 {
    let (t, _) = duplicated();
    let smooth = FnPredictor {
        n_features: 3,
        f: |x: &[f64]| 1.0 / (1.0 + (-(x[0] * x[1] + x[2])).exp()),
    };
    symmetry_gap(&smooth, &t)
}

/// Largest |phi - (f(x) - E f)| for a one-feature logistic model.
pub fn single_feature_logistic() -> f64 {
    let rows = random_rows(200, 1, 12);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let y: Vec<bool> = rows.iter().map(|r| r[0] + rng.random_range(-1.0..1.0) > 0.0).collect();
    let t = FeatureTable::new(names(1), rows.clone()).unwrap();
    let m = train(ModelKind::Logistic, &t, &y, &Hyperparameters::new(), 0).unwrap();
    let bg = background_sample(&t, 40, 1);
    let baseline = bg.iter().map(|b| m.proba(b)).sum::<f64>() / bg.len() as f64;
    let mut worst: f64 = 0.0;
    for (i, x) in rows[..20].iter().enumerate() {
        for n in [40, 41, 97, PERMUTATIONS] {
            let s = shapley(&m, "x", &names(1), x, &bg, n, i as u64).unwrap();
            worst = worst.max((s.phi[0] - (m.proba(x) - baseline)).abs());
        }
    }
    worst
}
