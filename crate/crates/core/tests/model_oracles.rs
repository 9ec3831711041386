mod support;

use detect_core::models::{
    auc_roc, evaluate_cv, evaluate_cv_detailed, fit_standardization, prune_features, train, Hyperparameters,
    ModelKind,
};
use detect_core::stats::{compare_features, ComparisonConfig, Magnitude};
use detect_core::table::FeatureTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::data::{names, separable, shuffled};
use support::rank::pair_count_auc;
use support::effects::{folded, matrices, published, Level, CLASS_KEPT, FUNCTION_KEPT};

fn none() -> Hyperparameters {
    Hyperparameters::new()
}

#[test]
fn single_feature_separable_training_accuracy() {
    let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![if i < 25 { i as f64 } else { i as f64 + 25.0 }]).collect();
    let y: Vec<bool> = (0..60).map(|i| i >= 25).collect();
    let t = FeatureTable::new(names(1), rows).unwrap();
    for kind in ModelKind::ALL {
        let m = train(kind, &t, &y, &none(), 1).unwrap();
        let probs = m.predict_table(&t).unwrap();
        assert!(probs.iter().zip(&y).all(|(p, l)| (*p >= 0.5) == *l), "{kind}");
    }
}

#[test]
fn separable_and_null_cross_validation() {
    let (t, y) = separable(1000, 4);
    let null = shuffled(&y, 9);
    for kind in ModelKind::ALL {
        let r = evaluate_cv(kind, &t, &y, &none(), 10, 42).unwrap();
        assert!(r.aggregate.auc_roc >= 0.99, "{kind}: {}", r.aggregate.auc_roc);
        let r = evaluate_cv(kind, &t, &null, &none(), 10, 42).unwrap();
        assert!((0.45..=0.55).contains(&r.aggregate.auc_roc), "{kind}: {}", r.aggregate.auc_roc);
    }
}

#[test]
fn perfectly_separable_scores_one() {
    let rows: Vec<Vec<f64>> = (0..100)
        .map(|i| vec![if i < 50 { i as f64 } else { i as f64 + 100.0 }, (i % 7) as f64])
        .collect();
    let y: Vec<bool> = (0..100).map(|i| i >= 50).collect();
    let t = FeatureTable::new(names(2), rows).unwrap();
    for kind in ModelKind::ALL {
        let s = evaluate_cv(kind, &t, &y, &none(), 10, 1).unwrap().aggregate;
        assert_eq!((s.precision, s.recall, s.accuracy, s.f1, s.auc_roc), (1.0, 1.0, 1.0, 1.0, 1.0), "{kind}");
    }
}

#[test]
fn auc_matches_pair_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let scores: Vec<f64> = (0..200).map(|_| (rng.random_range(0..50) as f64) / 49.0).collect();
        let labels: Vec<bool> = (0..200).map(|_| rng.random_bool(0.5)).collect();
        let got = auc_roc(&scores, &labels).unwrap();
        assert!((got - pair_count_auc(&scores, &labels)).abs() < 1e-12);
    }
}

#[test]
fn report_invariants() {
    let (t, y) = separable(300, 2);
    let noisy = shuffled(&y, 3);
    let mixed: Vec<bool> = y.iter().zip(&noisy).enumerate().map(|(i, (a, b))| if i % 3 == 0 { *b } else { *a }).collect();
    let r = evaluate_cv(ModelKind::Logistic, &t, &mixed, &none(), 10, 5).unwrap();
    assert_eq!(r.folds.len(), 10);
    for f in &r.folds {
        let c = f.confusion;
        let s = f.scores;
        assert_eq!(s.accuracy, (c.tp + c.tn) as f64 / (c.tp + c.fp + c.tn + c.fn_) as f64);
        if s.precision > 0.0 && s.recall > 0.0 {
            assert!((s.f1 - 2.0 * s.precision * s.recall / (s.precision + s.recall)).abs() < 1e-9);
        }
    }
    assert_eq!(r.folds_csv().lines().count(), 11);
}

#[test]
fn cross_validation_is_deterministic() {
    let (t, y) = separable(200, 8);
    for kind in ModelKind::ALL {
        let a = evaluate_cv_detailed(kind, &t, &y, &none(), 5, 3).unwrap();
        let b = evaluate_cv_detailed(kind, &t, &y, &none(), 5, 3).unwrap();
        assert_eq!(a.report.to_json(), b.report.to_json());
        for (ma, mb) in a.models.iter().zip(&b.models) {
            assert_eq!(ma.to_json(), mb.to_json());
        }
    }
}

#[test]
fn fold_standardization_uses_training_rows_only() {
    let (t, y) = separable(200, 6);
    let base = evaluate_cv_detailed(ModelKind::Logistic, &t, &y, &none(), 10, 1).unwrap();
    let victim = base.assignment.iter().position(|&f| f == 0).unwrap();
    let mut rows = t.rows().to_vec();
    rows[victim][0] = 1e6;
    let poisoned = FeatureTable::new(t.names().to_vec(), rows.clone()).unwrap();
    let after = evaluate_cv_detailed(ModelKind::Logistic, &poisoned, &y, &none(), 10, 1).unwrap();
    assert_eq!(base.models[0], after.models[0]);
    for fold in 0..10 {
        let train_rows: Vec<Vec<f64>> = (0..rows.len()).filter(|&i| after.assignment[i] != fold).map(|i| rows[i].clone()).collect();
        assert_eq!(after.models[fold].standardization, fit_standardization(&train_rows));
    }
}

#[test]
fn boosting_ignores_a_duplicated_column() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let xs: Vec<f64> = (0..150).map(|_| rng.random_range(0.0..10.0)).collect();
    let y: Vec<bool> = xs.iter().map(|x| *x + rng.random_range(-2.0..2.0) > 5.0).collect();
    let single = FeatureTable::new(names(1), xs.iter().map(|x| vec![*x]).collect()).unwrap();
    let double = FeatureTable::new(names(2), xs.iter().map(|x| vec![*x, *x]).collect()).unwrap();
    let a = train(ModelKind::GradientBoosting, &single, &y, &none(), 5).unwrap();
    let b = train(ModelKind::GradientBoosting, &double, &y, &none(), 5).unwrap();
    for x in (0..100).map(|i| i as f64 / 10.0) {
        assert_eq!(a.predict_proba(&[x]).unwrap(), b.predict_proba(&[x, x]).unwrap());
    }
}

#[test]
fn boosting_is_monotone_in_a_monotone_feature() {
    let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 20.0]).collect();
    let y: Vec<bool> = (0..200).map(|i| i > 90).collect();
    let t = FeatureTable::new(names(1), rows).unwrap();
    let m = train(ModelKind::GradientBoosting, &t, &y, &none(), 0).unwrap();
    let grid: Vec<f64> = (0..=100).map(|i| m.predict_proba(&[i as f64 / 10.0]).unwrap()).collect();
    assert!(grid.windows(2).all(|w| w[1] >= w[0] - 1e-12), "{grid:?}");
}

#[test]
fn mismatched_schema_is_rejected() {
    let (t, y) = separable(50, 1);
    let m = train(ModelKind::Knn, &t, &y, &none(), 0).unwrap();
    assert!(m.predict_proba(&[1.0, 2.0, 3.0]).is_err());
    let other = FeatureTable::new(vec!["a".into(), "b".into()], vec![vec![0.0, 0.0]]).unwrap();
    assert!(m.predict_table(&other).is_err());
}

fn pooled(level: Level) -> (FeatureTable, Vec<detect_core::stats::FeatureComparison>) {
    let (h, l) = matrices(level, 500);
    let cmp = compare_features(&h, &l, &ComparisonConfig::default()).unwrap();
    (h.concat(&l).unwrap(), cmp)
}

#[test]
fn fixture_reproduces_published_effects() {
    for (level, significant) in [(Level::Function, 9), (Level::Class, 6)] {
        let (_, cmp) = pooled(level);
        for c in &cmp {
            let (mag, dir) = published(level, &c.feature);
            assert_eq!((c.magnitude, c.direction), (mag, dir), "{level:?} {}", c.feature);
            assert_eq!(c.significant, mag != Magnitude::Negligible);
        }
        assert_eq!(cmp.iter().filter(|c| c.significant).count(), significant);
    }
}

#[test]
fn pruning_keeps_the_published_feature_sets() {
    for (level, want) in [(Level::Function, &FUNCTION_KEPT[..]), (Level::Class, &CLASS_KEPT[..])] {
        let (table, cmp) = pooled(level);
        let r = prune_features(&table, &cmp).unwrap();
        assert_eq!(folded(&r.kept), folded(want), "{level:?}");
        assert!(r.dropped_correlated.iter().all(|d| d.rho.abs() >= 0.8));
        assert!(r.kept.iter().all(|k| !r.dropped_negligible.contains(k)));

        let again_table = table.select(&r.kept).unwrap();
        let again_cmp: Vec<_> = r.kept.iter().map(|k| cmp.iter().find(|c| &c.feature == k).unwrap().clone()).collect();
        let again = prune_features(&again_table, &again_cmp).unwrap();
        assert_eq!(again.kept, r.kept);
        assert!(again.dropped_correlated.is_empty() && again.dropped_negligible.is_empty());
    }
}
