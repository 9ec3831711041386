use detect_core::table::FeatureTable;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

/// Two features, label = sign of their sum, with a margin around zero.
pub fn separable(n: usize, seed: u64) -> (FeatureTable, Vec<bool>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    while rows.len() < n {
        let a: f64 = rng.random_range(-3.0..3.0);
        let b: f64 = rng.random_range(-3.0..3.0);
        if (a + b).abs() < 0.3 {
            continue;
        }
        rows.push(vec![a, b]);
        labels.push(a + b > 0.0);
    }
    (FeatureTable::new(names(2), rows).unwrap(), labels)
}

pub fn shuffled(labels: &[bool], seed: u64) -> Vec<bool> {
    let mut out = labels.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}
