//! Synthetic human/LLM metric matrices whose per-feature effects follow the
//! published effect table, with two correlated pairs per level so that
//! pruning has something to remove.

use detect_core::metrics::FEATURE_NAMES;
use detect_core::stats::{Direction, Magnitude};
use detect_core::table::FeatureTable;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Function,
    Class,
}

use Direction::{HumanHigher as Up, LlmHigher as Down};
use Magnitude::{Medium, Negligible, Small};

/// (feature, function-level effect, class-level effect).
pub const PUBLISHED: [(&str, (Magnitude, Direction), (Magnitude, Direction)); 22] = [
    ("Average Lines", (Negligible, Down), (Small, Up)),
    ("Average Blank Lines", (Small, Down), (Small, Up)),
    ("Average Code Lines", (Small, Up), (Small, Up)),
    ("Average Comment Lines", (Medium, Down), (Negligible, Up)),
    ("Classes", (Negligible, Down), (Negligible, Down)),
    ("Executable Units", (Small, Down), (Negligible, Down)),
    ("Functions", (Negligible, Down), (Negligible, Down)),
    ("Lines", (Small, Down), (Negligible, Up)),
    ("Blank Lines", (Medium, Down), (Negligible, Up)),
    ("Code Lines", (Negligible, Up), (Negligible, Up)),
    ("Declarative Code Lines", (Negligible, Down), (Negligible, Up)),
    ("Executable Code Lines", (Negligible, Up), (Small, Up)),
    ("Comment Lines", (Medium, Down), (Negligible, Up)),
    ("Statements", (Negligible, Down), (Negligible, Up)),
    ("Declarative Statements", (Negligible, Down), (Negligible, Down)),
    ("Executable Statements", (Negligible, Up), (Negligible, Up)),
    ("Comment to Code Ratio", (Medium, Down), (Negligible, Down)),
    ("Max Nesting", (Negligible, Up), (Negligible, Up)),
    ("Cyclomatic Complexity", (Negligible, Down), (Negligible, Down)),
    ("Max Cyclomatic Complexity", (Negligible, Up), (Small, Up)),
    ("Average Cyclomatic Complexity", (Small, Up), (Small, Up)),
    ("Sum Cyclomatic Complexity", (Negligible, Up), (Negligible, Up)),
];

pub const FUNCTION_KEPT: [&str; 7] = [
    "Average Blank Lines",
    "Average Code Lines",
    "Average Comment Lines",
    "Average Cyclomatic Complexity",
    "Executable Units",
    "Lines",
    "Comment To Code Ratio",
];

pub const CLASS_KEPT: [&str; 4] = [
    "Average Blank Lines",
    "Executable Code Lines",
    "Average Cyclomatic Complexity",
    "Average Code Lines",
];

pub fn published(level: Level, feature: &str) -> (Magnitude, Direction) {
    let row = PUBLISHED.iter().find(|r| r.0 == feature).expect("known feature");
    match level {
        Level::Function => row.1,
        Level::Class => row.2,
    }
}

/// Target |d| per feature and the feature whose ordering it copies.
fn design(level: Level, feature: &str) -> (f64, Option<&'static str>) {
    let spec: &[(&str, f64, Option<&str>)] = match level {
        Level::Function => &[
            ("Average Comment Lines", 0.45, None),
            ("Comment to Code Ratio", 0.44, None),
            ("Comment Lines", 0.40, Some("Average Comment Lines")),
            ("Blank Lines", 0.38, Some("Comment to Code Ratio")),
            ("Average Blank Lines", 0.25, None),
            ("Average Code Lines", 0.24, None),
            ("Executable Units", 0.22, None),
            ("Lines", 0.21, None),
            ("Average Cyclomatic Complexity", 0.20, None),
        ],
        Level::Class => &[
            ("Average Code Lines", 0.30, None),
            ("Average Lines", 0.29, Some("Average Code Lines")),
            ("Executable Code Lines", 0.28, None),
            ("Average Cyclomatic Complexity", 0.27, None),
            ("Max Cyclomatic Complexity", 0.26, Some("Average Cyclomatic Complexity")),
            ("Average Blank Lines", 0.25, None),
        ],
    };
    spec.iter()
        .find(|s| s.0 == feature)
        .map(|s| (s.1, s.2))
        .unwrap_or((0.05, None))
}

/// Human and LLM tables with `n` rows each.
pub fn matrices(level: Level, n: usize) -> (FeatureTable, FeatureTable) {
    let grid: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let perms: Vec<(Vec<usize>, Vec<usize>)> = (0..FEATURE_NAMES.len())
        .map(|j| {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + j as u64 + 100 * (level == Level::Class) as u64);
            let mut a: Vec<usize> = (0..n).collect();
            let mut b: Vec<usize> = (0..n).collect();
            a.shuffle(&mut rng);
            b.shuffle(&mut rng);
            (a, b)
        })
        .collect();
    let mut human_cols = Vec::new();
    let mut llm_cols = Vec::new();
    for (j, name) in FEATURE_NAMES.iter().enumerate() {
        let (target, follows) = design(level, name);
        let leader = follows.map_or(j, |other| FEATURE_NAMES.iter().position(|n| *n == other).unwrap());
        let (ph, pl) = &perms[leader];
        // Uniform grids offset by s have |d| = 2s - s^2.
        let shift = 1.0 - (1.0 - target).sqrt();
        let (_, dir) = published(level, name);
        let (sh, sl) = match dir {
            Direction::HumanHigher => (shift, 0.0),
            _ => (0.0, shift),
        };
        human_cols.push(ph.iter().map(|&i| 10.0 * (grid[i] + sh)).collect::<Vec<f64>>());
        llm_cols.push(pl.iter().map(|&i| 10.0 * (grid[i] + sl)).collect::<Vec<f64>>());
    }
    let to_table = |cols: &[Vec<f64>]| {
        let rows = (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
        FeatureTable::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect(), rows).unwrap()
    };
    (to_table(&human_cols), to_table(&llm_cols))
}

/// Case-insensitive name set, for comparing against the published spelling.
pub fn folded(names: &[impl AsRef<str>]) -> std::collections::BTreeSet<String> {
    names.iter().map(|s| s.as_ref().to_lowercase()).collect()
}
