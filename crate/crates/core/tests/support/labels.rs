//! Hand-labeled metric primitives. `oracle/labels.json` holds counted values
//! per snippet; every derived feature is rebuilt from them here.

use std::path::Path;

use detect_core::metrics::{metrics_for_source, MetricVector, FEATURE_NAMES};
use serde::Deserialize;

#[derive(Deserialize)]
pub struct Label {
    pub file: String,
    pub lines: usize,
    pub blank: usize,
    pub code: usize,
    pub comment: usize,
    pub decl_code: usize,
    pub exec_code: usize,
    pub stmts: usize,
    pub decl_stmts: usize,
    pub exec_stmts: usize,
    pub classes: usize,
    pub units: usize,
    pub nesting: usize,
    pub cc: usize,
    /// Per def in source order: lines, blank, code, comment, cyclomatic.
    pub defs: Vec<[usize; 5]>,
}

/// `fixtures` is the core crate's `tests/fixtures` directory.
pub fn load(fixtures: &Path) -> Vec<Label> {
    let text = std::fs::read_to_string(fixtures.join("oracle/labels.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn mean(col: impl Iterator<Item = usize>, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    col.sum::<usize>() as f64 / n as f64
}

pub fn expected(l: &Label) -> MetricVector {
    let n = l.defs.len();
    let col = |i: usize| l.defs.iter().map(move |d| d[i]);
    MetricVector {
        avg_lines: mean(col(0), n),
        avg_blank_lines: mean(col(1), n),
        avg_code_lines: mean(col(2), n),
        avg_comment_lines: mean(col(3), n),
        classes: l.classes,
        executable_units: l.units,
        functions: n,
        lines: l.lines,
        blank_lines: l.blank,
        code_lines: l.code,
        declarative_code_lines: l.decl_code,
        executable_code_lines: l.exec_code,
        comment_lines: l.comment,
        statements: l.stmts,
        declarative_statements: l.decl_stmts,
        executable_statements: l.exec_stmts,
        comment_to_code_ratio: if l.code == 0 { 0.0 } else { l.comment as f64 / l.code as f64 },
        max_nesting: l.nesting,
        cyclomatic: l.cc,
        max_cyclomatic: col(4).max().unwrap_or(0),
        avg_cyclomatic: mean(col(4), n),
        sum_cyclomatic: col(4).sum(),
    }
}

/// One line per feature that disagrees with its label; counts must match
/// exactly, reals within 1e-9.
pub fn mismatches(fixtures: &Path, labels: &[Label]) -> Vec<String> {
    let mut out = Vec::new();
    for l in labels {
        let src = std::fs::read_to_string(fixtures.join(&l.file)).unwrap();
        let got = match metrics_for_source(&src) {
            Ok(m) => m,
            Err(e) => {
                out.push(format!("{}: {e}", l.file));
                continue;
            }
        };
        for ((name, g), w) in FEATURE_NAMES.iter().zip(got.to_array()).zip(expected(l).to_array()) {
            if (g - w).abs() > 1e-9 {
                out.push(format!("{}: {name} got {g} want {w}", l.file));
            }
        }
    }
    out
}
