//! The 22 software-metric features of a function- or class-level snippet.
//!
//! Totals are taken over the whole snippet. `Average *` features are means
//! over every `def` the snippet contains (a lone function averages over
//! itself). Per-def cyclomatic complexity is `1 + decision points` of the
//! def's own body, with nested defs carved out; `Cyclomatic Complexity`
//! itself is `1 + decision points` of the entire snippet.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{CodeSnippet, Label};
use crate::pyparse::{self, EntityKind, LineSpan, ParseError, ParsedSource, Statement};
use crate::table::FeatureTable;

pub const FEATURE_COUNT: usize = 22;

/// Display names, in the order the features are reported everywhere.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "Average Lines",
    "Average Blank Lines",
    "Average Code Lines",
    "Average Comment Lines",
    "Classes",
    "Executable Units",
    "Functions",
    "Lines",
    "Blank Lines",
    "Code Lines",
    "Declarative Code Lines",
    "Executable Code Lines",
    "Comment Lines",
    "Statements",
    "Declarative Statements",
    "Executable Statements",
    "Comment to Code Ratio",
    "Max Nesting",
    "Cyclomatic Complexity",
    "Max Cyclomatic Complexity",
    "Average Cyclomatic Complexity",
    "Sum Cyclomatic Complexity",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricVector {
    pub avg_lines: f64,
    pub avg_blank_lines: f64,
    pub avg_code_lines: f64,
    pub avg_comment_lines: f64,
    pub classes: usize,
    pub executable_units: usize,
    pub functions: usize,
    pub lines: usize,
    pub blank_lines: usize,
    pub code_lines: usize,
    pub declarative_code_lines: usize,
    pub executable_code_lines: usize,
    pub comment_lines: usize,
    pub statements: usize,
    pub declarative_statements: usize,
    pub executable_statements: usize,
    pub comment_to_code_ratio: f64,
    pub max_nesting: usize,
    pub cyclomatic: usize,
    pub max_cyclomatic: usize,
    pub avg_cyclomatic: f64,
    pub sum_cyclomatic: usize,
}

impl MetricVector {
    /// Values in [`FEATURE_NAMES`] order.
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.avg_lines,
            self.avg_blank_lines,
            self.avg_code_lines,
            self.avg_comment_lines,
            self.classes as f64,
            self.executable_units as f64,
            self.functions as f64,
            self.lines as f64,
            self.blank_lines as f64,
            self.code_lines as f64,
            self.declarative_code_lines as f64,
            self.executable_code_lines as f64,
            self.comment_lines as f64,
            self.statements as f64,
            self.declarative_statements as f64,
            self.executable_statements as f64,
            self.comment_to_code_ratio,
            self.max_nesting as f64,
            self.cyclomatic as f64,
            self.max_cyclomatic as f64,
            self.avg_cyclomatic,
            self.sum_cyclomatic as f64,
        ]
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        FEATURE_NAMES
            .iter()
            .position(|n| *n == name)
            .map(|i| self.to_array()[i])
    }
}

/// Line and complexity tallies for one `def`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnitMetrics {
    pub span: LineSpan,
    pub lines: usize,
    pub blank_lines: usize,
    pub code_lines: usize,
    pub comment_lines: usize,
    pub cyclomatic: usize,
    pub executable: bool,
}

fn mean(total: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        total as f64 / n as f64
    }
}

fn ratio(comment: usize, code: usize) -> f64 {
    if code == 0 {
        0.0
    } else {
        comment as f64 / code as f64
    }
}

/// Per-def breakdown, in source order.
pub fn unit_metrics(parsed: &ParsedSource) -> Vec<UnitMetrics> {
    let defs: Vec<LineSpan> = parsed
        .all_entities()
        .into_iter()
        .filter(|e| e.kind == EntityKind::Function)
        .map(|e| e.span)
        .collect();
    let mut ordered = defs.clone();
    ordered.sort();
    ordered
        .iter()
        .map(|&span| {
            let nested: Vec<LineSpan> = ordered
                .iter()
                .copied()
                .filter(|d| *d != span && span.contains_span(d))
                .collect();
            let own: Vec<&Statement> = parsed
                .statements
                .iter()
                .filter(|s| span.contains(s.span.start))
                .filter(|s| !nested.iter().any(|d| d.contains(s.span.start)))
                .collect();
            let recs = &parsed.lines[span.start - 1..span.end];
            UnitMetrics {
                span,
                lines: span.len(),
                blank_lines: recs.iter().filter(|r| r.is_blank).count(),
                code_lines: recs.iter().filter(|r| r.has_code).count(),
                comment_lines: recs.iter().filter(|r| r.has_comment).count(),
                cyclomatic: 1 + own.iter().map(|s| s.decision_points).sum::<usize>(),
                executable: own
                    .iter()
                    .any(|s| s.kind.is_executable() && !s.is_placeholder()),
            }
        })
        .collect()
}

pub fn metrics_for_parsed(parsed: &ParsedSource) -> MetricVector {
    let lines = &parsed.lines;
    let stmts = &parsed.statements;
    let covered_by = |line: usize, declarative: bool| {
        stmts
            .iter()
            .any(|s| s.kind.is_declarative() == declarative && s.span.contains(line))
    };
    let code_lines = lines.iter().filter(|r| r.has_code).count();
    let comment_lines = lines.iter().filter(|r| r.has_comment).count();
    let units = unit_metrics(parsed);
    let n = units.len();
    let whole = LineSpan::new(1, lines.len().max(1));

    MetricVector {
        avg_lines: mean(units.iter().map(|u| u.lines).sum(), n),
        avg_blank_lines: mean(units.iter().map(|u| u.blank_lines).sum(), n),
        avg_code_lines: mean(units.iter().map(|u| u.code_lines).sum(), n),
        avg_comment_lines: mean(units.iter().map(|u| u.comment_lines).sum(), n),
        classes: parsed
            .all_entities()
            .iter()
            .filter(|e| e.kind == EntityKind::Class)
            .count(),
        executable_units: units.iter().filter(|u| u.executable).count(),
        functions: n,
        lines: lines.len(),
        blank_lines: lines.iter().filter(|r| r.is_blank).count(),
        code_lines,
        declarative_code_lines: lines
            .iter()
            .filter(|r| r.has_code && covered_by(r.index, true))
            .count(),
        executable_code_lines: lines
            .iter()
            .filter(|r| r.has_code && covered_by(r.index, false))
            .count(),
        comment_lines,
        statements: stmts.len(),
        declarative_statements: stmts.iter().filter(|s| s.kind.is_declarative()).count(),
        executable_statements: stmts.iter().filter(|s| s.kind.is_executable()).count(),
        comment_to_code_ratio: ratio(comment_lines, code_lines),
        max_nesting: pyparse::max_nesting(stmts, whole),
        cyclomatic: 1 + pyparse::decision_points(stmts, whole),
        max_cyclomatic: units.iter().map(|u| u.cyclomatic).max().unwrap_or(0),
        avg_cyclomatic: mean(units.iter().map(|u| u.cyclomatic).sum(), n),
        sum_cyclomatic: units.iter().map(|u| u.cyclomatic).sum(),
    }
}

pub fn metrics_for_source(source: &str) -> Result<MetricVector, ParseError> {
    Ok(metrics_for_parsed(&pyparse::parse(source)?))
}

pub fn compute_metrics(snippet: &CodeSnippet) -> Result<MetricVector, ParseError> {
    metrics_for_source(&snippet.source)
}

/// Comment lines over code lines; zero when there is no code.
pub fn comment_to_code_ratio(snippet: &CodeSnippet) -> Result<f64, ParseError> {
    let lines = pyparse::classify_lines(&snippet.source)?;
    let code = lines.iter().filter(|r| r.has_code).count();
    let comment = lines.iter().filter(|r| r.has_comment).count();
    Ok(ratio(comment, code))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub id: String,
    pub label: Label,
    pub metrics: MetricVector,
}

/// A snippet whose metrics could not be computed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricMatrix {
    pub rows: Vec<MetricRow>,
}

impl MetricMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Feature table of the rows carrying `label`, or of all rows.
    pub fn table(&self, label: Option<Label>) -> FeatureTable {
        let rows = self
            .rows
            .iter()
            .filter(|r| label.is_none_or(|l| r.label == l))
            .map(|r| r.metrics.to_array().to_vec())
            .collect();
        FeatureTable::new(FEATURE_NAMES.iter().map(|s| s.to_string()).collect(), rows)
            .expect("metric rows have a fixed width")
    }

    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.label == Label::Llm).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,label");
        for name in FEATURE_NAMES {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.id);
            out.push(',');
            out.push_str(row.label.as_str());
            for v in row.metrics.to_array() {
                out.push(',');
                out.push_str(&format_number(v));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&serde_json::to_string(row).expect("rows serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<_, _>>()?;
        Ok(MetricMatrix { rows })
    }
}

/// Integers print bare; other values print with at most nine decimals.
pub fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    let s = format!("{v:.9}");
    let s = s.trim_end_matches('0');
    s.trim_end_matches('.').to_string()
}

/// Metrics for every snippet, in input order. Failing rows are left out of
/// the matrix and reported alongside it.
pub fn metric_matrix(snippets: &[CodeSnippet]) -> (MetricMatrix, Vec<RowFailure>) {
    let results: Vec<Result<MetricRow, RowFailure>> = snippets
        .par_iter()
        .map(|s| match compute_metrics(s) {
            Ok(metrics) => Ok(MetricRow {
                id: s.id.clone(),
                label: s.author.label(),
                metrics,
            }),
            Err(e) => Err(RowFailure {
                id: s.id.clone(),
                error: e.to_string(),
            }),
        })
        .collect();
    let mut matrix = MetricMatrix::default();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(row) => matrix.rows.push(row),
            Err(f) => {
                log::warn!("metrics failed for {}: {}", f.id, f.error);
                failures.push(f);
            }
        }
    }
    (matrix, failures)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Author;
    use proptest::prelude::*;

    const TIMESTAMP_TO_MS: &str = include_str!("../tests/fixtures/listings/timestamp_to_ms.py");
    const LOAD_DATETIME: &str = include_str!("../tests/fixtures/listings/load_datetime_human.py");

    fn snippet(id: &str, source: &str) -> CodeSnippet {
        CodeSnippet::new(id, EntityKind::Function, Author::Human, "", source, LineSpan::new(1, 1))
    }

    #[test]
    fn smallest_function() {
        let m = metrics_for_source("def f():\n    return 1\n").unwrap();
        assert_eq!((m.lines, m.code_lines, m.blank_lines, m.comment_lines), (2, 2, 0, 0));
        assert_eq!((m.statements, m.declarative_statements, m.executable_statements), (2, 1, 1));
        assert_eq!((m.functions, m.classes, m.cyclomatic), (1, 0, 1));
        assert_eq!(m.comment_to_code_ratio, 0.0);
        assert_eq!(m.executable_units, 1);
        assert_eq!((m.declarative_code_lines, m.executable_code_lines), (1, 1));
    }

    #[test]
    fn timestamp_listing() {
        let m = metrics_for_source(TIMESTAMP_TO_MS).unwrap();
        assert_eq!((m.lines, m.comment_lines, m.code_lines, m.blank_lines), (13, 6, 7, 0));
        assert_eq!(m.functions, 1);
        assert_eq!(m.comment_to_code_ratio, 6.0 / 7.0);
        assert_eq!((m.cyclomatic, m.max_nesting), (1, 0));
    }

    #[test]
    fn load_datetime_listing() {
        let m = metrics_for_source(LOAD_DATETIME).unwrap();
        assert_eq!((m.lines, m.comment_lines, m.code_lines, m.blank_lines), (15, 4, 10, 1));
        assert_eq!((m.cyclomatic, m.max_nesting), (3, 2));
        assert_eq!(m.comment_to_code_ratio, 0.4);
    }

    #[test]
    fn ratio_edge_values() {
        let none = snippet("a", "x = 1\n");
        assert_eq!(comment_to_code_ratio(&none).unwrap(), 0.0);
        let half = snippet("b", "# c\nx = 1\ny = 2\n");
        assert_eq!(comment_to_code_ratio(&half).unwrap(), 0.5);
        let one = snippet("c", "# c\nx = 1\n");
        assert_eq!(comment_to_code_ratio(&one).unwrap(), 1.0);
        let empty = snippet("d", "# only\n");
        assert_eq!(comment_to_code_ratio(&empty).unwrap(), 0.0);
    }

    #[test]
    fn lone_pass_or_docstring_is_not_an_executable_unit() {
        let m = metrics_for_source("def a():\n    pass\ndef b():\n    \"\"\"doc\"\"\"\ndef c():\n    ...\ndef d():\n    return 1\n").unwrap();
        assert_eq!((m.functions, m.executable_units), (4, 1));
    }

    #[test]
    fn nested_defs_are_carved_out_of_parent_complexity() {
        let src = "def outer(x):\n    if x:\n        pass\n    def inner(y):\n        while y:\n            y -= 1\n        return y if y else 0\n    return inner\n";
        let m = metrics_for_source(src).unwrap();
        assert_eq!(m.cyclomatic, 4);
        assert_eq!(m.sum_cyclomatic, 5);
        assert_eq!(m.max_cyclomatic, 3);
        assert_eq!(m.avg_cyclomatic, 2.5);
        assert_eq!(m.functions, 2);
    }

    #[test]
    fn matrix_shapes_and_sidecar() {
        let (m, f) = metric_matrix(&[]);
        assert!(m.is_empty() && f.is_empty());

        let good = [snippet("a", "x = 1\n"), snippet("b", "def f():\n    return 2\n")];
        let (m, f) = metric_matrix(&good);
        assert_eq!(m.len(), 2);
        assert!(f.is_empty());
        let csv = m.to_csv();
        let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
        assert_eq!(header.len(), 24);
        assert_eq!(&header[..2], ["id", "label"]);
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(m.table(None).width(), 22);

        let mixed = [snippet("a", "x = 1\n"), snippet("bad", "s = 'open\n")];
        let (m, f) = metric_matrix(&mixed);
        assert_eq!(m.len(), 1);
        assert_eq!(f.len(), 1);
        assert_eq!(f[0].id, mixed[1].id);
    }

    #[test]
    fn jsonl_round_trips() {
        let (m, _) = metric_matrix(&[snippet("a", TIMESTAMP_TO_MS)]);
        assert_eq!(MetricMatrix::from_jsonl(&m.to_jsonl()).unwrap(), m);
    }

    #[test]
    fn number_formatting() {
        assert_eq!(format_number(3.0), "3");
        assert_eq!(format_number(0.0), "0");
        assert_eq!(format_number(6.0 / 7.0), "0.857142857");
        assert_eq!(format_number(0.5), "0.5");
    }

    fn def_strategy() -> impl Strategy<Value = String> {
        let body = prop_oneof![
            Just("    x = 1"),
            Just("    # note"),
            Just(""),
            Just("    if a:\n        b()"),
            Just("    \"\"\"doc\"\"\""),
            Just("    return [i for i in r if i]"),
            Just("    for i in r:\n        pass"),
        ];
        (proptest::sample::select(vec!["f", "g", "h"]), proptest::collection::vec(body, 1..6)).prop_map(
            |(name, body)| {
                let mut lines = vec![format!("def {name}():"), "    y = 0".to_string()];
                lines.extend(body.into_iter().map(String::from));
                lines.push("    return y".into());
                lines.join("\n") + "\n"
            },
        )
    }

    proptest! {
        #[test]
        fn totals_add_across_a_blank_separator(a in def_strategy(), b in def_strategy()) {
            let ma = metrics_for_source(&a).unwrap();
            let mb = metrics_for_source(&b).unwrap();
            let m = metrics_for_source(&format!("{a}\n{b}")).unwrap();
            prop_assert_eq!(m.lines, ma.lines + mb.lines + 1);
            prop_assert_eq!(m.code_lines, ma.code_lines + mb.code_lines);
            prop_assert_eq!(m.comment_lines, ma.comment_lines + mb.comment_lines);
            prop_assert_eq!(m.statements, ma.statements + mb.statements);
            prop_assert_eq!(m.blank_lines, ma.blank_lines + mb.blank_lines + 1);
        }

        #[test]
        fn vector_invariants(a in def_strategy(), b in def_strategy()) {
            let src = format!("class K:\n{}", format!("{a}{b}").lines().map(|l| if l.is_empty() { String::new() } else { format!("    {l}") }).collect::<Vec<_>>().join("\n"));
            for s in [a.as_str(), src.as_str()] {
                let parsed = pyparse::parse(s).unwrap();
                let m = metrics_for_parsed(&parsed);
                prop_assert_eq!(m, metrics_for_parsed(&parsed));
                prop_assert!(m.to_array().iter().all(|v| *v >= 0.0));
                prop_assert_eq!(m.statements, m.declarative_statements + m.executable_statements);
                prop_assert!(m.lines >= m.blank_lines && m.lines >= m.code_lines && m.lines >= m.comment_lines);
                prop_assert!(m.code_lines >= m.declarative_code_lines && m.code_lines >= m.executable_code_lines);
                prop_assert!(m.functions >= m.executable_units);
                if m.functions >= 1 {
                    prop_assert!(m.sum_cyclomatic >= m.max_cyclomatic);
                    prop_assert!(m.max_cyclomatic as f64 >= m.avg_cyclomatic);
                }
                let units = unit_metrics(&parsed);
                let total: usize = units.iter().map(|u| u.code_lines).sum();
                prop_assert!((m.avg_code_lines * m.functions as f64 - total as f64).abs() < 1e-9);
            }
        }
    }
}
