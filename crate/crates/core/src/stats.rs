//! Nonparametric two-sample comparison: Mann-Whitney U, Cliff's delta,
//! Spearman's rank correlation, and the per-feature effect report.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::table::FeatureTable;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("sample is empty")]
    EmptySample,
    #[error("samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least two paired observations")]
    TooFewObservations,
    #[error("feature columns differ between the two tables")]
    SchemaMismatch,
    #[error("exact distribution limited to {max} observations, got {got}")]
    ExactTooLarge { got: usize, max: usize },
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    NormalApproximation,
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConfig {
    pub alpha: f64,
    pub method: Method,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        ComparisonConfig {
            alpha: 0.01,
            method: Method::Auto,
        }
    }
}

impl ComparisonConfig {
    pub fn validate(&self) -> Result<(), StatsError> {
        if self.alpha > 0.0 && self.alpha < 1.0 {
            Ok(())
        } else {
            Err(StatsError::InvalidAlpha(self.alpha))
        }
    }
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Sizes of the groups of equal values.
fn tie_groups(values: &[f64]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j + 1 < v.len() && v[j + 1] == v[i] {
            j += 1;
        }
        out.push(j - i + 1);
        i = j + 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U of the first sample: pairs where it is larger, ties counting half.
    pub u: f64,
    /// Two-sided.
    pub p_value: f64,
    pub exact: bool,
}

/// Largest pooled size the exact distribution is computed for.
pub const EXACT_MAX_N: usize = 128;

/// Exact permutation distribution of twice the first sample's rank sum,
/// conditional on the observed ties.
fn exact_p(doubled: &[usize], n_a: usize, observed: usize) -> f64 {
    let total: usize = doubled.iter().sum();
    let mut dp = vec![vec![0u128; total + 1]; n_a + 1];
    dp[0][0] = 1;
    for (i, &w) in doubled.iter().enumerate() {
        for k in (1..=n_a.min(i + 1)).rev() {
            let (lo, hi) = dp.split_at_mut(k);
            let prev = &lo[k - 1];
            let cur = &mut hi[0];
            for s in (0..=total - w).rev() {
                if prev[s] != 0 {
                    cur[s + w] += prev[s];
                }
            }
        }
    }
    let counts = &dp[n_a];
    let all: u128 = counts.iter().sum();
    let le: u128 = counts[..=observed].iter().sum();
    let ge: u128 = counts[observed..].iter().sum();
    let tail = le.min(ge) as f64 / all as f64;
    (2.0 * tail).min(1.0)
}

fn normal_p(u: f64, n_a: usize, n_b: usize, pooled: &[f64]) -> f64 {
    let (n1, n2) = (n_a as f64, n_b as f64);
    let n = n1 + n2;
    let mu = n1 * n2 / 2.0;
    let ties: f64 = tie_groups(pooled)
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = if n > 1.0 {
        n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)))
    } else {
        0.0
    };
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
    erfc(z / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

pub fn mann_whitney_u(a: &[f64], b: &[f64], method: Method) -> Result<MannWhitney, StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = average_ranks(&pooled);
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let n_a = a.len();
    let twice_ra: usize = doubled[..n_a].iter().sum();
    let twice_u = twice_ra - n_a * (n_a + 1);
    let u = twice_u as f64 / 2.0;

    let has_ties = tie_groups(&pooled).iter().any(|&t| t > 1);
    let exact = match method {
        Method::Exact => true,
        Method::NormalApproximation => false,
        Method::Auto => a.len() <= 10 && b.len() <= 10 && !has_ties,
    };
    let p_value = if exact {
        if pooled.len() > EXACT_MAX_N {
            return Err(StatsError::ExactTooLarge {
                got: pooled.len(),
                max: EXACT_MAX_N,
            });
        }
        exact_p(&doubled, n_a, twice_ra)
    } else {
        normal_p(u, a.len(), b.len(), &pooled)
    };
    Ok(MannWhitney { u, p_value, exact })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl Magnitude {
    pub fn from_delta(d: f64) -> Magnitude {
        let d = d.abs();
        if d <= 0.147 {
            Magnitude::Negligible
        } else if d <= 0.33 {
            Magnitude::Small
        } else if d <= 0.474 {
            Magnitude::Medium
        } else {
            Magnitude::Large
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Magnitude::Negligible => "Negligible",
            Magnitude::Small => "Small",
            Magnitude::Medium => "Medium",
            Magnitude::Large => "Large",
        }
    }
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Cliff's d of `a` against `b`, from sorted-order counting.
pub fn cliffs_delta(a: &[f64], b: &[f64]) -> Result<(f64, Magnitude), StatsError> {
    if a.is_empty() || b.is_empty() {
        return Err(StatsError::EmptySample);
    }
    let mut sorted = b.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (mut greater, mut less) = (0i64, 0i64);
    for &x in a {
        let below = sorted.partition_point(|&y| y < x);
        let not_above = sorted.partition_point(|&y| y <= x);
        greater += below as i64;
        less += (sorted.len() - not_above) as i64;
    }
    let d = (greater - less) as f64 / (a.len() as f64 * b.len() as f64);
    Ok((d, Magnitude::from_delta(d)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spearman {
    pub rho: f64,
    /// Set when either input is constant; `rho` is then 0.
    pub degenerate: bool,
}

pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<Spearman, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch(a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(StatsError::TooFewObservations);
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(Spearman {
            rho: 0.0,
            degenerate: true,
        });
    }
    Ok(Spearman {
        rho: (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    HumanHigher,
    LlmHigher,
    None,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::HumanHigher => "human-higher",
            Direction::LlmHigher => "llm-higher",
            Direction::None => "none",
        }
    }

    pub fn arrow(self) -> &'static str {
        match self {
            Direction::HumanHigher => "↑",
            Direction::LlmHigher => "↓",
            Direction::None => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureComparison {
    pub feature: String,
    pub u: f64,
    pub p: f64,
    pub delta: f64,
    pub magnitude: Magnitude,
    pub direction: Direction,
    pub significant: bool,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn compare_feature(
    name: &str,
    human: &[f64],
    llm: &[f64],
    config: &ComparisonConfig,
) -> Result<FeatureComparison, StatsError> {
    let mw = mann_whitney_u(human, llm, config.method)?;
    let (delta, magnitude) = cliffs_delta(human, llm)?;
    let direction = if delta == 0.0 {
        Direction::None
    } else {
        let (mh, ml) = (median(human), median(llm));
        if mh > ml || (mh == ml && delta > 0.0) {
            Direction::HumanHigher
        } else {
            Direction::LlmHigher
        }
    };
    Ok(FeatureComparison {
        feature: name.to_string(),
        u: mw.u,
        p: mw.p_value,
        delta,
        magnitude,
        direction,
        significant: mw.p_value < config.alpha && magnitude != Magnitude::Negligible,
    })
}

/// One comparison per column, in column order; U and d are for the human side.
pub fn compare_features(
    human: &FeatureTable,
    llm: &FeatureTable,
    config: &ComparisonConfig,
) -> Result<Vec<FeatureComparison>, StatsError> {
    config.validate()?;
    if human.names() != llm.names() {
        return Err(StatsError::SchemaMismatch);
    }
    if human.is_empty() || llm.is_empty() {
        return Err(StatsError::EmptySample);
    }
    (0..human.width())
        .into_par_iter()
        .map(|j| compare_feature(&human.names()[j], &human.column(j), &llm.column(j), config))
        .collect()
}

pub fn effects_csv(rows: &[FeatureComparison]) -> String {
    let mut out = String::from("feature,u,p,delta,magnitude,direction,significant\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.feature,
            r.u,
            r.p,
            r.delta,
            r.magnitude,
            r.direction.as_str(),
            r.significant
        ));
    }
    out
}

/// Fixed-width table: feature, magnitude with arrow, d, p, and a `*` on
/// significant rows.
pub fn effects_table(rows: &[FeatureComparison]) -> String {
    let width = rows.iter().map(|r| r.feature.len()).max().unwrap_or(7).max(7);
    let mut out = format!(
        "{:<width$}  {:<12}  {:>8}  {:>10}  sig\n",
        "Feature", "Effect", "d", "p"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<width$}  {:<12}  {:>8.3}  {:>10.3e}  {}\n",
            r.feature,
            format!("{} {}", r.magnitude, r.direction.arrow()),
            r.delta,
            r.p,
            if r.significant { "*" } else { "" }
        ));
    }
    out
}
