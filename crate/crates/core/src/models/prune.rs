//! Feature pruning: drop negligible effects, then thin out correlated
//! features.

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::stats::{spearman_rho, FeatureComparison, Magnitude};
use crate::table::FeatureTable;

pub const CORRELATION_LIMIT: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedDrop {
    pub dropped: String,
    pub kept: String,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneReport {
    /// In keep order: descending |delta|, names breaking ties.
    pub kept: Vec<String>,
    pub dropped_correlated: Vec<CorrelatedDrop>,
    pub dropped_negligible: Vec<String>,
}

/// `table` holds the pooled rows the correlations are measured on;
/// `comparisons` must list its columns in the same order.
pub fn prune_features(table: &FeatureTable, comparisons: &[FeatureComparison]) -> Result<PruneReport, ModelError> {
    let names: Vec<String> = comparisons.iter().map(|c| c.feature.clone()).collect();
    if names != table.names() {
        return Err(ModelError::SchemaMismatch {
            expected: table.names().to_vec(),
            got: names,
        });
    }
    let (negligible, mut candidates): (Vec<&FeatureComparison>, Vec<&FeatureComparison>) =
        comparisons.iter().partition(|c| c.magnitude == Magnitude::Negligible);
    candidates.sort_by(|a, b| {
        b.delta
            .abs()
            .total_cmp(&a.delta.abs())
            .then_with(|| a.feature.cmp(&b.feature))
    });

    let mut kept: Vec<(String, Vec<f64>)> = Vec::new();
    let mut dropped_correlated = Vec::new();
    for c in candidates {
        let col = table.column_by_name(&c.feature).expect("schema checked");
        let clash = kept.iter().find_map(|(name, other)| {
            let rho = if col.len() < 2 {
                0.0
            } else {
                spearman_rho(&col, other).map(|s| s.rho).unwrap_or(0.0)
            };
            (rho.abs() >= CORRELATION_LIMIT).then(|| (name.clone(), rho))
        });
        match clash {
            Some((against, rho)) => {
                log::info!("dropping {} (rho {rho:.3} with {against})", c.feature);
                dropped_correlated.push(CorrelatedDrop {
                    dropped: c.feature.clone(),
                    kept: against,
                    rho,
                });
            }
            None => kept.push((c.feature.clone(), col)),
        }
    }
    Ok(PruneReport {
        kept: kept.into_iter().map(|(n, _)| n).collect(),
        dropped_correlated,
        dropped_negligible: negligible.into_iter().map(|c| c.feature.clone()).collect(),
    })
}
