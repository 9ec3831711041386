//! Row-major numeric table with named columns.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TableError {
    #[error("row {row} has {got} values, expected {expected}")]
    RaggedRow {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("duplicate feature name {0:?}")]
    DuplicateFeature(String),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureTable {
    names: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, TableError> {
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(TableError::DuplicateFeature(n.clone()));
            }
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != names.len() {
                return Err(TableError::RaggedRow {
                    row,
                    got: r.len(),
                    expected: names.len(),
                });
            }
        }
        Ok(FeatureTable { names, rows })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.names.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<f64>, TableError> {
        self.index_of(name)
            .map(|j| self.column(j))
            .ok_or_else(|| TableError::UnknownFeature(name.to_string()))
    }

    /// Keeps the named columns, in the order given.
    pub fn select(&self, names: &[String]) -> Result<FeatureTable, TableError> {
        let idx = names
            .iter()
            .map(|n| self.index_of(n).ok_or_else(|| TableError::UnknownFeature(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let rows = self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&j| r[j]).collect())
            .collect();
        FeatureTable::new(names.to_vec(), rows)
    }

    pub fn subset_rows(&self, indices: &[usize]) -> FeatureTable {
        FeatureTable {
            names: self.names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Rows of `self` followed by rows of `other`; names must agree.
    pub fn concat(&self, other: &FeatureTable) -> Option<FeatureTable> {
        if self.names != other.names {
            return None;
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Some(FeatureTable {
            names: self.names.clone(),
            rows,
        })
    }
}
