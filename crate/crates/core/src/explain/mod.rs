//! SHAP attributions of class margins and their per-class aggregation.
//!
//! Attributions explain margins, not probabilities, so `base + sum(phi)`
//! reproduces [`Ensemble::margins`] for every row and class.

mod oracle;
mod treeshap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::booster::Ensemble;
use crate::matrix::Matrix;

pub use oracle::{Marginalization, exact_shapley_oracle};

/// Largest feature count the enumeration oracle accepts.
pub const MAX_ORACLE_FEATURES: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum ExplainError {
    #[error("expected {expected} features, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("class {class} outside 0..{num_class}")]
    ClassOutOfRange { class: usize, num_class: usize },
    #[error("{features} features exceed the oracle limit of {max}")]
    TooManyFeatures { features: usize, max: usize },
    #[error("background set is empty")]
    EmptyBackground,
    #[error("no attributions to aggregate")]
    Empty,
}

fn check_row(e: &Ensemble, row: &[f64], class: usize) -> Result<(), ExplainError> {
    if row.len() != e.num_features {
        return Err(ExplainError::Arity { expected: e.num_features, found: row.len() });
    }
    if class >= e.num_class() {
        return Err(ExplainError::ClassOutOfRange { class, num_class: e.num_class() });
    }
    Ok(())
}

/// Attributions of one class margin at one row.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapValues {
    /// Expected margin with no features known.
    pub base: f64,
    pub phi: Vec<f64>,
}

impl ShapValues {
    pub fn total(&self) -> f64 {
        self.base + self.phi.iter().sum::<f64>()
    }
}

/// Expected class margin under cover weighting: the attribution base value.
pub fn base_value(e: &Ensemble, class: usize) -> f64 {
    e.base_margin + e.class_trees(class).map(treeshap::expected_value).sum::<f64>()
}

/// TreeSHAP values of the class-`class` margin at `row`.
///
/// An ensemble without trees yields all-zero attributions.
pub fn tree_shap(e: &Ensemble, row: &[f64], class: usize) -> Result<ShapValues, ExplainError> {
    check_row(e, row, class)?;
    let mut phi = vec![0.0; row.len()];
    for tree in e.class_trees(class) {
        treeshap::tree_shap_into(tree, row, &mut phi);
    }
    Ok(ShapValues { base: base_value(e, class), phi })
}

/// Attributions for every row and class of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature_names: Vec<String>,
    /// Base value per class, shared by all rows.
    pub base_values: Vec<f64>,
    /// One `num_class x num_features` matrix per row.
    pub values: Vec<Matrix>,
}

impl Attribution {
    pub fn num_class(&self) -> usize {
        self.base_values.len()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }
}

/// TreeSHAP over all rows of `x`, rows in parallel.
pub fn explain(e: &Ensemble, x: &Matrix) -> Result<Attribution, ExplainError> {
    if x.cols() != e.num_features {
        return Err(ExplainError::Arity { expected: e.num_features, found: x.cols() });
    }
    let k = e.num_class();
    let tables: Vec<Vec<Option<treeshap::TreeTable>>> = (0..k)
        .map(|class| e.class_trees(class).collect::<Vec<_>>().par_iter().map(|t| treeshap::TreeTable::new(t)).collect())
        .collect();
    let values = (0..x.rows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            let mut m = Matrix::zeros(k, x.cols());
            for (class, class_tables) in tables.iter().enumerate() {
                let mut phi = vec![0.0; x.cols()];
                for (tree, table) in e.class_trees(class).zip(class_tables) {
                    match table {
                        Some(t) => t.add_into(row, &mut phi),
                        None => treeshap::tree_shap_into(tree, row, &mut phi),
                    }
                }
                for (j, v) in phi.into_iter().enumerate() {
                    m.set(class, j, v);
                }
            }
            m
        })
        .collect();
    Ok(Attribution {
        feature_names: e.feature_names.clone(),
        base_values: (0..k).map(|c| base_value(e, c)).collect(),
        values,
    })
}

/// Mean absolute attribution per class and feature, with an overall ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceSummary {
    pub feature_names: Vec<String>,
    /// `num_class x num_features`.
    pub per_class: Matrix,
    /// Per-feature sum over classes.
    pub overall: Vec<f64>,
    /// Feature indices by decreasing overall importance, ties by index.
    pub ranking: Vec<usize>,
}

pub fn aggregate_importance(a: &Attribution) -> Result<ImportanceSummary, ExplainError> {
    if a.values.is_empty() {
        return Err(ExplainError::Empty);
    }
    let (k, m) = (a.num_class(), a.num_features());
    let mut per_class = Matrix::zeros(k, m);
    for row in &a.values {
        for c in 0..k {
            for j in 0..m {
                per_class.set(c, j, per_class.get(c, j) + row.get(c, j).abs());
            }
        }
    }
    let n = a.values.len() as f64;
    for c in 0..k {
        for j in 0..m {
            per_class.set(c, j, per_class.get(c, j) / n);
        }
    }
    let overall: Vec<f64> = (0..m).map(|j| (0..k).map(|c| per_class.get(c, j)).sum()).collect();
    let mut ranking: Vec<usize> = (0..m).collect();
    ranking.sort_by(|&x, &y| overall[y].total_cmp(&overall[x]).then(x.cmp(&y)));
    Ok(ImportanceSummary { feature_names: a.feature_names.clone(), per_class, overall, ranking })
}

impl ImportanceSummary {
    /// Names of the `n` most important features.
    pub fn top(&self, n: usize) -> Vec<&str> {
        self.ranking.iter().take(n).map(|&j| self.feature_names[j].as_str()).collect()
    }

    /// One row per feature in ranking order: per-class means, then overall.
    pub fn to_csv(&self) -> String {
        let k = self.per_class.rows();
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["feature".to_string()];
        header.extend((0..k).map(|c| format!("class_{c}")));
        header.push("overall".into());
        w.write_record(&header).expect("in-memory write");
        for &j in &self.ranking {
            let mut rec = vec![self.feature_names[j].clone()];
            rec.extend((0..k).map(|c| format!("{:.6e}", self.per_class.get(c, j))));
            rec.push(format!("{:.6e}", self.overall[j]));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }
}
