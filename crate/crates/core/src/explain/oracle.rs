//! Brute-force Shapley values by enumerating every feature coalition.

use super::treeshap::child_fractions;
use super::{ExplainError, MAX_ORACLE_FEATURES};
use crate::booster::{Ensemble, TreeNode};
use crate::matrix::Matrix;

/// How features outside a coalition are integrated out.
#[derive(Debug, Clone, Copy)]
pub enum Marginalization<'a> {
    /// Follow both children of a split on an absent feature, weighted by
    /// training cover. This is the value function TreeSHAP computes exactly.
    TreeCover,
    /// Average the margin over rows whose absent features are taken from
    /// the background set.
    Background(&'a Matrix),
}

fn conditional(node: &TreeNode, row: &[f64], mask: u32) -> f64 {
    match node {
        TreeNode::Leaf { weight, .. } => *weight,
        TreeNode::Split { feature, threshold, left, right, .. } => {
            if mask & (1 << feature) != 0 {
                conditional(if row[*feature] < *threshold { left } else { right }, row, mask)
            } else {
                let (fl, fr) = child_fractions(left, right);
                fl * conditional(left, row, mask) + fr * conditional(right, row, mask)
            }
        }
    }
}

fn coalition_value(e: &Ensemble, row: &[f64], class: usize, mask: u32, how: Marginalization) -> f64 {
    match how {
        Marginalization::TreeCover => {
            e.base_margin + e.class_trees(class).map(|t| conditional(t, row, mask)).sum::<f64>()
        }
        Marginalization::Background(bg) => {
            let mut z = vec![0.0; row.len()];
            let mut total = 0.0;
            for b in bg.iter_rows() {
                for j in 0..row.len() {
                    z[j] = if mask & (1 << j) != 0 { row[j] } else { b[j] };
                }
                total += e.base_margin + e.class_trees(class).map(|t| t.predict(&z)).sum::<f64>();
            }
            total / bg.rows() as f64
        }
    }
}

/// Shapley values of the class-`class` margin at `row`, one per feature.
///
/// Enumerates all `2^M` coalitions, so `M` is capped at 12.
pub fn exact_shapley_oracle(
    e: &Ensemble,
    row: &[f64],
    class: usize,
    how: Marginalization,
) -> Result<Vec<f64>, ExplainError> {
    super::check_row(e, row, class)?;
    let m = row.len();
    if m > MAX_ORACLE_FEATURES {
        return Err(ExplainError::TooManyFeatures { features: m, max: MAX_ORACLE_FEATURES });
    }
    if let Marginalization::Background(bg) = how {
        if bg.rows() == 0 {
            return Err(ExplainError::EmptyBackground);
        }
        if bg.cols() != m {
            return Err(ExplainError::Arity { expected: m, found: bg.cols() });
        }
    }
    let values: Vec<f64> = (0..1u32 << m).map(|mask| coalition_value(e, row, class, mask, how)).collect();
    // weight of a coalition of size s not containing the player: 1 / (m * C(m-1, s))
    let weight: Vec<f64> = (0..m)
        .map(|s| {
            let binom = (0..s).fold(1.0, |acc, i| acc * (m - 1 - i) as f64 / (i + 1) as f64);
            1.0 / (m as f64 * binom)
        })
        .collect();
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for mask in 0..1u32 << m {
            if mask & bit == 0 {
                *p += weight[mask.count_ones() as usize] * (values[(mask | bit) as usize] - values[mask as usize]);
            }
        }
    }
    Ok(phi)
}
