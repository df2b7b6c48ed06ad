use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::PreprocessError;
use crate::dataset::Database;

/// Entries per imputation window before any growth.
pub const WINDOW: usize = 10;

/// Largest tolerated missing share in a window, as `1 / MAX_MISSING_DENOM`.
const MAX_MISSING_DENOM: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImputeReport {
    /// Number of filled cells per feature.
    pub imputed: BTreeMap<String, usize>,
}

/// Fill missing feature values from RF-ordered windows.
///
/// Records are ordered by ascending RF (stable), each feature column is then
/// filled by [`impute_column`]. Record order in the output is unchanged.
pub fn impute(db: &Database) -> Result<(Database, ImputeReport), PreprocessError> {
    let mut order: Vec<(usize, f64)> = Vec::with_capacity(db.len());
    for (i, r) in db.records.iter().enumerate() {
        let rf = r.rf.ok_or_else(|| PreprocessError::MissingRf(r.key.clone()))?;
        order.push((i, rf));
    }
    order.sort_by(|a, b| a.1.total_cmp(&b.1));

    let mut out = db.clone();
    let mut report = ImputeReport::default();
    for (j, feature) in db.schema.features().iter().enumerate() {
        let mut column: Vec<Option<f64>> = order.iter().map(|&(i, _)| db.records[i].values[j]).collect();
        let filled =
            impute_column(&mut column).ok_or_else(|| PreprocessError::ColumnEntirelyMissing(feature.name.clone()))?;
        for (&(i, _), v) in order.iter().zip(column) {
            out.records[i].values[j] = v;
        }
        report.imputed.insert(feature.name.clone(), filled);
    }
    Ok((out, report))
}

/// Windowed modal imputation of one column that is already in RF order.
///
/// The column is walked in disjoint windows of [`WINDOW`] entries; a trailing
/// remainder shorter than a window joins the window before it. A window with
/// no gaps is skipped. When at most a tenth of a window is missing, its gaps
/// take the window's [`window_mode`]. Otherwise the window grows forward one
/// entry at a time until the missing share is at most a tenth; at the end of
/// the column it grows backward instead. The walk resumes after the window.
///
/// Returns the number of filled entries, or `None` when every entry is missing.
pub fn impute_column(values: &mut [Option<f64>]) -> Option<usize> {
    let n = values.len();
    if n == 0 {
        return Some(0);
    }
    if values.iter().all(Option::is_none) {
        return None;
    }
    let too_sparse = |missing: usize, len: usize| missing * MAX_MISSING_DENOM > len;

    let mut filled = 0;
    let mut start = 0;
    while start < n {
        let mut end = (start + WINDOW).min(n);
        if n - end < WINDOW {
            end = n;
        }
        let mut missing = values[start..end].iter().filter(|v| v.is_none()).count();
        if missing == 0 {
            start = end;
            continue;
        }
        while too_sparse(missing, end - start) && end < n {
            if values[end].is_none() {
                missing += 1;
            }
            end += 1;
        }
        while too_sparse(missing, end - start) && start > 0 {
            start -= 1;
            if values[start].is_none() {
                missing += 1;
            }
        }
        let present: Vec<f64> = values[start..end].iter().flatten().copied().collect();
        let fill = window_mode(&present);
        for v in &mut values[start..end] {
            if v.is_none() {
                *v = Some(fill);
                filled += 1;
            }
        }
        start = end;
    }
    Some(filled)
}

/// Most frequent value, ties to the smallest. When every value is distinct
/// the median is used instead.
///
/// Panics on an empty slice.
pub fn window_mode(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "mode of an empty window");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut best = (sorted[0], 0usize);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > best.1 {
            best = (sorted[i], j - i);
        }
        i = j;
    }
    if best.1 > 1 || sorted.len() == 1 {
        return best.0;
    }
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 { sorted[m] } else { (sorted[m - 1] + sorted[m]) / 2.0 }
}
