//! Data preparation: range filters, missingness pruning, RF binning,
//! ordered-window imputation, Gaussian rank scaling and stratified splits.

mod filter;
mod impute;
mod pipeline;
mod split;
mod transform;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use filter::{
    BoundOverride, PruneReport, RangeOverrides, complete_case, filter_ranges, filter_ranges_with, prune_missing,
};
pub use impute::{ImputeReport, impute, impute_column, window_mode};
pub use pipeline::{Dataset, IndependentAudit, PrepareConfig, Prepared, PreprocessAudit, prepare, prepare_independent};
pub use split::{Fold, SplitSpec, stratified_kfold, stratified_split};
pub use transform::{FeatureTransform, TransformParams, apply_transforms, fit_transforms, gaussian_rank_score};

/// Number of recovery-factor classes.
pub const NUM_CLASSES: usize = 10;

/// Width of one RF class.
pub const CLASS_WIDTH: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("database is empty")]
    EmptyDatabase,
    #[error("threshold {0} outside (0, 1)")]
    InvalidThreshold(f64),
    #[error("every feature exceeded the missingness threshold")]
    AllFeaturesDropped,
    #[error("feature `{0}` has no observed values")]
    ColumnEntirelyMissing(String),
    #[error("feature `{0}` is constant on the training set")]
    ConstantFeature(String),
    #[error("record `{0}` has no RF value")]
    MissingRf(String),
    #[error("negative RF {0}")]
    NegativeRf(f64),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("{k} folds requested for {n} records")]
    TooManyFolds { k: usize, n: usize },
    #[error("feature `{0}` is not in the database schema")]
    UnknownFeature(String),
}

/// One of the ten 0.1-wide recovery-factor intervals; the last is open above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassLabel(u8);

impl ClassLabel {
    pub fn new(index: usize) -> Option<Self> {
        (index < NUM_CLASSES).then_some(ClassLabel(index as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn all() -> impl Iterator<Item = ClassLabel> {
        (0..NUM_CLASSES as u8).map(ClassLabel)
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `min(floor(rf * 10), 9)`; intervals are closed on the left.
pub fn bin_rf(rf: f64) -> Result<ClassLabel, PreprocessError> {
    if !(rf >= 0.0) {
        return Err(PreprocessError::NegativeRf(rf));
    }
    // floor(rf * 10) misplaces a few exact boundaries (0.3 * 10 = 2.9999...),
    // so correct against the decimal boundary k / 10 directly
    let mut k = ((rf * 10.0).floor() as usize).min(NUM_CLASSES - 1);
    if k + 1 < NUM_CLASSES && rf >= (k + 1) as f64 / 10.0 {
        k += 1;
    } else if k > 0 && rf < k as f64 / 10.0 {
        k -= 1;
    }
    Ok(ClassLabel(k as u8))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bins() {
        assert_eq!(bin_rf(0.25).unwrap().index(), 2);
        assert_eq!(bin_rf(0.95).unwrap().index(), 9);
        assert_eq!(bin_rf(1.44).unwrap().index(), 9);
        assert_eq!(bin_rf(2.32).unwrap().index(), 9);
        assert_eq!(bin_rf(0.0).unwrap().index(), 0);
        assert_eq!(bin_rf(0.9).unwrap().index(), 9);
        assert!(matches!(bin_rf(-0.01), Err(PreprocessError::NegativeRf(_))));
        assert!(bin_rf(f64::NAN).is_err());
    }

    #[test]
    fn decimal_boundaries_are_left_closed() {
        for k in 1..NUM_CLASSES {
            let edge = k as f64 / 10.0;
            assert_eq!(bin_rf(edge).unwrap().index(), k, "edge {edge}");
            let below = f64::from_bits(edge.to_bits() - 1);
            assert_eq!(bin_rf(below).unwrap().index(), k - 1, "below {edge}");
        }
    }

    #[test]
    fn table_one_rf_range_maps_into_classes() {
        // every RF reported across the databases, 0.01 to 2.32, in 0.01 steps
        for i in 1..=232 {
            let rf = i as f64 / 100.0;
            let c = bin_rf(rf).unwrap().index();
            let expected = if i >= 90 { 9 } else { i / 10 };
            assert_eq!(c, expected, "rf {rf}");
        }
    }

    proptest! {
        #[test]
        fn bin_partition(rf in 0.0f64..5.0) {
            let c = bin_rf(rf).unwrap().index();
            prop_assert!(c < NUM_CLASSES);
            prop_assert!(rf >= c as f64 / 10.0);
            if c < NUM_CLASSES - 1 {
                prop_assert!(rf < (c + 1) as f64 / 10.0);
            }
        }
    }
}
