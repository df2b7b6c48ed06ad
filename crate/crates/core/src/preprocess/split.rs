use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ClassLabel, NUM_CLASSES, PreprocessError, bin_rf};
use crate::dataset::Database;
use crate::rng::{seeded, streams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub k_folds: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec { test_fraction: 0.1, k_folds: 10, seed: 0 }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), PreprocessError> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(PreprocessError::InvalidSplit(format!("test_fraction {}", self.test_fraction)));
        }
        if self.k_folds < 2 {
            return Err(PreprocessError::InvalidSplit(format!("k_folds {}", self.k_folds)));
        }
        Ok(())
    }
}

/// Record indices grouped by RF class, in input order.
fn by_class(labels: &[ClassLabel]) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); NUM_CLASSES];
    for (i, c) in labels.iter().enumerate() {
        groups[c.index()].push(i);
    }
    groups
}

/// Per-class random test selection; both partitions keep input order.
///
/// Each class sends `round(test_fraction * count)` records to test, at
/// least one and at most `count - 1` when the class has two or more members.
pub fn stratified_split(db: &Database, spec: &SplitSpec) -> Result<(Database, Database), PreprocessError> {
    spec.validate()?;
    if db.is_empty() {
        return Err(PreprocessError::EmptyDatabase);
    }
    let labels = db
        .records
        .iter()
        .map(|r| r.rf.ok_or_else(|| PreprocessError::MissingRf(r.key.clone())).and_then(bin_rf))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rng = seeded(spec.seed, streams::SPLIT);
    let mut is_test = vec![false; db.len()];
    for mut members in by_class(&labels) {
        let count = members.len();
        let mut take = (spec.test_fraction * count as f64).round() as usize;
        if count >= 2 {
            take = take.clamp(1, count - 1);
        }
        members.shuffle(&mut rng);
        for &i in &members[..take] {
            is_test[i] = true;
        }
    }
    let (test, train): (Vec<_>, Vec<_>) = db.records.iter().zip(&is_test).partition(|(_, t)| **t);
    let strip = |v: Vec<(&crate::dataset::ReservoirRecord, &bool)>| v.into_iter().map(|(r, _)| r.clone()).collect();
    Ok((db.with_records(strip(train)), db.with_records(strip(test))))
}

/// One cross-validation fold: indices to fit on and indices to score.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub fit: Vec<usize>,
    pub validate: Vec<usize>,
}

/// Stratified k-fold partition of `labels`.
///
/// Each class is shuffled and dealt round-robin over the folds, continuing
/// from where the previous class stopped, so per-class and total fold sizes
/// both differ by at most one.
pub fn stratified_kfold(labels: &[ClassLabel], k: usize, seed: u64) -> Result<Vec<Fold>, PreprocessError> {
    if k < 2 {
        return Err(PreprocessError::InvalidSplit(format!("k_folds {k}")));
    }
    if k > labels.len() {
        return Err(PreprocessError::TooManyFolds { k, n: labels.len() });
    }
    let mut rng = seeded(seed, streams::FOLDS);
    let mut assignment = vec![0usize; labels.len()];
    let mut next = 0;
    for mut members in by_class(labels) {
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok((0..k)
        .map(|f| {
            let (validate, fit): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| assignment[i] == f);
            Fold { fit, validate }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{DatabaseTag, Feature, FeatureSchema, ReservoirRecord};

    fn db_with_classes(counts: &[(usize, usize)]) -> Database {
        let schema = FeatureSchema::new(vec![Feature::new("x", "", 0.0, 1.0)]).unwrap();
        let mut records = Vec::new();
        for &(class, n) in counts {
            for i in 0..n {
                records.push(ReservoirRecord {
                    key: format!("c{class}-{i}"),
                    values: vec![Some(0.5)],
                    rf: Some(class as f64 / 10.0 + 0.05),
                    source: DatabaseTag::Toris,
                });
            }
        }
        Database::new(DatabaseTag::Toris, schema, records).unwrap()
    }

    fn class_counts(db: &Database) -> Vec<usize> {
        let mut c = vec![0; NUM_CLASSES];
        for r in &db.records {
            c[bin_rf(r.rf.unwrap()).unwrap().index()] += 1;
        }
        c
    }

    #[test]
    fn proportional_allocation() {
        let db = db_with_classes(&[(2, 50), (5, 50)]);
        let (train, test) = stratified_split(&db, &SplitSpec::default()).unwrap();
        let c = class_counts(&test);
        assert_eq!((c[2], c[5]), (5, 5));
        assert_eq!(train.len(), 90);
    }

    #[test]
    fn small_classes() {
        let db = db_with_classes(&[(0, 1), (1, 2), (9, 4)]);
        let (train, test) = stratified_split(&db, &SplitSpec::default()).unwrap();
        let c = class_counts(&test);
        assert_eq!((c[0], c[1], c[9]), (0, 1, 1));
        assert_eq!(train.len() + test.len(), 7);
    }

    #[test]
    fn seeded_split_is_deterministic() {
        let db = db_with_classes(&[(1, 40), (3, 33), (4, 27)]);
        let spec = SplitSpec { seed: 7, ..Default::default() };
        assert_eq!(stratified_split(&db, &spec).unwrap(), stratified_split(&db, &spec).unwrap());
        let other = SplitSpec { seed: 8, ..Default::default() };
        assert_ne!(stratified_split(&db, &spec).unwrap().1, stratified_split(&db, &other).unwrap().1);
    }

    #[test]
    fn split_errors() {
        let db = db_with_classes(&[]);
        assert_eq!(stratified_split(&db, &SplitSpec::default()).unwrap_err(), PreprocessError::EmptyDatabase);
        let bad = SplitSpec { test_fraction: 1.0, ..Default::default() };
        assert!(matches!(stratified_split(&db_with_classes(&[(1, 3)]), &bad), Err(PreprocessError::InvalidSplit(_))));
    }

    fn labels(counts: &[(usize, usize)]) -> Vec<ClassLabel> {
        counts.iter().flat_map(|&(c, n)| std::iter::repeat_n(ClassLabel::new(c).unwrap(), n)).collect()
    }

    #[test]
    fn even_folds() {
        let y = labels(&[(0, 30), (4, 45), (7, 25)]);
        let folds = stratified_kfold(&y, 10, 3).unwrap();
        assert_eq!(folds.len(), 10);
        assert!(folds.iter().all(|f| f.validate.len() == 10 && f.fit.len() == 90));
    }

    #[test]
    fn one_member_per_fold() {
        let y = labels(&[(3, 10), (5, 20)]);
        let folds = stratified_kfold(&y, 10, 0).unwrap();
        for f in &folds {
            assert_eq!(f.validate.iter().filter(|&&i| y[i].index() == 3).count(), 1);
        }
    }

    #[test]
    fn folds_partition_the_set() {
        let y = labels(&[(0, 3), (1, 17), (2, 8), (9, 1)]);
        let folds = stratified_kfold(&y, 4, 11).unwrap();
        let mut seen = vec![0; y.len()];
        for f in &folds {
            for &i in &f.validate {
                seen[i] += 1;
            }
            assert_eq!(f.fit.len() + f.validate.len(), y.len());
            assert!(f.fit.iter().all(|i| !f.validate.contains(i)));
        }
        assert!(seen.iter().all(|&s| s == 1));
    }

    #[test]
    fn too_many_folds() {
        let y = labels(&[(0, 3)]);
        assert_eq!(stratified_kfold(&y, 4, 0).unwrap_err(), PreprocessError::TooManyFolds { k: 4, n: 3 });
        assert!(stratified_kfold(&y, 1, 0).is_err());
    }
}
