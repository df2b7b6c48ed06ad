//! Classification scores on ordinal RF classes.
//!
//! Neighborhood accuracy counts predictions exactly one class away from the
//! truth, so it is disjoint from plain accuracy and the two add up to the
//! "within one class" rate. Macro-F1 always divides by the full class count.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::DatabaseTag;
use crate::preprocess::{ClassLabel, NUM_CLASSES};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("no predictions to score")]
    Empty,
    #[error("{predicted} predictions for {actual} labels")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("label {label} outside 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },
}

fn check(pred: &[ClassLabel], actual: &[ClassLabel]) -> Result<(), MetricError> {
    if pred.len() != actual.len() {
        return Err(MetricError::LengthMismatch { predicted: pred.len(), actual: actual.len() });
    }
    if pred.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

fn fraction(
    pred: &[ClassLabel],
    actual: &[ClassLabel],
    keep: impl Fn(usize, usize) -> bool,
) -> Result<f64, MetricError> {
    check(pred, actual)?;
    let hits = pred.iter().zip(actual).filter(|(p, a)| keep(p.index(), a.index())).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Share of exact class matches.
pub fn accuracy(pred: &[ClassLabel], actual: &[ClassLabel]) -> Result<f64, MetricError> {
    fraction(pred, actual, |p, a| p == a)
}

/// Share of predictions exactly one class above or below the truth.
pub fn neighborhood_accuracy(pred: &[ClassLabel], actual: &[ClassLabel]) -> Result<f64, MetricError> {
    fraction(pred, actual, |p, a| p.abs_diff(a) == 1)
}

/// Sum of per-class F1 over `n_classes`; a class with no true or predicted
/// members contributes zero.
pub fn macro_f1(pred: &[ClassLabel], actual: &[ClassLabel], n_classes: usize) -> Result<f64, MetricError> {
    check(pred, actual)?;
    if let Some(bad) = pred.iter().chain(actual).find(|c| c.index() >= n_classes) {
        return Err(MetricError::LabelOutOfRange { label: bad.index(), n_classes });
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fneg = vec![0usize; n_classes];
    for (p, a) in pred.iter().zip(actual) {
        if p == a {
            tp[p.index()] += 1;
        } else {
            fp[p.index()] += 1;
            fneg[a.index()] += 1;
        }
    }
    let mut total = 0.0;
    for c in 0..n_classes {
        let precision = ratio(tp[c], tp[c] + fp[c]);
        let recall = ratio(tp[c], tp[c] + fneg[c]);
        if precision + recall > 0.0 {
            total += 2.0 * precision * recall / (precision + recall);
        }
    }
    Ok(total / n_classes as f64)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 { 0.0 } else { num as f64 / den as f64 }
}

/// One cell of the predicted-versus-actual bubble chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bubble {
    pub predicted: ClassLabel,
    pub actual: ClassLabel,
    pub count: usize,
}

/// Non-zero confusion counts, ordered by (predicted, actual).
pub fn confusion_bubbles(pred: &[ClassLabel], actual: &[ClassLabel]) -> Result<Vec<Bubble>, MetricError> {
    check(pred, actual)?;
    let mut counts: BTreeMap<(ClassLabel, ClassLabel), usize> = BTreeMap::new();
    for (&p, &a) in pred.iter().zip(actual) {
        *counts.entry((p, a)).or_default() += 1;
    }
    Ok(counts.into_iter().map(|((predicted, actual), count)| Bubble { predicted, actual, count }).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    Train,
    Test,
    Independent,
}

impl DatasetRole {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetRole::Train => "train",
            DatasetRole::Test => "test",
            DatasetRole::Independent => "independent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub role: DatasetRole,
    /// Database the scored samples came from.
    pub database: DatabaseTag,
    pub sample_count: usize,
    pub accuracy: f64,
    pub neighborhood_accuracy: f64,
    pub total_accuracy: f64,
    pub macro_f1: f64,
    pub bubbles: Vec<Bubble>,
}

impl EvaluationReport {
    pub fn new(
        role: DatasetRole,
        database: DatabaseTag,
        pred: &[ClassLabel],
        actual: &[ClassLabel],
    ) -> Result<Self, MetricError> {
        let accuracy = accuracy(pred, actual)?;
        let neighborhood_accuracy = neighborhood_accuracy(pred, actual)?;
        Ok(EvaluationReport {
            role,
            database,
            sample_count: pred.len(),
            accuracy,
            neighborhood_accuracy,
            total_accuracy: accuracy + neighborhood_accuracy,
            macro_f1: macro_f1(pred, actual, NUM_CLASSES)?,
            bubbles: confusion_bubbles(pred, actual)?,
        })
    }

    /// `accuracy (neighborhood)` as printed in the results table.
    pub fn accuracy_cell(&self) -> String {
        format!("{:.2} ({:.2})", self.accuracy, self.neighborhood_accuracy)
    }
}

/// Long-form summary: one row per evaluated dataset of a run.
pub fn summary_csv(combo: DatabaseTag, reports: &[EvaluationReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "database",
        "role",
        "evaluated_on",
        "samples",
        "accuracy",
        "neighborhood_accuracy",
        "total_accuracy",
        "macro_f1",
    ])
    .expect("in-memory write");
    for r in reports {
        w.write_record([
            combo.to_string(),
            r.role.as_str().to_string(),
            r.database.to_string(),
            r.sample_count.to_string(),
            format!("{:.6}", r.accuracy),
            format!("{:.6}", r.neighborhood_accuracy),
            format!("{:.6}", r.total_accuracy),
            format!("{:.6}", r.macro_f1),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

/// Wide results table: one row per combination, accuracy cells carrying the
/// neighborhood accuracy in parentheses, `-` where no independent database exists.
pub fn table3_csv(rows: &[(DatabaseTag, Vec<EvaluationReport>)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "database",
        "train_accuracy",
        "train_macro_f1",
        "test_accuracy",
        "test_macro_f1",
        "independent_database",
        "independent_accuracy",
        "independent_macro_f1",
    ])
    .expect("in-memory write");
    for (combo, reports) in rows {
        let find = |role| reports.iter().find(|r| r.role == role);
        let cells = |r: Option<&EvaluationReport>| match r {
            Some(r) => (r.accuracy_cell(), format!("{:.2}", r.macro_f1)),
            None => ("-".to_string(), "-".to_string()),
        };
        let (tra, trf) = cells(find(DatasetRole::Train));
        let (tea, tef) = cells(find(DatasetRole::Test));
        let ind = find(DatasetRole::Independent);
        let (ina, inf) = cells(ind);
        let name = ind.map_or("-".to_string(), |r| r.database.to_string());
        w.write_record([combo.to_string(), tra, trf, tea, tef, name, ina, inf]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn l(v: &[usize]) -> Vec<ClassLabel> {
        v.iter().map(|&i| ClassLabel::new(i).unwrap()).collect()
    }

    #[test]
    fn hand_computed_cases() {
        let (p, a) = (l(&[2, 3, 4, 9]), l(&[2, 4, 0, 9]));
        assert_eq!(accuracy(&p, &a).unwrap(), 0.5);
        assert_eq!(neighborhood_accuracy(&p, &a).unwrap(), 0.25);
        assert_eq!(accuracy(&a, &a).unwrap(), 1.0);
        assert_eq!(accuracy(&l(&[1, 1]), &l(&[5, 6])).unwrap(), 0.0);
        assert_eq!(neighborhood_accuracy(&a, &a).unwrap(), 0.0);
        assert_eq!(neighborhood_accuracy(&l(&[1, 5, 9]), &l(&[0, 4, 8])).unwrap(), 1.0);
    }

    #[test]
    fn macro_f1_fixed_denominator() {
        let f = macro_f1(&l(&[0, 0, 1]), &l(&[0, 1, 1]), 10).unwrap();
        assert!((f - 2.0 / 15.0).abs() < 1e-15);
        let all: Vec<usize> = (0..10).collect();
        assert_eq!(macro_f1(&l(&all), &l(&all), 10).unwrap(), 1.0);
        assert!((macro_f1(&l(&[0, 1, 1]), &l(&[0, 1, 1]), 10).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        assert_eq!(accuracy(&[], &[]).unwrap_err(), MetricError::Empty);
        assert!(matches!(accuracy(&l(&[1]), &l(&[1, 2])), Err(MetricError::LengthMismatch { .. })));
        assert!(matches!(macro_f1(&l(&[5]), &l(&[1]), 3), Err(MetricError::LabelOutOfRange { label: 5, .. })));
    }

    #[test]
    fn bubbles() {
        let b = confusion_bubbles(&l(&[2, 2, 3]), &l(&[2, 3, 3])).unwrap();
        let cells: Vec<(usize, usize, usize)> =
            b.iter().map(|b| (b.predicted.index(), b.actual.index(), b.count)).collect();
        assert_eq!(cells, vec![(2, 2, 1), (2, 3, 1), (3, 3, 1)]);
    }

    #[test]
    fn report_and_tables() {
        let r =
            EvaluationReport::new(DatasetRole::Test, DatabaseTag::Tc, &l(&[2, 3, 4, 9]), &l(&[2, 4, 0, 9])).unwrap();
        assert_eq!(r.total_accuracy, 0.75);
        assert_eq!(r.accuracy_cell(), "0.50 (0.25)");
        let s = summary_csv(DatabaseTag::Tc, std::slice::from_ref(&r));
        assert_eq!(s.lines().count(), 2);
        assert!(s.lines().nth(1).unwrap().starts_with("TC,test,TC,4,0.500000,0.250000,0.750000,"));
        let t = table3_csv(&[(DatabaseTag::Tca, vec![r])]);
        assert!(t.lines().nth(1).unwrap().ends_with(",-,-,-"));
    }

    fn labels() -> impl Strategy<Value = (Vec<ClassLabel>, Vec<ClassLabel>)> {
        (1usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(0usize..10, n).prop_map(|v| l(&v)),
                proptest::collection::vec(0usize..10, n).prop_map(|v| l(&v)),
            )
        })
    }

    proptest! {
        #[test]
        fn identities((p, a) in labels()) {
            let acc = accuracy(&p, &a).unwrap();
            let nb = neighborhood_accuracy(&p, &a).unwrap();
            let within = p.iter().zip(&a).filter(|(x, y)| x.index().abs_diff(y.index()) <= 1).count() as f64 / p.len() as f64;
            prop_assert!(acc + nb <= 1.0 + 1e-12);
            prop_assert!((acc + nb - within).abs() < 1e-12);
            let f1 = macro_f1(&p, &a, 10).unwrap();
            prop_assert!((0.0..=1.0).contains(&f1));
            let b = confusion_bubbles(&p, &a).unwrap();
            prop_assert_eq!(b.iter().map(|b| b.count).sum::<usize>(), p.len());
            let diag: usize = b.iter().filter(|b| b.predicted == b.actual).map(|b| b.count).sum();
            prop_assert!((diag as f64 / p.len() as f64 - acc).abs() < 1e-12);
        }

        #[test]
        fn permutation_invariant((p, a) in labels(), rot in 0usize..60) {
            let k = rot % p.len();
            let mut p2 = p.clone();
            let mut a2 = a.clone();
            p2.rotate_left(k);
            a2.rotate_left(k);
            prop_assert_eq!(accuracy(&p, &a).unwrap(), accuracy(&p2, &a2).unwrap());
            prop_assert_eq!(neighborhood_accuracy(&p, &a).unwrap(), neighborhood_accuracy(&p2, &a2).unwrap());
            prop_assert_eq!(macro_f1(&p, &a, 10).unwrap(), macro_f1(&p2, &a2, 10).unwrap());
            prop_assert_eq!(confusion_bubbles(&p, &a).unwrap(), confusion_bubbles(&p2, &a2).unwrap());
        }
    }
}
