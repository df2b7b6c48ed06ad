//! Multiclass softmax gradient boosting with exact greedy regression trees.
//!
//! Each round computes class probabilities from the accumulated margins,
//! derives per-class gradient pairs and grows one tree per class. The trees
//! of a round are independent of each other and are grown in parallel.

mod objective;
mod params;
mod split;
mod tree;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use objective::{GradientPair, PROB_EPS, gradient, mlogloss, softmax};
pub use params::{DEFAULT_ROUNDS, EvalMetric, Hyperparameters, Objective};
pub use split::{SplitCandidate, find_best_split, leaf_weight, midpoint, split_gain};
pub use tree::TreeNode;

use crate::matrix::Matrix;
use crate::preprocess::ClassLabel;
use crate::rng::{seeded, streams};
use objective::mlogloss_from_margins;
use tree::{SortedColumns, grow_tree};

/// Version tag written into serialized ensembles.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("row {row}: label {label} outside 0..{num_class}")]
    LabelOutOfRange { row: usize, label: usize, num_class: usize },
    #[error("row {row}, feature {feature}: value is not finite")]
    NonFinite { row: usize, feature: usize },
    #[error("expected {expected} features, got {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("model format: {0}")]
    Format(String),
}

/// Trained forest: `rounds[r][k]` is the class-`k` tree of round `r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub format_version: u32,
    pub hyperparameters: Hyperparameters,
    pub num_features: usize,
    pub feature_names: Vec<String>,
    pub base_margin: f64,
    pub rounds: Vec<Vec<TreeNode>>,
}

impl Ensemble {
    /// A model with no trees: every class margin is `base_margin` (zero).
    pub fn empty(hyperparameters: Hyperparameters, num_features: usize) -> Self {
        Ensemble {
            format_version: FORMAT_VERSION,
            hyperparameters,
            num_features,
            feature_names: (0..num_features).map(|j| format!("f{j}")).collect(),
            base_margin: 0.0,
            rounds: Vec::new(),
        }
    }

    pub fn num_class(&self) -> usize {
        self.hyperparameters.num_class
    }

    pub fn num_rounds(&self) -> usize {
        self.rounds.len()
    }

    /// Trees contributing to one class margin.
    pub fn class_trees(&self, class: usize) -> impl Iterator<Item = &TreeNode> {
        self.rounds.iter().map(move |r| &r[class])
    }

    /// The first `rounds` rounds of this model.
    pub fn truncated(&self, rounds: usize) -> Ensemble {
        Ensemble { rounds: self.rounds[..rounds.min(self.rounds.len())].to_vec(), ..self.clone() }
    }

    fn check_arity(&self, row: &[f64]) -> Result<(), TrainError> {
        if row.len() != self.num_features {
            return Err(TrainError::ArityMismatch { expected: self.num_features, found: row.len() });
        }
        Ok(())
    }

    /// Raw per-class scores before the softmax.
    pub fn margins(&self, row: &[f64]) -> Result<Vec<f64>, TrainError> {
        self.check_arity(row)?;
        let mut m = vec![self.base_margin; self.num_class()];
        for round in &self.rounds {
            for (k, tree) in round.iter().enumerate() {
                m[k] += tree.predict(row);
            }
        }
        Ok(m)
    }

    pub fn predict_proba(&self, row: &[f64]) -> Result<Vec<f64>, TrainError> {
        self.margins(row).map(|m| softmax(&m))
    }

    /// Most probable class; ties go to the lowest index.
    pub fn predict_class(&self, row: &[f64]) -> Result<ClassLabel, TrainError> {
        let m = self.margins(row)?;
        let mut best = 0;
        for (k, &v) in m.iter().enumerate() {
            if v > m[best] {
                best = k;
            }
        }
        Ok(ClassLabel::new(best).expect("num_class never exceeds the label range"))
    }

    pub fn predict_classes(&self, x: &Matrix) -> Result<Vec<ClassLabel>, TrainError> {
        x.iter_rows().map(|r| self.predict_class(r)).collect()
    }

    pub fn predict_proba_matrix(&self, x: &Matrix) -> Result<Matrix, TrainError> {
        let rows = x.iter_rows().map(|r| self.predict_proba(r)).collect::<Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return Ok(Matrix::zeros(0, self.num_class()));
        }
        Ok(Matrix::from_rows(&rows))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("ensemble is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let e: Ensemble = serde_json::from_str(text).map_err(|err| TrainError::Format(err.to_string()))?;
        if e.format_version != FORMAT_VERSION {
            return Err(TrainError::Format(format!("unsupported format version {}", e.format_version)));
        }
        if e.rounds.iter().any(|r| r.len() != e.num_class()) {
            return Err(TrainError::Format("round with wrong number of class trees".into()));
        }
        Ok(e)
    }
}

/// Per-round log-loss, measured after each round's trees are added.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub train_mlogloss: Vec<f64>,
    pub eval_mlogloss: Vec<f64>,
}

fn validate_inputs(x: &Matrix, y: &[ClassLabel], hp: &Hyperparameters) -> Result<(), TrainError> {
    hp.validate()?;
    if x.rows() == 0 {
        return Err(TrainError::EmptyTrainingSet);
    }
    if x.rows() != y.len() {
        return Err(TrainError::LengthMismatch { rows: x.rows(), labels: y.len() });
    }
    for (row, label) in y.iter().enumerate() {
        if label.index() >= hp.num_class {
            return Err(TrainError::LabelOutOfRange { row, label: label.index(), num_class: hp.num_class });
        }
    }
    for (i, r) in x.iter_rows().enumerate() {
        if let Some(feature) = r.iter().position(|v| !v.is_finite()) {
            return Err(TrainError::NonFinite { row: i, feature });
        }
    }
    Ok(())
}

pub fn train(x: &Matrix, y: &[ClassLabel], hp: &Hyperparameters, seed: u64) -> Result<Ensemble, TrainError> {
    train_with_eval(x, y, hp, seed, None).map(|(e, _)| e)
}

/// Train, logging training (and optionally held-out) log-loss per round.
pub fn train_with_eval(
    x: &Matrix,
    y: &[ClassLabel],
    hp: &Hyperparameters,
    seed: u64,
    eval: Option<(&Matrix, &[ClassLabel])>,
) -> Result<(Ensemble, TrainLog), TrainError> {
    validate_inputs(x, y, hp)?;
    if let Some((ex, ey)) = eval {
        if ex.rows() != ey.len() {
            return Err(TrainError::LengthMismatch { rows: ex.rows(), labels: ey.len() });
        }
        if ex.cols() != x.cols() {
            return Err(TrainError::ArityMismatch { expected: x.cols(), found: ex.cols() });
        }
    }
    let n = x.rows();
    let k_count = hp.num_class;
    let sorted = SortedColumns::new(x);
    let mut ensemble = Ensemble::empty(hp.clone(), x.cols());
    let mut margins = Matrix::zeros(n, k_count);
    let mut eval_margins = eval.map(|(ex, _)| Matrix::zeros(ex.rows(), k_count));
    let mut log = TrainLog::default();

    for round in 0..hp.num_rounds {
        let probs: Vec<Vec<f64>> = margins.iter_rows().map(softmax).collect();
        let trees: Vec<TreeNode> = (0..k_count)
            .into_par_iter()
            .map(|k| {
                let (grad, hess): (Vec<f64>, Vec<f64>) = (0..n)
                    .map(|i| {
                        let gp = gradient(probs[i][k], y[i].index() == k);
                        (gp.g, gp.h)
                    })
                    .unzip();
                let mut rng = seeded(seed, streams::TREES + (round * k_count + k) as u64);
                grow_tree(x, &sorted, &grad, &hess, hp, &mut rng)
            })
            .collect();
        for i in 0..n {
            for (k, t) in trees.iter().enumerate() {
                margins.set(i, k, margins.get(i, k) + t.predict(x.row(i)));
            }
        }
        log.train_mlogloss.push(mlogloss_from_margins(&margins, y));
        if let (Some((ex, ey)), Some(em)) = (eval, eval_margins.as_mut()) {
            for i in 0..ex.rows() {
                for (k, t) in trees.iter().enumerate() {
                    em.set(i, k, em.get(i, k) + t.predict(ex.row(i)));
                }
            }
            log.eval_mlogloss.push(mlogloss_from_margins(em, ey));
        }
        ensemble.rounds.push(trees);
    }
    Ok((ensemble, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[usize]) -> Vec<ClassLabel> {
        v.iter().map(|&i| ClassLabel::new(i).unwrap()).collect()
    }

    fn clusters(n: usize) -> (Matrix, Vec<ClassLabel>) {
        // two well-separated 2-d clusters, deterministic jitter
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let c = i % 2;
            let j = ((i * 37) % 17) as f64 / 170.0;
            let base = if c == 0 { 0.1 } else { 0.7 };
            rows.push([base + j, base + 0.1 - j]);
            y.push(c);
        }
        (Matrix::from_rows(&rows), labels(&y))
    }

    #[test]
    fn zero_rounds_is_uniform() {
        let (x, y) = clusters(10);
        let hp = Hyperparameters { num_rounds: 0, ..Default::default() };
        let e = train(&x, &y, &hp, 0).unwrap();
        let p = e.predict_proba(x.row(0)).unwrap();
        assert!(p.iter().all(|&v| (v - 0.1).abs() < 1e-15));
    }

    #[test]
    fn constant_target() {
        let (x, _) = clusters(20);
        let y = labels(&[3; 20]);
        let hp = Hyperparameters { num_rounds: 1, ..Default::default() };
        let e = train(&x, &y, &hp, 0).unwrap();
        assert!(e.predict_classes(&x).unwrap().iter().all(|c| c.index() == 3));
    }

    #[test]
    fn separates_clusters_with_published_tc_settings() {
        let (x, y) = clusters(200);
        let hp = Hyperparameters { num_rounds: 50, ..Hyperparameters::published(crate::dataset::DatabaseTag::Tc) };
        let e = train(&x, &y, &hp, 1).unwrap();
        let pred = e.predict_classes(&x).unwrap();
        let acc = pred.iter().zip(&y).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
        assert!(acc >= 0.95, "accuracy {acc}");
        for round in &e.rounds {
            for t in round {
                t.audit(&hp).unwrap();
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let (x, y) = clusters(4);
        let hp = Hyperparameters::default();
        assert_eq!(train(&Matrix::zeros(0, 2), &[], &hp, 0).unwrap_err(), TrainError::EmptyTrainingSet);
        assert!(matches!(train(&x, &y[..3], &hp, 0), Err(TrainError::LengthMismatch { .. })));
        let small = Hyperparameters { num_class: 2, ..Default::default() };
        assert!(matches!(
            train(&x, &labels(&[0, 1, 2, 0]), &small, 0),
            Err(TrainError::LabelOutOfRange { row: 2, .. })
        ));
        let mut bad = x.clone();
        bad.set(1, 1, f64::NAN);
        assert_eq!(train(&bad, &y, &hp, 0).unwrap_err(), TrainError::NonFinite { row: 1, feature: 1 });
    }

    #[test]
    fn arity_checked_at_prediction() {
        let e = Ensemble::empty(Hyperparameters::default(), 3);
        assert_eq!(e.predict_class(&[0.0]).unwrap_err(), TrainError::ArityMismatch { expected: 3, found: 1 });
        assert_eq!(e.predict_class(&[0.0; 3]).unwrap().index(), 0);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (x, y) = clusters(40);
        let hp = Hyperparameters { num_rounds: 5, subsample: 0.8, ..Default::default() };
        let e = train(&x, &y, &hp, 9).unwrap();
        let text = e.to_json();
        let back = Ensemble::from_json(&text).unwrap();
        assert_eq!(back, e);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rejects_unknown_format_version() {
        let mut e = Ensemble::empty(Hyperparameters::default(), 1);
        e.format_version = 99;
        assert!(matches!(Ensemble::from_json(&e.to_json()), Err(TrainError::Format(_))));
    }

    #[test]
    fn seeded_training_is_reproducible() {
        let (x, y) = clusters(60);
        let hp = Hyperparameters { num_rounds: 8, subsample: 0.7, colsample_bytree: 0.5, ..Default::default() };
        assert_eq!(train(&x, &y, &hp, 4).unwrap().to_json(), train(&x, &y, &hp, 4).unwrap().to_json());
    }
}
