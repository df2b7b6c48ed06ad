use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::dataset::DatabaseTag;
use crate::preprocess::NUM_CLASSES;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    #[serde(rename = "multi:softmax")]
    Softmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMetric {
    #[serde(rename = "mlogloss")]
    Mlogloss,
}

/// Boosting knobs.
///
/// `alpha` and `lambda` are the L1 and L2 penalties on leaf weights,
/// `gamma` the minimum split gain and `max_delta_step` the leaf-weight clip
/// (0 disables it).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparameters {
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub learning_rate: f64,
    pub subsample: f64,
    pub colsample_bytree: f64,
    pub colsample_bylevel: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub max_delta_step: f64,
    pub num_class: usize,
    pub objective: Objective,
    pub eval_metric: EvalMetric,
    pub num_rounds: usize,
}

/// Rounds used when nothing else is configured.
pub const DEFAULT_ROUNDS: usize = 200;

impl Default for Hyperparameters {
    /// The reference library's defaults, with [`DEFAULT_ROUNDS`] rounds.
    fn default() -> Self {
        Hyperparameters {
            max_depth: 6,
            min_child_weight: 1.0,
            learning_rate: 0.3,
            subsample: 1.0,
            colsample_bytree: 1.0,
            colsample_bylevel: 1.0,
            alpha: 0.0,
            lambda: 1.0,
            gamma: 0.0,
            max_delta_step: 0.0,
            num_class: NUM_CLASSES,
            objective: Objective::Softmax,
            eval_metric: EvalMetric::Mlogloss,
            num_rounds: DEFAULT_ROUNDS,
        }
    }
}

impl Hyperparameters {
    /// Tuned settings reported for each database combination.
    ///
    /// Only the combinations have presets; single sources fall back to TC.
    pub fn published(combo: DatabaseTag) -> Self {
        let base = Hyperparameters { gamma: 0.01, ..Default::default() };
        match combo {
            DatabaseTag::Ta => Hyperparameters {
                max_depth: 4,
                min_child_weight: 3.0,
                learning_rate: 0.05,
                subsample: 0.8,
                colsample_bytree: 1.0,
                colsample_bylevel: 1.0,
                alpha: 0.8,
                lambda: 0.06,
                max_delta_step: 0.1,
                ..base
            },
            DatabaseTag::Ca => Hyperparameters {
                max_depth: 4,
                min_child_weight: 2.0,
                learning_rate: 0.05,
                subsample: 0.9,
                colsample_bytree: 1.0,
                colsample_bylevel: 1.0,
                alpha: 0.3,
                lambda: 0.04,
                max_delta_step: 0.2,
                ..base
            },
            DatabaseTag::Tca => Hyperparameters {
                max_depth: 5,
                min_child_weight: 2.0,
                learning_rate: 0.05,
                subsample: 0.9,
                colsample_bytree: 1.0,
                colsample_bylevel: 1.0,
                alpha: 0.9,
                lambda: 0.03,
                max_delta_step: 0.2,
                ..base
            },
            _ => Hyperparameters {
                max_depth: 2,
                min_child_weight: 6.0,
                learning_rate: 0.1,
                subsample: 0.9,
                colsample_bytree: 0.9,
                colsample_bylevel: 0.9,
                alpha: 0.2,
                lambda: 0.01,
                max_delta_step: 0.1,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |what: &str, v: f64| Err(TrainError::InvalidHyperparameter(format!("{what} = {v}")));
        if self.max_depth < 1 {
            return bad("max_depth", self.max_depth as f64);
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate", self.learning_rate);
        }
        for (name, v) in [
            ("subsample", self.subsample),
            ("colsample_bytree", self.colsample_bytree),
            ("colsample_bylevel", self.colsample_bylevel),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return bad(name, v);
            }
        }
        for (name, v) in [
            ("min_child_weight", self.min_child_weight),
            ("alpha", self.alpha),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("max_delta_step", self.max_delta_step),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(name, v);
            }
        }
        if self.num_class < 2 {
            return bad("num_class", self.num_class as f64);
        }
        Ok(())
    }
}
