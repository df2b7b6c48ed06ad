//! Pairwise grid search over boosting hyperparameters, scored by k-fold
//! cross-validated log-loss.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::booster::{Hyperparameters, TrainError, train_with_eval};
use crate::matrix::Matrix;
use crate::preprocess::{ClassLabel, PreprocessError, stratified_kfold};

#[derive(Debug, Error, PartialEq)]
pub enum TuneError {
    #[error("fold construction: {0}")]
    Folds(#[from] PreprocessError),
    #[error("training: {0}")]
    Train(#[from] TrainError),
    #[error("invalid search grid: {0}")]
    InvalidGrid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Mean validation log-loss after the last round.
    pub score: f64,
    /// Mean validation log-loss after each round.
    pub per_round: Vec<f64>,
}

/// Mean validation log-loss over `k` stratified folds, each model trained on
/// the other `k - 1`. Folds train in parallel.
pub fn cross_validate(
    x: &Matrix,
    y: &[ClassLabel],
    hp: &Hyperparameters,
    k: usize,
    seed: u64,
) -> Result<CvResult, TuneError> {
    if x.rows() != y.len() {
        return Err(TrainError::LengthMismatch { rows: x.rows(), labels: y.len() }.into());
    }
    let folds = stratified_kfold(y, k, seed)?;
    let curves = folds
        .par_iter()
        .map(|fold| {
            let fx = x.select_rows(&fold.fit);
            let fy: Vec<ClassLabel> = fold.fit.iter().map(|&i| y[i]).collect();
            let vx = x.select_rows(&fold.validate);
            let vy: Vec<ClassLabel> = fold.validate.iter().map(|&i| y[i]).collect();
            train_with_eval(&fx, &fy, hp, seed, Some((&vx, &vy))).map(|(_, log)| log.eval_mlogloss)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let rounds = hp.num_rounds;
    let per_round: Vec<f64> =
        (0..rounds).map(|r| curves.iter().map(|c| c[r]).sum::<f64>() / curves.len() as f64).collect();
    let score = match per_round.last() {
        Some(&s) => s,
        // no rounds: every fold predicts the uniform distribution
        None => (hp.num_class as f64).ln(),
    };
    Ok(CvResult { score, per_round })
}

/// Hyperparameters the search can move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    MaxDepth,
    MinChildWeight,
    LearningRate,
    NumRounds,
    Subsample,
    ColsampleBytree,
    ColsampleBylevel,
    Alpha,
    Lambda,
    Gamma,
    MaxDeltaStep,
}

impl Param {
    pub const ALL: [Param; 11] = [
        Param::MaxDepth,
        Param::MinChildWeight,
        Param::LearningRate,
        Param::NumRounds,
        Param::Subsample,
        Param::ColsampleBytree,
        Param::ColsampleBylevel,
        Param::Alpha,
        Param::Lambda,
        Param::Gamma,
        Param::MaxDeltaStep,
    ];

    fn is_integer(self) -> bool {
        matches!(self, Param::MaxDepth | Param::NumRounds)
    }

    pub fn get(self, hp: &Hyperparameters) -> f64 {
        match self {
            Param::MaxDepth => hp.max_depth as f64,
            Param::MinChildWeight => hp.min_child_weight,
            Param::LearningRate => hp.learning_rate,
            Param::NumRounds => hp.num_rounds as f64,
            Param::Subsample => hp.subsample,
            Param::ColsampleBytree => hp.colsample_bytree,
            Param::ColsampleBylevel => hp.colsample_bylevel,
            Param::Alpha => hp.alpha,
            Param::Lambda => hp.lambda,
            Param::Gamma => hp.gamma,
            Param::MaxDeltaStep => hp.max_delta_step,
        }
    }

    pub fn set(self, hp: &mut Hyperparameters, v: f64) {
        match self {
            Param::MaxDepth => hp.max_depth = v as usize,
            Param::MinChildWeight => hp.min_child_weight = v,
            Param::LearningRate => hp.learning_rate = v,
            Param::NumRounds => hp.num_rounds = v as usize,
            Param::Subsample => hp.subsample = v,
            Param::ColsampleBytree => hp.colsample_bytree = v,
            Param::ColsampleBylevel => hp.colsample_bylevel = v,
            Param::Alpha => hp.alpha = v,
            Param::Lambda => hp.lambda = v,
            Param::Gamma => hp.gamma = v,
            Param::MaxDeltaStep => hp.max_delta_step = v,
        }
    }
}

/// Candidate values per hyperparameter and the order in which pairs are tuned.
/// A pair whose second entry is `None` tunes a single hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchGrid {
    pub candidates: BTreeMap<Param, Vec<f64>>,
    pub pairs: Vec<(Param, Option<Param>)>,
    pub max_sweeps: usize,
    pub folds: usize,
    /// Values the search starts from before projection onto the grid.
    pub start: Hyperparameters,
}

impl Default for SearchGrid {
    fn default() -> Self {
        use Param::*;
        let candidates = BTreeMap::from([
            (MaxDepth, vec![2.0, 3.0, 4.0, 5.0, 6.0]),
            (MinChildWeight, vec![1.0, 2.0, 3.0, 6.0]),
            (LearningRate, vec![0.03, 0.05, 0.1, 0.2, 0.3]),
            (NumRounds, vec![50.0, 100.0, 200.0]),
            (Subsample, vec![0.8, 0.9, 1.0]),
            (ColsampleBytree, vec![0.9, 1.0]),
            (ColsampleBylevel, vec![0.9, 1.0]),
            (Alpha, vec![0.0, 0.2, 0.3, 0.8, 0.9]),
            (Lambda, vec![0.01, 0.03, 0.04, 0.06, 1.0]),
            (Gamma, vec![0.0, 0.01, 0.1]),
            (MaxDeltaStep, vec![0.0, 0.1, 0.2]),
        ]);
        SearchGrid {
            candidates,
            pairs: vec![
                (MaxDepth, Some(MinChildWeight)),
                (LearningRate, Some(NumRounds)),
                (Subsample, Some(ColsampleBytree)),
                (Alpha, Some(Lambda)),
                (Gamma, Some(MaxDeltaStep)),
                (ColsampleBylevel, None),
            ],
            max_sweeps: 3,
            folds: 10,
            start: Hyperparameters::default(),
        }
    }
}

impl SearchGrid {
    /// A grid where every listed hyperparameter has exactly one candidate.
    pub fn singleton(values: &Hyperparameters) -> Self {
        let mut g = SearchGrid::default();
        for (p, c) in g.candidates.iter_mut() {
            *c = vec![p.get(values)];
        }
        g
    }

    pub fn validate(&self) -> Result<(), TuneError> {
        let bad = |m: String| Err(TuneError::InvalidGrid(m));
        if self.max_sweeps == 0 {
            return bad("max_sweeps must be at least 1".into());
        }
        if self.pairs.is_empty() {
            return bad("empty pair schedule".into());
        }
        for (p, c) in &self.candidates {
            if c.is_empty() {
                return bad(format!("{p:?} has no candidates"));
            }
            if p.is_integer() && c.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
                return bad(format!("{p:?} candidates must be non-negative integers"));
            }
            if !self.pairs.iter().any(|&(a, b)| a == *p || b == Some(*p)) {
                return bad(format!("{p:?} appears in no pair"));
            }
        }
        for &(a, b) in &self.pairs {
            for q in std::iter::once(a).chain(b) {
                if !self.candidates.contains_key(&q) {
                    return bad(format!("{q:?} is paired but has no candidates"));
                }
            }
            if b == Some(a) {
                return bad(format!("{a:?} paired with itself"));
            }
        }
        for (p, c) in &self.candidates {
            for &v in c {
                let mut hp = self.start.clone();
                p.set(&mut hp, v);
                hp.validate().map_err(|e| TuneError::InvalidGrid(format!("{p:?} = {v}: {e}")))?;
            }
        }
        Ok(())
    }

    /// The start values with every gridded hyperparameter moved to its
    /// start value if listed, else to its first candidate.
    pub fn projected_start(&self) -> Hyperparameters {
        let mut hp = self.start.clone();
        for (p, c) in &self.candidates {
            if !c.contains(&p.get(&hp)) {
                p.set(&mut hp, c[0]);
            }
        }
        hp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCell {
    pub values: Vec<f64>,
    pub score: f64,
}

/// One pair evaluation, written as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub sweep: usize,
    pub pair: Vec<Param>,
    pub cells: Vec<TraceCell>,
    pub adopted: Vec<f64>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub hyperparameters: Hyperparameters,
    /// Cross-validated log-loss of `hyperparameters`.
    pub score: f64,
    /// Score of the projected start values.
    pub start_score: f64,
    pub sweeps: usize,
    pub trace: Vec<TraceEntry>,
}

impl SearchResult {
    pub fn trace_jsonl(&self) -> String {
        self.trace.iter().map(|e| serde_json::to_string(e).expect("trace is serializable") + "\n").collect()
    }
}

/// Score every cell of one pair. When `num_rounds` is in the pair, cells
/// that differ only in round count share one training run: boosting is
/// prefix-stable, so the shorter models are read off the longer curve.
fn score_pair(
    x: &Matrix,
    y: &[ClassLabel],
    base: &Hyperparameters,
    params: &[Param],
    cells: &[Vec<f64>],
    folds: usize,
    seed: u64,
) -> Result<Vec<f64>, TuneError> {
    let rounds_at = params.iter().position(|&p| p == Param::NumRounds);
    // group cells by their non-round values, keyed by first occurrence
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for (i, cell) in cells.iter().enumerate() {
        let key: Vec<f64> = cell.iter().enumerate().filter(|&(j, _)| Some(j) != rounds_at).map(|(_, &v)| v).collect();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, members)) => members.push(i),
            None => groups.push((key, vec![i])),
        }
    }
    let results = groups
        .par_iter()
        .map(|(_, members)| {
            let mut hp = base.clone();
            for (j, &p) in params.iter().enumerate() {
                p.set(&mut hp, cells[members[0]][j]);
            }
            if let Some(r) = rounds_at {
                hp.num_rounds = members.iter().map(|&i| cells[i][r] as usize).max().unwrap_or(0);
            }
            let cv = cross_validate(x, y, &hp, folds, seed)?;
            Ok(members
                .iter()
                .map(|&i| {
                    let score = match rounds_at {
                        Some(r) => match cells[i][r] as usize {
                            0 => (hp.num_class as f64).ln(),
                            n => cv.per_round[n - 1],
                        },
                        None => cv.score,
                    };
                    (i, score)
                })
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, TuneError>>()?;
    let mut scores = vec![f64::NAN; cells.len()];
    for (i, s) in results.into_iter().flatten() {
        scores[i] = s;
    }
    Ok(scores)
}

/// Tune pairs of hyperparameters in turn, holding the rest fixed.
///
/// Each pair evaluation scores the Cartesian product of the pair's
/// candidates and adopts the lowest cross-validated log-loss, ties going to
/// the earliest cell. Because the search starts from values on the grid, the
/// incumbent is always among the cells, so the score never rises. Sweeps
/// repeat until one changes nothing or `max_sweeps` is reached.
pub fn pairwise_grid_search(
    x: &Matrix,
    y: &[ClassLabel],
    grid: &SearchGrid,
    seed: u64,
) -> Result<SearchResult, TuneError> {
    grid.validate()?;
    let mut hp = grid.projected_start();
    let start_score = cross_validate(x, y, &hp, grid.folds, seed)?.score;
    let mut score = start_score;
    let mut trace = Vec::new();
    let mut sweeps = 0;
    while sweeps < grid.max_sweeps {
        sweeps += 1;
        let mut changed = false;
        for &(a, b) in &grid.pairs {
            let params: Vec<Param> = std::iter::once(a).chain(b).collect();
            let mut cells: Vec<Vec<f64>> = vec![vec![]];
            for p in &params {
                cells = cells
                    .into_iter()
                    .flat_map(|c| {
                        grid.candidates[p].iter().map(move |&v| {
                            let mut c = c.clone();
                            c.push(v);
                            c
                        })
                    })
                    .collect();
            }
            let scores = score_pair(x, y, &hp, &params, &cells, grid.folds, seed)?;
            let mut best = 0;
            for (i, s) in scores.iter().enumerate() {
                if *s < scores[best] {
                    best = i;
                }
            }
            let current: Vec<f64> = params.iter().map(|p| p.get(&hp)).collect();
            if cells[best] != current {
                changed = true;
                for (p, &v) in params.iter().zip(&cells[best]) {
                    p.set(&mut hp, v);
                }
            }
            score = scores[best];
            trace.push(TraceEntry {
                sweep: sweeps,
                pair: params.clone(),
                cells: cells.iter().zip(&scores).map(|(v, &s)| TraceCell { values: v.clone(), score: s }).collect(),
                adopted: cells[best].clone(),
                score,
            });
        }
        if !changed {
            break;
        }
    }
    Ok(SearchResult { hyperparameters: hp, score, start_score, sweeps, trace })
}
