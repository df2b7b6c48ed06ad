use rand::RngExt;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Hyperparameters;
use super::split::{SplitCandidate, SplitScan, leaf_weight};
use crate::matrix::Matrix;

/// Regression tree node. `cover` is the training hessian mass that reached it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        /// Rows with `value < threshold` go left.
        threshold: f64,
        gain: f64,
        cover: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        weight: f64,
        cover: f64,
    },
}

impl TreeNode {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { weight, .. } => return *weight,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    node = if row[*feature] < *threshold { left } else { right };
                }
            }
        }
    }

    pub fn cover(&self) -> f64 {
        match self {
            TreeNode::Split { cover, .. } | TreeNode::Leaf { cover, .. } => *cover,
        }
    }

    /// Edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Whether any split in the tree tests `feature`.
    pub fn uses_feature(&self, feature: usize) -> bool {
        match self {
            TreeNode::Leaf { .. } => false,
            TreeNode::Split { feature: f, left, right, .. } => {
                *f == feature || left.uses_feature(feature) || right.uses_feature(feature)
            }
        }
    }

    /// Check the growth constraints: depth at most `max_depth`, every child
    /// of a split with at least `min_child_weight` cover, every split with
    /// positive net gain. A lone root leaf is exempt from the cover rule.
    pub fn audit(&self, hp: &Hyperparameters) -> Result<(), String> {
        if self.depth() > hp.max_depth {
            return Err(format!("depth {} exceeds max_depth {}", self.depth(), hp.max_depth));
        }
        fn walk(node: &TreeNode, hp: &Hyperparameters) -> Result<(), String> {
            if let TreeNode::Split { gain, left, right, threshold, .. } = node {
                if !(*gain > 0.0) {
                    return Err(format!("split at {threshold} has net gain {gain}"));
                }
                for child in [left, right] {
                    if child.cover() < hp.min_child_weight {
                        return Err(format!("child cover {} below min_child_weight", child.cover()));
                    }
                    walk(child, hp)?;
                }
            }
            Ok(())
        }
        walk(self, hp)
    }
}

/// Pre-sorted row order per feature, computed once per training run.
pub(crate) struct SortedColumns {
    order: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub(crate) fn new(x: &Matrix) -> Self {
        let order = (0..x.cols())
            .map(|j| {
                let mut idx: Vec<u32> = (0..x.rows() as u32).collect();
                idx.sort_by(|&a, &b| x.get(a as usize, j).total_cmp(&x.get(b as usize, j)).then(a.cmp(&b)));
                idx
            })
            .collect();
        SortedColumns { order }
    }
}

/// Flat node storage used while a tree is being grown.
enum Slot {
    Pending { g: f64, h: f64 },
    Leaf { weight: f64, cover: f64 },
    Split { feature: usize, threshold: f64, gain: f64, cover: f64, left: usize, right: usize },
}

fn sample_columns(from: &[usize], fraction: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if fraction >= 1.0 {
        return from.to_vec();
    }
    let take = ((fraction * from.len() as f64).round() as usize).clamp(1, from.len());
    let mut cols = from.to_vec();
    cols.shuffle(rng);
    cols.truncate(take);
    cols.sort_unstable();
    cols
}

/// Grow one tree level by level with exact greedy splits.
///
/// Rows are Bernoulli-sampled at `subsample`; the tree's column set is drawn
/// once at `colsample_bytree` and re-drawn from it at each depth at
/// `colsample_bylevel`. Candidate features are scanned in ascending index
/// order and a later feature must win by strictly larger gain. Leaf weights
/// include the learning rate.
pub(crate) fn grow_tree(
    x: &Matrix,
    sorted: &SortedColumns,
    grad: &[f64],
    hess: &[f64],
    hp: &Hyperparameters,
    rng: &mut ChaCha8Rng,
) -> TreeNode {
    let n = x.rows();
    // position of each row in the current frontier, or None if out of play
    let mut position: Vec<Option<usize>> = if hp.subsample < 1.0 {
        (0..n).map(|_| rng.random_bool(hp.subsample).then_some(0)).collect()
    } else {
        vec![Some(0); n]
    };
    let all_columns: Vec<usize> = (0..x.cols()).collect();
    let tree_columns = sample_columns(&all_columns, hp.colsample_bytree, rng);

    let (mut g0, mut h0) = (0.0, 0.0);
    for i in 0..n {
        if position[i].is_some() {
            g0 += grad[i];
            h0 += hess[i];
        }
    }
    let mut slots = vec![Slot::Pending { g: g0, h: h0 }];
    // frontier entries index into `slots`
    let mut frontier = vec![0usize];

    for depth in 0..=hp.max_depth {
        if frontier.is_empty() {
            break;
        }
        let totals: Vec<(f64, f64)> = frontier
            .iter()
            .map(|&s| match slots[s] {
                Slot::Pending { g, h } => (g, h),
                _ => unreachable!("frontier holds pending nodes"),
            })
            .collect();
        let mut best: Vec<Option<(usize, SplitCandidate)>> = vec![None; frontier.len()];
        if depth < hp.max_depth {
            let level_columns = sample_columns(&tree_columns, hp.colsample_bylevel, rng);
            for &feature in &level_columns {
                let mut scans: Vec<SplitScan> = totals.iter().map(|&(g, h)| SplitScan::new(g, h)).collect();
                for &row in &sorted.order[feature] {
                    let row = row as usize;
                    if let Some(p) = position[row] {
                        scans[p].push(x.get(row, feature), grad[row], hess[row], hp);
                    }
                }
                for (p, scan) in scans.into_iter().enumerate() {
                    if let Some(c) = scan.best {
                        if best[p].is_none_or(|(_, b)| c.gain > b.gain) {
                            best[p] = Some((feature, c));
                        }
                    }
                }
            }
        }

        let mut next_frontier = Vec::new();
        // maps a frontier position to (left, right) positions in the next frontier
        let mut routes: Vec<Option<(usize, f64, usize, usize)>> = vec![None; frontier.len()];
        for (p, &slot) in frontier.iter().enumerate() {
            let (g, h) = totals[p];
            match best[p] {
                Some((feature, c)) => {
                    let left = slots.len();
                    slots.push(Slot::Pending { g: c.g_left, h: c.h_left });
                    slots.push(Slot::Pending { g: g - c.g_left, h: h - c.h_left });
                    slots[slot] =
                        Slot::Split { feature, threshold: c.threshold, gain: c.gain, cover: h, left, right: left + 1 };
                    routes[p] = Some((feature, c.threshold, next_frontier.len(), next_frontier.len() + 1));
                    next_frontier.push(left);
                    next_frontier.push(left + 1);
                }
                None => {
                    slots[slot] = Slot::Leaf { weight: leaf_weight(g, h, hp) * hp.learning_rate, cover: h };
                }
            }
        }
        for (row, pos) in position.iter_mut().enumerate() {
            if let Some(p) = *pos {
                *pos = routes[p].map(|(feature, threshold, l, r)| if x.get(row, feature) < threshold { l } else { r });
            }
        }
        frontier = next_frontier;
    }

    fn build(slots: &[Slot], i: usize) -> TreeNode {
        match slots[i] {
            Slot::Leaf { weight, cover } => TreeNode::Leaf { weight, cover },
            Slot::Split { feature, threshold, gain, cover, left, right } => TreeNode::Split {
                feature,
                threshold,
                gain,
                cover,
                left: Box::new(build(slots, left)),
                right: Box::new(build(slots, right)),
            },
            Slot::Pending { .. } => unreachable!("all nodes resolved after the last level"),
        }
    }
    build(&slots, 0)
}
