//! Path-dependent TreeSHAP on a single regression tree.
//!
//! Features missing from a coalition are integrated out by following both
//! children of a split, weighted by their share of the training cover.

use crate::booster::TreeNode;

/// Share of a split's cover flowing to each child. Falls back to an even
/// split when neither child saw any hessian mass.
pub(crate) fn child_fractions(left: &TreeNode, right: &TreeNode) -> (f64, f64) {
    let total = left.cover() + right.cover();
    if total > 0.0 { (left.cover() / total, right.cover() / total) } else { (0.5, 0.5) }
}

/// Cover-weighted mean leaf value of a tree.
pub(crate) fn expected_value(node: &TreeNode) -> f64 {
    match node {
        TreeNode::Leaf { weight, .. } => *weight,
        TreeNode::Split { left, right, .. } => {
            let (fl, fr) = child_fractions(left, right);
            fl * expected_value(left) + fr * expected_value(right)
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

/// Append an element at `path[len]`; returns the new length.
fn extend(
    path: &mut [PathElement],
    len: usize,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) -> usize {
    path[len] = PathElement { feature, zero_fraction, one_fraction, weight: if len == 0 { 1.0 } else { 0.0 } };
    let d = len as f64;
    for i in (0..len).rev() {
        path[i + 1].weight += one_fraction * path[i].weight * (i as f64 + 1.0) / (d + 1.0);
        path[i].weight = zero_fraction * path[i].weight * (d - i as f64) / (d + 1.0);
    }
    len + 1
}

/// Remove element `index` from a path of `len` elements; returns the new length.
fn unwind(path: &mut [PathElement], len: usize, index: usize) -> usize {
    let depth = len - 1;
    let d = depth as f64;
    let PathElement { one_fraction, zero_fraction, .. } = path[index];
    let mut next_one = path[depth].weight;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one * (d + 1.0) / ((i as f64 + 1.0) * one_fraction);
            next_one = tmp - path[i].weight * zero_fraction * (d - i as f64) / (d + 1.0);
        } else {
            path[i].weight = path[i].weight * (d + 1.0) / (zero_fraction * (d - i as f64));
        }
    }
    // the weights stay in place; only the feature data shifts down
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    depth
}

/// Total permutation weight of the path with element `index` removed.
fn unwound_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let d = depth as f64;
    let PathElement { one_fraction, zero_fraction, .. } = path[index];
    let mut next_one = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = next_one * (d + 1.0) / ((i as f64 + 1.0) * one_fraction);
            total += tmp;
            next_one = path[i].weight - tmp * zero_fraction * (d - i as f64) / (d + 1.0);
        } else if zero_fraction != 0.0 {
            total += path[i].weight / zero_fraction / ((d - i as f64) / (d + 1.0));
        }
    }
    total
}

/// `buf[..parent_len]` holds the parent's path; this node's path is built
/// right after it, so children never disturb their ancestors.
#[allow(clippy::too_many_arguments)]
fn recurse(
    node: &TreeNode,
    row: &[f64],
    phi: &mut [f64],
    buf: &mut [PathElement],
    parent_len: usize,
    zero_fraction: f64,
    one_fraction: f64,
    feature: Option<usize>,
) {
    let (parent, path) = buf.split_at_mut(parent_len);
    path[..parent_len].copy_from_slice(parent);
    let mut len = extend(path, parent_len, zero_fraction, one_fraction, feature);
    match node {
        TreeNode::Leaf { weight, .. } => {
            let path = &path[..len];
            for i in 1..len {
                let el = path[i];
                let w = unwound_sum(path, i);
                phi[el.feature.expect("only the root element lacks a feature")] +=
                    w * (el.one_fraction - el.zero_fraction) * weight;
            }
        }
        TreeNode::Split { feature: f, threshold, left, right, .. } => {
            let (fl, fr) = child_fractions(left, right);
            let goes_left = row[*f] < *threshold;
            let (hot, hot_fraction, cold, cold_fraction) =
                if goes_left { (left, fl, right, fr) } else { (right, fr, left, fl) };
            let (mut incoming_zero, mut incoming_one) = (1.0, 1.0);
            if let Some(k) = (1..len).find(|&k| path[k].feature == Some(*f)) {
                incoming_zero = path[k].zero_fraction;
                incoming_one = path[k].one_fraction;
                len = unwind(path, len, k);
            }
            recurse(hot, row, phi, path, len, hot_fraction * incoming_zero, incoming_one, Some(*f));
            // a branch with no cover and off the row's path contributes nothing
            if cold_fraction * incoming_zero > 0.0 {
                recurse(cold, row, phi, path, len, cold_fraction * incoming_zero, 0.0, Some(*f));
            }
        }
    }
}

/// Add one tree's attributions for `row` into `phi`.
pub(crate) fn tree_shap_into(tree: &TreeNode, row: &[f64], phi: &mut [f64]) {
    let d = tree.depth() + 2;
    let empty = PathElement { feature: None, zero_fraction: 0.0, one_fraction: 0.0, weight: 0.0 };
    let mut buf = vec![empty; d * (d + 1) / 2 + d];
    recurse(tree, row, phi, &mut buf, 0, 1.0, 1.0, None);
}

/// Leaves whose paths test more distinct features than this are explained by
/// the recursion instead of a table.
const MAX_TABLE_FEATURES: usize = 10;

/// A leaf's path conditions and its attribution for every pattern of
/// satisfied features.
#[derive(Debug, Clone)]
struct LeafTable {
    /// Distinct features on the path; bit `s` of a pattern refers to `features[s]`.
    features: Vec<usize>,
    /// `(slot, feature, threshold, goes_left)` per split on the path.
    conditions: Vec<(usize, usize, f64, bool)>,
    /// `contrib[pattern * features.len() + slot]`.
    contrib: Vec<f64>,
}

/// Precomputed TreeSHAP for one tree.
///
/// A leaf's contribution depends on the row only through which of its path
/// features the row agrees with, so every pattern is evaluated once up front
/// and rows cost one pass over the leaves' conditions.
#[derive(Debug, Clone)]
pub(crate) struct TreeTable {
    leaves: Vec<LeafTable>,
}

impl TreeTable {
    /// `None` when some leaf tests too many distinct features.
    pub(crate) fn new(tree: &TreeNode) -> Option<Self> {
        let mut leaves = Vec::with_capacity(tree.leaf_count());
        let mut conditions = Vec::new();
        collect(tree, &mut conditions, &mut leaves)?;
        Some(TreeTable { leaves })
    }

    pub(crate) fn add_into(&self, row: &[f64], phi: &mut [f64]) {
        for leaf in &self.leaves {
            let u = leaf.features.len();
            if u == 0 {
                continue;
            }
            let mut pattern = (1usize << u) - 1;
            for &(slot, feature, threshold, left) in &leaf.conditions {
                if (row[feature] < threshold) != left {
                    pattern &= !(1 << slot);
                }
            }
            let c = &leaf.contrib[pattern * u..(pattern + 1) * u];
            for (&f, &v) in leaf.features.iter().zip(c) {
                phi[f] += v;
            }
        }
    }
}

/// Walk to every leaf, carrying the split conditions and cover fractions
/// seen on the way.
fn collect(node: &TreeNode, conditions: &mut Vec<(usize, f64, bool, f64)>, leaves: &mut Vec<LeafTable>) -> Option<()> {
    match node {
        TreeNode::Leaf { weight, .. } => {
            let mut features: Vec<usize> = Vec::new();
            let mut zero: Vec<f64> = Vec::new();
            let mut table_conditions = Vec::with_capacity(conditions.len());
            for &(f, threshold, left, fraction) in conditions.iter() {
                let slot = match features.iter().position(|&g| g == f) {
                    Some(s) => s,
                    None => {
                        features.push(f);
                        zero.push(1.0);
                        features.len() - 1
                    }
                };
                zero[slot] *= fraction;
                table_conditions.push((slot, f, threshold, left));
            }
            let u = features.len();
            if u > MAX_TABLE_FEATURES {
                return None;
            }
            let empty = PathElement { feature: None, zero_fraction: 0.0, one_fraction: 0.0, weight: 0.0 };
            let mut path = vec![empty; u + 1];
            let mut contrib = vec![0.0; (1 << u) * u];
            for pattern in 0..1usize << u {
                let mut len = extend(&mut path, 0, 1.0, 1.0, None);
                for s in 0..u {
                    let one = if pattern >> s & 1 == 1 { 1.0 } else { 0.0 };
                    len = extend(&mut path, len, zero[s], one, Some(s));
                }
                for i in 1..len {
                    let el = path[i];
                    let slot = el.feature.expect("only the root element lacks a feature");
                    contrib[pattern * u + slot] = unwound_sum(&path, i) * (el.one_fraction - el.zero_fraction) * weight;
                }
            }
            leaves.push(LeafTable { features, conditions: table_conditions, contrib });
            Some(())
        }
        TreeNode::Split { feature, threshold, left, right, .. } => {
            let (fl, fr) = child_fractions(left, right);
            conditions.push((*feature, *threshold, true, fl));
            collect(left, conditions, leaves)?;
            conditions.pop();
            conditions.push((*feature, *threshold, false, fr));
            collect(right, conditions, leaves)?;
            conditions.pop();
            Some(())
        }
    }
}
