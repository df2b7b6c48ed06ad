//! Exact greedy split search and the regularized leaf weight.

use super::Hyperparameters;

/// `G^2 / (H + lambda)`, taken as zero when the denominator vanishes.
fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let d = h + lambda;
    if d > 0.0 { g * g / d } else { 0.0 }
}

/// Net split gain: `0.5 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - (G_L+G_R)^2/(H_L+H_R+l)] - gamma`.
pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - score(gl + gr, hl + hr, lambda)) - gamma
}

/// `-soft_threshold(G, alpha) / (H + lambda)`, clipped to `max_delta_step`
/// when that is positive. The learning rate is not applied here.
pub fn leaf_weight(g: f64, h: f64, hp: &Hyperparameters) -> f64 {
    let shrunk = g.signum() * (g.abs() - hp.alpha).max(0.0);
    let d = h + hp.lambda;
    let w = if d > 0.0 && shrunk != 0.0 { -shrunk / d } else { 0.0 };
    if hp.max_delta_step > 0.0 { w.clamp(-hp.max_delta_step, hp.max_delta_step) } else { w }
}

/// Halfway between two consecutive distinct values, kept strictly above `lo`.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let t = 0.5 * (lo + hi);
    if t > lo { t } else { hi }
}

/// A chosen split: rows with `value < threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub threshold: f64,
    pub gain: f64,
    pub g_left: f64,
    pub h_left: f64,
}

/// Running state of a left-to-right scan over one node's rows sorted by a
/// feature. Shared by [`find_best_split`] and tree growth.
#[derive(Debug, Clone)]
pub(crate) struct SplitScan {
    g_total: f64,
    h_total: f64,
    g_left: f64,
    h_left: f64,
    last: Option<f64>,
    pub(crate) best: Option<SplitCandidate>,
}

impl SplitScan {
    pub(crate) fn new(g_total: f64, h_total: f64) -> Self {
        SplitScan { g_total, h_total, g_left: 0.0, h_left: 0.0, last: None, best: None }
    }

    /// Feed the next row in ascending value order.
    ///
    /// A candidate replaces the incumbent only with strictly larger gain, so
    /// ties keep the smallest threshold.
    pub(crate) fn push(&mut self, value: f64, g: f64, h: f64, hp: &Hyperparameters) {
        if let Some(last) = self.last.filter(|&l| value > l) {
            let g_right = self.g_total - self.g_left;
            let h_right = self.h_total - self.h_left;
            if self.h_left >= hp.min_child_weight && h_right >= hp.min_child_weight {
                let gain = split_gain(self.g_left, self.h_left, g_right, h_right, hp.lambda, hp.gamma);
                if gain > 0.0 && self.best.is_none_or(|b| gain > b.gain) {
                    self.best = Some(SplitCandidate {
                        threshold: midpoint(last, value),
                        gain,
                        g_left: self.g_left,
                        h_left: self.h_left,
                    });
                }
            }
        }
        self.g_left += g;
        self.h_left += h;
        self.last = Some(value);
    }
}

/// Best split of one column, scanning midpoints between consecutive
/// distinct values.
///
/// A split qualifies when both children carry at least `min_child_weight`
/// hessian and its net gain (after subtracting `gamma`) is positive.
pub fn find_best_split(g: &[f64], h: &[f64], column: &[f64], hp: &Hyperparameters) -> Option<SplitCandidate> {
    assert!(g.len() == h.len() && h.len() == column.len(), "arrays must be aligned");
    let mut order: Vec<usize> = (0..column.len()).collect();
    order.sort_by(|&a, &b| column[a].total_cmp(&column[b]).then(a.cmp(&b)));
    let mut scan = SplitScan::new(g.iter().sum(), h.iter().sum());
    for i in order {
        scan.push(column[i], g[i], h[i], hp);
    }
    scan.best
}
