//! Branching-process tree prior and per-feature cutpoint grids.

use rand::Rng;

use super::tree::{Node, Tree};
use crate::data::Dataset;
use crate::random::categorical;

pub const DEFAULT_MAX_CUTS: usize = 100;

/// Node at depth d splits with probability γ(1 + d)^(−β). An optional
/// depth cap forbids splits at or below `max_depth`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreePrior {
    pub gamma: f64,
    pub beta: f64,
    pub max_depth: Option<usize>,
}

impl Default for TreePrior {
    fn default() -> Self {
        TreePrior { gamma: 0.95, beta: 2.0, max_depth: None }
    }
}

impl TreePrior {
    pub fn split_prob(&self, depth: usize) -> f64 {
        match self.max_depth {
            Some(m) if depth >= m => 0.0,
            _ => self.gamma * (1.0 + depth as f64).powf(-self.beta),
        }
    }

    pub fn can_split(&self, depth: usize) -> bool {
        self.max_depth.is_none_or(|m| depth < m)
    }
}

/// Candidate cutpoints per feature, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct CutGrid {
    cuts: Vec<Vec<f64>>,
}

impl CutGrid {
    pub fn new(cuts: Vec<Vec<f64>>) -> Self {
        let cuts = cuts
            .into_iter()
            .map(|mut c| {
                c.sort_by(f64::total_cmp);
                c.dedup();
                c
            })
            .collect();
        CutGrid { cuts }
    }

    /// Up to `max_cuts` empirical quantiles per feature. A cut never equals
    /// the feature maximum, so both sides of a split are nonempty on the
    /// training data when the split is made at the root.
    pub fn from_dataset(data: &Dataset, max_cuts: usize) -> Self {
        let n = data.n();
        let cuts = (0..data.p())
            .map(|j| {
                let mut v: Vec<f64> = (0..n).map(|i| data.feature(i, j)).collect();
                v.sort_by(f64::total_cmp);
                let mut uniq = v.clone();
                uniq.dedup();
                uniq.pop();
                if uniq.len() <= max_cuts {
                    return uniq;
                }
                let max = v[n - 1];
                let mut q: Vec<f64> = (1..=max_cuts)
                    .map(|i| v[(i * n / (max_cuts + 1)).min(n - 1)])
                    .filter(|&c| c < max)
                    .collect();
                q.dedup();
                q
            })
            .collect();
        CutGrid { cuts }
    }

    pub fn num_features(&self) -> usize {
        self.cuts.len()
    }

    pub fn cuts(&self, feature: usize) -> &[f64] {
        &self.cuts[feature]
    }

    pub fn is_splittable(&self, feature: usize) -> bool {
        !self.cuts[feature].is_empty()
    }

    /// Split probabilities restricted to features with a nonempty grid,
    /// renormalized. All zero when no feature can be split.
    pub fn effective_probs(&self, split_probs: &[f64]) -> Vec<f64> {
        let mut s: Vec<f64> = split_probs
            .iter()
            .enumerate()
            .map(|(j, &p)| if self.is_splittable(j) { p } else { 0.0 })
            .collect();
        let total: f64 = s.iter().sum();
        if total > 0.0 {
            for v in &mut s {
                *v /= total;
            }
        }
        s
    }

    /// Draws a (feature, cut) pair: feature from the effective split
    /// probabilities, cut uniform on that feature's grid.
    pub fn draw_rule<R: Rng + ?Sized>(&self, effective: &[f64], rng: &mut R) -> (usize, f64) {
        let j = categorical(effective, rng);
        let c = &self.cuts[j];
        (j, c[rng.random_range(0..c.len())])
    }

    /// log probability of drawing (feature, ·) under `draw_rule`.
    pub fn log_rule_prob(&self, effective: &[f64], feature: usize) -> f64 {
        effective[feature].ln() - (self.cuts[feature].len() as f64).ln()
    }
}

/// log π(T): splits contribute log p_split(d) + log s̃_j − log |grid_j|,
/// leaves log(1 − p_split(d)).
pub fn tree_log_prior(tree: &Tree, prior: &TreePrior, split_probs: &[f64], grid: &CutGrid) -> f64 {
    let effective = grid.effective_probs(split_probs);
    let mut lp = 0.0;
    for id in 0..tree.capacity() {
        match *tree.node(id) {
            Node::Split { depth, feature, .. } => {
                lp += prior.split_prob(depth).ln() + grid.log_rule_prob(&effective, feature);
            }
            Node::Leaf { depth, .. } => {
                let p = if grid_any(&effective) { prior.split_prob(depth) } else { 0.0 };
                lp += (-p).ln_1p();
            }
            Node::Vacant => {}
        }
    }
    lp
}

fn grid_any(effective: &[f64]) -> bool {
    effective.iter().any(|&p| p > 0.0)
}

/// Forward simulation from the tree prior.
pub fn simulate_prior_tree<R: Rng + ?Sized>(
    k: usize,
    prior: &TreePrior,
    split_probs: &[f64],
    grid: &CutGrid,
    rng: &mut R,
) -> Tree {
    let effective = grid.effective_probs(split_probs);
    let mut tree = Tree::stump(k);
    if !grid_any(&effective) {
        return tree;
    }
    let mut pending = vec![0];
    while let Some(id) = pending.pop() {
        let depth = tree.node(id).depth();
        if rng.random::<f64>() < prior.split_prob(depth) {
            let (j, c) = grid.draw_rule(&effective, rng);
            let (l, r) = tree.grow(id, j, c);
            pending.push(r);
            pending.push(l);
        }
    }
    tree
}
