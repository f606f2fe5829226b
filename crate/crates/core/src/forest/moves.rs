//! GROW / PRUNE / CHANGE topology proposals with exact proposal ratios.

use rand::Rng;

use super::prior::{CutGrid, TreePrior};
use super::tree::{Node, Tree};
use crate::random::categorical;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveKind {
    Grow,
    Prune,
    Change,
}

/// A fully specified move on a given tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MoveSpec {
    Grow { leaf: usize, feature: usize, cut: f64 },
    Prune { node: usize },
    Change { node: usize, feature: usize, cut: f64 },
}

impl MoveSpec {
    pub fn kind(&self) -> MoveKind {
        match self {
            MoveSpec::Grow { .. } => MoveKind::Grow,
            MoveSpec::Prune { .. } => MoveKind::Prune,
            MoveSpec::Change { .. } => MoveKind::Change,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveProbs {
    pub grow: f64,
    pub prune: f64,
    pub change: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        MoveProbs { grow: 0.3, prune: 0.3, change: 0.4 }
    }
}

#[derive(Debug, Clone)]
pub struct Proposal {
    pub tree: Tree,
    /// log Q(T′ → T) − log Q(T → T′).
    pub log_ratio: f64,
    pub spec: MoveSpec,
}

fn growable(tree: &Tree, prior: &TreePrior) -> Vec<usize> {
    tree.leaves()
        .into_iter()
        .filter(|&l| prior.can_split(tree.node(l).depth()))
        .collect()
}

/// Move probabilities for `tree`, renormalized over the moves that are
/// possible: [grow, prune, change].
fn kernel(tree: &Tree, prior: &TreePrior, can_rule: bool, probs: &MoveProbs) -> [f64; 3] {
    let g = if can_rule && !growable(tree, prior).is_empty() { probs.grow } else { 0.0 };
    let has_split = !tree.is_stump();
    let p = if has_split { probs.prune } else { 0.0 };
    let c = if has_split && can_rule { probs.change } else { 0.0 };
    let total = g + p + c;
    if total == 0.0 {
        [0.0; 3]
    } else {
        [g / total, p / total, c / total]
    }
}

/// Applies `spec` to a copy of `tree` and returns the exact log proposal
/// ratio under the default kernel.
pub fn apply_move(
    tree: &Tree,
    spec: MoveSpec,
    prior: &TreePrior,
    split_probs: &[f64],
    grid: &CutGrid,
    probs: &MoveProbs,
) -> Proposal {
    let eff = grid.effective_probs(split_probs);
    let can_rule = eff.iter().any(|&p| p > 0.0);
    let before = kernel(tree, prior, can_rule, probs);
    let mut next = tree.clone();
    let log_ratio = match spec {
        MoveSpec::Grow { leaf, feature, cut } => {
            let fwd = before[0].ln() - (growable(tree, prior).len() as f64).ln()
                + grid.log_rule_prob(&eff, feature);
            next.grow(leaf, feature, cut);
            let after = kernel(&next, prior, can_rule, probs);
            let rev = after[1].ln() - (next.prunable().len() as f64).ln();
            rev - fwd
        }
        MoveSpec::Prune { node } => {
            let feature = match *tree.node(node) {
                Node::Split { feature, .. } => feature,
                _ => panic!("prune target is not a split"),
            };
            let fwd = before[1].ln() - (tree.prunable().len() as f64).ln();
            next.prune(node);
            let after = kernel(&next, prior, can_rule, probs);
            let rev = after[0].ln() - (growable(&next, prior).len() as f64).ln()
                + grid.log_rule_prob(&eff, feature);
            rev - fwd
        }
        MoveSpec::Change { node, feature, cut } => {
            let old = match *tree.node(node) {
                Node::Split { feature, .. } => feature,
                _ => panic!("change target is not a split"),
            };
            let n_splits = (tree.splits().len() as f64).ln();
            let fwd = before[2].ln() - n_splits + grid.log_rule_prob(&eff, feature);
            next.set_rule(node, feature, cut);
            let after = kernel(&next, prior, can_rule, probs);
            let rev = after[2].ln() - n_splits + grid.log_rule_prob(&eff, old);
            rev - fwd
        }
    };
    Proposal { tree: next, log_ratio, spec }
}

/// Draws a move from the GROW/PRUNE/CHANGE kernel. Returns `None` when no
/// move is possible (a stump with no splittable feature).
pub fn propose_move<R: Rng + ?Sized>(
    tree: &Tree,
    prior: &TreePrior,
    split_probs: &[f64],
    grid: &CutGrid,
    probs: &MoveProbs,
    rng: &mut R,
) -> Option<Proposal> {
    let eff = grid.effective_probs(split_probs);
    let can_rule = eff.iter().any(|&p| p > 0.0);
    let k = kernel(tree, prior, can_rule, probs);
    if k.iter().all(|&p| p == 0.0) {
        return None;
    }
    let spec = match categorical(&k, rng) {
        0 => {
            let leaves = growable(tree, prior);
            let leaf = leaves[rng.random_range(0..leaves.len())];
            let (feature, cut) = grid.draw_rule(&eff, rng);
            MoveSpec::Grow { leaf, feature, cut }
        }
        1 => {
            let nodes = tree.prunable();
            MoveSpec::Prune { node: nodes[rng.random_range(0..nodes.len())] }
        }
        _ => {
            let nodes = tree.splits();
            let node = nodes[rng.random_range(0..nodes.len())];
            let (feature, cut) = grid.draw_rule(&eff, rng);
            MoveSpec::Change { node, feature, cut }
        }
    };
    Some(apply_move(tree, spec, prior, split_probs, grid, probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn stump_only_grows() {
        let grid = CutGrid::new(vec![vec![0.1, 0.5]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            let p = propose_move(&Tree::stump(1), &TreePrior::default(), &[1.0], &grid, &MoveProbs::default(), &mut rng)
                .unwrap();
            assert_eq!(p.spec.kind(), MoveKind::Grow);
        }
    }

    #[test]
    fn grow_and_prune_are_reverse() {
        let grid = CutGrid::new(vec![vec![0.1, 0.5, 0.9], vec![2.0, 3.0]]);
        let s = [0.3, 0.7];
        let prior = TreePrior::default();
        let probs = MoveProbs::default();
        let mut t = Tree::stump(1);
        t.grow(0, 0, 0.5);
        let g = apply_move(&t, MoveSpec::Grow { leaf: 2, feature: 1, cut: 3.0 }, &prior, &s, &grid, &probs);
        let back = apply_move(&g.tree, MoveSpec::Prune { node: 2 }, &prior, &s, &grid, &probs);
        assert_eq!(back.tree, t);
        assert!((g.log_ratio + back.log_ratio).abs() < 1e-12);

        let g0 = apply_move(&Tree::stump(1), MoveSpec::Grow { leaf: 0, feature: 0, cut: 0.1 }, &prior, &s, &grid, &probs);
        let b0 = apply_move(&g0.tree, MoveSpec::Prune { node: 0 }, &prior, &s, &grid, &probs);
        assert!((g0.log_ratio + b0.log_ratio).abs() < 1e-12);
    }

    #[test]
    fn no_move_without_splittable_features() {
        let grid = CutGrid::new(vec![vec![]]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(propose_move(&Tree::stump(1), &TreePrior::default(), &[1.0], &grid, &MoveProbs::default(), &mut rng).is_none());
    }
}
