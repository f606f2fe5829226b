//! Decision trees, ensembles, tree priors and topology proposals.

mod hyper;
mod io;
mod moves;
mod prior;
mod tree;

pub use hyper::{
    sample_alpha, sample_sigma_lambda, sample_split_probs, LeafDistribution, SigmaTarget, ALPHA_GRID_SIZE,
    SIGMA_LAMBDA_RANGE,
};
pub use io::{read_ensembles, write_ensemble};
pub use moves::{apply_move, propose_move, MoveKind, MoveProbs, MoveSpec, Proposal};
pub use prior::{simulate_prior_tree, tree_log_prior, CutGrid, TreePrior, DEFAULT_MAX_CUTS};
pub use tree::{Node, Tree};

/// A sum of regression trees plus a constant offset, with its splitting
/// probabilities and leaf scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub offset: Vec<f64>,
    pub trees: Vec<Tree>,
    pub split_probs: Vec<f64>,
    pub sigma_lambda: f64,
    pub alpha: f64,
    pub tree_prior: TreePrior,
}

impl Ensemble {
    /// `num_trees` stumps with zero leaves and uniform split probabilities.
    pub fn new(num_trees: usize, leaf_dim: usize, num_features: usize, sigma_lambda: f64, tree_prior: TreePrior) -> Self {
        Ensemble {
            offset: vec![0.0; leaf_dim],
            trees: vec![Tree::stump(leaf_dim); num_trees],
            split_probs: vec![1.0 / num_features as f64; num_features],
            sigma_lambda,
            alpha: 1.0,
            tree_prior,
        }
    }

    pub fn leaf_dim(&self) -> usize {
        self.offset.len()
    }

    pub fn num_features(&self) -> usize {
        self.split_probs.len()
    }

    /// r(x) = offset + Σ_t Tree_t(x).
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.leaf_dim()];
        self.predict_into(x, &mut out);
        out
    }

    pub fn predict_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.offset);
        for t in &self.trees {
            for (o, v) in out.iter_mut().zip(t.predict(x)) {
                *o += v;
            }
        }
    }

    pub fn split_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.num_features()];
        for t in &self.trees {
            t.count_splits(&mut c);
        }
        c
    }

    /// Every leaf value of every tree, flattened.
    pub fn leaf_values(&self) -> Vec<f64> {
        let mut v = Vec::new();
        for t in &self.trees {
            for l in t.leaves() {
                v.extend_from_slice(t.leaf_value(l));
            }
        }
        v
    }
}
