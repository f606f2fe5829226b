use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qlbart::forest::{simulate_prior_tree, CutGrid, TreePrior};

const MAX_DEPTH: usize = 60;

/// P(max depth of a subtree rooted at depth d is ≤ cap), by the exact
/// branching recursion.
fn depth_cdf(prior: &TreePrior, d: usize, cap: usize) -> f64 {
    let p = prior.split_prob(d);
    if d == cap {
        1.0 - p
    } else {
        (1.0 - p) + p * depth_cdf(prior, d + 1, cap).powi(2)
    }
}

fn expected_leaves(prior: &TreePrior, d: usize) -> f64 {
    if d >= MAX_DEPTH {
        return 1.0;
    }
    let p = prior.split_prob(d);
    (1.0 - p) + 2.0 * p * expected_leaves(prior, d + 1)
}

#[test]
fn simulated_prior_matches_exact_depth_and_leaf_expectations() {
    let prior = TreePrior::default();
    let grid = CutGrid::new(vec![(1..100).map(|c| c as f64 / 100.0).collect(); 3]);
    let probs = [1.0 / 3.0; 3];
    let mut rng = ChaCha8Rng::seed_from_u64(81);
    let draws = 100_000;
    let (mut depth_sum, mut leaf_sum, mut shallow) = (0.0, 0.0, 0usize);
    for _ in 0..draws {
        let t = simulate_prior_tree(1, &prior, &probs, &grid, &mut rng);
        depth_sum += t.depth() as f64;
        leaf_sum += t.num_leaves() as f64;
        shallow += usize::from(t.depth() <= 2);
    }
    let mean_depth = depth_sum / draws as f64;
    let mean_leaves = leaf_sum / draws as f64;

    let exact_depth: f64 = (0..MAX_DEPTH).map(|c| 1.0 - depth_cdf(&prior, 0, c)).sum();
    let exact_leaves = expected_leaves(&prior, 0);
    assert!((mean_depth / exact_depth - 1.0).abs() < 0.02, "depth {mean_depth} vs {exact_depth}");
    assert!((mean_leaves / exact_leaves - 1.0).abs() < 0.02, "leaves {mean_leaves} vs {exact_leaves}");

    let p_shallow = shallow as f64 / draws as f64;
    assert!(p_shallow > 0.85, "P(depth <= 2) = {p_shallow}");
    assert!((p_shallow - depth_cdf(&prior, 0, 2)).abs() < 0.01);
}

#[test]
fn depth_cap_is_respected() {
    let prior = TreePrior { gamma: 0.99, beta: 0.0, max_depth: Some(3) };
    let grid = CutGrid::new(vec![vec![0.25, 0.5, 0.75]; 2]);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let t = simulate_prior_tree(2, &prior, &[0.5, 0.5], &grid, &mut rng);
        assert!(t.depth() <= 3);
    }
}
