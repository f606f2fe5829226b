//! Updates for the splitting probabilities, their Dirichlet concentration,
//! and the leaf scale σ_λ.

use rand::Rng;

use crate::leaf_prior::LeafPrior;
use crate::random::{categorical, dirichlet};
use crate::slice::slice_sample;
use crate::special::ln_gamma;

/// Distribution assumed for leaf values given σ_λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafDistribution {
    /// Zero-mean log-gamma moment-matched to σ_λ.
    LogGamma,
    /// Normal(0, σ_λ²).
    Normal,
}

/// Support of the σ_λ update.
pub const SIGMA_LAMBDA_RANGE: (f64, f64) = (1e-6, 1e3);

/// Draw s ~ Dirichlet(α/P + c_1, …, α/P + c_P).
pub fn sample_split_probs<R: Rng + ?Sized>(split_counts: &[usize], alpha: f64, rng: &mut R) -> Vec<f64> {
    let p = split_counts.len() as f64;
    let conc: Vec<f64> = split_counts.iter().map(|&c| alpha / p + c as f64).collect();
    dirichlet(&conc, rng)
}

pub const ALPHA_GRID_SIZE: usize = 50;

/// Samples α given s on a 50-point grid, under the prior
/// α/(α + P) ~ Beta(0.5, 1). Grid points are midpoints of equal-width bins
/// in u = α/(α + P), weighted by the prior density at u.
pub fn sample_alpha<R: Rng + ?Sized>(split_probs: &[f64], rng: &mut R) -> f64 {
    let p = split_probs.len() as f64;
    let sum_log_s: f64 = split_probs.iter().map(|&s| s.max(1e-300).ln()).sum();
    let grid: Vec<f64> = (0..ALPHA_GRID_SIZE)
        .map(|i| (i as f64 + 0.5) / ALPHA_GRID_SIZE as f64)
        .collect();
    let logw: Vec<f64> = grid
        .iter()
        .map(|&u| {
            let alpha = p * u / (1.0 - u);
            let prior = -0.5 * u.ln();
            ln_gamma(alpha) - p * ln_gamma(alpha / p) + (alpha / p - 1.0) * sum_log_s + prior
        })
        .collect();
    let m = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|&l| (l - m).exp()).collect();
    let u = grid[categorical(&w, rng)];
    p * u / (1.0 - u)
}

/// Log conditional density of θ = log σ_λ given leaf values, including the
/// half-Cauchy(0, `scale`) prior on σ_λ and the Jacobian of the log map.
pub struct SigmaTarget {
    n: f64,
    sum: f64,
    sum_sq: f64,
    log_sum_exp: f64,
    scale: f64,
    dist: LeafDistribution,
}

impl SigmaTarget {
    pub fn new(leaf_values: &[f64], scale: f64, dist: LeafDistribution) -> Self {
        let m = leaf_values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let log_sum_exp = if leaf_values.is_empty() {
            f64::NEG_INFINITY
        } else {
            m + leaf_values.iter().map(|&l| (l - m).exp()).sum::<f64>().ln()
        };
        SigmaTarget {
            n: leaf_values.len() as f64,
            sum: leaf_values.iter().sum(),
            sum_sq: leaf_values.iter().map(|l| l * l).sum(),
            log_sum_exp,
            scale,
            dist,
        }
    }

    pub fn log_density(&self, theta: f64) -> f64 {
        let sigma = theta.exp();
        if !(SIGMA_LAMBDA_RANGE.0..=SIGMA_LAMBDA_RANGE.1).contains(&sigma) {
            return f64::NEG_INFINITY;
        }
        let prior = -(1.0 + (sigma / self.scale).powi(2)).ln() + theta;
        let lik = if self.n == 0.0 {
            0.0
        } else {
            match self.dist {
                LeafDistribution::Normal => -self.n * theta - 0.5 * self.sum_sq / (sigma * sigma),
                LeafDistribution::LogGamma => match LeafPrior::from_sigma(sigma) {
                    Ok(lp) => self.n * lp.log_norm() + lp.a * self.sum - (lp.log_b + self.log_sum_exp).exp(),
                    Err(_) => f64::NEG_INFINITY,
                },
            }
        };
        prior + lik
    }
}

/// One slice-sampling update of σ_λ on the log scale (width 1, at most 50
/// step-outs).
pub fn sample_sigma_lambda<R: Rng + ?Sized>(
    leaf_values: &[f64],
    current: f64,
    scale: f64,
    dist: LeafDistribution,
    rng: &mut R,
) -> f64 {
    let target = SigmaTarget::new(leaf_values, scale, dist);
    let theta = slice_sample(current.ln(), |t| target.log_density(t), 1.0, 50, rng);
    theta.exp()
}
