//! Leaf sufficient statistics, integrated likelihoods and leaf draws.

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::family::{pow_ratio, QuasiFamily};
use crate::forest::Tree;
use crate::leaf_prior::LeafPrior;
use crate::random::{log_gamma_variate, standard_normal};
use crate::slice::slice_sample;
use crate::special::ln_gamma;

/// How leaf parameters enter the quasi-likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeafModel {
    Poisson,
    Gamma,
    Power { kappa: f64 },
    /// Binomial (as two categories) and multinomial, with ξ augmentation.
    Categorical { categories: usize },
}

impl LeafModel {
    pub fn from_family(family: &QuasiFamily) -> Self {
        match *family {
            QuasiFamily::Poisson => LeafModel::Poisson,
            QuasiFamily::Gamma => LeafModel::Gamma,
            QuasiFamily::Power { kappa } => LeafModel::Power { kappa },
            QuasiFamily::Binomial => LeafModel::Categorical { categories: 2 },
            QuasiFamily::Multinomial { categories } => LeafModel::Categorical { categories },
        }
    }

    pub fn leaf_dim(&self) -> usize {
        match *self {
            LeafModel::Categorical { categories } => categories,
            _ => 1,
        }
    }
}

/// Outcomes in the form the samplers use: `y` is N × leaf_dim, holding the
/// outcome for scalar families and the counts Z_ik = n_i y_ik for
/// categorical ones; `w` holds ω_i (n_i for categorical data).
#[derive(Debug, Clone)]
pub struct Response {
    pub model: LeafModel,
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

impl Response {
    pub fn new(data: &Dataset, family: &QuasiFamily) -> Result<Self> {
        data.validate_for(family)?;
        let model = LeafModel::from_family(family);
        let w = data.weights().to_vec();
        let y = match family {
            QuasiFamily::Binomial => (0..data.n())
                .flat_map(|i| {
                    let v = data.outcome(i)[0];
                    [w[i] * v, w[i] * (1.0 - v)]
                })
                .collect(),
            QuasiFamily::Multinomial { .. } => (0..data.n())
                .flat_map(|i| data.outcome(i).iter().map(|&v| w[i] * v).collect::<Vec<_>>())
                .collect(),
            _ => data.y().to_vec(),
        };
        Ok(Response { model, y, w })
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn leaf_dim(&self) -> usize {
        self.model.leaf_dim()
    }

    /// Per-observation contributions (a_i, b_i) to the leaf sums A and B,
    /// given the partial fit ζ (N × leaf_dim) and, for categorical models,
    /// the latents ξ.
    pub fn contributions(&self, zeta: &[f64], phi: f64, xi: &[f64], ca: &mut [f64], cb: &mut [f64]) {
        let k = self.leaf_dim();
        match self.model {
            LeafModel::Poisson => {
                for i in 0..self.n() {
                    ca[i] = self.w[i] * self.y[i] / phi;
                    cb[i] = self.w[i] * zeta[i].exp() / phi;
                }
            }
            LeafModel::Gamma => {
                for i in 0..self.n() {
                    ca[i] = self.w[i] / phi;
                    cb[i] = self.w[i] * self.y[i] * zeta[i].exp() / phi;
                }
            }
            LeafModel::Power { kappa } => {
                for i in 0..self.n() {
                    ca[i] = self.w[i] * self.y[i] * (zeta[i] * (1.0 - kappa)).exp();
                    cb[i] = self.w[i] * (zeta[i] * (2.0 - kappa)).exp();
                }
            }
            LeafModel::Categorical { .. } => {
                for i in 0..self.n() {
                    let lx = xi[i].ln();
                    for c in 0..k {
                        ca[i * k + c] = self.y[i * k + c];
                        cb[i * k + c] = (lx + zeta[i * k + c]).exp();
                    }
                }
            }
        }
    }
}

/// Sums A and B per leaf (and category), indexed by tree node id.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafStats {
    k: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub count: Vec<usize>,
}

impl LeafStats {
    pub fn new(capacity: usize, k: usize) -> Self {
        LeafStats { k, a: vec![0.0; capacity * k], b: vec![0.0; capacity * k], count: vec![0; capacity] }
    }

    /// Routes observations through `tree` and accumulates contributions.
    pub fn accumulate(tree: &Tree, data: &Dataset, ca: &[f64], cb: &[f64], assign: &mut Vec<usize>) -> Self {
        let k = tree.leaf_dim();
        let mut s = LeafStats::new(tree.capacity(), k);
        assign.clear();
        for i in 0..data.n() {
            let l = tree.route(data.row(i));
            assign.push(l);
            s.count[l] += 1;
            for c in 0..k {
                s.a[l * k + c] += ca[i * k + c];
                s.b[l * k + c] += cb[i * k + c];
            }
        }
        s
    }

    pub fn leaf_dim(&self) -> usize {
        self.k
    }

    pub fn a(&self, leaf: usize, c: usize) -> f64 {
        self.a[leaf * self.k + c]
    }

    pub fn b(&self, leaf: usize, c: usize) -> f64 {
        self.b[leaf * self.k + c]
    }
}

/// Leaf statistics for `tree` given partial fits ζ. `xi` is ignored for
/// non-categorical models.
pub fn leaf_stats(resp: &Response, tree: &Tree, data: &Dataset, zeta: &[f64], phi: f64, xi: &[f64]) -> LeafStats {
    let len = resp.n() * resp.leaf_dim();
    let (mut ca, mut cb) = (vec![0.0; len], vec![0.0; len]);
    resp.contributions(zeta, phi, xi, &mut ca, &mut cb);
    LeafStats::accumulate(tree, data, &ca, &cb, &mut Vec::new())
}

fn log_add_exp(x: f64, y: f64) -> f64 {
    let m = x.max(y);
    if m == f64::NEG_INFINITY {
        m
    } else {
        m + ((x - m).exp() + (y - m).exp()).ln()
    }
}

/// log ∫ e^{Aλ − B e^λ} logGam(λ | a, b) dλ
/// = a log b − log Γ(a) + log Γ(a + A) − (a + A) log(b + B).
pub fn conjugate_log_marginal(a_stat: f64, b_stat: f64, prior: &LeafPrior) -> f64 {
    if a_stat == 0.0 && b_stat == 0.0 {
        return 0.0;
    }
    let shape = prior.a + a_stat;
    let log_rate = log_add_exp(prior.log_b, b_stat.ln());
    prior.log_norm() + ln_gamma(shape) - shape * log_rate
}

/// Quasi-power leaf log-likelihood up to a constant that does not depend
/// on the tree: Λ(λ) = φ⁻¹[A (e^{λ(1−κ)} − 1)/(1 − κ) − B (e^{λ(2−κ)} − 1)/(2 − κ)].
pub fn power_leaf_loglik(lambda: f64, a_stat: f64, b_stat: f64, phi: f64, kappa: f64) -> f64 {
    (a_stat * pow_ratio(lambda, 1.0 - kappa) - b_stat * pow_ratio(lambda, 2.0 - kappa)) / phi
}

/// Mode λ̂ = log(A/B) and curvature I = A e^{λ̂(1−κ)}/φ of Λ.
pub fn power_mode(a_stat: f64, b_stat: f64, phi: f64, kappa: f64) -> (f64, f64) {
    let lhat = (a_stat / b_stat).ln();
    (lhat, a_stat * (lhat * (1.0 - kappa)).exp() / phi)
}

/// Laplace approximation to log ∫ e^{Λ(λ)} Normal(λ | 0, σ²) dλ. Returns
/// `None` when A or B is zero (no interior mode).
pub fn power_laplace_log_marginal(a_stat: f64, b_stat: f64, phi: f64, kappa: f64, sigma: f64) -> Option<f64> {
    if !(a_stat > 0.0 && b_stat > 0.0) {
        return None;
    }
    let (lhat, info) = power_mode(a_stat, b_stat, phi, kappa);
    let inv = 1.0 / info;
    let s2 = sigma * sigma;
    Some(
        power_leaf_loglik(lhat, a_stat, b_stat, phi, kappa) + 0.5 * (inv / (s2 + inv)).ln()
            - lhat * lhat / (2.0 * (inv + s2)),
    )
}

/// Leaf prior and likelihood settings shared by the marginal and draw
/// routines.
#[derive(Debug, Clone, Copy)]
pub struct LeafContext<'a> {
    pub model: LeafModel,
    pub prior: &'a LeafPrior,
    pub phi: f64,
    /// Slice passes after the Laplace draw for the power model.
    pub slice_passes: usize,
}

/// Marginal for one leaf; the flag marks a power leaf handled by the
/// prior-only fallback.
pub fn leaf_log_marginal(ctx: &LeafContext, a_stat: f64, b_stat: f64) -> (f64, bool) {
    match ctx.model {
        LeafModel::Poisson | LeafModel::Gamma => (conjugate_log_marginal(a_stat, b_stat, ctx.prior), false),
        LeafModel::Categorical { .. } => (conjugate_log_marginal(a_stat / ctx.phi, b_stat, ctx.prior), false),
        LeafModel::Power { kappa } => {
            match power_laplace_log_marginal(a_stat, b_stat, ctx.phi, kappa, ctx.prior.sigma_lambda) {
                Some(v) => (v, false),
                None => (0.0, a_stat != 0.0 || b_stat != 0.0),
            }
        }
    }
}

/// Σ over leaves (and categories) of the integrated log-likelihood, with the
/// number of fallback leaves.
pub fn integrated_log_lik(ctx: &LeafContext, tree: &Tree, stats: &LeafStats) -> (f64, usize) {
    let k = stats.leaf_dim();
    let mut total = 0.0;
    let mut fallbacks = 0;
    for id in tree.leaves() {
        for c in 0..k {
            let (v, fb) = leaf_log_marginal(ctx, stats.a(id, c), stats.b(id, c));
            total += v;
            fallbacks += fb as usize;
        }
    }
    (total, fallbacks)
}

/// Draws a leaf value from its full conditional (exactly for conjugate
/// models; Laplace draw plus slice refinement for the power model).
pub fn sample_leaf<R: Rng + ?Sized>(ctx: &LeafContext, a_stat: f64, b_stat: f64, rng: &mut R) -> f64 {
    let prior = ctx.prior;
    let (shape_add, rate_add) = match ctx.model {
        LeafModel::Poisson | LeafModel::Gamma => (a_stat, b_stat),
        LeafModel::Categorical { .. } => (a_stat / ctx.phi, b_stat),
        LeafModel::Power { kappa } => return sample_power_leaf(ctx, a_stat, b_stat, kappa, rng),
    };
    let log_rate = log_add_exp(prior.log_b, rate_add.ln());
    log_gamma_variate(prior.a + shape_add, rng) - log_rate
}

fn sample_power_leaf<R: Rng + ?Sized>(ctx: &LeafContext, a_stat: f64, b_stat: f64, kappa: f64, rng: &mut R) -> f64 {
    let sigma = ctx.prior.sigma_lambda;
    if a_stat == 0.0 && b_stat == 0.0 {
        return sigma * standard_normal(rng);
    }
    let (start, width) = if a_stat > 0.0 && b_stat > 0.0 {
        let (lhat, info) = power_mode(a_stat, b_stat, ctx.phi, kappa);
        let prec = info + 1.0 / (sigma * sigma);
        let v = 1.0 / prec;
        (info * lhat / prec + v.sqrt() * standard_normal(rng), 2.0 * v.sqrt())
    } else {
        (sigma * standard_normal(rng), 2.0 * sigma)
    };
    let target = |l: f64| power_leaf_loglik(l, a_stat, b_stat, ctx.phi, kappa) - 0.5 * (l / sigma).powi(2);
    let mut lambda = start;
    for _ in 0..ctx.slice_passes {
        lambda = slice_sample(lambda, target, width, 50, rng);
    }
    lambda
}

/// Redraws every leaf of `tree` from its conditional given `stats`.
pub fn sample_leaves<R: Rng + ?Sized>(ctx: &LeafContext, tree: &mut Tree, stats: &LeafStats, rng: &mut R) {
    let k = tree.leaf_dim();
    for id in tree.leaves() {
        for c in 0..k {
            let v = sample_leaf(ctx, stats.a(id, c), stats.b(id, c), rng);
            tree.leaf_value_mut(id)[c] = v;
        }
    }
}

pub(crate) fn check_phi(phi: f64) -> Result<()> {
    if phi > 0.0 && phi.is_finite() {
        Ok(())
    } else {
        Err(Error::Numerical(format!("dispersion must be positive and finite, got {phi}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_prior() -> LeafPrior {
        LeafPrior { a: 1.0, b: 1.0, log_b: 0.0, sigma_lambda: (std::f64::consts::PI.powi(2) / 6.0).sqrt(), k_scale: 2.0 }
    }

    #[test]
    fn poisson_stats_by_hand() {
        let data = Dataset::new(vec![0.0], 1, vec![1.0], 1, None, None).unwrap();
        let resp = Response::new(&data, &QuasiFamily::Poisson).unwrap();
        let s = leaf_stats(&resp, &Tree::stump(1), &data, &[0.0], 1.0, &[]);
        assert_eq!((s.a(0, 0), s.b(0, 0), s.count[0]), (1.0, 1.0, 1));
    }

    #[test]
    fn power_stats_by_hand() {
        let data = Dataset::new(vec![0.0], 1, vec![4.0], 1, None, None).unwrap();
        let resp = Response::new(&data, &QuasiFamily::Power { kappa: 1.5 }).unwrap();
        let s = leaf_stats(&resp, &Tree::stump(1), &data, &[4f64.ln()], 1.0, &[]);
        assert!((s.a(0, 0) - 2.0).abs() < 1e-12 && (s.b(0, 0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_leaf_stats_and_marginal() {
        let data = Dataset::new(vec![0.0, 0.1], 1, vec![1.0, 2.0], 1, None, None).unwrap();
        let resp = Response::new(&data, &QuasiFamily::Poisson).unwrap();
        let mut t = Tree::stump(1);
        let (l, r) = t.grow(0, 0, 5.0);
        let s = leaf_stats(&resp, &t, &data, &[0.0, 0.0], 1.0, &[]);
        assert_eq!((s.a(r, 0), s.b(r, 0), s.count[r]), (0.0, 0.0, 0));
        assert_eq!(s.count[l], 2);
        assert_eq!(conjugate_log_marginal(0.0, 0.0, &LeafPrior::from_sigma(0.3).unwrap()), 0.0);
    }

    #[test]
    fn poisson_marginal_closed_form() {
        assert!((conjugate_log_marginal(1.0, 1.0, &unit_prior()) - 0.25f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn power_mode_maximizes() {
        let (a, b, phi, kappa) = (3.7, 1.9, 0.8, 1.3);
        let (lhat, info) = power_mode(a, b, phi, kappa);
        let f = |l| power_leaf_loglik(l, a, b, phi, kappa);
        assert!(f(lhat + 1e-3) < f(lhat) && f(lhat - 1e-3) < f(lhat));
        let h = 1e-4;
        let second = (f(lhat + h) - 2.0 * f(lhat) + f(lhat - h)) / (h * h);
        assert!(((-second - info) / info).abs() < 1e-5);
    }

    #[test]
    fn power_fallback_flags() {
        let p = LeafPrior::from_sigma(0.2).unwrap();
        let ctx = LeafContext { model: LeafModel::Power { kappa: 1.5 }, prior: &p, phi: 1.0, slice_passes: 1 };
        assert_eq!(leaf_log_marginal(&ctx, 0.0, 3.0), (0.0, true));
        assert_eq!(leaf_log_marginal(&ctx, 0.0, 0.0), (0.0, false));
    }

    #[test]
    fn binomial_counts_split_into_two_categories() {
        let data = Dataset::new(vec![0.0], 1, vec![0.25], 1, Some(vec![8.0]), None).unwrap();
        let resp = Response::new(&data, &QuasiFamily::Binomial).unwrap();
        assert_eq!(resp.y, vec![2.0, 6.0]);
    }
}
