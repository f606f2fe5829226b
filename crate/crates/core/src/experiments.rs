//! Replication runners for the simulation studies. Each function runs one
//! replication (or one chain set) and returns its metrics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::backfit::{run_chain, SamplerConfig};
use crate::dispersion::DispersionMethod;
use crate::error::{Error, Result};
use crate::family::QuasiFamily;
use crate::parametric::{
    bb_poisson, bbq_quasi_posterior, fit_mqle, two_step_gibbs, ParametricModel, TwoStepSettings,
};
use crate::summaries::{credible_intervals, effective_sample_size, Draws};
use crate::synth::{
    gen_dirichlet_multinomial, gen_gamma_power, gen_invgamma_friedman, gen_power_grid, gen_qpois,
};

const Z975: f64 = 1.959963984540054;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sd(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)).sqrt()
}

fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
    rows.iter().map(|r| r[j]).collect()
}

/// Posterior-vs-asymptotic comparison for one coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct BvmRow {
    pub coefficient: usize,
    pub truth: f64,
    pub mqle: f64,
    pub asymptotic_se: f64,
    pub posterior_mean: f64,
    pub posterior_sd: f64,
    pub acceptance_rate: f64,
}

/// Quasi-Poisson regression with one normal covariate: BBQ quasi-posterior
/// against the normal approximation centred at the MQLE.
pub fn bvm_experiment(n: usize, beta: [f64; 2], phi: f64, iterations: usize, burn_in: usize, seed: u64) -> Result<Vec<BvmRow>> {
    let mut r = rng(seed);
    let sim = gen_qpois(n, beta, phi, &mut r);
    let model = ParametricModel::from_dataset(&sim.data, QuasiFamily::Poisson, true)?;
    let fit = fit_mqle(&model, &sim.data)?;
    let se = fit.standard_errors(n)?;
    let post = bbq_quasi_posterior(&model, &sim.data, None, iterations, burn_in, &mut r)?;
    Ok((0..2)
        .map(|j| {
            let c = column(&post.beta, j);
            BvmRow {
                coefficient: j,
                truth: beta[j],
                mqle: fit.beta[j],
                asymptotic_se: se[j],
                posterior_mean: mean(&c),
                posterior_sd: sd(&c),
                acceptance_rate: post.acceptance_rate,
            }
        })
        .collect())
}

/// Interval metrics for one method on one replication, over the slope
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMetrics {
    pub method: &'static str,
    /// Fraction of slopes whose 95% interval covers the truth.
    pub coverage: f64,
    pub width: f64,
    pub rmse: f64,
    pub bias: f64,
}

fn coefficient_metrics(method: &'static str, est: &[f64], intervals: &[(f64, f64)], truth: &[f64]) -> CoefficientMetrics {
    let p = truth.len() as f64;
    let covered = intervals.iter().zip(truth).filter(|((lo, hi), t)| lo <= *t && *t <= hi).count();
    CoefficientMetrics {
        method,
        coverage: covered as f64 / p,
        width: intervals.iter().map(|(lo, hi)| hi - lo).sum::<f64>() / p,
        rmse: (est.iter().zip(truth).map(|(e, t)| (e - t).powi(2)).sum::<f64>() / p).sqrt(),
        bias: est.iter().zip(truth).map(|(e, t)| e - t).sum::<f64>() / p,
    }
}

/// Settings for the power-variance replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerGridSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub bootstrap_draws: usize,
    pub kappa_bounds: (f64, f64),
}

impl Default for PowerGridSettings {
    fn default() -> Self {
        PowerGridSettings { iterations: 3000, burn_in: 1000, bootstrap_draws: 500, kappa_bounds: (0.5, 3.0) }
    }
}

/// One power-variance replication: BBQ (φ and κ estimated), quasi-Poisson
/// and quasi-gamma MQLE with Wald intervals, and Bayesian-bootstrap Poisson.
/// Metrics cover the five slopes; the intercept (truth 0) is a nuisance.
pub fn power_grid_replication(
    n: usize,
    kappa: f64,
    phi: f64,
    settings: &PowerGridSettings,
    seed: u64,
) -> Result<Vec<CoefficientMetrics>> {
    let mut r = rng(seed);
    let sim = gen_power_grid(n, kappa, phi, &mut r)?;
    let truth = sim.beta.clone().unwrap();
    let data = &sim.data;
    let slopes = 1..6;
    let mut out = Vec::new();

    let model = ParametricModel::from_dataset(data, QuasiFamily::power(1.5)?, true)?;
    let post = bbq_quasi_posterior(&model, data, Some(settings.kappa_bounds), settings.iterations, settings.burn_in, &mut r)?;
    let mut est = Vec::new();
    let mut iv = Vec::new();
    for j in slopes.clone() {
        let c = column(&post.beta, j);
        est.push(mean(&c));
        iv.push(credible_intervals(&c, 0.95)?.equal_tail);
    }
    out.push(coefficient_metrics("BBQ", &est, &iv, &truth));

    for (name, fam) in [("QP", QuasiFamily::Poisson), ("QG", QuasiFamily::power(2.0)?)] {
        let m = ParametricModel { family: fam, ..model.clone() };
        let fit = fit_mqle(&m, data)?;
        let se = fit.standard_errors(n)?;
        let est: Vec<f64> = slopes.clone().map(|j| fit.beta[j]).collect();
        let iv: Vec<(f64, f64)> = slopes.clone().map(|j| (fit.beta[j] - Z975 * se[j], fit.beta[j] + Z975 * se[j])).collect();
        out.push(coefficient_metrics(name, &est, &iv, &truth));
    }

    let bb = bb_poisson(&model, data, settings.bootstrap_draws, &mut r)?;
    let mut est = Vec::new();
    let mut iv = Vec::new();
    for j in slopes {
        let c = column(&bb.beta, j);
        est.push(mean(&c));
        iv.push(credible_intervals(&c, 0.95)?.equal_tail);
    }
    out.push(coefficient_metrics("BBP", &est, &iv, &truth));
    Ok(out)
}

/// Quasi-gamma (bootstrap φ) versus gamma-likelihood φ on inverse-gamma
/// Friedman data.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaComparison {
    /// Σ (r − r̂)² under each fit, r = log μ.
    pub sse_gamma: f64,
    pub sse_quasi: f64,
    /// sse_gamma / sse_quasi.
    pub relative_mse: f64,
    pub phi_gamma: f64,
    pub phi_quasi: f64,
}

/// Posterior mean of log μ(X_i) for a scalar log-link fit.
fn mean_log_mu(draws: &Draws, family: &QuasiFamily) -> Vec<f64> {
    let r = draws.mean_r();
    match family {
        QuasiFamily::Gamma => r.iter().map(|v| -v).collect(),
        _ => r,
    }
}

pub fn gamma_comparison_replication(n: usize, p: usize, phi: f64, base: &SamplerConfig, seed: u64) -> Result<GammaComparison> {
    let mut r = rng(seed);
    let sim = gen_invgamma_friedman(n, p, phi, &mut r);
    let truth: Vec<f64> = sim.mu.iter().map(|m| m.ln()).collect();
    let fam = QuasiFamily::Gamma;
    let mut fits = Vec::new();
    for (k, method) in [DispersionMethod::GammaLikelihood, DispersionMethod::Bbq].into_iter().enumerate() {
        let mut cfg = base.clone();
        cfg.dispersion.method = method;
        cfg.record_fits = true;
        let d = run_chain(&sim.data, &fam, &cfg, seed.wrapping_mul(31).wrapping_add(k as u64))?;
        let est = mean_log_mu(&d, &fam);
        let sse: f64 = est.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum();
        fits.push((sse, mean(&d.phi)));
    }
    Ok(GammaComparison {
        sse_gamma: fits[0].0,
        sse_quasi: fits[1].0,
        relative_mse: fits[0].0 / fits[1].0,
        phi_gamma: fits[0].1,
        phi_quasi: fits[1].1,
    })
}

/// Pointwise accuracy of fitted means against the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct PointwiseMetrics {
    pub method: String,
    pub rmse: f64,
    pub mse: f64,
    pub width: f64,
    pub coverage: f64,
    pub phi_mean: f64,
    pub kappa_mean: f64,
}

/// Pointwise metrics for outcome component `c` of `draws`, using HPD
/// intervals when `hpd` is set and equal-tail ones otherwise.
pub fn pointwise_metrics(method: &str, draws: &Draws, truth: &[f64], c: usize, hpd: bool) -> Result<PointwiseMetrics> {
    let d = draws.outcome_dim;
    let n = draws.n_train;
    if draws.fitted_mu.len() < 2 || truth.len() != n * d {
        return Err(Error::Config("need recorded fits for at least two draws".into()));
    }
    let (mut se, mut width, mut covered) = (0.0, 0.0, 0usize);
    for i in 0..n {
        let col: Vec<f64> = draws.fitted_mu.iter().map(|m| m[i * d + c]).collect();
        let t = truth[i * d + c];
        se += (mean(&col) - t).powi(2);
        let ci = credible_intervals(&col, 0.95)?;
        let (lo, hi) = if hpd { ci.hpd } else { ci.equal_tail };
        width += hi - lo;
        covered += (lo <= t && t <= hi) as usize;
    }
    let nf = n as f64;
    Ok(PointwiseMetrics {
        method: method.to_string(),
        rmse: (se / nf).sqrt(),
        mse: se / nf,
        width: width / nf,
        coverage: covered as f64 / nf,
        phi_mean: mean(&draws.phi),
        kappa_mean: mean(&draws.kappa),
    })
}

/// Quasi-Dirichlet replication: quasi-multinomial fit, metrics for μ₁ with
/// 95% HPD intervals.
pub fn multinomial_replication(n: usize, rho: f64, base: &SamplerConfig, seed: u64) -> Result<PointwiseMetrics> {
    let mut r = rng(seed);
    let sim = gen_dirichlet_multinomial(n, rho, &mut r);
    let fam = QuasiFamily::multinomial(3)?;
    let mut cfg = base.clone();
    cfg.record_fits = true;
    let d = run_chain(&sim.data, &fam, &cfg, seed.wrapping_mul(31).wrapping_add(1))?;
    pointwise_metrics("QMN", &d, &sim.mu, 0, true)
}

/// Quasi-power, quasi-Poisson and quasi-gamma forests on gamma data with
/// power-1.5 variance; pointwise metrics for μ with equal-tail intervals.
pub fn quasi_power_comparison(n: usize, p: usize, phi: f64, base: &SamplerConfig, seed: u64) -> Result<Vec<PointwiseMetrics>> {
    let mut r = rng(seed);
    let sim = gen_gamma_power(n, p, phi, &mut r);
    let mut out = Vec::new();
    for (k, (name, fam, estimate)) in [
        ("QPower", QuasiFamily::power(1.5)?, true),
        ("QP", QuasiFamily::Poisson, false),
        ("QG", QuasiFamily::Gamma, false),
    ]
    .into_iter()
    .enumerate()
    {
        let mut cfg = base.clone();
        cfg.record_fits = true;
        cfg.dispersion.estimate_kappa = estimate;
        let d = run_chain(&sim.data, &fam, &cfg, seed.wrapping_mul(31).wrapping_add(k as u64))?;
        out.push(pointwise_metrics(name, &d, &sim.mu, 0, false)?);
    }
    Ok(out)
}

/// Posterior summaries of (φ, κ) for one quasi-power forest run.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerRecovery {
    pub phi_true: f64,
    pub kappa_true: f64,
    pub phi_interval: (f64, f64),
    pub kappa_interval: (f64, f64),
    pub phi_mean: f64,
    pub kappa_mean: f64,
    pub phi_ess: f64,
    pub kappa_ess: f64,
    pub draws: usize,
}

impl PowerRecovery {
    pub fn covers_truth(&self) -> bool {
        let (p, k) = (self.phi_interval, self.kappa_interval);
        p.0 <= self.phi_true && self.phi_true <= p.1 && k.0 <= self.kappa_true && self.kappa_true <= k.1
    }
}

pub fn power_recovery(n: usize, p: usize, phi: f64, base: &SamplerConfig, seed: u64) -> Result<PowerRecovery> {
    let mut r = rng(seed);
    let sim = gen_gamma_power(n, p, phi, &mut r);
    let mut cfg = base.clone();
    cfg.dispersion.estimate_kappa = true;
    let d = run_chain(&sim.data, &QuasiFamily::power(1.5)?, &cfg, seed.wrapping_mul(31).wrapping_add(7))?;
    Ok(PowerRecovery {
        phi_true: phi,
        kappa_true: 1.5,
        phi_interval: credible_intervals(&d.phi, 0.95)?.equal_tail,
        kappa_interval: credible_intervals(&d.kappa, 0.95)?.equal_tail,
        phi_mean: mean(&d.phi),
        kappa_mean: mean(&d.kappa),
        phi_ess: effective_sample_size(&[&d.phi]),
        kappa_ess: effective_sample_size(&[&d.kappa]),
        draws: d.len(),
    })
}

/// Two-step Gibbs chains from several initial dispersions.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStepSummary {
    pub inits: Vec<f64>,
    pub chain_means: Vec<f64>,
    /// Monte Carlo standard errors sd/√ESS.
    pub chain_se: Vec<f64>,
    pub pooled_mean: f64,
    pub phi_moment: f64,
    pub acceptance_rates: Vec<f64>,
}

impl TwoStepSummary {
    /// Between-initialization standard deviation of the chain means is at
    /// most `k` root-mean-square Monte Carlo standard errors.
    pub fn chains_agree(&self, k: f64) -> bool {
        self.between_sd() <= k * self.rms_se()
    }

    pub fn between_sd(&self) -> f64 {
        sd(&self.chain_means)
    }

    pub fn rms_se(&self) -> f64 {
        (self.chain_se.iter().map(|s| s * s).sum::<f64>() / self.chain_se.len() as f64).sqrt()
    }

    /// Largest |m_i − mean of the other chains| in units of its standard error.
    pub fn max_leave_one_out_z(&self) -> f64 {
        let c = self.chain_means.len();
        (0..c)
            .map(|i| {
                let others: Vec<usize> = (0..c).filter(|&j| j != i).collect();
                let m = others.iter().map(|&j| self.chain_means[j]).sum::<f64>() / others.len() as f64;
                let v = others.iter().map(|&j| self.chain_se[j].powi(2)).sum::<f64>() / (others.len() as f64).powi(2);
                (self.chain_means[i] - m).abs() / (self.chain_se[i].powi(2) + v).sqrt()
            })
            .fold(0.0, f64::max)
    }

    pub fn relative_error_to_moment(&self) -> f64 {
        (self.pooled_mean - self.phi_moment).abs() / self.phi_moment
    }
}

pub fn two_step_experiment(
    n: usize,
    beta: [f64; 2],
    phi: f64,
    truncation: (f64, f64),
    inits: &[f64],
    settings: TwoStepSettings,
    seed: u64,
) -> Result<TwoStepSummary> {
    let mut r = rng(seed);
    let sim = gen_qpois(n, beta, phi, &mut r);
    let model = ParametricModel::from_dataset(&sim.data, QuasiFamily::Poisson, true)?;
    let fit = fit_mqle(&model, &sim.data)?;
    let mut out = TwoStepSummary {
        inits: inits.to_vec(),
        chain_means: Vec::new(),
        chain_se: Vec::new(),
        pooled_mean: 0.0,
        phi_moment: fit.phi_moment,
        acceptance_rates: Vec::new(),
    };
    let mut all = Vec::new();
    for (c, &init) in inits.iter().enumerate() {
        let mut cr = rng(seed.wrapping_add(1000 + c as u64));
        let d = two_step_gibbs(&model, &sim.data, truncation, init, settings, &mut cr)?;
        let ess = effective_sample_size(&[&d.phi]);
        out.chain_means.push(mean(&d.phi));
        out.chain_se.push(sd(&d.phi) / ess.sqrt());
        out.acceptance_rates.push(d.acceptance_rate);
        all.extend(d.phi);
    }
    out.pooled_mean = mean(&all);
    Ok(out)
}
