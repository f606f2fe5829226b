//! Dispersion (φ) and power-exponent (κ) updates.

use nalgebra::DMatrix;
use rand::Rng;
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::backfit::{run_chain, SamplerConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::family::QuasiFamily;
use crate::random::{bayesian_bootstrap_weights, gamma_rate, standard_normal};
use crate::slice::slice_sample;
use crate::special::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DispersionMethod {
    Fixed,
    /// Extended quasi-posterior. Not recommended: its φ posterior is not
    /// consistent.
    Eqp,
    /// Pseudo-likelihood posterior.
    Plp,
    /// Bayesian-bootstrap quasi-likelihood.
    Bbq,
    /// Pseudo-empirical Bayes; φ is held fixed within each chain.
    PseudoEb,
    /// Posterior of φ under a gamma likelihood with shape ω/φ.
    GammaLikelihood,
}

impl DispersionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            DispersionMethod::Fixed => "fixed",
            DispersionMethod::Eqp => "eqp",
            DispersionMethod::Plp => "plp",
            DispersionMethod::Bbq => "bbq",
            DispersionMethod::PseudoEb => "pseudo-eb",
            DispersionMethod::GammaLikelihood => "gamma-lik",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fixed" => DispersionMethod::Fixed,
            "eqp" => DispersionMethod::Eqp,
            "plp" => DispersionMethod::Plp,
            "bbq" => DispersionMethod::Bbq,
            "pseudo-eb" => DispersionMethod::PseudoEb,
            "gamma-lik" => DispersionMethod::GammaLikelihood,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DispersionConfig {
    pub method: DispersionMethod,
    /// φ⁻¹ ~ Gam(prior_a, prior_b) (rate).
    pub prior_a: f64,
    pub prior_b: f64,
    pub kappa_bounds: (f64, f64),
    /// Update κ as well as φ (power family only).
    pub estimate_kappa: bool,
    /// Random-walk step for the pseudo-likelihood κ update.
    pub kappa_step: f64,
    pub theory_truncation: Option<(f64, f64)>,
    pub eb_iterations: usize,
    pub eb_sweeps: usize,
    pub eb_burn_in: usize,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        DispersionConfig {
            method: DispersionMethod::Bbq,
            prior_a: 0.5,
            prior_b: 0.5,
            kappa_bounds: (0.5, 3.0),
            estimate_kappa: false,
            kappa_step: 0.05,
            theory_truncation: None,
            eb_iterations: 5,
            eb_sweeps: 200,
            eb_burn_in: 100,
        }
    }
}

impl DispersionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.prior_a > 0.0 && self.prior_b > 0.0) {
            return Err(Error::Config("dispersion prior parameters must be positive".into()));
        }
        let (lo, hi) = self.kappa_bounds;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("kappa bounds ({lo}, {hi}) must satisfy lo < hi")));
        }
        if let Some((a, b)) = self.theory_truncation {
            if !(0.0 < a && a < b && b.is_finite()) {
                return Err(Error::Config(format!("truncation [{a}, {b}] must satisfy 0 < a < b < inf")));
            }
        }
        if !(self.kappa_step > 0.0) {
            return Err(Error::Config("kappa step must be positive".into()));
        }
        if self.method == DispersionMethod::PseudoEb && (self.eb_iterations == 0 || self.eb_sweeps <= self.eb_burn_in) {
            return Err(Error::Config("pseudo-EB needs at least one iteration and sweeps > burn-in".into()));
        }
        Ok(())
    }
}

/// φ = 1/G with G ~ Gam(a + m/2, b + ΣωD/2).
pub fn eqp_update<R: Rng + ?Sized>(deviance_sum: f64, m: f64, a: f64, b: f64, rng: &mut R) -> f64 {
    1.0 / gamma_rate(a + m / 2.0, b + deviance_sum / 2.0, rng)
}

/// φ = 1/G with G ~ Gam(a + N/2, b + ΣZ²/2).
pub fn plp_update<R: Rng + ?Sized>(z: &[f64], a: f64, b: f64, rng: &mut R) -> f64 {
    let ss: f64 = z.iter().map(|v| v * v).sum();
    plp_from_sums(ss, z.len() as f64, a, b, rng)
}

pub fn plp_from_sums<R: Rng + ?Sized>(sum_sq: f64, m: f64, a: f64, b: f64, rng: &mut R) -> f64 {
    1.0 / gamma_rate(a + m / 2.0, b + sum_sq / 2.0, rng)
}

/// φ = Σ p_i Z_i² for given bootstrap weights.
pub fn bbq_weighted(z_sq: &[f64], p: &[f64]) -> f64 {
    z_sq.iter().zip(p).map(|(z, w)| z * w).sum()
}

/// φ = Σ p_i Z_i² with p ~ Dirichlet(1, …, 1). The flag reports all-zero
/// residuals (φ = 0).
pub fn bbq_update<R: Rng + ?Sized>(z_sq: &[f64], rng: &mut R) -> (f64, bool) {
    let p = bayesian_bootstrap_weights(z_sq.len(), rng);
    let phi = bbq_weighted(z_sq, &p);
    (phi, phi == 0.0)
}

/// Weighted profile objective for power-variance residuals: for each κ the
/// optimal φ is Σ p ω (y − μ)² μ^{−κ}, and the profiled weighted normal
/// log-likelihood is −½[log φ*(κ) + κ Σ p log μ] up to constants.
struct PowerProfile {
    /// log p_i + log ω_i + 2 log|y_i − μ_i| (nonzero residuals only).
    c: Vec<f64>,
    log_mu: Vec<f64>,
    plogmu: f64,
}

impl PowerProfile {
    fn new(y: &[f64], mu: &[f64], w: &[f64], p: &[f64]) -> Self {
        let mut c = Vec::with_capacity(y.len());
        let mut log_mu = Vec::with_capacity(y.len());
        let mut plogmu = 0.0;
        for i in 0..y.len() {
            let lm = mu[i].ln();
            plogmu += p[i] * lm;
            let r = (y[i] - mu[i]).abs();
            if r > 0.0 && p[i] > 0.0 {
                c.push(p[i].ln() + w[i].ln() + 2.0 * r.ln());
                log_mu.push(lm);
            }
        }
        PowerProfile { c, log_mu, plogmu }
    }

    fn log_phi(&self, kappa: f64) -> f64 {
        let m = self
            .c
            .iter()
            .zip(&self.log_mu)
            .map(|(c, l)| c - kappa * l)
            .fold(f64::NEG_INFINITY, f64::max);
        m + self.c.iter().zip(&self.log_mu).map(|(c, l)| (c - kappa * l - m).exp()).sum::<f64>().ln()
    }

    fn objective(&self, kappa: f64) -> f64 {
        -0.5 * (self.log_phi(kappa) + kappa * self.plogmu)
    }
}

/// Maximizes a unimodal function on [lo, hi] by golden-section search.
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (a + b);
    let candidates = [(lo, f(lo)), (hi, f(hi)), (mid, f(mid))];
    candidates.iter().fold((mid, f64::NEG_INFINITY), |best, &(x, v)| if v > best.1 { (x, v) } else { best }).0
}

/// Bootstrap (φ, κ) for power-variance residuals under weights `p`.
/// Returns (φ, κ, degenerate).
pub fn bbq_power_weighted(y: &[f64], mu: &[f64], w: &[f64], p: &[f64], bounds: (f64, f64)) -> (f64, f64, bool) {
    let prof = PowerProfile::new(y, mu, w, p);
    if prof.c.is_empty() {
        return (0.0, 0.5 * (bounds.0 + bounds.1), true);
    }
    let kappa = golden_section_max(|k| prof.objective(k), bounds.0, bounds.1, 1e-6);
    (prof.log_phi(kappa).exp(), kappa, false)
}

pub fn bbq_power_update<R: Rng + ?Sized>(
    y: &[f64],
    mu: &[f64],
    w: &[f64],
    bounds: (f64, f64),
    rng: &mut R,
) -> (f64, f64, bool) {
    let p = bayesian_bootstrap_weights(y.len(), rng);
    bbq_power_weighted(y, mu, w, &p, bounds)
}

/// Weighted normal log-likelihood Σ p_i log N(y_i | μ_i, φ μ_i^κ / ω_i),
/// used to check the bootstrap optimum.
pub fn weighted_normal_loglik(y: &[f64], mu: &[f64], w: &[f64], p: &[f64], phi: f64, kappa: f64) -> f64 {
    (0..y.len())
        .map(|i| {
            let v = phi * mu[i].powf(kappa) / w[i];
            p[i] * (-0.5 * (2.0 * std::f64::consts::PI * v).ln() - (y[i] - mu[i]).powi(2) / (2.0 * v))
        })
        .sum()
}

/// log PL(φ, κ) = Σ log N(y_i | μ_i, φ μ_i^κ / ω_i).
pub fn power_pseudo_loglik(y: &[f64], mu: &[f64], w: &[f64], phi: f64, kappa: f64) -> f64 {
    let p = vec![1.0; y.len()];
    weighted_normal_loglik(y, mu, w, &p, phi, kappa)
}

/// Random-walk Metropolis step on κ targeting PL(φ, κ) × Uniform(bounds).
pub fn plp_kappa_step<R: Rng + ?Sized>(
    y: &[f64],
    mu: &[f64],
    w: &[f64],
    phi: f64,
    kappa: f64,
    bounds: (f64, f64),
    step: f64,
    rng: &mut R,
) -> f64 {
    let prop = kappa + step * standard_normal(rng);
    if prop < bounds.0 || prop > bounds.1 {
        return kappa;
    }
    let log_ratio = power_pseudo_loglik(y, mu, w, phi, prop) - power_pseudo_loglik(y, mu, w, phi, kappa);
    if rng.random::<f64>().ln() < log_ratio {
        prop
    } else {
        kappa
    }
}

/// Slice update of φ under Y ~ Gam(shape ω/φ, rate ω/(φμ)) with the
/// φ⁻¹ ~ Gam(a, b) prior.
pub fn gamma_likelihood_update<R: Rng + ?Sized>(
    y: &[f64],
    mu: &[f64],
    w: &[f64],
    phi: f64,
    a: f64,
    b: f64,
    rng: &mut R,
) -> f64 {
    let sum_terms: Vec<(f64, f64, f64)> = (0..y.len()).map(|i| (w[i], y[i].ln() - mu[i].ln(), y[i] / mu[i])).collect();
    let target = |theta: f64| {
        if !(-30.0..=30.0).contains(&theta) {
            return f64::NEG_INFINITY;
        }
        let inv = (-theta).exp();
        let mut ll = 0.0;
        for &(wi, log_ratio, ratio) in &sum_terms {
            let alpha = wi * inv;
            ll += alpha * alpha.ln() - ln_gamma(alpha) + alpha * log_ratio - alpha * ratio;
        }
        ll - a * theta - b * inv
    };
    slice_sample(phi.ln(), target, 1.0, 50, rng).exp()
}

/// Draw φ with 1/φ ~ Gam(shape, rate) truncated to φ ∈ [lo, hi], by
/// inverting the gamma CDF (upper tail when the interval lies above the
/// median, for precision).
pub fn truncated_inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, lo: f64, hi: f64, rng: &mut R) -> Result<f64> {
    if !(0.0 < lo && lo <= hi) {
        return Err(Error::Config(format!("truncation [{lo}, {hi}] must satisfy 0 < lo <= hi")));
    }
    let (tl, th) = (1.0 / hi, 1.0 / lo);
    let upper = gamma_lr(shape, rate * tl) > 0.5;
    let cdf = |t: f64| if upper { gamma_ur(shape, rate * t) } else { gamma_lr(shape, rate * t) };
    let (fl, fh) = (cdf(tl), cdf(th));
    let mass = (fh - fl).abs();
    if !(mass >= 1e-12) {
        return Err(Error::Numerical(format!(
            "truncated inverse gamma has mass {mass:e} on [{lo}, {hi}] (shape {shape}, rate {rate})"
        )));
    }
    let u = fl + rng.random::<f64>() * (fh - fl);
    let (mut a, mut b) = (tl, th);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let below = if upper { cdf(m) > u } else { cdf(m) < u };
        if below {
            a = m;
        } else {
            b = m;
        }
    }
    Ok((1.0 / (0.5 * (a + b))).clamp(lo, hi))
}

/// φ̂(β) = N⁻¹ Σ ω_i (y_i − μ_i)² / V(μ_i) with μ_i from the linear predictor.
pub fn phi_hat_at(beta: &[f64], design: &DMatrix<f64>, data: &Dataset, family: &QuasiFamily) -> Result<f64> {
    let n = data.n();
    let mut total = 0.0;
    for i in 0..n {
        let r: f64 = (0..beta.len()).map(|j| design[(i, j)] * beta[j]).sum();
        let mu = family.mean_scalar(r);
        total += data.weights()[i] * (data.y()[i] - mu).powi(2) / family.variance(mu)?;
    }
    Ok(total / n as f64)
}

/// φ ~ InvGam(N/2, φ̂(β) N/2) truncated to [a, b].
pub fn theory_g_update<R: Rng + ?Sized>(
    beta: &[f64],
    design: &DMatrix<f64>,
    data: &Dataset,
    family: &QuasiFamily,
    truncation: (f64, f64),
    rng: &mut R,
) -> Result<f64> {
    let phi_hat = phi_hat_at(beta, design, data, family)?;
    let n = data.n() as f64;
    truncated_inverse_gamma(n / 2.0, phi_hat * n / 2.0, truncation.0, truncation.1, rng)
}

/// Per-row squared residual sums S_i with E S_i = m_i φ: m_i = 1 for scalar
/// families and K − 1 for the multinomial (S_i = Σ_k n_i (y_ik − μ_ik)²/μ_ik).
pub fn residual_terms(family: &QuasiFamily, data: &Dataset, mu: &[f64]) -> Result<(Vec<f64>, f64)> {
    let d = family.outcome_dim();
    let m_row = match family {
        QuasiFamily::Multinomial { categories } => *categories as f64 - 1.0,
        _ => 1.0,
    };
    let mut s = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let z2 = family.squared_residual_row(data.outcome(i), &mu[i * d..(i + 1) * d], data.weights()[i])?;
        s.push(z2 * m_row);
    }
    Ok((s, m_row))
}

/// New dispersion state after one update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionStep {
    pub phi: f64,
    pub kappa: f64,
    pub degenerate: bool,
}

/// One dispersion update inside a sweep, given current means `mu`
/// (N × outcome_dim). `family` carries the current κ for the power model.
pub fn sweep_update<R: Rng + ?Sized>(
    cfg: &DispersionConfig,
    family: &QuasiFamily,
    data: &Dataset,
    mu: &[f64],
    phi: f64,
    kappa: f64,
    rng: &mut R,
) -> Result<DispersionStep> {
    let keep = DispersionStep { phi, kappa, degenerate: false };
    let power_kappa = cfg.estimate_kappa && matches!(family, QuasiFamily::Power { .. });
    match cfg.method {
        DispersionMethod::Fixed | DispersionMethod::PseudoEb => Ok(keep),
        DispersionMethod::Eqp => {
            let d = family.outcome_dim();
            let mut dev = 0.0;
            for i in 0..data.n() {
                dev += data.weights()[i] * family.deviance_row(data.outcome(i), &mu[i * d..(i + 1) * d])?;
            }
            let (_, m_row) = residual_terms(family, data, mu)?;
            let phi = eqp_update(dev, m_row * data.n() as f64, cfg.prior_a, cfg.prior_b, rng);
            Ok(DispersionStep { phi, kappa, degenerate: false })
        }
        DispersionMethod::Plp => {
            let (s, m_row) = residual_terms(family, data, mu)?;
            let phi = plp_from_sums(s.iter().sum(), m_row * s.len() as f64, cfg.prior_a, cfg.prior_b, rng);
            let kappa = if power_kappa {
                plp_kappa_step(data.y(), mu, data.weights(), phi, kappa, cfg.kappa_bounds, cfg.kappa_step, rng)
            } else {
                kappa
            };
            Ok(DispersionStep { phi, kappa, degenerate: false })
        }
        DispersionMethod::Bbq => {
            if power_kappa {
                let (new_phi, new_kappa, degenerate) = bbq_power_update(data.y(), mu, data.weights(), cfg.kappa_bounds, rng);
                return Ok(if degenerate { DispersionStep { degenerate, ..keep } } else { DispersionStep { phi: new_phi, kappa: new_kappa, degenerate } });
            }
            let (s, m_row) = residual_terms(family, data, mu)?;
            let (raw, degenerate) = bbq_update(&s, rng);
            Ok(if degenerate { DispersionStep { degenerate, ..keep } } else { DispersionStep { phi: raw / m_row, kappa, degenerate } })
        }
        DispersionMethod::GammaLikelihood => {
            if family.outcome_dim() != 1 || matches!(family, QuasiFamily::Binomial) {
                return Err(Error::Config("gamma-likelihood dispersion needs a positive scalar outcome".into()));
            }
            let phi = gamma_likelihood_update(data.y(), mu, data.weights(), phi, cfg.prior_a, cfg.prior_b, rng);
            Ok(DispersionStep { phi, kappa, degenerate: false })
        }
    }
}

/// Posterior-averaged pseudo-likelihood over a set of mean draws:
/// log (S⁻¹ Σ_s PL_s(φ, κ)) with
/// log PL_s = −(m/2) log φ − ½ Σ log V_s − Q_s/(2φ).
pub struct AveragedPseudoLik {
    m: f64,
    /// Per draw: log(ω(y − μ)²) for nonzero residuals, paired with log μ
    /// (power κ path) or log V(μ) (fixed variance path).
    rows: Vec<(Vec<f64>, Vec<f64>, f64)>,
    power: bool,
}

impl AveragedPseudoLik {
    pub fn new(family: &QuasiFamily, data: &Dataset, mu_draws: &[Vec<f64>], estimate_kappa: bool) -> Result<Self> {
        let power = estimate_kappa && matches!(family, QuasiFamily::Power { .. });
        let d = family.outcome_dim();
        let categories = match family {
            QuasiFamily::Multinomial { categories } => *categories as f64 - 1.0,
            _ => 1.0,
        };
        let mut rows = Vec::with_capacity(mu_draws.len());
        for mu in mu_draws {
            let mut c = Vec::new();
            let mut lv = Vec::new();
            let mut sum_log_v = 0.0;
            for i in 0..data.n() {
                let y = data.outcome(i);
                let w = data.weights()[i];
                let mr = &mu[i * d..(i + 1) * d];
                match family {
                    QuasiFamily::Multinomial { .. } => {
                        for k in 0..d {
                            sum_log_v += mr[k].ln();
                            let r = (y[k] - mr[k]).abs();
                            if r > 0.0 {
                                c.push(w.ln() + 2.0 * r.ln());
                                lv.push(mr[k].ln());
                            }
                        }
                    }
                    _ => {
                        let l = if power { mr[0].ln() } else { family.variance(mr[0])?.ln() };
                        sum_log_v += l;
                        let r = (y[0] - mr[0]).abs();
                        if r > 0.0 {
                            c.push(w.ln() + 2.0 * r.ln());
                            lv.push(l);
                        }
                    }
                }
            }
            rows.push((c, lv, sum_log_v));
        }
        Ok(AveragedPseudoLik { m: categories * data.n() as f64, rows, power })
    }

    fn draw_terms(&self, kappa: f64) -> Vec<(f64, f64)> {
        // (log Q_s, ½ Σ log V_s)
        let scale = if self.power { kappa } else { 1.0 };
        self.rows
            .iter()
            .map(|(c, lv, slv)| {
                let m = c.iter().zip(lv).map(|(c, l)| c - scale * l).fold(f64::NEG_INFINITY, f64::max);
                let lq = if m == f64::NEG_INFINITY {
                    m
                } else {
                    m + c.iter().zip(lv).map(|(c, l)| (c - scale * l - m).exp()).sum::<f64>().ln()
                };
                (lq, 0.5 * scale * slv)
            })
            .collect()
    }

    fn value_from_terms(&self, terms: &[(f64, f64)], log_phi: f64) -> f64 {
        let vals: Vec<f64> = terms
            .iter()
            .map(|&(lq, half_lv)| -0.5 * self.m * log_phi - half_lv - 0.5 * (lq - log_phi).exp())
            .collect();
        let mx = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        mx + (vals.iter().map(|v| (v - mx).exp()).sum::<f64>() / vals.len() as f64).ln()
    }

    pub fn value(&self, phi: f64, kappa: f64) -> f64 {
        self.value_from_terms(&self.draw_terms(kappa), phi.ln())
    }

    fn best_phi(&self, kappa: f64) -> (f64, f64) {
        let terms = self.draw_terms(kappa);
        let opts: Vec<f64> = terms.iter().map(|&(lq, _)| lq - self.m.ln()).filter(|v| v.is_finite()).collect();
        if opts.is_empty() {
            return (f64::NEG_INFINITY, f64::NEG_INFINITY);
        }
        let lo = opts.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
        let hi = opts.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 1.0;
        let f = |lp: f64| self.value_from_terms(&terms, lp);
        let lp = grid_then_golden(f, lo, hi, 64);
        (lp, f(lp))
    }

    /// Maximizer (φ, κ); κ is searched over `bounds` only on the power path.
    pub fn maximize(&self, kappa: f64, bounds: (f64, f64)) -> (f64, f64) {
        if self.power {
            let k = grid_then_golden(|k| self.best_phi(k).1, bounds.0, bounds.1, 32);
            (self.best_phi(k).0.exp(), k)
        } else {
            (self.best_phi(kappa).0.exp(), kappa)
        }
    }
}

fn grid_then_golden<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, points: usize) -> f64 {
    let step = (hi - lo) / (points - 1) as f64;
    let (mut best, mut bv) = (lo, f64::NEG_INFINITY);
    for i in 0..points {
        let x = lo + step * i as f64;
        let v = f(x);
        if v > bv {
            best = x;
            bv = v;
        }
    }
    let x = golden_section_max(&f, (best - step).max(lo), (best + step).min(hi), 1e-8 * (1.0 + best.abs()));
    if f(x) >= bv {
        x
    } else {
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoEbStep {
    pub phi: f64,
    pub kappa: f64,
    /// Averaged pseudo-likelihood at the previous and the new estimate, on
    /// this iteration's draws.
    pub objective_before: f64,
    pub objective_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoEbResult {
    pub phi: f64,
    pub kappa: f64,
    pub trajectory: Vec<PseudoEbStep>,
}

/// Pseudo-empirical Bayes: alternate a short chain at fixed (φ, κ) with
/// maximization of the posterior-averaged pseudo-likelihood.
pub fn pseudo_eb(data: &Dataset, family: &QuasiFamily, base: &SamplerConfig, seed: u64) -> Result<PseudoEbResult> {
    let disp = &base.dispersion;
    let mut phi = base.phi_init.unwrap_or(1.0);
    let mut kappa = family.kappa().unwrap_or(1.0);
    let mut trajectory = Vec::new();
    for t in 0..disp.eb_iterations {
        let mut cfg = base.clone();
        cfg.dispersion.method = DispersionMethod::Fixed;
        cfg.phi_init = Some(phi);
        cfg.iterations = disp.eb_sweeps;
        cfg.burn_in = disp.eb_burn_in;
        cfg.thin = 1;
        cfg.record_fits = true;
        cfg.keep_ensembles = false;
        let fam = family.with_kappa(kappa);
        let draws = run_chain(data, &fam, &cfg, seed.wrapping_add(t as u64))?;
        let apl = AveragedPseudoLik::new(&fam, data, &draws.fitted_mu, disp.estimate_kappa)?;
        let before = apl.value(phi, kappa);
        let (new_phi, new_kappa) = apl.maximize(kappa, disp.kappa_bounds);
        let after = apl.value(new_phi, new_kappa);
        phi = new_phi;
        kappa = new_kappa;
        trajectory.push(PseudoEbStep { phi, kappa, objective_before: before, objective_after: after });
    }
    Ok(PseudoEbResult { phi, kappa, trajectory })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bbq_constant_and_forced_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (phi, deg) = bbq_update(&[2.5; 7], &mut rng);
            assert!((phi - 2.5).abs() < 1e-12 && !deg);
        }
        assert_eq!(bbq_weighted(&[1.0, 4.0], &[0.5, 0.5]), 2.5);
        assert_eq!(bbq_update(&[0.0; 3], &mut rng), (0.0, true));
    }

    #[test]
    fn golden_section_finds_peak() {
        let x = golden_section_max(|x| -(x - 1.3).powi(2), 0.5, 3.0, 1e-9);
        assert!((x - 1.3).abs() < 1e-6);
        let edge = golden_section_max(|x| x, 0.5, 3.0, 1e-9);
        assert_eq!(edge, 3.0);
    }

    #[test]
    fn truncated_inverse_gamma_stays_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for &(lo, hi) in &[(0.1, 10.0), (1.999999, 2.0), (2.2, 6.0)] {
            for _ in 0..100 {
                let phi = truncated_inverse_gamma(1000.0, 2000.0, lo, hi, &mut rng).unwrap();
                assert!(phi >= lo && phi <= hi);
            }
        }
        assert!(truncated_inverse_gamma(5000.0, 5000.0, 100.0, 200.0, &mut rng).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DispersionConfig::default().validate().is_ok());
        let bad = DispersionConfig { kappa_bounds: (2.0, 1.0), ..DispersionConfig::default() };
        assert!(bad.validate().is_err());
        let bad = DispersionConfig { theory_truncation: Some((0.0, 1.0)), ..DispersionConfig::default() };
        assert!(bad.validate().is_err());
        for m in ["fixed", "eqp", "plp", "bbq", "pseudo-eb", "gamma-lik"] {
            assert_eq!(DispersionMethod::parse(m).unwrap().name(), m);
        }
    }
}
