//! Parametric quasi-likelihood models r(x) = xᵀβ: maximum quasi-likelihood
//! by IRLS, random-walk quasi-posterior sampling, the two-step Gibbs
//! sampler, and the Bayesian-bootstrap Poisson estimator.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::data::Dataset;
use crate::dispersion::{bbq_power_weighted, bbq_weighted, theory_g_update};
use crate::error::{Error, Result};
use crate::family::QuasiFamily;
use crate::random::{bayesian_bootstrap_weights, standard_normal};

const IRLS_MAX_ITER: usize = 100;
const IRLS_TOL: f64 = 1e-10;
const MAX_HALVINGS: usize = 30;

/// Linear-predictor quasi-likelihood model.
#[derive(Debug, Clone)]
pub struct ParametricModel {
    pub design: DMatrix<f64>,
    pub family: QuasiFamily,
    /// Flat prior on {‖β‖ ≤ R}; infinite for an unrestricted flat prior.
    pub prior_radius: f64,
}

impl ParametricModel {
    pub fn new(design: DMatrix<f64>, family: QuasiFamily, prior_radius: f64) -> Result<Self> {
        family.validate()?;
        if family.is_categorical() {
            return Err(Error::Config("parametric models take scalar families".into()));
        }
        if !(prior_radius > 0.0) {
            return Err(Error::Config("prior radius must be positive".into()));
        }
        let (n, p) = design.shape();
        if p == 0 || n < p {
            return Err(Error::Design(format!("design is {n}×{p}; need N ≥ P ≥ 1")));
        }
        let qr = design.clone().col_piv_qr();
        let diag = qr.r().diagonal();
        let scale = diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(scale > 0.0) || diag.iter().any(|v| v.abs() <= 1e-10 * scale) {
            return Err(Error::Design("design matrix is not of full column rank".into()));
        }
        Ok(ParametricModel { design, family, prior_radius })
    }

    /// Design from the dataset's features, optionally with an intercept column.
    pub fn from_dataset(data: &Dataset, family: QuasiFamily, intercept: bool) -> Result<Self> {
        let (n, p) = (data.n(), data.p());
        let off = intercept as usize;
        let design = DMatrix::from_fn(n, p + off, |i, j| if j < off { 1.0 } else { data.feature(i, j - off) });
        Self::new(design, family, f64::INFINITY)
    }

    pub fn num_coefficients(&self) -> usize {
        self.design.ncols()
    }

    pub fn means(&self, beta: &[f64]) -> Vec<f64> {
        let r = &self.design * DVector::from_column_slice(beta);
        r.iter().map(|&v| self.family.mean_scalar(v)).collect()
    }

    pub fn in_support(&self, beta: &[f64]) -> bool {
        self.prior_radius.is_infinite() || beta.iter().map(|b| b * b).sum::<f64>().sqrt() <= self.prior_radius
    }

    /// Weighted total deviance Σ ω_i D(y_i, μ_i); infinite outside the mean space.
    pub fn deviance(&self, data: &Dataset, beta: &[f64]) -> f64 {
        self.deviance_with(&self.family, data, beta, None)
    }

    fn deviance_with(&self, family: &QuasiFamily, data: &Dataset, beta: &[f64], extra: Option<&[f64]>) -> f64 {
        let r = &self.design * DVector::from_column_slice(beta);
        let (y, w) = (data.y(), data.weights());
        let mut total = 0.0;
        for i in 0..data.n() {
            let wi = w[i] * extra.map_or(1.0, |e| e[i]);
            if wi == 0.0 {
                continue;
            }
            match family.deviance(y[i], family.mean_scalar(r[i])) {
                Ok(d) => total += wi * d,
                Err(_) => return f64::INFINITY,
            }
        }
        total
    }

    /// −2 Σ ω_i Q(y_i; μ_i): the deviance up to a β-free constant, finite
    /// for zero outcomes under every power.
    fn objective(&self, family: &QuasiFamily, data: &Dataset, beta: &[f64], extra: Option<&[f64]>) -> f64 {
        let r = &self.design * DVector::from_column_slice(beta);
        let (y, w) = (data.y(), data.weights());
        let mut total = 0.0;
        for i in 0..data.n() {
            let wi = w[i] * extra.map_or(1.0, |e| e[i]);
            if wi == 0.0 {
                continue;
            }
            match family.quasi_loglik(y[i], family.mean_scalar(r[i])) {
                Ok(q) if q.is_finite() => total -= 2.0 * wi * q,
                _ => return f64::INFINITY,
            }
        }
        total
    }

    /// log π̃(β | φ) up to a β-free constant: −Σ ω_i D_i / (2φ) on the prior
    /// support, computed as Σ ω_i Q(y_i; μ_i) / φ.
    pub fn log_quasi_posterior(&self, data: &Dataset, beta: &[f64], phi: f64) -> f64 {
        self.log_quasi_posterior_with(&self.family, data, beta, phi)
    }

    fn log_quasi_posterior_with(&self, family: &QuasiFamily, data: &Dataset, beta: &[f64], phi: f64) -> f64 {
        if !self.in_support(beta) {
            return f64::NEG_INFINITY;
        }
        -self.objective(family, data, beta, None) / (2.0 * phi)
    }

    /// Score Σ ω_i (y_i − μ_i) μ'_i / V(μ_i) X_i.
    pub fn score(&self, data: &Dataset, beta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.irls_pieces(&self.family, data, beta, None)?.0.iter().copied().collect())
    }

    /// (score, expected information X^T W X, observed information).
    fn irls_pieces(
        &self,
        family: &QuasiFamily,
        data: &Dataset,
        beta: &[f64],
        extra: Option<&[f64]>,
    ) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let x = &self.design;
        let p = x.ncols();
        let r = x * DVector::from_column_slice(beta);
        let mut u = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        let mut observed = DMatrix::zeros(p, p);
        let (y, w) = (data.y(), data.weights());
        for i in 0..data.n() {
            let wi = w[i] * extra.map_or(1.0, |e| e[i]);
            let mu = family.mean_scalar(r[i]);
            let d = family.dmu_dr(r[i]);
            let v = family.variance(mu)?;
            let s = wi * (y[i] - mu) * d / v;
            let h = wi * d * d / v;
            // derivative of d/V in r; zero for canonical links
            let dc = match family {
                QuasiFamily::Power { kappa } => (1.0 - kappa) * mu.powf(1.0 - kappa),
                QuasiFamily::Gamma => -1.0 / mu,
                _ => 0.0,
            };
            let ho = h - wi * (y[i] - mu) * dc;
            let row = x.row(i);
            for a in 0..p {
                u[a] += s * row[a];
                for b in 0..=a {
                    info[(a, b)] += h * row[a] * row[b];
                    observed[(a, b)] += ho * row[a] * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                info[(b, a)] = info[(a, b)];
                observed[(b, a)] = observed[(a, b)];
            }
        }
        Ok((u, info, observed))
    }

    fn start(&self, family: &QuasiFamily, data: &Dataset) -> Vec<f64> {
        let z = DVector::from_iterator(
            data.n(),
            data.y().iter().map(|&y| match family {
                QuasiFamily::Binomial => {
                    let m = (y + 0.5) / 2.0;
                    ((1.0 - m) / m).ln()
                }
                QuasiFamily::Gamma => -(y.max(1e-8)).ln(),
                _ => (y + 0.1).ln(),
            }),
        );
        let svd = self.design.clone().svd(true, true);
        match svd.solve(&z, 1e-12) {
            Ok(b) if b.iter().all(|v| v.is_finite()) => b.iter().copied().collect(),
            _ => vec![0.0; self.design.ncols()],
        }
    }
}

/// Result of maximum quasi-likelihood fitting.
#[derive(Debug, Clone)]
pub struct MqleFit {
    pub beta: Vec<f64>,
    /// Ĥ = XᵀWX / N at β̂.
    pub hessian: DMatrix<f64>,
    /// Moment estimator of φ with P degrees of freedom removed.
    pub phi_moment: f64,
    pub deviance: f64,
    pub iterations: usize,
    pub score_norm: f64,
}

impl MqleFit {
    /// φ (N Ĥ)⁻¹, the asymptotic covariance of β̂ at dispersion φ.
    pub fn asymptotic_covariance(&self, n: usize, phi: f64) -> Result<DMatrix<f64>> {
        let inv = (self.hessian.clone() * n as f64)
            .try_inverse()
            .ok_or_else(|| Error::Numerical("information matrix is singular".into()))?;
        Ok(inv * phi)
    }

    pub fn standard_errors(&self, n: usize) -> Result<Vec<f64>> {
        let c = self.asymptotic_covariance(n, self.phi_moment)?;
        Ok((0..c.nrows()).map(|j| c[(j, j)].sqrt()).collect())
    }
}

/// IRLS with step halving for the maximum quasi-likelihood estimator.
pub fn fit_mqle(model: &ParametricModel, data: &Dataset) -> Result<MqleFit> {
    fit_irls(model, &model.family, data, None)
}

/// IRLS for the score equation with observation weights ω_i·e_i.
pub fn fit_weighted(model: &ParametricModel, data: &Dataset, extra: &[f64]) -> Result<MqleFit> {
    if extra.len() != data.n() {
        return Err(Error::Config("weight vector length differs from N".into()));
    }
    fit_irls(model, &model.family, data, Some(extra))
}

fn fit_irls(model: &ParametricModel, family: &QuasiFamily, data: &Dataset, extra: Option<&[f64]>) -> Result<MqleFit> {
    check_rows(model, data)?;
    check_outcomes(family, data)?;
    let mut beta = model.start(family, data);
    let mut obj = model.objective(family, data, &beta, extra);
    if !obj.is_finite() {
        beta = vec![0.0; model.num_coefficients()];
        obj = model.objective(family, data, &beta, extra);
    }
    let w: Vec<f64> = match extra {
        Some(e) => data.weights().iter().zip(e).map(|(w, e)| w * e).collect(),
        None => data.weights().to_vec(),
    };
    let scale = w.iter().sum::<f64>().max(f64::MIN_POSITIVE);
    let finish = |beta: Vec<f64>, info: DMatrix<f64>, iterations: usize, score_norm: f64| -> Result<MqleFit> {
        let mu = model.means(&beta);
        let phi_moment = family.moment_estimator_phi(data.y(), &mu, &w, model.num_coefficients())?;
        let deviance = model.deviance_with(family, data, &beta, extra);
        Ok(MqleFit { beta, hessian: info / data.n() as f64, phi_moment, deviance, iterations, score_norm })
    };
    let mut trace = Vec::new();
    for it in 0..=IRLS_MAX_ITER {
        let (u, info, observed) = model.irls_pieces(family, data, &beta, extra)?;
        let gnorm = u.norm() / scale;
        trace.push(obj);
        if gnorm < IRLS_TOL {
            return finish(beta, info, it, gnorm);
        }
        if it == IRLS_MAX_ITER {
            break;
        }
        // Newton on the observed information, Fisher scoring where that is
        // not positive definite
        let chol = Cholesky::new(observed).or_else(|| Cholesky::new(info.clone())).ok_or_else(|| {
            Error::Optimization { message: "information matrix is not positive definite".into(), trace: trace.clone() }
        })?;
        let step = chol.solve(&u);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..=MAX_HALVINGS {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b + t * s).collect();
            let co = model.objective(family, data, &cand, extra);
            if co.is_finite() && co <= obj + 1e-15 * obj.abs() {
                moved = cand != beta;
                beta = cand;
                obj = co;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            // No decrease is possible at working precision.
            if gnorm < 1e3 * IRLS_TOL {
                return finish(beta, info, it, gnorm);
            }
            return Err(Error::Optimization { message: "IRLS step halving failed to reduce the deviance".into(), trace });
        }
    }
    Err(Error::Optimization { message: format!("IRLS did not converge in {IRLS_MAX_ITER} iterations"), trace })
}

/// Outcomes must lie in the closure of the mean space; zeros are allowed
/// for every log-link family since only the score equation is solved.
fn check_outcomes(family: &QuasiFamily, data: &Dataset) -> Result<()> {
    for (i, &y) in data.y().iter().enumerate() {
        let ok = match family {
            QuasiFamily::Binomial => (0.0..=1.0).contains(&y),
            _ => y >= 0.0,
        };
        if !ok {
            return Err(Error::Data { row: i, message: format!("outcome {y} is outside the {} outcome space", family.kind()) });
        }
    }
    Ok(())
}

fn check_rows(model: &ParametricModel, data: &Dataset) -> Result<()> {
    if model.design.nrows() != data.n() || data.k() != 1 {
        return Err(Error::Design(format!(
            "design has {} rows but the dataset has {} scalar outcomes",
            model.design.nrows(),
            data.n()
        )));
    }
    Ok(())
}

/// Output of a random-walk Metropolis run.
#[derive(Debug, Clone)]
pub struct RwmOutput {
    /// Retained draws (post burn-in).
    pub draws: Vec<Vec<f64>>,
    /// Acceptance rate over the retained iterations.
    pub acceptance_rate: f64,
    /// Proposal covariance used after burn-in.
    pub proposal_cov: DMatrix<f64>,
}

/// Running mean/covariance accumulator.
struct Welford {
    n: usize,
    mean: DVector<f64>,
    m2: DMatrix<f64>,
}

impl Welford {
    fn new(p: usize) -> Self {
        Welford { n: 0, mean: DVector::zeros(p), m2: DMatrix::zeros(p, p) }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1;
        let x = DVector::from_column_slice(x);
        let d = &x - &self.mean;
        self.mean += &d / self.n as f64;
        let d2 = &x - &self.mean;
        self.m2 += &d * d2.transpose();
    }

    fn cov(&self) -> DMatrix<f64> {
        &self.m2 / (self.n.max(2) - 1) as f64
    }
}

/// Random-walk proposal with a Cholesky factor of its covariance.
pub struct RwmKernel {
    chol: DMatrix<f64>,
    cov: DMatrix<f64>,
}

impl RwmKernel {
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        let chol = Cholesky::new(cov.clone())
            .ok_or_else(|| Error::Numerical("proposal covariance is not positive definite".into()))?
            .l();
        Ok(RwmKernel { chol, cov })
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// One Metropolis step; returns whether the proposal was accepted.
    pub fn step<R: Rng + ?Sized, F: FnMut(&[f64]) -> f64>(
        &self,
        x: &mut Vec<f64>,
        logp: &mut f64,
        mut log_target: F,
        rng: &mut R,
    ) -> bool {
        let p = x.len();
        let z = DVector::from_fn(p, |_, _| standard_normal(rng));
        let dx = &self.chol * z;
        let cand: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, b)| a + b).collect();
        let lp = log_target(&cand);
        if lp.is_finite() && rng.random::<f64>().ln() < lp - *logp {
            *x = cand;
            *logp = lp;
            true
        } else {
            false
        }
    }
}

fn adapted_cov(w: &Welford, fallback: &DMatrix<f64>) -> DMatrix<f64> {
    let p = fallback.nrows();
    let mut c = w.cov() * (2.38f64.powi(2) / p as f64);
    let ridge = 1e-10 * (0..p).map(|j| fallback[(j, j)]).fold(0.0f64, f64::max).max(1e-300);
    for j in 0..p {
        c[(j, j)] += ridge;
    }
    c
}

/// Adaptive random-walk Metropolis. The proposal starts at `init_cov` and,
/// during burn-in, is periodically reset to 2.38²/P times the empirical
/// covariance of the burn-in draws; it is frozen afterwards.
pub fn adaptive_rwm<R: Rng + ?Sized, F: FnMut(&[f64]) -> f64>(
    mut log_target: F,
    init: &[f64],
    init_cov: DMatrix<f64>,
    iterations: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<RwmOutput> {
    let p = init.len();
    let mut x = init.to_vec();
    let mut logp = log_target(&x);
    if !logp.is_finite() {
        return Err(Error::Numerical("initial point has zero target density".into()));
    }
    let mut kernel = RwmKernel::new(init_cov.clone())?;
    let mut stats = Welford::new(p);
    let adapt_start = (20 * p).max(100);
    let mut draws = Vec::with_capacity(iterations.saturating_sub(burn_in));
    let mut accepted = 0usize;
    for it in 0..iterations {
        let acc = kernel.step(&mut x, &mut logp, &mut log_target, rng);
        if it < burn_in {
            stats.push(&x);
            if stats.n >= adapt_start && (it + 1) % 50 == 0 {
                if let Ok(k) = RwmKernel::new(adapted_cov(&stats, &init_cov)) {
                    kernel = k;
                }
            }
        } else {
            accepted += acc as usize;
            draws.push(x.clone());
        }
    }
    let kept = draws.len();
    Ok(RwmOutput {
        draws,
        acceptance_rate: if kept > 0 { accepted as f64 / kept as f64 } else { 0.0 },
        proposal_cov: kernel.cov,
    })
}

fn scaled_asymptotic_cov(fit: &MqleFit, n: usize, phi: f64) -> Result<DMatrix<f64>> {
    let p = fit.beta.len();
    Ok(fit.asymptotic_covariance(n, phi)? * (2.38f64.powi(2) / p as f64))
}

/// Adaptive random-walk Metropolis on π̃(β | φ), started at the MQLE.
pub fn quasi_posterior_mh<R: Rng + ?Sized>(
    model: &ParametricModel,
    data: &Dataset,
    phi: f64,
    iterations: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<RwmOutput> {
    if !(phi > 0.0 && phi.is_finite()) {
        return Err(Error::Config("dispersion must be positive".into()));
    }
    let fit = fit_mqle(model, data)?;
    let cov = scaled_asymptotic_cov(&fit, data.n(), phi)?;
    let init = project_to_support(model, &fit.beta);
    adaptive_rwm(|b| model.log_quasi_posterior(data, b, phi), &init, cov, iterations, burn_in, rng)
}

fn project_to_support(model: &ParametricModel, beta: &[f64]) -> Vec<f64> {
    if model.in_support(beta) {
        return beta.to_vec();
    }
    let norm = beta.iter().map(|b| b * b).sum::<f64>().sqrt();
    beta.iter().map(|b| b * 0.999 * model.prior_radius / norm).collect()
}

/// Draws from the BBQ quasi-posterior of a parametric model.
#[derive(Debug, Clone)]
pub struct BbqDraws {
    pub beta: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub kappa: Vec<f64>,
    pub acceptance_rate: f64,
    pub degenerate_dispersion: usize,
}

/// Alternates a bootstrap dispersion update with a random-walk β step on
/// π̃(β | φ, κ). With `kappa_bounds` set (power family only), κ is
/// re-estimated jointly with φ at each bootstrap draw.
pub fn bbq_quasi_posterior<R: Rng + ?Sized>(
    model: &ParametricModel,
    data: &Dataset,
    kappa_bounds: Option<(f64, f64)>,
    iterations: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<BbqDraws> {
    if kappa_bounds.is_some() && !matches!(model.family, QuasiFamily::Power { .. }) {
        return Err(Error::Config("kappa estimation needs the power family".into()));
    }
    let fit = fit_mqle(model, data)?;
    let n = data.n();
    let p = fit.beta.len();
    let init_cov = scaled_asymptotic_cov(&fit, n, fit.phi_moment)?;
    let mut kernel = RwmKernel::new(init_cov.clone())?;
    let mut beta = project_to_support(model, &fit.beta);
    let mut phi = fit.phi_moment;
    let mut kappa = model.family.kappa().unwrap_or(1.0);
    let mut stats = Welford::new(p);
    let adapt_start = (20 * p).max(100);
    let (y, w) = (data.y(), data.weights());
    let mut out = BbqDraws { beta: Vec::new(), phi: Vec::new(), kappa: Vec::new(), acceptance_rate: 0.0, degenerate_dispersion: 0 };
    let mut accepted = 0usize;
    let mut z_sq = vec![0.0; n];
    for it in 0..iterations {
        let mu = model.means(&beta);
        let weights = bayesian_bootstrap_weights(n, rng);
        let (new_phi, new_kappa, degenerate) = match kappa_bounds {
            Some(bounds) => bbq_power_weighted(y, &mu, w, &weights, bounds),
            None => {
                let fam = model.family.with_kappa(kappa);
                for i in 0..n {
                    z_sq[i] = w[i] * (y[i] - mu[i]).powi(2) / fam.variance(mu[i])?;
                }
                let phi = bbq_weighted(&z_sq, &weights);
                (phi, kappa, phi == 0.0)
            }
        };
        if degenerate {
            out.degenerate_dispersion += 1;
        } else {
            phi = new_phi;
            kappa = new_kappa;
        }
        let fam = model.family.with_kappa(kappa);
        let mut logp = model.log_quasi_posterior_with(&fam, data, &beta, phi);
        let acc = kernel.step(&mut beta, &mut logp, |b| model.log_quasi_posterior_with(&fam, data, b, phi), rng);
        if it < burn_in {
            stats.push(&beta);
            if stats.n >= adapt_start && (it + 1) % 50 == 0 {
                if let Ok(k) = RwmKernel::new(adapted_cov(&stats, &init_cov)) {
                    kernel = k;
                }
            }
        } else {
            accepted += acc as usize;
            out.beta.push(beta.clone());
            out.phi.push(phi);
            out.kappa.push(kappa);
        }
    }
    if !out.beta.is_empty() {
        out.acceptance_rate = accepted as f64 / out.beta.len() as f64;
    }
    Ok(out)
}

/// Settings for the two-step Gibbs sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoStepSettings {
    pub iterations: usize,
    pub burn_in: usize,
    /// Random-walk β steps per φ update.
    pub inner_steps: usize,
}

impl Default for TwoStepSettings {
    fn default() -> Self {
        TwoStepSettings { iterations: 10_000, burn_in: 2_000, inner_steps: 5 }
    }
}

#[derive(Debug, Clone)]
pub struct TwoStepDraws {
    pub beta: Vec<Vec<f64>>,
    pub phi: Vec<f64>,
    pub acceptance_rate: f64,
}

/// Alternates β ~ π̃(β | φ) (random-walk steps whose proposal covariance
/// depends only on φ) with φ ~ g(φ | β), the truncated inverse-gamma.
pub fn two_step_gibbs<R: Rng + ?Sized>(
    model: &ParametricModel,
    data: &Dataset,
    truncation: (f64, f64),
    phi_init: f64,
    settings: TwoStepSettings,
    rng: &mut R,
) -> Result<TwoStepDraws> {
    let (a, b) = truncation;
    if !(0.0 < a && a < b) {
        return Err(Error::Config(format!("truncation [{a}, {b}] must satisfy 0 < a < b")));
    }
    if !(a..=b).contains(&phi_init) {
        return Err(Error::Config(format!("initial phi {phi_init} lies outside [{a}, {b}]")));
    }
    if settings.inner_steps == 0 {
        return Err(Error::Config("need at least one inner beta step".into()));
    }
    let fit = fit_mqle(model, data)?;
    let n = data.n();
    let p = fit.beta.len();
    let base = fit.asymptotic_covariance(n, 1.0)? * (2.38f64.powi(2) / p as f64);
    let mut beta = project_to_support(model, &fit.beta);
    let mut phi = phi_init;
    let mut out = TwoStepDraws { beta: Vec::new(), phi: Vec::new(), acceptance_rate: 0.0 };
    let (mut accepted, mut proposed) = (0usize, 0usize);
    for it in 0..settings.iterations {
        let kernel = RwmKernel::new(&base * phi)?;
        let mut logp = model.log_quasi_posterior(data, &beta, phi);
        for _ in 0..settings.inner_steps {
            let acc = kernel.step(&mut beta, &mut logp, |bb| model.log_quasi_posterior(data, bb, phi), rng);
            if it >= settings.burn_in {
                accepted += acc as usize;
                proposed += 1;
            }
        }
        phi = theory_g_update(&beta, &model.design, data, &model.family, truncation, rng)?;
        if it >= settings.burn_in {
            out.beta.push(beta.clone());
            out.phi.push(phi);
        }
    }
    if proposed > 0 {
        out.acceptance_rate = accepted as f64 / proposed as f64;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BootstrapDraws {
    pub beta: Vec<Vec<f64>>,
    /// Draws discarded because the weighted IRLS failed.
    pub rejected: usize,
}

/// Bayesian-bootstrap Poisson: each draw solves the Poisson score equation
/// under Dirichlet(1, …, 1) weights.
pub fn bb_poisson<R: Rng + ?Sized>(
    model: &ParametricModel,
    data: &Dataset,
    draws: usize,
    rng: &mut R,
) -> Result<BootstrapDraws> {
    let pois = ParametricModel { family: QuasiFamily::Poisson, ..model.clone() };
    let n = data.n();
    let mut out = BootstrapDraws { beta: Vec::with_capacity(draws), rejected: 0 };
    while out.beta.len() < draws {
        let p: Vec<f64> = bayesian_bootstrap_weights(n, rng).into_iter().map(|v| v * n as f64).collect();
        match fit_irls(&pois, &QuasiFamily::Poisson, data, Some(&p)) {
            Ok(fit) => out.beta.push(fit.beta),
            Err(Error::Optimization { .. }) => {
                out.rejected += 1;
                if out.rejected > 10 * draws.max(10) {
                    return Err(Error::Optimization {
                        message: "too many bootstrap draws failed to converge".into(),
                        trace: Vec::new(),
                    });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}
