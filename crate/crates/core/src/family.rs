//! Quasi-likelihood families: links, variance functions, quasi-deviances,
//! standardized residuals and moment estimators of the dispersion.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, FamilyKind, Result};

/// Below this distance from 1 or 2 the power family is evaluated with the
/// Poisson or gamma closed forms.
pub const POWER_DISPATCH_EPS: f64 = 1e-8;

/// A quasi-likelihood model: link, variance function and outcome dimension.
///
/// The links follow the usual tree-ensemble conventions: binomial
/// μ = (1 + e^r)⁻¹, Poisson and power μ = e^r, gamma μ = e^(−r), and the
/// multinomial softmax.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuasiFamily {
    Binomial,
    Poisson,
    Gamma,
    Power { kappa: f64 },
    Multinomial { categories: usize },
}

impl QuasiFamily {
    pub fn power(kappa: f64) -> Result<Self> {
        let f = QuasiFamily::Power { kappa };
        f.validate()?;
        Ok(f)
    }

    pub fn multinomial(categories: usize) -> Result<Self> {
        let f = QuasiFamily::Multinomial { categories };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            QuasiFamily::Power { kappa } if !kappa.is_finite() => Err(Error::domain(
                FamilyKind::Power,
                format!("power exponent must be finite, got {kappa}"),
            )),
            QuasiFamily::Multinomial { categories } if categories < 2 => Err(Error::domain(
                FamilyKind::Multinomial,
                format!("need at least 2 categories, got {categories}"),
            )),
            _ => Ok(()),
        }
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            QuasiFamily::Binomial => FamilyKind::Binomial,
            QuasiFamily::Poisson => FamilyKind::Poisson,
            QuasiFamily::Gamma => FamilyKind::Gamma,
            QuasiFamily::Power { .. } => FamilyKind::Power,
            QuasiFamily::Multinomial { .. } => FamilyKind::Multinomial,
        }
    }

    /// Power exponent of the variance function, where one is defined.
    pub fn kappa(&self) -> Option<f64> {
        match *self {
            QuasiFamily::Poisson => Some(1.0),
            QuasiFamily::Gamma => Some(2.0),
            QuasiFamily::Power { kappa } => Some(kappa),
            _ => None,
        }
    }

    pub fn with_kappa(&self, kappa: f64) -> Self {
        match self {
            QuasiFamily::Power { .. } => QuasiFamily::Power { kappa },
            other => *other,
        }
    }

    /// Dimension of one outcome row.
    pub fn outcome_dim(&self) -> usize {
        match *self {
            QuasiFamily::Multinomial { categories } => categories,
            _ => 1,
        }
    }

    /// Dimension of a leaf value. Binomial models run as two-category
    /// multinomials, so their leaves carry two values.
    pub fn leaf_dim(&self) -> usize {
        match *self {
            QuasiFamily::Multinomial { categories } => categories,
            QuasiFamily::Binomial => 2,
            _ => 1,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, QuasiFamily::Binomial | QuasiFamily::Multinomial { .. })
    }

    fn check_scalar_mean(&self, mu: f64) -> Result<()> {
        let ok = match self {
            QuasiFamily::Binomial => mu > 0.0 && mu < 1.0,
            QuasiFamily::Poisson | QuasiFamily::Gamma | QuasiFamily::Power { .. } => {
                mu > 0.0 && mu.is_finite()
            }
            QuasiFamily::Multinomial { .. } => {
                return Err(Error::domain(
                    self.kind(),
                    "scalar mean supplied to a vector-valued family",
                ))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::domain(
                self.kind(),
                format!("mean {mu} is outside the open mean space"),
            ))
        }
    }

    fn check_simplex_mean(&self, mu: &[f64]) -> Result<()> {
        let k = self.outcome_dim();
        if mu.len() != k {
            return Err(Error::domain(
                self.kind(),
                format!("mean has {} components, expected {k}", mu.len()),
            ));
        }
        let total: f64 = mu.iter().sum();
        if mu.iter().any(|&m| !(m > 0.0 && m < 1.0)) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::domain(
                self.kind(),
                "mean is not in the open probability simplex",
            ));
        }
        Ok(())
    }

    /// Scalar variance function V(μ).
    pub fn variance(&self, mu: f64) -> Result<f64> {
        self.check_scalar_mean(mu)?;
        Ok(match *self {
            QuasiFamily::Binomial => mu * (1.0 - mu),
            QuasiFamily::Poisson => mu,
            QuasiFamily::Gamma => mu * mu,
            QuasiFamily::Power { kappa } => mu.powf(kappa),
            QuasiFamily::Multinomial { .. } => unreachable!(),
        })
    }

    /// Variance function for a mean vector; `D_μ − μμᵀ` for the multinomial,
    /// a 1×1 matrix otherwise.
    pub fn variance_matrix(&self, mu: &[f64]) -> Result<DMatrix<f64>> {
        match self {
            QuasiFamily::Multinomial { .. } => {
                self.check_simplex_mean(mu)?;
                let m = DVector::from_column_slice(mu);
                Ok(DMatrix::from_diagonal(&m) - &m * m.transpose())
            }
            _ => {
                let v = self.variance(single(self, mu)?)?;
                Ok(DMatrix::from_element(1, 1, v))
            }
        }
    }

    /// Unit quasi-deviance D(y, μ) = 2∫_μ^y (y − t)/V(t) dt for scalar families.
    pub fn deviance(&self, y: f64, mu: f64) -> Result<f64> {
        self.check_scalar_mean(mu)?;
        match *self {
            QuasiFamily::Binomial => {
                if !(0.0..=1.0).contains(&y) {
                    return Err(Error::domain(self.kind(), format!("outcome {y} outside [0, 1]")));
                }
                Ok(2.0 * (xlogy_ratio(y, mu) + xlogy_ratio(1.0 - y, 1.0 - mu)))
            }
            QuasiFamily::Poisson => poisson_deviance(y, mu),
            QuasiFamily::Gamma => gamma_deviance(y, mu),
            QuasiFamily::Power { kappa } => {
                if (kappa - 1.0).abs() < POWER_DISPATCH_EPS {
                    poisson_deviance(y, mu)
                } else if (kappa - 2.0).abs() < POWER_DISPATCH_EPS {
                    gamma_deviance(y, mu)
                } else {
                    power_deviance(y, mu, kappa)
                }
            }
            QuasiFamily::Multinomial { .. } => unreachable!(),
        }
    }

    /// Quasi-log-likelihood Q(y; μ) = ∫^μ (y − t)/V(t) dt with a fixed
    /// lower limit, so that D(y, μ) = 2{Q(y; y) − Q(y; μ)}. Finite at y = 0
    /// for every scalar family.
    pub fn quasi_loglik(&self, y: f64, mu: f64) -> Result<f64> {
        self.check_scalar_mean(mu)?;
        let lm = mu.ln();
        Ok(match *self {
            QuasiFamily::Binomial => {
                let l1 = (1.0 - mu).ln();
                (if y > 0.0 { y * lm } else { 0.0 }) + (if y < 1.0 { (1.0 - y) * l1 } else { 0.0 })
            }
            QuasiFamily::Poisson => (if y > 0.0 { y * lm } else { 0.0 }) - mu,
            QuasiFamily::Gamma => -y / mu - lm,
            QuasiFamily::Power { kappa } => {
                if (kappa - 1.0).abs() < POWER_DISPATCH_EPS {
                    (if y > 0.0 { y * lm } else { 0.0 }) - mu
                } else if (kappa - 2.0).abs() < POWER_DISPATCH_EPS {
                    -y / mu - lm
                } else {
                    y * (lm * (1.0 - kappa)).exp() / (1.0 - kappa) - (lm * (2.0 - kappa)).exp() / (2.0 - kappa)
                }
            }
            QuasiFamily::Multinomial { .. } => unreachable!(),
        })
    }

    /// Quasi-deviance for an outcome row of any family. For the multinomial
    /// this is 2 Σ_k y_k log(y_k / μ_k).
    pub fn deviance_row(&self, y: &[f64], mu: &[f64]) -> Result<f64> {
        match self {
            QuasiFamily::Multinomial { .. } => {
                self.check_simplex_mean(mu)?;
                if y.len() != mu.len() || y.iter().any(|&v| v < 0.0) {
                    return Err(Error::domain(self.kind(), "outcome is not a simplex point"));
                }
                Ok(2.0 * y.iter().zip(mu).map(|(&yk, &mk)| xlogy_ratio(yk, mk)).sum::<f64>())
            }
            _ => self.deviance(single(self, y)?, single(self, mu)?),
        }
    }

    /// Mean for a scalar predictor (binomial, Poisson, gamma, power).
    pub fn mean_scalar(&self, r: f64) -> f64 {
        match self {
            QuasiFamily::Binomial => 1.0 / (1.0 + r.exp()),
            QuasiFamily::Gamma => (-r).exp(),
            _ => r.exp(),
        }
    }

    /// Derivative dμ/dr of the inverse link at predictor r.
    pub fn dmu_dr(&self, r: f64) -> f64 {
        let mu = self.mean_scalar(r);
        match self {
            QuasiFamily::Binomial => -mu * (1.0 - mu),
            QuasiFamily::Gamma => -mu,
            _ => mu,
        }
    }

    /// Mean from a predictor. Scalar families take a length-one `r`; the
    /// multinomial takes K values and returns the softmax.
    pub fn mean_from_r(&self, r: &[f64]) -> Vec<f64> {
        match self {
            QuasiFamily::Multinomial { .. } => softmax(r),
            _ => vec![self.mean_scalar(r[0])],
        }
    }

    /// Mean of an outcome row from an ensemble fit of `leaf_dim()` values.
    /// Binomial fits are two-category softmaxes reported as μ = P(first).
    pub fn mean_from_fit(&self, fit: &[f64], out: &mut [f64]) {
        match self {
            QuasiFamily::Multinomial { .. } => softmax_into(fit, out),
            QuasiFamily::Binomial => {
                out[0] = 1.0 / (1.0 + (fit[1] - fit[0]).exp());
            }
            _ => out[0] = self.mean_scalar(fit[0]),
        }
    }

    /// Standardized residual Z = ω^{1/2}(y − μ)/V(μ)^{1/2}.
    pub fn standardized_residual(&self, y: f64, mu: f64, omega: f64) -> Result<f64> {
        let v = self.variance(mu)?;
        Ok(omega.sqrt() * (y - mu) / v.sqrt())
    }

    /// Per-observation squared standardized residual with expectation φ.
    /// Multinomial rows use Σ_k ω(y_k − μ_k)²/μ_k divided by K − 1.
    pub fn squared_residual_row(&self, y: &[f64], mu: &[f64], omega: f64) -> Result<f64> {
        match self {
            QuasiFamily::Multinomial { categories } => {
                self.check_simplex_mean(mu)?;
                let s: f64 = y
                    .iter()
                    .zip(mu)
                    .map(|(&yk, &mk)| (yk - mk) * (yk - mk) / mk)
                    .sum();
                Ok(omega * s / (*categories as f64 - 1.0))
            }
            _ => {
                let z = self.standardized_residual(single(self, y)?, single(self, mu)?, omega)?;
                Ok(z * z)
            }
        }
    }

    /// Moment estimator of φ.
    ///
    /// Scalar families: (N − P)⁻¹ Σ ω_i (y_i − μ_i)² / V(μ_i) with
    /// `df_correction` = P. Multinomial: (N(K − 1))⁻¹ Σ_i Σ_k n_i (y_ik − μ_ik)²/μ_ik;
    /// the correction is not applied there. `y` and `mu` are row-major.
    pub fn moment_estimator_phi(
        &self,
        y: &[f64],
        mu: &[f64],
        omega: &[f64],
        df_correction: usize,
    ) -> Result<f64> {
        let n = omega.len();
        let d = self.outcome_dim();
        if y.len() != n * d || mu.len() != n * d {
            return Err(Error::Config("outcome, mean and weight lengths disagree".into()));
        }
        match self {
            QuasiFamily::Multinomial { categories } => {
                if n == 0 {
                    return Err(Error::DegreesOfFreedom { n, p: 0 });
                }
                let mut total = 0.0;
                for i in 0..n {
                    let (yr, mr) = (&y[i * d..(i + 1) * d], &mu[i * d..(i + 1) * d]);
                    self.check_simplex_mean(mr)?;
                    for k in 0..d {
                        total += omega[i] * (yr[k] - mr[k]).powi(2) / mr[k];
                    }
                }
                Ok(total / (n as f64 * (*categories as f64 - 1.0)))
            }
            _ => {
                if n <= df_correction {
                    return Err(Error::DegreesOfFreedom { n, p: df_correction });
                }
                let mut total = 0.0;
                for i in 0..n {
                    total += omega[i] * (y[i] - mu[i]).powi(2) / self.variance(mu[i])?;
                }
                Ok(total / (n - df_correction) as f64)
            }
        }
    }
}

/// General multivariate moment estimator (NK)⁻¹ Σ ω_i (y_i − μ_i)ᵀ V(μ_i)⁻¹ (y_i − μ_i)
/// for a nonsingular variance function.
pub fn mql_moment_estimator<F>(y: &[f64], mu: &[f64], omega: &[f64], dim: usize, variance: F) -> Result<f64>
where
    F: Fn(&[f64]) -> DMatrix<f64>,
{
    let n = omega.len();
    if n == 0 || y.len() != n * dim || mu.len() != n * dim {
        return Err(Error::Config("outcome, mean and weight lengths disagree".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        let mr = &mu[i * dim..(i + 1) * dim];
        let resid = DVector::from_iterator(dim, (0..dim).map(|k| y[i * dim + k] - mr[k]));
        let chol = variance(mr)
            .cholesky()
            .ok_or_else(|| Error::Numerical(format!("variance at row {i} is not positive definite")))?;
        total += omega[i] * resid.dot(&chol.solve(&resid));
    }
    Ok(total / (n * dim) as f64)
}

fn single(family: &QuasiFamily, v: &[f64]) -> Result<f64> {
    match v {
        [x] => Ok(*x),
        _ => Err(Error::domain(
            family.kind(),
            format!("expected a scalar, got {} components", v.len()),
        )),
    }
}

/// x log(x / m) with the convention 0 log 0 = 0.
fn xlogy_ratio(x: f64, m: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (x / m).ln()
    }
}

fn poisson_deviance(y: f64, mu: f64) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::domain(FamilyKind::Poisson, format!("outcome {y} must be nonnegative")));
    }
    Ok((2.0 * (xlogy_ratio(y, mu) - (y - mu))).max(0.0))
}

fn gamma_deviance(y: f64, mu: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::domain(FamilyKind::Gamma, format!("outcome {y} must be positive")));
    }
    Ok((2.0 * ((y - mu) / mu - (y / mu).ln())).max(0.0))
}

/// (u^e − 1)/e evaluated as a function of log u, continuous at e = 0.
pub(crate) fn pow_ratio(log_u: f64, e: f64) -> f64 {
    let z = e * log_u;
    if z.abs() < 1e-5 {
        log_u * (1.0 + z * (0.5 + z / 6.0))
    } else {
        z.exp_m1() / e
    }
}

fn power_deviance(y: f64, mu: f64, kappa: f64) -> Result<f64> {
    if !(y >= 0.0) || !y.is_finite() {
        return Err(Error::domain(FamilyKind::Power, format!("outcome {y} must be nonnegative")));
    }
    if y == 0.0 {
        if kappa >= 2.0 {
            return Err(Error::domain(
                FamilyKind::Power,
                "zero outcome has infinite deviance when kappa >= 2",
            ));
        }
        return Ok(2.0 * mu.powf(2.0 - kappa) / (2.0 - kappa));
    }
    // D = 2 μ^{2−κ} [ (y/μ) E(1−κ) − E(2−κ) ],  E(e) = ((y/μ)^e − 1)/e
    let log_u = (y / mu).ln();
    let u = y / mu;
    let d = 2.0 * mu.powf(2.0 - kappa) * (u * pow_ratio(log_u, 1.0 - kappa) - pow_ratio(log_u, 2.0 - kappa));
    Ok(d.max(0.0))
}

/// Softmax with max subtraction.
pub fn softmax(r: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; r.len()];
    softmax_into(r, &mut out);
    out
}

pub fn softmax_into(r: &[f64], out: &mut [f64]) {
    let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &v) in out.iter_mut().zip(r) {
        *o = (v - m).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}
