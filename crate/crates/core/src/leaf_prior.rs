use rand::Rng;

use crate::error::{Error, Result};
use crate::random::log_gamma_variate;
use crate::special::{digamma, inverse_trigamma, ln_gamma};

/// Zero-mean log-gamma prior on leaf values, λ = log G with G ~ Gam(a, b)
/// (rate b), moment-matched so that Var(λ) = σ_λ².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeafPrior {
    pub a: f64,
    pub b: f64,
    /// log b, kept separately because b underflows for large σ_λ.
    pub log_b: f64,
    pub sigma_lambda: f64,
    pub k_scale: f64,
}

impl LeafPrior {
    pub fn from_sigma(sigma_lambda: f64) -> Result<Self> {
        Self::with_scale(sigma_lambda, 2.0)
    }

    pub fn with_scale(sigma_lambda: f64, k_scale: f64) -> Result<Self> {
        if !(sigma_lambda > 0.0) || !sigma_lambda.is_finite() {
            return Err(Error::Numerical(format!(
                "leaf scale must be positive and finite, got {sigma_lambda}"
            )));
        }
        let a = inverse_trigamma(sigma_lambda * sigma_lambda)?;
        let log_b = digamma(a);
        Ok(Self { a, b: log_b.exp(), log_b, sigma_lambda, k_scale })
    }

    /// Default σ_λ = 3/(k√T), or 3/(k√(2T)) for categorical outcomes.
    pub fn default_sigma(k_scale: f64, trees: usize, categorical: bool) -> f64 {
        let t = if categorical { 2.0 * trees as f64 } else { trees as f64 };
        3.0 / (k_scale * t.sqrt())
    }

    /// a log b − log Γ(a), the log normalizing constant of the leaf prior.
    pub fn log_norm(&self) -> f64 {
        self.a * self.log_b - ln_gamma(self.a)
    }

    pub fn log_density(&self, lambda: f64) -> f64 {
        self.log_norm() + self.a * lambda - (self.log_b + lambda).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        log_gamma_variate(self.a, rng) - self.log_b
    }
}

/// log Normal(λ | 0, σ²).
pub fn normal_log_density(lambda: f64, sigma: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI).ln() - sigma.ln() - 0.5 * (lambda / sigma).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::trigamma;

    #[test]
    fn unit_shape_case() {
        let p = LeafPrior::from_sigma((std::f64::consts::PI.powi(2) / 6.0).sqrt()).unwrap();
        assert!((p.a - 1.0).abs() < 1e-10);
        // b = exp(ψ(1)) = e^{−γ}
        assert!((p.b - 0.561_459_483_566_885_2).abs() < 1e-10);
    }

    #[test]
    fn moment_matching_holds_across_scales() {
        for &s in &[1e-6, 1e-3, 0.05, 0.1060660, 0.5, 1.0, 3.0, 30.0, 1e3] {
            let p = LeafPrior::from_sigma(s).unwrap();
            assert!(((trigamma(p.a) - s * s) / (s * s)).abs() < 1e-10, "sigma {s}");
            assert!((digamma(p.a) - p.log_b).abs() < 1e-10, "sigma {s}");
        }
    }

    #[test]
    fn default_scales() {
        assert!((LeafPrior::default_sigma(2.0, 200, false) - 3.0 / (2.0 * 200f64.sqrt())).abs() < 1e-15);
        assert!((LeafPrior::default_sigma(2.0, 50, true) - 3.0 / (2.0 * 100f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(LeafPrior::from_sigma(0.0).is_err());
        assert!(LeafPrior::from_sigma(-1.0).is_err());
    }
}
