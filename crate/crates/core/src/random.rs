//! Random variate helpers shared by the samplers.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

/// log G for G ~ Gamma(shape, rate 1), stable for very small shapes.
pub fn log_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        Gamma::new(shape, 1.0).expect("valid gamma shape").sample(rng).ln()
    } else {
        // G = G' U^{1/a} with G' ~ Gamma(a + 1)
        let g = Gamma::new(shape + 1.0, 1.0).expect("valid gamma shape").sample(rng);
        let u: f64 = rng.random::<f64>();
        g.ln() + u.max(f64::MIN_POSITIVE).ln() / shape
    }
}

/// Draw from Gamma(shape, rate).
pub fn gamma_rate<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    (log_gamma_variate(shape, rng) - rate.ln()).exp()
}

/// Dirichlet draw computed in log space; components never underflow to
/// exactly zero unless the concentration is extreme.
pub fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| log_gamma_variate(a, rng)).collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logs.iter().map(|&l| (l - m).exp()).collect();
    let total: f64 = out.iter().sum();
    for v in &mut out {
        *v /= total;
    }
    out
}

/// Uniform Dirichlet(1, …, 1) weights via normalized exponentials.
pub fn bayesian_bootstrap_weights<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    w
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Index drawn with probability proportional to `probs` (need not sum to one).
pub fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &p) in probs.iter().enumerate() {
        if u < p {
            return i;
        }
        u -= p;
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_shape_log_gamma_has_right_mean() {
        // E[log G] = ψ(a)
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = 0.1;
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| log_gamma_variate(a, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let se = (var / n as f64).sqrt();
        assert!((mean - crate::special::digamma(a)).abs() < 4.0 * se);
    }

    #[test]
    fn dirichlet_sums_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let d = dirichlet(&[0.05, 0.2, 3.0], &mut rng);
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.iter().all(|&v| v >= 0.0));
        }
    }
}
