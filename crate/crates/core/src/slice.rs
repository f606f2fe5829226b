//! Univariate slice sampling with stepping out and shrinkage.

use rand::Rng;

/// One slice-sampling update of `x0` targeting exp(`log_density`).
///
/// `width` is the initial bracket width and `max_steps` bounds the number
/// of stepping-out expansions. `log_density(x0)` must be finite.
pub fn slice_sample<F, R>(x0: f64, mut log_density: F, width: f64, max_steps: usize, rng: &mut R) -> f64
where
    F: FnMut(f64) -> f64,
    R: Rng + ?Sized,
{
    let f0 = log_density(x0);
    debug_assert!(f0.is_finite(), "slice sampler started at a zero-density point");
    let level = f0 - (-(1.0 - rng.random::<f64>()).ln());

    let mut left = x0 - width * rng.random::<f64>();
    let mut right = left + width;
    let mut j = (max_steps as f64 * rng.random::<f64>()).floor() as usize;
    let mut k = max_steps.saturating_sub(1).saturating_sub(j);
    while j > 0 && log_density(left) > level {
        left -= width;
        j -= 1;
    }
    while k > 0 && log_density(right) > level {
        right += width;
        k -= 1;
    }

    loop {
        let x1 = left + (right - left) * rng.random::<f64>();
        if log_density(x1) > level {
            return x1;
        }
        if x1 < x0 {
            left = x1;
        } else {
            right = x1;
        }
        if right - left < 1e-14 * (1.0 + x0.abs()) {
            return x0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn standard_normal_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut x = 0.0;
        let n = 100_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            x = slice_sample(x, |v| -0.5 * v * v, 1.0, 50, &mut rng);
            s1 += x;
            s2 += x * x;
        }
        let mean = s1 / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.04, "var {var}");
    }

    #[test]
    fn respects_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut x = 0.5;
        for _ in 0..10_000 {
            x = slice_sample(
                x,
                |v| if (0.0..=1.0).contains(&v) { v.ln() } else { f64::NEG_INFINITY },
                0.3,
                50,
                &mut rng,
            );
            assert!((0.0..=1.0).contains(&x));
        }
    }
}
