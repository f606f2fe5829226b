//! Posterior draws and their summaries: inclusion probabilities, variable
//! importance, credible intervals, projection summaries and convergence
//! diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::forest::Ensemble;

/// Counts of MH moves and special cases over a chain.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ChainDiagnostics {
    /// Proposed and accepted GROW, PRUNE, CHANGE moves.
    pub proposed: [usize; 3],
    pub accepted: [usize; 3],
    /// Power-model leaves whose Laplace approximation was undefined.
    pub fallback_leaves: usize,
    /// Bootstrap dispersion updates with all-zero residuals.
    pub degenerate_dispersion: usize,
}

/// Retained draws from one chain. Matrices are stored row-major per draw:
/// `fitted_mu[s]` is N × outcome_dim, `r_fitted[s]` is N × leaf_dim.
#[derive(Debug, Clone, Default)]
pub struct Draws {
    pub chain: usize,
    pub seed: u64,
    pub config_hash: String,
    pub n_train: usize,
    pub n_test: usize,
    pub outcome_dim: usize,
    pub leaf_dim: usize,
    pub feature_names: Vec<String>,
    pub iteration: Vec<usize>,
    pub phi: Vec<f64>,
    pub kappa: Vec<f64>,
    pub sigma_lambda: Vec<f64>,
    pub split_counts: Vec<Vec<usize>>,
    pub fitted_mu: Vec<Vec<f64>>,
    pub r_fitted: Vec<Vec<f64>>,
    pub test_mu: Vec<Vec<f64>>,
    pub ensembles: Vec<Ensemble>,
    pub diagnostics: ChainDiagnostics,
}

impl Draws {
    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Posterior mean of the fitted means, N × outcome_dim.
    pub fn mean_fitted_mu(&self) -> Vec<f64> {
        column_means(&self.fitted_mu)
    }

    pub fn mean_test_mu(&self) -> Vec<f64> {
        column_means(&self.test_mu)
    }

    pub fn mean_r(&self) -> Vec<f64> {
        column_means(&self.r_fitted)
    }

    /// Draws of entry `j` across iterations of a per-draw matrix.
    pub fn column(rows: &[Vec<f64>], j: usize) -> Vec<f64> {
        rows.iter().map(|r| r[j]).collect()
    }
}

fn column_means(rows: &[Vec<f64>]) -> Vec<f64> {
    let Some(first) = rows.first() else { return Vec::new() };
    let mut m = vec![0.0; first.len()];
    for r in rows {
        for (a, b) in m.iter_mut().zip(r) {
            *a += b;
        }
    }
    let n = rows.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

fn require_draws(split_counts: &[Vec<usize>]) -> Result<()> {
    if split_counts.is_empty() {
        Err(Error::Config("no retained draws to summarize".into()))
    } else {
        Ok(())
    }
}

/// Fraction of retained iterations in which each variable appears in at
/// least one split of the ensemble.
pub fn inclusion_probabilities(draws: &Draws) -> Result<Vec<f64>> {
    require_draws(&draws.split_counts)?;
    let p = draws.split_counts[0].len();
    let n = draws.split_counts.len() as f64;
    Ok((0..p)
        .map(|j| draws.split_counts.iter().filter(|c| c[j] >= 1).count() as f64 / n)
        .collect())
}

/// Posterior mean number of splits on each variable.
pub fn variable_importance(draws: &Draws) -> Result<Vec<f64>> {
    require_draws(&draws.split_counts)?;
    let p = draws.split_counts[0].len();
    let n = draws.split_counts.len() as f64;
    Ok((0..p)
        .map(|j| draws.split_counts.iter().map(|c| c[j] as f64).sum::<f64>() / n)
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSummary {
    /// One coefficient vector per draw.
    pub coefficients: Vec<Vec<f64>>,
    /// Summary R² per draw.
    pub r2: Vec<f64>,
}

/// Projects each draw of r(X_i) onto the columns of `basis` by least squares
/// and reports R² = 1 − Σ(r − r̃)² / Σ(r − r̄)².
pub fn projection_summary(r_draws: &[Vec<f64>], basis: &DMatrix<f64>) -> Result<ProjectionSummary> {
    let n = basis.nrows();
    if basis.ncols() == 0 || basis.ncols() > n {
        return Err(Error::Design("basis must have between 1 and N columns".into()));
    }
    let svd = basis.clone().svd(true, true);
    let scale = svd.singular_values.max();
    let tol = 1e-10 * scale;
    if !(scale > 0.0) || svd.singular_values.iter().any(|v| *v <= tol) {
        return Err(Error::Design("summary basis is rank deficient".into()));
    }
    let mut coefficients = Vec::with_capacity(r_draws.len());
    let mut r2 = Vec::with_capacity(r_draws.len());
    for draw in r_draws {
        if draw.len() != n {
            return Err(Error::Design(format!("draw has {} points, basis has {n} rows", draw.len())));
        }
        let y = DVector::from_column_slice(draw);
        let beta = svd.solve(&y, tol).map_err(|e| Error::Design(format!("least-squares solve failed: {e}")))?;
        let fitted = basis * &beta;
        let mean = y.mean();
        let sse: f64 = y.iter().zip(fitted.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        let sst: f64 = y.iter().map(|a| (a - mean).powi(2)).sum();
        r2.push(if sst > 0.0 { 1.0 - sse / sst } else if sse == 0.0 { 1.0 } else { f64::NEG_INFINITY });
        coefficients.push(beta.iter().copied().collect());
    }
    Ok(ProjectionSummary { coefficients, r2 })
}

/// Intercept, then for each column of `x` (N × P row-major, `features`
/// selected) a linear term and hinges (x − q)₊ at the deciles.
pub fn hinge_basis(x: &[f64], p: usize, features: &[usize]) -> DMatrix<f64> {
    let n = x.len() / p;
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for &j in features {
        let col: Vec<f64> = (0..n).map(|i| x[i * p + j]).collect();
        let mut sorted = col.clone();
        sorted.sort_by(f64::total_cmp);
        let mut knots: Vec<f64> = (1..10).map(|d| quantile_sorted(&sorted, d as f64 / 10.0)).collect();
        knots.dedup();
        cols.push(col.clone());
        for q in knots {
            let h: Vec<f64> = col.iter().map(|&v| (v - q).max(0.0)).collect();
            if h.iter().any(|&v| v > 0.0) {
                cols.push(h);
            }
        }
    }
    DMatrix::from_fn(n, cols.len(), |i, c| cols[c][i])
}

/// Type-7 quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CredibleIntervals {
    pub equal_tail: (f64, f64),
    pub hpd: (f64, f64),
}

/// Equal-tail interval from type-7 quantiles and the shortest interval
/// [Q(p), Q(p + level)] of the same interpolated quantile function. The
/// width is piecewise linear in p, so the search only visits breakpoints.
pub fn credible_intervals(draws: &[f64], level: f64) -> Result<CredibleIntervals> {
    if draws.len() < 2 {
        return Err(Error::Config("need at least two draws for an interval".into()));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(Error::Config(format!("interval level {level} must lie in (0, 1]")));
    }
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let equal_tail = (quantile_sorted(&s, tail), quantile_sorted(&s, 1.0 - tail));
    let m = (s.len() - 1) as f64;
    let span = 1.0 - level;
    let mut best = equal_tail;
    let mut consider = |p: f64| {
        if (0.0..=span).contains(&p) {
            let iv = (quantile_sorted(&s, p), quantile_sorted(&s, p + level));
            if iv.1 - iv.0 < best.1 - best.0 {
                best = iv;
            }
        }
    };
    consider(0.0);
    consider(span);
    for j in 0..s.len() {
        let g = j as f64 / m;
        consider(g);
        consider(g - level);
    }
    Ok(CredibleIntervals { equal_tail, hpd: best })
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Split-R̂: each chain is halved and the Gelman–Rubin statistic computed
/// over the halves.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let mut halves: Vec<&[f64]> = Vec::new();
    for c in chains {
        let h = c.len() / 2;
        if h >= 2 {
            halves.push(&c[..h]);
            halves.push(&c[c.len() - h..]);
        }
    }
    if halves.len() < 2 {
        return f64::NAN;
    }
    let n = halves.iter().map(|h| h.len()).min().unwrap();
    let stats: Vec<(f64, f64)> = halves.iter().map(|h| mean_var(&h[..n])).collect();
    let m = stats.len() as f64;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m;
    let b = n as f64 / (m - 1.0) * stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    (var_plus / w).sqrt()
}

/// Effective sample size pooled over chains, using the multi-chain
/// autocorrelation estimate and Geyer's initial monotone sequence.
pub fn effective_sample_size(chains: &[&[f64]]) -> f64 {
    let n = chains.iter().map(|c| c.len()).min().unwrap_or(0);
    let m = chains.len();
    if n < 4 || m == 0 {
        return f64::NAN;
    }
    let stats: Vec<(f64, f64)> = chains.iter().map(|c| mean_var(&c[..n])).collect();
    let w = stats.iter().map(|s| s.1).sum::<f64>() / m as f64;
    let grand = stats.iter().map(|s| s.0).sum::<f64>() / m as f64;
    let b_over_n = if m > 1 {
        stats.iter().map(|s| (s.0 - grand).powi(2)).sum::<f64>() / (m as f64 - 1.0)
    } else {
        0.0
    };
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b_over_n;
    if var_plus == 0.0 {
        return (n * m) as f64;
    }
    let autocov = |lag: usize| -> f64 {
        chains
            .iter()
            .zip(&stats)
            .map(|(c, s)| (0..n - lag).map(|i| (c[i] - s.0) * (c[i + lag] - s.0)).sum::<f64>() / n as f64)
            .sum::<f64>()
            / m as f64
    };
    let rho = |lag: usize| 1.0 - (w - autocov(lag)) / var_plus;
    let mut tau = -1.0;
    let mut prev_pair = f64::INFINITY;
    let mut t = 0;
    while t + 1 < n {
        let mut pair = rho(t) + rho(t + 1);
        if pair < 0.0 {
            break;
        }
        pair = pair.min(prev_pair);
        tau += 2.0 * pair;
        prev_pair = pair;
        t += 2;
    }
    let tau = tau.max(1.0 / ((n * m) as f64).log10().max(1.0));
    (n * m) as f64 / tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    fn draws_with_counts(counts: Vec<Vec<usize>>) -> Draws {
        Draws { phi: vec![1.0; counts.len()], split_counts: counts, ..Draws::default() }
    }

    #[test]
    fn inclusion_and_importance() {
        let d = draws_with_counts(vec![vec![0, 2, 1], vec![0, 1, 0], vec![0, 3, 0], vec![0, 1, 0]]);
        assert_eq!(inclusion_probabilities(&d).unwrap(), vec![0.0, 1.0, 0.25]);
        assert_eq!(variable_importance(&d).unwrap(), vec![0.0, 1.75, 0.25]);
        assert!(inclusion_probabilities(&Draws::default()).is_err());
    }

    #[test]
    fn projection_edge_cases() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
        let r: Vec<f64> = x.iter().map(|v| (3.0 * v).sin()).collect();
        let saturated = DMatrix::from_column_slice(20, 1, &r);
        assert!((projection_summary(&[r.clone()], &saturated).unwrap().r2[0] - 1.0).abs() < 1e-12);
        let intercept = DMatrix::from_element(20, 1, 1.0);
        assert!(projection_summary(&[r.clone()], &intercept).unwrap().r2[0].abs() < 1e-12);
        let linear: Vec<f64> = x.iter().map(|v| 2.0 - 0.5 * v).collect();
        let basis = DMatrix::from_fn(20, 2, |i, c| if c == 0 { 1.0 } else { x[i] });
        let s = projection_summary(&[linear], &basis).unwrap();
        assert!((s.r2[0] - 1.0).abs() < 1e-10);
        assert!((s.coefficients[0][1] + 0.5).abs() < 1e-10);
        let dup = DMatrix::from_fn(20, 2, |i, _| x[i]);
        assert!(matches!(projection_summary(&[r], &dup), Err(Error::Design(_))));
    }

    #[test]
    fn hinge_basis_has_intercept() {
        let x: Vec<f64> = (0..50).map(|i| (i % 17) as f64).collect();
        let b = hinge_basis(&x, 1, &[0]);
        assert!(b.column(0).iter().all(|&v| v == 1.0));
        assert!(b.ncols() >= 3);
    }

    #[test]
    fn intervals_on_normal_and_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ci = credible_intervals(&z, 0.95).unwrap();
        let (et, hpd) = (ci.equal_tail.1 - ci.equal_tail.0, ci.hpd.1 - ci.hpd.0);
        assert!(hpd <= et && hpd / et > 0.95);

        let e: Vec<f64> = (0..20_000).map(|_| Exp::new(1.0).unwrap().sample(&mut rng)).collect();
        let ci = credible_intervals(&e, 0.95).unwrap();
        let min = e.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(ci.hpd.0 - min < 0.01);
        assert!(ci.hpd.1 - ci.hpd.0 < ci.equal_tail.1 - ci.equal_tail.0);

        let full = credible_intervals(&e, 1.0).unwrap();
        let max = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(full.hpd, (min, max));
    }

    #[test]
    fn diagnostics_on_iid_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = split_rhat(&[&a, &b]);
        assert!(r < 1.01, "rhat {r}");
        let ess = effective_sample_size(&[&a, &b]);
        assert!(ess > 3000.0 && ess < 5000.0, "ess {ess}");
        let shifted: Vec<f64> = b.iter().map(|v| v + 3.0).collect();
        assert!(split_rhat(&[&a, &shifted]) > 1.5);
    }

    #[test]
    fn ess_of_ar1_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let rho: f64 = 0.9;
        let mut x = 0.0;
        let chain: Vec<f64> = (0..20_000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + (1.0 - rho * rho).sqrt() * e;
                x
            })
            .collect();
        let ess = effective_sample_size(&[&chain]);
        let expected = 20_000.0 * (1.0 - rho) / (1.0 + rho);
        assert!((ess / expected - 1.0).abs() < 0.25, "ess {ess} vs {expected}");
    }
}
