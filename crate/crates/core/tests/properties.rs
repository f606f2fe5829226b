use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qlbart::backfit::{power_leaf_loglik, power_mode};
use qlbart::dispersion::{bbq_power_weighted, weighted_normal_loglik};
use qlbart::forest::{simulate_prior_tree, CutGrid, TreePrior};
use qlbart::summaries::{credible_intervals, inclusion_probabilities, Draws};
use qlbart::QuasiFamily;

fn scalar_family() -> impl Strategy<Value = QuasiFamily> {
    prop_oneof![
        Just(QuasiFamily::Poisson),
        Just(QuasiFamily::Gamma),
        (1.05f64..2.95).prop_map(|k| QuasiFamily::Power { kappa: k }),
        (-0.95f64..0.0).prop_map(|k| QuasiFamily::Power { kappa: k }),
    ]
}

fn positive() -> impl Strategy<Value = f64> {
    (-3.0f64..3.0).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn deviance_is_nonnegative_and_zero_only_at_the_mean(fam in scalar_family(), y in positive(), mu in positive()) {
        let d = fam.deviance(y, mu).unwrap();
        prop_assert!(d >= -1e-12 * y.max(1.0));
        prop_assert!(fam.deviance(y, y).unwrap().abs() < 1e-12 * y.max(1.0));
        if (y / mu - 1.0).abs() > 1e-3 {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn binomial_deviance_is_nonnegative(y in 0.0f64..=1.0, mu in 0.01f64..0.99) {
        let d = QuasiFamily::Binomial.deviance(y, mu).unwrap();
        prop_assert!(d >= -1e-12);
    }

    #[test]
    fn score_identity(fam in scalar_family(), y in positive(), mu in positive()) {
        let h = 1e-5 * mu;
        let q = |m: f64| fam.quasi_loglik(y, m).unwrap();
        let fd = (q(mu + h) - q(mu - h)) / (2.0 * h);
        let exact = (y - mu) / fam.variance(mu).unwrap();
        let scale = exact.abs().max(y.max(mu) / fam.variance(mu).unwrap());
        prop_assert!((fd - exact).abs() < 1e-6 * scale, "{fd} vs {exact}");
    }

    #[test]
    fn hpd_is_no_wider_than_equal_tail(draws in prop::collection::vec(-50.0f64..50.0, 2..200), level in 0.05f64..0.99) {
        let ci = credible_intervals(&draws, level).unwrap();
        let w = |(a, b): (f64, f64)| b - a;
        prop_assert!(w(ci.hpd) <= w(ci.equal_tail) + 1e-12);
        prop_assert!(ci.hpd.0 <= ci.hpd.1);
    }

    #[test]
    fn gamma_residuals_are_scale_invariant(y in positive(), mu in positive(), w in 0.1f64..5.0, c in 0.01f64..100.0) {
        let g = QuasiFamily::Gamma;
        let z = g.standardized_residual(y, mu, w).unwrap();
        let zc = g.standardized_residual(c * y, c * mu, w).unwrap();
        prop_assert!((z - zc).abs() < 1e-10 * z.abs().max(1.0));
    }

    #[test]
    fn moment_estimator_matches_naive_loop(
        rows in prop::collection::vec((positive(), positive(), 0.1f64..4.0), 3..40),
        fam in scalar_family(),
    ) {
        let y: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mu: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let w: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let got = fam.moment_estimator_phi(&y, &mu, &w, 2).unwrap();
        let mut naive = 0.0;
        for i in 0..y.len() {
            let v = match fam {
                QuasiFamily::Poisson => mu[i],
                QuasiFamily::Gamma => mu[i] * mu[i],
                QuasiFamily::Power { kappa } => mu[i].powf(kappa),
                _ => unreachable!(),
            };
            naive += w[i] * (y[i] - mu[i]) * (y[i] - mu[i]) / v;
        }
        naive /= (y.len() - 2) as f64;
        prop_assert!((got - naive).abs() <= 1e-12 * naive.abs().max(1e-300));
    }

    #[test]
    fn multinomial_moment_estimator_matches_naive_loop(
        rows in prop::collection::vec((prop::array::uniform3(0.05f64..1.0), prop::array::uniform3(0.05f64..1.0), 1.0f64..20.0), 1..30),
    ) {
        let fam = QuasiFamily::multinomial(3).unwrap();
        let norm = |a: [f64; 3]| { let s: f64 = a.iter().sum(); a.map(|v| v / s) };
        let (mut y, mut mu, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for (a, b, n) in &rows {
            y.extend(norm(*a));
            mu.extend(norm(*b));
            w.push(*n);
        }
        let got = fam.moment_estimator_phi(&y, &mu, &w, 0).unwrap();
        let mut naive = 0.0;
        for i in 0..w.len() {
            for k in 0..3 {
                naive += w[i] * (y[3 * i + k] - mu[3 * i + k]).powi(2) / mu[3 * i + k];
            }
        }
        naive /= (w.len() * 2) as f64;
        prop_assert!((got - naive).abs() <= 1e-12 * naive.max(1e-300));
    }

    #[test]
    fn power_mode_maximizes_and_information_is_curvature(
        a in 0.1f64..200.0, b in 0.1f64..200.0, phi in 0.2f64..5.0, kappa in 1.05f64..2.95,
    ) {
        let (lhat, info) = power_mode(a, b, phi, kappa);
        let l = |x: f64| power_leaf_loglik(x, a, b, phi, kappa);
        prop_assert!(l(lhat + 1e-3) < l(lhat) && l(lhat - 1e-3) < l(lhat));
        let h = 1e-4;
        let second = (l(lhat + h) - 2.0 * l(lhat) + l(lhat - h)) / (h * h);
        let roundoff = 4.0 * f64::EPSILON * l(lhat).abs() / (h * h);
        prop_assert!((-second - info).abs() < 1e-5 * info + roundoff, "{second} vs {info}");
    }

    #[test]
    fn inclusion_probabilities_never_decrease_when_splitting_draws_are_added(
        base in prop::collection::vec(prop::collection::vec(0usize..3, 4), 1..30),
        extra in 1usize..10, j in 0usize..4,
    ) {
        let before = inclusion_probabilities(&Draws { split_counts: base.clone(), ..Draws::default() }).unwrap();
        let mut more = base;
        for _ in 0..extra {
            let mut c = vec![0; 4];
            c[j] = 1;
            more.push(c);
        }
        let after = inclusion_probabilities(&Draws { split_counts: more, ..Draws::default() }).unwrap();
        prop_assert!(after[j] >= before[j] - 1e-15);
    }

    #[test]
    fn traversal_is_deterministic(seed in any::<u64>(), x in prop::array::uniform3(0.0f64..1.0)) {
        let grid = CutGrid::new(vec![vec![0.2, 0.4, 0.6, 0.8]; 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = simulate_prior_tree(1, &TreePrior::default(), &[1.0 / 3.0; 3], &grid, &mut rng);
        let leaf = t.route(&x);
        prop_assert!(t.node(leaf).is_leaf());
        prop_assert_eq!(leaf, t.clone().route(&x));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bbq_profile_optimum_beats_grid(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 60;
        let mu: Vec<f64> = (0..n).map(|_| (rand::Rng::random::<f64>(&mut rng) * 3.0 - 1.0).exp()).collect();
        let y: Vec<f64> = mu
            .iter()
            .map(|&m| (m + 0.8 * m.powf(0.75) * qlbart::random::standard_normal(&mut rng)).max(0.0))
            .collect();
        let w = vec![1.0; n];
        let p = qlbart::random::bayesian_bootstrap_weights(n, &mut rng);
        let bounds = (0.5, 3.0);
        let (phi, kappa, degenerate) = bbq_power_weighted(&y, &mu, &w, &p, bounds);
        prop_assume!(!degenerate);
        let best = weighted_normal_loglik(&y, &mu, &w, &p, phi, kappa);
        let (plo, phi_hi) = (phi / 20.0, phi * 20.0);
        for a in 0..8 {
            for b in 0..8 {
                let k = bounds.0 + (bounds.1 - bounds.0) * a as f64 / 7.0;
                let f = plo * (phi_hi / plo).powf(b as f64 / 7.0);
                prop_assert!(best >= weighted_normal_loglik(&y, &mu, &w, &p, f, k) - 1e-7 * best.abs().max(1.0));
            }
        }
    }
}
