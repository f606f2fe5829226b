//! Independent numerical oracles shared by the integration tests.
#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = GK_WEIGHTS[7] * fc;
    let mut g = G_WEIGHTS[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            g += G_WEIGHTS[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7, 15) quadrature on [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        let (v, err) = gk15(f, a, b);
        if !(err > tol.max(1e-11 * v.abs())) || depth > 30 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    if a == b {
        return 0.0;
    }
    if a > b {
        return -integrate(f, b, a, tol);
    }
    rec(&f, a, b, tol, 0)
}

/// log ∫ exp(g(λ)) dλ for a unimodal log-integrand, integrated over the
/// region where g is within 60 of its maximum.
pub fn log_integral_unimodal<G: Fn(f64) -> f64>(g: G, guess: f64, scale: f64) -> f64 {
    let g = |x: f64| {
        let v = g(x);
        if v.is_nan() { f64::NEG_INFINITY } else { v }
    };
    // locate the peak on a coarse grid, then refine
    let mut best = guess;
    let mut bv = g(guess);
    for i in -400..=400 {
        let x = guess + scale * i as f64 * 0.05;
        let v = g(x);
        if v > bv {
            best = x;
            bv = v;
        }
    }
    let (mut lo, mut hi) = (best - scale * 0.05, best + scale * 0.05);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if g(m1) < g(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    let peak = 0.5 * (lo + hi);
    let gmax = g(peak).max(bv);
    let edge = |dir: f64| {
        let mut step = scale * 0.1;
        let mut x = peak;
        while g(x + dir * step) > gmax - 60.0 {
            x += dir * step;
            step *= 1.5;
        }
        x + dir * step
    };
    let (a, b) = (edge(-1.0), edge(1.0));
    let v = integrate(|x| (g(x) - gmax).exp(), a, peak, 1e-14) + integrate(|x| (g(x) - gmax).exp(), peak, b, 1e-14);
    gmax + v.ln()
}

/// Inverts a CDF tabulated on a grid by linear interpolation.
pub struct TabulatedCdf {
    pub x: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl TabulatedCdf {
    /// Tabulates the normalized CDF of exp(g) on [a, b] with `m` cells,
    /// integrating each cell by Gauss–Kronrod.
    pub fn from_log_density<G: Fn(f64) -> f64>(g: G, a: f64, b: f64, m: usize) -> Self {
        let gmax = (0..=m).map(|i| g(a + (b - a) * i as f64 / m as f64)).fold(f64::NEG_INFINITY, f64::max);
        let mut x = vec![a];
        let mut cdf = vec![0.0];
        let mut acc = 0.0;
        for i in 0..m {
            let (l, r) = (a + (b - a) * i as f64 / m as f64, a + (b - a) * (i + 1) as f64 / m as f64);
            acc += integrate(|t| (g(t) - gmax).exp(), l, r, 1e-16);
            x.push(r);
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        TabulatedCdf { x, cdf }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t <= self.x[0] {
            return 0.0;
        }
        if t >= *self.x.last().unwrap() {
            return 1.0;
        }
        let i = self.x.partition_point(|&v| v <= t) - 1;
        let w = (t - self.x[i]) / (self.x[i + 1] - self.x[i]);
        self.cdf[i] + w * (self.cdf[i + 1] - self.cdf[i])
    }
}

/// One-sample Kolmogorov–Smirnov statistic and asymptotic p-value.
pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> (f64, f64) {
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sq = n.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    (d, kolmogorov_q(lambda))
}

/// Q_KS(λ) = 2 Σ (−1)^{j−1} exp(−2 j² λ²).
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..200 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Pearson χ² goodness of fit; returns (statistic, p-value).
pub fn chi_square_test(observed: &[f64], expected: &[f64]) -> (f64, f64) {
    let stat: f64 = observed.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = (observed.len() - 1) as f64;
    (stat, 1.0 - ChiSquared::new(df).unwrap().cdf(stat))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Prints and returns the verdict line used by the acceptance suite.
pub fn verdict(id: usize, name: &str, pass: bool, detail: &str) -> bool {
    println!("criterion {id:>2} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}
