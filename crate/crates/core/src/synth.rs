//! Seeded generators for the simulation scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::family::softmax;
use crate::random::{dirichlet, gamma_rate, standard_normal};

/// r(x) = sin(π x₁ x₂) + 2(x₃ − ½)² + x₄ + x₅/2; extra coordinates are ignored.
pub fn friedman_r(x: &[f64]) -> f64 {
    assert!(x.len() >= 5, "the Friedman function needs at least five coordinates");
    (std::f64::consts::PI * x[0] * x[1]).sin() + 2.0 * (x[2] - 0.5).powi(2) + x[3] + x[4] / 2.0
}

/// A generated dataset together with the true means (N × outcome_dim).
#[derive(Debug, Clone)]
pub struct Simulated {
    pub data: Dataset,
    pub mu: Vec<f64>,
    /// True regression coefficients for the parametric scenarios.
    pub beta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scenario {
    QpoisBvm,
    PowerGrid,
    InvgammaFriedman,
    GammaPower,
    DirichletMultinomial,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::QpoisBvm,
        Scenario::PowerGrid,
        Scenario::InvgammaFriedman,
        Scenario::GammaPower,
        Scenario::DirichletMultinomial,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::QpoisBvm => "qpois_bvm",
            Scenario::PowerGrid => "power_grid",
            Scenario::InvgammaFriedman => "invgamma_friedman",
            Scenario::GammaPower => "gamma_power",
            Scenario::DirichletMultinomial => "dirichlet_multinomial",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.iter().copied().find(|s| s.name() == name).ok_or_else(|| Error::Scenario {
            name: name.to_string(),
            known: Self::ALL.iter().map(|s| s.name()).collect::<Vec<_>>().join(", "),
        })
    }
}

/// Full parameterization of one simulated dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    pub phi: f64,
    pub kappa: Option<f64>,
    pub rho: Option<f64>,
    pub beta: Option<Vec<f64>>,
    pub seed: u64,
}

pub const QPOIS_DEFAULT_BETA: [f64; 2] = [1.0, 0.5];

impl ScenarioSpec {
    pub fn qpois_bvm(n: usize, beta: [f64; 2], phi: f64, seed: u64) -> Result<Self> {
        Self { scenario: Scenario::QpoisBvm, n, p: 1, phi, kappa: None, rho: None, beta: Some(beta.to_vec()), seed }
            .checked()
    }

    pub fn power_grid(n: usize, kappa: f64, phi: f64, seed: u64) -> Result<Self> {
        Self { scenario: Scenario::PowerGrid, n, p: 5, phi, kappa: Some(kappa), rho: None, beta: None, seed }.checked()
    }

    pub fn invgamma_friedman(n: usize, p: usize, phi: f64, seed: u64) -> Result<Self> {
        Self { scenario: Scenario::InvgammaFriedman, n, p, phi, kappa: None, rho: None, beta: None, seed }.checked()
    }

    pub fn gamma_power(n: usize, p: usize, phi: f64, seed: u64) -> Result<Self> {
        Self { scenario: Scenario::GammaPower, n, p, phi, kappa: Some(1.5), rho: None, beta: None, seed }.checked()
    }

    /// φ is implied by ρ as 1/(1 + ρ).
    pub fn dirichlet_multinomial(n: usize, rho: f64, seed: u64) -> Result<Self> {
        let phi = 1.0 / (1.0 + rho);
        Self { scenario: Scenario::DirichletMultinomial, n, p: 5, phi, kappa: None, rho: Some(rho), beta: None, seed }
            .checked()
    }

    /// Validates that the parameters present match the scenario.
    pub fn checked(self) -> Result<Self> {
        let bad = |m: &str| Err(Error::Config(format!("{}: {m}", self.scenario.name())));
        if self.n == 0 {
            return bad("need at least one observation");
        }
        if !(self.phi > 0.0 && self.phi.is_finite()) {
            return bad("phi must be positive");
        }
        match self.scenario {
            Scenario::QpoisBvm => {
                if self.p != 1 || self.kappa.is_some() || self.rho.is_some() {
                    return bad("takes one covariate, beta and phi only");
                }
                if self.beta.as_ref().map(|b| b.len()) != Some(2) {
                    return bad("needs beta = (intercept, slope)");
                }
            }
            Scenario::PowerGrid => {
                if self.p != 5 || self.rho.is_some() || self.beta.is_some() {
                    return bad("takes five covariates and kappa only");
                }
                match self.kappa {
                    Some(k) if k == 1.0 || k == 2.0 => {}
                    _ => {
                        return Err(Error::Scenario {
                            name: format!("power_grid with kappa {:?}", self.kappa),
                            known: "kappa 1, kappa 2".into(),
                        })
                    }
                }
            }
            Scenario::InvgammaFriedman | Scenario::GammaPower => {
                if self.p < 5 || self.rho.is_some() || self.beta.is_some() {
                    return bad("needs at least five covariates and no rho or beta");
                }
                let want = if self.scenario == Scenario::GammaPower { Some(1.5) } else { None };
                if self.kappa != want {
                    return bad("kappa is fixed by the scenario");
                }
            }
            Scenario::DirichletMultinomial => {
                if self.p != 5 || self.kappa.is_some() || self.beta.is_some() {
                    return bad("takes five covariates and rho only");
                }
                match self.rho {
                    Some(r) if r > 0.0 && r.is_finite() => {
                        if (self.phi - 1.0 / (1.0 + r)).abs() > 1e-12 {
                            return bad("phi must equal 1/(1 + rho)");
                        }
                    }
                    _ => return bad("rho must be positive"),
                }
            }
        }
        Ok(self)
    }

    /// Generates the dataset; deterministic in (spec, seed).
    pub fn generate(&self) -> Result<Simulated> {
        let spec = self.clone().checked()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        Ok(match spec.scenario {
            Scenario::QpoisBvm => {
                let b = spec.beta.as_ref().unwrap();
                gen_qpois(spec.n, [b[0], b[1]], spec.phi, &mut rng)
            }
            Scenario::PowerGrid => gen_power_grid(spec.n, spec.kappa.unwrap(), spec.phi, &mut rng)?,
            Scenario::InvgammaFriedman => gen_invgamma_friedman(spec.n, spec.p, spec.phi, &mut rng),
            Scenario::GammaPower => gen_gamma_power(spec.n, spec.p, spec.phi, &mut rng),
            Scenario::DirichletMultinomial => gen_dirichlet_multinomial(spec.n, spec.rho.unwrap(), &mut rng),
        })
    }
}

fn uniforms<R: Rng + ?Sized>(n: usize, p: usize, rng: &mut R) -> Vec<f64> {
    (0..n * p).map(|_| rng.random::<f64>()).collect()
}

/// φ·Z with Z ~ Poisson(μ/φ); variance φμ.
pub fn scaled_poisson<R: Rng + ?Sized>(mu: f64, phi: f64, rng: &mut R) -> f64 {
    let lambda = mu / phi;
    if lambda <= 0.0 {
        return 0.0;
    }
    phi * Poisson::new(lambda).expect("positive Poisson mean").sample(rng)
}

fn finish(x: Vec<f64>, p: usize, y: Vec<f64>, k: usize, weights: Option<Vec<f64>>, mu: Vec<f64>, beta: Option<Vec<f64>>) -> Simulated {
    let data = Dataset::new(x, p, y, k, weights, None).expect("generated data are finite");
    Simulated { data, mu, beta }
}

/// X ~ Normal(0, 1), μ = exp(β₀ + β₁x), Y = φZ with Z ~ Poisson(μ/φ).
pub fn gen_qpois<R: Rng + ?Sized>(n: usize, beta: [f64; 2], phi: f64, rng: &mut R) -> Simulated {
    let x: Vec<f64> = (0..n).map(|_| standard_normal(rng)).collect();
    let mu: Vec<f64> = x.iter().map(|&v| (beta[0] + beta[1] * v).exp()).collect();
    let y = mu.iter().map(|&m| scaled_poisson(m, phi, rng)).collect();
    finish(x, 1, y, 1, None, mu, Some(beta.to_vec()))
}

/// True coefficients of the power-variance scenario: β_j = c/√5 with
/// c = 1.2 (κ = 1) or 2 (κ = 2).
pub fn power_grid_beta(kappa: f64) -> Vec<f64> {
    let c = if kappa == 1.0 { 1.2 } else { 2.0 };
    vec![c / 5f64.sqrt(); 5]
}

/// Five standard-normal covariates, μ = exp(xᵀβ). κ = 1 uses scaled Poisson
/// outcomes, κ = 2 uses Y = μ ε with ε ~ Gam(1/φ, 1/φ).
pub fn gen_power_grid<R: Rng + ?Sized>(n: usize, kappa: f64, phi: f64, rng: &mut R) -> Result<Simulated> {
    if kappa != 1.0 && kappa != 2.0 {
        return Err(Error::Scenario { name: format!("power_grid with kappa {kappa}"), known: "kappa 1, kappa 2".into() });
    }
    let beta = power_grid_beta(kappa);
    let x: Vec<f64> = (0..n * 5).map(|_| standard_normal(rng)).collect();
    let mu: Vec<f64> = (0..n).map(|i| (0..5).map(|j| x[i * 5 + j] * beta[j]).sum::<f64>().exp()).collect();
    let y = mu
        .iter()
        .map(|&m| if kappa == 1.0 { scaled_poisson(m, phi, rng) } else { m * gamma_rate(1.0 / phi, 1.0 / phi, rng) })
        .collect();
    Ok(finish(x, 5, y, 1, None, mu, Some(beta)))
}

/// X ~ Uniform[0,1]^P, μ = e^{r(x)}, 1/Y ~ Gam(α, (α − 1)μ) with α = 2 + 1/φ.
pub fn gen_invgamma_friedman<R: Rng + ?Sized>(n: usize, p: usize, phi: f64, rng: &mut R) -> Simulated {
    let alpha = 2.0 + 1.0 / phi;
    let x = uniforms(n, p, rng);
    let mu: Vec<f64> = (0..n).map(|i| friedman_r(&x[i * p..(i + 1) * p]).exp()).collect();
    let y = mu.iter().map(|&m| 1.0 / gamma_rate(alpha, (alpha - 1.0) * m, rng)).collect();
    finish(x, p, y, 1, None, mu, None)
}

/// X ~ Uniform[0,1]^P, Y ~ Gam(e^{r/2}/φ, rate e^{−r/2}/φ): mean e^r and
/// variance φ e^{1.5 r}.
pub fn gen_gamma_power<R: Rng + ?Sized>(n: usize, p: usize, phi: f64, rng: &mut R) -> Simulated {
    let x = uniforms(n, p, rng);
    let r: Vec<f64> = (0..n).map(|i| friedman_r(&x[i * p..(i + 1) * p])).collect();
    let y = r.iter().map(|&v| gamma_rate((v / 2.0).exp() / phi, (-v / 2.0).exp() / phi, rng)).collect();
    let mu = r.iter().map(|v| v.exp()).collect();
    finish(x, p, y, 1, None, mu, None)
}

/// Predictors of the three-category scenario.
pub fn dirichlet_scenario_r(x: &[f64]) -> [f64; 3] {
    [2.0 * x[0] + x[1], x[0] + 4.0 * x[1] * x[2], x[1] + 2.0 * x[2]]
}

/// X ~ Uniform[0,1]^5, μ = softmax(r(x)), Y ~ Dirichlet(ρμ), unit counts.
pub fn gen_dirichlet_multinomial<R: Rng + ?Sized>(n: usize, rho: f64, rng: &mut R) -> Simulated {
    let x = uniforms(n, 5, rng);
    let mut mu = Vec::with_capacity(n * 3);
    let mut y = Vec::with_capacity(n * 3);
    for i in 0..n {
        let m = softmax(&dirichlet_scenario_r(&x[i * 5..(i + 1) * 5]));
        let conc: Vec<f64> = m.iter().map(|v| rho * v).collect();
        y.extend(dirichlet(&conc, rng));
        mu.extend(m);
    }
    finish(x, 5, y, 3, None, mu, None)
}
