//! `simulate` and `bench`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use qlbart::backfit::SamplerConfig;
use qlbart::experiments::{
    bvm_experiment, gamma_comparison_replication, multinomial_replication, power_grid_replication, quasi_power_comparison,
    PowerGridSettings,
};
use qlbart::synth::{Scenario, ScenarioSpec, QPOIS_DEFAULT_BETA};
use qlbart::{Error, QuasiFamily, Result};

use crate::config::FamilyName;
use crate::fit::thread_pool;
use crate::io::write_dataset;

/// Scenario parameters; unset fields take the scenario defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScenarioArgs {
    pub n: Option<usize>,
    pub p: Option<usize>,
    pub phi: Option<f64>,
    pub kappa: Option<f64>,
    pub rho: Option<f64>,
    pub beta: Option<[f64; 2]>,
    pub seed: u64,
}

/// The family a scenario's CSV is written for.
pub fn scenario_family(s: Scenario) -> FamilyName {
    match s {
        Scenario::QpoisBvm => FamilyName::Poisson,
        Scenario::PowerGrid | Scenario::GammaPower => FamilyName::Power,
        Scenario::InvgammaFriedman => FamilyName::Gamma,
        Scenario::DirichletMultinomial => FamilyName::Multinomial,
    }
}

fn default_n(s: Scenario) -> usize {
    match s {
        Scenario::QpoisBvm => 2000,
        Scenario::PowerGrid => 500,
        Scenario::InvgammaFriedman | Scenario::GammaPower => 250,
        Scenario::DirichletMultinomial => 200,
    }
}

impl ScenarioArgs {
    pub fn spec(&self, s: Scenario, seed: u64) -> Result<ScenarioSpec> {
        let n = self.n.unwrap_or_else(|| default_n(s));
        let p = self.p.unwrap_or(10);
        match s {
            Scenario::QpoisBvm => {
                ScenarioSpec::qpois_bvm(n, self.beta.unwrap_or(QPOIS_DEFAULT_BETA), self.phi.unwrap_or(2.0), seed)
            }
            Scenario::PowerGrid => ScenarioSpec::power_grid(n, self.kappa.unwrap_or(1.0), self.phi.unwrap_or(1.0), seed),
            Scenario::InvgammaFriedman => ScenarioSpec::invgamma_friedman(n, p, self.phi.unwrap_or(2.0), seed),
            Scenario::GammaPower => ScenarioSpec::gamma_power(n, p, self.phi.unwrap_or(1.0), seed),
            Scenario::DirichletMultinomial => ScenarioSpec::dirichlet_multinomial(n, self.rho.unwrap_or(0.5), seed),
        }
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    scenario: &'a str,
    family: &'a str,
    n: usize,
    p: usize,
    phi: f64,
    kappa: Option<f64>,
    rho: Option<f64>,
    beta: Option<&'a [f64]>,
    seed: u64,
    data: String,
    truth: String,
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

/// Writes the dataset to `out`, the true means to `<stem>_mu.csv` and the
/// spec to `<stem>.json`. Returns the sidecar path.
pub fn simulate(s: Scenario, args: &ScenarioArgs, out: &Path) -> Result<PathBuf> {
    let spec = args.spec(s, args.seed)?;
    let sim = spec.generate()?;
    let fam = scenario_family(s);
    write_dataset(out, &sim.data, fam)?;
    let k = sim.data.k();
    let truth = with_suffix(out, "_mu.csv");
    let mut t = String::from("row");
    if k == 1 {
        t.push_str(",mu\n");
    } else {
        (1..=k).for_each(|c| t.push_str(&format!(",mu{c}")));
        t.push('\n');
    }
    for (i, row) in sim.mu.chunks(k).enumerate() {
        t.push_str(&(i + 1).to_string());
        row.iter().for_each(|v| t.push_str(&format!(",{v}")));
        t.push('\n');
    }
    fs::write(&truth, t)?;
    let side = with_suffix(out, ".json");
    let name = |p: &Path| p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let car = Sidecar {
        scenario: s.name(),
        family: fam.name(),
        n: spec.n,
        p: spec.p,
        phi: spec.phi,
        kappa: spec.kappa,
        rho: spec.rho,
        beta: sim.beta.as_deref().or(spec.beta.as_deref()),
        seed: spec.seed,
        data: name(out),
        truth: name(&truth),
    };
    let json = serde_json::to_string_pretty(&car).map_err(|e| Error::Numerical(format!("sidecar: {e}")))?;
    fs::write(&side, json + "\n")?;
    Ok(side)
}

/// Sampler scale for `bench`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchArgs {
    pub scenario: ScenarioArgs,
    pub reps: usize,
    pub iterations: Option<usize>,
    pub burn_in: Option<usize>,
    pub trees: Option<usize>,
}

pub fn bench_header(s: Scenario) -> &'static str {
    match s {
        Scenario::QpoisBvm => "rep,seed,coefficient,truth,mqle,asymptotic_se,posterior_mean,posterior_sd,acceptance_rate",
        Scenario::PowerGrid => "rep,seed,kappa,phi,method,coverage,width,rmse,bias",
        Scenario::InvgammaFriedman => "rep,seed,phi,sse_gamma,sse_quasi,relative_mse,phi_gamma,phi_quasi",
        Scenario::GammaPower | Scenario::DirichletMultinomial => {
            "rep,seed,phi,method,rmse,mse,width,coverage,phi_mean,kappa_mean"
        }
    }
}

fn sampler(family: &QuasiFamily, args: &BenchArgs, iterations: usize, burn_in: usize) -> SamplerConfig {
    let mut c = SamplerConfig::for_family(family);
    c.iterations = args.iterations.unwrap_or(iterations);
    c.burn_in = args.burn_in.unwrap_or(burn_in);
    if let Some(t) = args.trees {
        c.num_trees = t;
    }
    c
}

fn one_rep(s: Scenario, args: &BenchArgs, rep: usize, seed: u64) -> Result<Vec<String>> {
    let a = &args.scenario;
    let n = a.n.unwrap_or_else(|| default_n(s));
    let p = a.p.unwrap_or(10);
    let mut rows = Vec::new();
    match s {
        Scenario::QpoisBvm => {
            let beta = a.beta.unwrap_or(QPOIS_DEFAULT_BETA);
            let phi = a.phi.unwrap_or(2.0);
            let iters = args.iterations.unwrap_or(20000);
            let burn = args.burn_in.unwrap_or(2000);
            for r in bvm_experiment(n, beta, phi, iters, burn, seed)? {
                rows.push(format!(
                    "{rep},{seed},{},{},{},{},{},{},{}",
                    r.coefficient, r.truth, r.mqle, r.asymptotic_se, r.posterior_mean, r.posterior_sd, r.acceptance_rate
                ));
            }
        }
        Scenario::PowerGrid => {
            let mut set = PowerGridSettings::default();
            set.iterations = args.iterations.unwrap_or(set.iterations);
            set.burn_in = args.burn_in.unwrap_or(set.burn_in);
            let kappas = a.kappa.map_or(vec![1.0, 2.0], |k| vec![k]);
            let phis = a.phi.map_or(vec![0.5, 1.0, 2.0], |f| vec![f]);
            for (ci, (&kappa, &phi)) in kappas.iter().flat_map(|k| phis.iter().map(move |f| (k, f))).enumerate() {
                let cell_seed = seed.wrapping_add(10_000 * ci as u64);
                for m in power_grid_replication(n, kappa, phi, &set, cell_seed)? {
                    rows.push(format!(
                        "{rep},{cell_seed},{kappa},{phi},{},{},{},{},{}",
                        m.method, m.coverage, m.width, m.rmse, m.bias
                    ));
                }
            }
        }
        Scenario::InvgammaFriedman => {
            let phi = a.phi.unwrap_or(2.0);
            let base = sampler(&QuasiFamily::Gamma, args, 2000, 1000);
            let g = gamma_comparison_replication(n, p, phi, &base, seed)?;
            rows.push(format!(
                "{rep},{seed},{phi},{},{},{},{},{}",
                g.sse_gamma, g.sse_quasi, g.relative_mse, g.phi_gamma, g.phi_quasi
            ));
        }
        Scenario::GammaPower => {
            let phi = a.phi.unwrap_or(1.0);
            let base = sampler(&QuasiFamily::power(1.5)?, args, 2000, 1000);
            for m in quasi_power_comparison(n, p, phi, &base, seed)? {
                rows.push(format!(
                    "{rep},{seed},{phi},{},{},{},{},{},{},{}",
                    m.method, m.rmse, m.mse, m.width, m.coverage, m.phi_mean, m.kappa_mean
                ));
            }
        }
        Scenario::DirichletMultinomial => {
            let rho = a.rho.unwrap_or(0.5);
            let base = sampler(&QuasiFamily::multinomial(3)?, args, 2000, 1000);
            let m = multinomial_replication(n, rho, &base, seed)?;
            rows.push(format!(
                "{rep},{seed},{},{},{},{},{},{},{},{}",
                1.0 / (1.0 + rho),
                m.method,
                m.rmse,
                m.mse,
                m.width,
                m.coverage,
                m.phi_mean,
                m.kappa_mean
            ));
        }
    }
    Ok(rows)
}

/// Runs `reps` replications (seed + rep) and writes the metrics CSV.
/// Replications run in parallel; rows are written in replication order.
pub fn bench(s: Scenario, args: &BenchArgs, out: &Path) -> Result<usize> {
    let pool = thread_pool()?;
    let seed = args.scenario.seed;
    let reps: Vec<Result<Vec<String>>> = pool.install(|| {
        (0..args.reps).into_par_iter().map(|r| one_rep(s, args, r, seed.wrapping_add(r as u64))).collect()
    });
    let mut text = String::from(bench_header(s));
    text.push('\n');
    let mut count = 0;
    for r in reps {
        for row in r? {
            text.push_str(&row);
            text.push('\n');
            count += 1;
        }
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(out, text)?;
    Ok(count)
}
