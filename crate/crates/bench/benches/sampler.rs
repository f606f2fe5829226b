use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use qlbart::backfit::{conjugate_log_marginal, power_laplace_log_marginal, predict_mu, run_chain, Sampler, SamplerConfig};
use qlbart::synth::ScenarioSpec;
use qlbart::{LeafPrior, QuasiFamily};

fn leaf_marginals(c: &mut Criterion) {
    let prior = LeafPrior::from_sigma(0.1).unwrap();
    c.bench_function("conjugate_log_marginal", |b| {
        b.iter(|| conjugate_log_marginal(black_box(37.0), black_box(41.5), &prior))
    });
    c.bench_function("power_laplace_log_marginal", |b| {
        b.iter(|| power_laplace_log_marginal(black_box(37.0), black_box(41.5), 1.2, 1.5, 0.1))
    });
}

fn sweeps(c: &mut Criterion) {
    let sim = ScenarioSpec::invgamma_friedman(1000, 10, 2.0, 7).unwrap().generate().unwrap();
    for (name, family) in [("poisson", QuasiFamily::Poisson), ("power", QuasiFamily::power(1.5).unwrap())] {
        let mut cfg = SamplerConfig::for_family(&family);
        cfg.num_trees = 50;
        let mut sampler = Sampler::new(&sim.data, &family, &cfg).unwrap();
        let mut state = sampler.init_state(11);
        c.bench_function(&format!("sweep_{name}_n1000_t50"), |b| b.iter(|| sampler.sweep(&mut state).unwrap()));
    }
}

fn prediction(c: &mut Criterion) {
    let sim = ScenarioSpec::gamma_power(500, 10, 1.0, 3).unwrap().generate().unwrap();
    let family = QuasiFamily::Gamma;
    let mut cfg = SamplerConfig::for_family(&family);
    cfg.iterations = 60;
    cfg.burn_in = 59;
    cfg.keep_ensembles = true;
    let d = run_chain(&sim.data, &family, &cfg, 5).unwrap();
    let e = &d.ensembles[0];
    c.bench_function("predict_mu_n500_t200", |b| b.iter(|| predict_mu(e, &family, black_box(sim.data.x()), 10)));
}

criterion_group!(benches, leaf_marginals, sweeps, prediction);
criterion_main!(benches);
