use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use qlbart::synth::{Scenario, ScenarioSpec};
use qlbart::{Dataset, Error};
use qlbart_cli::config::{FamilyName, RunConfig};
use qlbart_cli::fit::{draw_file, fit, fitted_file, load_fit, trees_file};
use qlbart_cli::io::{read_dataset, read_draws, read_matrix, write_dataset};
use qlbart_cli::predict::predict;
use qlbart_cli::sim::{bench, bench_header, simulate, BenchArgs, ScenarioArgs};
use qlbart_cli::{exit_code, EXIT_CONFIG, EXIT_PARSE, EXIT_SCHEMA, EXIT_USAGE};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qlbart"))
}

fn small_config(dir: &Path, input: PathBuf, family: FamilyName) -> RunConfig {
    RunConfig {
        family,
        trees: Some(10),
        chains: 2,
        iterations: 40,
        burn_in: 20,
        seed: 9,
        input: Some(input),
        out: dir.join("fit"),
        ..RunConfig::default()
    }
}

fn gamma_csv(dir: &Path) -> PathBuf {
    let sim = ScenarioSpec::invgamma_friedman(60, 5, 2.0, 4).unwrap().generate().unwrap();
    let path = dir.join("train.csv");
    write_dataset(&path, &sim.data, FamilyName::Gamma).unwrap();
    path
}

#[test]
fn csv_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    for (scenario, fam) in [
        (Scenario::InvgammaFriedman, FamilyName::Gamma),
        (Scenario::DirichletMultinomial, FamilyName::Multinomial),
        (Scenario::QpoisBvm, FamilyName::Poisson),
    ] {
        let spec = ScenarioArgs { n: Some(50), seed: 3, ..ScenarioArgs::default() }.spec(scenario, 3).unwrap();
        let data: Dataset = spec.generate().unwrap().data;
        let path = tmp.path().join(format!("{}.csv", scenario.name()));
        write_dataset(&path, &data, fam).unwrap();
        let back = read_dataset(&path, fam).unwrap();
        assert_eq!(back.n(), data.n());
        assert_eq!(back.p(), data.p());
        assert_eq!(back.k(), data.k());
        assert_eq!(back.feature_names(), data.feature_names());
        for (a, b) in [(back.x(), data.x()), (back.y(), data.y()), (back.weights(), data.weights())] {
            for (u, v) in a.iter().zip(b) {
                assert!((u - v).abs() <= 1e-12 * v.abs().max(1.0), "{u} vs {v}");
            }
        }
    }
}

#[test]
fn fit_is_deterministic_and_report_matches_draw_files() {
    let tmp = tempfile::tempdir().unwrap();
    let input = gamma_csv(tmp.path());
    let mut cfg = small_config(tmp.path(), input, FamilyName::Gamma);
    let report = fit(&cfg).unwrap();
    let first: Vec<Vec<u8>> = (0..2).map(|c| fs::read(draw_file(&cfg.out, c)).unwrap()).collect();
    for (c, chain) in report.chains.iter().enumerate() {
        let t = read_draws(&draw_file(&cfg.out, c)).unwrap();
        assert_eq!(t.phi.len(), 20);
        let mut s = 0.0;
        for v in &t.phi {
            s += v;
        }
        assert!((chain.phi_mean - s / t.phi.len() as f64).abs() <= 1e-12 * s.abs());
    }
    assert!(report.parameters["phi"].rhat.is_some());
    assert_eq!(report.fitted_mean.len(), 60);

    cfg.out = tmp.path().join("again");
    fit(&cfg).unwrap();
    for (c, bytes) in first.iter().enumerate() {
        assert_eq!(&fs::read(draw_file(&cfg.out, c)).unwrap(), bytes);
        assert_eq!(fs::read(fitted_file(&cfg.out, c)).unwrap(), fs::read(fitted_file(&tmp.path().join("fit"), c)).unwrap());
    }
}

#[test]
fn one_retained_draw() {
    let tmp = tempfile::tempdir().unwrap();
    let input = gamma_csv(tmp.path());
    let cfg = RunConfig { chains: 1, iterations: 11, burn_in: 10, ..small_config(tmp.path(), input, FamilyName::Gamma) };
    fit(&cfg).unwrap();
    assert_eq!(read_draws(&draw_file(&cfg.out, 0)).unwrap().phi.len(), 1);
    assert_eq!(read_matrix(&fitted_file(&cfg.out, 0)).unwrap().1.len(), 1);
    assert_eq!(fs::read_to_string(trees_file(&cfg.out, 0)).unwrap().matches("ensemble ").count(), 1);
}

#[test]
fn predict_on_training_rows_reproduces_fitted_means() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = ScenarioSpec::dirichlet_multinomial(40, 0.5, 2).unwrap().generate().unwrap();
    let input = tmp.path().join("mn.csv");
    write_dataset(&input, &sim.data, FamilyName::Multinomial).unwrap();
    let cfg = small_config(tmp.path(), input.clone(), FamilyName::Multinomial);
    let report = fit(&cfg).unwrap();
    let rows = predict(&cfg.out, &input, &tmp.path().join("pred.csv"), None).unwrap();
    assert_eq!(rows.len(), report.fitted_mean.len());
    for (r, m) in rows.iter().zip(&report.fitted_mean) {
        assert!((r.mean - m).abs() < 1e-10, "{} vs {m}", r.mean);
        let (lo, hi) = r.hpd.unwrap();
        assert!(lo <= hi);
    }
}

#[test]
fn missing_feature_column_is_a_schema_error() {
    let tmp = tempfile::tempdir().unwrap();
    let input = gamma_csv(tmp.path());
    let cfg = small_config(tmp.path(), input, FamilyName::Gamma);
    fit(&cfg).unwrap();
    let (_, report) = load_fit(&cfg.out).unwrap();
    let dropped = report.feature_names[2].clone();
    let keep: Vec<&String> = report.feature_names.iter().filter(|n| **n != dropped).collect();
    let mut text = keep.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(",") + "\n";
    text.push_str(&vec!["0.5"; keep.len()].join(","));
    text.push('\n');
    let new = tmp.path().join("new.csv");
    fs::write(&new, text).unwrap();
    let err = predict(&cfg.out, &new, &tmp.path().join("p.csv"), None).unwrap_err();
    assert!(matches!(&err, Error::Schema(m) if m.contains(&dropped)), "{err}");
    assert_eq!(exit_code(&err), EXIT_SCHEMA);
}

#[test]
fn malformed_csv_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.csv");
    fs::write(&path, "x1,y\n0.1,2\n0.2,abc\n").unwrap();
    let err = read_dataset(&path, FamilyName::Poisson).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    assert_eq!(exit_code(&err), EXIT_PARSE);
}

#[test]
fn bench_with_zero_reps_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    for s in Scenario::ALL {
        let out = tmp.path().join(format!("{}.csv", s.name()));
        let n = bench(s, &BenchArgs::default(), &out).unwrap();
        assert_eq!(n, 0);
        assert_eq!(fs::read_to_string(&out).unwrap(), format!("{}\n", bench_header(s)));
    }
}

#[test]
fn simulate_writes_sidecar() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sim.csv");
    let args = ScenarioArgs { n: Some(30), seed: 5, ..ScenarioArgs::default() };
    let side = simulate(Scenario::GammaPower, &args, &out).unwrap();
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(side).unwrap()).unwrap();
    assert_eq!(json["scenario"], "gamma_power");
    assert_eq!(json["kappa"], 1.5);
    assert_eq!(json["seed"], 5);
    let data = read_dataset(&out, FamilyName::Power).unwrap();
    assert_eq!(data.n(), 30);
    assert_eq!(fs::read_to_string(tmp.path().join("sim_mu.csv")).unwrap().lines().count(), 31);
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let st = bin().args(["bench", "--scenario", "nope", "--out"]).arg(tmp.path().join("b.csv")).output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&st.stderr).contains("dirichlet_multinomial"));

    let st = bin().args(["fit", "--family", "weibull"]).output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_USAGE));

    let input = gamma_csv(tmp.path());
    let st = bin().arg("fit").arg(&input).args(["--family", "gamma", "--iters", "10", "--burnin", "10"]).output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_CONFIG));

    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "family = gamma\nchains = x\n").unwrap();
    let st = bin().arg("fit").arg(&input).arg("--config").arg(&cfg).output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_PARSE));

    let st = bin().arg("fit").arg(&input).args(["--family", "multinomial"]).output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_SCHEMA));
}

#[test]
fn binary_fit_summarize_predict() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d.csv");
    let st = bin()
        .args(["simulate", "--scenario", "qpois_bvm", "--n", "80", "--seed", "2", "--out"])
        .arg(&data)
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let out = tmp.path().join("fit");
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "# small run\ntrees = 5\nchains = 2\niterations = 30\nburn_in = 10\n").unwrap();
    let st = bin()
        .arg("fit")
        .arg(&data)
        .args(["--family", "poisson", "--seed", "4", "--burnin", "15", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .env(qlbart_cli::THREADS_ENV, "2")
        .output()
        .unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let (resolved, _) = load_fit(&out).unwrap();
    assert_eq!((resolved.trees, resolved.iterations, resolved.burn_in, resolved.seed), (Some(5), 30, 15, 4));
    assert_eq!(read_draws(&draw_file(&out, 1)).unwrap().phi.len(), 15);

    let before = fs::read_to_string(out.join("summary.csv")).unwrap();
    fs::remove_file(out.join("summary.csv")).unwrap();
    let st = bin().arg("summarize").arg(&out).output().unwrap();
    assert!(st.status.success());
    assert_eq!(fs::read_to_string(out.join("summary.csv")).unwrap(), before);

    let st = bin().arg("predict").arg(&out).arg(&data).output().unwrap();
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    assert_eq!(fs::read_to_string(out.join("predictions.csv")).unwrap().lines().count(), 81);
}
