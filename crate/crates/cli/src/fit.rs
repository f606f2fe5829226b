//! `fit` and `summarize`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qlbart::backfit::run_chain_with_test;
use qlbart::forest::write_ensemble;
use qlbart::summaries::{
    credible_intervals, effective_sample_size, inclusion_probabilities, split_rhat, variable_importance, Draws,
};
use qlbart::{Error, Result};

use crate::config::{FamilyName, RunConfig};
use crate::io::{read_dataset, read_draws, read_features, read_matrix, write_draws, write_matrix};

pub const CONFIG_FILE: &str = "config.txt";
pub const REPORT_FILE: &str = "report.json";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const FITTED_SUMMARY_FILE: &str = "fitted_summary.csv";

pub fn draw_file(dir: &Path, chain: usize) -> PathBuf {
    dir.join(format!("chain_{chain}.csv"))
}

pub fn fitted_file(dir: &Path, chain: usize) -> PathBuf {
    dir.join(format!("chain_{chain}_fitted.csv"))
}

pub fn test_file(dir: &Path, chain: usize) -> PathBuf {
    dir.join(format!("chain_{chain}_test.csv"))
}

pub fn trees_file(dir: &Path, chain: usize) -> PathBuf {
    dir.join(format!("chain_{chain}.trees"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarSummary {
    pub mean: f64,
    pub sd: f64,
    pub equal_tail: Option<[f64; 2]>,
    pub hpd: Option<[f64; 2]>,
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Pooled summary of one scalar over chains.
pub fn scalar_summary(chains: &[&[f64]], level: f64) -> ScalarSummary {
    let all: Vec<f64> = chains.iter().flat_map(|c| c.iter().copied()).collect();
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let sd = if all.len() > 1 { (all.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    let ci = credible_intervals(&all, level).ok();
    ScalarSummary {
        mean,
        sd,
        equal_tail: ci.as_ref().map(|c| [c.equal_tail.0, c.equal_tail.1]),
        hpd: ci.as_ref().map(|c| [c.hpd.0, c.hpd.1]),
        rhat: finite(split_rhat(chains)),
        ess: finite(effective_sample_size(chains)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveCounts {
    pub proposed: usize,
    pub accepted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain: usize,
    pub seed: u64,
    pub draws: usize,
    pub phi_mean: f64,
    pub kappa_mean: f64,
    pub sigma_lambda_mean: f64,
    pub grow: MoveCounts,
    pub prune: MoveCounts,
    pub change: MoveCounts,
    pub fallback_leaves: usize,
    pub degenerate_dispersion: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub family: String,
    pub kappa: Option<f64>,
    pub outcome_dim: usize,
    pub n: usize,
    pub feature_names: Vec<String>,
    pub config_hash: String,
    pub sampler_hash: String,
    pub level: f64,
    pub chains: Vec<ChainReport>,
    pub parameters: BTreeMap<String, ScalarSummary>,
    /// Posterior mean of μ at the training rows, N × K row-major.
    pub fitted_mean: Vec<f64>,
    pub inclusion_probabilities: Vec<f64>,
    pub variable_importance: Vec<f64>,
    pub seconds: f64,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Builds a rayon pool honouring `QLBART_THREADS`.
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(crate::THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{} must be a positive integer, got `{v}`", crate::THREADS_ENV)))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("thread pool: {e}")))
}

fn chain_report(d: &Draws, seconds: f64) -> ChainReport {
    let g = &d.diagnostics;
    let mc = |m: usize| MoveCounts { proposed: g.proposed[m], accepted: g.accepted[m] };
    ChainReport {
        chain: d.chain,
        seed: d.seed,
        draws: d.len(),
        phi_mean: mean(&d.phi),
        kappa_mean: mean(&d.kappa),
        sigma_lambda_mean: mean(&d.sigma_lambda),
        grow: mc(0),
        prune: mc(1),
        change: mc(2),
        fallback_leaves: g.fallback_leaves,
        degenerate_dispersion: g.degenerate_dispersion,
        seconds,
    }
}

/// Runs all chains and writes the output directory.
pub fn fit(cfg: &RunConfig) -> Result<FitReport> {
    cfg.validate()?;
    let start = Instant::now();
    let input = cfg.input.as_ref().ok_or_else(|| Error::Config("no input file given".into()))?;
    let data = read_dataset(input, cfg.family)?;
    let family = cfg.quasi_family(data.k())?;
    data.validate_for(&family)?;
    let test_x = match &cfg.test {
        Some(p) => Some(read_features(p, data.feature_names())?),
        None => None,
    };
    let sc = cfg.sampler_config(&family);
    sc.validate()?;
    let pool = thread_pool()?;
    let results: Vec<Result<(Draws, f64)>> = pool.install(|| {
        (0..cfg.chains)
            .into_par_iter()
            .map(|c| {
                let t = Instant::now();
                let mut d = run_chain_with_test(&data, &family, &sc, cfg.seed.wrapping_add(c as u64), test_x.as_deref())?;
                d.chain = c;
                Ok((d, t.elapsed().as_secs_f64()))
            })
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>>>()?;

    let dir = &cfg.out;
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), cfg.to_text())?;
    remove_stale(dir, cfg.chains)?;
    for (d, _) in &runs {
        write_chain(dir, d)?;
    }
    let draws: Vec<&Draws> = runs.iter().map(|(d, _)| d).collect();
    let summary = summarize_dir(dir, cfg.level)?;
    let mut merged_splits = Draws { split_counts: Vec::new(), ..Draws::default() };
    for d in &draws {
        merged_splits.split_counts.extend(d.split_counts.iter().cloned());
    }
    let report = FitReport {
        family: cfg.family.name().into(),
        kappa: (cfg.family == FamilyName::Power).then_some(cfg.kappa),
        outcome_dim: data.k(),
        n: data.n(),
        feature_names: data.feature_names().to_vec(),
        config_hash: cfg.hash(),
        sampler_hash: sc.hash(),
        level: cfg.level,
        chains: runs.iter().map(|(d, s)| chain_report(d, *s)).collect(),
        parameters: summary.parameters,
        fitted_mean: summary.fitted.iter().map(|r| r.mean).collect(),
        inclusion_probabilities: inclusion_probabilities(&merged_splits)?,
        variable_importance: variable_importance(&merged_splits)?,
        seconds: start.elapsed().as_secs_f64(),
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Numerical(format!("report: {e}")))?;
    fs::write(dir.join(REPORT_FILE), json + "\n")?;
    Ok(report)
}

/// Removes chain files left by an earlier fit with more chains.
fn remove_stale(dir: &Path, chains: usize) -> Result<()> {
    let mut c = chains;
    while draw_file(dir, c).exists() {
        for f in [draw_file(dir, c), fitted_file(dir, c), test_file(dir, c), trees_file(dir, c)] {
            if f.exists() {
                fs::remove_file(f)?;
            }
        }
        c += 1;
    }
    Ok(())
}

fn write_chain(dir: &Path, d: &Draws) -> Result<()> {
    write_draws(&draw_file(dir, d.chain), d)?;
    write_matrix(&fitted_file(dir, d.chain), &d.iteration, &d.fitted_mu, d.n_train, d.outcome_dim)?;
    if d.n_test > 0 {
        write_matrix(&test_file(dir, d.chain), &d.iteration, &d.test_mu, d.n_test, d.outcome_dim)?;
    } else if test_file(dir, d.chain).exists() {
        fs::remove_file(test_file(dir, d.chain))?;
    }
    if !d.ensembles.is_empty() {
        let mut out = std::io::BufWriter::new(fs::File::create(trees_file(dir, d.chain))?);
        for e in &d.ensembles {
            write_ensemble(e, &mut out)?;
        }
        std::io::Write::flush(&mut out)?;
    } else if trees_file(dir, d.chain).exists() {
        fs::remove_file(trees_file(dir, d.chain))?;
    }
    Ok(())
}

/// Pointwise summary of one entry of μ.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub row: usize,
    pub component: usize,
    pub mean: f64,
    pub equal_tail: Option<(f64, f64)>,
    pub hpd: Option<(f64, f64)>,
}

/// Pools a list of draw matrices (each draw N × K flattened) into
/// pointwise summaries.
pub fn point_summaries(draws: &[Vec<f64>], k: usize, level: f64) -> Vec<PointSummary> {
    let Some(first) = draws.first() else { return Vec::new() };
    (0..first.len())
        .map(|j| {
            let col: Vec<f64> = draws.iter().map(|d| d[j]).collect();
            let ci = credible_intervals(&col, level).ok();
            PointSummary {
                row: j / k + 1,
                component: j % k + 1,
                mean: mean(&col),
                equal_tail: ci.as_ref().map(|c| c.equal_tail),
                hpd: ci.as_ref().map(|c| c.hpd),
            }
        })
        .collect()
}

/// `row,component,mean,lower,upper,hpd_lower,hpd_upper`; empty interval
/// fields when fewer than two draws exist.
pub fn write_point_summaries(path: &Path, rows: &[PointSummary]) -> Result<()> {
    let mut s = String::from("row,component,mean,lower,upper,hpd_lower,hpd_upper\n");
    let pair = |p: Option<(f64, f64)>| p.map_or(",".to_string(), |(a, b)| format!("{a},{b}"));
    for r in rows {
        s.push_str(&format!("{},{},{},{},{}\n", r.row, r.component, r.mean, pair(r.equal_tail), pair(r.hpd)));
    }
    fs::write(path, s)?;
    Ok(())
}

pub struct DirSummary {
    pub chains: usize,
    pub parameters: BTreeMap<String, ScalarSummary>,
    pub fitted: Vec<PointSummary>,
}

/// Chain indices with a draw file in `dir`, in order.
pub fn chains_in(dir: &Path) -> Result<Vec<usize>> {
    let mut v = Vec::new();
    while draw_file(dir, v.len()).exists() {
        v.push(v.len());
    }
    if v.is_empty() {
        return Err(Error::Schema(format!("no chain_0.csv in {}", dir.display())));
    }
    Ok(v)
}

/// Recomputes `summary.csv` and `fitted_summary.csv` from the draw files.
pub fn summarize_dir(dir: &Path, level: f64) -> Result<DirSummary> {
    let chains = chains_in(dir)?;
    let tables = chains.iter().map(|&c| read_draws(&draw_file(dir, c))).collect::<Result<Vec<_>>>()?;
    let mut parameters = BTreeMap::new();
    let mut csv = String::from("parameter,mean,sd,lower,upper,hpd_lower,hpd_upper,rhat,ess\n");
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let pair = |p: Option<[f64; 2]>| p.map_or(",".to_string(), |[a, b]| format!("{a},{b}"));
    for name in ["phi", "kappa", "sigma_lambda"] {
        let cols: Vec<&[f64]> = tables
            .iter()
            .map(|t| match name {
                "phi" => t.phi.as_slice(),
                "kappa" => t.kappa.as_slice(),
                _ => t.sigma_lambda.as_slice(),
            })
            .collect();
        let s = scalar_summary(&cols, level);
        csv.push_str(&format!(
            "{name},{},{},{},{},{},{}\n",
            s.mean,
            s.sd,
            pair(s.equal_tail),
            pair(s.hpd),
            opt(s.rhat),
            opt(s.ess)
        ));
        parameters.insert(name.to_string(), s);
    }
    fs::write(dir.join(SUMMARY_FILE), csv)?;
    let mut fitted = Vec::new();
    let mut k = 1;
    for &c in &chains {
        let path = fitted_file(dir, c);
        if path.exists() {
            let (_, rows) = read_matrix(&path)?;
            if c == 0 {
                k = outcome_dim_of(&path)?;
            }
            fitted.extend(rows);
        }
    }
    let fitted = point_summaries(&fitted, k, level);
    write_point_summaries(&dir.join(FITTED_SUMMARY_FILE), &fitted)?;
    Ok(DirSummary { chains: chains.len(), parameters, fitted })
}

/// K from the `mu_<row>_<k>` column names of a matrix file.
fn outcome_dim_of(path: &Path) -> Result<usize> {
    let text = fs::read_to_string(path)?;
    let header = text.lines().next().unwrap_or("");
    Ok(header.split(',').filter(|h| h.starts_with("mu_1_") || *h == "mu_1").count().max(1))
}

/// Reads the configuration and report written by `fit`.
pub fn load_fit(dir: &Path) -> Result<(RunConfig, FitReport)> {
    let cfg = RunConfig::from_text(&fs::read_to_string(dir.join(CONFIG_FILE))?)?;
    let text = fs::read_to_string(dir.join(REPORT_FILE))?;
    let report: FitReport = serde_json::from_str(&text).map_err(|e| Error::Parse { line: e.line(), message: e.to_string() })?;
    Ok((cfg, report))
}
