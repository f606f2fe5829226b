use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qlbart::dispersion::DispersionMethod;
use qlbart::synth::Scenario;
use qlbart::Result;
use qlbart_cli::config::{parse_bounds, parse_dispersion, FamilyName, RunConfig};
use qlbart_cli::fit::{fit, load_fit, summarize_dir, CONFIG_FILE};
use qlbart_cli::predict::predict;
use qlbart_cli::sim::{bench, simulate, BenchArgs, ScenarioArgs};
use qlbart_cli::{exit_code, EXIT_OK};

#[derive(Parser)]
#[command(name = "qlbart", version, about = "Quasi-likelihood Bayesian additive regression trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a forest and write draws, summaries and a report.
    Fit(FitArgs),
    /// Posterior mean and intervals of μ at new rows.
    Predict {
        /// Output directory of a previous `fit`.
        fit_dir: PathBuf,
        /// CSV with the training feature columns.
        input: PathBuf,
        /// Defaults to <FIT_DIR>/predictions.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        level: Option<f64>,
    },
    /// Recompute summary.csv and fitted_summary.csv from the draw files.
    Summarize {
        fit_dir: PathBuf,
        #[arg(long)]
        level: Option<f64>,
    },
    /// Write a simulated dataset with a JSON sidecar.
    Simulate {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ScenarioFlags,
    },
    /// Run a replication grid and write a metrics CSV.
    Bench {
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 1)]
        reps: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        params: ScenarioFlags,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        burnin: Option<usize>,
        #[arg(long)]
        trees: Option<usize>,
    },
}

#[derive(Args)]
struct ScenarioFlags {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Intercept and slope, `b0,b1` (qpois_bvm).
    #[arg(long, value_parser = parse_bounds)]
    beta: Option<(f64, f64)>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl ScenarioFlags {
    fn args(&self) -> ScenarioArgs {
        ScenarioArgs {
            n: self.n,
            p: self.p,
            phi: self.phi,
            kappa: self.kappa,
            rho: self.rho,
            beta: self.beta.map(|(a, b)| [a, b]),
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Training CSV.
    input: Option<PathBuf>,
    /// Configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<FamilyName>,
    #[arg(long, value_parser = parse_dispersion)]
    dispersion: Option<DispersionMethod>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// `lo,hi` support for κ when it is estimated.
    #[arg(long, value_parser = parse_bounds)]
    kappa_bounds: Option<(f64, f64)>,
    /// Sample κ (power family).
    #[arg(long)]
    estimate_kappa: bool,
    /// Initial φ, or the fixed value under `--dispersion fixed`.
    #[arg(long)]
    phi: Option<f64>,
    /// Leaf prior scale k.
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    level: Option<f64>,
    /// CSV of test rows to predict during sampling.
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Do not write chain_<i>.trees.
    #[arg(long)]
    no_trees: bool,
}

impl FitArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(p) = &self.config {
            c.apply_text(&std::fs::read_to_string(p)?)?;
        }
        macro_rules! over {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { c.$field = v; })*
            };
        }
        over!(family => family, dispersion => dispersion, chains => chains, iters => iterations,
              burnin => burn_in, thin => thin, seed => seed, kappa => kappa, kappa_bounds => kappa_bounds,
              k => k, level => level, out => out);
        if self.trees.is_some() {
            c.trees = self.trees;
        }
        if self.phi.is_some() {
            c.phi = self.phi;
        }
        if self.input.is_some() {
            c.input = self.input.clone();
        }
        if self.test.is_some() {
            c.test = self.test.clone();
        }
        if self.estimate_kappa {
            c.estimate_kappa = true;
        }
        if self.no_trees {
            c.save_trees = false;
        }
        Ok(c)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.4}"))
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Fit(a) => {
            let cfg = a.resolve()?;
            let r = fit(&cfg)?;
            let phi = &r.parameters["phi"];
            println!(
                "{} chains, {} draws each; phi mean {:.4} (rhat {}); wrote {}",
                r.chains.len(),
                r.chains.first().map_or(0, |c| c.draws),
                phi.mean,
                fmt_opt(phi.rhat),
                cfg.out.display()
            );
        }
        Command::Predict { fit_dir, input, out, level } => {
            let out = out.unwrap_or_else(|| fit_dir.join("predictions.csv"));
            let rows = predict(&fit_dir, &input, &out, level)?;
            println!("{} predictions written to {}", rows.len(), out.display());
        }
        Command::Summarize { fit_dir, level } => {
            let level = match level {
                Some(l) => l,
                None if fit_dir.join(CONFIG_FILE).exists() => load_fit(&fit_dir)?.0.level,
                None => RunConfig::default().level,
            };
            let s = summarize_dir(&fit_dir, level)?;
            println!("parameter      mean      sd   lower   upper    rhat     ess");
            for (name, p) in &s.parameters {
                let [lo, hi] = p.equal_tail.unwrap_or([f64::NAN; 2]);
                println!(
                    "{name:<12} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7} {:>7}",
                    p.mean,
                    p.sd,
                    lo,
                    hi,
                    fmt_opt(p.rhat),
                    p.ess.map_or("-".into(), |e| format!("{e:.0}"))
                );
            }
            println!("{} chains; {} fitted entries summarized", s.chains, s.fitted.len());
        }
        Command::Simulate { scenario, out, params } => {
            let s = Scenario::parse(&scenario)?;
            let side = simulate(s, &params.args(), &out)?;
            println!("wrote {} and {}", out.display(), side.display());
        }
        Command::Bench { scenario, reps, out, params, iters, burnin, trees } => {
            let s = Scenario::parse(&scenario)?;
            let args = BenchArgs { scenario: params.args(), reps, iterations: iters, burn_in: burnin, trees };
            let rows = bench(s, &args, &out)?;
            println!("{rows} rows written to {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
