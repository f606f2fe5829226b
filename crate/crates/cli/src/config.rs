//! Run configuration and its flat `key = value` file format.
//!
//! Blank lines and lines starting with `#` are ignored. Every key is
//! optional; unset keys keep their defaults. `to_text` writes every key, so
//! a written file reads back to the same configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use qlbart::backfit::SamplerConfig;
use qlbart::dispersion::DispersionMethod;
use qlbart::{Error, QuasiFamily, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyName {
    Binomial,
    Poisson,
    Gamma,
    Power,
    Multinomial,
}

impl FamilyName {
    pub const ALL: [FamilyName; 5] =
        [FamilyName::Binomial, FamilyName::Poisson, FamilyName::Gamma, FamilyName::Power, FamilyName::Multinomial];

    pub fn name(&self) -> &'static str {
        match self {
            FamilyName::Binomial => "binomial",
            FamilyName::Poisson => "poisson",
            FamilyName::Gamma => "gamma",
            FamilyName::Power => "power",
            FamilyName::Multinomial => "multinomial",
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, FamilyName::Binomial | FamilyName::Multinomial)
    }
}

impl FromStr for FamilyName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        FamilyName::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| format!("unknown family `{s}` (expected binomial, poisson, gamma, power or multinomial)"))
    }
}

pub fn parse_dispersion(s: &str) -> std::result::Result<DispersionMethod, String> {
    DispersionMethod::parse(s).ok_or_else(|| format!("unknown dispersion method `{s}` (expected fixed, eqp, plp, bbq or pseudo-eb)"))
}

/// Parses `lo,hi`.
pub fn parse_bounds(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `lo,hi`, got `{s}`"))?;
    let lo = a.trim().parse().map_err(|_| format!("bad number `{a}`"))?;
    let hi = b.trim().parse().map_err(|_| format!("bad number `{b}`"))?;
    Ok((lo, hi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub family: FamilyName,
    /// Power exponent (initial value when estimated).
    pub kappa: f64,
    pub estimate_kappa: bool,
    pub kappa_bounds: (f64, f64),
    /// `None` picks 200 trees for scalar families and 50 for categorical.
    pub trees: Option<usize>,
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub dispersion: DispersionMethod,
    pub phi_prior_a: f64,
    pub phi_prior_b: f64,
    /// Initial φ; the fixed value under `fixed` dispersion.
    pub phi: Option<f64>,
    pub k: f64,
    pub seed: u64,
    pub level: f64,
    pub save_trees: bool,
    pub input: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            family: FamilyName::Poisson,
            kappa: 1.5,
            estimate_kappa: false,
            kappa_bounds: (0.5, 3.0),
            trees: None,
            chains: 4,
            iterations: 2000,
            burn_in: 1000,
            thin: 1,
            dispersion: DispersionMethod::Bbq,
            phi_prior_a: 0.5,
            phi_prior_b: 0.5,
            phi: None,
            k: 2.0,
            seed: 1,
            level: 0.95,
            save_trees: true,
            input: None,
            test: None,
            out: PathBuf::from("qlbart-out"),
        }
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |x| x.to_string())
}

fn path(v: &Option<PathBuf>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |p| p.display().to_string())
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::Config(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.chains == 0 || self.thin == 0 {
            return Err(Error::Config("chains and thin must be at least 1".into()));
        }
        if self.trees == Some(0) {
            return Err(Error::Config("need at least one tree".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level {} must lie in (0, 1)", self.level)));
        }
        if self.dispersion == DispersionMethod::GammaLikelihood && self.family != FamilyName::Gamma {
            return Err(Error::Config("gamma-lik dispersion needs the gamma family".into()));
        }
        if self.family == FamilyName::Power {
            QuasiFamily::power(self.kappa).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// The family for a dataset with `outcome_dim` outcome columns.
    pub fn quasi_family(&self, outcome_dim: usize) -> Result<QuasiFamily> {
        match self.family {
            FamilyName::Binomial => Ok(QuasiFamily::Binomial),
            FamilyName::Poisson => Ok(QuasiFamily::Poisson),
            FamilyName::Gamma => Ok(QuasiFamily::Gamma),
            FamilyName::Power => QuasiFamily::power(self.kappa),
            FamilyName::Multinomial => QuasiFamily::multinomial(outcome_dim),
        }
    }

    pub fn sampler_config(&self, family: &QuasiFamily) -> SamplerConfig {
        let mut c = SamplerConfig::for_family(family);
        if let Some(t) = self.trees {
            c.num_trees = t;
        }
        c.iterations = self.iterations;
        c.burn_in = self.burn_in;
        c.thin = self.thin;
        c.k_scale = self.k;
        c.phi_init = self.phi;
        c.record_fits = true;
        c.keep_ensembles = self.save_trees;
        c.dispersion.method = self.dispersion;
        c.dispersion.prior_a = self.phi_prior_a;
        c.dispersion.prior_b = self.phi_prior_b;
        c.dispersion.kappa_bounds = self.kappa_bounds;
        c.dispersion.estimate_kappa = self.estimate_kappa && self.family == FamilyName::Power;
        c
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("family", self.family.name().into());
        kv("kappa", self.kappa.to_string());
        kv("estimate_kappa", self.estimate_kappa.to_string());
        kv("kappa_bounds", format!("{},{}", self.kappa_bounds.0, self.kappa_bounds.1));
        kv("trees", self.trees.map_or_else(|| "auto".into(), |t| t.to_string()));
        kv("chains", self.chains.to_string());
        kv("iterations", self.iterations.to_string());
        kv("burn_in", self.burn_in.to_string());
        kv("thin", self.thin.to_string());
        kv("dispersion", self.dispersion.name().into());
        kv("phi_prior_a", self.phi_prior_a.to_string());
        kv("phi_prior_b", self.phi_prior_b.to_string());
        kv("phi", opt(&self.phi));
        kv("k", self.k.to_string());
        kv("seed", self.seed.to_string());
        kv("level", self.level.to_string());
        kv("save_trees", self.save_trees.to_string());
        kv("input", path(&self.input));
        kv("test", path(&self.test));
        kv("out", self.out.display().to_string());
        s
    }

    /// Applies the settings in `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let no = i + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse { line: no, message: format!("expected `key = value`, got `{line}`") })?;
            self.set(key.trim(), value.trim()).map_err(|message| Error::Parse { line: no, message })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = RunConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        fn num<T: FromStr>(key: &str, v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("bad value `{v}` for `{key}`"))
        }
        let none = v == "none";
        match key {
            "family" => self.family = v.parse()?,
            "kappa" => self.kappa = num(key, v)?,
            "estimate_kappa" => self.estimate_kappa = num(key, v)?,
            "kappa_bounds" => self.kappa_bounds = parse_bounds(v)?,
            "trees" => self.trees = if v == "auto" { None } else { Some(num(key, v)?) },
            "chains" => self.chains = num(key, v)?,
            "iterations" => self.iterations = num(key, v)?,
            "burn_in" => self.burn_in = num(key, v)?,
            "thin" => self.thin = num(key, v)?,
            "dispersion" => self.dispersion = parse_dispersion(v)?,
            "phi_prior_a" => self.phi_prior_a = num(key, v)?,
            "phi_prior_b" => self.phi_prior_b = num(key, v)?,
            "phi" => self.phi = if none { None } else { Some(num(key, v)?) },
            "k" => self.k = num(key, v)?,
            "seed" => self.seed = num(key, v)?,
            "level" => self.level = num(key, v)?,
            "save_trees" => self.save_trees = num(key, v)?,
            "input" => self.input = (!none).then(|| PathBuf::from(v)),
            "test" => self.test = (!none).then(|| PathBuf::from(v)),
            "out" => self.out = PathBuf::from(v),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// FNV-1a hash of the written form, recorded in outputs.
    pub fn hash(&self) -> String {
        qlbart::backfit::fnv1a_hex(self.to_text().as_bytes())
    }
}
