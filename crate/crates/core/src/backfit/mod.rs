//! Bayesian backfitting: MH tree updates with integrated leaves, leaf
//! draws, latent augmentation for categorical outcomes, and whole chains.

mod checkpoint;
mod leaf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use leaf::{
    conjugate_log_marginal, integrated_log_lik, leaf_log_marginal, leaf_stats, power_laplace_log_marginal,
    power_leaf_loglik, power_mode, sample_leaf, sample_leaves, LeafContext, LeafModel, LeafStats, Response,
};

use crate::data::Dataset;
use crate::dispersion::{sweep_update, DispersionConfig, DispersionMethod};
use crate::error::{Error, Result};
use crate::family::QuasiFamily;
use crate::forest::{
    propose_move, sample_alpha, sample_sigma_lambda, sample_split_probs, tree_log_prior, CutGrid, Ensemble,
    LeafDistribution, MoveKind, MoveProbs, TreePrior, DEFAULT_MAX_CUTS,
};
use crate::leaf_prior::LeafPrior;
use crate::random::log_gamma_variate;
use crate::summaries::{ChainDiagnostics, Draws};

/// Settings for one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub num_trees: usize,
    /// Total sweeps, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub tree_prior: TreePrior,
    pub move_probs: MoveProbs,
    /// k in the leaf scale 3/(k√T).
    pub k_scale: f64,
    /// Initial σ_λ; defaults to the half-Cauchy scale.
    pub sigma_lambda: Option<f64>,
    pub update_sigma_lambda: bool,
    pub update_split_probs: bool,
    pub alpha: f64,
    pub update_alpha: bool,
    pub max_cuts: usize,
    /// Slice passes after each Laplace leaf draw (power model).
    pub slice_passes: usize,
    pub dispersion: DispersionConfig,
    pub phi_init: Option<f64>,
    pub record_fits: bool,
    pub keep_ensembles: bool,
    /// Keep every tree at its current topology (leaves are still redrawn).
    pub freeze_topology: bool,
    /// Ignore the data in tree moves, so topologies follow the tree prior.
    pub sample_prior: bool,
}

impl SamplerConfig {
    /// Defaults: 200 trees for scalar families, 50 for categorical ones.
    pub fn for_family(family: &QuasiFamily) -> Self {
        SamplerConfig {
            num_trees: if family.is_categorical() { 50 } else { 200 },
            iterations: 2000,
            burn_in: 1000,
            thin: 1,
            tree_prior: TreePrior::default(),
            move_probs: MoveProbs::default(),
            k_scale: 2.0,
            sigma_lambda: None,
            update_sigma_lambda: true,
            update_split_probs: true,
            alpha: 1.0,
            update_alpha: false,
            max_cuts: DEFAULT_MAX_CUTS,
            slice_passes: 1,
            dispersion: DispersionConfig::default(),
            phi_init: None,
            record_fits: true,
            keep_ensembles: false,
            freeze_topology: false,
            sample_prior: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_trees == 0 {
            return Err(Error::Config("need at least one tree".into()));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning interval must be at least 1".into()));
        }
        if self.burn_in > self.iterations {
            return Err(Error::Config(format!(
                "burn-in ({}) exceeds total iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        let tp = &self.tree_prior;
        if !(tp.gamma > 0.0 && tp.gamma < 1.0) || !(tp.beta >= 0.0) {
            return Err(Error::Config("tree prior needs 0 < gamma < 1 and beta >= 0".into()));
        }
        if !(self.k_scale > 0.0) || !(self.alpha > 0.0) {
            return Err(Error::Config("k and alpha must be positive".into()));
        }
        if let Some(s) = self.sigma_lambda {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config("initial sigma_lambda must be positive".into()));
            }
        }
        if let Some(p) = self.phi_init {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::Config("initial phi must be positive".into()));
            }
        }
        let mp = &self.move_probs;
        if !(mp.grow > 0.0 && mp.prune > 0.0 && mp.change >= 0.0) {
            return Err(Error::Config("move probabilities must be positive".into()));
        }
        self.dispersion.validate()
    }

    /// Stable 64-bit FNV-1a hash of the configuration, hex encoded.
    pub fn hash(&self) -> String {
        fnv1a_hex(format!("{self:?}").as_bytes())
    }
}

pub fn fnv1a_hex(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    format!("{h:016x}")
}

/// Everything that changes during a chain.
#[derive(Debug, Clone)]
pub struct SamplerState {
    pub ensemble: Ensemble,
    /// Full ensemble fit r(X_i), N × leaf_dim.
    pub fit: Vec<f64>,
    pub phi: f64,
    pub kappa: f64,
    /// Categorical latents ξ_i (empty otherwise).
    pub xi: Vec<f64>,
    pub rng: ChaCha8Rng,
    pub seed: u64,
    pub sweeps: usize,
    pub diagnostics: ChainDiagnostics,
}

/// Sampler bound to a dataset and family.
pub struct Sampler<'a> {
    data: &'a Dataset,
    family: QuasiFamily,
    config: SamplerConfig,
    grid: CutGrid,
    resp: Response,
    sigma_scale: f64,
    zeta: Vec<f64>,
    ca: Vec<f64>,
    cb: Vec<f64>,
    assign: Vec<usize>,
    assign_prop: Vec<usize>,
    mu: Vec<f64>,
}

fn offset_for(family: &QuasiFamily, resp: &Response) -> Vec<f64> {
    let n = resp.n();
    let wsum: f64 = resp.w.iter().sum();
    match resp.model {
        LeafModel::Categorical { categories } => {
            let mut totals = vec![0.0; categories];
            for i in 0..n {
                for (c, t) in totals.iter_mut().enumerate() {
                    *t += resp.y[i * categories + c];
                }
            }
            let sum: f64 = totals.iter().sum();
            totals.iter().map(|&t| ((t + 0.5) / (sum + 0.5 * categories as f64)).ln()).collect()
        }
        _ => {
            let mean = resp.y.iter().zip(&resp.w).map(|(y, w)| y * w).sum::<f64>() / wsum;
            let m = mean.max(1e-8).ln();
            vec![if matches!(family, QuasiFamily::Gamma) { -m } else { m }]
        }
    }
}

impl<'a> Sampler<'a> {
    pub fn new(data: &'a Dataset, family: &QuasiFamily, config: &SamplerConfig) -> Result<Self> {
        config.validate()?;
        let resp = Response::new(data, family)?;
        let n = data.n();
        let k = resp.leaf_dim();
        Ok(Sampler {
            data,
            family: *family,
            config: config.clone(),
            grid: CutGrid::from_dataset(data, config.max_cuts),
            resp,
            sigma_scale: LeafPrior::default_sigma(config.k_scale, config.num_trees, family.is_categorical()),
            zeta: vec![0.0; n * k],
            ca: vec![0.0; n * k],
            cb: vec![0.0; n * k],
            assign: Vec::with_capacity(n),
            assign_prop: Vec::with_capacity(n),
            mu: vec![0.0; n * family.outcome_dim()],
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn grid(&self) -> &CutGrid {
        &self.grid
    }

    /// Half-Cauchy scale of σ_λ.
    pub fn sigma_scale(&self) -> f64 {
        self.sigma_scale
    }

    fn leaf_distribution(&self) -> LeafDistribution {
        match self.family {
            QuasiFamily::Power { .. } => LeafDistribution::Normal,
            _ => LeafDistribution::LogGamma,
        }
    }

    /// Stumps at the data-mean offset, φ at its initial value.
    pub fn init_state(&self, seed: u64) -> SamplerState {
        let k = self.resp.leaf_dim();
        let n = self.data.n();
        let mut ensemble = Ensemble::new(
            self.config.num_trees,
            k,
            self.data.p(),
            self.config.sigma_lambda.unwrap_or(self.sigma_scale),
            self.config.tree_prior,
        );
        ensemble.alpha = self.config.alpha;
        ensemble.offset = offset_for(&self.family, &self.resp);
        let fit: Vec<f64> = (0..n).flat_map(|_| ensemble.offset.clone()).collect();
        let xi = if self.family.is_categorical() {
            (0..n)
                .map(|i| 1.0 / fit[i * k..(i + 1) * k].iter().map(|r| r.exp()).sum::<f64>())
                .collect()
        } else {
            Vec::new()
        };
        SamplerState {
            ensemble,
            fit,
            phi: self.config.phi_init.unwrap_or(1.0),
            kappa: self.family.kappa().unwrap_or(1.0),
            xi,
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            sweeps: 0,
            diagnostics: ChainDiagnostics::default(),
        }
    }

    /// Family with the state's current κ.
    pub fn current_family(&self, state: &SamplerState) -> QuasiFamily {
        self.family.with_kappa(state.kappa)
    }

    /// ξ_i ~ Gam(n_i/φ, Σ_k e^{r_ik}).
    pub fn sample_xi(&self, state: &mut SamplerState) {
        let k = self.resp.leaf_dim();
        for i in 0..self.data.n() {
            let r = &state.fit[i * k..(i + 1) * k];
            let m = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + r.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
            let shape = self.resp.w[i] / state.phi;
            state.xi[i] = (log_gamma_variate(shape, &mut state.rng) - lse).exp();
        }
    }

    /// One MH update of tree `t` followed by a leaf redraw. Returns whether
    /// the proposal was accepted.
    pub fn update_tree(&mut self, state: &mut SamplerState, t: usize, prior: &LeafPrior) -> bool {
        let k = self.resp.leaf_dim();
        let n = self.data.n();
        {
            let tree = &state.ensemble.trees[t];
            for i in 0..n {
                let v = tree.predict(self.data.row(i));
                for c in 0..k {
                    self.zeta[i * k + c] = state.fit[i * k + c] - v[c];
                }
            }
        }
        self.resp.model = LeafModel::from_family(&self.current_family(state));
        self.resp.contributions(&self.zeta, state.phi, &state.xi, &mut self.ca, &mut self.cb);
        let ctx = LeafContext {
            model: self.resp.model,
            prior,
            phi: state.phi,
            slice_passes: self.config.slice_passes,
        };
        let mut stats = LeafStats::accumulate(&state.ensemble.trees[t], self.data, &self.ca, &self.cb, &mut self.assign);
        let mut accepted = false;
        if !self.config.freeze_topology {
            let proposal = propose_move(
                &state.ensemble.trees[t],
                &self.config.tree_prior,
                &state.ensemble.split_probs,
                &self.grid,
                &self.config.move_probs,
                &mut state.rng,
            );
            if let Some(prop) = proposal {
                let kind = match prop.spec.kind() {
                    MoveKind::Grow => 0,
                    MoveKind::Prune => 1,
                    MoveKind::Change => 2,
                };
                state.diagnostics.proposed[kind] += 1;
                let prop_stats = LeafStats::accumulate(&prop.tree, self.data, &self.ca, &self.cb, &mut self.assign_prop);
                let (ll_cur, ll_prop) = if self.config.sample_prior {
                    (0.0, 0.0)
                } else {
                    (
                        integrated_log_lik(&ctx, &state.ensemble.trees[t], &stats).0,
                        integrated_log_lik(&ctx, &prop.tree, &prop_stats).0,
                    )
                };
                let s = &state.ensemble.split_probs;
                let lp_cur = tree_log_prior(&state.ensemble.trees[t], &self.config.tree_prior, s, &self.grid);
                let lp_prop = tree_log_prior(&prop.tree, &self.config.tree_prior, s, &self.grid);
                let log_alpha = ll_prop - ll_cur + lp_prop - lp_cur + prop.log_ratio;
                if state.rng.random::<f64>().ln() < log_alpha {
                    state.ensemble.trees[t] = prop.tree;
                    stats = prop_stats;
                    std::mem::swap(&mut self.assign, &mut self.assign_prop);
                    state.diagnostics.accepted[kind] += 1;
                    accepted = true;
                }
            }
        }
        if let LeafModel::Power { .. } = ctx.model {
            state.diagnostics.fallback_leaves += integrated_log_lik(&ctx, &state.ensemble.trees[t], &stats).1;
        }
        let tree = &mut state.ensemble.trees[t];
        sample_leaves(&ctx, tree, &stats, &mut state.rng);
        for i in 0..n {
            let v = tree.leaf_value(self.assign[i]);
            for c in 0..k {
                state.fit[i * k + c] = self.zeta[i * k + c] + v[c];
            }
        }
        accepted
    }

    /// Means μ(X_i) from the current fit, N × outcome_dim.
    pub fn fitted_mu(&self, state: &SamplerState) -> Vec<f64> {
        let fam = self.current_family(state);
        let k = self.resp.leaf_dim();
        let d = fam.outcome_dim();
        let mut mu = vec![0.0; self.data.n() * d];
        for i in 0..self.data.n() {
            fam.mean_from_fit(&state.fit[i * k..(i + 1) * k], &mut mu[i * d..(i + 1) * d]);
        }
        mu
    }

    /// One full backfitting sweep.
    pub fn sweep(&mut self, state: &mut SamplerState) -> Result<()> {
        leaf::check_phi(state.phi)?;
        if self.family.is_categorical() {
            self.sample_xi(state);
        }
        let prior = self.leaf_prior(state)?;
        for t in 0..state.ensemble.trees.len() {
            self.update_tree(state, t, &prior);
        }
        if self.config.update_sigma_lambda {
            let leaves = state.ensemble.leaf_values();
            state.ensemble.sigma_lambda = sample_sigma_lambda(
                &leaves,
                state.ensemble.sigma_lambda,
                self.sigma_scale,
                self.leaf_distribution(),
                &mut state.rng,
            );
        }
        if self.config.update_split_probs {
            let counts = state.ensemble.split_counts();
            state.ensemble.split_probs = sample_split_probs(&counts, state.ensemble.alpha, &mut state.rng);
            if self.config.update_alpha {
                state.ensemble.alpha = sample_alpha(&state.ensemble.split_probs, &mut state.rng);
            }
        }
        if !matches!(self.config.dispersion.method, DispersionMethod::Fixed | DispersionMethod::PseudoEb) {
            let fam = self.current_family(state);
            let d = fam.outcome_dim();
            let k = self.resp.leaf_dim();
            for i in 0..self.data.n() {
                fam.mean_from_fit(&state.fit[i * k..(i + 1) * k], &mut self.mu[i * d..(i + 1) * d]);
            }
            let step = sweep_update(
                &self.config.dispersion,
                &fam,
                self.data,
                &self.mu,
                state.phi,
                state.kappa,
                &mut state.rng,
            )?;
            state.phi = step.phi;
            state.kappa = step.kappa;
            state.diagnostics.degenerate_dispersion += step.degenerate as usize;
        }
        state.sweeps += 1;
        Ok(())
    }

    /// Checks that a (possibly restored) state fits this dataset.
    pub fn check_state(&self, state: &SamplerState) -> Result<()> {
        let k = self.resp.leaf_dim();
        let n = self.data.n();
        let xi_len = if self.family.is_categorical() { n } else { 0 };
        if state.fit.len() != n * k || state.xi.len() != xi_len || state.ensemble.leaf_dim() != k {
            return Err(Error::Config("sampler state does not match the dataset and family".into()));
        }
        if state.ensemble.num_features() != self.data.p() || state.ensemble.trees.len() != self.config.num_trees {
            return Err(Error::Config("checkpoint ensemble does not match the configuration".into()));
        }
        Ok(())
    }

    fn leaf_prior(&self, state: &SamplerState) -> Result<LeafPrior> {
        LeafPrior::with_scale(state.ensemble.sigma_lambda, self.config.k_scale)
    }

    /// Recomputes r(X_i) from the ensemble, for coherence checks.
    pub fn recompute_fit(&self, state: &SamplerState) -> Vec<f64> {
        let k = self.resp.leaf_dim();
        let mut out = vec![0.0; self.data.n() * k];
        for i in 0..self.data.n() {
            state.ensemble.predict_into(self.data.row(i), &mut out[i * k..(i + 1) * k]);
        }
        out
    }

    /// Means at new covariate rows (M × P row-major).
    pub fn predict_mu(&self, state: &SamplerState, x: &[f64]) -> Vec<f64> {
        predict_mu(&state.ensemble, &self.current_family(state), x, self.data.p())
    }
}

/// μ(x) for each row of `x` (M × `p` row-major) under `ensemble`.
pub fn predict_mu(ensemble: &Ensemble, family: &QuasiFamily, x: &[f64], p: usize) -> Vec<f64> {
    let k = ensemble.leaf_dim();
    let d = family.outcome_dim();
    let m = if p == 0 { 0 } else { x.len() / p };
    let mut r = vec![0.0; k];
    let mut mu = vec![0.0; m * d];
    for i in 0..m {
        ensemble.predict_into(&x[i * p..(i + 1) * p], &mut r);
        family.mean_from_fit(&r, &mut mu[i * d..(i + 1) * d]);
    }
    mu
}

/// One sweep on an existing sampler and state.
pub fn gibbs_sweep(sampler: &mut Sampler, state: &mut SamplerState) -> Result<()> {
    sampler.sweep(state)
}

fn record(sampler: &Sampler, state: &SamplerState, draws: &mut Draws, test_x: Option<&[f64]>) {
    draws.iteration.push(state.sweeps);
    draws.phi.push(state.phi);
    draws.kappa.push(state.kappa);
    draws.sigma_lambda.push(state.ensemble.sigma_lambda);
    draws.split_counts.push(state.ensemble.split_counts());
    if sampler.config.record_fits {
        draws.fitted_mu.push(sampler.fitted_mu(state));
        draws.r_fitted.push(state.fit.clone());
        if let Some(x) = test_x {
            draws.test_mu.push(sampler.predict_mu(state, x));
        }
    }
    if sampler.config.keep_ensembles {
        draws.ensembles.push(state.ensemble.clone());
    }
}

/// Runs burn-in plus retained sweeps and returns the retained draws.
pub fn run_chain(data: &Dataset, family: &QuasiFamily, config: &SamplerConfig, seed: u64) -> Result<Draws> {
    run_chain_with_test(data, family, config, seed, None)
}

/// As `run_chain`, also recording μ at test rows (M × P row-major). With
/// pseudo-empirical-Bayes dispersion, (φ, κ) are estimated first and the
/// returned chain runs at the estimate.
pub fn run_chain_with_test(
    data: &Dataset,
    family: &QuasiFamily,
    config: &SamplerConfig,
    seed: u64,
    test_x: Option<&[f64]>,
) -> Result<Draws> {
    if config.dispersion.method == DispersionMethod::PseudoEb {
        config.validate()?;
        let eb = crate::dispersion::pseudo_eb(data, family, config, seed)?;
        let mut cfg = config.clone();
        cfg.dispersion.method = DispersionMethod::Fixed;
        cfg.phi_init = Some(eb.phi);
        return run_chain_with_test(data, &family.with_kappa(eb.kappa), &cfg, seed, test_x);
    }
    let mut sampler = Sampler::new(data, family, config)?;
    if let Some(x) = test_x {
        if x.len() % data.p().max(1) != 0 {
            return Err(Error::Config("test covariates do not have P columns".into()));
        }
    }
    let mut state = sampler.init_state(seed);
    continue_chain(&mut sampler, &mut state, test_x)
}

/// Runs the remaining sweeps of a chain from `state` (which may come from a
/// checkpoint).
pub fn continue_chain(sampler: &mut Sampler, state: &mut SamplerState, test_x: Option<&[f64]>) -> Result<Draws> {
    sampler.check_state(state)?;
    let cfg = sampler.config.clone();
    let mut draws = Draws {
        seed: state.seed,
        config_hash: cfg.hash(),
        n_train: sampler.data.n(),
        n_test: test_x.map_or(0, |x| x.len() / sampler.data.p().max(1)),
        outcome_dim: sampler.family.outcome_dim(),
        leaf_dim: sampler.resp.leaf_dim(),
        feature_names: sampler.data.feature_names().to_vec(),
        ..Draws::default()
    };
    while state.sweeps < cfg.iterations {
        sampler.sweep(state)?;
        let s = state.sweeps - 1;
        if s >= cfg.burn_in && (s - cfg.burn_in) % cfg.thin == 0 {
            record(sampler, state, &mut draws, test_x);
        }
    }
    draws.diagnostics = state.diagnostics.clone();
    Ok(draws)
}
