use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::dist::{sample_gamma, sample_inv_wishart, sample_truncated_unit_normal, standard_normal_vec};
use super::lambda::LambdaTarget;
use super::steps::{self, log_psi, mh_center_step, sample_log_categorical};
use super::trace::{Acceptance, ChainTrace, Counter, SamplerConfig, TraceRecord, MALA_TARGET_ACCEPT, MU_TARGET_ACCEPT};
use crate::dpp::{birth_death_step, KernelMatrix, SpectralTable};
use crate::error::{Error, Result};
use crate::linalg::cholesky_jitter;
use crate::lowrank::{DiagCov, SharedLoadings};
use crate::model::{init_state, Component, Hyperparams, Mode, ModelState, Partition};

/// Gain `(1 + t / TUNE_HALF)^(-TUNE_DECAY)` of the burn-in step adaptation
/// `log s += gain (rate - target)` after sweep `t`.
const TUNE_HALF: f64 = 50.0;
const TUNE_DECAY: f64 = 0.6;

/// Blocked Gibbs sampler for one chain.
///
/// Besides the model state it caches the spectral table at the current `Λ`
/// and the DPP kernel matrix of all centers mapped into the unit cube,
/// allocated centers first and in the same order as `state.allocated`.
#[derive(Debug, Clone)]
pub struct Sampler {
    hyper: Hyperparams,
    config: SamplerConfig,
    mode: Mode,
    state: ModelState,
    /// Observations (n × p); latent Gaussians in binary mode.
    y: DMatrix<f64>,
    /// Binary observations, in binary mode only.
    z: Option<DMatrix<f64>>,
    table: SpectralTable,
    km: KernelMatrix,
    mala_step: f64,
    mu_step_frac: f64,
    acceptance: Acceptance,
    loglik: Vec<f64>,
}

impl Sampler {
    /// Initialize from data. In binary mode `data` must be 0/1 valued.
    pub fn new<R: Rng + ?Sized>(
        data: &DMatrix<f64>,
        hyper: Hyperparams,
        config: SamplerConfig,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let (y, z) = match mode {
            Mode::Continuous => (data.clone(), None),
            Mode::Binary => {
                if data.iter().any(|v| *v != 0.0 && *v != 1.0) {
                    return Err(Error::InvalidParameter("binary mode needs 0/1 data".into()));
                }
                let y = data.map(|v| sample_truncated_unit_normal(0.0, v > 0.5, rng));
                (y, Some(data.clone()))
            }
        };
        let state = init_state(&y, &hyper, mode, config.init_loadings, rng)?;
        Self::from_state(state, y, z, hyper, config, mode)
    }

    /// Wrap an existing state. `y` is the (latent) Gaussian data.
    pub fn from_state(
        state: ModelState,
        y: DMatrix<f64>,
        z: Option<DMatrix<f64>>,
        hyper: Hyperparams,
        config: SamplerConfig,
        mode: Mode,
    ) -> Result<Self> {
        config.validate()?;
        hyper.validate()?;
        if y.shape() != (state.n(), state.p()) {
            return Err(Error::Dimension("data shape disagrees with the state".into()));
        }
        if (mode == Mode::Binary) != z.is_some() {
            return Err(Error::InvalidParameter("binary data must be given exactly in binary mode".into()));
        }
        state.check_invariants(&hyper)?;
        let table = SpectralTable::build(&hyper.dpp, &state.lambda)?;
        let km = KernelMatrix::new(&table, Vec::new());
        let (mala_step, mu_step_frac) = (config.mala_step, config.mu_step_frac);
        let mut s = Self {
            hyper,
            config,
            mode,
            state,
            y,
            z,
            table,
            km,
            mala_step,
            mu_step_frac,
            acceptance: Acceptance::default(),
            loglik: Vec::new(),
        };
        s.rebuild_kernel();
        Ok(s)
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn table(&self) -> &SpectralTable {
        &self.table
    }

    pub fn kernel_matrix(&self) -> &KernelMatrix {
        &self.km
    }

    pub fn mala_step(&self) -> f64 {
        self.mala_step
    }

    pub fn set_mala_step(&mut self, step: f64) {
        self.mala_step = step;
    }

    pub fn mu_step_frac(&self) -> f64 {
        self.mu_step_frac
    }

    pub fn set_mu_step_frac(&mut self, frac: f64) {
        self.mu_step_frac = frac;
    }

    pub fn acceptance(&self) -> &Acceptance {
        &self.acceptance
    }

    pub fn reset_acceptance(&mut self) {
        self.acceptance = Acceptance::default();
    }

    /// Per-observation log-likelihood of the last sweep: the mixture density
    /// in continuous mode, the probit likelihood of the signs in binary mode.
    pub fn loglik(&self) -> &[f64] {
        &self.loglik
    }

    /// Replace the (continuous) data, keeping the state.
    pub fn set_data(&mut self, y: DMatrix<f64>) -> Result<()> {
        if y.shape() != self.y.shape() {
            return Err(Error::Dimension("replacement data has a different shape".into()));
        }
        self.y = y;
        Ok(())
    }

    /// Replace the state and rebuild the cached DPP pieces.
    pub fn set_state(&mut self, state: ModelState) -> Result<()> {
        state.check_invariants(&self.hyper)?;
        self.table = SpectralTable::build(&self.hyper.dpp, &state.lambda)?;
        self.state = state;
        self.rebuild_kernel();
        Ok(())
    }

    fn rebuild_kernel(&mut self) {
        let region = &self.hyper.dpp.region;
        let pts = self.state.centers().map(|m| region.to_unit(m)).collect();
        self.km = KernelMatrix::new(&self.table, pts);
    }

    fn draw_delta<R: Rng + ?Sized>(&self, nu: f64, psi: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
        match self.mode {
            Mode::Continuous => sample_inv_wishart(nu, psi, rng),
            Mode::Binary => Ok(DMatrix::identity(psi.nrows(), psi.nrows())),
        }
    }

    /// Dirichlet-Laplace shrinkage parameters.
    pub fn update_shrinkage<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let s = &mut self.state;
        steps::update_shrinkage(&s.lambda, &mut s.psi, &mut s.phi, &mut s.tau, self.hyper.a_dl, rng);
    }

    /// Row-wise Cholesky factors `L_j` of `P_j = ηᵀη / σ²_j + diag(1 / v_j)`,
    /// the Gaussian part of the conditional precision of row `j` of `Λ`,
    /// where `v` holds the shrinkage prior variances.
    fn row_precisions(&self) -> Result<Vec<DMatrix<f64>>> {
        let s = &self.state;
        let ete = s.eta.tr_mul(&s.eta);
        let tau2 = s.tau * s.tau;
        (0..s.p())
            .map(|j| {
                let mut prec = &ete / s.sigma2[j];
                for h in 0..s.d() {
                    prec[(h, h)] += 1.0 / (s.psi[(j, h)] * s.phi[(j, h)].powi(2) * tau2);
                }
                Ok(cholesky_jitter(&prec, "loadings row precision")?.unpack())
            })
            .collect()
    }

    /// One MALA move on `Λ`. Proposals that are rank deficient, violate DPP
    /// existence or whose gradient cannot be formed are rejected.
    ///
    /// With preconditioning the proposal is `Λ' = Λ + s²/2 M∇ + s M^{1/2}ξ`
    /// with `M = P⁻¹` applied row by row; `M` does not depend on `Λ`, so the
    /// proposal stays a valid Langevin kernel.
    pub fn update_lambda_mala<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let reject = |me: &mut Self| {
            me.acceptance.mala_invalid += 1;
            me.acceptance.mala.record(false);
            false
        };
        let chols = if self.config.mala_precondition {
            match self.row_precisions() {
                Ok(c) => Some(c),
                Err(_) => return reject(self),
            }
        } else {
            None
        };
        let s = &self.state;
        let points = self.km.points().to_vec();
        let target = LambdaTarget::new(&self.y, &s.eta, &s.sigma2, &s.psi, &s.phi, s.tau, &self.hyper.dpp, &points);
        let lambda = &s.lambda;
        let h = self.mala_step;
        let h2 = h * h;

        // Apply M (or M^{1/2}) to a p × d matrix row by row.
        let apply = |g: &DMatrix<f64>, half: bool| -> DMatrix<f64> {
            let Some(chols) = &chols else { return g.clone() };
            let mut out = g.clone();
            for (j, l) in chols.iter().enumerate() {
                let row = g.row(j).transpose();
                let y = if half {
                    l.tr_solve_lower_triangular(&row)
                } else {
                    l.solve_lower_triangular(&row).and_then(|z| l.tr_solve_lower_triangular(&z))
                };
                out.set_row(j, &y.expect("positive Cholesky diagonal").transpose());
            }
            out
        };
        // ‖Lᵀ r‖² per row, the quadratic form of M⁻¹ = P.
        let prec_norm = |r: &DMatrix<f64>| -> f64 {
            match &chols {
                None => r.norm_squared(),
                Some(chols) => chols.iter().enumerate().map(|(j, l)| l.tr_mul(&r.row(j).transpose()).norm_squared()).sum(),
            }
        };

        let current = target.log_value_with(lambda, &self.table, &self.km);
        let grad = match target.gradient(lambda, &self.table, &self.km) {
            Ok(g) if current.is_finite() => g,
            _ => return reject(self),
        };
        let drift = apply(&grad, false);
        let xi = standard_normal_vec(lambda.len(), rng);
        let noise = DMatrix::from_column_slice(lambda.nrows(), lambda.ncols(), xi.as_slice());
        let prop = lambda + &drift * (0.5 * h2) + apply(&noise, true) * h;

        let eval = target.evaluate(&prop).and_then(|e| {
            let g = target.gradient(&prop, &e.table, &e.km)?;
            Ok((e, g))
        });
        let (eval, grad_prop) = match eval {
            Ok(v) if v.0.log_target.is_finite() => v,
            _ => return reject(self),
        };
        let drift_prop = apply(&grad_prop, false);
        let log_q = |to: &DMatrix<f64>, from: &DMatrix<f64>, drift: &DMatrix<f64>| {
            -prec_norm(&(to - from - drift * (0.5 * h2))) / (2.0 * h2)
        };
        let log_ratio = eval.log_target - current + log_q(lambda, &prop, &drift_prop) - log_q(&prop, lambda, &drift);
        let accepted = rng.gen::<f64>().ln() < log_ratio;
        if accepted {
            self.state.lambda = prop;
            self.table = eval.table;
            self.km = eval.km;
        }
        self.acceptance.mala.record(accepted);
        accepted
    }

    /// Idiosyncratic variances; a no-op in binary mode where `Σ = I`.
    pub fn update_sigma<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.mode == Mode::Binary {
            return;
        }
        let s = &mut self.state;
        steps::update_sigma(&self.y, &s.lambda, &s.eta, self.hyper.a_sigma, self.hyper.b_sigma, &mut s.sigma2, rng);
    }

    /// Birth-death moves on the non-allocated centers, then fresh weights
    /// and covariances for every non-allocated component.
    pub fn update_nonallocated<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let k = self.state.allocated.len();
        let lp = log_psi(self.hyper.alpha, self.state.u);
        for _ in 0..self.config.bd_steps_per_sweep {
            let accepted = birth_death_step(&self.table, &mut self.km, k, lp, rng);
            self.acceptance.birth_death.record(accepted);
        }
        let region = &self.hyper.dpp.region;
        let rate = 1.0 + self.state.u;
        let mut non_allocated = Vec::with_capacity(self.km.len() - k);
        for x in &self.km.points()[k..] {
            let mu = region.clamp(&region.from_unit(x));
            let s = sample_gamma(self.hyper.alpha, rate, rng);
            let delta = self.draw_delta(self.hyper.nu0, &self.hyper.psi0, rng)?;
            non_allocated.push(Component { mu, s, delta });
        }
        self.state.non_allocated = non_allocated;
        Ok(())
    }

    /// Weights, covariances and centers of the allocated components.
    pub fn update_allocated<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let k = self.state.allocated.len();
        let d = self.state.d();
        let mut counts = vec![0usize; k];
        let mut sums = vec![DVector::<f64>::zeros(d); k];
        for (i, &c) in self.state.alloc.iter().enumerate() {
            counts[c] += 1;
            sums[c] += self.state.eta.row(i).transpose();
        }
        let region = self.hyper.dpp.region.clone();
        let step = region.widths() * self.mu_step_frac;
        let rate = 1.0 + self.state.u;
        for h in 0..k {
            let n_h = counts[h];
            let mu = self.state.allocated[h].mu.clone();
            let s = sample_gamma(self.hyper.alpha + n_h as f64, rate, rng);
            let delta = match self.mode {
                Mode::Continuous => {
                    let mut scatter = self.hyper.psi0.clone();
                    for (i, &c) in self.state.alloc.iter().enumerate() {
                        if c == h {
                            let r = self.state.eta.row(i).transpose() - &mu;
                            scatter += &r * r.transpose();
                        }
                    }
                    sample_inv_wishart(self.hyper.nu0 + n_h as f64, &scatter, rng)?
                }
                Mode::Binary => DMatrix::identity(d, d),
            };
            let delta_inv = cholesky_jitter(&delta, "component covariance")?.inverse();
            let eta_mean = &sums[h] / n_h as f64;
            let km = &self.km;
            let table = &self.table;
            let current = km.log_det();
            let mut proposed_km = None;
            let moved = mh_center_step(&mu, n_h, &eta_mean, &delta_inv, &step, &region, |x| {
                let cand = km.with_replaced(table, h, region.to_unit(x));
                let ratio = cand.log_det() - current;
                proposed_km = Some(cand);
                ratio
            }, rng);
            self.acceptance.mu.record(moved.is_some());
            let comp = &mut self.state.allocated[h];
            comp.s = s;
            comp.delta = delta;
            if let Some(new_mu) = moved {
                comp.mu = new_mu;
                self.km = proposed_km.expect("candidate kernel matrix was built");
            }
        }
        Ok(())
    }

    /// Allocation variables with the scores marginalized out, followed by
    /// relabeling so that occupied components come first.
    pub fn update_allocations<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let s = &self.state;
        let shared = Arc::new(SharedLoadings::new(&DiagCov::new(s.sigma2.clone())?, &s.lambda));
        let comps: Vec<&Component> = s.allocated.iter().chain(s.non_allocated.iter()).collect();
        let gram = shared.gram();
        let mut factors = Vec::with_capacity(comps.len());
        let mut gmu = Vec::with_capacity(comps.len());
        let mut mgm = Vec::with_capacity(comps.len());
        let mut log_s = Vec::with_capacity(comps.len());
        for c in &comps {
            factors.push(shared.factor(&c.delta)?);
            let g = gram * &c.mu;
            mgm.push(c.mu.dot(&g));
            gmu.push(g);
            log_s.push(c.s.ln());
        }
        let log_total = comps.iter().map(|c| c.s).sum::<f64>().ln();

        let n = s.n();
        let mut new_alloc = Vec::with_capacity(n);
        let mut loglik = Vec::with_capacity(n);
        let mut log_w = vec![0.0; comps.len()];
        for i in 0..n {
            let yi = self.y.row(i).transpose();
            let b = shared.project(&yi);
            let yq = shared.weighted_norm2(&yi);
            for h in 0..comps.len() {
                let diag_quad = yq - 2.0 * comps[h].mu.dot(&b) + mgm[h];
                let proj = &b - &gmu[h];
                log_w[h] = log_s[h] + factors[h].logpdf_from_projection(diag_quad, &proj);
            }
            let (pick, lse) = sample_log_categorical(&log_w, rng)?;
            new_alloc.push(pick);
            loglik.push(lse - log_total);
        }
        self.loglik = loglik;
        self.apply_allocation(new_alloc);
        Ok(())
    }

    /// Install allocations indexing the concatenated component list and move
    /// components between the allocated and non-allocated blocks.
    fn apply_allocation(&mut self, raw: Vec<usize>) {
        let total = self.state.m_total();
        let mut counts = vec![0usize; total];
        for &c in &raw {
            counts[c] += 1;
        }
        let order: Vec<usize> = (0..total).filter(|&h| counts[h] > 0).chain((0..total).filter(|&h| counts[h] == 0)).collect();
        let k_new = counts.iter().filter(|&&c| c > 0).count();
        let mut new_index = vec![0usize; total];
        for (pos, &h) in order.iter().enumerate() {
            new_index[h] = pos;
        }
        self.state.alloc = raw.into_iter().map(|c| new_index[c]).collect();
        if order.iter().enumerate().all(|(pos, &h)| pos == h) && k_new == self.state.allocated.len() {
            return;
        }
        let mut all: Vec<Option<Component>> = self
            .state
            .allocated
            .drain(..)
            .chain(self.state.non_allocated.drain(..))
            .map(Some)
            .collect();
        let mut comps: Vec<Component> = order.iter().map(|&h| all[h].take().expect("each component moved once")).collect();
        self.state.non_allocated = comps.split_off(k_new);
        self.state.allocated = comps;
        self.km = self.km.permuted(&order);
    }

    /// The auxiliary variable `u ~ Gamma(n, T)` with `T` the sum of all weights.
    pub fn update_u<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let total: f64 = self.state.allocated.iter().chain(self.state.non_allocated.iter()).map(|c| c.s).sum();
        self.state.u = sample_gamma(self.state.n() as f64, total, rng);
    }

    pub fn update_eta<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        let s = &mut self.state;
        let shared = SharedLoadings::new(&DiagCov::new(s.sigma2.clone())?, &s.lambda);
        let mut b = DMatrix::zeros(s.n(), s.d());
        for i in 0..s.n() {
            b.set_row(i, &shared.project(&self.y.row(i).transpose()).transpose());
        }
        let centers: Vec<&DVector<f64>> = s.allocated.iter().map(|c| &c.mu).collect();
        let deltas: Vec<&DMatrix<f64>> = s.allocated.iter().map(|c| &c.delta).collect();
        steps::update_eta(shared.gram(), &b, &s.alloc, &centers, &deltas, &mut s.eta, rng)
    }

    /// Refresh the latent Gaussians and, since WAIC must score the observed
    /// signs rather than the latent values, replace the recorded
    /// log-likelihood with the probit one.
    pub fn update_latent_binary<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if let Some(z) = &self.z {
            steps::update_latent_binary(z, &self.state.lambda, &self.state.eta, &mut self.y, rng);
            self.loglik = steps::binary_loglik(z, &self.state.lambda, &self.state.eta);
        }
    }

    /// One full sweep in the fixed scan order.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<()> {
        self.update_shrinkage(rng);
        self.update_lambda_mala(rng);
        self.update_sigma(rng);
        self.update_nonallocated(rng)?;
        self.update_allocated(rng)?;
        self.update_allocations(rng)?;
        self.update_u(rng);
        self.update_eta(rng)?;
        self.update_latent_binary(rng);
        #[cfg(debug_assertions)]
        self.state.check_invariants(&self.hyper)?;
        Ok(())
    }

    /// Burn-in (adapting the MALA step if configured) followed by the saved
    /// phase. Counters in the trace cover the saved phase only.
    pub fn run<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<ChainTrace> {
        let wrap = |iter: usize| move |e: Error| Error::Sampler { iter, source: Box::new(e) };
        for it in 0..self.config.n_burn {
            let before = self.acceptance;
            self.sweep(rng).map_err(wrap(it + 1))?;
            let gain = (1.0 + it as f64 / TUNE_HALF).powf(-TUNE_DECAY);
            let rate = |now: Counter, then: Counter| {
                let proposed = now.proposed - then.proposed;
                (proposed > 0).then(|| (now.accepted - then.accepted) as f64 / proposed as f64)
            };
            if self.config.tune_mala {
                if let Some(r) = rate(self.acceptance.mala, before.mala) {
                    self.mala_step *= (gain * (r - MALA_TARGET_ACCEPT)).exp();
                }
            }
            if self.config.tune_mu {
                if let Some(r) = rate(self.acceptance.mu, before.mu) {
                    self.mu_step_frac *= (gain * (r - MU_TARGET_ACCEPT)).exp();
                }
            }
        }
        self.reset_acceptance();
        let mut trace = ChainTrace { mala_step: self.mala_step, mu_step_frac: self.mu_step_frac, ..Default::default() };
        let thin = self.config.thin;
        for t in 0..self.config.n_save {
            let iter = self.config.n_burn + t + 1;
            self.sweep(rng).map_err(wrap(iter))?;
            if (t + 1) % thin == 0 {
                trace.records.push(TraceRecord {
                    iter,
                    n_clusters: self.state.n_clusters(),
                    m_total: self.state.m_total(),
                    accept_mala: self.acceptance.mala.rate(),
                    labels: Partition::from_labels(&self.state.alloc).labels().to_vec(),
                    loglik: self.loglik.clone(),
                });
            }
        }
        trace.acceptance = self.acceptance;
        Ok(trace)
    }
}

/// Initialize a sampler from `data` and run it.
pub fn run_chain<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    hyper: &Hyperparams,
    config: &SamplerConfig,
    mode: Mode,
    rng: &mut R,
) -> Result<ChainTrace> {
    if config.n_save == 0 && config.n_burn == 0 {
        config.validate()?;
        return Ok(ChainTrace { mala_step: config.mala_step, mu_step_frac: config.mu_step_frac, ..Default::default() });
    }
    let mut sampler = Sampler::new(data, hyper.clone(), config.clone(), mode, rng)?;
    sampler.run(rng)
}
