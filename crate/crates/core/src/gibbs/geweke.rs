//! Joint-distribution check of the sampler: marginal-conditional draws from
//! the prior against a successive-conditional chain that alternates a Gibbs
//! sweep with a fresh draw of the data given the parameters.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::dist::{sample_gamma, sample_inv_gamma, sample_inv_wishart, standard_normal_vec};
use super::{Sampler, SamplerConfig};
use crate::dpp::sample_prior;
use crate::error::Result;
use crate::linalg::cholesky_jitter;
use crate::model::prep::full_rank_dl_draw;
use crate::model::{Component, Hyperparams, Mode, ModelState};

/// Scalar summaries compared between the two samplers.
pub const STATISTICS: [&str; 4] = ["tau", "sigma2_1", "m_total", "n_clusters"];

fn statistics(state: &ModelState) -> [f64; 4] {
    [state.tau, state.sigma2[0], state.m_total() as f64, state.n_clusters() as f64]
}

/// One draw of every parameter and of `n` continuous observations from the
/// joint prior. The centers follow the DPP conditioned on at least one point.
pub fn sample_joint<R: Rng + ?Sized>(n: usize, p: usize, hyper: &Hyperparams, rng: &mut R) -> Result<(ModelState, DMatrix<f64>)> {
    let d = hyper.d();
    let dl = full_rank_dl_draw(p, d, hyper.a_dl, rng)?;
    let sigma2 = DVector::from_fn(p, |_, _| sample_inv_gamma(hyper.a_sigma, hyper.b_sigma, rng));

    let centers = sample_prior(&hyper.dpp, &dl.lambda, rng)?.into_points();
    let comps = centers
        .into_iter()
        .map(|mu| {
            let s = sample_gamma(hyper.alpha, 1.0, rng);
            let delta = sample_inv_wishart(hyper.nu0, &hyper.psi0, rng)?;
            Ok(Component { mu, s, delta })
        })
        .collect::<Result<Vec<_>>>()?;

    let total: f64 = comps.iter().map(|c| c.s).sum();
    let raw: Vec<usize> = (0..n)
        .map(|_| {
            let mut target = rng.gen::<f64>() * total;
            for (h, c) in comps.iter().enumerate() {
                if target < c.s {
                    return h;
                }
                target -= c.s;
            }
            comps.len() - 1
        })
        .collect();

    // Occupied components first, in order of first appearance.
    let mut index = vec![usize::MAX; comps.len()];
    let mut order = Vec::with_capacity(comps.len());
    for &c in &raw {
        if index[c] == usize::MAX {
            index[c] = order.len();
            order.push(c);
        }
    }
    let k = order.len();
    order.extend((0..comps.len()).filter(|&h| index[h] == usize::MAX));
    let mut slots: Vec<Option<Component>> = comps.into_iter().map(Some).collect();
    let mut sorted: Vec<Component> = order.iter().map(|&h| slots[h].take().expect("each component once")).collect();
    let non_allocated = sorted.split_off(k);
    let alloc: Vec<usize> = raw.iter().map(|&c| index[c]).collect();

    let mut eta = DMatrix::zeros(n, d);
    for (i, &c) in alloc.iter().enumerate() {
        let comp = &sorted[c];
        let l = cholesky_jitter(&comp.delta, "component covariance")?.unpack();
        let row = &comp.mu + l * standard_normal_vec(d, rng);
        eta.set_row(i, &row.transpose());
    }
    let u = sample_gamma(n as f64, total, rng);
    let state = ModelState {
        eta,
        alloc,
        allocated: sorted,
        non_allocated,
        sigma2,
        lambda: dl.lambda,
        psi: dl.psi,
        phi: dl.phi,
        tau: dl.tau,
        u,
    };
    let y = sample_data(&state, rng);
    Ok((state, y))
}

/// `y_i ~ N(Λη_i, Σ)` for every row of the scores.
pub fn sample_data<R: Rng + ?Sized>(state: &ModelState, rng: &mut R) -> DMatrix<f64> {
    let sd = state.sigma2.map(f64::sqrt);
    let mean = &state.eta * state.lambda.transpose();
    DMatrix::from_fn(mean.nrows(), mean.ncols(), |i, j| mean[(i, j)] + sd[j] * rng.sample::<f64, _>(rand_distr::StandardNormal))
}

/// Means of one statistic under the two samplers.
#[derive(Debug, Clone, PartialEq)]
pub struct GewekeStat {
    pub name: &'static str,
    pub forward_mean: f64,
    pub forward_se: f64,
    pub chain_mean: f64,
    /// Batch-means standard error.
    pub chain_se: f64,
    pub z: f64,
}

#[derive(Debug, Clone)]
pub struct GewekeReport {
    pub stats: Vec<GewekeStat>,
    pub mala_accept: f64,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.stats.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }
}

/// Mean and batch-means standard error of a correlated series.
pub fn batch_means(xs: &[f64], n_batches: usize) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let size = n / n_batches.max(2);
    if size == 0 {
        return (mean, f64::NAN);
    }
    let batches: Vec<f64> = xs.chunks_exact(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let b = batches.len() as f64;
    let bm = batches.iter().sum::<f64>() / b;
    let var = batches.iter().map(|x| (x - bm).powi(2)).sum::<f64>() / (b - 1.0);
    (mean, (var / b).sqrt())
}

/// Compare `draws` prior draws with `draws` samples of the
/// successive-conditional chain in continuous mode, keeping one sample every
/// `thin` sweep-and-refresh steps. The MALA step is held fixed.
#[allow(clippy::too_many_arguments)]
pub fn geweke_test<R: Rng + ?Sized>(
    n: usize,
    p: usize,
    hyper: &Hyperparams,
    config: &SamplerConfig,
    draws: usize,
    thin: usize,
    n_batches: usize,
    rng: &mut R,
) -> Result<GewekeReport> {
    let mut forward = vec![Vec::with_capacity(draws); STATISTICS.len()];
    for _ in 0..draws {
        let (state, _) = sample_joint(n, p, hyper, rng)?;
        for (series, v) in forward.iter_mut().zip(statistics(&state)) {
            series.push(v);
        }
    }

    let (state, y) = sample_joint(n, p, hyper, rng)?;
    let mut sampler = Sampler::from_state(state, y, None, hyper.clone(), config.clone(), Mode::Continuous)?;
    let mut chain = vec![Vec::with_capacity(draws); STATISTICS.len()];
    for _ in 0..draws {
        for _ in 0..thin.max(1) {
            sampler.sweep(rng)?;
            sampler.set_data(sample_data(sampler.state(), rng))?;
        }
        for (series, v) in chain.iter_mut().zip(statistics(sampler.state())) {
            series.push(v);
        }
    }

    let stats = STATISTICS
        .iter()
        .zip(forward.iter().zip(&chain))
        .map(|(&name, (f, c))| {
            let fm = f.iter().sum::<f64>() / f.len() as f64;
            let fv = f.iter().map(|x| (x - fm).powi(2)).sum::<f64>() / (f.len() as f64 - 1.0);
            let fse = (fv / f.len() as f64).sqrt();
            let (cm, cse) = batch_means(c, n_batches);
            let z = (fm - cm) / (fse * fse + cse * cse).sqrt();
            GewekeStat { name, forward_mean: fm, forward_se: fse, chain_mean: cm, chain_se: cse, z }
        })
        .collect();
    Ok(GewekeReport { stats, mala_accept: sampler.acceptance().mala.rate() })
}
