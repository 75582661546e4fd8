//! Full conditionals that do not need the sampler's cached DPP pieces.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::dist::{sample_gig, sample_inv_gamma, sample_truncated_unit_normal, standard_normal_vec};
use crate::dpp::HyperRectangle;
use crate::error::{Error, Result};
use crate::linalg::cholesky_jitter;
use crate::special::log_norm_cdf;

/// Floor on the `b` parameter of the giG draws, which vanishes when a
/// loading is exactly zero.
pub const GIG_B_FLOOR: f64 = 1e-30;

/// Dirichlet-Laplace shrinkage update. Draws `φ | Λ`, then `τ | φ, Λ`, then
/// `ψ | Λ, φ, τ`, which is an exact draw from `(ψ, φ, τ) | Λ`.
pub fn update_shrinkage<R: Rng + ?Sized>(
    lambda: &DMatrix<f64>,
    psi: &mut DMatrix<f64>,
    phi: &mut DMatrix<f64>,
    tau: &mut f64,
    a: f64,
    rng: &mut R,
) {
    let (p, d) = lambda.shape();
    let mut t = DMatrix::from_fn(p, d, |j, h| sample_gig(a - 1.0, 1.0, (2.0 * lambda[(j, h)].abs()).max(GIG_B_FLOOR), rng));
    // Every entry is positive, but guard the normalization against underflow.
    t.apply(|v| *v = v.max(f64::MIN_POSITIVE));
    *phi = &t / t.sum();

    let b_tau: f64 = lambda.zip_map(phi, |l, f| l.abs() / f).sum() * 2.0;
    *tau = sample_gig((p * d) as f64 * (a - 1.0), 1.0, b_tau.max(GIG_B_FLOOR), rng);

    let tau2 = *tau * *tau;
    *psi = DMatrix::from_fn(p, d, |j, h| {
        let b = lambda[(j, h)].powi(2) / (phi[(j, h)].powi(2) * tau2);
        sample_gig(0.5, 1.0, b.max(GIG_B_FLOOR), rng)
    });
}

/// Shape and scale of the inverse-Gamma full conditional of one `σ²_j`.
pub fn sigma_posterior(resid_ss: f64, n: usize, a_sigma: f64, b_sigma: f64) -> (f64, f64) {
    (n as f64 / 2.0 + a_sigma, 0.5 * resid_ss + b_sigma)
}

/// Redraw every `σ²_j` given `y` (n × p), `Λ` and `η`.
pub fn update_sigma<R: Rng + ?Sized>(
    y: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    eta: &DMatrix<f64>,
    a_sigma: f64,
    b_sigma: f64,
    sigma2: &mut DVector<f64>,
    rng: &mut R,
) {
    let resid = y - eta * lambda.transpose();
    for (j, col) in resid.column_iter().enumerate() {
        let (shape, scale) = sigma_posterior(col.norm_squared(), y.nrows(), a_sigma, b_sigma);
        sigma2[j] = sample_inv_gamma(shape, scale, rng);
    }
}

/// `log ψ(u)` with `ψ(u) = E[e^{-uS}] = (1 + u)^{-α}` for `S ~ Gamma(α, 1)`.
pub fn log_psi(alpha: f64, u: f64) -> f64 {
    -alpha * u.ln_1p()
}

/// Draw an index with probabilities proportional to `exp(log_w)`. Returns the
/// index and `log Σ exp(log_w)`.
pub fn sample_log_categorical<R: Rng + ?Sized>(log_w: &[f64], rng: &mut R) -> Result<(usize, f64)> {
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::IllConditioned("all allocation weights vanish".into()));
    }
    let total: f64 = log_w.iter().map(|w| (w - max).exp()).sum();
    let mut target = rng.gen::<f64>() * total;
    let mut pick = log_w.len() - 1;
    for (h, w) in log_w.iter().enumerate() {
        let e = (w - max).exp();
        if target < e {
            pick = h;
            break;
        }
        target -= e;
    }
    Ok((pick, max + total.ln()))
}

/// Mean and covariance of `η_i | y_i, c_i`, given `G = ΛᵀΣ⁻¹Λ` and
/// `b = ΛᵀΣ⁻¹y_i`.
pub fn eta_posterior(
    gram: &DMatrix<f64>,
    b: &DVector<f64>,
    delta: &DMatrix<f64>,
    mu: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let delta_inv = cholesky_jitter(delta, "component covariance")?.inverse();
    let prec = gram + &delta_inv;
    let chol = cholesky_jitter(&prec, "score precision")?;
    let mean = chol.solve(&(b + delta_inv * mu));
    Ok((mean, chol.inverse()))
}

/// Redraw all scores. `b` holds `ΛᵀΣ⁻¹y_i` as rows (n × d); `alloc[i]` indexes
/// `centers` and `deltas`.
pub fn update_eta<R: Rng + ?Sized>(
    gram: &DMatrix<f64>,
    b: &DMatrix<f64>,
    alloc: &[usize],
    centers: &[&DVector<f64>],
    deltas: &[&DMatrix<f64>],
    eta: &mut DMatrix<f64>,
    rng: &mut R,
) -> Result<()> {
    let d = gram.nrows();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); centers.len()];
    for (i, &c) in alloc.iter().enumerate() {
        members[c].push(i);
    }
    for (h, idx) in members.iter().enumerate() {
        if idx.is_empty() {
            continue;
        }
        let delta_inv = cholesky_jitter(deltas[h], "component covariance")?.inverse();
        let prec = gram + &delta_inv;
        let chol = cholesky_jitter(&prec, "score precision")?;
        let prior_part = &delta_inv * centers[h];
        let l = chol.l();
        for &i in idx {
            let mean = chol.solve(&(b.row(i).transpose() + &prior_part));
            // With P = L Lᵀ, L⁻ᵀz has covariance P⁻¹.
            let z = standard_normal_vec(d, rng);
            let noise = l.tr_solve_lower_triangular(&z).expect("positive Cholesky diagonal");
            eta.set_row(i, &(mean + noise).transpose());
        }
    }
    Ok(())
}

/// Refresh the latent Gaussians behind binary observations: `y_ij` is
/// `N((Λη_i)_j, 1)` truncated to `[0, ∞)` if `z_ij = 1` and to `(-∞, 0)` otherwise.
pub fn update_latent_binary<R: Rng + ?Sized>(
    z: &DMatrix<f64>,
    lambda: &DMatrix<f64>,
    eta: &DMatrix<f64>,
    y: &mut DMatrix<f64>,
    rng: &mut R,
) {
    let mean = eta * lambda.transpose();
    for j in 0..z.ncols() {
        for i in 0..z.nrows() {
            y[(i, j)] = sample_truncated_unit_normal(mean[(i, j)], z[(i, j)] > 0.5, rng);
        }
    }
}

/// Per-observation probit log-likelihood of binary rows given the scores,
/// `Σ_j log Φ((2z_ij − 1)(Λη_i)_j)`.
pub fn binary_loglik(z: &DMatrix<f64>, lambda: &DMatrix<f64>, eta: &DMatrix<f64>) -> Vec<f64> {
    let mean = eta * lambda.transpose();
    (0..z.nrows())
        .map(|i| (0..z.ncols()).map(|j| log_norm_cdf(if z[(i, j)] > 0.5 { mean[(i, j)] } else { -mean[(i, j)] })).sum())
        .collect()
}

/// One random-walk Metropolis-Hastings move for an allocated center.
///
/// The Gaussian part of the target enters through the members' count and
/// mean: `Σ_i log N(η_i | μ, Δ) = −n_h/2 (μ − η̄)ᵀΔ⁻¹(μ − η̄) + const`.
/// `dpp_log_ratio` returns the change in the DPP log density for a candidate
/// center, or `-∞` to veto it. Proposals outside `region` are rejected.
#[allow(clippy::too_many_arguments)]
pub fn mh_center_step<R: Rng + ?Sized>(
    mu: &DVector<f64>,
    n_h: usize,
    eta_mean: &DVector<f64>,
    delta_inv: &DMatrix<f64>,
    step: &DVector<f64>,
    region: &HyperRectangle,
    dpp_log_ratio: impl FnOnce(&DVector<f64>) -> f64,
    rng: &mut R,
) -> Option<DVector<f64>> {
    let z = standard_normal_vec(mu.len(), rng);
    let prop = mu + step.component_mul(&z);
    if !region.contains(&prop) {
        return None;
    }
    let quad = |m: &DVector<f64>| {
        let diff = m - eta_mean;
        diff.dot(&(delta_inv * &diff))
    };
    let log_lik = -0.5 * n_h as f64 * (quad(&prop) - quad(mu));
    let log_ratio = log_lik + dpp_log_ratio(&prop);
    (rng.gen::<f64>().ln() < log_ratio).then_some(prop)
}
