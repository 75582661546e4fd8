use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::dpp::HyperRectangle;
use crate::error::{Error, Result};
use crate::gibbs::dist::{sample_gamma, standard_normal_vec};
use crate::linalg::{check_full_rank, spd_inverse};

const MAX_REDRAWS: usize = 100;
const MIN_GAMMA: f64 = 1.0;

/// Column means and standard deviations removed by [`standardize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub mean: DVector<f64>,
    pub sd: DVector<f64>,
}

impl Standardization {
    /// Map standardized rows back to the original scale.
    pub fn invert(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| z[(i, j)] * self.sd[j] + self.mean[j])
    }
}

/// Center each column and scale it to unit sample standard deviation
/// (denominator `n - 1`).
pub fn standardize(data: &DMatrix<f64>) -> Result<(DMatrix<f64>, Standardization)> {
    let n = data.nrows();
    if n < 2 {
        return Err(Error::Empty("standardization needs at least two rows"));
    }
    let mean = DVector::from_iterator(data.ncols(), data.column_iter().map(|c| c.mean()));
    let mut sd = DVector::zeros(data.ncols());
    for (j, col) in data.column_iter().enumerate() {
        let ss: f64 = col.iter().map(|v| (v - mean[j]).powi(2)).sum();
        let s = (ss / (n - 1) as f64).sqrt();
        if !(s > 0.0) {
            return Err(Error::ZeroVariance(j));
        }
        sd[j] = s;
    }
    let out = DMatrix::from_fn(n, data.ncols(), |i, j| (data[(i, j)] - mean[j]) / sd[j]);
    Ok((out, Standardization { mean, sd }))
}

/// One draw of the Dirichlet-Laplace prior on a p × d loadings matrix.
#[derive(Debug, Clone)]
pub struct DlDraw {
    pub lambda: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub tau: f64,
}

/// `λ_jh ~ N(0, ψ_jh φ²_jh τ²)`, `vec(φ) ~ Dirichlet(a)`, `ψ_jh ~ Exp(1/2)`,
/// `τ ~ Gamma(p d a, 1/2)`.
pub fn sample_dl_prior<R: Rng + ?Sized>(p: usize, d: usize, a: f64, rng: &mut R) -> DlDraw {
    let exp = Exp::new(0.5_f64).expect("positive rate");
    let psi = DMatrix::from_fn(p, d, |_, _| exp.sample(rng));
    // Dirichlet via normalized Gamma draws, floored away from zero so the
    // shrinkage scales stay strictly positive.
    let mut phi = DMatrix::from_fn(p, d, |_, _| sample_gamma(a, 1.0, rng).max(f64::MIN_POSITIVE));
    phi /= phi.sum();
    let tau = sample_gamma((p * d) as f64 * a, 0.5, rng);
    let z = standard_normal_vec(p * d, rng);
    let lambda = DMatrix::from_fn(p, d, |j, h| z[j * d + h] * psi[(j, h)].sqrt() * phi[(j, h)] * tau);
    DlDraw { lambda, psi, phi, tau }
}

/// Region `[-γ, γ]^d` with `γ = 10 · max_{g,i} ‖η̃_{g,i}‖_∞`, where `η̃_{g,i}`
/// are least-squares scores of the rows of `data` against prior draws of the
/// loadings. `γ` is floored at 1.
pub fn elicit_region<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    d: usize,
    a_dl: f64,
    n_prior_draws: usize,
    rng: &mut R,
) -> Result<HyperRectangle> {
    if n_prior_draws == 0 {
        return Err(Error::InvalidParameter("need at least one prior draw".into()));
    }
    let p = data.ncols();
    let mut max_abs: f64 = 0.0;
    for _ in 0..n_prior_draws {
        let lambda = full_rank_draw(p, d, a_dl, rng)?;
        let scores = least_squares_scores(&lambda, data)?;
        max_abs = scores.iter().fold(max_abs, |m, v| m.max(v.abs()));
    }
    HyperRectangle::cube((10.0 * max_abs).max(MIN_GAMMA), d)
}

pub(crate) fn full_rank_draw<R: Rng + ?Sized>(p: usize, d: usize, a: f64, rng: &mut R) -> Result<DMatrix<f64>> {
    Ok(full_rank_dl_draw(p, d, a, rng)?.lambda)
}

pub(crate) fn full_rank_dl_draw<R: Rng + ?Sized>(p: usize, d: usize, a: f64, rng: &mut R) -> Result<DlDraw> {
    let mut last = Error::InvalidLoadings(0.0);
    for _ in 0..MAX_REDRAWS {
        let draw = sample_dl_prior(p, d, a, rng);
        match check_full_rank(&draw.lambda) {
            Ok(()) => return Ok(draw),
            Err(e) => last = e,
        }
    }
    Err(last)
}

/// Least-squares solutions of `Λ η_i = y_i` for every row of `data`; n × d.
pub(crate) fn least_squares_scores(lambda: &DMatrix<f64>, data: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let gram_inv = spd_inverse(&(lambda.transpose() * lambda), "loadings Gram matrix")?;
    Ok(data * lambda * gram_inv)
}
