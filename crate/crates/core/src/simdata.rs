//! Synthetic benchmarks: four well-separated latent clusters pushed through
//! a block loadings matrix, with Student t noise in either the observation
//! layer (scenario A) or the latent layer (scenario B).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::dist::{sample_mvt, standard_normal_vec};

const CENTER_LEVELS: [f64; 4] = [7.5, 2.5, -2.5, -7.5];
const NOISE_VAR: f64 = 0.5;
const T_DF: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scenario {
    /// Gaussian scores, multivariate t observations.
    A,
    /// Multivariate t scores, Gaussian observations.
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub scenario: Scenario,
    pub p: usize,
    pub d: usize,
    pub n_per_cluster: usize,
}

impl SimScenario {
    pub fn new(scenario: Scenario, p: usize, d: usize) -> Self {
        Self { scenario, p, d, n_per_cluster: 50 }
    }

    pub fn n(&self) -> usize {
        self.n_per_cluster * CENTER_LEVELS.len()
    }
}

/// `{7.5}^d, {2.5}^d, {-2.5}^d, {-7.5}^d`.
pub fn true_centers(d: usize) -> Vec<DVector<f64>> {
    CENTER_LEVELS.iter().map(|&v| DVector::from_element(d, v)).collect()
}

/// Repetition count `c` of the first `d - 1` basis vectors: the smallest `c`
/// with `p - c(d - 1) <= c`, which keeps the blocks as even as possible. The
/// last basis vector is repeated `p - c(d - 1)` times and must appear.
pub fn block_size(p: usize, d: usize) -> Result<usize> {
    if d == 0 || p < d {
        return Err(Error::Dimension(format!("need 1 <= d <= p, got p = {p}, d = {d}")));
    }
    let c = p.div_ceil(d);
    if p <= c * (d - 1) {
        return Err(Error::InvalidParameter(format!("no block size leaves the last factor any rows for p = {p}, d = {d}")));
    }
    Ok(c)
}

/// Loadings built by stacking `e_1` `c` times, ..., `e_{d-1}` `c` times and
/// `e_d` for the remaining rows.
pub fn true_lambda(p: usize, d: usize) -> Result<DMatrix<f64>> {
    let c = block_size(p, d)?;
    Ok(DMatrix::from_fn(p, d, |j, h| if (j / c).min(d - 1) == h { 1.0 } else { 0.0 }))
}

/// Simulate a dataset (n × p, unstandardized) and its 0-based true labels,
/// ordered by cluster.
pub fn gen_sim<R: Rng + ?Sized>(sc: &SimScenario, rng: &mut R) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let lambda = true_lambda(sc.p, sc.d)?;
    let centers = true_centers(sc.d);
    let n = sc.n();
    let identity_d = DMatrix::identity(sc.d, sc.d);
    let noise_chol = DMatrix::identity(sc.p, sc.p) * NOISE_VAR.sqrt();
    let mut data = DMatrix::zeros(n, sc.p);
    let mut labels = Vec::with_capacity(n);
    for (h, mu) in centers.iter().enumerate() {
        for _ in 0..sc.n_per_cluster {
            let i = labels.len();
            let y = match sc.scenario {
                Scenario::A => {
                    let eta = mu + standard_normal_vec(sc.d, rng);
                    sample_mvt(&(&lambda * eta), &noise_chol, T_DF, rng)
                }
                Scenario::B => {
                    let eta = sample_mvt(mu, &identity_d, T_DF, rng);
                    &lambda * eta + standard_normal_vec(sc.p, rng) * NOISE_VAR.sqrt()
                }
            };
            data.set_row(i, &y.transpose());
            labels.push(h);
        }
    }
    Ok((data, labels))
}
