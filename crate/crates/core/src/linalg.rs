//! Small dense helpers shared by the sampler and the DPP code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub(crate) const JITTER: f64 = 1e-10;

/// Cholesky factor of a symmetric positive-definite matrix. On failure one
/// retry is made with `JITTER * I` added to the diagonal.
pub fn cholesky_jitter(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Ok(c);
    }
    let n = m.nrows();
    let jittered = m + DMatrix::<f64>::identity(n, n) * JITTER;
    Cholesky::new(jittered).ok_or_else(|| Error::IllConditioned(format!("{what} is not positive definite")))
}

pub fn chol_log_det(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
}

/// Symmetrize in place: `(m + m^T) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Inverse of an SPD matrix through its Cholesky factor, symmetrized.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let mut inv = cholesky_jitter(m, what)?.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

/// Smallest singular value of a tall matrix, via the eigenvalues of `A^T A`.
pub fn min_singular_value(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    let ev = gram.symmetric_eigenvalues();
    ev.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0).sqrt()
}

pub fn check_full_rank(a: &DMatrix<f64>) -> Result<()> {
    let s = min_singular_value(a);
    if s > 1e-10 && s.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidLoadings(s))
    }
}

/// Draw from `N(mean, L L^T)` given the lower Cholesky factor `L`.
pub fn gaussian_from_chol(mean: &DVector<f64>, l: &DMatrix<f64>, z: &DVector<f64>) -> DVector<f64> {
    mean + l * z
}

/// Log density of `N_d(x | mean, cov)` from a precomputed Cholesky factor of `cov`.
pub fn mvn_logpdf_chol(x: &DVector<f64>, mean: &DVector<f64>, chol: &Cholesky<f64, Dyn>, log_det: f64) -> f64 {
    let diff = x - mean;
    let z = chol.l_dirty().solve_lower_triangular(&diff).expect("triangular solve");
    let d = x.len() as f64;
    -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det + z.norm_squared())
}
