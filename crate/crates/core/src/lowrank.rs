//! Gaussian densities with covariance `Σ + Λ Δ Λᵀ` (diagonal plus rank d).
//!
//! The inverse goes through Woodbury's identity and the determinant through
//! the matrix determinant lemma, so only a `d × d` matrix is ever factorized:
//!
//! ```text
//! (Σ + ΛΔΛᵀ)⁻¹ = Σ⁻¹ − Σ⁻¹Λ (Δ⁻¹ + ΛᵀΣ⁻¹Λ)⁻¹ ΛᵀΣ⁻¹
//! det(Σ + ΛΔΛᵀ) = det(Δ⁻¹ + ΛᵀΣ⁻¹Λ) det(Δ) det(Σ)
//! ```

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg::{chol_log_det, cholesky_jitter};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Diagonal covariance `Σ = diag(σ²₁, …, σ²_p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagCov {
    sigma2: DVector<f64>,
}

impl DiagCov {
    pub fn new(sigma2: DVector<f64>) -> Result<Self> {
        if let Some(j) = sigma2.iter().position(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "variance {j} must be strictly positive, got {}",
                sigma2[j]
            )));
        }
        Ok(Self { sigma2 })
    }

    pub fn identity(p: usize) -> Self {
        Self { sigma2: DVector::from_element(p, 1.0) }
    }

    pub fn dim(&self) -> usize {
        self.sigma2.len()
    }

    pub fn variances(&self) -> &DVector<f64> {
        &self.sigma2
    }
}

/// Covariance `Σ + Λ Δ Λᵀ`.
#[derive(Debug, Clone)]
pub struct LowRankCov {
    pub diag: DiagCov,
    pub loadings: DMatrix<f64>,
    pub core: DMatrix<f64>,
}

impl LowRankCov {
    pub fn new(diag: DiagCov, loadings: DMatrix<f64>, core: DMatrix<f64>) -> Result<Self> {
        let (p, d) = loadings.shape();
        if p != diag.dim() {
            return Err(Error::Dimension(format!("loadings have {p} rows, Σ has {}", diag.dim())));
        }
        if d > p {
            return Err(Error::Dimension(format!("rank {d} exceeds dimension {p}")));
        }
        if core.shape() != (d, d) {
            return Err(Error::Dimension(format!("core is {:?}, expected {d}x{d}", core.shape())));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (core[(i, j)] - core[(j, i)]).abs() > 1e-10 {
                    return Err(Error::InvalidParameter("core matrix is not symmetric".into()));
                }
            }
        }
        Ok(Self { diag, loadings, core })
    }

    /// Dense `p × p` covariance. Only meant for tests and diagnostics.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = &self.loadings * &self.core * self.loadings.transpose();
        for (j, s) in self.diag.sigma2.iter().enumerate() {
            m[(j, j)] += s;
        }
        m
    }

    pub fn factorize(&self) -> Result<LowRankFactor> {
        Arc::new(SharedLoadings::new(&self.diag, &self.loadings)).factor(&self.core)
    }

    pub fn quad_form_inverse(&self, v: &DVector<f64>) -> Result<f64> {
        Ok(self.factorize()?.quad_form_inverse(v))
    }

    pub fn log_det(&self) -> Result<f64> {
        Ok(self.factorize()?.log_det())
    }

    pub fn marginal_logpdf(&self, y: &DVector<f64>, mean: &DVector<f64>) -> Result<f64> {
        if y.len() != self.diag.dim() || mean.len() != self.diag.dim() {
            return Err(Error::Dimension("observation and mean must have length p".into()));
        }
        Ok(self.factorize()?.logpdf(y, mean))
    }
}

/// The parts of the factorization that depend only on `(Σ, Λ)`; shared by
/// every mixture component in one allocation sweep.
#[derive(Debug, Clone)]
pub struct SharedLoadings {
    sigma_inv: DVector<f64>,
    /// `Σ⁻¹ Λ`, p × d.
    scaled_loadings: DMatrix<f64>,
    /// `Λᵀ Σ⁻¹ Λ`, d × d.
    gram: DMatrix<f64>,
    log_det_sigma: f64,
}

impl SharedLoadings {
    pub fn new(diag: &DiagCov, loadings: &DMatrix<f64>) -> Self {
        let sigma_inv = diag.sigma2.map(|s| 1.0 / s);
        let mut scaled = loadings.clone();
        for (j, mut row) in scaled.row_iter_mut().enumerate() {
            row *= sigma_inv[j];
        }
        let gram = loadings.transpose() * &scaled;
        let log_det_sigma = diag.sigma2.iter().map(|s| s.ln()).sum();
        Self { sigma_inv, scaled_loadings: scaled, gram, log_det_sigma }
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn sigma_inv(&self) -> &DVector<f64> {
        &self.sigma_inv
    }

    /// `vᵀ Σ⁻¹ v`.
    pub fn weighted_norm2(&self, v: &DVector<f64>) -> f64 {
        v.iter().zip(self.sigma_inv.iter()).map(|(x, w)| x * x * w).sum()
    }

    /// `Λᵀ Σ⁻¹ v`.
    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        self.scaled_loadings.tr_mul(v)
    }

    pub fn factor(self: &Arc<Self>, core: &DMatrix<f64>) -> Result<LowRankFactor> {
        let core_chol = cholesky_jitter(core, "component covariance")?;
        let log_det_core = chol_log_det(&core_chol);
        let core_inv = core_chol.inverse();
        let inner = core_inv + &self.gram;
        let inner_chol = cholesky_jitter(&inner, "Δ⁻¹ + ΛᵀΣ⁻¹Λ")?;
        let log_det_inner = chol_log_det(&inner_chol);
        if !log_det_inner.is_finite() {
            return Err(Error::IllConditioned("non-positive inner determinant".into()));
        }
        Ok(LowRankFactor {
            shared: Arc::clone(self),
            inner_chol,
            log_det: log_det_inner + log_det_core + self.log_det_sigma,
        })
    }
}

/// Cached factorization of one `Σ + ΛΔΛᵀ`.
#[derive(Debug, Clone)]
pub struct LowRankFactor {
    shared: Arc<SharedLoadings>,
    inner_chol: Cholesky<f64, Dyn>,
    log_det: f64,
}

impl LowRankFactor {
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `vᵀ (Σ + ΛΔΛᵀ)⁻¹ v` in O(p·d).
    pub fn quad_form_inverse(&self, v: &DVector<f64>) -> f64 {
        let s = &self.shared;
        let diag_part: f64 = v.iter().zip(s.sigma_inv.iter()).map(|(x, w)| x * x * w).sum();
        let proj = s.scaled_loadings.tr_mul(v);
        let z = self
            .inner_chol
            .l_dirty()
            .solve_lower_triangular(&proj)
            .expect("Cholesky factor has a positive diagonal");
        diag_part - z.norm_squared()
    }

    pub fn logpdf(&self, y: &DVector<f64>, mean: &DVector<f64>) -> f64 {
        let r = y - mean;
        let p = y.len() as f64;
        -0.5 * (p * LN_2PI + self.log_det + self.quad_form_inverse(&r))
    }

    /// Log density of a residual `r = y - mean` given only `rᵀΣ⁻¹r` and
    /// `ΛᵀΣ⁻¹r`. Costs O(d²), which lets the caller precompute per-observation
    /// and per-component projections once.
    pub fn logpdf_from_projection(&self, diag_quad: f64, proj: &DVector<f64>) -> f64 {
        let p = self.shared.sigma_inv.len() as f64;
        let z = self
            .inner_chol
            .l_dirty()
            .solve_lower_triangular(proj)
            .expect("Cholesky factor has a positive diagonal");
        -0.5 * (p * LN_2PI + self.log_det + diag_quad - z.norm_squared())
    }
}
