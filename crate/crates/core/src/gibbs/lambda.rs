//! Log full conditional of the loadings and its gradient.

use nalgebra::{DMatrix, DVector};

use crate::dpp::{dpp_gradient, DppSpec, KernelMatrix, SpectralTable};
use crate::error::Result;

/// Everything the full conditional of `Λ` depends on, reduced to sufficient
/// statistics: `Σ_i y_ij²`, `Yᵀη` and `ηᵀη`.
#[derive(Debug, Clone)]
pub struct LambdaTarget<'a> {
    spec: &'a DppSpec,
    /// Component centers mapped into the unit cube.
    points: &'a [DVector<f64>],
    sigma_inv: DVector<f64>,
    yty: DVector<f64>,
    yt_eta: DMatrix<f64>,
    eta_t_eta: DMatrix<f64>,
    /// `ψ ⊙ φ² τ²`, the prior variances of the loadings.
    prior_var: DMatrix<f64>,
}

/// The spectral table and kernel matrix at some `Λ`, plus the log target there.
#[derive(Debug, Clone)]
pub struct LambdaEval {
    pub log_target: f64,
    pub table: SpectralTable,
    pub km: KernelMatrix,
}

impl<'a> LambdaTarget<'a> {
    /// `y` is n × p and `eta` is n × d.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        y: &DMatrix<f64>,
        eta: &DMatrix<f64>,
        sigma2: &DVector<f64>,
        psi: &DMatrix<f64>,
        phi: &DMatrix<f64>,
        tau: f64,
        spec: &'a DppSpec,
        points: &'a [DVector<f64>],
    ) -> Self {
        let yty = DVector::from_iterator(y.ncols(), y.column_iter().map(|c| c.norm_squared()));
        let prior_var = psi.zip_map(phi, |s, f| s * f * f * tau * tau);
        Self {
            spec,
            points,
            sigma_inv: sigma2.map(|s| 1.0 / s),
            yty,
            yt_eta: y.tr_mul(eta),
            eta_t_eta: eta.tr_mul(eta),
            prior_var,
        }
    }

    /// Gaussian likelihood of the data given the scores plus the shrinkage
    /// prior, up to constants.
    pub fn smooth_part(&self, lambda: &DMatrix<f64>) -> f64 {
        let fitted = lambda * &self.eta_t_eta;
        let mut total = 0.0;
        for j in 0..lambda.nrows() {
            let row = lambda.row(j);
            let cross = row.dot(&self.yt_eta.row(j));
            let quad = row.dot(&fitted.row(j));
            total -= 0.5 * self.sigma_inv[j] * (self.yty[j] - 2.0 * cross + quad);
        }
        let shrink: f64 = lambda.zip_map(&self.prior_var, |l, v| l * l / v).sum();
        total - 0.5 * shrink
    }

    /// Log target given a table and kernel matrix already built at `lambda`.
    pub fn log_value_with(&self, lambda: &DMatrix<f64>, table: &SpectralTable, km: &KernelMatrix) -> f64 {
        self.smooth_part(lambda) + table.log_normalizer() + km.log_det()
    }

    /// Build the DPP pieces at `lambda` and evaluate the log target. Fails
    /// when `lambda` is rank deficient or breaks DPP existence.
    pub fn evaluate(&self, lambda: &DMatrix<f64>) -> Result<LambdaEval> {
        let table = SpectralTable::build(self.spec, lambda)?;
        let km = KernelMatrix::new(&table, self.points.to_vec());
        let log_target = self.log_value_with(lambda, &table, &km);
        Ok(LambdaEval { log_target, table, km })
    }

    /// Log target at `lambda`, `-∞` where it is undefined.
    pub fn log_value(&self, lambda: &DMatrix<f64>) -> f64 {
        self.evaluate(lambda).map_or(f64::NEG_INFINITY, |e| e.log_target)
    }

    /// `Σ⁻¹ Σ_i (y_i − Λη_i) η_iᵀ`.
    pub fn data_term(&self, lambda: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = &self.yt_eta - lambda * &self.eta_t_eta;
        for (j, mut row) in g.row_iter_mut().enumerate() {
            row *= self.sigma_inv[j];
        }
        g
    }

    /// `−Λ / (ψ ⊙ φ² τ²)`.
    pub fn shrink_term(&self, lambda: &DMatrix<f64>) -> DMatrix<f64> {
        lambda.zip_map(&self.prior_var, |l, v| -l / v)
    }

    /// Gradient of the log target at `lambda`.
    pub fn gradient(&self, lambda: &DMatrix<f64>, table: &SpectralTable, km: &KernelMatrix) -> Result<DMatrix<f64>> {
        Ok(dpp_gradient(table, km)? + self.data_term(lambda) + self.shrink_term(lambda))
    }
}
