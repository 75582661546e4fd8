use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{DppSpec, PointConfiguration, SpectralTable};
use crate::error::Result;

/// The matrix `C^app(Tμ_h, Tμ_k)` over a point set mapped into the unit cube,
/// with its Cholesky factor when it is positive definite.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    points: Vec<DVector<f64>>,
    mat: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
}

impl KernelMatrix {
    pub fn new(table: &SpectralTable, points: Vec<DVector<f64>>) -> Self {
        let m = points.len();
        let diag = table.kernel_diagonal();
        let mut mat = DMatrix::from_diagonal_element(m, m, diag);
        for i in 0..m {
            for j in 0..i {
                let v = table.kernel(&points[i], &points[j]);
                mat[(i, j)] = v;
                mat[(j, i)] = v;
            }
        }
        Self::from_parts(points, mat)
    }

    fn from_parts(points: Vec<DVector<f64>>, mat: DMatrix<f64>) -> Self {
        let chol = if mat.nrows() == 0 { None } else { Cholesky::new(mat.clone()) };
        Self { points, mat, chol }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    /// `log det C`, or `-∞` for an empty or numerically singular matrix.
    pub fn log_det(&self) -> f64 {
        match &self.chol {
            Some(c) => {
                let diag = c.l_dirty().diagonal();
                // A pivot this small relative to the diagonal means the
                // configuration is degenerate (for example a repeated point).
                let scale = self.mat[(0, 0)];
                if diag.iter().any(|v| !(v * v > 1e-13 * scale)) {
                    return f64::NEG_INFINITY;
                }
                2.0 * diag.iter().map(|v| v.ln()).sum::<f64>()
            }
            None => f64::NEG_INFINITY,
        }
    }

    /// `C⁻¹`, if `C` is nonsingular.
    pub fn inverse(&self) -> Option<DMatrix<f64>> {
        if self.log_det() == f64::NEG_INFINITY {
            return None;
        }
        self.chol.as_ref().map(|c| c.inverse())
    }

    fn cross_row(&self, table: &SpectralTable, x: &DVector<f64>) -> Vec<f64> {
        self.points.iter().map(|p| table.kernel(x, p)).collect()
    }

    /// The matrix for the set with `x` appended.
    pub fn with_point(&self, table: &SpectralTable, x: DVector<f64>) -> Self {
        let m = self.len();
        let row = self.cross_row(table, &x);
        let mut mat = self.mat.clone().resize(m + 1, m + 1, 0.0);
        for (j, v) in row.into_iter().enumerate() {
            mat[(m, j)] = v;
            mat[(j, m)] = v;
        }
        mat[(m, m)] = table.kernel_diagonal();
        let mut points = self.points.clone();
        points.push(x);
        Self::from_parts(points, mat)
    }

    /// The matrix for the set with point `j` removed.
    pub fn without_point(&self, j: usize) -> Self {
        let mat = self.mat.clone().remove_row(j).remove_column(j);
        let mut points = self.points.clone();
        points.remove(j);
        Self::from_parts(points, mat)
    }

    /// The matrix for the set with point `j` moved to `x`.
    pub fn with_replaced(&self, table: &SpectralTable, j: usize, x: DVector<f64>) -> Self {
        let row = self.cross_row(table, &x);
        let mut mat = self.mat.clone();
        for (i, v) in row.into_iter().enumerate() {
            if i != j {
                mat[(i, j)] = v;
                mat[(j, i)] = v;
            }
        }
        let mut points = self.points.clone();
        points[j] = x;
        Self::from_parts(points, mat)
    }

    /// The matrix with points reordered so that new point `i` is old point
    /// `order[i]`. `order` may also drop points.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mat = DMatrix::from_fn(order.len(), order.len(), |i, j| self.mat[(order[i], order[j])]);
        let points = order.iter().map(|&i| self.points[i].clone()).collect();
        Self::from_parts(points, mat)
    }
}

impl SpectralTable {
    /// `-D^app - log(1 - e^{-D^app})`: the `Λ`-dependent normalizing part of
    /// the log density.
    pub fn log_normalizer(&self) -> f64 {
        let d = self.d_app();
        -d - (-(-d).exp()).ln_1p()
    }
}

/// Log of the truncated DPP density on the spec's region with respect to the
/// unit-rate Poisson process. Returns `-∞` for degenerate configurations.
pub fn log_density(config: &PointConfiguration, spec: &DppSpec, lambda: &DMatrix<f64>) -> Result<f64> {
    let table = SpectralTable::build(spec, lambda)?;
    let region = &spec.region;
    let mapped: Vec<DVector<f64>> = config.points().iter().map(|x| region.to_unit(x)).collect();
    let m = mapped.len() as f64;
    let km = KernelMatrix::new(&table, mapped);
    let ld = km.log_det();
    if ld == f64::NEG_INFINITY {
        return Ok(ld);
    }
    Ok(-m * region.log_volume() + region.volume() + table.log_normalizer() + ld)
}
