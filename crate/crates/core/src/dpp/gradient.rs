use nalgebra::{DMatrix, DVector};

use super::{check_lambda, Anisotropy, DppSpec, KernelMatrix, PointConfiguration, SpectralTable};
use crate::error::{Error, Result};

/// Gradient with respect to `Λ` of `q(Λ) = |ΛᵀΛ|^{1/d} kᵀ(ΛᵀΛ)⁻¹k`.
pub fn q_gradient(lambda: &DMatrix<f64>, k: &DVector<f64>) -> Result<DMatrix<f64>> {
    let aniso = Anisotropy::new(lambda)?;
    let d = k.len() as f64;
    let ak = &aniso.a_inv * k;
    let quad = k.dot(&ak);
    let inner = DMatrix::identity(k.len(), k.len()) * (quad / d) - k * ak.transpose();
    Ok(lambda * &aniso.a_inv * inner * (2.0 * aniso.det_root))
}

/// Gradient of the log DPP density with respect to `Λ`, given the spectral
/// table at `Λ` and the kernel matrix of the mapped points.
pub fn dpp_gradient(table: &SpectralTable, km: &KernelMatrix) -> Result<DMatrix<f64>> {
    let cinv = km.inverse().ok_or_else(|| Error::IllConditioned("singular DPP kernel matrix".into()))?;
    let d = table.dim();
    let len = table.len();
    let pts = km.points();
    let m = pts.len();

    // r_k = v_kᵀ C⁻¹ u_k = Σ_{j,l} C⁻¹_{jl} cos(2π⟨k, x_l - x_j⟩).
    let trace: f64 = (0..m).map(|j| cinv[(j, j)]).sum();
    let mut r = vec![trace; len];
    let mut delta = vec![0.0; d];
    for j in 0..m {
        for l in 0..j {
            let w = 2.0 * cinv[(j, l)];
            for t in 0..d {
                delta[t] = pts[l][t] - pts[j][t];
            }
            table.for_each_cos(&delta, |idx, c| r[idx] += w * c);
        }
    }

    let d_app = table.d_app();
    let norm = -(-d_app).exp_m1();
    let phi = table.phi();
    let slope = table.slopes();
    let q = table.q_values();
    let det_root = table.aniso.det_root;
    let mut qsum = 0.0;
    let mut kk = DMatrix::<f64>::zeros(d, d);
    for idx in 0..len {
        let p = phi[idx];
        let coef = slope[idx] * p / ((1.0 - p) * (1.0 - p)) * ((1.0 - p) / norm - r[idx]);
        if coef == 0.0 {
            continue;
        }
        qsum += coef * q[idx] / det_root;
        let k = table.lattice_point(idx);
        for a in 0..d {
            for b in 0..d {
                kk[(a, b)] += coef * (k[a] * k[b]) as f64;
            }
        }
    }
    let a_inv = &table.aniso.a_inv;
    let inner = DMatrix::identity(d, d) * (qsum / d as f64) - kk * a_inv;
    Ok(table.lambda() * a_inv * inner * (2.0 * det_root))
}

/// Full gradient of the log full conditional of `Λ`: the likelihood term,
/// the shrinkage term and the DPP term.
pub fn grad_log_density_lambda(
    config: &PointConfiguration,
    spec: &DppSpec,
    lambda: &DMatrix<f64>,
    data_resid_term: &DMatrix<f64>,
    shrink_term: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    check_lambda(lambda, spec.dim())?;
    if data_resid_term.shape() != lambda.shape() || shrink_term.shape() != lambda.shape() {
        return Err(Error::Dimension("gradient terms must have the shape of the loadings".into()));
    }
    let table = SpectralTable::build(spec, lambda)?;
    let mapped = config.points().iter().map(|x| spec.region.to_unit(x)).collect();
    let km = KernelMatrix::new(&table, mapped);
    Ok(dpp_gradient(&table, &km)? + data_resid_term + shrink_term)
}
