//! Anisotropic determinantal point processes on a compact hyperrectangle.
//!
//! The stationary kernel depends on the loadings `Λ` only through
//! `A = ΛᵀΛ`. Two families are provided: the Gaussian-like kernel and the
//! Whittle-Matérn kernel. Densities are evaluated through a truncated
//! spectral expansion on the unit cube, see [`SpectralTable`].

mod density;
mod gradient;
mod prior;
mod table;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_full_rank, cholesky_jitter, chol_log_det};
use crate::special::{bessel_k, ln_gamma};

pub use density::{log_density, KernelMatrix};
pub use gradient::{dpp_gradient, grad_log_density_lambda, q_gradient};
pub use prior::{sample_prior, PriorSampler};
pub(crate) use prior::birth_death_step;
pub use table::SpectralTable;

pub const DEFAULT_TRUNCATION: usize = 3;
/// Points closer than this are treated as coincident.
pub const MIN_SEPARATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Family {
    GaussianLike { c: f64 },
    WhittleMatern { alpha: f64, nu: f64 },
}

/// Axis-aligned box `[lower, upper]` in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperRectangle {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl HyperRectangle {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::Dimension(format!(
                "region bounds have lengths {} and {}",
                lower.len(),
                upper.len()
            )));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::InvalidParameter("region needs lower < upper in every coordinate".into()));
        }
        Ok(Self { lower, upper })
    }

    /// The hypercube `[-gamma, gamma]^d`.
    pub fn cube(gamma: f64, d: usize) -> Result<Self> {
        Self::new(DVector::from_element(d, -gamma), DVector::from_element(d, gamma))
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &DVector<f64> {
        &self.lower
    }

    pub fn upper(&self) -> &DVector<f64> {
        &self.upper
    }

    pub fn widths(&self) -> DVector<f64> {
        &self.upper - &self.lower
    }

    pub fn log_volume(&self) -> f64 {
        self.widths().iter().map(|w| w.ln()).sum()
    }

    pub fn volume(&self) -> f64 {
        self.log_volume().exp()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lower.iter().zip(self.upper.iter())).all(|(v, (l, u))| l <= v && v <= u)
    }

    /// The affine map onto `[-1/2, 1/2]^d`.
    pub fn to_unit(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| (x[i] - self.lower[i]) / (self.upper[i] - self.lower[i]) - 0.5),
        )
    }

    pub fn from_unit(&self, s: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| self.lower[i] + (s[i] + 0.5) * (self.upper[i] - self.lower[i])),
        )
    }

    /// Clamp each coordinate into the box.
    pub fn clamp(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.dim(), (0..self.dim()).map(|i| x[i].clamp(self.lower[i], self.upper[i])))
    }
}

/// A finite, nonempty set of distinct points inside a region.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfiguration {
    points: Vec<DVector<f64>>,
}

impl PointConfiguration {
    pub fn new(points: Vec<DVector<f64>>, region: &HyperRectangle) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("point configuration"));
        }
        for (i, x) in points.iter().enumerate() {
            if !region.contains(x) {
                return Err(Error::InvalidParameter(format!("point {i} lies outside the region")));
            }
            for y in &points[..i] {
                if (x - y).norm() <= MIN_SEPARATION {
                    return Err(Error::InvalidParameter(format!("point {i} duplicates an earlier point")));
                }
            }
        }
        Ok(Self { points })
    }

    /// Wrap points without validation; used for deliberately degenerate inputs.
    pub fn new_unchecked(points: Vec<DVector<f64>>) -> Self {
        Self { points }
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

    pub fn into_points(self) -> Vec<DVector<f64>> {
        self.points
    }
}

/// Kernel family, intensity, truncation level and window of a DPP prior.
#[derive(Debug, Clone, PartialEq)]
pub struct DppSpec {
    pub family: Family,
    pub rho: f64,
    pub trunc_n: usize,
    pub region: HyperRectangle,
}

impl DppSpec {
    pub fn new(family: Family, rho: f64, trunc_n: usize, region: HyperRectangle) -> Result<Self> {
        let spec = Self { family, rho, trunc_n, region };
        spec.validate()?;
        Ok(spec)
    }

    /// Gaussian-like spec with `c` chosen so that `rho = rho_max / 2`.
    pub fn gaussian_half_max(rho: f64, trunc_n: usize, region: HyperRectangle) -> Result<Self> {
        let d = region.dim() as f64;
        let c = 2.0 * rho * (2.0 * std::f64::consts::PI).powf(d / 2.0);
        Self::new(Family::GaussianLike { c }, rho, trunc_n, region)
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be positive, got {}", self.rho)));
        }
        if self.trunc_n < 1 {
            return Err(Error::InvalidParameter("truncation level must be at least 1".into()));
        }
        match self.family {
            Family::GaussianLike { c } if !(c > 0.0) => {
                return Err(Error::InvalidParameter(format!("c must be positive, got {c}")))
            }
            Family::WhittleMatern { alpha, nu } if !(alpha > 0.0 && nu > 0.0) => {
                return Err(Error::InvalidParameter(format!("alpha and nu must be positive, got {alpha}, {nu}")))
            }
            _ => {}
        }
        let max = self.rho_max_unchecked();
        if self.rho >= max {
            return Err(Error::InvalidParameter(format!("rho = {} must be below rho_max = {max}", self.rho)));
        }
        Ok(())
    }

    /// The intensity ceiling; it does not depend on `Λ` for either family.
    fn rho_max_unchecked(&self) -> f64 {
        let d = self.dim() as f64;
        match self.family {
            Family::GaussianLike { c } => c * (2.0 * std::f64::consts::PI).powf(-d / 2.0),
            Family::WhittleMatern { alpha, nu } => {
                (ln_gamma(nu) - ln_gamma(nu + d / 2.0)).exp()
                    / (2.0 * std::f64::consts::PI.sqrt() * alpha).powf(d)
            }
        }
    }

    pub fn rho_max(&self, lambda: &DMatrix<f64>) -> Result<f64> {
        check_lambda(lambda, self.dim())?;
        Ok(self.rho_max_unchecked())
    }
}

/// `ΛᵀΛ`, its inverse and `|ΛᵀΛ|^{1/d}`.
#[derive(Debug, Clone)]
pub(crate) struct Anisotropy {
    pub a_inv: DMatrix<f64>,
    pub det_root: f64,
}

impl Anisotropy {
    pub fn new(lambda: &DMatrix<f64>) -> Result<Self> {
        let d = lambda.ncols();
        let a = lambda.transpose() * lambda;
        let chol = cholesky_jitter(&a, "loadings Gram matrix")?;
        let det_root = (chol_log_det(&chol) / d as f64).exp();
        let mut a_inv = chol.inverse();
        crate::linalg::symmetrize(&mut a_inv);
        Ok(Self { a_inv, det_root })
    }

    /// `|A|^{1/d} kᵀA⁻¹k`.
    pub fn q(&self, k: &[f64]) -> f64 {
        let mut s = 0.0;
        for (i, ki) in k.iter().enumerate() {
            let row: f64 = k.iter().enumerate().map(|(j, kj)| self.a_inv[(i, j)] * kj).sum();
            s += ki * row;
        }
        self.det_root * s
    }
}

pub(crate) fn check_lambda(lambda: &DMatrix<f64>, d: usize) -> Result<()> {
    if lambda.ncols() != d || lambda.nrows() < d {
        return Err(Error::Dimension(format!(
            "loadings are {}x{}, expected p x {d} with p >= {d}",
            lambda.nrows(),
            lambda.ncols()
        )));
    }
    check_full_rank(lambda)
}

/// Spectral density `φ` as a function of `q = |A|^{1/d} kᵀA⁻¹k`, together
/// with `-∂log φ/∂q`.
pub(crate) fn phi_of_q(spec: &DppSpec, q: f64) -> (f64, f64) {
    let d = spec.dim() as f64;
    let pi = std::f64::consts::PI;
    match spec.family {
        Family::GaussianLike { c } => {
            let slope = 2.0 * pi * pi * c.powf(-2.0 / d);
            let phi = spec.rho * (2.0 * pi).powf(d / 2.0) / c * (-slope * q).exp();
            (phi, slope)
        }
        Family::WhittleMatern { alpha, nu } => {
            let a = 1.0 + 4.0 * pi * pi * alpha * alpha * q;
            let expo = nu + d / 2.0;
            let log_phi = spec.rho.ln() + ln_gamma(expo) - ln_gamma(nu) + d * (2.0 * pi.sqrt() * alpha).ln()
                - expo * a.ln();
            (log_phi.exp(), 4.0 * pi * pi * alpha * alpha * expo / a)
        }
    }
}

/// Stationary kernel `K₀(x)`.
pub fn kernel_k0(spec: &DppSpec, lambda: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    check_lambda(lambda, spec.dim())?;
    let aniso = Anisotropy::new(lambda)?;
    let d = spec.dim() as f64;
    let lx2 = (lambda * x).norm_squared();
    Ok(match spec.family {
        Family::GaussianLike { c } => spec.rho * (-lx2 / (2.0 * aniso.det_root * c.powf(-2.0 / d))).exp(),
        Family::WhittleMatern { alpha, nu } => {
            let r = lx2.sqrt() / (alpha * aniso.det_root.sqrt());
            if r == 0.0 {
                spec.rho
            } else {
                let log_k = (1.0 - nu) * 2f64.ln() - ln_gamma(nu) + nu * r.ln();
                spec.rho * log_k.exp() * bessel_k(nu, r)
            }
        }
    })
}

/// Fourier transform `φ(k)` of the kernel.
pub fn spectral_density(spec: &DppSpec, lambda: &DMatrix<f64>, k: &DVector<f64>) -> Result<f64> {
    check_lambda(lambda, spec.dim())?;
    let aniso = Anisotropy::new(lambda)?;
    Ok(phi_of_q(spec, aniso.q(k.as_slice())).0)
}

/// Pair correlation function `g(x) = 1 - (K₀(x)/ρ)²`.
pub fn pair_correlation(spec: &DppSpec, lambda: &DMatrix<f64>, x: &DVector<f64>) -> Result<f64> {
    let k = kernel_k0(spec, lambda, x)? / spec.rho;
    Ok((1.0 - k * k).clamp(0.0, 1.0))
}

/// Repulsiveness coefficient `p₀ = ρ⁻¹∫K₀²`, closed form for the Gaussian-like family.
pub fn repulsiveness_p0(spec: &DppSpec, lambda: &DMatrix<f64>) -> Result<f64> {
    check_lambda(lambda, spec.dim())?;
    match spec.family {
        Family::GaussianLike { c } => Ok(spec.rho * std::f64::consts::PI.powf(spec.dim() as f64 / 2.0) / c),
        Family::WhittleMatern { .. } => Err(Error::UnsupportedFamily("repulsiveness_p0")),
    }
}
