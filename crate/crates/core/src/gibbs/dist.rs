//! Random variate generators used by the sampler.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_jitter, spd_inverse};

const ZTOL: f64 = 10.0 * f64::EPSILON;

/// `Gamma(shape, rate)`.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).expect("gamma parameters must be positive").sample(rng)
}

/// `inv-Gamma(shape, scale)`: the reciprocal of a `Gamma(shape, rate = scale)` draw.
pub fn sample_inv_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    1.0 / sample_gamma(shape, scale, rng)
}

pub fn standard_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Draw from the generalized inverse Gaussian distribution with density
/// proportional to `x^{p-1} exp(-(a x + b / x) / 2)` on `x > 0`.
///
/// Uses the ratio-of-uniforms and rejection schemes of Hörmann and Leydold
/// (2014), switching by the parameter regime.
pub fn sample_gig<R: Rng + ?Sized>(p: f64, a: f64, b: f64, rng: &mut R) -> f64 {
    assert!(a > 0.0 && b > 0.0, "giG needs a > 0 and b > 0, got a = {a}, b = {b}");
    let lambda = p.abs();
    let omega = (a * b).sqrt();
    let alpha = (b / a).sqrt();
    if omega < ZTOL && lambda > 0.0 {
        // Essentially a Gamma (p > 0) or inverse Gamma (p < 0) law.
        return if p > 0.0 {
            sample_gamma(p, a / 2.0, rng)
        } else {
            1.0 / sample_gamma(-p, b / 2.0, rng)
        };
    }
    let x = if lambda > 2.0 || omega > 3.0 {
        gig_rou_shift(lambda, omega, rng)
    } else if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        gig_rou_noshift(lambda, omega, rng)
    } else {
        gig_concave_hat(lambda, omega, rng)
    };
    if p < 0.0 {
        alpha / x
    } else {
        alpha * x
    }
}

fn gig_mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

fn gig_rou_noshift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0) * (lambda + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * rng.gen::<f64>();
        let v: f64 = rng.gen();
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn gig_rou_shift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    // Extremes of x·sqrt(f(x + xm)) from the roots of a cubic (Cardano).
    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let fi = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * std::f64::consts::PI).cos() - a / 3.0;
    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();
    loop {
        let u = uminus + rng.gen::<f64>() * (uplus - uminus);
        let v: f64 = rng.gen();
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

/// Rejection from a hat that is constant on the log-concave part; for
/// `0 <= lambda < 1` and small `omega`.
fn gig_concave_hat<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = gig_mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;
    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;
    loop {
        let mut v = total * rng.gen::<f64>();
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                let lo = x0.max(2.0 / omega);
                x = -2.0 / omega * ((-omega / 2.0 * lo).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        let u = rng.gen::<f64>() * hx;
        if u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}

/// Standard normal conditioned on `z >= lower`.
///
/// Plain rejection for `lower < 0`; otherwise Robert's translated-exponential
/// proposal, whose acceptance rate stays above 0.75 however far the bound
/// lies in the tail.
pub fn sample_std_normal_tail<R: Rng + ?Sized>(lower: f64, rng: &mut R) -> f64 {
    if lower < 0.0 {
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z >= lower {
                return z;
            }
        }
    }
    let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = lower + exp.sample(rng);
        let g = z - rate;
        if rng.gen::<f64>().ln() <= -0.5 * g * g {
            return z;
        }
    }
}

/// `N(mean, 1)` truncated to `[0, ∞)` when `positive`, else to `(-∞, 0)`.
pub fn sample_truncated_unit_normal<R: Rng + ?Sized>(mean: f64, positive: bool, rng: &mut R) -> f64 {
    if positive {
        mean + sample_std_normal_tail(-mean, rng)
    } else {
        loop {
            let v = mean - sample_std_normal_tail(mean, rng);
            // The upper bound is open; a draw of exactly zero is redrawn.
            if v < 0.0 {
                return v;
            }
        }
    }
}

/// `IW_d(nu, psi)` with mean `psi / (nu - d - 1)`, via the Bartlett
/// decomposition of the matching Wishart draw.
pub fn sample_inv_wishart<R: Rng + ?Sized>(nu: f64, psi: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let d = psi.nrows();
    if !(nu > d as f64 - 1.0) {
        return Err(Error::InvalidParameter(format!("inverse Wishart needs nu > d - 1, got nu = {nu}, d = {d}")));
    }
    let scale = spd_inverse(psi, "inverse Wishart scale")?;
    let l = cholesky_jitter(&scale, "inverse Wishart scale")?.unpack();
    let mut a = DMatrix::<f64>::zeros(d, d);
    for i in 0..d {
        let chi = ChiSquared::new(nu - i as f64).expect("positive degrees of freedom");
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let la = l * a;
    let w = &la * la.transpose();
    spd_inverse(&w, "Wishart draw")
}

/// Multivariate Student t with location `mean`, scale `L Lᵀ` and `df` degrees
/// of freedom: a Gaussian draw scaled by `sqrt(df / χ²_df)`.
pub fn sample_mvt<R: Rng + ?Sized>(mean: &DVector<f64>, scale_chol: &DMatrix<f64>, df: f64, rng: &mut R) -> DVector<f64> {
    let z = standard_normal_vec(mean.len(), rng);
    let w = ChiSquared::new(df).expect("positive degrees of freedom").sample(rng);
    mean + scale_chol * z * (df / w).sqrt()
}
