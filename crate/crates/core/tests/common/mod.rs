#![allow(dead_code)]

pub mod oracle;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use applam::dpp::{DppSpec, Family, HyperRectangle};
use applam::linalg::min_singular_value;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

pub fn random_matrix<R: Rng>(r: usize, c: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| scale * normal(rng))
}

/// A p × d matrix whose smallest singular value is comfortably positive.
pub fn random_lambda<R: Rng>(p: usize, d: usize, rng: &mut R) -> DMatrix<f64> {
    loop {
        let l = random_matrix(p, d, 1.0, rng);
        if min_singular_value(&l) > 0.3 {
            return l;
        }
    }
}

pub fn random_spd<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
    let a = random_matrix(d, d, 1.0, rng);
    &a * a.transpose() + DMatrix::identity(d, d) * 0.5
}

pub fn random_region<R: Rng>(d: usize, rng: &mut R) -> HyperRectangle {
    let lower = DVector::from_fn(d, |_, _| -0.5 - 2.0 * rng.gen::<f64>());
    let upper = DVector::from_fn(d, |_, _| 0.5 + 2.0 * rng.gen::<f64>());
    HyperRectangle::new(lower, upper).unwrap()
}

pub fn uniform_in<R: Rng>(region: &HyperRectangle, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(region.dim(), |i, _| region.lower()[i] + rng.gen::<f64>() * (region.upper()[i] - region.lower()[i]))
}

/// A valid spec of either family with `ρ` a random fraction of `ρ_max`.
pub fn random_spec<R: Rng>(whittle: bool, d: usize, trunc_n: usize, rng: &mut R) -> DppSpec {
    let region = random_region(d, rng);
    let frac = 0.2 + 0.7 * rng.gen::<f64>();
    if whittle {
        let alpha = 0.05 + 0.3 * rng.gen::<f64>();
        let nu = 0.5 + 2.0 * rng.gen::<f64>();
        let probe = DppSpec::new(Family::WhittleMatern { alpha, nu }, 1e-6, trunc_n, region.clone()).unwrap();
        let max = probe.rho_max(&DMatrix::identity(d, d)).unwrap();
        DppSpec::new(Family::WhittleMatern { alpha, nu }, frac * max, trunc_n, region).unwrap()
    } else {
        let c = 0.5 + 30.0 * rng.gen::<f64>();
        let max = c * (2.0 * std::f64::consts::PI).powf(-(d as f64) / 2.0);
        DppSpec::new(Family::GaussianLike { c }, frac * max, trunc_n, region).unwrap()
    }
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Asserts the sample mean is within `k` standard errors of `expected`.
pub fn assert_mean_within(xs: &[f64], expected: f64, k: f64, what: &str) {
    let (mean, se) = mean_and_se(xs);
    let z = (mean - expected) / se;
    assert!(z.abs() < k, "{what}: mean {mean} vs {expected} (se {se}, z {z})");
}

/// Asymptotic Kolmogorov tail probability `P(K > x)`.
fn kolmogorov_tail(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..100 {
        let term = (-2.0 * (k * k) as f64 * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov p-value against `cdf`.
pub fn ks_pvalue(xs: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let stat = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    let sn = n.sqrt();
    kolmogorov_tail((sn + 0.12 + 0.11 / sn) * stat)
}

/// Two-sample Kolmogorov-Smirnov p-value.
pub fn ks2_pvalue(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j, mut stat) = (0, 0, 0.0f64);
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        stat = stat.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let se = ne.sqrt();
    kolmogorov_tail((se + 0.12 + 0.11 / se) * stat)
}

/// CDF on a grid from an unnormalized log density by trapezoid quadrature.
pub fn quadrature_cdf(log_f: impl Fn(f64) -> f64, lo: f64, hi: f64, steps: usize) -> impl Fn(f64) -> f64 {
    let h = (hi - lo) / steps as f64;
    let xs: Vec<f64> = (0..=steps).map(|i| lo + i as f64 * h).collect();
    let logs: Vec<f64> = xs.iter().map(|&x| log_f(x)).collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let f: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let mut cum = vec![0.0; xs.len()];
    for i in 1..xs.len() {
        cum[i] = cum[i - 1] + 0.5 * h * (f[i] + f[i - 1]);
    }
    let total = cum[xs.len() - 1];
    move |x: f64| {
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let t = (x - lo) / h;
        let i = (t.floor() as usize).min(steps - 1);
        let w = t - i as f64;
        (cum[i] * (1.0 - w) + cum[i + 1] * w) / total
    }
}

/// Central difference with one Richardson step.
pub fn richardson(f: impl Fn(f64) -> f64, h: f64) -> f64 {
    let d1 = (f(h) - f(-h)) / (2.0 * h);
    let d2 = (f(h / 2.0) - f(-h / 2.0)) / h;
    (4.0 * d2 - d1) / 3.0
}

/// `|a - b| / max(|b|, floor)`.
pub fn rel_err(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / b.abs().max(floor)
}
