//! Dense and term-by-term reference computations shared by the oracle tests
//! and the acceptance harness.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use applam::dpp::{spectral_density, DppSpec, HyperRectangle, SpectralTable};
use applam::gibbs::LambdaTarget;
use applam::lowrank::{DiagCov, LowRankCov, SharedLoadings};
use applam::special::bessel_k;

use super::*;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn lattice(d: usize, n: i32) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (-n..=n).map(move |k| {
                    let mut v = prefix.clone();
                    v.push(k as f64);
                    v
                })
            })
            .collect();
    }
    out
}

/// Determinant by LU with partial pivoting.
pub fn complex_det(mut a: Vec<Vec<Complex64>>) -> Complex64 {
    let m = a.len();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        for r in col + 1..m {
            let f = a[r][col] / p;
            for c in col..m {
                let v = a[col][c];
                a[r][c] -= f * v;
            }
        }
    }
    det
}

/// The log density assembled term by term from complex exponentials.
pub fn oracle_log_density(points: &[DVector<f64>], spec: &DppSpec, lambda: &DMatrix<f64>) -> (f64, f64) {
    let d = spec.dim();
    let ks = lattice(d, spec.trunc_n as i32);
    let phis: Vec<f64> = ks.iter().map(|k| spectral_density(spec, lambda, &DVector::from_vec(k.clone())).unwrap()).collect();
    let d_app: f64 = phis.iter().map(|p| -(1.0 - p).ln()).sum();
    let mapped: Vec<DVector<f64>> = points.iter().map(|x| spec.region.to_unit(x)).collect();
    let m = mapped.len();
    let mut c = vec![vec![Complex64::new(0.0, 0.0); m]; m];
    for a in 0..m {
        for b in 0..m {
            for (k, p) in ks.iter().zip(&phis) {
                let dot: f64 = (0..d).map(|t| k[t] * (mapped[a][t] - mapped[b][t])).sum();
                c[a][b] += Complex64::from_polar(p / (1.0 - p), 2.0 * std::f64::consts::PI * dot);
            }
        }
    }
    for a in 0..m {
        for b in 0..m {
            assert!((c[a][b] - c[b][a].conj()).norm() < 1e-12, "kernel matrix is not Hermitian");
        }
    }
    let det = complex_det(c);
    let vol = spec.region.volume();
    let log = -(m as f64) * vol.ln() + vol - d_app - (1.0 - (-d_app).exp()).ln() + det.re.ln();
    (log, det.im.abs() / det.re.abs())
}

pub fn spread_points<R: Rng>(region: &HyperRectangle, m: usize, rng: &mut R) -> Vec<DVector<f64>> {
    let widths = region.widths();
    let mut pts: Vec<DVector<f64>> = Vec::new();
    while pts.len() < m {
        let x = uniform_in(region, rng);
        let far = pts.iter().all(|y| {
            let gap = (x.clone() - y).component_div(&widths).amax();
            gap > 0.15
        });
        if far {
            pts.push(x);
        }
    }
    pts
}

/// Random full conditional of the loadings with a configuration of centers.
pub struct Instance {
    pub spec: DppSpec,
    pub y: DMatrix<f64>,
    pub eta: DMatrix<f64>,
    pub sigma2: DVector<f64>,
    pub psi: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    pub tau: f64,
    pub points: Vec<DVector<f64>>,
    pub lambda: DMatrix<f64>,
}

pub fn instance<R: Rng>(whittle: bool, rng: &mut R) -> Instance {
    let d = rng.gen_range(1..=3);
    let p = rng.gen_range(d + 1..=20);
    let trunc: usize = rng.gen_range(1..=3);
    let m = rng.gen_range(1..=5usize.min((2 * trunc + 1).pow(d as u32)));
    let n = 20;
    let spec = random_spec(whittle, d, trunc, rng);
    let points = spread_points(&spec.region, m, rng).iter().map(|x| spec.region.to_unit(x)).collect();
    let lambda = random_lambda(p, d, rng);
    let phi_raw = DMatrix::from_fn(p, d, |_, _| 0.5 + rng.gen::<f64>());
    let total = phi_raw.sum();
    Instance {
        y: random_matrix(n, p, 1.0, rng),
        eta: random_matrix(n, d, 1.0, rng),
        sigma2: DVector::from_fn(p, |_, _| 0.5 + rng.gen::<f64>()),
        psi: DMatrix::from_fn(p, d, |_, _| 0.5 + 2.0 * rng.gen::<f64>()),
        phi: phi_raw / total,
        tau: (p * d) as f64 * (0.5 + rng.gen::<f64>()),
        spec,
        points,
        lambda,
    }
}


/// `log det C` from the QR factor of the feature matrix `F` with `C = FFᵀ`,
/// `F_{ik} = √w_k (cos 2π⟨k, x_i⟩, sin 2π⟨k, x_i⟩)`. Never forms `C`, so it
/// stays accurate when `C` is close to singular.
pub fn feature_log_det(table: &SpectralTable, points: &[DVector<f64>]) -> f64 {
    let m = points.len();
    let len = table.len();
    let mut ft = DMatrix::<f64>::zeros(2 * len, m);
    for (i, x) in points.iter().enumerate() {
        for idx in 0..len {
            let k = table.lattice_point(idx);
            let ang: f64 = 2.0 * std::f64::consts::PI * k.iter().zip(x.iter()).map(|(a, b)| *a as f64 * b).sum::<f64>();
            let w = table.weights()[idx].sqrt();
            ft[(2 * idx, i)] = w * ang.cos();
            ft[(2 * idx + 1, i)] = w * ang.sin();
        }
    }
    let r = ft.qr().r();
    2.0 * r.diagonal().iter().map(|v| v.abs().ln()).sum::<f64>()
}

/// The log full conditional of the loadings with the DPP determinant taken
/// from [`feature_log_det`].
pub fn stable_log_value(target: &LambdaTarget, inst: &Instance, lambda: &DMatrix<f64>) -> f64 {
    let table = SpectralTable::build(&inst.spec, lambda).unwrap();
    target.smooth_part(lambda) + table.log_normalizer() + feature_log_det(&table, &inst.points)
}

/// Largest relative error between the analytic gradient of the loadings
/// full conditional and Richardson-extrapolated central differences.
pub fn gradient_error(inst: &Instance) -> f64 {
    let target = LambdaTarget::new(&inst.y, &inst.eta, &inst.sigma2, &inst.psi, &inst.phi, inst.tau, &inst.spec, &inst.points);
    let eval = target.evaluate(&inst.lambda).unwrap();
    let grad = target.gradient(&inst.lambda, &eval.table, &eval.km).unwrap();
    let floor = (1e-3 * grad.amax()).max(1e-8);
    let mut worst = 0.0f64;
    for j in 0..inst.lambda.nrows() {
        for h in 0..inst.lambda.ncols() {
            let f = |e: f64| {
                let mut l = inst.lambda.clone();
                l[(j, h)] += e;
                stable_log_value(&target, inst, &l)
            };
            worst = worst.max(rel_err(grad[(j, h)], richardson(f, 1e-4), floor));
        }
    }
    worst
}

/// Mean of giG(p, a, b), the density proportional to `x^{p-1} exp(-(ax + b/x)/2)`.
pub fn gig_mean(p: f64, a: f64, b: f64) -> f64 {
    let w = (a * b).sqrt();
    (b / a).sqrt() * bessel_k(p + 1.0, w) / bessel_k(p, w)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Largest relative error of the Woodbury and determinant-lemma paths of
/// `diag(σ²) + Λ A Λᵀ` against a dense Cholesky factorization.
pub fn lowrank_error(
    sigma2: &DVector<f64>,
    lambda: &DMatrix<f64>,
    core: &DMatrix<f64>,
    y: &DVector<f64>,
    mean: &DVector<f64>,
) -> f64 {
    let cov = LowRankCov::new(DiagCov::new(sigma2.clone()).unwrap(), lambda.clone(), core.clone()).unwrap();
    let chol = cov.to_dense().cholesky().unwrap();
    let p = y.len() as f64;
    let r = y - mean;
    let quad = r.dot(&chol.solve(&r));
    let logdet = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let logpdf = -0.5 * (p * LN_2PI + logdet + quad);
    let mut errs = vec![
        rel(cov.quad_form_inverse(&r).unwrap(), quad),
        rel(cov.log_det().unwrap(), logdet),
        rel(cov.marginal_logpdf(y, mean).unwrap(), logpdf),
    ];

    // The projection form used by the allocation step, with the mean given
    // as Λμ.
    let mu = lambda.clone().svd(true, true).solve(mean, 1e-12).unwrap();
    let lam_mu = lambda * &mu;
    let shared = Arc::new(SharedLoadings::new(&DiagCov::new(sigma2.clone()).unwrap(), lambda));
    let factor = shared.factor(core).unwrap();
    let b = shared.project(y);
    let g = shared.gram();
    let diag_quad = shared.weighted_norm2(y) - 2.0 * mu.dot(&b) + mu.dot(&(g * &mu));
    let proj = &b - g * &mu;
    let r2 = y - &lam_mu;
    let direct = -0.5 * (p * LN_2PI + logdet + r2.dot(&chol.solve(&r2)));
    errs.push(rel(factor.logpdf_from_projection(diag_quad, &proj), direct));
    errs.push(rel(factor.logpdf(y, &lam_mu), direct));
    errs.into_iter().fold(0.0, f64::max)
}

/// Random low-rank instance with `p <= 8`: variances, loadings, an SPD core
/// and a pair of vectors.
#[allow(clippy::type_complexity)]
pub fn lowrank_instance<R: Rng>(rng: &mut R) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let p = rng.gen_range(1..=8);
    let d = rng.gen_range(1..=p);
    let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-2.0..2.0));
    (
        DVector::from_fn(p, |_, _| rng.gen_range(0.05..5.0)),
        DMatrix::from_fn(p, d, |_, _| rng.gen_range(-3.0..3.0)),
        &a * a.transpose() + DMatrix::identity(d, d) * 0.1,
        DVector::from_fn(p, |_, _| rng.gen_range(-4.0..4.0)),
        DVector::from_fn(p, |_, _| rng.gen_range(-4.0..4.0)),
    )
}
