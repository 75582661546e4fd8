use nalgebra::{DMatrix, DVector};
use rand::Rng;

use serde::{Deserialize, Serialize};

use super::prep::{full_rank_dl_draw, least_squares_scores};
use super::{Component, Hyperparams, Mode, ModelState, Partition};
use crate::gibbs::steps::update_shrinkage;
use crate::dpp::MIN_SEPARATION;
use crate::error::{Error, Result};
use crate::gibbs::dist::{sample_gamma, sample_inv_wishart};
use crate::linalg::check_full_rank;

const LLOYD_ITERS: usize = 100;

/// k-means++ seeding followed by Lloyd iterations on the rows of `x`.
/// Returns compacted labels; clusters that empty out are dropped.
pub fn kmeans<R: Rng + ?Sized>(x: &DMatrix<f64>, k: usize, rng: &mut R) -> Result<Partition> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::Empty("k-means needs at least one row"));
    }
    let k = k.clamp(1, n);
    let row = |i: usize| x.row(i).transpose();
    let dist2 = |i: usize, c: &DVector<f64>| (row(i) - c).norm_squared();

    let mut centers = vec![row(rng.gen_range(0..n))];
    let mut best: Vec<f64> = (0..n).map(|i| dist2(i, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = best.iter().sum();
        if !(total > 0.0) {
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = n - 1;
        for (i, w) in best.iter().enumerate() {
            if target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        let c = row(pick);
        for (i, b) in best.iter_mut().enumerate() {
            *b = b.min(dist2(i, &c));
        }
        centers.push(c);
    }

    let mut labels = vec![0usize; n];
    for iter in 0..LLOYD_ITERS {
        let mut changed = false;
        for (i, label) in labels.iter_mut().enumerate() {
            let nearest = (0..centers.len())
                .min_by(|&a, &b| dist2(i, &centers[a]).total_cmp(&dist2(i, &centers[b])))
                .expect("at least one center");
            if nearest != *label {
                *label = nearest;
                changed = true;
            }
        }
        if !changed && iter > 0 {
            break;
        }
        let mut sums = vec![DVector::zeros(x.ncols()); centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (i, &l) in labels.iter().enumerate() {
            sums[l] += row(i);
            counts[l] += 1;
        }
        for (c, (s, cnt)) in centers.iter_mut().zip(sums.into_iter().zip(counts)) {
            if cnt > 0 {
                *c = s / cnt as f64;
            }
        }
    }
    Ok(Partition::from_labels(&labels))
}

/// How the starting loadings are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LoadingsInit {
    /// The leading principal axes with a common column norm chosen so the
    /// largest score coordinate reaches the region half-width;
    /// shrinkage parameters drawn from their conditional given these
    /// loadings.
    #[default]
    Pca,
    /// One draw of loadings and shrinkage parameters from the prior.
    Prior,
}

/// The `d` leading right singular vectors of `data` as a p × d matrix.
fn pca_loadings(data: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    let svd = data.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::IllConditioned("SVD of the data failed".into()))?;
    // nalgebra does not promise sorted singular values.
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if order.len() < d {
        return Err(Error::Dimension(format!("need at least {d} observations for {d} principal axes")));
    }
    Ok(DMatrix::from_fn(data.ncols(), d, |j, h| v_t[(order[h], j)]))
}

/// Starting state: loadings per `init`, least-squares scores, k-means
/// allocations with `k = round(ρ)`, centers at the cluster means and no
/// non-allocated components.
pub fn init_state<R: Rng + ?Sized>(
    data: &DMatrix<f64>,
    hyper: &Hyperparams,
    mode: Mode,
    init: LoadingsInit,
    rng: &mut R,
) -> Result<ModelState> {
    hyper.validate()?;
    let (n, p, d) = (data.nrows(), data.ncols(), hyper.d());
    if n == 0 {
        return Err(Error::Empty("no observations"));
    }
    if d > p {
        return Err(Error::Dimension(format!("latent dimension {d} exceeds data dimension {p}")));
    }
    let region = &hyper.dpp.region;
    let mut dl = full_rank_dl_draw(p, d, hyper.a_dl, rng)?;
    if init == LoadingsInit::Pca {
        let axes = pca_loadings(data, d)?;
        let reach = (data * &axes).amax();
        let half_width = region.widths().amin() / 2.0;
        let scale = if reach > 0.0 { reach / half_width } else { 1.0 };
        dl.lambda = axes * scale;
        check_full_rank(&dl.lambda)?;
        update_shrinkage(&dl.lambda, &mut dl.psi, &mut dl.phi, &mut dl.tau, hyper.a_dl, rng);
    }
    let mut eta = least_squares_scores(&dl.lambda, data)?;
    for i in 0..n {
        let clamped = region.clamp(&eta.row(i).transpose());
        eta.set_row(i, &clamped.transpose());
    }

    let k = (hyper.dpp.rho.round() as usize).clamp(1, n);
    let partition = kmeans(&eta, k, rng)?;
    let mut centers: Vec<DVector<f64>> = vec![DVector::zeros(d); partition.n_clusters()];
    for (i, &l) in partition.labels().iter().enumerate() {
        centers[l] += eta.row(i).transpose();
    }
    let widths = region.widths();
    let mut placed: Vec<DVector<f64>> = Vec::with_capacity(centers.len());
    for (c, &size) in centers.iter().zip(partition.sizes()) {
        let mut mu = region.clamp(&(c / size as f64));
        while placed.iter().any(|o| (o - &mu).norm() <= MIN_SEPARATION) {
            let jitter = DVector::from_fn(d, |j, _| (rng.gen::<f64>() - 0.5) * 1e-6 * widths[j]);
            mu = region.clamp(&(mu + jitter));
        }
        placed.push(mu);
    }

    let allocated = placed
        .into_iter()
        .map(|mu| {
            let delta = match mode {
                Mode::Continuous => sample_inv_wishart(hyper.nu0, &hyper.psi0, rng)?,
                Mode::Binary => DMatrix::identity(d, d),
            };
            Ok(Component { mu, s: hyper.alpha, delta })
        })
        .collect::<Result<Vec<_>>>()?;
    let sigma2 = match mode {
        Mode::Continuous => DVector::from_element(p, hyper.b_sigma / hyper.a_sigma),
        Mode::Binary => DVector::from_element(p, 1.0),
    };
    let total_s: f64 = allocated.iter().map(|c| c.s).sum();
    let u = sample_gamma(n as f64, total_s, rng);

    let state = ModelState {
        eta,
        alloc: partition.labels().to_vec(),
        allocated,
        non_allocated: Vec::new(),
        sigma2,
        lambda: dl.lambda,
        psi: dl.psi,
        phi: dl.phi,
        tau: dl.tau,
        u,
    };
    state.check_invariants(hyper)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dpp::{DppSpec, HyperRectangle};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn hyper(d: usize, rho: f64, gamma: f64) -> Hyperparams {
        let region = HyperRectangle::cube(gamma, d).unwrap();
        Hyperparams::with_defaults(DppSpec::gaussian_half_max(rho, 2, region).unwrap())
    }

    #[test]
    fn kmeans_separates_two_blobs() {
        let x = DMatrix::from_fn(40, 2, |i, j| if i < 20 { 5.0 } else { -5.0 } + 0.01 * ((i * 3 + j) % 7) as f64);
        let part = kmeans(&x, 2, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(part.n_clusters(), 2);
        assert!(part.labels()[..20].iter().all(|&l| l == part.labels()[0]));
        assert!(part.labels()[20..].iter().all(|&l| l == part.labels()[20]));
        assert_ne!(part.labels()[0], part.labels()[20]);
    }

    #[test]
    fn kmeans_drops_surplus_clusters() {
        let x = DMatrix::from_element(6, 2, 1.0);
        let part = kmeans(&x, 4, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(part.n_clusters(), 1);
    }

    #[test]
    fn init_satisfies_invariants_and_is_reproducible() {
        let data = DMatrix::from_fn(30, 8, |i, j| ((i * 13 + j * 5) as f64 * 0.37).sin() + if i < 15 { 2.0 } else { -2.0 });
        let h = hyper(2, 4.0, 50.0);
        let a = init_state(&data, &h, Mode::Continuous, LoadingsInit::Pca, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = init_state(&data, &h, Mode::Continuous, LoadingsInit::Pca, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        a.check_invariants(&h).unwrap();
        assert!(a.n_clusters() >= 1 && a.n_clusters() <= 4);
        assert!(a.non_allocated.is_empty());
        let c = init_state(&data, &h, Mode::Continuous, LoadingsInit::Prior, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        c.check_invariants(&h).unwrap();
    }

    #[test]
    fn pca_loadings_are_orthonormal_projections() {
        let raw = DMatrix::from_fn(25, 6, |i, j| ((i * 7 + j * 3) as f64 * 0.61).sin() * (j + 1) as f64);
        let (data, _) = crate::model::standardize(&raw).unwrap();
        let lambda = pca_loadings(&data, 2).unwrap();
        assert!((lambda.tr_mul(&lambda) - DMatrix::identity(2, 2)).amax() < 1e-12);
        let eta = least_squares_scores(&lambda, &data).unwrap();
        assert!((eta - &data * &lambda).amax() < 1e-10);
        // The first axis carries at least as much variance as the second.
        let v = |h: usize| (&data * lambda.column(h)).norm_squared();
        assert!(v(0) >= v(1));
    }

    #[test]
    fn binary_mode_fixes_covariances() {
        let data = DMatrix::from_fn(12, 5, |i, j| if (i + j) % 3 == 0 { 0.7 } else { -0.7 });
        let h = hyper(2, 2.0, 20.0);
        let s = init_state(&data, &h, Mode::Binary, LoadingsInit::Prior, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert!(s.sigma2.iter().all(|v| *v == 1.0));
        assert!(s.allocated.iter().all(|c| c.delta == DMatrix::identity(2, 2)));
    }
}
