use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{DppSpec, KernelMatrix, PointConfiguration, SpectralTable, MIN_SEPARATION};
use crate::error::Result;

/// Number of birth-death moves used by [`sample_prior`] before returning.
const PRIOR_BURN_IN: usize = 2_000;

/// Log acceptance ratio for adding the mapped point `x` as a removable point.
///
/// `log_psi` is the per-point log weight of removable points and `n_removable`
/// their count before the birth. The `|R|` factors of the density and the
/// uniform proposal cancel.
pub(crate) fn birth_log_ratio(current: &KernelMatrix, proposed: &KernelMatrix, n_removable: usize, log_psi: f64) -> f64 {
    proposed.log_det() - current.log_det() + log_psi - ((n_removable + 1) as f64).ln()
}

/// Log acceptance ratio for removing one of `n_removable >= 1` removable points.
pub(crate) fn death_log_ratio(current: &KernelMatrix, proposed: &KernelMatrix, n_removable: usize, log_psi: f64) -> f64 {
    proposed.log_det() - current.log_det() - log_psi + (n_removable as f64).ln()
}

fn too_close(km: &KernelMatrix, x: &DVector<f64>) -> bool {
    km.points().iter().any(|p| (p - x).norm() <= MIN_SEPARATION)
}

/// One birth-death Metropolis-Hastings move on a kernel matrix whose first
/// `n_fixed` points are held fixed. Returns whether the move was accepted.
pub(crate) fn birth_death_step<R: Rng + ?Sized>(
    table: &SpectralTable,
    km: &mut KernelMatrix,
    n_fixed: usize,
    log_psi: f64,
    rng: &mut R,
) -> bool {
    let n_removable = km.len() - n_fixed;
    let d = table.dim();
    if rng.gen::<f64>() < 0.5 {
        let x = DVector::from_fn(d, |_, _| rng.gen::<f64>() - 0.5);
        if too_close(km, &x) {
            return false;
        }
        let proposed = km.with_point(table, x);
        let log_ratio = birth_log_ratio(km, &proposed, n_removable, log_psi);
        if rng.gen::<f64>().ln() < log_ratio {
            *km = proposed;
            return true;
        }
    } else if n_removable > 0 {
        let j = n_fixed + rng.gen_range(0..n_removable);
        let proposed = km.without_point(j);
        let log_ratio = death_log_ratio(km, &proposed, n_removable, log_psi);
        if rng.gen::<f64>().ln() < log_ratio {
            *km = proposed;
            return true;
        }
    }
    false
}

/// Birth-death chain targeting the DPP prior (conditioned on at least one point).
#[derive(Debug, Clone)]
pub struct PriorSampler {
    spec: DppSpec,
    table: SpectralTable,
    km: KernelMatrix,
}

impl PriorSampler {
    /// Start from a single uniform point.
    pub fn new<R: Rng + ?Sized>(spec: &DppSpec, lambda: &DMatrix<f64>, rng: &mut R) -> Result<Self> {
        let table = SpectralTable::build(spec, lambda)?;
        let x = DVector::from_fn(spec.dim(), |_, _| rng.gen::<f64>() - 0.5);
        let km = KernelMatrix::new(&table, vec![x]);
        Ok(Self { spec: spec.clone(), table, km })
    }

    pub fn table(&self) -> &SpectralTable {
        &self.table
    }

    pub fn len(&self) -> usize {
        self.km.len()
    }

    pub fn is_empty(&self) -> bool {
        self.km.is_empty()
    }

    /// One birth-death move. A death that would empty the configuration is
    /// rejected, which targets the prior conditioned on `m >= 1`.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> bool {
        let last = (self.km.len() == 1).then(|| self.km.clone());
        let accepted = birth_death_step(&self.table, &mut self.km, 0, 0.0, rng);
        if let Some(last) = last.filter(|_| self.km.is_empty()) {
            self.km = last;
            return false;
        }
        accepted
    }

    pub fn run<R: Rng + ?Sized>(&mut self, steps: usize, rng: &mut R) {
        for _ in 0..steps {
            self.step(rng);
        }
    }

    /// Current state mapped back onto the spec's region.
    pub fn configuration(&self) -> PointConfiguration {
        let pts = self.km.points().iter().map(|s| self.spec.region.from_unit(s)).collect();
        PointConfiguration::new_unchecked(pts)
    }
}

/// An approximate draw from the DPP prior via a long birth-death run.
pub fn sample_prior<R: Rng + ?Sized>(spec: &DppSpec, lambda: &DMatrix<f64>, rng: &mut R) -> Result<PointConfiguration> {
    let mut sampler = PriorSampler::new(spec, lambda, rng)?;
    sampler.run(PRIOR_BURN_IN, rng);
    Ok(sampler.configuration())
}
