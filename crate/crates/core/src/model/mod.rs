//! Hyperparameters, partitions, the sampler state and data preparation.

mod init;
pub(crate) mod prep;

use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::{DMatrix, DVector};

use crate::dpp::{DppSpec, MIN_SEPARATION};
use crate::error::{Error, Result};

pub use init::{init_state, kmeans, LoadingsInit};
pub use prep::{elicit_region, sample_dl_prior, standardize, DlDraw, Standardization};

/// Whether observations are continuous or latent Gaussians behind binary data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Continuous,
    /// `Σ = I` and `Δ_h = I` are fixed; `y` is refreshed from truncated normals.
    Binary,
}

/// Prior hyperparameters. `d` is the dimension of the DPP's region.
#[derive(Debug, Clone)]
pub struct Hyperparams {
    /// Gamma shape of the unnormalized weights.
    pub alpha: f64,
    pub nu0: f64,
    pub psi0: DMatrix<f64>,
    pub a_sigma: f64,
    pub b_sigma: f64,
    /// Dirichlet-Laplace concentration.
    pub a_dl: f64,
    pub dpp: DppSpec,
}

impl Hyperparams {
    /// Default choices: `a_σ = 1`, `b_σ = 0.3`, `a = 0.5`, `Ψ₀ = 20 I`,
    /// `ν₀ = d + 50`, `α = 1`.
    pub fn with_defaults(dpp: DppSpec) -> Self {
        let d = dpp.dim();
        Self {
            alpha: 1.0,
            nu0: d as f64 + 50.0,
            psi0: DMatrix::identity(d, d) * 20.0,
            a_sigma: 1.0,
            b_sigma: 0.3,
            a_dl: 0.5,
            dpp,
        }
    }

    pub fn d(&self) -> usize {
        self.dpp.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.d();
        let positive = [("alpha", self.alpha), ("a_sigma", self.a_sigma), ("b_sigma", self.b_sigma), ("a_dl", self.a_dl)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.nu0 > d as f64 - 1.0) {
            return Err(Error::InvalidParameter(format!("nu0 must exceed d - 1, got {}", self.nu0)));
        }
        if self.psi0.shape() != (d, d) || self.psi0.clone().cholesky().is_none() {
            return Err(Error::InvalidParameter("psi0 must be a d x d SPD matrix".into()));
        }
        Ok(())
    }
}

/// Cluster labels compacted to `0..k` in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    labels: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    pub fn from_labels<T: Eq + Hash + Copy>(raw: &[T]) -> Self {
        let mut map = HashMap::new();
        let mut sizes = Vec::new();
        let labels = raw
            .iter()
            .map(|v| {
                let next = map.len();
                let l = *map.entry(*v).or_insert(next);
                if l == sizes.len() {
                    sizes.push(0);
                }
                sizes[l] += 1;
                l
            })
            .collect();
        Self { labels, sizes }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels as `1..=k`, the external convention.
    pub fn one_based(&self) -> Vec<usize> {
        self.labels.iter().map(|l| l + 1).collect()
    }
}

/// One mixture component: location, unnormalized weight, covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub mu: DVector<f64>,
    pub s: f64,
    pub delta: DMatrix<f64>,
}

/// The full Gibbs state.
///
/// `alloc[i]` indexes `allocated`; every allocated component has at least
/// one observation. Non-allocated components carry no observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// Latent scores, n × d.
    pub eta: DMatrix<f64>,
    pub alloc: Vec<usize>,
    pub allocated: Vec<Component>,
    pub non_allocated: Vec<Component>,
    pub sigma2: DVector<f64>,
    /// Loadings, p × d.
    pub lambda: DMatrix<f64>,
    pub psi: DMatrix<f64>,
    /// Dirichlet-Laplace scales; entries sum to one.
    pub phi: DMatrix<f64>,
    pub tau: f64,
    pub u: f64,
}

impl ModelState {
    pub fn n(&self) -> usize {
        self.eta.nrows()
    }

    pub fn p(&self) -> usize {
        self.lambda.nrows()
    }

    pub fn d(&self) -> usize {
        self.lambda.ncols()
    }

    pub fn n_clusters(&self) -> usize {
        self.allocated.len()
    }

    pub fn m_total(&self) -> usize {
        self.allocated.len() + self.non_allocated.len()
    }

    pub fn partition(&self) -> Partition {
        Partition::from_labels(&self.alloc)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.allocated.len()];
        for &c in &self.alloc {
            sizes[c] += 1;
        }
        sizes
    }

    /// All component locations, allocated first.
    pub fn centers(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.allocated.iter().chain(self.non_allocated.iter()).map(|c| &c.mu)
    }

    /// Check every structural invariant of the state.
    pub fn check_invariants(&self, hyper: &Hyperparams) -> Result<()> {
        let (n, p, d) = (self.n(), self.p(), self.d());
        let bad = |msg: String| Err(Error::IllConditioned(msg));
        if self.alloc.len() != n || self.sigma2.len() != p || self.psi.shape() != (p, d) || self.phi.shape() != (p, d) {
            return bad("state dimensions disagree".into());
        }
        if self.alloc.iter().any(|&c| c >= self.allocated.len()) {
            return bad("allocation label out of range".into());
        }
        if self.cluster_sizes().contains(&0) {
            return bad("allocated component without observations".into());
        }
        let region = &hyper.dpp.region;
        let centers: Vec<_> = self.centers().collect();
        for (i, mu) in centers.iter().enumerate() {
            if !region.contains(mu) {
                return bad(format!("component {i} lies outside the region"));
            }
            if centers[..i].iter().any(|o| (*o - *mu).norm() <= MIN_SEPARATION) {
                return bad(format!("component {i} duplicates another center"));
            }
        }
        let comps = self.allocated.iter().chain(self.non_allocated.iter());
        for c in comps {
            if !(c.s > 0.0) || c.delta.shape() != (d, d) {
                return bad("invalid component weight or covariance".into());
            }
        }
        if (self.phi.sum() - 1.0).abs() > 1e-10 {
            return bad(format!("phi sums to {}", self.phi.sum()));
        }
        let positive = self.sigma2.iter().chain(self.psi.iter()).chain(self.phi.iter()).all(|v| *v > 0.0);
        if !positive || !(self.tau > 0.0) || !(self.u > 0.0) {
            return bad("non-positive scale parameter".into());
        }
        Ok(())
    }
}
