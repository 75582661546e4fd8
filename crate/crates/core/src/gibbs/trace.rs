use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LoadingsInit;

/// Run length, thinning and tuning knobs of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub n_burn: usize,
    pub n_save: usize,
    pub thin: usize,
    /// MALA step `s` in `Λ' = Λ + s²/2 ∇ + s ξ`.
    pub mala_step: f64,
    /// Adapt `mala_step` during burn-in toward [`MALA_TARGET_ACCEPT`]; it is
    /// frozen once burn-in ends.
    pub tune_mala: bool,
    /// Same for `mu_step_frac` toward [`MU_TARGET_ACCEPT`].
    pub tune_mu: bool,
    /// Scale the MALA drift and noise row by row with the inverse of the
    /// Gaussian part of the conditional precision of `Λ`.
    pub mala_precondition: bool,
    pub init_loadings: LoadingsInit,
    pub bd_steps_per_sweep: usize,
    /// Random-walk scale of allocated centers as a fraction of the region
    /// width along each axis.
    pub mu_step_frac: f64,
    pub seed: u64,
}

pub const MALA_TARGET_ACCEPT: f64 = 0.25;
pub const MU_TARGET_ACCEPT: f64 = 0.3;

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            n_burn: 2000,
            n_save: 4000,
            thin: 5,
            mala_step: 1e-9,
            tune_mala: true,
            tune_mu: true,
            mala_precondition: true,
            init_loadings: LoadingsInit::Pca,
            bd_steps_per_sweep: 10,
            mu_step_frac: 1.0 / 50.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be at least 1".into()));
        }
        if !(self.mala_step > 0.0 && self.mala_step.is_finite()) {
            return Err(Error::InvalidParameter(format!("mala_step must be positive, got {}", self.mala_step)));
        }
        if !(self.mu_step_frac > 0.0 && self.mu_step_frac.is_finite()) {
            return Err(Error::InvalidParameter(format!("mu_step_frac must be positive, got {}", self.mu_step_frac)));
        }
        Ok(())
    }

    /// Number of records a chain with this configuration stores.
    pub fn n_records(&self) -> usize {
        self.n_save / self.thin.max(1)
    }
}

/// Accepted and proposed counts of one Metropolis-Hastings move type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counter {
    pub accepted: u64,
    pub proposed: u64,
}

impl Counter {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += u64::from(accepted);
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Acceptance {
    pub mala: Counter,
    pub birth_death: Counter,
    pub mu: Counter,
    /// MALA proposals rejected because the proposed loadings were invalid.
    pub mala_invalid: u64,
}

/// One saved iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    /// 1-based sweep index counted from the start of the chain.
    pub iter: usize,
    pub n_clusters: usize,
    pub m_total: usize,
    /// MALA acceptance rate over the saved phase so far.
    pub accept_mala: f64,
    /// 0-based labels compacted in order of first appearance.
    pub labels: Vec<usize>,
    /// `log Σ_h (S_h / T) N_p(y_i | Λμ_h, Σ + ΛΔ_hΛᵀ)` per observation.
    pub loglik: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainTrace {
    pub records: Vec<TraceRecord>,
    /// Counters over the saved phase.
    pub acceptance: Acceptance,
    /// The MALA step used after burn-in.
    pub mala_step: f64,
    /// The center random-walk scale used after burn-in.
    pub mu_step_frac: f64,
}

impl ChainTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_clusters(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.n_clusters).collect()
    }

    pub fn partitions(&self) -> impl Iterator<Item = &[usize]> {
        self.records.iter().map(|r| r.labels.as_slice())
    }

    /// Saved iterations × observations.
    pub fn loglik_matrix(&self) -> Vec<Vec<f64>> {
        self.records.iter().map(|r| r.loglik.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_count_drops_partial_window() {
        let cfg = SamplerConfig { n_save: 11, thin: 5, ..Default::default() };
        assert_eq!(cfg.n_records(), 2);
    }

    #[test]
    fn counter_rate() {
        let mut c = Counter::default();
        assert_eq!(c.rate(), 0.0);
        c.record(true);
        c.record(false);
        assert_eq!(c.rate(), 0.5);
    }
}
