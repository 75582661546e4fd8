//! Partition point estimates, agreement scores and WAIC from saved draws.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn choose2(n: usize) -> f64 {
    (n as f64) * (n as f64 - 1.0) / 2.0
}

/// Adjusted Rand index between two labelings of the same items.
///
/// When both partitions are trivial in the same way (the index is 0/0) the
/// partitions are identical and 1 is returned.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("partitions of {} and {} items", a.len(), b.len())));
    }
    let mut table: HashMap<(usize, usize), usize> = HashMap::new();
    let mut rows: HashMap<usize, usize> = HashMap::new();
    let mut cols: HashMap<usize, usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&v| choose2(v)).sum();
    let sum_a: f64 = rows.values().map(|&v| choose2(v)).sum();
    let sum_b: f64 = cols.values().map(|&v| choose2(v)).sum();
    let total = choose2(a.len());
    let expected = if total > 0.0 { sum_a * sum_b / total } else { 0.0 };
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Co-clustering frequencies over a set of sampled partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix(DMatrix<f64>);

impl SimilarityMatrix {
    pub fn from_partitions<'a>(parts: impl IntoIterator<Item = &'a [usize]>) -> Result<Self> {
        let mut counts: Option<DMatrix<f64>> = None;
        let mut s = 0usize;
        for part in parts {
            let n = part.len();
            let m = counts.get_or_insert_with(|| DMatrix::zeros(n, n));
            if m.nrows() != n {
                return Err(Error::Dimension("sampled partitions differ in length".into()));
            }
            for i in 0..n {
                for j in 0..i {
                    if part[i] == part[j] {
                        m[(i, j)] += 1.0;
                    }
                }
            }
            s += 1;
        }
        let mut m = counts.ok_or(Error::Empty("no sampled partitions"))?;
        m /= s as f64;
        for i in 0..m.nrows() {
            m[(i, i)] = 1.0;
            for j in 0..i {
                m[(j, i)] = m[(i, j)];
            }
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// Expected Binder loss of `part` with equal costs:
    /// `Σ_{i<j} |1[c_i = c_j] − Sim_ij|`.
    pub fn binder_loss(&self, part: &[usize]) -> f64 {
        let mut loss = 0.0;
        for i in 0..part.len() {
            for j in 0..i {
                let same = if part[i] == part[j] { 1.0 } else { 0.0 };
                loss += (same - self.0[(i, j)]).abs();
            }
        }
        loss
    }
}

/// The sampled partition minimizing the expected Binder loss, and its index.
/// Ties go to the earliest draw.
pub fn binder_estimate(parts: &[Vec<usize>]) -> Result<(usize, &[usize])> {
    let sim = SimilarityMatrix::from_partitions(parts.iter().map(|p| p.as_slice()))?;
    let mut best = (0, f64::INFINITY);
    for (s, part) in parts.iter().enumerate() {
        let loss = sim.binder_loss(part);
        if loss < best.1 {
            best = (s, loss);
        }
    }
    Ok((best.0, &parts[best.0]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NclusSummary {
    /// Most frequent value; the smallest one on ties.
    pub mode: usize,
    pub mean: f64,
    /// Relative frequency of each observed value.
    pub histogram: BTreeMap<usize, f64>,
}

pub fn nclus_summary(nclus: &[usize]) -> Result<NclusSummary> {
    if nclus.is_empty() {
        return Err(Error::Empty("no cluster counts"));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for &k in nclus {
        *counts.entry(k).or_default() += 1;
    }
    let top = counts.values().copied().max().unwrap_or(0);
    let mode = counts.iter().find(|(_, &c)| c == top).map(|(&k, _)| k).unwrap_or(0);
    let n = nclus.len() as f64;
    let mean = nclus.iter().sum::<usize>() as f64 / n;
    let histogram = counts.into_iter().map(|(k, c)| (k, c as f64 / n)).collect();
    Ok(NclusSummary { mode, mean, histogram })
}

/// Linearly interpolated empirical quantile of sorted values.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed interval of the per-draw ARI against `truth`.
pub fn ari_credible_interval<'a>(
    parts: impl IntoIterator<Item = &'a [usize]>,
    truth: &[usize],
    level: f64,
) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("credible level must lie in (0, 1), got {level}")));
    }
    let mut aris = parts.into_iter().map(|p| adjusted_rand_index(p, truth)).collect::<Result<Vec<_>>>()?;
    if aris.is_empty() {
        return Err(Error::Empty("no sampled partitions"));
    }
    aris.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile_sorted(&aris, tail), quantile_sorted(&aris, 1.0 - tail)))
}

/// `Σ_i [log mean_s exp(ℓ_si) − var_s(ℓ_si)]` for a draws × observations
/// matrix, with the sample variance over draws (denominator `S − 1`, zero for
/// a single draw). Larger is better.
pub fn waic(loglik: &[Vec<f64>]) -> Result<f64> {
    let s = loglik.len();
    if s == 0 {
        return Err(Error::Empty("no log-likelihood draws"));
    }
    let n = loglik[0].len();
    if loglik.iter().any(|r| r.len() != n) {
        return Err(Error::Dimension("log-likelihood rows differ in length".into()));
    }
    if loglik.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite log-likelihood entry".into()));
    }
    let mut total = 0.0;
    for i in 0..n {
        let col = loglik.iter().map(|r| r[i]);
        let max = col.clone().fold(f64::NEG_INFINITY, f64::max);
        let lppd = max + (col.clone().map(|v| (v - max).exp()).sum::<f64>() / s as f64).ln();
        let mean = col.clone().sum::<f64>() / s as f64;
        let var = if s > 1 { col.map(|v| (v - mean).powi(2)).sum::<f64>() / (s - 1) as f64 } else { 0.0 };
        total += lppd - var;
    }
    Ok(total)
}

/// `δ_{c,j} = z̄_{c,j} − z̄_j`: per-cluster feature prevalence minus the
/// overall prevalence, as `(cluster, feature, delta)` rows with 0-based
/// cluster labels in order of first appearance.
pub fn binary_deltas(z: &DMatrix<f64>, labels: &[usize]) -> Result<Vec<(usize, usize, f64)>> {
    if z.nrows() != labels.len() {
        return Err(Error::Dimension("labels and binary data disagree in length".into()));
    }
    if labels.is_empty() {
        return Err(Error::Empty("no observations"));
    }
    let part = crate::model::Partition::from_labels(labels);
    let n = z.nrows() as f64;
    let mut out = Vec::with_capacity(part.n_clusters() * z.ncols());
    for c in 0..part.n_clusters() {
        let size = part.sizes()[c] as f64;
        for j in 0..z.ncols() {
            let overall = z.column(j).sum() / n;
            let within: f64 = part.labels().iter().enumerate().filter(|(_, &l)| l == c).map(|(i, _)| z[(i, j)]).sum();
            out.push((c, j, within / size - overall));
        }
    }
    Ok(out)
}

/// The four table statistics plus WAIC. Every field is absent for an empty
/// trace; the ARI fields need true labels and `waic` needs log-likelihoods.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode_nclus: Option<usize>,
    pub mean_nclus: Option<f64>,
    pub ari_best: Option<f64>,
    pub ci_ari: Option<[f64; 2]>,
    pub waic: Option<f64>,
}

/// Summary statistics of saved partitions together with the Binder point
/// estimate (`None` for an empty trace).
pub fn summarize(
    parts: &[Vec<usize>],
    truth: Option<&[usize]>,
    loglik: Option<&[Vec<f64>]>,
    level: f64,
) -> Result<(Summary, Option<Vec<usize>>)> {
    if parts.is_empty() {
        return Ok((Summary::default(), None));
    }
    let nclus: Vec<usize> = parts.iter().map(|p| crate::model::Partition::from_labels(p).n_clusters()).collect();
    let ns = nclus_summary(&nclus)?;
    let (_, best) = binder_estimate(parts)?;
    let (ari_best, ci_ari) = match truth {
        Some(t) => {
            let ari = adjusted_rand_index(best, t)?;
            let (lo, hi) = ari_credible_interval(parts.iter().map(|p| p.as_slice()), t, level)?;
            (Some(ari), Some([lo, hi]))
        }
        None => (None, None),
    };
    let waic = loglik.map(waic).transpose()?;
    let summary = Summary { mode_nclus: Some(ns.mode), mean_nclus: Some(ns.mean), ari_best, ci_ari, waic };
    Ok((summary, Some(best.to_vec())))
}
