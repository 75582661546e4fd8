use nalgebra::{DMatrix, DVector};

use super::{check_lambda, phi_of_q, Anisotropy, DppSpec};
use crate::error::{Error, Result};

/// Spectral density evaluated on the lattice `{-N..N}^d` for a fixed `Λ`.
///
/// Lattice points are stored in row-major order with the last coordinate
/// varying fastest. Because `φ(k) = φ(-k)` the approximate kernel
/// `C(x, y) = Σ_k φ/(1-φ) e^{2πi⟨k, x-y⟩}` is real, and it is evaluated as a
/// cosine sum.
#[derive(Debug, Clone)]
pub struct SpectralTable {
    d: usize,
    n: usize,
    lattice: Vec<i32>,
    phi: Vec<f64>,
    weights: Vec<f64>,
    q: Vec<f64>,
    slope: Vec<f64>,
    d_app: f64,
    lambda: DMatrix<f64>,
    pub(crate) aniso: Anisotropy,
}

impl SpectralTable {
    pub fn build(spec: &DppSpec, lambda: &DMatrix<f64>) -> Result<Self> {
        let d = spec.dim();
        check_lambda(lambda, d)?;
        let aniso = Anisotropy::new(lambda)?;
        let n = spec.trunc_n;
        let side = 2 * n + 1;
        let len = side.pow(d as u32);
        let mut lattice = Vec::with_capacity(len * d);
        let mut phi = Vec::with_capacity(len);
        let mut weights = Vec::with_capacity(len);
        let mut q = Vec::with_capacity(len);
        let mut slope = Vec::with_capacity(len);
        let mut d_app = 0.0;
        let mut k = vec![0.0; d];
        for idx in 0..len {
            let mut rem = idx;
            for t in (0..d).rev() {
                let digit = (rem % side) as i32 - n as i32;
                rem /= side;
                k[t] = digit as f64;
            }
            lattice.extend(k.iter().map(|&v| v as i32));
            let qk = aniso.q(&k);
            let (p, s) = phi_of_q(spec, qk);
            if !(p < 1.0) {
                return Err(Error::Existence { index: idx, value: p });
            }
            d_app -= (-p).ln_1p();
            phi.push(p);
            weights.push(p / (1.0 - p));
            q.push(qk);
            slope.push(s);
        }
        Ok(Self { d, n, lattice, phi, weights, q, slope, d_app, lambda: lambda.clone(), aniso })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn truncation(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.phi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phi.is_empty()
    }

    /// The `idx`-th lattice point.
    pub fn lattice_point(&self, idx: usize) -> &[i32] {
        &self.lattice[idx * self.d..(idx + 1) * self.d]
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// `φ/(1-φ)` per lattice point.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn q_values(&self) -> &[f64] {
        &self.q
    }

    pub(crate) fn slopes(&self) -> &[f64] {
        &self.slope
    }

    pub fn d_app(&self) -> f64 {
        self.d_app
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    /// Expected number of points of the truncated process, `Σ φ(k)`.
    pub fn expected_count(&self) -> f64 {
        self.phi.iter().sum()
    }

    /// Diagonal value `C(x, x) = Σ φ/(1-φ)`.
    pub fn kernel_diagonal(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Visit every lattice point with `cos(2π⟨k, delta⟩)`.
    pub(crate) fn for_each_cos(&self, delta: &[f64], mut f: impl FnMut(usize, f64)) {
        let d = self.d;
        let side = 2 * self.n + 1;
        let two_pi = 2.0 * std::f64::consts::PI;
        // Per-coordinate factors e^{2πi k_t δ_t}.
        let mut factors = vec![(0.0, 0.0); d * side];
        for t in 0..d {
            for j in 0..side {
                let ang = two_pi * (j as f64 - self.n as f64) * delta[t];
                factors[t * side + j] = (ang.cos(), ang.sin());
            }
        }
        let mul = |a: (f64, f64), b: (f64, f64)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
        // prefix[t] is the product of the factors for coordinates 0..t.
        let mut prefix = vec![(1.0, 0.0); d];
        let mut digits = vec![0usize; d];
        for t in 1..d {
            prefix[t] = mul(prefix[t - 1], factors[(t - 1) * side]);
        }
        let last = &factors[(d - 1) * side..];
        let mut idx = 0;
        loop {
            let pre = prefix[d - 1];
            for e in last {
                f(idx, pre.0 * e.0 - pre.1 * e.1);
                idx += 1;
            }
            if d == 1 {
                return;
            }
            // Advance the odometer over the leading d-1 coordinates.
            let mut t = d - 2;
            loop {
                digits[t] += 1;
                if digits[t] < side {
                    break;
                }
                digits[t] = 0;
                if t == 0 {
                    return;
                }
                t -= 1;
            }
            for s in t..d - 1 {
                prefix[s + 1] = mul(prefix[s], factors[s * side + digits[s]]);
            }
        }
    }

    /// `C^app(x, y)` for points already mapped into the unit cube.
    pub fn kernel(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        let delta: Vec<f64> = x.iter().zip(y.iter()).map(|(a, b)| a - b).collect();
        let w = &self.weights;
        let mut s = 0.0;
        self.for_each_cos(&delta, |i, c| s += w[i] * c);
        s
    }
}
