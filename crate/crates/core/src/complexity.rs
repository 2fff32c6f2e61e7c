//! Complex-multiplication accounting: an instrumented tally fed by the hot
//! paths, plus the closed-form per-iteration cost of the gradient method
//! for cross-checking.

use serde::Serialize;

/// Problem dimensions used by the closed-form cost expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dims {
    pub n_t: usize,
    pub n_r: usize,
    /// Atoms per transmit layer.
    pub m: usize,
    /// Atoms per receive layer.
    pub n: usize,
    /// Transmit layers.
    pub l: usize,
    /// Receive layers.
    pub k: usize,
}

/// Running tally of complex multiplications, counted at matrix-product
/// granularity (the product of the three dimensions for a dense multiply),
/// not FMA-level micro-ops.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MultMeter {
    pub count: u64,
}

impl MultMeter {
    pub fn new() -> Self {
        MultMeter { count: 0 }
    }

    /// Dense (m×k)·(k×n) product.
    #[inline]
    pub fn matmul(&mut self, m: usize, k: usize, n: usize) {
        self.count += (m * k * n) as u64;
    }

    /// Diagonal scaling of an m×n matrix (either side).
    #[inline]
    pub fn diag_scale(&mut self, m: usize, n: usize) {
        self.count += (m * n) as u64;
    }

    /// Any element-wise batch of `n` complex multiplications.
    #[inline]
    pub fn bulk(&mut self, n: usize) {
        self.count += n as u64;
    }

    /// Cholesky factorization of an n×n Hermitian matrix plus a solve with
    /// `rhs` right-hand sides, charged at the usual cubic/quadratic counts.
    #[inline]
    pub fn cholesky_solve(&mut self, n: usize, rhs: usize) {
        self.count += (n * n * n + n * n * rhs) as u64;
    }

    /// Hermitian eigendecomposition of an n×n matrix, charged cubically.
    #[inline]
    pub fn eigen(&mut self, n: usize) {
        self.count += (n * n * n) as u64;
    }
}

/// Closed-form complex multiplications of one simultaneous gradient-ascent
/// iteration, summed term by term. The cubic chain terms only appear once
/// a stack has at least three layers, so `(L−2)` and `(K−2)` are clamped at
/// zero; every reported value stays nonnegative.
pub fn formula_cost_per_iteration(dims: Dims) -> u64 {
    let (nt, nr, m, n) = (dims.n_t as u64, dims.n_r as u64, dims.m as u64, dims.n as u64);
    let l_excess = dims.l.saturating_sub(2) as u64;
    let k_excess = dims.k.saturating_sub(2) as u64;
    let mut c = 0u64;
    c += nt * nt * nt; // covariance eigendecomposition
    c += 2 * nt * nt; // step scaling and spectrum handling
    c += (nt * nt + nt) * nt / 2; // rebuild from eigenvectors
    c += n * nr * nr;
    c += nt * nr * nr;
    c += m * m * nt;
    c += m * nt * nt;
    c += 2 * nt * nt * nr;
    c += nt * nt * m;
    c += nr * nr * n;
    c += m * n * (nt + nr);
    c += (m * n + 3) * (m + n); // chain-by-gradient products plus phase projections
    c += l_excess * m * m * m;
    c += k_excess * n * n * n;
    c
}

/// Leading-order approximation of [`formula_cost_per_iteration`] for large
/// surfaces: the chain products dominate everything polynomial in the
/// antenna counts.
pub fn large_sim_approximation(dims: Dims) -> u64 {
    let (m, n) = (dims.m as u64, dims.n as u64);
    let l_excess = dims.l.saturating_sub(2) as u64;
    let k_excess = dims.k.saturating_sub(2) as u64;
    (m * n + 3) * (m + n) + l_excess * m * m * m + k_excess * n * n * n
}

/// Cumulative multiplication count at the first trace entry whose rate
/// reaches `threshold_fraction` of the final rate. `None` when the trace
/// never gets there (possible only for thresholds above 1 or empty traces).
pub fn cost_to_threshold(
    rates: &[f64],
    cum_mults: &[u64],
    threshold_fraction: f64,
) -> Option<u64> {
    assert_eq!(rates.len(), cum_mults.len());
    if threshold_fraction <= 0.0 {
        return Some(0);
    }
    let final_rate = *rates.last()?;
    let target = threshold_fraction * final_rate;
    rates
        .iter()
        .zip(cum_mults.iter())
        .find(|(r, _)| **r >= target)
        .map(|(_, c)| *c)
}
