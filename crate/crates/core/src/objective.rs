//! The achievable-rate objective, its closed-form gradients with respect to
//! the transmit covariance and every phase layer, and a uniform step-size
//! (Lipschitz) bound.
//!
//! All gradients follow the conjugate-coordinate convention: the returned
//! direction is the derivative with respect to the conjugated variable, so
//! a move `x + μ·∇` increases the objective to first order with real inner
//! product `2·Re⟨∇, Δx⟩`.

use crate::channel::ChannelRealization;
use crate::complexity::{Dims, MultMeter};
use crate::geometry::SimGeometry;
use crate::linalg::{
    cholesky_identity_plus, hermitian_defect, herm_eigen_sorted, scale_cols_inplace,
    scale_rows_inplace, spectral_norm, C64, CMat, CVec,
};
use crate::propagation::{
    build_transfer_chain, PhaseStack, PropagationError, SurfaceSide, TransferChain,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("infeasible point: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

/// The two fixed transfer chains of a link.
#[derive(Debug, Clone)]
pub struct ChainPair {
    pub tx: TransferChain,
    pub rx: TransferChain,
}

impl ChainPair {
    pub fn build(
        geometry_tx: &SimGeometry,
        geometry_rx: &SimGeometry,
    ) -> Result<Self, PropagationError> {
        Ok(ChainPair {
            tx: build_transfer_chain(geometry_tx, SurfaceSide::Transmit)?,
            rx: build_transfer_chain(geometry_rx, SurfaceSide::Receive)?,
        })
    }

    pub fn dims(&self) -> Dims {
        Dims {
            n_t: self.tx.antenna_count(),
            n_r: self.rx.antenna_count(),
            m: self.tx.atoms_per_layer,
            n: self.rx.atoms_per_layer,
            l: self.tx.layer_count,
            k: self.rx.layer_count,
        }
    }
}

/// One candidate solution: transmit covariance plus both phase stacks.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimPoint {
    pub q: CMat,
    pub phases_tx: PhaseStack,
    pub phases_rx: PhaseStack,
}

impl OptimPoint {
    /// Uniform-power covariance with the full budget spread over the
    /// antennas, and every phase coefficient at `e^{jπ/2}`.
    pub fn default_initial(chains: &ChainPair, power_budget: f64) -> Self {
        let d = chains.dims();
        let q = CMat::identity(d.n_t, d.n_t) * C64::new(power_budget / d.n_t as f64, 0.0);
        OptimPoint {
            q,
            phases_tx: PhaseStack::uniform_angle(
                SurfaceSide::Transmit,
                d.l,
                d.m,
                std::f64::consts::FRAC_PI_2,
            ),
            phases_rx: PhaseStack::uniform_angle(
                SurfaceSide::Receive,
                d.k,
                d.n,
                std::f64::consts::FRAC_PI_2,
            ),
        }
    }

    /// Check the feasibility invariants: Hermitian PSD covariance within
    /// the power budget and unit-modulus phases.
    pub fn validate(&self, power_budget: f64) -> Result<(), ObjectiveError> {
        let scale = self.q.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        if hermitian_defect(&self.q) > 1e-12 * scale {
            return Err(ObjectiveError::Infeasible(
                "covariance is not Hermitian".into(),
            ));
        }
        let trace: f64 = self.q.diagonal().iter().map(|z| z.re).sum();
        if trace > power_budget + 1e-9 {
            return Err(ObjectiveError::Infeasible(format!(
                "covariance trace {trace} exceeds budget {power_budget}"
            )));
        }
        let (vals, _) = herm_eigen_sorted(&self.q);
        if let Some(min) = vals.iter().cloned().reduce(f64::min) {
            if min < -1e-10 * scale {
                return Err(ObjectiveError::Infeasible(format!(
                    "covariance has negative eigenvalue {min}"
                )));
            }
        }
        let defect = self
            .phases_tx
            .unit_modulus_defect()
            .max(self.phases_rx.unit_modulus_defect());
        if defect > 1e-12 {
            return Err(ObjectiveError::Infeasible(format!(
                "phase modulus deviates from one by {defect}"
            )));
        }
        Ok(())
    }

    /// Euclidean distance over the concatenated (Q, φ, ψ) coordinates.
    pub fn distance(&self, other: &OptimPoint) -> f64 {
        let mut acc = (&self.q - &other.q).iter().map(|z| z.norm_sqr()).sum::<f64>();
        for (a, b) in self.phases_tx.layers.iter().zip(&other.phases_tx.layers) {
            acc += (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        for (a, b) in self.phases_rx.layers.iter().zip(&other.phases_rx.layers) {
            acc += (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        acc.sqrt()
    }
}

/// Closed-form ascent directions at one point.
#[derive(Debug, Clone)]
pub struct RateGradient {
    pub grad_q: CMat,
    pub grad_phi: Vec<CVec>,
    pub grad_psi: Vec<CVec>,
}

impl RateGradient {
    /// Squared norm over the concatenated coordinates.
    pub fn norm_sqr(&self) -> f64 {
        self.grad_q.iter().map(|z| z.norm_sqr()).sum::<f64>()
            + self
                .grad_phi
                .iter()
                .flat_map(|v| v.iter())
                .map(|z| z.norm_sqr())
                .sum::<f64>()
            + self
                .grad_psi
                .iter()
                .flat_map(|v| v.iter())
                .map(|z| z.norm_sqr())
                .sum::<f64>()
    }

    pub fn distance(&self, other: &RateGradient) -> f64 {
        let mut acc = (&self.grad_q - &other.grad_q)
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>();
        for (a, b) in self.grad_phi.iter().zip(&other.grad_phi) {
            acc += (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        for (a, b) in self.grad_psi.iter().zip(&other.grad_psi) {
            acc += (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        acc.sqrt()
    }
}

/// Transmit response, receive response, and noise-normalized end-to-end
/// channel for one point.
pub struct Composition {
    pub p: CMat,
    pub z: CMat,
    /// Normalized fading times transmit response (receive atoms × antennas).
    pub gp: CMat,
    pub h_bar: CMat,
}

/// Build P, Z, and H̄ for a point, charging the meter for every product.
pub fn compose(
    point: &OptimPoint,
    realization: &ChannelRealization,
    chains: &ChainPair,
    meter: &mut MultMeter,
) -> Composition {
    let d = chains.dims();
    // Transmit response.
    let mut p = chains.tx.boundary.clone();
    for (l, phi) in point.phases_tx.layers.iter().enumerate() {
        scale_rows_inplace(&mut p, phi);
        meter.diag_scale(d.m, d.n_t);
        if l + 1 < chains.tx.layer_count {
            p = &chains.tx.inner[l] * p;
            meter.matmul(d.m, d.m, d.n_t);
        }
    }
    // Receive response.
    let mut z = chains.rx.boundary.clone();
    for (k, psi) in point.phases_rx.layers.iter().enumerate() {
        scale_cols_inplace(&mut z, psi);
        meter.diag_scale(d.n_r, d.n);
        if k + 1 < chains.rx.layer_count {
            z = z * &chains.rx.inner[k];
            meter.matmul(d.n_r, d.n, d.n);
        }
    }
    let gp = &realization.g_bar * &p;
    meter.matmul(d.n, d.m, d.n_t);
    let h_bar = &z * &gp;
    meter.matmul(d.n_r, d.n, d.n_t);
    Composition { p, z, gp, h_bar }
}

/// Rate in nats per channel use: `ln det(I + H̄ Q H̄ᴴ)`.
pub fn rate_nats(
    point: &OptimPoint,
    realization: &ChannelRealization,
    chains: &ChainPair,
    meter: &mut MultMeter,
) -> f64 {
    let c = compose(point, realization, chains, meter);
    rate_nats_for_h_bar(&point.q, &c.h_bar, meter)
}

/// Rate in nats for a prebuilt normalized channel.
pub fn rate_nats_for_h_bar(q: &CMat, h_bar: &CMat, meter: &mut MultMeter) -> f64 {
    let (n_r, n_t) = h_bar.shape();
    let hq = h_bar * q;
    meter.matmul(n_r, n_t, n_t);
    let s = &hq * h_bar.adjoint();
    meter.matmul(n_r, n_t, n_r);
    let chol = cholesky_identity_plus(&s);
    2.0 * chol.l().diagonal().iter().map(|z| z.re.ln()).sum::<f64>()
}

/// Rate in bits/s/Hz from nats per channel use.
pub fn rate_bits_from_nats(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// The inverse `(I + H̄ Q H̄ᴴ)⁻¹`, obtained as a linear solve rather than an
/// explicit inversion. Hermitian with eigenvalues in (0, 1].
pub fn k_matrix(q: &CMat, h_bar: &CMat, meter: &mut MultMeter) -> CMat {
    let (n_r, n_t) = h_bar.shape();
    let hq = h_bar * q;
    meter.matmul(n_r, n_t, n_t);
    let s = &hq * h_bar.adjoint();
    meter.matmul(n_r, n_t, n_r);
    let chol = cholesky_identity_plus(&s);
    meter.cholesky_solve(n_r, n_r);
    chol.solve(&CMat::identity(n_r, n_r))
}

/// Objective value and every closed-form gradient at one point, sharing a
/// single channel composition and linear solve.
pub fn eval_with_gradient(
    point: &OptimPoint,
    realization: &ChannelRealization,
    chains: &ChainPair,
    meter: &mut MultMeter,
) -> (f64, RateGradient) {
    let d = chains.dims();
    let g_bar = &realization.g_bar;

    // Cumulative transmit products: prefix[l] multiplies everything up to
    // and including the fixed matrix of layer l (phases of layers < l
    // applied); suffix[l] multiplies everything above layer l.
    let mut prefix: Vec<CMat> = Vec::with_capacity(d.l);
    prefix.push(chains.tx.boundary.clone());
    for l in 1..d.l {
        let mut scaled = prefix[l - 1].clone();
        scale_rows_inplace(&mut scaled, &point.phases_tx.layers[l - 1]);
        meter.diag_scale(d.m, d.n_t);
        let next = &chains.tx.inner[l - 1] * scaled;
        meter.matmul(d.m, d.m, d.n_t);
        prefix.push(next);
    }
    let mut suffix: Vec<Option<CMat>> = vec![None; d.l]; // None stands for identity
    for l in (0..d.l.saturating_sub(1)).rev() {
        let mut scaled = chains.tx.inner[l].clone();
        scale_rows_inplace(&mut scaled, &point.phases_tx.layers[l + 1]);
        meter.diag_scale(d.m, d.m);
        let combined = match &suffix[l + 1] {
            None => scaled,
            Some(s) => {
                meter.matmul(d.m, d.m, d.m);
                s * scaled
            }
        };
        suffix[l] = Some(combined);
    }
    let mut p = prefix[d.l - 1].clone();
    scale_rows_inplace(&mut p, &point.phases_tx.layers[d.l - 1]);
    meter.diag_scale(d.m, d.n_t);

    // Cumulative receive products: pre[k] runs from the antenna boundary up
    // to and including the fixed matrix of layer k; post[k] covers the
    // layers above k.
    let mut pre: Vec<CMat> = Vec::with_capacity(d.k);
    pre.push(chains.rx.boundary.clone());
    for k in 1..d.k {
        let mut scaled = pre[k - 1].clone();
        scale_cols_inplace(&mut scaled, &point.phases_rx.layers[k - 1]);
        meter.diag_scale(d.n_r, d.n);
        let next = scaled * &chains.rx.inner[k - 1];
        meter.matmul(d.n_r, d.n, d.n);
        pre.push(next);
    }
    let mut post: Vec<Option<CMat>> = vec![None; d.k];
    for k in (0..d.k.saturating_sub(1)).rev() {
        let mut scaled = chains.rx.inner[k].clone();
        scale_cols_inplace(&mut scaled, &point.phases_rx.layers[k + 1]);
        meter.diag_scale(d.n, d.n);
        let combined = match &post[k + 1] {
            None => scaled,
            Some(s) => {
                meter.matmul(d.n, d.n, d.n);
                scaled * s
            }
        };
        post[k] = Some(combined);
    }
    let mut z = pre[d.k - 1].clone();
    scale_cols_inplace(&mut z, &point.phases_rx.layers[d.k - 1]);
    meter.diag_scale(d.n_r, d.n);

    let gp = g_bar * &p;
    meter.matmul(d.n, d.m, d.n_t);
    let h_bar = &z * &gp;
    meter.matmul(d.n_r, d.n, d.n_t);

    // Shared solve: V = (I + H̄QH̄ᴴ)⁻¹ H̄ yields the rate, the covariance
    // gradient H̄ᴴV, and the K-dependent middles of the chain gradients.
    let hq = &h_bar * &point.q;
    meter.matmul(d.n_r, d.n_t, d.n_t);
    let s = &hq * h_bar.adjoint();
    meter.matmul(d.n_r, d.n_t, d.n_r);
    let chol = cholesky_identity_plus(&s);
    let f_nats = 2.0 * chol.l().diagonal().iter().map(|z| z.re.ln()).sum::<f64>();
    let v = chol.solve(&h_bar);
    meter.cholesky_solve(d.n_r, d.n_t);
    let grad_q = h_bar.adjoint() * &v;
    meter.matmul(d.n_t, d.n_r, d.n_t);

    // Middle of the transmit-layer gradient: Q·H̄ᴴK·Z·Ḡ, using H̄ᴴK = Vᴴ.
    let vh_z = v.adjoint() * &z;
    meter.matmul(d.n_t, d.n_r, d.n);
    let vh_z_g = &vh_z * g_bar;
    meter.matmul(d.n_t, d.n, d.m);
    let mid_tx = &point.q * vh_z_g;
    meter.matmul(d.n_t, d.n_t, d.m);

    let mut grad_phi = Vec::with_capacity(d.l);
    for l in 0..d.l {
        let r = &prefix[l] * &mid_tx;
        meter.matmul(d.m, d.n_t, d.m);
        let mut g = CVec::zeros(d.m);
        match &suffix[l] {
            None => {
                for m in 0..d.m {
                    g[m] = r[(m, m)].conj();
                }
            }
            Some(t) => {
                meter.bulk(d.m * d.m);
                for m in 0..d.m {
                    let mut acc = C64::new(0.0, 0.0);
                    for t_idx in 0..d.m {
                        acc += r[(m, t_idx)] * t[(t_idx, m)];
                    }
                    g[m] = acc.conj();
                }
            }
        }
        grad_phi.push(g);
    }

    // Middle of the receive-layer gradient: Ḡ·P·Q·H̄ᴴK = (ḠP)·Q·Vᴴ.
    let gpq = &gp * &point.q;
    meter.matmul(d.n, d.n_t, d.n_t);
    let mid_rx = &gpq * v.adjoint();
    meter.matmul(d.n, d.n_t, d.n_r);

    let mut grad_psi = Vec::with_capacity(d.k);
    for k in 0..d.k {
        let r = match &post[k] {
            None => mid_rx.clone(),
            Some(fpost) => {
                meter.matmul(d.n, d.n, d.n_r);
                fpost * &mid_rx
            }
        };
        meter.bulk(d.n * d.n_r);
        let mut g = CVec::zeros(d.n);
        for n_idx in 0..d.n {
            let mut acc = C64::new(0.0, 0.0);
            for t_idx in 0..d.n_r {
                acc += r[(n_idx, t_idx)] * pre[k][(t_idx, n_idx)];
            }
            g[n_idx] = acc.conj();
        }
        grad_psi.push(g);
    }

    (
        f_nats,
        RateGradient {
            grad_q,
            grad_phi,
            grad_psi,
        },
    )
}

/// Gradients only; see [`eval_with_gradient`].
pub fn gradient(
    point: &OptimPoint,
    realization: &ChannelRealization,
    chains: &ChainPair,
) -> RateGradient {
    eval_with_gradient(point, realization, chains, &mut MultMeter::new()).1
}

/// A phase-independent Lipschitz bound for the full gradient, valid over
/// the entire feasible set, assembled from spectral norms of the fixed
/// chain factors and the fading matrix. Diagonal unit-modulus scalings
/// have spectral norm one, so products of the fixed-factor norms bound the
/// responses for every feasible phase choice; this makes the constant
/// usable as one uniform step bound for a whole run. Conservative by
/// construction.
pub fn lipschitz_constant(
    realization: &ChannelRealization,
    chains: &ChainPair,
    power_budget: f64,
    noise_power: f64,
) -> f64 {
    let g_norm = spectral_norm(&realization.g);
    let tx_bound = spectral_norm(&chains.tx.boundary)
        * chains.tx.inner.iter().map(spectral_norm).product::<f64>();
    let rx_bound = spectral_norm(&chains.rx.boundary)
        * chains.rx.inner.iter().map(spectral_norm).product::<f64>();

    // Bounds on the responses and the normalized channel over the feasible
    // set; the ratio terms of the per-block constants collapse so that the
    // channel bound only enters the covariance block.
    let h_bar_bound = rx_bound * (g_norm / noise_power.sqrt()) * tx_bound;
    let shared = (tx_bound + rx_bound) * power_budget * g_norm * g_norm * rx_bound * rx_bound
        / noise_power;

    let lambda_q = tx_bound * g_norm * h_bar_bound + rx_bound * rx_bound * g_norm;
    let lambda_phi = 2.0 * g_norm * g_norm * tx_bound * rx_bound * rx_bound + shared;
    let lambda_psi = 2.0 * g_norm * g_norm * tx_bound * tx_bound * rx_bound + shared;

    lambda_q.max(lambda_phi).max(lambda_psi)
}
