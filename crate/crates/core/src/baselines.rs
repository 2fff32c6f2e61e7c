//! Comparison methods: alternating (coordinate-wise) optimization over the
//! phase elements, fixed phase profiles, and a conventional fully digital
//! MIMO reference.

use crate::channel::ChannelRealization;
use crate::complexity::MultMeter;
use crate::linalg::{herm_eigen_sorted, C64, CMat};
use crate::objective::{
    compose, rate_bits_from_nats, rate_nats, rate_nats_for_h_bar, ChainPair, ObjectiveError,
    OptimPoint,
};
use crate::optimizer::{IterRecord, RunTrace, StopReason};
use crate::propagation::SurfaceSide;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Settings of the alternating-optimization benchmark.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AoConfig {
    /// Equispaced angles tried per element before parabolic refinement.
    pub phase_grid_points: usize,
    pub max_outer_iters: usize,
    pub rel_tol: f64,
}

impl Default for AoConfig {
    fn default() -> Self {
        AoConfig {
            phase_grid_points: 32,
            max_outer_iters: 30,
            rel_tol: 1e-4,
        }
    }
}

impl AoConfig {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if self.phase_grid_points < 4 {
            return Err(ObjectiveError::Infeasible(format!(
                "phase grid needs at least 4 points, got {}",
                self.phase_grid_points
            )));
        }
        if self.max_outer_iters == 0 {
            return Err(ObjectiveError::Infeasible(
                "max_outer_iters must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Capacity-achieving allocation over parallel gains: fill
/// `d_i = (ν − 1/g_i)₊` until the budget is exhausted. Returns the
/// allocations and the level ν.
pub fn capacity_water_filling(gains: &[f64], budget: f64) -> (Vec<f64>, f64) {
    if budget <= 0.0 || gains.iter().all(|&g| g <= 0.0) {
        return (vec![0.0; gains.len()], 0.0);
    }
    let max_inv = gains
        .iter()
        .filter(|&&g| g > 0.0)
        .map(|&g| 1.0 / g)
        .fold(0.0, f64::max);
    let mut lo = 0.0;
    let mut hi = budget + max_inv;
    let total = |nu: f64| -> f64 {
        gains
            .iter()
            .map(|&g| if g > 0.0 { (nu - 1.0 / g).max(0.0) } else { 0.0 })
            .sum()
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
        if (total(mid) - budget).abs() <= 1e-12 * budget.max(1.0) {
            break;
        }
    }
    let nu = 0.5 * (lo + hi);
    let alloc = gains
        .iter()
        .map(|&g| if g > 0.0 { (nu - 1.0 / g).max(0.0) } else { 0.0 })
        .collect();
    (alloc, nu)
}

/// The covariance maximizing the rate for a fixed channel: water-fill over
/// the eigenmodes of H̄ᴴH̄.
pub fn capacity_covariance(h_bar: &CMat, budget: f64, meter: &mut MultMeter) -> CMat {
    let (n_r, n_t) = h_bar.shape();
    let gram = h_bar.adjoint() * h_bar;
    meter.matmul(n_t, n_r, n_t);
    let (gains, vecs) = herm_eigen_sorted(&gram);
    meter.eigen(n_t);
    let (alloc, _) = capacity_water_filling(gains.as_slice(), budget);
    let mut scaled = CMat::zeros(n_t, n_t);
    for j in 0..n_t {
        let col = vecs.column(j) * C64::new(alloc[j], 0.0);
        scaled.set_column(j, &col);
    }
    meter.bulk(2 * n_t * n_t * n_t);
    scaled * vecs.adjoint()
}

/// Grid-search one element's phase (all else fixed), refine the best grid
/// angle with a single parabolic fit, and keep the best candidate seen -
/// the current phase included, so the update can never lose ground.
/// Returns the objective after the update.
#[allow(clippy::too_many_arguments)]
fn optimize_element(
    point: &mut OptimPoint,
    side: SurfaceSide,
    layer: usize,
    atom: usize,
    f_current: f64,
    realization: &ChannelRealization,
    chains: &ChainPair,
    grid_points: usize,
    meter: &mut MultMeter,
) -> f64 {
    let current = match side {
        SurfaceSide::Transmit => point.phases_tx.layers[layer][atom],
        SurfaceSide::Receive => point.phases_rx.layers[layer][atom],
    };
    let eval = |point: &mut OptimPoint, theta: f64, meter: &mut MultMeter| -> f64 {
        let coeff = C64::from_polar(1.0, theta);
        match side {
            SurfaceSide::Transmit => point.phases_tx.layers[layer][atom] = coeff,
            SurfaceSide::Receive => point.phases_rx.layers[layer][atom] = coeff,
        }
        rate_nats(point, realization, chains, meter)
    };

    let step = 2.0 * PI / grid_points as f64;
    let mut grid_f = Vec::with_capacity(grid_points);
    let mut best_idx = 0;
    let mut best = (current.im.atan2(current.re), f_current);
    for i in 0..grid_points {
        let theta = i as f64 * step;
        let f = eval(point, theta, meter);
        grid_f.push(f);
        if f > best.1 {
            best = (theta, f);
            best_idx = i;
        }
    }
    // One parabolic refinement through the best grid angle and its neighbors.
    if grid_f[best_idx] >= f_current {
        let fm = grid_f[(best_idx + grid_points - 1) % grid_points];
        let f0 = grid_f[best_idx];
        let fp = grid_f[(best_idx + 1) % grid_points];
        let denom = fm - 2.0 * f0 + fp;
        if denom < -1e-15 {
            let offset = 0.5 * (fm - fp) / denom;
            if offset.abs() <= 1.0 {
                let theta_v = best_idx as f64 * step + offset * step;
                let f_v = eval(point, theta_v, meter);
                if f_v > best.1 {
                    best = (theta_v, f_v);
                }
            }
        }
    }
    // Restore the winner (the evaluation closure leaves the last candidate
    // in place).
    let coeff = C64::from_polar(1.0, best.0);
    match side {
        SurfaceSide::Transmit => point.phases_tx.layers[layer][atom] = coeff,
        SurfaceSide::Receive => point.phases_rx.layers[layer][atom] = coeff,
    }
    best.1
}

/// One full alternating pass: every transmit element, every receive
/// element, then the exact covariance update. `on_update` observes the
/// objective after each coordinate update.
#[allow(clippy::too_many_arguments)]
pub fn ao_outer_sweep(
    point: &mut OptimPoint,
    f_current: f64,
    realization: &ChannelRealization,
    chains: &ChainPair,
    config: &AoConfig,
    power_budget: f64,
    meter: &mut MultMeter,
    mut on_update: impl FnMut(f64),
) -> f64 {
    let dims = chains.dims();
    let mut f = f_current;
    for layer in 0..dims.l {
        for atom in 0..dims.m {
            f = optimize_element(
                point,
                SurfaceSide::Transmit,
                layer,
                atom,
                f,
                realization,
                chains,
                config.phase_grid_points,
                meter,
            );
            on_update(f);
        }
    }
    for layer in 0..dims.k {
        for atom in 0..dims.n {
            f = optimize_element(
                point,
                SurfaceSide::Receive,
                layer,
                atom,
                f,
                realization,
                chains,
                config.phase_grid_points,
                meter,
            );
            on_update(f);
        }
    }
    let comp = compose(point, realization, chains, meter);
    point.q = capacity_covariance(&comp.h_bar, power_budget, meter);
    f = rate_nats_for_h_bar(&point.q, &comp.h_bar, meter);
    on_update(f);
    f
}

/// Alternating optimization: sweep all phase elements one at a time, update
/// the covariance exactly, repeat until the objective stalls. One outer
/// iteration covers every element of both stacks plus the covariance.
pub fn ao_run(
    initial: &OptimPoint,
    realization: &ChannelRealization,
    chains: &ChainPair,
    config: &AoConfig,
    power_budget: f64,
) -> Result<(RunTrace, OptimPoint), ObjectiveError> {
    config.validate()?;
    initial.validate(power_budget)?;
    let dims = chains.dims();
    let elements_per_sweep = (dims.l * dims.m + dims.k * dims.n + 1) as u64;

    let mut meter = MultMeter::new();
    let mut point = initial.clone();
    let mut f = rate_nats(&point, realization, chains, &mut MultMeter::new());
    let initial_f = f;
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIterations;

    for outer in 1..=config.max_outer_iters {
        let f_prev = f;
        f = ao_outer_sweep(
            &mut point,
            f,
            realization,
            chains,
            config,
            power_budget,
            &mut meter,
            |_| {},
        );
        records.push(IterRecord {
            iteration: outer,
            f_nats: f,
            rate_bits: rate_bits_from_nats(f),
            steps: [0.0; 3],
            kappa: [0; 3],
            inner_steps: elements_per_sweep,
            cum_mults: meter.count,
        });
        if (f - f_prev).abs() <= config.rel_tol * f_prev.abs().max(1e-12) {
            stop = StopReason::Converged;
            break;
        }
    }

    Ok((
        RunTrace {
            initial_f_nats: initial_f,
            records,
            stop,
            final_residual: f64::NAN,
        },
        point,
    ))
}

/// Fixed phase profiles used as references.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FixedPhaseMode {
    /// Every element at the right-angle phase used for initialization.
    Equal,
    /// Independent uniform phases drawn from the seed.
    Random,
}

/// Achievable rate (bits/s/Hz) with fixed phases and the capacity-achieving
/// covariance for the resulting channel.
pub fn fixed_phase_rate(
    mode: FixedPhaseMode,
    realization: &ChannelRealization,
    chains: &ChainPair,
    power_budget: f64,
    seed: u64,
) -> f64 {
    let dims = chains.dims();
    let mut point = OptimPoint::default_initial(chains, power_budget);
    if mode == FixedPhaseMode::Random {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        point.phases_tx =
            crate::propagation::PhaseStack::random(SurfaceSide::Transmit, dims.l, dims.m, &mut rng);
        point.phases_rx =
            crate::propagation::PhaseStack::random(SurfaceSide::Receive, dims.k, dims.n, &mut rng);
    }
    let mut meter = MultMeter::new();
    let comp = compose(&point, realization, chains, &mut meter);
    point.q = capacity_covariance(&comp.h_bar, power_budget, &mut meter);
    rate_bits_from_nats(rate_nats_for_h_bar(&point.q, &comp.h_bar, &mut meter))
}

/// Conventional MIMO reference: a direct antenna-to-antenna i.i.d. Rayleigh
/// channel with the realization's path loss and noise floor, water-filled
/// covariance, no surface stacks. The channel draw derives from the
/// realization seed so the reference is reproducible alongside it.
pub fn digital_precoding_rate(
    realization: &ChannelRealization,
    n_r: usize,
    n_t: usize,
    power_budget: f64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(realization.seed.wrapping_add(0x9e37_79b9));
    let sigma = (realization.pathloss_linear / 2.0).sqrt();
    let mut normal = || {
        let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
    };
    let h = CMat::from_fn(n_r, n_t, |_, _| C64::new(sigma * normal(), sigma * normal()));
    let h_bar = &h / C64::new(realization.noise_power.sqrt(), 0.0);
    let mut meter = MultMeter::new();
    let q = capacity_covariance(&h_bar, power_budget, &mut meter);
    rate_bits_from_nats(rate_nats_for_h_bar(&q, &h_bar, &mut meter))
}
