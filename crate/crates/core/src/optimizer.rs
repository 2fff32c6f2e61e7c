//! Simultaneous projected gradient ascent over the transmit covariance and
//! every phase layer at both ends.
//!
//! One iteration evaluates all gradients at the current point and moves the
//! three variable families together, each followed by its Euclidean
//! projection. The step is either a fixed value (convergence is guaranteed
//! for steps below the reciprocal of the Lipschitz bound) or found by an
//! Armijo-Goldstein backtracking search with geometric shrinking.

use crate::channel::ChannelRealization;
use crate::complexity::MultMeter;
use crate::linalg::{hermitian_part, C64};
use crate::objective::{
    eval_with_gradient, rate_bits_from_nats, rate_nats, ChainPair, ObjectiveError, OptimPoint,
    RateGradient,
};
use crate::projection::{project_covariance, project_unit_modulus};
use serde::Serialize;

/// How the per-iteration step sizes are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
pub enum StepMode {
    /// Constant steps for the whole run, one per variable family.
    FixedStep,
    /// Armijo-Goldstein backtracking from the base steps.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct OptimizerConfig {
    pub mode: StepMode,
    /// Base step per variable family: covariance, transmit phases, receive
    /// phases. In `FixedStep` mode these are the steps themselves.
    pub step_base: [f64; 3],
    /// Geometric shrink factor of the backtracking search, in (0, 1).
    pub shrink: f64,
    /// Sufficient-increase weights per variable family.
    pub sufficient_increase: [f64; 3],
    /// The search stops shrinking once every trial step falls below this.
    pub min_step: f64,
    pub max_iters: usize,
    /// Relative objective-change tolerance of the stopping rule.
    pub rel_tol: f64,
    /// Search a separate shrink exponent per variable family (default)
    /// instead of one shared exponent. The covariance and phase gradients
    /// live on very different scales, so a shared exponent starves
    /// whichever family needs the larger step.
    pub per_variable_kappa: bool,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            mode: StepMode::Backtracking,
            step_base: [1e4; 3],
            shrink: 0.5,
            sufficient_increase: [1e-5; 3],
            min_step: 1e-4,
            max_iters: 400,
            rel_tol: 1e-6,
            per_variable_kappa: true,
            seed: 0,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), ObjectiveError> {
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(ObjectiveError::Infeasible(format!(
                "shrink factor must lie in (0,1), got {}",
                self.shrink
            )));
        }
        for v in self.step_base.iter().chain(self.sufficient_increase.iter()) {
            if !(*v > 0.0) {
                return Err(ObjectiveError::Infeasible(
                    "step parameters must be positive".into(),
                ));
            }
        }
        if !(self.min_step > 0.0) {
            return Err(ObjectiveError::Infeasible(
                "min_step must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    Converged,
    MaxIterations,
    /// Backtracking could not find an acceptable step above the minimum.
    Stalled,
}

/// One accepted iteration.
#[derive(Debug, Clone, Serialize)]
pub struct IterRecord {
    pub iteration: usize,
    pub f_nats: f64,
    pub rate_bits: f64,
    /// Steps actually applied this iteration.
    pub steps: [f64; 3],
    /// Backtracking shrink exponents per variable family (zeros for fixed
    /// steps).
    pub kappa: [u32; 3],
    /// Inner work units inside this iteration: objective evaluations for
    /// the gradient method, element updates for coordinate methods.
    pub inner_steps: u64,
    /// Cumulative complex multiplications since the start of the run.
    pub cum_mults: u64,
}

/// Full trace of one run.
#[derive(Debug, Clone, Serialize)]
pub struct RunTrace {
    pub initial_f_nats: f64,
    pub records: Vec<IterRecord>,
    pub stop: StopReason,
    /// Norm of the projected-gradient displacement at the final point; a
    /// residual of criticality, reported but never asserted.
    pub final_residual: f64,
}

impl RunTrace {
    pub fn final_f_nats(&self) -> f64 {
        self.records
            .last()
            .map(|r| r.f_nats)
            .unwrap_or(self.initial_f_nats)
    }

    pub fn final_rate_bits(&self) -> f64 {
        rate_bits_from_nats(self.final_f_nats())
    }

    /// Rates (bits) and cumulative multiplications, aligned.
    pub fn rate_and_cost_series(&self) -> (Vec<f64>, Vec<u64>) {
        let rates = self.records.iter().map(|r| r.rate_bits).collect();
        let costs = self.records.iter().map(|r| r.cum_mults).collect();
        (rates, costs)
    }
}

/// Move every variable family from the same gradient evaluation and project
/// each back onto its feasible set.
pub fn pga_step(
    point: &OptimPoint,
    grad: &RateGradient,
    steps: [f64; 3],
    power_budget: f64,
    meter: &mut MultMeter,
) -> OptimPoint {
    let n_t = point.q.nrows();
    let moved_q = &point.q + &grad.grad_q * C64::new(steps[0], 0.0);
    meter.bulk(n_t * n_t);
    meter.eigen(n_t);
    meter.bulk(2 * n_t * n_t * n_t); // spectrum rebuild
    let q = project_covariance(&hermitian_part(&moved_q), power_budget)
        .expect("hermitianized input cannot be rejected");

    let mut phases_tx = point.phases_tx.clone();
    for (layer, g) in phases_tx.layers.iter_mut().zip(&grad.grad_phi) {
        let moved = &*layer + g * C64::new(steps[1], 0.0);
        meter.bulk(3 * layer.len());
        *layer = project_unit_modulus(&moved);
    }
    let mut phases_rx = point.phases_rx.clone();
    for (layer, g) in phases_rx.layers.iter_mut().zip(&grad.grad_psi) {
        let moved = &*layer + g * C64::new(steps[2], 0.0);
        meter.bulk(3 * layer.len());
        *layer = project_unit_modulus(&moved);
    }

    OptimPoint {
        q,
        phases_tx,
        phases_rx,
    }
}

/// Result of one backtracking search.
pub struct SearchOutcome {
    pub point: OptimPoint,
    pub f_nats: f64,
    pub steps: [f64; 3],
    pub kappa: [u32; 3],
    pub trials: u64,
    pub stalled: bool,
}

/// Sufficient-increase test: the candidate must beat the current value by
/// the weighted squared displacement of every family.
fn sufficient_increase_target(
    current: &OptimPoint,
    candidate: &OptimPoint,
    f_current: f64,
    weights: [f64; 3],
) -> f64 {
    let dq: f64 = (&candidate.q - &current.q).iter().map(|z| z.norm_sqr()).sum();
    let dphi: f64 = candidate
        .phases_tx
        .layers
        .iter()
        .zip(&current.phases_tx.layers)
        .map(|(a, b)| (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    let dpsi: f64 = candidate
        .phases_rx
        .layers
        .iter()
        .zip(&current.phases_rx.layers)
        .map(|(a, b)| (a - b).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    f_current + weights[0] * dq + weights[1] * dphi + weights[2] * dpsi
}

/// Backtracking line search: shrink the trial steps geometrically until the
/// sufficient-increase condition holds or every step falls below the
/// minimum. With `per_variable_kappa` the three families first probe their
/// own exponents one family at a time, then the combined move is verified
/// jointly and shrunk further together if needed.
pub fn armijo_search(
    point: &OptimPoint,
    grad: &RateGradient,
    f_current: f64,
    realization: &ChannelRealization,
    chains: &ChainPair,
    config: &OptimizerConfig,
    power_budget: f64,
    meter: &mut MultMeter,
) -> SearchOutcome {
    let mut kappa = [0u32; 3];
    let mut trials = 0u64;

    if config.per_variable_kappa {
        // Probe each family alone for a starting exponent; the joint pass
        // below still owns acceptance.
        for q_idx in 0..3 {
            loop {
                let mut steps = [0.0; 3];
                steps[q_idx] =
                    config.step_base[q_idx] * config.shrink.powi(kappa[q_idx] as i32);
                if steps[q_idx] < config.min_step {
                    break;
                }
                let candidate = pga_step(point, grad, steps, power_budget, meter);
                let f_cand = rate_nats(&candidate, realization, chains, meter);
                trials += 1;
                let mut weights = [0.0; 3];
                weights[q_idx] = config.sufficient_increase[q_idx];
                if f_cand >= sufficient_increase_target(point, &candidate, f_current, weights) {
                    break;
                }
                kappa[q_idx] += 1;
            }
        }
    }

    loop {
        let steps = [
            config.step_base[0] * config.shrink.powi(kappa[0] as i32),
            config.step_base[1] * config.shrink.powi(kappa[1] as i32),
            config.step_base[2] * config.shrink.powi(kappa[2] as i32),
        ];
        if steps.iter().all(|&s| s < config.min_step) {
            return SearchOutcome {
                point: point.clone(),
                f_nats: f_current,
                steps,
                kappa,
                trials,
                stalled: true,
            };
        }
        let candidate = pga_step(point, grad, steps, power_budget, meter);
        let f_cand = rate_nats(&candidate, realization, chains, meter);
        trials += 1;
        if f_cand
            >= sufficient_increase_target(point, &candidate, f_current, config.sufficient_increase)
        {
            return SearchOutcome {
                point: candidate,
                f_nats: f_cand,
                steps,
                kappa,
                trials,
                stalled: false,
            };
        }
        for k in kappa.iter_mut() {
            *k += 1;
        }
    }
}

/// Run the ascent from `initial` until convergence, iteration budget, or a
/// stalled search. The trace carries one record per accepted iteration.
pub fn run(
    initial: &OptimPoint,
    realization: &ChannelRealization,
    chains: &ChainPair,
    config: &OptimizerConfig,
    power_budget: f64,
) -> Result<(RunTrace, OptimPoint), ObjectiveError> {
    config.validate()?;
    initial.validate(power_budget)?;

    let mut meter = MultMeter::new();
    let mut point = initial.clone();
    let mut f = rate_nats(&point, realization, chains, &mut MultMeter::new());
    let initial_f = f;
    let mut records = Vec::new();
    let mut stop = StopReason::MaxIterations;
    // Objective values of the last few iterations for the windowed
    // relative-change stopping rule.
    let mut window: Vec<f64> = vec![f];
    const WINDOW: usize = 5;

    let mut iter = 0;
    while iter < config.max_iters {
        iter += 1;
        let (f_here, grad) = eval_with_gradient(&point, realization, chains, &mut meter);
        debug_assert!((f_here - f).abs() <= 1e-9 * f.abs().max(1.0));

        let (next, f_next, steps, kappa, inner) = match config.mode {
            StepMode::FixedStep => {
                let next = pga_step(&point, &grad, config.step_base, power_budget, &mut meter);
                let f_next = rate_nats(&next, realization, chains, &mut meter);
                (next, f_next, config.step_base, [0u32; 3], 1u64)
            }
            StepMode::Backtracking => {
                let out = armijo_search(
                    &point,
                    &grad,
                    f_here,
                    realization,
                    chains,
                    config,
                    power_budget,
                    &mut meter,
                );
                if out.stalled {
                    records.push(IterRecord {
                        iteration: iter,
                        f_nats: f_here,
                        rate_bits: rate_bits_from_nats(f_here),
                        steps: out.steps,
                        kappa: out.kappa,
                        inner_steps: out.trials,
                        cum_mults: meter.count,
                    });
                    stop = StopReason::Stalled;
                    let final_residual = projected_residual(
                        &point,
                        &grad,
                        config.min_step,
                        power_budget,
                    );
                    return Ok((
                        RunTrace {
                            initial_f_nats: initial_f,
                            records,
                            stop,
                            final_residual,
                        },
                        point,
                    ));
                }
                (out.point, out.f_nats, out.steps, out.kappa, out.trials)
            }
        };

        point = next;
        f = f_next;
        records.push(IterRecord {
            iteration: iter,
            f_nats: f,
            rate_bits: rate_bits_from_nats(f),
            steps,
            kappa,
            inner_steps: inner,
            cum_mults: meter.count,
        });

        window.push(f);
        if window.len() > WINDOW + 1 {
            window.remove(0);
        }
        if window.len() == WINDOW + 1 {
            let oldest = window[0];
            let change = (f - oldest).abs() / oldest.abs().max(1e-12);
            if change < config.rel_tol {
                stop = StopReason::Converged;
                break;
            }
        }
    }

    let grad = eval_with_gradient(&point, realization, chains, &mut MultMeter::new()).1;
    let residual_step = match config.mode {
        StepMode::FixedStep => config.step_base[0],
        StepMode::Backtracking => config.min_step,
    };
    let final_residual = projected_residual(&point, &grad, residual_step, power_budget);

    Ok((
        RunTrace {
            initial_f_nats: initial_f,
            records,
            stop,
            final_residual,
        },
        point,
    ))
}

/// Norm of the feasible displacement produced by one projected step: zero
/// exactly at a critical point of the constrained problem.
fn projected_residual(
    point: &OptimPoint,
    grad: &RateGradient,
    step: f64,
    power_budget: f64,
) -> f64 {
    let moved = pga_step(
        point,
        grad,
        [step; 3],
        power_budget,
        &mut MultMeter::new(),
    );
    moved.distance(point)
}
