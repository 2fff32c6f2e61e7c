//! Scenario execution: seeded Monte-Carlo sweeps over realizations and
//! system dimensions, parallel across tasks, serial and deterministic in
//! the emitted output.

use super::config::{ConfigError, Scenario, ScenarioConfig};
use super::output::{fmt_f64, mean, std_dev, CsvTable, Summary};
use crate::baselines::{ao_run, digital_precoding_rate, fixed_phase_rate, FixedPhaseMode};
use crate::channel::{
    correlation_matrix, draw_channel_with_sqrts, psd_sqrt, ChannelError, ChannelRealization,
};
use crate::complexity::{cost_to_threshold, formula_cost_per_iteration, large_sim_approximation};
use crate::linalg::{C64, CMat};
use crate::objective::{
    eval_with_gradient, lipschitz_constant, ChainPair, ObjectiveError, OptimPoint,
};
use crate::optimizer::{pga_step, run as pga_run, OptimizerConfig, RunTrace, StepMode};
use crate::propagation::{PhaseStack, PropagationError, SurfaceSide};
use crate::MultMeter;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("output path error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

pub struct ScenarioOutputs {
    pub csv_path: PathBuf,
    pub json_path: PathBuf,
}

/// A link instance ready to optimize: fixed chains plus one channel draw.
struct Instance {
    chains: ChainPair,
    realization: ChannelRealization,
}

/// Build chains once and draw `realizations` channels with seeds
/// `seed_base + index`, in parallel, preserving index order.
fn build_instances(cfg: &ScenarioConfig) -> Result<Vec<Instance>, RunnerError> {
    let (gtx, grx) = cfg.build_geometries()?;
    let chains = ChainPair::build(&gtx, &grx)?;
    let tx_sqrt = psd_sqrt(&correlation_matrix(&gtx))?;
    let rx_sqrt = psd_sqrt(&correlation_matrix(&grx))?;
    (0..cfg.realizations)
        .into_par_iter()
        .map(|r| {
            let seed = cfg.seed_base + r as u64;
            let realization = draw_channel_with_sqrts(
                &gtx,
                &grx,
                &cfg.link,
                seed,
                tx_sqrt.clone(),
                rx_sqrt.clone(),
            )?;
            Ok(Instance {
                chains: chains.clone(),
                realization,
            })
        })
        .collect()
}

/// Fixed-step runs without explicit steps derive them from the Lipschitz
/// bound of the instance.
fn optimizer_config_for(cfg: &ScenarioConfig, inst: &Instance) -> OptimizerConfig {
    let mut oc = cfg.optimizer.clone();
    if oc.mode == StepMode::FixedStep && !cfg.explicit_step_base {
        let lam = lipschitz_constant(
            &inst.realization,
            &inst.chains,
            cfg.link.power_budget,
            cfg.link.noise_power,
        );
        let mu = if lam > 0.0 { 1.0 / lam } else { 1.0 };
        oc.step_base = [mu; 3];
    }
    oc
}

fn pga(cfg: &ScenarioConfig, inst: &Instance) -> Result<(RunTrace, OptimPoint), RunnerError> {
    let initial = OptimPoint::default_initial(&inst.chains, cfg.link.power_budget);
    let oc = optimizer_config_for(cfg, inst);
    Ok(pga_run(
        &initial,
        &inst.realization,
        &inst.chains,
        &oc,
        cfg.link.power_budget,
    )?)
}

/// Random feasible initial point for the initialization study.
fn random_start(chains: &ChainPair, power_budget: f64, seed: u64) -> OptimPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = chains.dims();
    let a = CMat::from_fn(d.n_t, d.n_t, |_, _| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let mut q = &a * a.adjoint();
    let trace: f64 = q.diagonal().iter().map(|z| z.re).sum();
    q *= C64::new(power_budget / trace, 0.0);
    OptimPoint {
        q,
        phases_tx: PhaseStack::random(SurfaceSide::Transmit, d.l, d.m, &mut rng),
        phases_rx: PhaseStack::random(SurfaceSide::Receive, d.k, d.n, &mut rng),
    }
}

/// Complex multiplications of one plain gradient iteration (gradient
/// evaluation plus the projected step), instrumented.
pub fn instrumented_iteration_cost(
    point: &OptimPoint,
    inst_realization: &ChannelRealization,
    chains: &ChainPair,
    power_budget: f64,
) -> u64 {
    let mut meter = MultMeter::new();
    let (_, grad) = eval_with_gradient(point, inst_realization, chains, &mut meter);
    let _ = pga_step(point, &grad, [1e-3; 3], power_budget, &mut meter);
    meter.count
}

/// Run one scenario and write `<name>.csv` plus `<name>_summary.json` under
/// `out_dir`. The output files are created before any computation starts so
/// unwritable paths fail fast.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: &Path) -> Result<ScenarioOutputs, RunnerError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let csv_path = out_dir.join(format!("{}.csv", cfg.scenario.name()));
    let json_path = out_dir.join(format!("{}_summary.json", cfg.scenario.name()));
    let mut csv_file = std::fs::File::create(&csv_path)?;
    let mut json_file = std::fs::File::create(&json_path)?;

    let seeds: Vec<u64> = (0..cfg.realizations)
        .map(|r| cfg.seed_base + r as u64)
        .collect();
    let (body, stats) = match cfg.scenario {
        Scenario::Convergence => convergence(cfg)?,
        Scenario::InitSensitivity => init_sensitivity(cfg)?,
        Scenario::LayerSweep => dimension_sweep(cfg, SweepKind::TxLayers)?,
        Scenario::AtomSweep => dimension_sweep(cfg, SweepKind::SideCount)?,
        Scenario::AntennaSweep => dimension_sweep(cfg, SweepKind::TxAntennas)?,
        Scenario::PhaseBaselines => phase_baselines(cfg)?,
        Scenario::ComplexityTable => complexity_table(cfg)?,
    };

    csv_file.write_all(body.as_bytes())?;
    let summary = Summary::new(
        cfg.scenario.name(),
        cfg,
        seeds,
        csv_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        stats,
    );
    json_file.write_all(summary.to_json().as_bytes())?;
    json_file.write_all(b"\n")?;
    Ok(ScenarioOutputs {
        csv_path,
        json_path,
    })
}

/// Per-iteration traces of the gradient method and the alternating
/// benchmark on the same instances. The alternating rows carry both the
/// outer index and the cumulative inner updates.
fn convergence(cfg: &ScenarioConfig) -> Result<(String, serde_json::Value), RunnerError> {
    let instances = build_instances(cfg)?;
    let results: Vec<_> = instances
        .par_iter()
        .map(|inst| -> Result<_, RunnerError> {
            let (trace, _) = pga(cfg, inst)?;
            let initial = OptimPoint::default_initial(&inst.chains, cfg.link.power_budget);
            let (ao_trace, _) = ao_run(
                &initial,
                &inst.realization,
                &inst.chains,
                &cfg.ao,
                cfg.link.power_budget,
            )?;
            Ok((trace, ao_trace))
        })
        .collect::<Result<_, _>>()?;

    let mut table = CsvTable::new(&[
        "realization",
        "seed",
        "method",
        "iteration",
        "inner_units",
        "f_nats",
        "rate_bits",
        "step",
        "cum_mults",
    ]);
    let mut final_pga = Vec::new();
    let mut final_ao = Vec::new();
    for (r, (trace, ao_trace)) in results.iter().enumerate() {
        let seed = cfg.seed_base + r as u64;
        for (label, t) in [("pga", trace), ("ao", ao_trace)] {
            table.row(&[
                r.to_string(),
                seed.to_string(),
                label.into(),
                "0".into(),
                "0".into(),
                fmt_f64(t.initial_f_nats),
                fmt_f64(t.initial_f_nats / std::f64::consts::LN_2),
                "0".into(),
                "0".into(),
            ]);
            let mut inner_total = 0u64;
            for rec in &t.records {
                inner_total += rec.inner_steps;
                table.row(&[
                    r.to_string(),
                    seed.to_string(),
                    label.into(),
                    rec.iteration.to_string(),
                    inner_total.to_string(),
                    fmt_f64(rec.f_nats),
                    fmt_f64(rec.rate_bits),
                    fmt_f64(rec.steps[0]),
                    rec.cum_mults.to_string(),
                ]);
            }
        }
        final_pga.push(trace.final_rate_bits());
        final_ao.push(ao_trace.final_rate_bits());
    }
    let stats = json!({
        "mean_final_rate_bits_pga": mean(&final_pga),
        "mean_final_rate_bits_ao": mean(&final_ao),
        "per_realization_pga": final_pga,
        "per_realization_ao": final_ao,
    });
    Ok((table.body(), stats))
}

/// Default initialization versus the best of many random starts.
fn init_sensitivity(cfg: &ScenarioConfig) -> Result<(String, serde_json::Value), RunnerError> {
    let instances = build_instances(cfg)?;
    let results: Vec<_> = instances
        .par_iter()
        .enumerate()
        .map(|(r, inst)| -> Result<_, RunnerError> {
            let oc = optimizer_config_for(cfg, inst);
            let (default_trace, _) = pga(cfg, inst)?;
            let default_rate = default_trace.final_rate_bits();
            // The candidate set includes the default start, so the best is
            // a maximum over a superset of {default}.
            let mut best_rate = default_rate;
            let mut best_start = -1i64;
            let seed = cfg.seed_base + r as u64;
            for s in 0..cfg.random_starts {
                let start = random_start(
                    &inst.chains,
                    cfg.link.power_budget,
                    seed.wrapping_mul(1009).wrapping_add(s as u64),
                );
                let (trace, _) = pga_run(
                    &start,
                    &inst.realization,
                    &inst.chains,
                    &oc,
                    cfg.link.power_budget,
                )?;
                if trace.final_rate_bits() > best_rate {
                    best_rate = trace.final_rate_bits();
                    best_start = s as i64;
                }
            }
            Ok((default_rate, best_rate, best_start))
        })
        .collect::<Result<_, _>>()?;

    let mut table = CsvTable::new(&[
        "realization",
        "seed",
        "default_rate_bits",
        "best_rate_bits",
        "best_start_index",
        "n_starts",
    ]);
    let mut defaults = Vec::new();
    let mut bests = Vec::new();
    for (r, (default_rate, best_rate, best_start)) in results.iter().enumerate() {
        table.row(&[
            r.to_string(),
            (cfg.seed_base + r as u64).to_string(),
            fmt_f64(*default_rate),
            fmt_f64(*best_rate),
            best_start.to_string(),
            cfg.random_starts.to_string(),
        ]);
        defaults.push(*default_rate);
        bests.push(*best_rate);
    }
    let stats = json!({
        "mean_default_rate_bits": mean(&defaults),
        "mean_best_rate_bits": mean(&bests),
    });
    Ok((table.body(), stats))
}

enum SweepKind {
    TxLayers,
    SideCount,
    TxAntennas,
}

impl SweepKind {
    fn param_name(&self) -> &'static str {
        match self {
            SweepKind::TxLayers => "tx_layers",
            SweepKind::SideCount => "side_count",
            SweepKind::TxAntennas => "tx_antennas",
        }
    }

    fn apply(&self, cfg: &ScenarioConfig, value: usize) -> ScenarioConfig {
        let mut c = cfg.clone();
        match self {
            SweepKind::TxLayers => c.geometry_tx.layer_count = value,
            SweepKind::SideCount => {
                c.geometry_tx.side_count = value;
                c.geometry_rx.side_count = value;
            }
            SweepKind::TxAntennas => c.geometry_tx.antenna_count = value,
        }
        c
    }
}

/// Mean optimized rate per parameter point, channel seeds shared across
/// points so curves are paired.
fn dimension_sweep(
    cfg: &ScenarioConfig,
    kind: SweepKind,
) -> Result<(String, serde_json::Value), RunnerError> {
    let values = cfg.effective_sweep();
    let mut table = CsvTable::new(&[
        "param",
        "value",
        "n_realizations",
        "seed_base",
        "mean_rate_bits",
        "std_rate_bits",
    ]);
    let mut means = Vec::new();
    let mut all = serde_json::Map::new();
    for &value in &values {
        let point_cfg = kind.apply(cfg, value);
        let instances = build_instances(&point_cfg)?;
        let rates: Vec<f64> = instances
            .par_iter()
            .map(|inst| -> Result<f64, RunnerError> {
                Ok(pga(&point_cfg, inst)?.0.final_rate_bits())
            })
            .collect::<Result<_, _>>()?;
        table.row(&[
            kind.param_name().into(),
            value.to_string(),
            cfg.realizations.to_string(),
            cfg.seed_base.to_string(),
            fmt_f64(mean(&rates)),
            fmt_f64(std_dev(&rates)),
        ]);
        means.push(mean(&rates));
        all.insert(value.to_string(), json!(rates));
    }
    let stats = json!({
        "param": kind.param_name(),
        "values": values,
        "mean_rate_bits": means,
        "per_realization": all,
    });
    Ok((table.body(), stats))
}

/// Optimized phases versus random and equal profiles and the fully digital
/// reference, one row per realization.
fn phase_baselines(cfg: &ScenarioConfig) -> Result<(String, serde_json::Value), RunnerError> {
    let instances = build_instances(cfg)?;
    let results: Vec<_> = instances
        .par_iter()
        .enumerate()
        .map(|(r, inst)| -> Result<_, RunnerError> {
            let seed = cfg.seed_base + r as u64;
            let optimized = pga(cfg, inst)?.0.final_rate_bits();
            let random = fixed_phase_rate(
                FixedPhaseMode::Random,
                &inst.realization,
                &inst.chains,
                cfg.link.power_budget,
                seed.wrapping_mul(31).wrapping_add(7),
            );
            let equal = fixed_phase_rate(
                FixedPhaseMode::Equal,
                &inst.realization,
                &inst.chains,
                cfg.link.power_budget,
                0,
            );
            let d = inst.chains.dims();
            let digital = digital_precoding_rate(
                &inst.realization,
                d.n_r,
                d.n_t,
                cfg.link.power_budget,
            );
            Ok((optimized, random, equal, digital))
        })
        .collect::<Result<_, _>>()?;

    let mut table = CsvTable::new(&[
        "realization",
        "seed",
        "optimized_rate_bits",
        "random_rate_bits",
        "equal_rate_bits",
        "digital_rate_bits",
    ]);
    let (mut opt, mut rnd, mut eq, mut dig) = (vec![], vec![], vec![], vec![]);
    for (r, (o, rr, e, d)) in results.iter().enumerate() {
        table.row(&[
            r.to_string(),
            (cfg.seed_base + r as u64).to_string(),
            fmt_f64(*o),
            fmt_f64(*rr),
            fmt_f64(*e),
            fmt_f64(*d),
        ]);
        opt.push(*o);
        rnd.push(*rr);
        eq.push(*e);
        dig.push(*d);
    }
    let stats = json!({
        "mean_optimized": mean(&opt),
        "mean_random": mean(&rnd),
        "mean_equal": mean(&eq),
        "mean_digital": mean(&dig),
    });
    Ok((table.body(), stats))
}

/// Closed-form versus instrumented per-iteration multiplications, plus the
/// cost of reaching 95 % of the final rate for both methods.
fn complexity_table(cfg: &ScenarioConfig) -> Result<(String, serde_json::Value), RunnerError> {
    let sides = if cfg.sweep.is_empty() {
        vec![3, 4, 5]
    } else {
        cfg.sweep.clone()
    };
    let mut table = CsvTable::new(&[
        "side_count",
        "m",
        "n",
        "n_t",
        "n_r",
        "l",
        "k",
        "seed",
        "formula_per_iter",
        "large_sim_approx",
        "instrumented_per_iter",
        "pga_iterations",
        "pga_cost_95",
        "ao_outer_iterations",
        "ao_cost_95",
    ]);
    let mut rows_stats = Vec::new();
    for &side in &sides {
        let point_cfg = SweepKind::SideCount.apply(cfg, side);
        let mut one = point_cfg.clone();
        one.realizations = 1;
        let inst = build_instances(&one)?.remove(0);
        let dims = inst.chains.dims();
        let formula = formula_cost_per_iteration(dims);
        let approx = large_sim_approximation(dims);
        let point = OptimPoint::default_initial(&inst.chains, cfg.link.power_budget);
        let instrumented = instrumented_iteration_cost(
            &point,
            &inst.realization,
            &inst.chains,
            cfg.link.power_budget,
        );
        let (pga_trace, _) = pga(&point_cfg, &inst)?;
        let (rates, costs) = pga_trace.rate_and_cost_series();
        let pga_cost = cost_to_threshold(&rates, &costs, 0.95);
        let (ao_trace, _) = ao_run(
            &point,
            &inst.realization,
            &inst.chains,
            &point_cfg.ao,
            cfg.link.power_budget,
        )?;
        let (ao_rates, ao_costs) = ao_trace.rate_and_cost_series();
        let ao_cost = cost_to_threshold(&ao_rates, &ao_costs, 0.95);
        let fmt_opt = |c: Option<u64>| c.map(|v| v.to_string()).unwrap_or_else(|| "unreachable".into());
        table.row(&[
            side.to_string(),
            dims.m.to_string(),
            dims.n.to_string(),
            dims.n_t.to_string(),
            dims.n_r.to_string(),
            dims.l.to_string(),
            dims.k.to_string(),
            cfg.seed_base.to_string(),
            formula.to_string(),
            approx.to_string(),
            instrumented.to_string(),
            pga_trace.records.len().to_string(),
            fmt_opt(pga_cost),
            ao_trace.records.len().to_string(),
            fmt_opt(ao_cost),
        ]);
        rows_stats.push(json!({
            "side": side,
            "formula": formula,
            "instrumented": instrumented,
            "pga_cost_95": pga_cost,
            "ao_cost_95": ao_cost,
        }));
    }
    Ok((table.body(), json!({ "rows": rows_stats })))
}

/// One optimized link, used by the foreign-function surface: returns the
/// final rate in bits/s/Hz and the number of accepted iterations.
pub fn optimize_single_link(
    cfg: &ScenarioConfig,
    seed: u64,
) -> Result<(f64, usize), RunnerError> {
    let mut one = cfg.clone();
    one.realizations = 1;
    one.seed_base = seed;
    let inst = build_instances(&one)?.remove(0);
    let (trace, _) = pga(&one, &inst)?;
    Ok((trace.final_rate_bits(), trace.records.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_cfg(scenario: Scenario) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::desk_default();
        cfg.scenario = scenario;
        cfg.realizations = 2;
        cfg.geometry_tx.side_count = 3;
        cfg.geometry_rx.side_count = 3;
        cfg.geometry_tx.antenna_count = 2;
        cfg.geometry_rx.antenna_count = 2;
        cfg.optimizer.max_iters = 15;
        cfg.ao.max_outer_iters = 2;
        cfg.ao.phase_grid_points = 8;
        cfg.random_starts = 3;
        cfg
    }

    #[test]
    fn convergence_outputs_are_deterministic() {
        let cfg = tiny_cfg(Scenario::Convergence);
        let dir = tempfile::tempdir().unwrap();
        let out1 = run_scenario(&cfg, &dir.path().join("a")).unwrap();
        let out2 = run_scenario(&cfg, &dir.path().join("b")).unwrap();
        let a = std::fs::read_to_string(out1.csv_path).unwrap();
        let b = std::fs::read_to_string(out2.csv_path).unwrap();
        assert_eq!(a, b);
        assert!(a.lines().count() > 4);
        assert!(a.starts_with("realization,seed,method,iteration"));
    }

    #[test]
    fn init_sensitivity_best_dominates_default() {
        let cfg = tiny_cfg(Scenario::InitSensitivity);
        let dir = tempfile::tempdir().unwrap();
        let out = run_scenario(&cfg, dir.path()).unwrap();
        let body = std::fs::read_to_string(out.csv_path).unwrap();
        for line in body.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            let default: f64 = cols[2].parse().unwrap();
            let best: f64 = cols[3].parse().unwrap();
            assert!(best >= default);
        }
    }

    #[test]
    fn unwritable_output_path_fails_before_compute() {
        let cfg = tiny_cfg(Scenario::Convergence);
        let err = run_scenario(&cfg, Path::new("/proc/definitely/not/writable"));
        assert!(err.is_err());
    }

    #[test]
    fn sweep_csv_has_one_row_per_point() {
        let mut cfg = tiny_cfg(Scenario::LayerSweep);
        cfg.sweep = vec![1, 2];
        let dir = tempfile::tempdir().unwrap();
        let out = run_scenario(&cfg, dir.path()).unwrap();
        let body = std::fs::read_to_string(out.csv_path).unwrap();
        assert_eq!(body.lines().count(), 3); // header + 2 points
        let json = std::fs::read_to_string(out.json_path).unwrap();
        assert!(json.contains("\"param\": \"tx_layers\""));
    }

    #[test]
    fn baselines_rows_have_four_rates() {
        let cfg = tiny_cfg(Scenario::PhaseBaselines);
        let dir = tempfile::tempdir().unwrap();
        let out = run_scenario(&cfg, dir.path()).unwrap();
        let body = std::fs::read_to_string(out.csv_path).unwrap();
        assert_eq!(body.lines().count(), 1 + cfg.realizations);
        for line in body.lines().skip(1) {
            assert_eq!(line.split(',').count(), 6);
        }
    }

    #[test]
    fn complexity_table_reports_costs() {
        let mut cfg = tiny_cfg(Scenario::ComplexityTable);
        cfg.sweep = vec![3];
        let dir = tempfile::tempdir().unwrap();
        let out = run_scenario(&cfg, dir.path()).unwrap();
        let body = std::fs::read_to_string(out.csv_path).unwrap();
        let row: Vec<&str> = body.lines().nth(1).unwrap().split(',').collect();
        let formula: u64 = row[8].parse().unwrap();
        let instrumented: u64 = row[10].parse().unwrap();
        assert!(formula > 0 && instrumented > 0);
    }
}
