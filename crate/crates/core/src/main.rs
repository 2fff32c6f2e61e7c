//! Command-line harness around the scenario runner.

use clap::{Args, Parser, Subcommand};
use simhmimo::experiments::{parse_config, run_scenario, Scenario, ScenarioConfig};
use simhmimo::optimizer::StepMode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "simhmimo",
    version,
    about = "Stacked-metasurface holographic MIMO link simulator and rate optimizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonFlags {
    /// Base seed; realization r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Channel realizations per parameter point.
    #[arg(long)]
    realizations: Option<usize>,
    /// Output directory for the CSV and JSON files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Use the full published system size (100 atoms per layer, 7 layers,
    /// 10 antennas) instead of the small desk preset. Slow.
    #[arg(long)]
    paper_scale: bool,
    /// Step rule: `fixed` (Lipschitz-derived step) or `armijo` backtracking.
    #[arg(long, value_parser = ["fixed", "armijo"])]
    mode: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: CommonFlags,
        /// Downgrade unknown config keys from errors to warnings.
        #[arg(long)]
        lenient: bool,
    },
    /// Per-iteration rate traces of the gradient method and the
    /// alternating benchmark.
    Convergence {
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Mean rate versus the number of transmit layers.
    SweepLayers {
        #[command(flatten)]
        flags: CommonFlags,
        /// Layer counts to sweep.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<usize>>,
    },
    /// Mean rate versus atoms per layer (side length is swept).
    SweepAtoms {
        #[command(flatten)]
        flags: CommonFlags,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<usize>>,
    },
    /// Mean rate versus the number of transmit antennas.
    SweepAntennas {
        #[command(flatten)]
        flags: CommonFlags,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<usize>>,
    },
    /// Optimized phases versus random/equal profiles and fully digital
    /// precoding.
    Baselines {
        #[command(flatten)]
        flags: CommonFlags,
    },
    /// Closed-form versus instrumented multiplication counts and
    /// cost-to-95% comparisons.
    Complexity {
        #[command(flatten)]
        flags: CommonFlags,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<usize>>,
    },
}

fn apply_flags(cfg: &mut ScenarioConfig, flags: &CommonFlags) {
    if let Some(seed) = flags.seed {
        cfg.seed_base = seed;
    }
    if let Some(r) = flags.realizations {
        cfg.realizations = r;
    }
    if let Some(mode) = &flags.mode {
        cfg.optimizer.mode = match mode.as_str() {
            "fixed" => StepMode::FixedStep,
            _ => StepMode::Backtracking,
        };
    }
}

fn preset(flags: &CommonFlags, scenario: Scenario) -> ScenarioConfig {
    let mut cfg = if flags.paper_scale {
        ScenarioConfig::paper_default()
    } else {
        ScenarioConfig::desk_default()
    };
    cfg.scenario = scenario;
    cfg
}

fn execute(mut cfg: ScenarioConfig, flags: &CommonFlags, sweep: Option<Vec<usize>>) -> ExitCode {
    apply_flags(&mut cfg, flags);
    if let Some(values) = sweep {
        cfg.sweep = values;
    }
    match run_scenario(&cfg, &flags.out) {
        Ok(outputs) => {
            println!("wrote {}", outputs.csv_path.display());
            println!("wrote {}", outputs.json_path.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            flags,
            lenient,
        } => {
            let parsed = parse_config(&config, !lenient, !flags.paper_scale);
            match parsed {
                Ok((cfg, warnings)) => {
                    for w in warnings {
                        eprintln!("warning: {w}");
                    }
                    execute(cfg, &flags, None)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Convergence { flags } => {
            let cfg = preset(&flags, Scenario::Convergence);
            execute(cfg, &flags, None)
        }
        Command::SweepLayers { flags, values } => {
            let cfg = preset(&flags, Scenario::LayerSweep);
            execute(cfg, &flags, values)
        }
        Command::SweepAtoms { flags, values } => {
            let cfg = preset(&flags, Scenario::AtomSweep);
            execute(cfg, &flags, values)
        }
        Command::SweepAntennas { flags, values } => {
            let cfg = preset(&flags, Scenario::AntennaSweep);
            execute(cfg, &flags, values)
        }
        Command::Baselines { flags } => {
            let cfg = preset(&flags, Scenario::PhaseBaselines);
            execute(cfg, &flags, None)
        }
        Command::Complexity { flags, values } => {
            let cfg = preset(&flags, Scenario::ComplexityTable);
            execute(cfg, &flags, values)
        }
    }
}
