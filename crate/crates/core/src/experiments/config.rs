//! Scenario configuration: TOML parsing with explicit unit suffixes,
//! range validation with key paths, and unknown-key detection.
//!
//! Every key is optional; missing keys take the published defaults (the
//! paper-scale system unless the desk preset is requested). Quantities may
//! be plain numbers in SI units or strings with a unit suffix, e.g.
//! `"20 dBm"`, `"50 mm"`, `"6 GHz"`.

use crate::baselines::AoConfig;
use crate::channel::LinkParams;
use crate::geometry::SimGeometry;
use crate::optimizer::{OptimizerConfig, StepMode};
use serde::Serialize;
use std::collections::BTreeSet;
use std::path::Path;
use thiserror::Error;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config is not valid TOML: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("unknown key `{0}` (strict mode; pass the lenient flag to downgrade to a warning)")]
    UnknownKey(String),
    #[error("{key}: {message}")]
    Invalid { key: String, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Which experiment the harness runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Scenario {
    Convergence,
    InitSensitivity,
    LayerSweep,
    AtomSweep,
    AntennaSweep,
    PhaseBaselines,
    ComplexityTable,
}

impl Scenario {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "convergence" => Some(Scenario::Convergence),
            "init-sensitivity" => Some(Scenario::InitSensitivity),
            "layer-sweep" => Some(Scenario::LayerSweep),
            "atom-sweep" => Some(Scenario::AtomSweep),
            "antenna-sweep" => Some(Scenario::AntennaSweep),
            "baselines" => Some(Scenario::PhaseBaselines),
            "complexity" => Some(Scenario::ComplexityTable),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Convergence => "convergence",
            Scenario::InitSensitivity => "init-sensitivity",
            Scenario::LayerSweep => "layer-sweep",
            Scenario::AtomSweep => "atom-sweep",
            Scenario::AntennaSweep => "antenna-sweep",
            Scenario::PhaseBaselines => "baselines",
            Scenario::ComplexityTable => "complexity",
        }
    }
}

/// Layout parameters of one surface stack as configured (before resolving
/// the wavelength-dependent defaults).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometrySpec {
    pub side_count: usize,
    pub layer_count: usize,
    /// Meters; defaults to half the carrier wavelength.
    pub element_spacing: Option<f64>,
    pub thickness: f64,
    pub antenna_count: usize,
    /// Square meters; defaults to one lattice cell.
    pub element_area: Option<f64>,
}

impl GeometrySpec {
    pub fn build(&self, wavelength: f64) -> Result<SimGeometry, ConfigError> {
        let spacing = self.element_spacing.unwrap_or(wavelength / 2.0);
        let mut g = SimGeometry::new(
            self.side_count,
            self.layer_count,
            spacing,
            self.thickness,
            self.antenna_count,
            wavelength,
        )
        .map_err(|e| invalid("geometry", e.to_string()))?;
        if let Some(area) = self.element_area {
            g = g
                .with_element_area(area)
                .map_err(|e| invalid("geometry.element_area", e.to_string()))?;
        }
        Ok(g)
    }
}

/// Fully resolved configuration of one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub geometry_tx: GeometrySpec,
    pub geometry_rx: GeometrySpec,
    pub link: LinkParams,
    pub optimizer: OptimizerConfig,
    /// True when the config supplied explicit step bases; otherwise fixed
    /// step runs derive the step from the Lipschitz bound per realization.
    pub explicit_step_base: bool,
    pub ao: AoConfig,
    pub scenario: Scenario,
    pub realizations: usize,
    pub seed_base: u64,
    /// Sweep values: layer counts, atoms per row, or antenna counts,
    /// depending on the scenario.
    pub sweep: Vec<usize>,
    /// Random initial points per realization for the initialization study.
    pub random_starts: usize,
}

impl ScenarioConfig {
    /// Published full-scale system: 100 atoms per layer in 7 layers on both
    /// sides, 10 antennas each, 6 GHz carrier, 250 m link, 20 dBm budget.
    pub fn paper_default() -> Self {
        let wavelength = 0.05;
        ScenarioConfig {
            geometry_tx: GeometrySpec {
                side_count: 10,
                layer_count: 7,
                element_spacing: None,
                thickness: 0.04,
                antenna_count: 10,
                element_area: None,
            },
            geometry_rx: GeometrySpec {
                side_count: 10,
                layer_count: 7,
                element_spacing: None,
                thickness: 0.04,
                antenna_count: 10,
                element_area: None,
            },
            link: LinkParams {
                distance: 250.0,
                ref_distance: 1.0,
                exponent: 3.5,
                shadow_sigma_db: 9.0,
                noise_power: 1e-14,
                power_budget: 0.1,
                wavelength,
            },
            optimizer: OptimizerConfig::default(),
            explicit_step_base: false,
            ao: AoConfig::default(),
            scenario: Scenario::Convergence,
            realizations: 5,
            seed_base: 1,
            sweep: vec![],
            random_starts: 50,
        }
    }

    /// Small system for quick runs and CI: 16 atoms per layer in 2 layers,
    /// 4 antennas per side, everything else as published.
    pub fn desk_default() -> Self {
        let mut c = Self::paper_default();
        for g in [&mut c.geometry_tx, &mut c.geometry_rx] {
            g.side_count = 4;
            g.layer_count = 2;
            g.antenna_count = 4;
        }
        c
    }

    pub fn build_geometries(&self) -> Result<(SimGeometry, SimGeometry), ConfigError> {
        Ok((
            self.geometry_tx.build(self.link.wavelength)?,
            self.geometry_rx.build(self.link.wavelength)?,
        ))
    }

    /// Default sweep values per scenario when the config gives none.
    pub fn effective_sweep(&self) -> Vec<usize> {
        if !self.sweep.is_empty() {
            return self.sweep.clone();
        }
        match self.scenario {
            Scenario::LayerSweep => vec![1, 2, 3, 5],
            Scenario::AtomSweep => vec![3, 4, 5, 6],
            Scenario::AntennaSweep => vec![1, 2, 4, 6, 8],
            _ => vec![],
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.realizations == 0 {
            return Err(invalid("scenario.realizations", "must be at least 1"));
        }
        if self.link.distance < self.link.ref_distance {
            return Err(invalid(
                "link.distance",
                format!(
                    "must be at least the reference distance {}",
                    self.link.ref_distance
                ),
            ));
        }
        for (key, v) in [
            ("link.distance", self.link.distance),
            ("link.ref_distance", self.link.ref_distance),
            ("link.noise_power", self.link.noise_power),
            ("link.tx_power", self.link.power_budget),
            ("link.wavelength", self.link.wavelength),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(key, format!("must be positive, got {v}")));
            }
        }
        if self.link.shadow_sigma_db < 0.0 {
            return Err(invalid("link.shadow_sigma", "must be nonnegative"));
        }
        self.optimizer
            .validate()
            .map_err(|e| invalid("optimizer", e.to_string()))?;
        self.ao.validate().map_err(|e| invalid("ao", e.to_string()))?;
        if self.random_starts == 0 {
            return Err(invalid("scenario.random_starts", "must be at least 1"));
        }
        // Geometry construction applies its own range checks.
        self.build_geometries()?;
        Ok(())
    }
}

/// Units a quantity key accepts.
#[derive(Clone, Copy, PartialEq)]
enum Unit {
    Meters,
    Watts,
    Decibels,
    Hertz,
    SquareMeters,
    Plain,
}

fn parse_quantity(key: &str, value: &toml::Value, unit: Unit) -> Result<f64, ConfigError> {
    match value {
        toml::Value::Integer(i) => Ok(*i as f64),
        toml::Value::Float(f) => Ok(*f),
        toml::Value::String(s) => {
            let s = s.trim();
            let split = s
                .find(|c: char| c.is_ascii_alphabetic())
                .ok_or_else(|| invalid(key, format!("`{s}` has no unit suffix")))?;
            let (num, suffix) = s.split_at(split);
            let x: f64 = num
                .trim()
                .parse()
                .map_err(|_| invalid(key, format!("`{num}` is not a number")))?;
            let suffix = suffix.trim();
            let converted = match (unit, suffix) {
                (Unit::Meters, "m") => x,
                (Unit::Meters, "mm") => x * 1e-3,
                (Unit::Meters, "cm") => x * 1e-2,
                (Unit::Meters, "km") => x * 1e3,
                (Unit::Watts, "W") => x,
                (Unit::Watts, "mW") => x * 1e-3,
                (Unit::Watts, "uW") => x * 1e-6,
                (Unit::Watts, "dBm") => 10f64.powf((x - 30.0) / 10.0),
                (Unit::Watts, "dBW") => 10f64.powf(x / 10.0),
                (Unit::Decibels, "dB") => x,
                (Unit::Hertz, "Hz") => x,
                (Unit::Hertz, "kHz") => x * 1e3,
                (Unit::Hertz, "MHz") => x * 1e6,
                (Unit::Hertz, "GHz") => x * 1e9,
                (Unit::SquareMeters, "m2") | (Unit::SquareMeters, "m^2") => x,
                _ => {
                    return Err(invalid(
                        key,
                        format!("unit `{suffix}` is not valid for this key"),
                    ))
                }
            };
            Ok(converted)
        }
        other => Err(invalid(
            key,
            format!("expected a number or a quantity string, got {other}"),
        )),
    }
}

struct Walker<'a> {
    root: &'a toml::value::Table,
    seen: BTreeSet<String>,
}

impl<'a> Walker<'a> {
    fn new(root: &'a toml::value::Table) -> Self {
        Walker {
            root,
            seen: BTreeSet::new(),
        }
    }

    fn get(&mut self, path: &str) -> Option<&'a toml::Value> {
        let mut current: Option<&toml::Value> = None;
        let mut table = self.root;
        for part in path.split('.') {
            current = table.get(part);
            match current {
                Some(toml::Value::Table(t)) => table = t,
                Some(_) => {}
                None => return None,
            }
        }
        if current.is_some() {
            self.seen.insert(path.to_string());
        }
        current
    }

    fn quantity(&mut self, path: &str, unit: Unit) -> Result<Option<f64>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some(v) => parse_quantity(path, v, unit).map(Some),
        }
    }

    fn integer(&mut self, path: &str) -> Result<Option<usize>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(v) => Err(invalid(path, format!("expected a nonnegative integer, got {v}"))),
        }
    }

    fn unsigned(&mut self, path: &str) -> Result<Option<u64>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(v) => Err(invalid(path, format!("expected a nonnegative integer, got {v}"))),
        }
    }

    fn boolean(&mut self, path: &str) -> Result<Option<bool>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some(toml::Value::Boolean(b)) => Ok(Some(*b)),
            Some(v) => Err(invalid(path, format!("expected a boolean, got {v}"))),
        }
    }

    fn string(&mut self, path: &str) -> Result<Option<String>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some(toml::Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(invalid(path, format!("expected a string, got {v}"))),
        }
    }

    fn integer_list(&mut self, path: &str) -> Result<Option<Vec<usize>>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some(toml::Value::Array(a)) => a
                .iter()
                .map(|v| match v {
                    toml::Value::Integer(i) if *i > 0 => Ok(*i as usize),
                    other => Err(invalid(path, format!("expected positive integers, got {other}"))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(v) => Err(invalid(path, format!("expected an array, got {v}"))),
        }
    }

    fn float_triplet(&mut self, path: &str) -> Result<Option<[f64; 3]>, ConfigError> {
        match self.get(path) {
            None => Ok(None),
            Some(toml::Value::Float(f)) => Ok(Some([*f; 3])),
            Some(toml::Value::Integer(i)) => Ok(Some([*i as f64; 3])),
            Some(toml::Value::Array(a)) if a.len() == 3 => {
                let mut out = [0.0; 3];
                for (slot, v) in out.iter_mut().zip(a) {
                    *slot = match v {
                        toml::Value::Float(f) => *f,
                        toml::Value::Integer(i) => *i as f64,
                        other => {
                            return Err(invalid(path, format!("expected numbers, got {other}")))
                        }
                    };
                }
                Ok(Some(out))
            }
            Some(v) => Err(invalid(
                path,
                format!("expected a number or an array of three numbers, got {v}"),
            )),
        }
    }

    /// Every leaf key path present in the document but never requested.
    fn unknown_keys(&self) -> Vec<String> {
        fn collect(prefix: &str, table: &toml::value::Table, out: &mut Vec<String>) {
            for (k, v) in table {
                let path = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                match v {
                    toml::Value::Table(t) => collect(&path, t, out),
                    _ => out.push(path),
                }
            }
        }
        let mut all = Vec::new();
        collect("", self.root, &mut all);
        all.into_iter().filter(|p| !self.seen.contains(p)).collect()
    }
}

fn read_geometry(
    walker: &mut Walker<'_>,
    prefix: &str,
    base: &GeometrySpec,
) -> Result<GeometrySpec, ConfigError> {
    let mut g = base.clone();
    if let Some(v) = walker.integer(&format!("{prefix}.side_count"))? {
        g.side_count = v;
    }
    if let Some(v) = walker.integer(&format!("{prefix}.layer_count"))? {
        g.layer_count = v;
    }
    if let Some(v) = walker.quantity(&format!("{prefix}.element_spacing"), Unit::Meters)? {
        g.element_spacing = Some(v);
    }
    if let Some(v) = walker.quantity(&format!("{prefix}.thickness"), Unit::Meters)? {
        g.thickness = v;
    }
    if let Some(v) = walker.integer(&format!("{prefix}.antenna_count"))? {
        g.antenna_count = v;
    }
    if let Some(v) = walker.quantity(&format!("{prefix}.element_area"), Unit::SquareMeters)? {
        g.element_area = Some(v);
    }
    Ok(g)
}

/// Parse a configuration document. Unknown keys are hard errors in strict
/// mode and returned as warnings otherwise; missing keys always fall back
/// to the defaults (`desk` selects the small preset as the base).
pub fn parse_config_str(
    text: &str,
    strict: bool,
    desk: bool,
) -> Result<(ScenarioConfig, Vec<String>), ConfigError> {
    let doc: toml::Value = text.parse()?;
    let empty = toml::value::Table::new();
    let table = doc.as_table().unwrap_or(&empty);
    let mut walker = Walker::new(table);
    let base = if desk {
        ScenarioConfig::desk_default()
    } else {
        ScenarioConfig::paper_default()
    };
    let mut cfg = base.clone();

    cfg.geometry_tx = read_geometry(&mut walker, "geometry.tx", &base.geometry_tx)?;
    cfg.geometry_rx = read_geometry(&mut walker, "geometry.rx", &base.geometry_rx)?;

    // Wavelength and frequency may both appear but must agree on c = f·λ.
    let wavelength = walker.quantity("link.wavelength", Unit::Meters)?;
    let frequency = walker.quantity("link.frequency", Unit::Hertz)?;
    cfg.link.wavelength = match (wavelength, frequency) {
        (Some(w), Some(f)) => {
            let implied = SPEED_OF_LIGHT / f;
            if (implied - w).abs() / w > 5e-3 {
                return Err(invalid(
                    "link.wavelength",
                    format!(
                        "inconsistent with link.frequency: {w} m given, {implied:.6} m implied"
                    ),
                ));
            }
            w
        }
        (Some(w), None) => w,
        (None, Some(f)) => SPEED_OF_LIGHT / f,
        (None, None) => base.link.wavelength,
    };
    if let Some(v) = walker.quantity("link.distance", Unit::Meters)? {
        cfg.link.distance = v;
    }
    if let Some(v) = walker.quantity("link.ref_distance", Unit::Meters)? {
        cfg.link.ref_distance = v;
    }
    if let Some(v) = walker.quantity("link.exponent", Unit::Plain)? {
        cfg.link.exponent = v;
    }
    if let Some(v) = walker.quantity("link.shadow_sigma", Unit::Decibels)? {
        cfg.link.shadow_sigma_db = v;
    }
    if let Some(v) = walker.quantity("link.noise_power", Unit::Watts)? {
        cfg.link.noise_power = v;
    }
    if let Some(v) = walker.quantity("link.tx_power", Unit::Watts)? {
        cfg.link.power_budget = v;
    }

    if let Some(mode) = walker.string("optimizer.mode")? {
        cfg.optimizer.mode = match mode.as_str() {
            "fixed" => StepMode::FixedStep,
            "armijo" | "backtracking" => StepMode::Backtracking,
            other => {
                return Err(invalid(
                    "optimizer.mode",
                    format!("expected `fixed` or `armijo`, got `{other}`"),
                ))
            }
        };
    }
    if let Some(v) = walker.float_triplet("optimizer.step_base")? {
        cfg.optimizer.step_base = v;
        cfg.explicit_step_base = true;
    }
    if let Some(v) = walker.quantity("optimizer.shrink", Unit::Plain)? {
        cfg.optimizer.shrink = v;
    }
    if let Some(v) = walker.float_triplet("optimizer.sufficient_increase")? {
        cfg.optimizer.sufficient_increase = v;
    }
    if let Some(v) = walker.quantity("optimizer.min_step", Unit::Plain)? {
        cfg.optimizer.min_step = v;
    }
    if let Some(v) = walker.integer("optimizer.max_iters")? {
        cfg.optimizer.max_iters = v;
    }
    if let Some(v) = walker.quantity("optimizer.rel_tol", Unit::Plain)? {
        cfg.optimizer.rel_tol = v;
    }
    if let Some(v) = walker.boolean("optimizer.per_variable_kappa")? {
        cfg.optimizer.per_variable_kappa = v;
    }

    if let Some(v) = walker.integer("ao.phase_grid_points")? {
        cfg.ao.phase_grid_points = v;
    }
    if let Some(v) = walker.integer("ao.max_outer_iters")? {
        cfg.ao.max_outer_iters = v;
    }
    if let Some(v) = walker.quantity("ao.rel_tol", Unit::Plain)? {
        cfg.ao.rel_tol = v;
    }

    if let Some(kind) = walker.string("scenario.kind")? {
        cfg.scenario = Scenario::parse(&kind).ok_or_else(|| {
            invalid(
                "scenario.kind",
                format!("`{kind}` is not a known scenario"),
            )
        })?;
    }
    if let Some(v) = walker.integer("scenario.realizations")? {
        cfg.realizations = v;
    }
    if let Some(v) = walker.unsigned("scenario.seed_base")? {
        cfg.seed_base = v;
    }
    if let Some(v) = walker.integer_list("scenario.sweep")? {
        cfg.sweep = v;
    }
    if let Some(v) = walker.integer("scenario.random_starts")? {
        cfg.random_starts = v;
    }

    let unknown = walker.unknown_keys();
    if strict {
        if let Some(first) = unknown.first() {
            return Err(ConfigError::UnknownKey(first.clone()));
        }
    }
    let warnings = unknown
        .into_iter()
        .map(|k| format!("ignoring unknown key `{k}`"))
        .collect();

    cfg.validate()?;
    Ok((cfg, warnings))
}

/// Parse a configuration file; see [`parse_config_str`].
pub fn parse_config(
    path: &Path,
    strict: bool,
    desk: bool,
) -> Result<(ScenarioConfig, Vec<String>), ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text, strict, desk)
}
