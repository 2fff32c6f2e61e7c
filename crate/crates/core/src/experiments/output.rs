//! Result emission: frozen-layout CSV bodies and a versioned JSON summary.
//!
//! CSV bodies are fully determined by the config and seeds; the JSON
//! summary is the only place a timestamp appears.

use super::config::ScenarioConfig;
use serde::Serialize;
use std::fmt::Write as _;

/// Incremental CSV builder with a fixed header.
pub struct CsvTable {
    body: String,
    columns: usize,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut body = String::new();
        let _ = writeln!(body, "{}", header.join(","));
        CsvTable {
            body,
            columns: header.len(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        assert_eq!(fields.len(), self.columns, "row width must match header");
        let _ = writeln!(self.body, "{}", fields.join(","));
    }

    pub fn body(self) -> String {
        self.body
    }
}

/// Shortest round-trip decimal form; bit-identical runs print bit-identical
/// text.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[derive(Serialize)]
pub struct Summary<'a> {
    pub schema_version: u32,
    pub provenance: String,
    pub timestamp_unix: u64,
    pub scenario: &'a str,
    pub seeds: Vec<u64>,
    pub csv_file: String,
    pub stats: serde_json::Value,
    pub config: &'a ScenarioConfig,
}

impl<'a> Summary<'a> {
    pub fn new(
        scenario: &'a str,
        config: &'a ScenarioConfig,
        seeds: Vec<u64>,
        csv_file: String,
        stats: serde_json::Value,
    ) -> Self {
        Summary {
            schema_version: 1,
            provenance: format!(
                "{} {}",
                env!("CARGO_PKG_NAME"),
                env!("CARGO_PKG_VERSION")
            ),
            timestamp_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            scenario,
            seeds,
            csv_file,
            stats,
            config,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout_is_stable() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.row(&["1".into(), "2.5".into()]);
        t.row(&[fmt_f64(0.1 + 0.2), fmt_f64(1.0)]);
        assert_eq!(t.body(), "a,b\n1,2.5\n0.30000000000000004,1\n");
    }

    #[test]
    fn stats_helpers() {
        assert_eq!(mean(&[1.0, 3.0]), 2.0);
        assert!((std_dev(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(std_dev(&[5.0]), 0.0);
    }
}
