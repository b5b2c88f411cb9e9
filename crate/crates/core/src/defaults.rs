//! Versioned calibration constants and per-experiment defaults, compiled in
//! from `defaults.toml`.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

const DEFAULTS_TOML: &str = include_str!("../defaults.toml");

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct Thresholds {
    pub reverse_osc_stability: f64,
    pub dfold_ratio_tolerance: f64,
    pub bubble_projected_factor: f64,
    pub bubble_lifted_growth: f64,
    pub tower_projected_factor: f64,
    pub tower_final_truncation: f64,
    pub lifting_estimate_stability: f64,
    pub patching_stability: f64,
    pub bubble_locality: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Defaults {
    pub version: u32,
    pub thresholds: Thresholds,
    pub experiments: BTreeMap<String, toml::Value>,
}

pub fn defaults() -> &'static Defaults {
    static CELL: OnceLock<Defaults> = OnceLock::new();
    CELL.get_or_init(|| toml::from_str(DEFAULTS_TOML).expect("bundled defaults.toml is valid"))
}

pub fn thresholds() -> &'static Thresholds {
    &defaults().thresholds
}

/// Default configuration of experiment `name` as JSON.
pub fn experiment_defaults(name: &str) -> Option<serde_json::Value> {
    let v = defaults().experiments.get(name)?;
    serde_json::to_value(v).ok()
}
