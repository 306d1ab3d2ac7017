//! TOML scenario configuration. User files are overlaid on the embedded
//! defaults; keys absent from the defaults are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::CliError;

pub const DEFAULT_CONFIG: &str = include_str!("../default.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub scenario: String,
    pub seed: u64,
    pub pulse: PulseConfig,
    pub cavity: CavityConfig,
    pub emitter: EmitterConfig,
    pub detector: DetectorConfig,
    pub squeezing: SqueezingConfig,
    pub consecutive: ConsecutiveConfig,
    pub hbt: HbtConfig,
    pub hom: HomConfig,
    pub delay_hom: DelayHomConfig,
    pub budget: BudgetConfig,
    pub dbr: DbrConfig,
    pub threshold: ThresholdConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub source_fwhm_ghz: f64,
    pub slit_center_ghz: f64,
    pub widths_ghz: Vec<f64>,
    pub grid_n: usize,
    pub grid_dt_ps: f64,
    pub kappa_drive: f64,
    pub crop_rel: f64,
    pub rabi_points: usize,
    pub rabi_max_area_pi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub enabled: bool,
    pub polarization: String,
    pub q_factor: f64,
    pub center_offset_ghz: f64,
    pub eta_top: f64,
    pub wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterConfig {
    pub gamma: f64,
    pub gamma_dephase: f64,
    pub gamma_sd: f64,
    pub tau_c: f64,
    pub detuning: f64,
    pub trajectories: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    pub efficiency: f64,
    pub dead_time_ns: f64,
    pub jitter_ps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezingConfig {
    pub rho: f64,
    pub rep_rate_mhz: f64,
    pub pulses_per_bin: u32,
    pub n_bins: usize,
    pub implied_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsecutiveConfig {
    pub rho: f64,
    pub n_pulses: u64,
    pub rate_hz: f64,
    pub run_length: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HbtConfig {
    pub g2: f64,
    pub transmission: f64,
    pub rep_rate_mhz: f64,
    pub n_pulses: usize,
    pub bin_ps: f64,
    pub window_ns: f64,
    pub peak_halfwidth_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomConfig {
    pub indistinguishability: Vec<f64>,
    pub g2: f64,
    pub reflectance: f64,
    pub n_pulses: usize,
    pub period_ns: f64,
    pub bin_ps: f64,
    pub window_ns: f64,
    pub peak_halfwidth_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayHomConfig {
    pub delays_us: Vec<f64>,
    pub visibilities: Vec<f64>,
    pub curve_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub counts_per_s: f64,
    pub counts_sigma: f64,
    pub rep_rate_hz: f64,
    pub detector_efficiency: f64,
    pub detector_sigma: f64,
    pub stage: Vec<StageConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageConfig {
    pub name: String,
    pub value: f64,
    #[serde(default)]
    pub uncertainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DbrConfig {
    pub wavelength_min_nm: f64,
    pub wavelength_max_nm: f64,
    pub points: usize,
    pub stack: Vec<StackConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackConfig {
    pub name: String,
    pub high: String,
    pub low: String,
    pub pairs: f64,
    pub ambient: String,
    pub substrate: String,
    pub design_wavelength_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub eta_source: f64,
    pub eta_detector: f64,
}

impl Default for Config {
    fn default() -> Self {
        toml::from_str(DEFAULT_CONFIG).expect("embedded default config parses")
    }
}

impl Config {
    /// Overlay `text` on the defaults.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let user: Table = text.parse().map_err(|e: toml::de::Error| CliError::Config(e.message().trim().to_string()))?;
        let mut merged: Table = DEFAULT_CONFIG.parse().expect("embedded default config parses");
        overlay(&mut merged, &user, "")?;
        Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().trim().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical TOML of the resolved configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// sha256 of [`Config::canonical`], hex encoded.
    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "a string",
        Value::Integer(_) => "an integer",
        Value::Float(_) => "a number",
        Value::Boolean(_) => "a boolean",
        Value::Datetime(_) => "a datetime",
        Value::Array(_) => "an array",
        Value::Table(_) => "a table",
    }
}

fn compatible(default: &Value, user: &Value) -> bool {
    matches!(
        (default, user),
        (Value::Float(_), Value::Integer(_))
            | (Value::String(_), Value::String(_))
            | (Value::Integer(_), Value::Integer(_))
            | (Value::Float(_), Value::Float(_))
            | (Value::Boolean(_), Value::Boolean(_))
            | (Value::Array(_), Value::Array(_))
            | (Value::Table(_), Value::Table(_))
    )
}

/// Replace leaves of `base` by those of `user`, rejecting unknown keys and
/// mismatched types. Arrays replace wholesale; elements of arrays of tables
/// are checked against the first default element.
fn overlay(base: &mut Table, user: &Table, prefix: &str) -> Result<(), CliError> {
    for (key, uv) in user {
        let path = join(prefix, key);
        let bv = base
            .get_mut(key)
            .ok_or_else(|| CliError::Config(format!("unknown key `{path}`")))?;
        if !compatible(bv, uv) {
            return Err(CliError::Config(format!("`{path}` must be {}, got {}", type_name(bv), type_name(uv))));
        }
        match (bv, uv) {
            (Value::Table(b), Value::Table(u)) => overlay(b, u, &path)?,
            (Value::Array(b), Value::Array(u)) => {
                if let Some(Value::Table(template)) = b.first() {
                    for (i, item) in u.iter().enumerate() {
                        let Value::Table(t) = item else {
                            return Err(CliError::Config(format!("`{path}[{i}]` must be a table")));
                        };
                        overlay(&mut template.clone(), t, &format!("{path}[{i}]"))?;
                    }
                }
                *b = u.clone();
            }
            (b, u) => *b = u.clone(),
        }
    }
    Ok(())
}
