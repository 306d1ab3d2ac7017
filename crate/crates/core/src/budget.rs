//! Efficiency bookkeeping and Bragg-mirror reflectivity.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Value with a one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measured {
    pub value: f64,
    pub sigma: f64,
}

impl Measured {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self { value, sigma }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }

    pub fn relative(&self) -> f64 {
        self.sigma / self.value.abs()
    }
}

/// System efficiency inferred from a detected count rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemEfficiency {
    pub eta: Measured,
    /// `eta > 1`, which no physical source can produce.
    pub unphysical: bool,
}

/// `η = counts / (rep_rate · detector_eff)` with first-order propagation of
/// the three relative uncertainties.
pub fn system_efficiency(counts_per_s: Measured, rep_rate_hz: Measured, detector_eff: Measured) -> Result<SystemEfficiency> {
    if !(counts_per_s.value > 0.0) {
        return Err(invalid("counts_per_s", "must be positive"));
    }
    if !(rep_rate_hz.value > 0.0) {
        return Err(invalid("rep_rate_hz", "must be positive"));
    }
    if !(detector_eff.value > 0.0 && detector_eff.value <= 1.0) {
        return Err(invalid("detector_eff", "must be in (0, 1]"));
    }
    for (name, m) in [("counts_per_s", counts_per_s), ("rep_rate_hz", rep_rate_hz), ("detector_eff", detector_eff)] {
        if !(m.sigma >= 0.0) {
            return Err(invalid(name, "uncertainty must be non-negative"));
        }
    }
    let eta = counts_per_s.value / (rep_rate_hz.value * detector_eff.value);
    let rel = (counts_per_s.relative().powi(2) + rep_rate_hz.relative().powi(2) + detector_eff.relative().powi(2)).sqrt();
    Ok(SystemEfficiency {
        eta: Measured::new(eta, eta * rel),
        unphysical: eta > 1.0,
    })
}

/// One stage of an efficiency ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stage {
    pub name: String,
    pub value: f64,
    #[serde(default)]
    pub uncertainty: f64,
}

/// Ordered efficiency stages from emitter to detector.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyBudget {
    pub stages: Vec<Stage>,
}

impl EfficiencyBudget {
    pub fn push(&mut self, name: impl Into<String>, value: f64, uncertainty: f64) -> &mut Self {
        self.stages.push(Stage {
            name: name.into(),
            value,
            uncertainty,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(invalid("budget", "no stages"));
        }
        for s in &self.stages {
            if !(s.value > 0.0 && s.value <= 1.0) {
                return Err(invalid("budget.stage.value", format!("`{}` = {} not in (0, 1]", s.name, s.value)));
            }
            if !(s.uncertainty >= 0.0) {
                return Err(invalid("budget.stage.uncertainty", format!("`{}` is negative", s.name)));
            }
        }
        Ok(())
    }

    /// Parses `[stage]` sections holding `name`, `value` and an optional
    /// `uncertainty`. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut stages = Vec::new();
        let mut current: Option<(Option<String>, Option<f64>, f64, usize)> = None;
        let finish = |c: Option<(Option<String>, Option<f64>, f64, usize)>, out: &mut Vec<Stage>| -> Result<()> {
            if let Some((name, value, uncertainty, line)) = c {
                let name = name.ok_or_else(|| Error::Parse(format!("stage at line {line} has no name")))?;
                let value = value.ok_or_else(|| Error::Parse(format!("stage `{name}` has no value")))?;
                out.push(Stage {
                    name,
                    value,
                    uncertainty,
                });
            }
            Ok(())
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line == "[stage]" {
                finish(current.take(), &mut stages)?;
                current = Some((None, None, 0.0, i + 1));
                continue;
            }
            let (key, val) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected `key = value`", i + 1)))?;
            let stage = current
                .as_mut()
                .ok_or_else(|| Error::Parse(format!("line {}: entry outside a [stage] section", i + 1)))?;
            let (key, val) = (key.trim(), val.trim());
            let number = |v: &str| {
                v.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: `{key}`: {e}", i + 1)))
            };
            match key {
                "name" => stage.0 = Some(val.trim_matches('"').to_string()),
                "value" => stage.1 = Some(number(val)?),
                "uncertainty" => stage.2 = number(val)?,
                _ => return Err(Error::Parse(format!("line {}: unknown key `{key}`", i + 1))),
            }
        }
        finish(current, &mut stages)?;
        let b = Self { stages };
        b.validate()?;
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    pub name: String,
    pub value: f64,
    pub uncertainty: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub rows: Vec<ChainRow>,
    pub product: Measured,
}

impl ChainReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Aligned columns: stage, value, uncertainty, cumulative product.
    pub fn to_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(5);
        let mut s = format!("{:<width$}  {:>10}  {:>10}  {:>10}\n", "stage", "value", "sigma", "cumulative");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<width$}  {:>10.6}  {:>10.6}  {:>10.6}",
                r.name, r.value, r.uncertainty, r.cumulative
            );
        }
        let _ = writeln!(
            s,
            "{:<width$}  {:>10.6}  {:>10.6}",
            "product", self.product.value, self.product.sigma
        );
        s
    }
}

/// Product of all stages with a running cumulative column.
pub fn chain(b: &EfficiencyBudget) -> Result<ChainReport> {
    b.validate()?;
    let mut cumulative = 1.0;
    let mut rel2 = 0.0;
    let rows = b
        .stages
        .iter()
        .map(|s| {
            cumulative *= s.value;
            rel2 += (s.uncertainty / s.value).powi(2);
            ChainRow {
                name: s.name.clone(),
                value: s.value,
                uncertainty: s.uncertainty,
                cumulative,
            }
        })
        .collect();
    Ok(ChainReport {
        rows,
        product: Measured::new(cumulative, cumulative * rel2.sqrt()),
    })
}

/// Source-detection efficiency product above which loss-tolerant linear
/// optical computing is possible (tolerating a loss of 1/3).
pub const EFFICIENCY_THRESHOLD: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub threshold: f64,
    pub eta_source: f64,
    pub eta_detector: f64,
    pub product: f64,
    pub source_margin: f64,
    pub product_margin: f64,
    /// `source_margin ≥ 0`.
    pub source_meets_threshold: bool,
    /// `product_margin ≥ 0`.
    pub product_meets_threshold: bool,
}

pub fn threshold_check(eta_source: f64, eta_detector: f64) -> Result<ThresholdReport> {
    for (name, v) in [("eta_source", eta_source), ("eta_detector", eta_detector)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(invalid(name, format!("{v} not in (0, 1]")));
        }
    }
    let product = eta_source * eta_detector;
    let source_margin = eta_source - EFFICIENCY_THRESHOLD;
    let product_margin = product - EFFICIENCY_THRESHOLD;
    Ok(ThresholdReport {
        threshold: EFFICIENCY_THRESHOLD,
        eta_source,
        eta_detector,
        product,
        source_margin,
        product_margin,
        source_meets_threshold: source_margin >= 0.0,
        product_meets_threshold: product_margin >= 0.0,
    })
}

/// `ρ = 1 − ratio²` for a deterministic source seen through total
/// efficiency `ρ`.
pub fn rho_from_squeezing(sigma_ratio: Measured) -> Result<Measured> {
    if !(sigma_ratio.value > 0.0) {
        return Err(invalid("sigma_ratio", "must be positive"));
    }
    if sigma_ratio.value > 1.0 {
        return Err(Error::Undefined(format!(
            "ratio {} is super-Poissonian; no efficiency can be inferred",
            sigma_ratio.value
        )));
    }
    let r = sigma_ratio.value;
    Ok(Measured::new(1.0 - r * r, 2.0 * r * sigma_ratio.sigma))
}

/// Overall efficiency from squeezing and/or a run-length fit, with the
/// detector-corrected source efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    pub from_squeezing: Option<Measured>,
    pub from_runs: Option<Measured>,
    /// Difference of the two estimates in combined standard deviations.
    pub discrepancy_sigma: Option<f64>,
    /// Preferred `ρ` (the run fit when available).
    pub rho: Measured,
    /// `ρ / η_detector`.
    pub source_efficiency: Measured,
}

pub fn rho_from_runs_or_squeezing(
    sigma_ratio: Option<Measured>,
    fitted_rho: Option<Measured>,
    detector_eff: Measured,
) -> Result<RhoReport> {
    if !(detector_eff.value > 0.0 && detector_eff.value <= 1.0) {
        return Err(invalid("detector_eff", "must be in (0, 1]"));
    }
    if let Some(f) = fitted_rho {
        if !(f.value > 0.0 && f.value < 1.0) {
            return Err(invalid("fitted_rho", format!("{} not in (0, 1)", f.value)));
        }
    }
    let from_squeezing = sigma_ratio.map(rho_from_squeezing).transpose()?;
    let rho = fitted_rho
        .or(from_squeezing)
        .ok_or_else(|| invalid("rho", "need a squeezing ratio or a fitted ρ"))?;
    let discrepancy_sigma = match (from_squeezing, fitted_rho) {
        (Some(a), Some(b)) => {
            let s = (a.sigma.powi(2) + b.sigma.powi(2)).sqrt();
            Some(if s > 0.0 { (a.value - b.value).abs() / s } else { f64::INFINITY })
        }
        _ => None,
    };
    let eta = rho.value / detector_eff.value;
    let rel = (rho.relative().powi(2) + detector_eff.relative().powi(2)).sqrt();
    Ok(RhoReport {
        from_squeezing,
        from_runs: fitted_rho,
        discrepancy_sigma,
        rho,
        source_efficiency: Measured::new(eta, eta * rel),
    })
}

/// Refractive indices near 890 nm.
pub mod materials {
    pub const ALAS: f64 = 2.95;
    pub const GAAS: f64 = 3.54;
    pub const SIO2: f64 = 1.45;
    pub const TA2O5: f64 = 2.10;
    pub const AIR: f64 = 1.0;

    pub fn index(name: &str) -> Option<f64> {
        match name.to_ascii_lowercase().as_str() {
            "alas" => Some(ALAS),
            "gaas" => Some(GAAS),
            "sio2" => Some(SIO2),
            "ta2o5" => Some(TA2O5),
            "air" | "vacuum" => Some(AIR),
            _ => None,
        }
    }
}

/// Quarter-wave Bragg stack. Layers are listed from the ambient side and
/// start with the high index: `(HL)^N` for integer `pairs`, `H(LH)^N` for
/// `N + ½`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DbrStack {
    pub n_high: f64,
    pub n_low: f64,
    pub pairs: f64,
    pub n_ambient: f64,
    pub n_substrate: f64,
    /// nm
    pub design_wavelength: f64,
}

impl DbrStack {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_high > 1.0 && self.n_low > 1.0 && self.n_substrate > 1.0) {
            return Err(invalid("dbr", "layer and substrate indices must exceed 1"));
        }
        if !(self.n_ambient >= 1.0) {
            return Err(invalid("dbr.n_ambient", "must be at least 1"));
        }
        if !(self.pairs >= 0.0 && (2.0 * self.pairs).fract() == 0.0) {
            return Err(invalid("dbr.pairs", format!("{} is not a non-negative multiple of 0.5", self.pairs)));
        }
        if !(self.design_wavelength > 0.0) {
            return Err(invalid("dbr.design_wavelength_nm", "must be positive"));
        }
        Ok(())
    }

    /// Layer indices from the ambient side.
    pub fn layers(&self) -> Vec<f64> {
        let n = (2.0 * self.pairs).round() as usize;
        (0..n).map(|i| if i % 2 == 0 { self.n_high } else { self.n_low }).collect()
    }
}

/// Normal-incidence reflectance by the characteristic-matrix method.
pub fn dbr_reflectivity(s: &DbrStack, wavelength: f64) -> Result<f64> {
    s.validate()?;
    if !(wavelength > 0.0) {
        return Err(invalid("wavelength_nm", "must be positive"));
    }
    let i = Complex64::i();
    let mut m = [[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
    for n in s.layers() {
        // quarter wave at the design wavelength
        let delta = std::f64::consts::FRAC_PI_2 * s.design_wavelength / wavelength;
        let (c, sn) = (delta.cos(), delta.sin());
        let layer = [[Complex64::new(c, 0.0), i * sn / n], [i * n * sn, Complex64::new(c, 0.0)]];
        m = [
            [
                m[0][0] * layer[0][0] + m[0][1] * layer[1][0],
                m[0][0] * layer[0][1] + m[0][1] * layer[1][1],
            ],
            [
                m[1][0] * layer[0][0] + m[1][1] * layer[1][0],
                m[1][0] * layer[0][1] + m[1][1] * layer[1][1],
            ],
        ];
    }
    let b = m[0][0] + m[0][1] * s.n_substrate;
    let c = m[1][0] + m[1][1] * s.n_substrate;
    let y = c / b;
    let r = (s.n_ambient - y) / (s.n_ambient + y);
    Ok(r.norm_sqr())
}
