//! Driven two-level emitter.
//!
//! Three independent routes compute the per-pulse emission statistics:
//! [`bloch_integrate`] (density matrix, mean photon number),
//! [`photon_number_distribution`] (photon-number resolved master equation)
//! and [`mcwf_simulate`] (quantum jumps with re-excitation). The tests hold
//! them against each other.
//!
//! The Hamiltonian in the frame of the QD transition is
//! `H = Δ|e⟩⟨e| + ½(Ω(t)σ₊ + Ω*(t)σ₋)` with radiative decay `Γ` through `σ₋`
//! and pure dephasing `γ*` (coherences decay at `Γ/2 + γ*`).

mod bloch;
mod counting;
mod indist;
mod mcwf;
mod sweep;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::optics::{PulseField, MIN_SAMPLES};
use crate::units::per_ns_to_per_ps;

pub use bloch::{bloch_integrate, BlochResult};
pub use counting::photon_number_distribution;
pub use indist::{fit_indistinguishability, indistinguishability, IndistinguishabilityFit};
pub use mcwf::{mcwf_simulate, EmissionOutcome};
pub use sweep::{find_pi_scale, first_maximum, purity_vs_width, rabi_sweep, PurityRow, RabiPoint, ShapingChain};

/// Photon-number truncation of emission statistics.
pub const N_MAX: usize = 8;

/// Emitter rates. Rates in ns⁻¹, correlation time in µs, detuning in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    /// Purcell-enhanced radiative decay rate Γ.
    pub gamma: f64,
    /// Pure dephasing rate γ*.
    pub gamma_dephase: f64,
    /// Spectral-diffusion saturation rate.
    pub gamma_sd: f64,
    /// Spectral-diffusion correlation time (µs).
    pub tau_c: f64,
    /// Emitter transition relative to the frame origin (GHz).
    pub detuning: f64,
}

impl Default for EmitterParams {
    /// 1 ns bare lifetime with Purcell factor 18: Γ = 19 ns⁻¹.
    fn default() -> Self {
        Self {
            gamma: Self::purcell_enhanced_rate(1.0, 18.0),
            gamma_dephase: 0.0,
            gamma_sd: 0.0,
            tau_c: 1.0,
            detuning: 0.0,
        }
    }
}

impl EmitterParams {
    /// Total decay rate `(F_p + 1)/τ₀` for bare lifetime `τ₀` (ns).
    pub fn purcell_enhanced_rate(bare_lifetime_ns: f64, purcell: f64) -> f64 {
        (purcell + 1.0) / bare_lifetime_ns
    }

    pub fn with_gamma(gamma: f64) -> Self {
        Self {
            gamma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(invalid("emitter.gamma", format!("{} must be positive", self.gamma)));
        }
        if !(self.gamma_dephase.is_finite() && self.gamma_dephase >= 0.0) {
            return Err(invalid("emitter.gamma_dephase", "must be non-negative"));
        }
        if !(self.gamma_sd.is_finite() && self.gamma_sd >= 0.0) {
            return Err(invalid("emitter.gamma_sd", "must be non-negative"));
        }
        if !(self.tau_c.is_finite() && self.tau_c > 0.0) {
            return Err(invalid("emitter.tau_c", "must be positive"));
        }
        if !self.detuning.is_finite() {
            return Err(invalid("emitter.detuning", "must be finite"));
        }
        Ok(())
    }

    pub(crate) fn rates_per_ps(&self) -> Rates {
        Rates {
            gamma: per_ns_to_per_ps(self.gamma),
            dephase: per_ns_to_per_ps(self.gamma_dephase),
            delta: 2.0 * std::f64::consts::PI * self.detuning * 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Rates {
    pub gamma: f64,
    pub dephase: f64,
    /// rad/ps
    pub delta: f64,
}

/// Complex Rabi frequency Ω(t) on a uniform grid (rad/ps).
#[derive(Debug, Clone, PartialEq)]
pub struct DriveProfile {
    /// ps
    pub t0: f64,
    /// ps
    pub dt: f64,
    pub rabi: Vec<Complex64>,
}

impl DriveProfile {
    pub fn new(t0: f64, dt: f64, rabi: Vec<Complex64>) -> Result<Self> {
        if rabi.len() < MIN_SAMPLES {
            return Err(invalid("drive", format!("{} < {MIN_SAMPLES} samples", rabi.len())));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("drive.dt", "must be positive"));
        }
        if rabi.iter().any(|w| !(w.re.is_finite() && w.im.is_finite())) {
            return Err(invalid("drive", "non-finite Rabi frequency"));
        }
        Ok(Self { t0, dt, rabi })
    }

    /// `Ω(t) = κ_drive · a(t)`.
    pub fn from_pulse(p: &PulseField, kappa_drive: f64) -> Self {
        Self {
            t0: p.t0,
            dt: p.dt,
            rabi: p.samples.iter().map(|a| a * kappa_drive).collect(),
        }
    }

    /// Drop leading and trailing samples with `|Ω| < rel·max|Ω|`, keeping at
    /// least [`MIN_SAMPLES`] samples around the retained support.
    pub fn cropped(&self, rel: f64) -> Self {
        let max = self.max_rabi();
        if max == 0.0 {
            return self.clone();
        }
        let thresh = rel * max;
        let first = self.rabi.iter().position(|w| w.norm() >= thresh).unwrap_or(0);
        let last = self
            .rabi
            .iter()
            .rposition(|w| w.norm() >= thresh)
            .unwrap_or(self.rabi.len() - 1);
        let (mut lo, mut hi) = (first, last + 1);
        while hi - lo < MIN_SAMPLES {
            if lo > 0 {
                lo -= 1;
            }
            if hi - lo < MIN_SAMPLES && hi < self.rabi.len() {
                hi += 1;
            }
        }
        Self {
            t0: self.t0 + lo as f64 * self.dt,
            dt: self.dt,
            rabi: self.rabi[lo..hi].to_vec(),
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            t0: self.t0,
            dt: self.dt,
            rabi: self.rabi.iter().map(|w| w * s).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.rabi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rabi.is_empty()
    }

    /// `∫|Ω| dt` (rad).
    pub fn area(&self) -> f64 {
        self.rabi.iter().map(|w| w.norm()).sum::<f64>() * self.dt
    }

    pub fn max_rabi(&self) -> f64 {
        self.rabi.iter().map(|w| w.norm()).fold(0.0, f64::max)
    }

    pub fn end_time(&self) -> f64 {
        self.t0 + (self.rabi.len() - 1) as f64 * self.dt
    }

    /// Linear interpolation of Ω at fractional sample index `x`.
    #[inline]
    pub(crate) fn at(&self, x: f64) -> Complex64 {
        let i = x.floor();
        let k = i as usize;
        if k + 1 >= self.rabi.len() {
            return self.rabi[self.rabi.len() - 1];
        }
        let f = x - i;
        self.rabi[k] * (1.0 - f) + self.rabi[k + 1] * f
    }

    /// Largest step allowed by `dt ≤ min(0.05/Ω_max, 0.02/γ)`.
    pub fn check_resolution(&self, e: &EmitterParams) -> Result<()> {
        e.validate()?;
        let r = e.rates_per_ps();
        let mut bounds = vec![("gamma", 0.02 / r.gamma)];
        if r.dephase > 0.0 {
            bounds.push(("gamma_dephase", 0.02 / r.dephase));
        }
        let w = self.max_rabi();
        if w > 0.0 {
            bounds.push(("the peak Rabi frequency", 0.05 / w));
        }
        let (limiting, max_dt) = bounds
            .into_iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("gamma bound always present");
        if self.dt > max_dt {
            return Err(Error::StepSize {
                limiting,
                dt_ps: self.dt,
                max_dt_ps: max_dt,
            });
        }
        Ok(())
    }
}

/// `⟨n(n−1)⟩ / ⟨n⟩²` of a photon-number distribution.
pub fn g2_from_pn(pn: &[f64]) -> Result<f64> {
    let mean: f64 = pn.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    if !(mean > 0.0) {
        return Err(Error::Undefined("g2 of a distribution with zero mean".into()));
    }
    let fact2: f64 = pn
        .iter()
        .enumerate()
        .map(|(n, p)| (n as f64) * (n as f64 - 1.0).max(0.0) * p)
        .sum();
    Ok(fact2 / (mean * mean))
}

/// Mean photon number `Σ n·pₙ`.
pub fn mean_from_pn(pn: &[f64]) -> f64 {
    pn.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g2_examples() {
        assert_eq!(g2_from_pn(&[0.1, 0.9]).unwrap(), 0.0);
        let g = g2_from_pn(&[0.02, 0.9798, 0.0002]).unwrap();
        assert!((mean_from_pn(&[0.02, 0.9798, 0.0002]) - 0.9802).abs() < 1e-12);
        assert!((g - 4.0e-4 / (0.9802f64 * 0.9802)).abs() < 1e-12);
        assert!((g - 4.16e-4).abs() < 1e-6);
        assert!(g2_from_pn(&[1.0]).is_err());
        assert!(g2_from_pn(&[1.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn g2_of_poisson_is_one() {
        for mean in [0.05, 0.5, 1.0, 2.0] {
            let mut pn = Vec::new();
            let mut p = (-mean as f64).exp();
            for n in 0..60 {
                pn.push(p);
                p *= mean / (n as f64 + 1.0);
            }
            assert!((g2_from_pn(&pn).unwrap() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn default_gamma_uses_purcell_plus_one() {
        assert_eq!(EmitterParams::default().gamma, 19.0);
        assert!(EmitterParams { gamma: 0.0, ..Default::default() }.validate().is_err());
        assert!(EmitterParams { tau_c: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn step_bound_names_limiting_rate() {
        let d = DriveProfile::new(0.0, 0.5, vec![Complex64::new(1.0, 0.0); 64]).unwrap();
        match d.check_resolution(&EmitterParams::default()) {
            Err(Error::StepSize { limiting, .. }) => assert!(limiting.contains("Rabi")),
            other => panic!("{other:?}"),
        }
        let slow = DriveProfile::new(0.0, 2.0, vec![Complex64::new(0.0, 0.0); 64]).unwrap();
        match slow.check_resolution(&EmitterParams::with_gamma(19.0)) {
            Err(Error::StepSize { limiting, .. }) => assert_eq!(limiting, "gamma"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn crop_keeps_support() {
        let mut rabi = vec![Complex64::new(0.0, 0.0); 1000];
        for w in rabi.iter_mut().skip(500).take(10) {
            *w = Complex64::new(1.0, 0.0);
        }
        let d = DriveProfile::new(-10.0, 0.1, rabi).unwrap();
        let c = d.cropped(1e-3);
        assert_eq!(c.len(), MIN_SAMPLES);
        assert!((c.area() - d.area()).abs() < 1e-12);
        let first = c.rabi.iter().position(|w| w.norm() > 0.0).unwrap();
        assert!((c.t0 + first as f64 * c.dt - (-10.0 + 50.0)).abs() < 1e-9);
    }
}
