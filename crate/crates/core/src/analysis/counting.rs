//! Binned photon counts, intensity squeezing and consecutive-photon runs.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::photonstream::TimestampStream;
use crate::rng::{block_rng, Purpose, BLOCK};

/// Counts in `[i·bin, (i+1)·bin)` for `i < n_bins`. Records past the last
/// bin are ignored; `None` sizes the vector to the last record.
pub fn bin_counts(s: &TimestampStream, bin_us: f64, n_bins: Option<usize>) -> Result<Vec<u64>> {
    if !(bin_us > 0.0 && bin_us.is_finite()) {
        return Err(invalid("bin_us", "must be positive"));
    }
    let bin_ps = bin_us * 1e6;
    let n = n_bins.unwrap_or_else(|| {
        s.records()
            .last()
            .map_or(0, |r| (r.t_ps as f64 / bin_ps).floor() as usize + 1)
    });
    let mut counts = vec![0u64; n];
    for t in s.times() {
        let i = (t as f64 / bin_ps).floor() as usize;
        if i < n {
            counts[i] += 1;
        }
    }
    Ok(counts)
}

/// Sub-shot-noise statistics of binned counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqueezingReport {
    pub n_bins: usize,
    pub pulses_per_bin: u32,
    pub mean: f64,
    /// Sample standard deviation.
    pub sigma: f64,
    /// `√mean`.
    pub sigma_shot: f64,
    pub ratio: f64,
    /// `−10·log₁₀(ratio)`.
    pub squeezing_db: f64,
    /// `mean / pulses_per_bin`.
    pub rho_hat: f64,
    /// `√(1 − rho_hat)`, the ratio expected for a deterministic source.
    pub binomial_ratio: f64,
}

pub fn squeezing_report(counts: &[u64], pulses_per_bin: u32) -> Result<SqueezingReport> {
    if counts.len() < 2 {
        return Err(invalid("counts", "need at least 2 bins"));
    }
    if pulses_per_bin == 0 {
        return Err(invalid("pulses_per_bin", "must be positive"));
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    if mean <= 0.0 {
        return Err(Error::Undefined("zero mean count".into()));
    }
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sigma = var.sqrt();
    let sigma_shot = mean.sqrt();
    let ratio = sigma / sigma_shot;
    let rho_hat = mean / pulses_per_bin as f64;
    Ok(SqueezingReport {
        n_bins: counts.len(),
        pulses_per_bin,
        mean,
        sigma,
        sigma_shot,
        ratio,
        squeezing_db: -10.0 * ratio.log10(),
        rho_hat,
        binomial_ratio: (1.0 - rho_hat).max(0.0).sqrt(),
    })
}

/// Efficiency a deterministic source needs to show `db` of squeezing,
/// under the standard-deviation and the variance dB conventions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpliedEfficiency {
    pub db: f64,
    pub sigma_ratio: f64,
    pub rho_sigma_convention: f64,
    pub rho_variance_convention: f64,
}

pub fn implied_efficiency(db: f64) -> ImpliedEfficiency {
    let sigma_ratio = 10f64.powf(-db / 10.0);
    ImpliedEfficiency {
        db,
        sigma_ratio,
        rho_sigma_convention: 1.0 - sigma_ratio * sigma_ratio,
        rho_variance_convention: 1.0 - sigma_ratio,
    }
}

/// Tallies maximal streaks of consecutive `true` flags.
#[derive(Debug, Clone, Default)]
pub struct RunCounter {
    counts: Vec<u64>,
    current: usize,
}

impl RunCounter {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, flag: bool) {
        if flag {
            self.current += 1;
        } else {
            self.close();
        }
    }

    pub fn extend<I: IntoIterator<Item = bool>>(&mut self, flags: I) {
        for f in flags {
            self.push(f);
        }
    }

    fn close(&mut self) {
        if self.current > 0 {
            if self.counts.len() <= self.current {
                self.counts.resize(self.current + 1, 0);
            }
            self.counts[self.current] += 1;
            self.current = 0;
        }
    }

    /// Streak counts indexed by length; index 0 is always zero.
    pub fn finish(mut self) -> Vec<u64> {
        self.close();
        if self.counts.is_empty() {
            self.counts.push(0);
        }
        self.counts
    }
}

/// Exponential fit `counts_n ∝ ρⁿ` to the streak spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFit {
    pub fitted_rho: f64,
    /// 95% confidence interval on `fitted_rho`.
    pub fit_ci: (f64, f64),
    /// Streak lengths used (each with at least `MIN_EVENTS` events).
    pub lengths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLengthReport {
    pub n_pulses: u64,
    /// Maximal streaks of length exactly `n`, indexed by `n`.
    pub counts_per_n: Vec<u64>,
    /// Streaks of length at least `n`.
    pub at_least_n: Vec<u64>,
    pub fit: Option<RunFit>,
    /// Why the fit was refused, when it was.
    pub fit_refused: Option<String>,
}

/// Minimum events for a streak length to enter the fit.
pub const MIN_EVENTS: u64 = 10;

pub fn consecutive_runs(flags: &[bool]) -> Result<RunLengthReport> {
    if flags.is_empty() {
        return Err(invalid("flags", "need at least one pulse"));
    }
    let mut c = RunCounter::new();
    c.extend(flags.iter().copied());
    Ok(run_report(c.finish(), flags.len() as u64))
}

/// Streak report for `n_pulses` i.i.d. detections with probability `p`,
/// generated block by block without holding all flags in memory.
pub fn bernoulli_runs(p: f64, n_pulses: u64, seed: u64) -> Result<RunLengthReport> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid("rho", format!("{p} not in [0, 1]")));
    }
    if n_pulses == 0 {
        return Err(invalid("n_pulses", "must be positive"));
    }
    const SUPER: u64 = 256;
    let n_blocks = n_pulses.div_ceil(BLOCK as u64);
    let mut counter = RunCounter::new();
    let mut first = 0;
    while first < n_blocks {
        let last = (first + SUPER).min(n_blocks);
        let chunks: Vec<Vec<bool>> = (first..last)
            .into_par_iter()
            .map(|b| {
                let mut rng = block_rng(seed, Purpose::Synthetic, b);
                let len = (n_pulses - b * BLOCK as u64).min(BLOCK as u64);
                (0..len).map(|_| rng.gen::<f64>() < p).collect()
            })
            .collect();
        for chunk in chunks {
            counter.extend(chunk);
        }
        first = last;
    }
    Ok(run_report(counter.finish(), n_pulses))
}

fn run_report(counts_per_n: Vec<u64>, n_pulses: u64) -> RunLengthReport {
    let mut at_least_n = counts_per_n.clone();
    for i in (0..at_least_n.len().saturating_sub(1)).rev() {
        at_least_n[i] += at_least_n[i + 1];
    }
    let (fit, fit_refused) = match fit_streaks(&counts_per_n) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    RunLengthReport {
        n_pulses,
        counts_per_n,
        at_least_n,
        fit,
        fit_refused,
    }
}

/// Weighted least squares of `ln counts` against `n`, with weights equal to
/// the counts (the inverse Poisson variance of the logarithm).
fn fit_streaks(counts: &[u64]) -> Result<RunFit> {
    let pts: Vec<(usize, f64)> = counts
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, &c)| c >= MIN_EVENTS)
        .map(|(n, &c)| (n, c as f64))
        .collect();
    if pts.len() < 3 {
        return Err(Error::FitRefused(format!(
            "{} streak lengths with at least {MIN_EVENTS} events",
            pts.len()
        )));
    }
    let sw: f64 = pts.iter().map(|p| p.1).sum();
    let xm = pts.iter().map(|&(n, w)| w * n as f64).sum::<f64>() / sw;
    let ym = pts.iter().map(|&(_, w)| w * w.ln()).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|&(n, w)| w * (n as f64 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|&(n, w)| w * (n as f64 - xm) * (w.ln() - ym)).sum();
    let slope = sxy / sxx;
    let se = 1.0 / sxx.sqrt();
    let fitted_rho = slope.exp();
    if !(fitted_rho > 0.0 && fitted_rho < 1.0) {
        return Err(Error::FitRefused(format!("slope gives ρ = {fitted_rho}")));
    }
    Ok(RunFit {
        fitted_rho,
        fit_ci: ((slope - 1.96 * se).exp(), (slope + 1.96 * se).exp()),
        lengths: pts.iter().map(|p| p.0).collect(),
    })
}

/// Rate (Hz) of `n` consecutive detections at efficiency `rho` and pulse
/// rate `rate_hz`.
pub fn predicted_run_rate(rho: f64, rate_hz: f64, n: u32) -> f64 {
    rate_hz * rho.powi(n as i32)
}
