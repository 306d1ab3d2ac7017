//! Two-photon interference: forward simulator, raw visibility and the
//! multiphoton / splitter correction.
//!
//! The simulator sends one signal photon into each splitter input per pulse
//! slot. Each input also carries, with probability `q`, a noise photon that is
//! distinguishable from everything else; `q` is set so that one input alone
//! shows the requested g²(0), `2q/(1+q)² = g2`. The two signal photons are
//! identical with probability `m`. Every photon is time-tagged, so the
//! coincidence histogram counts photon pairs.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlation::{g2_zero, require_same_binning, Histogram, PeakRatio};
use crate::error::{invalid, Error, Result};
use crate::photonstream::{Record, TimestampStream};
use crate::rng::{block_rng, Purpose, BLOCK};
use crate::units::per_ns_to_per_ps;

/// Timing and detection settings of the interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomSetup {
    /// Slot spacing (ps).
    pub period_ps: f64,
    /// Radiative rate setting the photon arrival spread (ns⁻¹).
    pub gamma: f64,
    /// Per-photon detection probability.
    pub efficiency: f64,
}

impl Default for HomSetup {
    fn default() -> Self {
        Self {
            period_ps: 13_135.0,
            gamma: 19.0,
            efficiency: 1.0,
        }
    }
}

/// Output-port streams for co- and cross-polarised inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct HomStreams {
    pub parallel: (TimestampStream, TimestampStream),
    pub cross: (TimestampStream, TimestampStream),
}

/// Noise-photon probability per input giving one input the stated g²(0).
pub fn noise_probability(g2: f64) -> Result<f64> {
    if !(0.0..=0.5).contains(&g2) {
        return Err(invalid("g2", format!("{g2} outside [0, 0.5] for the noise-photon model")));
    }
    if g2 == 0.0 {
        return Ok(0.0);
    }
    Ok(((1.0 - g2) - (1.0 - 2.0 * g2).sqrt()) / g2)
}

pub fn hom_simulate(m: f64, g2: f64, r: f64, n_pulses: usize, seed: u64) -> Result<HomStreams> {
    hom_simulate_with(&HomSetup::default(), m, g2, r, n_pulses, seed)
}

pub fn hom_simulate_with(setup: &HomSetup, m: f64, g2: f64, r: f64, n_pulses: usize, seed: u64) -> Result<HomStreams> {
    for (name, v) in [("m", m), ("reflectance", r), ("efficiency", setup.efficiency)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(invalid(name, format!("{v} not in [0, 1]")));
        }
    }
    if !(setup.period_ps > 0.0 && setup.gamma > 0.0) {
        return Err(invalid("hom", "period and gamma must be positive"));
    }
    let q = noise_probability(g2)?;
    let parallel = simulate_ports(setup, m, q, r, n_pulses, seed, 0)?;
    let cross = simulate_ports(setup, 0.0, q, r, n_pulses, seed, 1 << 40)?;
    Ok(HomStreams { parallel, cross })
}

fn simulate_ports(
    setup: &HomSetup,
    m: f64,
    q: f64,
    r: f64,
    n_pulses: usize,
    seed: u64,
    block_offset: u64,
) -> Result<(TimestampStream, TimestampStream)> {
    let t = 1.0 - r;
    let exp = Exp::new(per_ns_to_per_ps(setup.gamma)).map_err(|e| invalid("gamma", e.to_string()))?;
    let n_blocks = n_pulses.div_ceil(BLOCK);
    let records: Vec<Record> = (0..n_blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = block_rng(seed, Purpose::Hom, block_offset + b as u64);
            let mut out = Vec::new();
            for j in b * BLOCK..((b + 1) * BLOCK).min(n_pulses) {
                let t0 = j as f64 * setup.period_ps;
                // output port of each photon: 0 = transmitted side of input A
                let mut ports = [0u8; 4];
                let mut n = 2;
                if rng.gen::<f64>() < m {
                    let u: f64 = rng.gen();
                    let split = (t - r).powi(2);
                    ports[..2].copy_from_slice(if u < split {
                        &[0, 1]
                    } else if u < split + 2.0 * r * t {
                        &[0, 0]
                    } else {
                        &[1, 1]
                    });
                } else {
                    ports[0] = route(&mut rng, t);
                    ports[1] = route(&mut rng, r);
                }
                if rng.gen::<f64>() < q {
                    ports[n] = route(&mut rng, t);
                    n += 1;
                }
                if rng.gen::<f64>() < q {
                    ports[n] = route(&mut rng, r);
                    n += 1;
                }
                for &p in &ports[..n] {
                    let dt = exp.sample(&mut rng);
                    if rng.gen::<f64>() < setup.efficiency {
                        out.push(Record::new(p, (t0 + dt).round() as u64));
                    }
                }
            }
            out
        })
        .collect();
    let mut c = Vec::new();
    let mut d = Vec::new();
    for rec in records {
        if rec.channel == 0 { &mut c } else { &mut d }.push(rec);
    }
    Ok((sorted_stream(c)?, sorted_stream(d)?))
}

/// Port 0 with probability `p_first`, else port 1.
fn route(rng: &mut ChaCha8Rng, p_first: f64) -> u8 {
    u8::from(rng.gen::<f64>() >= p_first)
}

fn sorted_stream(mut records: Vec<Record>) -> Result<TimestampStream> {
    records.sort_unstable();
    for i in 1..records.len() {
        if records[i].t_ps <= records[i - 1].t_ps {
            records[i].t_ps = records[i - 1].t_ps + 1;
        }
    }
    TimestampStream::from_records(records, None)
}

/// Raw visibility with the normalised central peaks it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomVisibility {
    pub v_raw: f64,
    pub std_error: f64,
    pub parallel: PeakRatio,
    pub cross: PeakRatio,
}

/// `1 − A_par(0)/A_cross(0)` with each central area normalised by its own
/// side peaks.
pub fn hom_visibility(h_par: &Histogram, h_cross: &Histogram, period_ns: f64, peak_halfwidth_ns: f64) -> Result<HomVisibility> {
    require_same_binning(h_par, h_cross)?;
    let parallel = g2_zero(h_par, period_ns, peak_halfwidth_ns)?;
    let cross = g2_zero(h_cross, period_ns, peak_halfwidth_ns)?;
    if cross.central_area == 0 {
        return Err(Error::Undefined("zero cross-polarised central area".into()));
    }
    let ratio = parallel.value / cross.value;
    let rel = ((parallel.std_error / parallel.value).powi(2) + (cross.std_error / cross.value).powi(2)).sqrt();
    let std_error = if parallel.value > 0.0 {
        ratio * rel
    } else {
        parallel.std_error / cross.value
    };
    Ok(HomVisibility {
        v_raw: 1.0 - ratio,
        std_error,
        parallel,
        cross,
    })
}

/// Single-photon indistinguishability inferred from a raw visibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomReport {
    pub v_raw: f64,
    pub m_corrected: f64,
    pub r: f64,
    pub g2: f64,
    /// False when `m_corrected` falls outside `[0, 1]`.
    pub consistent: bool,
}

/// `m = (r² + t²)/(2rt) · (v_raw + g2·(1 + v_raw))`, `t = 1 − r`.
pub fn correct_indistinguishability(v_raw: f64, g2: f64, r: f64) -> Result<HomReport> {
    if !(r > 0.0 && r < 1.0) {
        return Err(invalid("reflectance", format!("{r} not in (0, 1)")));
    }
    if !(0.0..1.0).contains(&g2) {
        return Err(invalid("g2", format!("{g2} not in [0, 1)")));
    }
    if !(v_raw <= 1.0) {
        return Err(invalid("v_raw", format!("{v_raw} above 1")));
    }
    let t = 1.0 - r;
    let m = (r * r + t * t) / (2.0 * r * t) * (v_raw + g2 * (1.0 + v_raw));
    Ok(HomReport {
        v_raw,
        m_corrected: m,
        r,
        g2,
        consistent: (0.0..=1.0).contains(&m),
    })
}
