//! Photon timestamp streams: emission, loss, beamsplitters and detectors.
//!
//! Every stochastic step draws from generators keyed by the record (or pulse)
//! index in blocks of [`rng::BLOCK`](crate::rng::BLOCK), so the chunked
//! parallel implementation reproduces a sequential pass exactly.

mod io;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rng::{block_rng, Purpose, BLOCK};
use crate::units::{per_ns_to_per_ps, period_ps};

pub use io::MAGIC;

/// One detection or emission event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Record {
    pub t_ps: u64,
    pub channel: u8,
}

impl Record {
    pub fn new(channel: u8, t_ps: u64) -> Self {
        Self { t_ps, channel }
    }
}

/// Acquisition settings carried along with a stream for provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StreamMeta {
    pub rep_rate_mhz: f64,
    pub pick_factor: u32,
    pub seed: u64,
}

/// Time-ordered records. Times are non-decreasing overall and strictly
/// increasing within each channel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimestampStream {
    records: Vec<Record>,
    pub meta: Option<StreamMeta>,
}

impl TimestampStream {
    /// Checks the ordering invariant.
    pub fn from_records(records: Vec<Record>, meta: Option<StreamMeta>) -> Result<Self> {
        let mut last = [None::<u64>; 256];
        let mut prev = 0u64;
        for (i, r) in records.iter().enumerate() {
            if r.t_ps < prev {
                return Err(invalid("records", format!("record {i} is out of time order")));
            }
            if let Some(l) = last[r.channel as usize] {
                if r.t_ps <= l {
                    return Err(invalid(
                        "records",
                        format!("record {i} repeats time {} on channel {}", r.t_ps, r.channel),
                    ));
                }
            }
            last[r.channel as usize] = Some(r.t_ps);
            prev = r.t_ps;
        }
        Ok(Self { records, meta })
    }

    /// Sorts and nudges same-channel ties forward by 1 ps.
    fn from_unsorted(mut records: Vec<Record>, meta: Option<StreamMeta>) -> Self {
        records.par_sort_unstable();
        let mut last = [None::<u64>; 256];
        let mut bumped = false;
        for r in records.iter_mut() {
            if let Some(l) = last[r.channel as usize] {
                if r.t_ps <= l {
                    r.t_ps = l + 1;
                    bumped = true;
                }
            }
            last[r.channel as usize] = Some(r.t_ps);
        }
        if bumped {
            records.par_sort_unstable();
        }
        Self { records, meta }
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn into_records(self) -> Vec<Record> {
        self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = u64> + '_ {
        self.records.iter().map(|r| r.t_ps)
    }

    /// Records of one channel.
    pub fn channel(&self, c: u8) -> Self {
        Self {
            records: self.records.iter().copied().filter(|r| r.channel == c).collect(),
            meta: self.meta,
        }
    }

    /// Same times with every record moved to channel `c`.
    pub fn relabel(&self, c: u8) -> Result<Self> {
        Self::from_records(self.records.iter().map(|r| Record::new(c, r.t_ps)).collect(), self.meta)
    }

    /// Union of several streams, each relabelled to the given channel.
    pub fn merge(parts: &[(&TimestampStream, u8)]) -> Result<Self> {
        let mut records: Vec<Record> = parts
            .iter()
            .flat_map(|(s, c)| s.records.iter().map(move |r| Record::new(*c, r.t_ps)))
            .collect();
        records.par_sort_unstable();
        Self::from_records(records, parts.first().and_then(|(s, _)| s.meta))
    }

    /// Pulse `j` is flagged when any record falls in `[j·period, (j+1)·period)`,
    /// allowing for the half-picosecond rounding of record times.
    pub fn pulse_flags(&self, period_ps: f64, n_pulses: usize) -> Vec<bool> {
        let mut flags = vec![false; n_pulses];
        for r in &self.records {
            let j = ((r.t_ps as f64 + 0.5) / period_ps).floor() as usize;
            if j < n_pulses {
                flags[j] = true;
            }
        }
        flags
    }
}

/// Laser pulse train after the pulse picker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    /// Laser repetition rate before picking (MHz).
    pub rep_rate_mhz: f64,
    /// Picked pulses.
    pub n_pulses: usize,
    pub pick_factor: u32,
    /// Fraction of pulses on which the source is active.
    #[serde(default = "one")]
    pub duty_cycle: f64,
}

fn one() -> f64 {
    1.0
}

impl PulseTrain {
    pub fn new(rep_rate_mhz: f64, n_pulses: usize, pick_factor: u32) -> Result<Self> {
        let t = Self {
            rep_rate_mhz,
            n_pulses,
            pick_factor,
            duty_cycle: 1.0,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rep_rate_mhz > 0.0 && self.rep_rate_mhz.is_finite()) {
            return Err(invalid("train.rep_rate_mhz", "must be positive"));
        }
        if self.pick_factor == 0 {
            return Err(invalid("train.pick_factor", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.duty_cycle) {
            return Err(invalid("train.duty_cycle", "must be in [0, 1]"));
        }
        Ok(())
    }

    /// Repetition rate after picking (MHz).
    pub fn effective_rate_mhz(&self) -> f64 {
        self.rep_rate_mhz / self.pick_factor as f64
    }

    /// Spacing of picked pulses (ps).
    pub fn period_ps(&self) -> f64 {
        period_ps(self.effective_rate_mhz())
    }

    pub fn duration_ps(&self) -> f64 {
        self.n_pulses as f64 * self.period_ps()
    }
}

/// Single-photon detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Non-paralyzable dead time (ns).
    pub dead_time: f64,
    /// Gaussian timing jitter (ps, standard deviation).
    pub jitter_sigma: f64,
}

impl DetectorModel {
    pub const IDEAL: Self = Self {
        efficiency: 1.0,
        dead_time: 0.0,
        jitter_sigma: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(invalid("detector.efficiency", format!("{} not in [0, 1]", self.efficiency)));
        }
        if !(self.dead_time >= 0.0 && self.dead_time.is_finite()) {
            return Err(invalid("detector.dead_time_ns", "must be non-negative"));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_sigma.is_finite()) {
            return Err(invalid("detector.jitter_ps", "must be non-negative"));
        }
        Ok(())
    }
}

/// Per-pulse source of emission times.
pub trait EmissionSampler: Sync {
    /// Append the emission offsets (ps after the pulse) of one pulse.
    /// `gamma` is the radiative rate in ps⁻¹.
    fn sample(&self, rng: &mut ChaCha8Rng, gamma: f64, out: &mut Vec<f64>);
}

/// At most one photon per pulse, emitted with probability `p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliSampler {
    p: f64,
}

impl BernoulliSampler {
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid("p", format!("{p} not in [0, 1]")));
        }
        Ok(Self { p })
    }
}

impl EmissionSampler for BernoulliSampler {
    fn sample(&self, rng: &mut ChaCha8Rng, gamma: f64, out: &mut Vec<f64>) {
        if rng.gen::<f64>() < self.p {
            out.push(exp_offset(rng, gamma));
        }
    }
}

/// Photon number drawn from `pn`; successive photons of a pulse are emitted
/// one after another.
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonNumberSampler {
    cdf: Vec<f64>,
}

impl PhotonNumberSampler {
    pub fn new(pn: &[f64]) -> Result<Self> {
        if pn.is_empty() || pn.iter().any(|p| !(*p >= 0.0)) {
            return Err(invalid("pn", "probabilities must be non-negative"));
        }
        let total: f64 = pn.iter().sum();
        if (total - 1.0).abs() > 1e-6 {
            return Err(invalid("pn", format!("sums to {total}")));
        }
        let mut acc = 0.0;
        let cdf = pn
            .iter()
            .map(|p| {
                acc += p / total;
                acc
            })
            .collect();
        Ok(Self { cdf })
    }
}

impl EmissionSampler for PhotonNumberSampler {
    fn sample(&self, rng: &mut ChaCha8Rng, gamma: f64, out: &mut Vec<f64>) {
        let u: f64 = rng.gen();
        let n = self.cdf.iter().position(|c| u < *c).unwrap_or(self.cdf.len() - 1);
        let mut t = 0.0;
        for _ in 0..n {
            t += exp_offset(rng, gamma);
            out.push(t);
        }
    }
}

/// Replays quantum-jump trajectories, one drawn at random per pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecordSampler {
    records: Vec<Vec<f64>>,
    origin: f64,
}

impl JumpRecordSampler {
    /// `origin` is the time on the trajectory axis that maps to the pulse
    /// instant; earlier jumps are clamped to it.
    pub fn new(records: Vec<Vec<f64>>, origin: f64) -> Result<Self> {
        if records.is_empty() {
            return Err(invalid("jump_records", "no trajectories"));
        }
        Ok(Self { records, origin })
    }
}

impl EmissionSampler for JumpRecordSampler {
    fn sample(&self, rng: &mut ChaCha8Rng, _gamma: f64, out: &mut Vec<f64>) {
        let k = rng.gen_range(0..self.records.len());
        out.extend(self.records[k].iter().map(|t| (t - self.origin).max(0.0)));
    }
}

fn exp_offset(rng: &mut ChaCha8Rng, gamma: f64) -> f64 {
    if gamma > 0.0 && gamma.is_finite() {
        Exp::new(gamma).map(|d| d.sample(rng)).unwrap_or(0.0)
    } else {
        0.0
    }
}

/// Timestamps on channel 0 for every emitted photon of the train. Photon
/// `k` of pulse `j` arrives at `j·period + offset_k`.
pub fn emit_stream(
    source: &dyn EmissionSampler,
    train: &PulseTrain,
    gamma: f64,
    seed: u64,
) -> Result<TimestampStream> {
    train.validate()?;
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(invalid("emitter.gamma", "must be positive"));
    }
    let gamma_ps = per_ns_to_per_ps(gamma);
    let period = train.period_ps();
    let n_blocks = train.n_pulses.div_ceil(BLOCK);
    let records: Vec<Record> = (0..n_blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rng = block_rng(seed, Purpose::Emission, b as u64);
            let start = b * BLOCK;
            let end = (start + BLOCK).min(train.n_pulses);
            let mut out = Vec::new();
            let mut offsets = Vec::with_capacity(4);
            for j in start..end {
                if train.duty_cycle < 1.0 && rng.gen::<f64>() >= train.duty_cycle {
                    continue;
                }
                offsets.clear();
                source.sample(&mut rng, gamma_ps, &mut offsets);
                let t0 = j as f64 * period;
                out.extend(offsets.iter().map(|o| Record::new(0, (t0 + o).round() as u64)));
            }
            out
        })
        .collect();
    Ok(TimestampStream::from_unsorted(
        records,
        Some(StreamMeta {
            rep_rate_mhz: train.rep_rate_mhz,
            pick_factor: train.pick_factor,
            seed,
        }),
    ))
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(name, format!("{p} not in [0, 1]")));
    }
    Ok(())
}

/// Keeps each record independently with probability `transmission`.
pub fn apply_loss(s: &TimestampStream, transmission: f64, seed: u64) -> Result<TimestampStream> {
    check_probability("transmission", transmission)?;
    let records: Vec<Record> = s
        .records
        .par_chunks(BLOCK)
        .enumerate()
        .flat_map_iter(|(b, chunk)| {
            let mut rng = block_rng(seed, Purpose::Loss, b as u64);
            chunk
                .iter()
                .filter(|_| rng.gen::<f64>() < transmission)
                .copied()
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(TimestampStream { records, meta: s.meta })
}

/// Routes each record to the first output with probability `r`, otherwise
/// to the second. Channel labels are kept.
pub fn beamsplit(s: &TimestampStream, r: f64, seed: u64) -> Result<(TimestampStream, TimestampStream)> {
    check_probability("reflectance", r)?;
    let parts: Vec<(Vec<Record>, Vec<Record>)> = s
        .records
        .par_chunks(BLOCK)
        .enumerate()
        .map(|(b, chunk)| {
            let mut rng = block_rng(seed, Purpose::Beamsplit, b as u64);
            let mut out = (Vec::new(), Vec::new());
            for rec in chunk {
                if rng.gen::<f64>() < r {
                    out.0.push(*rec);
                } else {
                    out.1.push(*rec);
                }
            }
            out
        })
        .collect();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (x, y) in parts {
        a.extend(x);
        b.extend(y);
    }
    Ok((
        TimestampStream { records: a, meta: s.meta },
        TimestampStream { records: b, meta: s.meta },
    ))
}

/// Efficiency thinning, Gaussian jitter, re-sorting and a final
/// per-channel non-paralyzable dead-time pass.
pub fn detect(s: &TimestampStream, d: &DetectorModel, seed: u64) -> Result<TimestampStream> {
    d.validate()?;
    let jitter = Normal::new(0.0, d.jitter_sigma).map_err(|e| invalid("detector.jitter_ps", e.to_string()))?;
    let mut records: Vec<Record> = s
        .records
        .par_chunks(BLOCK)
        .enumerate()
        .flat_map_iter(|(b, chunk)| {
            let mut rng = block_rng(seed, Purpose::Detect, b as u64);
            let mut out = Vec::with_capacity(chunk.len());
            for rec in chunk {
                let keep = rng.gen::<f64>() < d.efficiency;
                let dt = if d.jitter_sigma > 0.0 { jitter.sample(&mut rng) } else { 0.0 };
                if keep {
                    let t = (rec.t_ps as f64 + dt).round().max(0.0) as u64;
                    out.push(Record::new(rec.channel, t));
                }
            }
            out
        })
        .collect();
    if d.jitter_sigma > 0.0 {
        records.par_sort_unstable();
    }
    let dead = (d.dead_time * 1e3).round() as u64;
    let mut last = [None::<u64>; 256];
    records.retain(|r| {
        let slot = &mut last[r.channel as usize];
        let accept = match *slot {
            None => true,
            Some(l) => r.t_ps > l && r.t_ps - l >= dead,
        };
        if accept {
            *slot = Some(r.t_ps);
        }
        accept
    });
    Ok(TimestampStream { records, meta: s.meta })
}
