//! Start-stop coincidence histograms and pulsed g²(0).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::photonstream::TimestampStream;

/// Delay histogram. Bin `i` covers `[origin + i·bin_width, origin + (i+1)·bin_width)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// ps
    pub bin_width: f64,
    /// ps
    pub origin: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Empty histogram with one bin centred on every multiple of `bin_width`
    /// in `[−window, window]`.
    pub fn symmetric(bin_width: f64, window: f64) -> Result<Self> {
        if !(bin_width > 0.0 && bin_width.is_finite()) {
            return Err(invalid("bin_ps", "must be positive"));
        }
        if !(window > 0.0 && window.is_finite()) {
            return Err(invalid("window_ns", "must be positive"));
        }
        let k = (window / bin_width).ceil() as usize;
        Ok(Self {
            bin_width,
            origin: -(k as f64 + 0.5) * bin_width,
            counts: vec![0; 2 * k + 1],
        })
    }

    pub fn end(&self) -> f64 {
        self.origin + self.bin_width * self.counts.len() as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        self.origin + (i as f64 + 0.5) * self.bin_width
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    #[inline]
    fn index(&self, dt: f64) -> Option<usize> {
        let i = ((dt - self.origin) / self.bin_width).floor();
        (i >= 0.0 && (i as usize) < self.counts.len()).then_some(i as usize)
    }

    fn same_binning(&self, other: &Self) -> bool {
        self.bin_width == other.bin_width && self.origin == other.origin && self.counts.len() == other.counts.len()
    }

    /// Counts in bins whose centre lies within `±halfwidth` of `center`
    /// (all in ps).
    pub fn peak_area(&self, center: f64, halfwidth: f64) -> u64 {
        let lo = (((center - halfwidth - self.origin) / self.bin_width) - 0.5).ceil().max(0.0) as usize;
        let hi = (((center + halfwidth - self.origin) / self.bin_width) - 0.5).floor();
        if hi < 0.0 {
            return 0;
        }
        let hi = (hi as usize).min(self.counts.len().saturating_sub(1));
        if lo > hi {
            return 0;
        }
        self.counts[lo..=hi].iter().sum()
    }

    /// Whether the whole peak window lies inside the histogram.
    pub fn contains_peak(&self, center: f64, halfwidth: f64) -> bool {
        center - halfwidth >= self.origin && center + halfwidth <= self.end()
    }

    /// `bin_start_ps,count` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "bin_start_ps,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{}", self.origin + i as f64 * self.bin_width, c)?;
        }
        Ok(())
    }
}

const CHUNK: usize = 1 << 16;

/// Histogram of `t_b − t_a` over all pairs with `|t_b − t_a| ≤ window`.
/// Each start record scans only the stop records inside its window; chunks of
/// start records are processed in parallel and merged by integer addition.
pub fn coincidence_histogram(a: &TimestampStream, b: &TimestampStream, bin_ps: f64, window_ns: f64) -> Result<Histogram> {
    let window = window_ns * 1e3;
    let empty = Histogram::symmetric(bin_ps, window)?;
    let w = window.floor() as u64;
    let tb: Vec<u64> = b.times().collect();
    let ta: Vec<u64> = a.times().collect();
    let partial = ta
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut h = empty.counts.clone();
            let mut lo = tb.partition_point(|&t| t + w < chunk[0]);
            for &t in chunk {
                while lo < tb.len() && tb[lo] + w < t {
                    lo += 1;
                }
                let mut k = lo;
                while k < tb.len() && tb[k] <= t + w {
                    let dt = tb[k] as f64 - t as f64;
                    if let Some(i) = empty.index(dt) {
                        h[i] += 1;
                    }
                    k += 1;
                }
            }
            h
        })
        .reduce(
            || vec![0u64; empty.counts.len()],
            |mut x, y| {
                x.iter_mut().zip(&y).for_each(|(p, q)| *p += q);
                x
            },
        );
    Ok(Histogram {
        counts: partial,
        ..empty
    })
}

/// Central-peak area normalised by the mean complete side peak.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakRatio {
    pub value: f64,
    /// Poisson standard error.
    pub std_error: f64,
    pub central_area: u64,
    pub side_mean: f64,
    pub n_side: usize,
}

/// Side peaks required by [`g2_zero`].
pub const MIN_SIDE_PEAKS: usize = 6;

/// g²(0) with the two peaks adjacent to zero delay left out of the
/// normalisation.
pub fn g2_zero(h: &Histogram, period_ns: f64, peak_halfwidth_ns: f64) -> Result<PeakRatio> {
    g2_zero_excluding(h, period_ns, peak_halfwidth_ns, 1)
}

/// g²(0) normalised by side peaks of order `|k| > exclude`.
pub fn g2_zero_excluding(h: &Histogram, period_ns: f64, peak_halfwidth_ns: f64, exclude: usize) -> Result<PeakRatio> {
    let period = period_ns * 1e3;
    let hw = peak_halfwidth_ns * 1e3;
    if !(period > 0.0 && period.is_finite()) {
        return Err(invalid("period_ns", "must be positive"));
    }
    if !(hw > 0.0 && 2.0 * hw < period) {
        return Err(invalid("peak_halfwidth_ns", "must be positive and below half the period"));
    }
    let central = h.peak_area(0.0, hw);
    let k_max = (h.end().max(-h.origin) / period).ceil() as i64;
    let sides: Vec<u64> = (-k_max..=k_max)
        .filter(|k| k.unsigned_abs() as usize > exclude)
        .map(|k| k as f64 * period)
        .filter(|&c| h.contains_peak(c, hw))
        .map(|c| h.peak_area(c, hw))
        .collect();
    if sides.len() < MIN_SIDE_PEAKS {
        return Err(invalid(
            "window_ns",
            format!("{} complete side peaks, need {MIN_SIDE_PEAKS}", sides.len()),
        ));
    }
    let side_sum: u64 = sides.iter().sum();
    if side_sum == 0 {
        return Err(Error::Undefined("zero side-peak area".into()));
    }
    let side_mean = side_sum as f64 / sides.len() as f64;
    let value = central as f64 / side_mean;
    let rel_central = if central > 0 { 1.0 / central as f64 } else { 0.0 };
    let std_error = if central > 0 {
        value * (rel_central + 1.0 / side_sum as f64).sqrt()
    } else {
        1.0 / side_mean
    };
    Ok(PeakRatio {
        value,
        std_error,
        central_area: central,
        side_mean,
        n_side: sides.len(),
    })
}

pub(crate) fn require_same_binning(a: &Histogram, b: &Histogram) -> Result<()> {
    if !a.same_binning(b) {
        return Err(invalid("histograms", "binning differs"));
    }
    Ok(())
}
