//! Excitation pulses, Fourier-plane slit shaping and cavity-mode filtering.
//!
//! Pulses are complex envelopes sampled on a uniform time grid in the frame
//! rotating at the QD transition, so frequency zero is the QD line and every
//! detuning is a signed offset from it. Transforms use
//! `a(t) = ∫ S(f) exp(+i2πft) df`; a component `exp(+i2πf₀t)` sits at `+f₀`.

use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::units::{ghz_to_thz, optical_frequency_ghz, GAUSSIAN_TBP};

/// Smallest accepted sample count.
pub const MIN_SAMPLES: usize = 64;

/// Uniform sampling grid. `n` must be a power of two.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    /// Sample spacing (ps).
    pub dt: f64,
}

impl GridSpec {
    pub fn new(n: usize, dt: f64) -> Result<Self> {
        let g = Self { n, dt };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < MIN_SAMPLES {
            return Err(invalid("grid.n", format!("{} < {MIN_SAMPLES} samples", self.n)));
        }
        if !self.n.is_power_of_two() {
            return Err(invalid("grid.n", format!("{} is not a power of two", self.n)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("grid.dt", format!("{} must be positive", self.dt)));
        }
        Ok(())
    }

    /// Total time span (ps).
    pub fn span(&self) -> f64 {
        self.n as f64 * self.dt
    }

    /// Frequency bin spacing (GHz).
    pub fn df_ghz(&self) -> f64 {
        1e3 / self.span()
    }

    /// Time of the first sample so that the grid is centred on t = 0.
    pub fn centered_t0(&self) -> f64 {
        -((self.n / 2) as f64) * self.dt
    }
}

/// Complex time-domain optical envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseField {
    /// Time of sample 0 (ps).
    pub t0: f64,
    /// Sample spacing (ps).
    pub dt: f64,
    /// Envelope amplitudes. `Σ|a|·dt` is the pulse area in rad at unit drive
    /// coupling.
    pub samples: Vec<Complex64>,
    /// Nominal carrier offset from the QD transition (GHz).
    pub f_center_offset: f64,
}

impl PulseField {
    pub fn new(t0: f64, dt: f64, samples: Vec<Complex64>, f_center_offset: f64) -> Result<Self> {
        GridSpec::new(samples.len(), dt)?;
        if samples.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
            return Err(invalid("samples", "non-finite amplitude"));
        }
        Ok(Self {
            t0,
            dt,
            samples,
            f_center_offset,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            n: self.samples.len(),
            dt: self.dt,
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    /// `Σ|a|²·dt` (rad²/ps).
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.dt
    }

    /// `Σ|a|·dt` (rad).
    pub fn area(&self) -> f64 {
        self.samples.iter().map(|a| a.norm()).sum::<f64>() * self.dt
    }

    /// Energy evaluated on the spectrum, `Σ|S|²·df`. Equal to [`energy`]
    /// by Parseval.
    ///
    /// [`energy`]: PulseField::energy
    pub fn spectral_energy(&self) -> f64 {
        let s = self.spectrum();
        let df_thz = ghz_to_thz(s.df);
        s.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * df_thz
    }

    /// Spectrum sorted by ascending frequency.
    pub fn spectrum(&self) -> Spectrum {
        let n = self.len();
        let mut buf = self.samples.clone();
        fft_plan(n, true).process(&mut buf);
        let df = self.grid().df_ghz();
        let half = n / 2;
        let mut freqs = Vec::with_capacity(n);
        let mut values = Vec::with_capacity(n);
        // fftshift: indices half..n are the negative frequencies
        for k in (half..n).chain(0..half) {
            freqs.push(bin_frequency(k, n, df));
            values.push(buf[k] * self.dt);
        }
        Spectrum { df, freqs, values }
    }

    /// Intensity FWHM in the time domain (ps).
    pub fn intensity_fwhm(&self) -> Option<f64> {
        let intensity: Vec<f64> = self.samples.iter().map(|a| a.norm_sqr()).collect();
        fwhm(&intensity, self.dt)
    }

    /// Spectral intensity FWHM (GHz).
    pub fn spectral_fwhm(&self) -> Option<f64> {
        let s = self.spectrum();
        let intensity: Vec<f64> = s.values.iter().map(|v| v.norm_sqr()).collect();
        fwhm(&intensity, s.df)
    }

    /// Multiply the spectrum by `transfer(f_ghz)` and return to the time domain.
    pub fn filtered<F>(&self, transfer: F) -> PulseField
    where
        F: Fn(f64) -> Complex64,
    {
        let n = self.len();
        let df = self.grid().df_ghz();
        let mut buf = self.samples.clone();
        fft_plan(n, true).process(&mut buf);
        for (k, v) in buf.iter_mut().enumerate() {
            *v *= transfer(bin_frequency(k, n, df));
        }
        fft_plan(n, false).process(&mut buf);
        let norm = 1.0 / n as f64;
        for v in &mut buf {
            *v *= norm;
        }
        PulseField {
            t0: self.t0,
            dt: self.dt,
            samples: buf,
            f_center_offset: self.f_center_offset,
        }
    }

    /// Shift the carrier by `offset_ghz`, applying the phase ramp to the samples.
    pub fn with_carrier_offset(&self, offset_ghz: f64) -> PulseField {
        let w = 2.0 * std::f64::consts::PI * ghz_to_thz(offset_ghz);
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(i, a)| a * Complex64::from_polar(1.0, w * self.time(i)))
            .collect();
        PulseField {
            t0: self.t0,
            dt: self.dt,
            samples,
            f_center_offset: self.f_center_offset + offset_ghz,
        }
    }

    pub fn scaled(&self, s: f64) -> PulseField {
        PulseField {
            samples: self.samples.iter().map(|a| a * s).collect(),
            ..self.clone()
        }
    }

    /// Write `# dt_ps=.. t0_ps=.. f_center_ghz=..`, a column line, then
    /// `index,re,im` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "# dt_ps={} t0_ps={} f_center_ghz={}",
            self.dt, self.t0, self.f_center_offset
        )?;
        writeln!(w, "index,re,im")?;
        for (i, a) in self.samples.iter().enumerate() {
            writeln!(w, "{i},{},{}", a.re, a.im)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty pulse file".into()))??;
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| Error::Parse("missing `#` header line".into()))?;
        let (mut dt, mut t0, mut fc) = (None, None, None);
        for kv in header.split_whitespace() {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field `{kv}`")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| Error::Parse(format!("bad number in `{kv}`")))?;
            match k {
                "dt_ps" => dt = Some(v),
                "t0_ps" => t0 = Some(v),
                "f_center_ghz" => fc = Some(v),
                other => return Err(Error::Parse(format!("unknown header key `{other}`"))),
            }
        }
        let missing = |k: &str| Error::Parse(format!("header lacks `{k}`"));
        let dt = dt.ok_or_else(|| missing("dt_ps"))?;
        let t0 = t0.ok_or_else(|| missing("t0_ps"))?;
        let fc = fc.ok_or_else(|| missing("f_center_ghz"))?;

        let mut samples = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line == "index,re,im" {
                continue;
            }
            let mut parts = line.split(',');
            let (Some(idx), Some(re), Some(im), None) =
                (parts.next(), parts.next(), parts.next(), parts.next())
            else {
                return Err(Error::Parse(format!("bad row `{line}`")));
            };
            let idx: usize = idx
                .parse()
                .map_err(|_| Error::Parse(format!("bad index in `{line}`")))?;
            if idx != samples.len() {
                return Err(Error::Parse(format!("row {idx} out of order")));
            }
            let re: f64 = re
                .parse()
                .map_err(|_| Error::Parse(format!("bad re in `{line}`")))?;
            let im: f64 = im
                .parse()
                .map_err(|_| Error::Parse(format!("bad im in `{line}`")))?;
            samples.push(Complex64::new(re, im));
        }
        PulseField::new(t0, dt, samples, fc)
    }
}

/// Spectrum on an ascending frequency axis.
#[derive(Debug, Clone)]
pub struct Spectrum {
    /// Bin spacing (GHz).
    pub df: f64,
    /// Bin frequencies relative to the QD transition (GHz).
    pub freqs: Vec<f64>,
    /// Spectral amplitudes (rad, i.e. envelope·ps).
    pub values: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterKind {
    RectangularSlit,
    Lorentzian,
}

/// Spectral filter. `width` is the full slit width or the Lorentzian FWHM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub kind: FilterKind,
    /// GHz.
    pub width: f64,
    /// GHz.
    pub center_offset: f64,
}

impl FilterSpec {
    pub fn slit(width: f64, center_offset: f64) -> Result<Self> {
        Self::new(FilterKind::RectangularSlit, width, center_offset)
    }

    pub fn lorentzian(width: f64, center_offset: f64) -> Result<Self> {
        Self::new(FilterKind::Lorentzian, width, center_offset)
    }

    pub fn new(kind: FilterKind, width: f64, center_offset: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) {
            return Err(invalid("filter.width", format!("{width} must be positive")));
        }
        if !center_offset.is_finite() {
            return Err(invalid("filter.center_offset", "must be finite"));
        }
        Ok(Self {
            kind,
            width,
            center_offset,
        })
    }

    fn bounds(&self) -> (f64, f64) {
        let h = 0.5 * self.width;
        (self.center_offset - h, self.center_offset + h)
    }

    /// Overlap of two slits, `None` when they do not overlap.
    pub fn intersect(&self, other: &FilterSpec) -> Option<FilterSpec> {
        if self.kind != FilterKind::RectangularSlit || other.kind != FilterKind::RectangularSlit {
            return None;
        }
        let (a0, a1) = self.bounds();
        let (b0, b1) = other.bounds();
        let (lo, hi) = (a0.max(b0), a1.min(b1));
        (hi > lo).then(|| FilterSpec {
            kind: FilterKind::RectangularSlit,
            width: hi - lo,
            center_offset: 0.5 * (lo + hi),
        })
    }

    /// Complex transfer at frequency `f` (GHz).
    pub fn transfer(&self, f: f64) -> Complex64 {
        match self.kind {
            FilterKind::RectangularSlit => {
                let (lo, hi) = self.bounds();
                if f >= lo && f <= hi {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            FilterKind::Lorentzian => lorentzian_transfer(f, self.center_offset, self.width),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

/// One polarised mode of the open cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityMode {
    pub polarization: Polarization,
    pub q_factor: f64,
    /// Detuning of the mode centre from the QD transition (GHz).
    pub center_offset: f64,
    /// Probability that a photon leaves through the top mirror.
    pub eta_top: f64,
}

impl CavityMode {
    pub fn new(polarization: Polarization, q_factor: f64, center_offset: f64, eta_top: f64) -> Result<Self> {
        let m = Self {
            polarization,
            q_factor,
            center_offset,
            eta_top,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_factor > 0.0) {
            return Err(invalid("cavity.q_factor", format!("{} must be positive", self.q_factor)));
        }
        if !(0.0..=1.0).contains(&self.eta_top) {
            return Err(invalid("cavity.eta_top", format!("{} not in [0, 1]", self.eta_top)));
        }
        if !self.center_offset.is_finite() {
            return Err(invalid("cavity.center_offset", "must be finite"));
        }
        Ok(())
    }

    /// Mode linewidth (GHz FWHM) at `wavelength_nm`.
    pub fn linewidth(&self, wavelength_nm: f64) -> Result<f64> {
        linewidth_from_q(self.q_factor, wavelength_nm)
    }
}

/// Transform-limited Gaussian pulse with spectral intensity FWHM
/// `fwhm_spectral` (GHz) and area `area` (rad), centred on the grid.
pub fn gaussian_pulse(fwhm_spectral: f64, area: f64, grid: GridSpec) -> Result<PulseField> {
    grid.validate()?;
    if !(fwhm_spectral.is_finite() && fwhm_spectral > 0.0) {
        return Err(invalid("fwhm_spectral", format!("{fwhm_spectral} must be positive")));
    }
    if !(area.is_finite() && area >= 0.0) {
        return Err(invalid("area", format!("{area} must be non-negative")));
    }
    let fwhm_thz = ghz_to_thz(fwhm_spectral);
    let max_dt = 1.0 / (10.0 * fwhm_thz);
    if grid.dt > max_dt {
        return Err(Error::GridTooCoarse(format!(
            "dt = {} ps exceeds 1/(10·fwhm) = {max_dt:.4} ps for {fwhm_spectral} GHz",
            grid.dt
        )));
    }
    let fwhm_t = GAUSSIAN_TBP / fwhm_thz;
    if grid.span() < 8.0 * fwhm_t {
        return Err(Error::GridTooCoarse(format!(
            "span {} ps is shorter than 8× the {fwhm_t:.3} ps pulse",
            grid.span()
        )));
    }
    let t0 = grid.centered_t0();
    let k = 2.0 * std::f64::consts::LN_2 / (fwhm_t * fwhm_t);
    let mut samples: Vec<Complex64> = (0..grid.n)
        .map(|i| {
            let t = t0 + i as f64 * grid.dt;
            Complex64::new((-k * t * t).exp(), 0.0)
        })
        .collect();
    let raw_area: f64 = samples.iter().map(|a| a.re).sum::<f64>() * grid.dt;
    let scale = area / raw_area;
    for a in &mut samples {
        *a *= scale;
    }
    Ok(PulseField {
        t0,
        dt: grid.dt,
        samples,
        f_center_offset: 0.0,
    })
}

/// Ideal Fourier-plane slit: the spectrum is multiplied by the indicator of
/// the slit window.
pub fn slit_filter(p: &PulseField, f: &FilterSpec) -> Result<PulseField> {
    if f.kind != FilterKind::RectangularSlit {
        return Err(invalid("filter.kind", "slit_filter needs a rectangular slit"));
    }
    Ok(p.filtered(|freq| f.transfer(freq)))
}

/// Any [`FilterSpec`].
pub fn apply_filter(p: &PulseField, f: &FilterSpec) -> PulseField {
    p.filtered(|freq| f.transfer(freq))
}

/// Intra-cavity field of mode `m`: single-pole Lorentzian response with unity
/// transmission at the mode centre.
pub fn cavity_mode_filter(p: &PulseField, m: &CavityMode, wavelength: f64) -> Result<PulseField> {
    m.validate()?;
    let kappa = linewidth_from_q(m.q_factor, wavelength)?;
    if kappa == 0.0 {
        // infinitely narrow mode passes only its centre frequency
        return Ok(p.filtered(|f| {
            if f == m.center_offset {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }));
    }
    Ok(p.filtered(|f| lorentzian_transfer(f, m.center_offset, kappa)))
}

/// Causal single-pole response `(κ/2) / (κ/2 + i(f − f_c))`.
pub fn lorentzian_transfer(f: f64, center: f64, fwhm: f64) -> Complex64 {
    let hw = 0.5 * fwhm;
    Complex64::new(hw, 0.0) / Complex64::new(hw, f - center)
}

/// Cavity linewidth ν/Q in GHz.
pub fn linewidth_from_q(q: f64, wavelength: f64) -> Result<f64> {
    if !(q > 0.0) {
        return Err(invalid("q_factor", format!("{q} must be positive")));
    }
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(invalid("wavelength", format!("{wavelength} must be positive")));
    }
    Ok(optical_frequency_ghz(wavelength) / q)
}

/// Purcell factor after a cavity-length drift, Lorentzian in drift.
pub fn purcell_vs_drift(f_max: f64, drift: f64, drift_halfwidth: f64) -> Result<f64> {
    if !(f_max > 0.0) {
        return Err(invalid("f_max", format!("{f_max} must be positive")));
    }
    if !(drift_halfwidth > 0.0) {
        return Err(invalid("drift_halfwidth", format!("{drift_halfwidth} must be positive")));
    }
    let x = drift / drift_halfwidth;
    Ok(f_max / (1.0 + x * x))
}

/// Drift half-width for which a drift of `drift` leaves `remaining` of the
/// peak Purcell factor.
pub fn drift_halfwidth_for(drift: f64, remaining: f64) -> Result<f64> {
    if !(remaining > 0.0 && remaining < 1.0) {
        return Err(invalid("remaining", format!("{remaining} not in (0, 1)")));
    }
    Ok(drift.abs() / (1.0 / remaining - 1.0).sqrt())
}

fn bin_frequency(k: usize, n: usize, df: f64) -> f64 {
    if k < n / 2 {
        k as f64 * df
    } else {
        (k as f64 - n as f64) * df
    }
}

fn fft_plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = FftPlanner::new();
    if forward {
        planner.plan_fft_forward(n)
    } else {
        planner.plan_fft_inverse(n)
    }
}

/// Full width at half maximum of a sampled non-negative profile, walking out
/// from the peak and interpolating the crossings linearly.
pub fn fwhm(values: &[f64], spacing: f64) -> Option<f64> {
    let (peak_idx, &peak) = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))?;
    if !(peak > 0.0) {
        return None;
    }
    let half = 0.5 * peak;
    let mut left = None;
    for i in (0..peak_idx).rev() {
        if values[i] < half {
            let frac = (values[i + 1] - half) / (values[i + 1] - values[i]);
            left = Some((i + 1) as f64 - frac);
            break;
        }
    }
    let mut right = None;
    for i in peak_idx + 1..values.len() {
        if values[i] < half {
            let frac = (values[i - 1] - half) / (values[i - 1] - values[i]);
            right = Some((i - 1) as f64 + frac);
            break;
        }
    }
    Some((right? - left?) * spacing)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(4096, 0.5).unwrap()
    }

    fn numeric_time_fwhm_oracle(fwhm_ghz: f64) -> f64 {
        // independent route: build the spectrum analytically, inverse-DFT by
        // direct summation on a coarse set of times and locate half maximum
        let sigma_f = ghz_to_thz(fwhm_ghz) / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        let field = |t: f64| -> f64 {
            // spectral amplitude exp(-f²/(4σ²)) has intensity std σ
            let n = 4000;
            let fmax = 12.0 * sigma_f;
            let df = 2.0 * fmax / n as f64;
            (0..=n)
                .map(|k| {
                    let f = -fmax + k as f64 * df;
                    (-(f * f) / (4.0 * sigma_f * sigma_f)).exp()
                        * (2.0 * std::f64::consts::PI * f * t).cos()
                })
                .sum::<f64>()
                * df
        };
        let peak = field(0.0).powi(2);
        let (mut lo, mut hi) = (0.0, 50.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if field(mid).powi(2) > 0.5 * peak {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        2.0 * lo
    }

    #[test]
    fn gaussian_time_bandwidth() {
        for (w, expect) in [(69.0, 6.39), (96.0, 4.59)] {
            let p = gaussian_pulse(w, std::f64::consts::PI, grid()).unwrap();
            let oracle = numeric_time_fwhm_oracle(w);
            assert!((oracle - expect).abs() < 0.01, "oracle {oracle}");
            let t = p.intensity_fwhm().unwrap();
            assert!((t - oracle).abs() / oracle < 0.01, "{t} vs {oracle}");
            let s = p.spectral_fwhm().unwrap();
            assert!((s - w).abs() / w < 0.01, "spectral {s}");
            assert!((p.area() - std::f64::consts::PI).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_area_pulse_is_zero() {
        let p = gaussian_pulse(69.0, 0.0, grid()).unwrap();
        assert!(p.samples.iter().all(|a| a.norm() == 0.0));
        assert_eq!(p.energy(), 0.0);
    }

    #[test]
    fn coarse_grid_rejected() {
        let g = GridSpec::new(1024, 2.0).unwrap();
        assert!(matches!(gaussian_pulse(69.0, 1.0, g), Err(Error::GridTooCoarse(_))));
        let short = GridSpec::new(64, 0.5).unwrap();
        assert!(matches!(gaussian_pulse(69.0, 1.0, short), Err(Error::GridTooCoarse(_))));
        assert!(GridSpec::new(1000, 0.5).is_err());
        assert!(GridSpec::new(32, 0.5).is_err());
    }

    #[test]
    fn wide_slit_is_identity() {
        let p = gaussian_pulse(69.0, 1.0, grid()).unwrap();
        let out = slit_filter(&p, &FilterSpec::slit(5.0 * 69.0, 0.0).unwrap()).unwrap();
        assert!(((out.energy() - p.energy()) / p.energy()).abs() < 1e-6);
        assert_eq!(out.len(), p.len());
        assert_eq!(out.dt, p.dt);
    }

    #[test]
    fn slit_narrows_spectrum_and_lengthens_pulse() {
        let p = gaussian_pulse(96.0, 1.0, grid()).unwrap();
        let out = slit_filter(&p, &FilterSpec::slit(69.0, 0.0).unwrap()).unwrap();
        assert!(out.spectral_fwhm().unwrap() <= 69.0);
        assert!(out.intensity_fwhm().unwrap() > p.intensity_fwhm().unwrap());
        assert!(out.energy() <= p.energy());
    }

    #[test]
    fn slit_energy_vanishes_monotonically() {
        let p = gaussian_pulse(96.0, 1.0, grid()).unwrap();
        let mut last = f64::INFINITY;
        for w in [200.0, 100.0, 50.0, 20.0, 5.0, 1.0, 0.1] {
            let e = slit_filter(&p, &FilterSpec::slit(w, 0.0).unwrap()).unwrap().energy();
            assert!(e <= last);
            last = e;
        }
        assert!(last < 1e-2 * p.energy());
        // a slit falling between two frequency bins passes nothing
        let df = p.grid().df_ghz();
        let between = slit_filter(&p, &FilterSpec::slit(0.1 * df, 0.5 * df).unwrap()).unwrap();
        assert_eq!(between.energy(), 0.0);
    }

    #[test]
    fn slit_rejects_lorentzian_kind() {
        let p = gaussian_pulse(96.0, 1.0, grid()).unwrap();
        assert!(slit_filter(&p, &FilterSpec::lorentzian(10.0, 0.0).unwrap()).is_err());
        assert!(FilterSpec::slit(0.0, 0.0).is_err());
    }

    #[test]
    fn cavity_on_resonance_and_half_width() {
        let g = grid();
        let df = g.df_ghz();
        let kappa = linewidth_from_q(8400.0, 884.5).unwrap();
        // place the mode centre exactly on a frequency bin
        let center = 40.0 * df;
        let mode = CavityMode::new(Polarization::V, 8400.0, center, 0.939).unwrap();
        let mono = |f: f64| {
            let samples = (0..g.n)
                .map(|i| {
                    let t = g.centered_t0() + i as f64 * g.dt;
                    Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * ghz_to_thz(f) * t)
                })
                .collect();
            PulseField::new(g.centered_t0(), g.dt, samples, 0.0).unwrap()
        };
        let on = cavity_mode_filter(&mono(center), &mode, 884.5).unwrap();
        for a in &on.samples {
            assert!((a.norm() - 1.0).abs() < 1e-9);
        }
        // detune by half a linewidth: move the mode rather than the tone
        let off_mode = CavityMode {
            center_offset: center - 0.5 * kappa,
            ..mode
        };
        let off = cavity_mode_filter(&mono(center), &off_mode, 884.5).unwrap();
        for a in &off.samples {
            assert!((a.norm_sqr() - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn cavity_transmitted_energy_matches_quadrature() {
        let g = GridSpec::new(8192, 0.5).unwrap();
        let p = gaussian_pulse(69.0, 1.0, g).unwrap();
        let mode = CavityMode::new(Polarization::V, 8400.0, 83.0, 0.939).unwrap();
        let out = cavity_mode_filter(&p, &mode, 884.5).unwrap();
        let fraction = out.energy() / p.energy();

        // Simpson quadrature of |G(f)|²|H(f)|² over the analytic spectrum
        let kappa = linewidth_from_q(8400.0, 884.5).unwrap();
        let sigma = 69.0 / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        let g_int = |f: f64| (-(f * f) / (2.0 * sigma * sigma)).exp();
        let h2 = |f: f64| 1.0 / (1.0 + ((f - 83.0) / (0.5 * kappa)).powi(2));
        let simpson = |fun: &dyn Fn(f64) -> f64| {
            let (a, b, n) = (-800.0, 800.0, 200_000usize);
            let h = (b - a) / n as f64;
            let mut s = fun(a) + fun(b);
            for k in 1..n {
                let x = a + k as f64 * h;
                s += if k % 2 == 1 { 4.0 } else { 2.0 } * fun(x);
            }
            s * h / 3.0
        };
        let oracle = simpson(&|f| g_int(f) * h2(f)) / simpson(&g_int);
        assert!((fraction - oracle).abs() < 1e-4, "{fraction} vs {oracle}");
    }

    #[test]
    fn linewidth_values() {
        let lw = linewidth_from_q(8400.0, 884.5).unwrap();
        assert!((lw - 40.3).abs() < 0.1);
        assert!((83.0 / lw - 2.07).abs() < 0.05);
        let lw9 = linewidth_from_q(9000.0, 884.5).unwrap();
        assert!((lw9 - 37.7).abs() < 0.05);
        assert_eq!(linewidth_from_q(f64::INFINITY, 884.5).unwrap(), 0.0);
        assert!(linewidth_from_q(0.0, 884.5).is_err());
        assert!(linewidth_from_q(8400.0, -1.0).is_err());
    }

    #[test]
    fn purcell_drift() {
        assert_eq!(purcell_vs_drift(18.0, 0.0, 0.5).unwrap(), 18.0);
        assert!((purcell_vs_drift(18.0, 0.5, 0.5).unwrap() - 9.0).abs() < 1e-12);
        let hw = drift_halfwidth_for(1.0, 0.22).unwrap();
        assert!((hw - 0.532).abs() < 0.002, "{hw}");
        assert!((purcell_vs_drift(18.0, 1.0, hw).unwrap() / 18.0 - 0.22).abs() < 1e-12);
        assert!(purcell_vs_drift(18.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = gaussian_pulse(69.0, 1.3, GridSpec::new(256, 0.5).unwrap())
            .unwrap()
            .with_carrier_offset(12.5);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# dt_ps=0.5 t0_ps=-64 f_center_ghz=12.5\n"));
        let q = PulseField::read_csv(buf.as_slice()).unwrap();
        assert_eq!(p, q);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pulse(w: f64, area: f64) -> PulseField {
            gaussian_pulse(w, area, GridSpec::new(8192, 0.05).unwrap()).unwrap()
        }

        fn max_dev(a: &PulseField, b: &PulseField) -> f64 {
            a.samples.iter().zip(&b.samples).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
        }

        fn peak(p: &PulseField) -> f64 {
            p.samples.iter().map(|x| x.norm()).fold(0.0, f64::max)
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn parseval_for_every_filter(
                w in 20.0..200.0f64,
                area in 0.1..10.0f64,
                sw in 20.0..300.0f64,
                c in -10.0..10.0f64,
            ) {
                let p = pulse(w, area);
                let mode = CavityMode::new(Polarization::V, 8400.0, 83.0 + c, 1.0).unwrap();
                let outs = [
                    p.clone(),
                    apply_filter(&p, &FilterSpec::slit(sw, c).unwrap()),
                    apply_filter(&p, &FilterSpec::lorentzian(sw, c).unwrap()),
                    cavity_mode_filter(&p, &mode, 884.5).unwrap(),
                ];
                for out in &outs {
                    let e = out.energy();
                    prop_assert!((e - out.spectral_energy()).abs() <= 1e-9 * e, "{e}");
                }
            }

            #[test]
            fn slits_compose_as_intersection(
                w in 40.0..200.0f64,
                a in 10.0..150.0f64,
                ca in -40.0..40.0f64,
                b in 10.0..150.0f64,
                cb in -40.0..40.0f64,
            ) {
                let p = pulse(w, 1.0);
                let (fa, fb) = (FilterSpec::slit(a, ca).unwrap(), FilterSpec::slit(b, cb).unwrap());
                let twice = apply_filter(&apply_filter(&p, &fa), &fb);
                let tol = 1e-12 * peak(&p);
                match fa.intersect(&fb) {
                    Some(both) => prop_assert!(max_dev(&twice, &apply_filter(&p, &both)) <= tol),
                    None => prop_assert!(peak(&twice) <= tol),
                }
            }

            #[test]
            fn filters_are_linear(
                w1 in 30.0..150.0f64,
                w2 in 30.0..150.0f64,
                alpha in -3.0..3.0f64,
                beta in -3.0..3.0f64,
                sw in 10.0..200.0f64,
                c in -50.0..50.0f64,
            ) {
                let p1 = pulse(w1, 1.0);
                let p2 = pulse(w2, 2.0).with_carrier_offset(c);
                let mut sum = p1.scaled(alpha);
                sum.samples.iter_mut().zip(&p2.samples).for_each(|(s, q)| *s += q * beta);
                for f in [FilterSpec::slit(sw, c).unwrap(), FilterSpec::lorentzian(sw, c).unwrap()] {
                    let lhs = apply_filter(&sum, &f);
                    let mut rhs = apply_filter(&p1, &f).scaled(alpha);
                    let f2 = apply_filter(&p2, &f);
                    rhs.samples.iter_mut().zip(&f2.samples).for_each(|(s, q)| *s += q * beta);
                    prop_assert!(max_dev(&lhs, &rhs) <= 1e-12 * (peak(&sum) + peak(&p1) + peak(&p2)));
                }
            }

            #[test]
            fn narrowing_slit_loses_energy_and_lengthens(
                w in 40.0..150.0f64,
                wide in 40.0..200.0f64,
                frac in 0.5..1.0f64,
            ) {
                let p = pulse(w, 1.0);
                let a = apply_filter(&p, &FilterSpec::slit(wide, 0.0).unwrap());
                let b = apply_filter(&p, &FilterSpec::slit(wide * frac, 0.0).unwrap());
                prop_assert!(b.energy() <= a.energy() * (1.0 + 1e-12));
                let (fa, fb) = (a.intensity_fwhm().unwrap(), b.intensity_fwhm().unwrap());
                prop_assert!(fb >= fa * (1.0 - 1e-9), "{fa} {fb}");
            }
        }
    }
}
