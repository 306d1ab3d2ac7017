use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bloch_integrate, g2_from_pn, photon_number_distribution, DriveProfile, EmitterParams, N_MAX};
use crate::error::{invalid, Error, Result};
use crate::optics::{
    cavity_mode_filter, gaussian_pulse, slit_filter, CavityMode, FilterSpec, GridSpec, Polarization, PulseField,
};

/// One point of a Rabi curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RabiPoint {
    /// Drive amplitude scale, proportional to the square root of power.
    pub sqrt_power: f64,
    pub mean_photons: f64,
}

/// Mean photon number for each drive scale `s` (drive `s·Ω(t)`).
pub fn rabi_sweep(base: &DriveProfile, amplitudes: &[f64], e: &EmitterParams) -> Result<Vec<RabiPoint>> {
    if amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(invalid("amplitudes", "scale factors must be non-negative"));
    }
    if amplitudes.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("amplitudes", "scale factors must be sorted"));
    }
    amplitudes
        .par_iter()
        .map(|&s| {
            let out = bloch_integrate(&base.scaled(s), e)?;
            Ok(RabiPoint {
                sqrt_power: s,
                mean_photons: out.mean_photons,
            })
        })
        .collect()
}

/// First local maximum of a Rabi curve, refined by a parabola through the
/// neighbouring points.
pub fn first_maximum(curve: &[RabiPoint]) -> Option<RabiPoint> {
    (1..curve.len().saturating_sub(1)).find_map(|i| {
        let (a, b, c) = (curve[i - 1], curve[i], curve[i + 1]);
        if b.mean_photons >= a.mean_photons && b.mean_photons > c.mean_photons {
            let (x0, x1, x2) = (a.sqrt_power, b.sqrt_power, c.sqrt_power);
            let (y0, y1, y2) = (a.mean_photons, b.mean_photons, c.mean_photons);
            let denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
            let pa = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
            let pb = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
            let pc = (x1 * x2 * (x1 - x2) * y0 + x2 * x0 * (x2 - x0) * y1 + x0 * x1 * (x0 - x1) * y2) / denom;
            if pa < 0.0 {
                let xv = -pb / (2.0 * pa);
                if xv > x0 && xv < x2 {
                    return Some(RabiPoint {
                        sqrt_power: xv,
                        mean_photons: pa * xv * xv + pb * xv + pc,
                    });
                }
            }
            Some(b)
        } else {
            None
        }
    })
}

/// Excitation chain: Gaussian laser, Fourier-plane slit, then the
/// intra-cavity field of the excitation mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapingChain {
    /// Spectral FWHM of the unshaped laser (GHz).
    pub source_fwhm: f64,
    /// Slit centre relative to the QD transition (GHz).
    pub slit_center: f64,
    /// Mode through which the drive reaches the emitter; `None` drives the
    /// emitter with the shaped pulse directly.
    pub cavity: Option<CavityMode>,
    pub wavelength: f64,
    pub grid: GridSpec,
    /// Rabi frequency per unit envelope amplitude.
    pub kappa_drive: f64,
    /// Relative amplitude below which the drive tails are cropped.
    pub crop_rel: f64,
}

impl Default for ShapingChain {
    /// 96 GHz laser, slit centred on the QD, drive through the V mode
    /// (Q 8400, 83 GHz above the QD line at 884.5 nm).
    fn default() -> Self {
        Self {
            source_fwhm: 96.0,
            slit_center: 0.0,
            cavity: Some(CavityMode {
                polarization: Polarization::V,
                q_factor: 8400.0,
                center_offset: 83.0,
                eta_top: 1.0,
            }),
            wavelength: 884.5,
            grid: GridSpec { n: 16384, dt: 0.025 },
            kappa_drive: 1.0,
            crop_rel: 1e-8,
        }
    }
}

impl ShapingChain {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.source_fwhm > 0.0) {
            return Err(invalid("pulse.source_fwhm_ghz", "must be positive"));
        }
        if !(self.wavelength > 0.0) {
            return Err(invalid("cavity.wavelength_nm", "must be positive"));
        }
        if !(self.kappa_drive > 0.0) {
            return Err(invalid("pulse.kappa_drive", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.crop_rel) {
            return Err(invalid("pulse.crop_rel", "must be in [0, 1)"));
        }
        if let Some(m) = &self.cavity {
            m.validate()?;
        }
        Ok(())
    }

    /// Shaped incident pulse of unit source area. Widths below the laser
    /// bandwidth are cut by the slit; wider ones are transform-limited
    /// Gaussians of that width.
    pub fn shaped_pulse(&self, width: f64) -> Result<PulseField> {
        if width < self.source_fwhm {
            let source = gaussian_pulse(self.source_fwhm, 1.0, self.grid)?;
            slit_filter(&source, &FilterSpec::slit(width, self.slit_center)?)
        } else {
            gaussian_pulse(width, 1.0, self.grid)
        }
    }

    /// Drive seen by the emitter at unit source area.
    pub fn drive(&self, width: f64) -> Result<DriveProfile> {
        let shaped = self.shaped_pulse(width)?;
        let field = match &self.cavity {
            Some(m) => cavity_mode_filter(&shaped, m, self.wavelength)?,
            None => shaped,
        };
        Ok(DriveProfile::from_pulse(&field, self.kappa_drive).cropped(self.crop_rel))
    }
}

/// Purity and brightness at the π pulse for one spectral width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PurityRow {
    /// Requested width (GHz).
    pub width: f64,
    /// Spectral FWHM of the shaped pulse (GHz).
    pub measured_fwhm: f64,
    /// Source amplitude scale at the first Rabi maximum.
    pub pi_scale: f64,
    /// `∫|Ω|dt` of the drive at the π scale (rad).
    pub pi_area: f64,
    pub pi_pulse_mean: f64,
    pub g2: f64,
    pub pn: Vec<f64>,
}

const SCAN_POINTS: usize = 48;

/// Locate the π pulse (first maximum of the mean photon number versus drive
/// scale) by a coarse scan and golden-section refinement.
pub fn find_pi_scale(base: &DriveProfile, e: &EmitterParams) -> Result<RabiPoint> {
    let net: Complex64 = base.rabi.iter().sum::<Complex64>() * base.dt;
    let reference = net.norm().min(base.area());
    if !(reference > 0.0) {
        return Err(Error::Undefined("drive has zero area".into()));
    }
    let s_max = 3.0 * std::f64::consts::PI / reference;
    let scales: Vec<f64> = (0..=SCAN_POINTS)
        .map(|i| s_max * i as f64 / SCAN_POINTS as f64)
        .collect();
    let curve = rabi_sweep(base, &scales, e)?;
    let i = (1..curve.len() - 1)
        .find(|&i| {
            curve[i].mean_photons >= curve[i - 1].mean_photons
                && curve[i].mean_photons > curve[i + 1].mean_photons
        })
        .ok_or_else(|| Error::Undefined("no Rabi maximum within 3π".into()))?;

    let mean_at = |s: f64| -> Result<f64> { Ok(bloch_integrate(&base.scaled(s), e)?.mean_photons) };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (scales[i - 1], scales[i + 1]);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (mean_at(c)?, mean_at(d)?);
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = mean_at(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = mean_at(d)?;
        }
        if (b - a) < 1e-6 * s_max {
            break;
        }
    }
    let s = 0.5 * (a + b);
    Ok(RabiPoint {
        sqrt_power: s,
        mean_photons: mean_at(s)?,
    })
}

/// For each spectral width: π-pulse amplitude, π-pulse mean photon number
/// and g²(0) of the emitted light.
pub fn purity_vs_width(widths: &[f64], e: &EmitterParams, chain: &ShapingChain) -> Result<Vec<PurityRow>> {
    chain.validate()?;
    if let Some(w) = widths.iter().find(|w| !(20.0..=200.0).contains(*w)) {
        return Err(invalid("widths", format!("{w} GHz outside [20, 200]")));
    }
    widths
        .iter()
        .map(|&width| {
            let measured_fwhm = chain.shaped_pulse(width)?.spectral_fwhm().unwrap_or(f64::NAN);
            let base = chain.drive(width)?;
            let pi = find_pi_scale(&base, e)?;
            let drive = base.scaled(pi.sqrt_power);
            let pn = photon_number_distribution(&drive, e, N_MAX)?;
            Ok(PurityRow {
                width,
                measured_fwhm,
                pi_scale: pi.sqrt_power,
                pi_area: drive.area(),
                pi_pulse_mean: pi.mean_photons,
                g2: g2_from_pn(&pn)?,
                pn,
            })
        })
        .collect()
}
