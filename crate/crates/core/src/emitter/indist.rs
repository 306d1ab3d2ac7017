//! Indistinguishability versus emission-time separation.
//!
//! Model: `M(τ) = Γ / (Γ + 2γ(τ))` with an Ornstein–Uhlenbeck style
//! saturation of the effective dephasing,
//! `γ(τ) = γ* + γ_sd·(1 − exp(−τ/τ_c))`. This functional form is a modelling
//! choice; only the saturation shape is assumed.

use serde::{Deserialize, Serialize};

use super::EmitterParams;
use crate::error::{invalid, Error, Result};

/// Indistinguishability at delay `delay_us` (µs).
pub fn indistinguishability(e: &EmitterParams, delay_us: f64) -> Result<f64> {
    e.validate()?;
    if !(delay_us >= 0.0) {
        return Err(invalid("delay", format!("{delay_us} must be non-negative")));
    }
    Ok(model(e.gamma, e.gamma_dephase, e.gamma_sd, e.tau_c, delay_us))
}

fn model(gamma: f64, dephase: f64, sd: f64, tau_c: f64, tau: f64) -> f64 {
    let g = dephase + sd * saturation(tau, tau_c);
    gamma / (gamma + 2.0 * g)
}

fn saturation(tau: f64, tau_c: f64) -> f64 {
    -(-tau / tau_c).exp_m1()
}

/// Least-squares calibration of `(γ*, γ_sd, τ_c)` at fixed `Γ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndistinguishabilityFit {
    pub params: EmitterParams,
    /// `model − data` per point.
    pub residuals: Vec<f64>,
    pub max_abs_residual: f64,
    pub sum_sq: f64,
    /// `τ_c` hit the upper search bound: the data prefer the linear-in-τ
    /// limit of the saturation model.
    pub tau_c_at_bound: bool,
}

const TAU_C_RANGE_US: (f64, f64) = (1e-3, 1e4);

/// Fit the saturation model to `(delay µs, M)` points, minimising the squared
/// residuals in `M`. `base` supplies `Γ` and the detuning.
///
/// For each trial `τ_c` the two rates enter through the single effective
/// dephasing, so the inner problem is solved by Gauss–Newton on
/// `(γ*, γ_sd) ≥ 0`; `τ_c` is found by a log-spaced scan refined with a
/// golden-section search.
pub fn fit_indistinguishability(points: &[(f64, f64)], base: &EmitterParams) -> Result<IndistinguishabilityFit> {
    base.validate()?;
    if points.len() < 3 {
        return Err(Error::FitRefused(format!("{} points for 3 parameters", points.len())));
    }
    if points.iter().any(|&(t, m)| !(t >= 0.0) || !(m > 0.0 && m <= 1.0)) {
        return Err(invalid("points", "delays must be ≥ 0 and M in (0, 1]"));
    }
    let gamma = base.gamma;

    let inner = |tau_c: f64| -> (f64, f64, f64) {
        let f: Vec<f64> = points.iter().map(|&(t, _)| saturation(t, tau_c)).collect();
        let (a, b) = solve_rates(points, &f, gamma);
        let ss = points
            .iter()
            .zip(&f)
            .map(|(&(_, m), fi)| {
                let r = gamma / (gamma + 2.0 * (a + b * fi)) - m;
                r * r
            })
            .sum();
        (a, b, ss)
    };

    let (lo, hi) = (TAU_C_RANGE_US.0.ln(), TAU_C_RANGE_US.1.ln());
    let n_scan = 240;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..=n_scan {
        let x = lo + (hi - lo) * i as f64 / n_scan as f64;
        let ss = inner(x.exp()).2;
        if ss < best.1 {
            best = (i, ss);
        }
    }
    let step = (hi - lo) / n_scan as f64;
    let (mut a, mut b) = (
        lo + step * best.0.saturating_sub(1) as f64,
        (lo + step * (best.0 + 1) as f64).min(hi),
    );
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (inner(c.exp()).2, inner(d.exp()).2);
    for _ in 0..100 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = inner(c.exp()).2;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = inner(d.exp()).2;
        }
    }
    let log_tau = 0.5 * (a + b);
    let tau_c = log_tau.exp();
    let (dephase, sd, sum_sq) = inner(tau_c);
    let params = EmitterParams {
        gamma_dephase: dephase,
        gamma_sd: sd,
        tau_c,
        ..*base
    };
    let residuals: Vec<f64> = points
        .iter()
        .map(|&(t, m)| model(gamma, dephase, sd, tau_c, t) - m)
        .collect();
    let max_abs_residual = residuals.iter().fold(0.0f64, |acc, r| acc.max(r.abs()));
    Ok(IndistinguishabilityFit {
        params,
        residuals,
        max_abs_residual,
        sum_sq,
        tau_c_at_bound: hi - log_tau < 1e-3,
    })
}

/// Non-negative least squares in M for `γ = a + b·f` by Gauss–Newton,
/// checking the interior and both edges of the feasible quadrant.
fn solve_rates(points: &[(f64, f64)], f: &[f64], gamma: f64) -> (f64, f64) {
    let m_of = |g: f64| gamma / (gamma + 2.0 * g);
    let ss = |a: f64, b: f64| -> f64 {
        points
            .iter()
            .zip(f)
            .map(|(&(_, m), fi)| (m_of(a + b * fi) - m).powi(2))
            .sum()
    };
    // Gauss–Newton with optional clamping of one parameter to zero
    let solve = |fix_a: bool, fix_b: bool| -> (f64, f64) {
        // start from the linearised targets γ_i = Γ(1/M_i − 1)/2
        let (mut a, mut b) = (0.0f64, 0.0f64);
        for _ in 0..50 {
            let (mut s11, mut s12, mut s22, mut r1, mut r2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (&(_, m), &fi) in points.iter().zip(f) {
                let g = a + b * fi;
                let model = m_of(g);
                let dm = -2.0 * gamma / (gamma + 2.0 * g).powi(2);
                let (ja, jb) = (dm, dm * fi);
                let res = m - model;
                s11 += ja * ja;
                s12 += ja * jb;
                s22 += jb * jb;
                r1 += ja * res;
                r2 += jb * res;
            }
            let (da, db) = match (fix_a, fix_b) {
                (false, false) => {
                    let det = s11 * s22 - s12 * s12;
                    if det.abs() < 1e-300 {
                        (r1 / s11, 0.0)
                    } else {
                        ((s22 * r1 - s12 * r2) / det, (s11 * r2 - s12 * r1) / det)
                    }
                }
                (false, true) => (r1 / s11, 0.0),
                (true, false) => {
                    if s22 > 0.0 {
                        (0.0, r2 / s22)
                    } else {
                        (0.0, 0.0)
                    }
                }
                (true, true) => (0.0, 0.0),
            };
            a += da;
            b += db;
            if da.abs() < 1e-15 && db.abs() < 1e-15 {
                break;
            }
        }
        (a, b)
    };
    let mut best = (0.0, 0.0, ss(0.0, 0.0));
    for (fa, fb) in [(false, false), (false, true), (true, false)] {
        let (a, b) = solve(fa, fb);
        if a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite() {
            let s = ss(a, b);
            if s < best.2 {
                best = (a, b, s);
            }
        }
    }
    (best.0, best.1)
}
