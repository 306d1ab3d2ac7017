use super::bloch::Rho;
use super::{DriveProfile, EmitterParams};
use crate::error::{invalid, Result};

/// Per-pulse photon-number distribution `p₀..p_{n_max}` from the
/// photon-number resolved master equation.
///
/// Sector `n` holds the state conditioned on `n` emissions so far; emission
/// moves population from sector `n` to `n + 1`. The last sector absorbs its
/// own emissions and therefore collects `n ≥ n_max`. Excitation left at the
/// end of the window emits exactly once more.
pub fn photon_number_distribution(
    d: &DriveProfile,
    e: &EmitterParams,
    n_max: usize,
) -> Result<Vec<f64>> {
    if n_max < 1 {
        return Err(invalid("n_max", "must be at least 1"));
    }
    d.check_resolution(e)?;
    let r = e.rates_per_ps();
    let sectors = n_max + 1;
    let h = d.dt;

    let rhs = |s: &[Rho], omega, out: &mut [Rho]| {
        for n in 0..sectors {
            out[n] = s[n].no_jump_rhs(omega, &r);
        }
        for n in 0..sectors {
            let target = (n + 1).min(n_max);
            out[target].gg += r.gamma * s[n].ee;
        }
    };

    let mut s = vec![Rho::default(); sectors];
    s[0] = Rho::GROUND;
    let mut k1 = vec![Rho::default(); sectors];
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut tmp = k1.clone();
    for k in 0..d.len() - 1 {
        let w0 = d.rabi[k];
        let wm = d.at(k as f64 + 0.5);
        let w1 = d.rabi[k + 1];
        rhs(&s, w0, &mut k1);
        for n in 0..sectors {
            tmp[n] = s[n] + k1[n] * (0.5 * h);
        }
        rhs(&tmp, wm, &mut k2);
        for n in 0..sectors {
            tmp[n] = s[n] + k2[n] * (0.5 * h);
        }
        rhs(&tmp, wm, &mut k3);
        for n in 0..sectors {
            tmp[n] = s[n] + k3[n] * h;
        }
        rhs(&tmp, w1, &mut k4);
        for n in 0..sectors {
            s[n] = s[n] + (k1[n] + k2[n] * 2.0 + k3[n] * 2.0 + k4[n]) * (h / 6.0);
        }
    }

    let mut pn = vec![0.0; sectors];
    for n in 0..sectors {
        pn[n] += s[n].gg;
        pn[(n + 1).min(n_max)] += s[n].ee;
    }
    // clip rounding-level negatives; the total is restored below
    for p in &mut pn {
        *p = p.max(0.0);
    }
    let total: f64 = pn.iter().sum();
    for p in &mut pn {
        *p /= total;
    }
    Ok(pn)
}
