use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DriveProfile, EmitterParams, Rates, N_MAX};
use crate::error::{invalid, Result};
use crate::rng::{block_rng, Purpose};

/// Result of a quantum-jump simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmissionOutcome {
    /// Empirical probability of `n` emissions per pulse. At least
    /// `N_MAX + 1` entries, longer if a trajectory emitted more.
    pub pn: Vec<f64>,
    /// Emission times (ps, on the drive's time axis) for every trajectory.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub jump_records: Vec<Vec<f64>>,
    pub n_traj: usize,
    pub seed: u64,
}

impl EmissionOutcome {
    pub fn mean_photons(&self) -> f64 {
        super::mean_from_pn(&self.pn)
    }

    /// Standard error of the mean photon number.
    pub fn mean_std_error(&self) -> f64 {
        let m = self.mean_photons();
        let m2: f64 = self
            .pn
            .iter()
            .enumerate()
            .map(|(n, p)| (n * n) as f64 * p)
            .sum();
        ((m2 - m * m).max(0.0) / self.n_traj as f64).sqrt()
    }

    pub fn g2(&self) -> Result<f64> {
        super::g2_from_pn(&self.pn)
    }

    pub fn without_records(mut self) -> Self {
        self.jump_records.clear();
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Copy)]
struct Psi {
    e: Complex64,
    g: Complex64,
}

impl Psi {
    const GROUND: Psi = Psi {
        e: Complex64 { re: 0.0, im: 0.0 },
        g: Complex64 { re: 1.0, im: 0.0 },
    };

    fn norm_sqr(&self) -> f64 {
        self.e.norm_sqr() + self.g.norm_sqr()
    }

    #[inline]
    fn rhs(&self, omega: Complex64, r: &Rates) -> Psi {
        let i = Complex64::new(0.0, 1.0);
        Psi {
            e: -i * Complex64::new(r.delta, -0.5 * r.gamma) * self.e - i * 0.5 * omega * self.g,
            g: -i * 0.5 * omega.conj() * self.e,
        }
    }

    #[inline]
    fn axpy(&self, k: &Psi, h: f64) -> Psi {
        Psi {
            e: self.e + k.e * h,
            g: self.g + k.g * h,
        }
    }
}

/// One RK4 step of the non-Hermitian no-jump evolution between fractional
/// sample positions `x0` and `x0 + h/dt`.
#[inline]
fn step(psi: &Psi, d: &DriveProfile, x0: f64, h: f64, r: &Rates) -> Psi {
    let xh = h / d.dt;
    let w0 = d.at(x0);
    let wm = d.at(x0 + 0.5 * xh);
    let w1 = d.at(x0 + xh);
    let k1 = psi.rhs(w0, r);
    let k2 = psi.axpy(&k1, 0.5 * h).rhs(wm, r);
    let k3 = psi.axpy(&k2, 0.5 * h).rhs(wm, r);
    let k4 = psi.axpy(&k3, h).rhs(w1, r);
    Psi {
        e: psi.e + (k1.e + k2.e * 2.0 + k3.e * 2.0 + k4.e) * (h / 6.0),
        g: psi.g + (k1.g + k2.g * 2.0 + k3.g * 2.0 + k4.g) * (h / 6.0),
    }
}

fn trajectory(d: &DriveProfile, r: &Rates, seed: u64, index: u64) -> Vec<f64> {
    let mut rng = block_rng(seed, Purpose::Trajectory, index);
    let mut jumps = Vec::new();
    let mut psi = Psi::GROUND;
    let mut threshold: f64 = rng.gen();
    // dephasing jumps (σ_z, rate γ*/2) form a state-independent Poisson process
    let dephase = (r.dephase > 0.0).then(|| Exp::new(0.5 * r.dephase).expect("positive rate"));
    let mut next_dephase = dephase
        .as_ref()
        .map_or(f64::INFINITY, |x| d.t0 + x.sample(&mut rng));

    let n = d.len();
    for k in 0..n - 1 {
        let t_start = d.t0 + k as f64 * d.dt;
        let n0 = psi.norm_sqr();
        let mut next = step(&psi, d, k as f64, d.dt, r);
        let n1 = next.norm_sqr();
        if n1 < threshold {
            // locate the crossing inside the step, emit, restart from |g⟩
            let frac = ((n0 - threshold) / (n0 - n1)).clamp(0.0, 1.0);
            let t_jump = t_start + frac * d.dt;
            jumps.push(t_jump);
            threshold = rng.gen();
            let rest = (1.0 - frac) * d.dt;
            next = if rest > 0.0 {
                step(&Psi::GROUND, d, k as f64 + frac, rest, r)
            } else {
                Psi::GROUND
            };
        }
        let t_end = t_start + d.dt;
        while next_dephase <= t_end {
            next.e = -next.e;
            next_dephase += dephase.as_ref().expect("finite only with dephasing").sample(&mut rng);
        }
        psi = next;
    }

    // no drive after the window: the norm decays as |g|² + |e|²·exp(−Γt) and
    // crosses the threshold only if the threshold lies above |g|²
    let pg = psi.g.norm_sqr();
    let pe = psi.e.norm_sqr();
    if pe > 0.0 && threshold > pg {
        let t = -((threshold - pg) / pe).ln() / r.gamma;
        jumps.push(d.end_time() + t);
    }
    jumps
}

/// Monte Carlo wavefunction (quantum-jump) simulation of `n_traj` pulses.
///
/// Each trajectory draws a threshold and evolves under the non-Hermitian
/// Hamiltonian until the norm falls below it, records an emission, resets to
/// |g⟩ and keeps going under the remaining drive. After the drive window the
/// residual excitation decays analytically. Trajectory `i` uses a generator
/// derived from `(seed, i)` only, so the parallel result equals the serial one.
pub fn mcwf_simulate(
    d: &DriveProfile,
    e: &EmitterParams,
    n_traj: usize,
    seed: u64,
) -> Result<EmissionOutcome> {
    if n_traj == 0 {
        return Err(invalid("n_traj", "must be at least 1"));
    }
    d.check_resolution(e)?;
    let r = e.rates_per_ps();
    let jump_records: Vec<Vec<f64>> = (0..n_traj as u64)
        .into_par_iter()
        .map(|i| trajectory(d, &r, seed, i))
        .collect();
    let max_n = jump_records.iter().map(Vec::len).max().unwrap_or(0);
    let mut counts = vec![0u64; (N_MAX + 1).max(max_n + 1)];
    for rec in &jump_records {
        counts[rec.len()] += 1;
    }
    let pn = counts
        .iter()
        .map(|&c| c as f64 / n_traj as f64)
        .collect();
    Ok(EmissionOutcome {
        pn,
        jump_records,
        n_traj,
        seed,
    })
}
