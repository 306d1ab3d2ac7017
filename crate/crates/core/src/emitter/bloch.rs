use std::ops::{Add, Mul};

use num_complex::Complex64;

use super::{DriveProfile, EmitterParams, Rates};
use crate::error::Result;

/// Two-level density matrix (ρ_ge is the conjugate of `eg`).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Rho {
    pub ee: f64,
    pub gg: f64,
    pub eg: Complex64,
}

impl Add for Rho {
    type Output = Rho;
    fn add(self, o: Rho) -> Rho {
        Rho {
            ee: self.ee + o.ee,
            gg: self.gg + o.gg,
            eg: self.eg + o.eg,
        }
    }
}

impl Mul<f64> for Rho {
    type Output = Rho;
    fn mul(self, s: f64) -> Rho {
        Rho {
            ee: self.ee * s,
            gg: self.gg * s,
            eg: self.eg * s,
        }
    }
}

impl Rho {
    pub const GROUND: Rho = Rho {
        ee: 0.0,
        gg: 1.0,
        eg: Complex64 { re: 0.0, im: 0.0 },
    };

    /// Coherent evolution, decay out of |e⟩ and dephasing, without the
    /// refeeding of |g⟩ by emission.
    #[inline]
    pub fn no_jump_rhs(&self, omega: Complex64, r: &Rates) -> Rho {
        let z = omega.conj() * self.eg;
        let i = Complex64::new(0.0, 1.0);
        Rho {
            ee: -z.im - r.gamma * self.ee,
            gg: z.im,
            eg: -i * r.delta * self.eg - i * 0.5 * omega * (self.gg - self.ee)
                - (0.5 * r.gamma + r.dephase) * self.eg,
        }
    }
}

/// Output of [`bloch_integrate`].
#[derive(Debug, Clone)]
pub struct BlochResult {
    /// Expected photons per pulse including decay after the window.
    pub mean_photons: f64,
    /// ρ_ee at every grid point.
    pub excited_pop_trace: Vec<f64>,
    /// Largest |Tr ρ − 1| seen during the integration.
    pub max_trace_error: f64,
}

#[derive(Clone, Copy)]
struct State {
    rho: Rho,
    emitted: f64,
}

impl Add for State {
    type Output = State;
    fn add(self, o: State) -> State {
        State {
            rho: self.rho + o.rho,
            emitted: self.emitted + o.emitted,
        }
    }
}

impl Mul<f64> for State {
    type Output = State;
    fn mul(self, s: f64) -> State {
        State {
            rho: self.rho * s,
            emitted: self.emitted * s,
        }
    }
}

fn rhs(s: &State, omega: Complex64, r: &Rates) -> State {
    let mut d = s.rho.no_jump_rhs(omega, r);
    d.gg += r.gamma * s.rho.ee;
    State {
        rho: d,
        emitted: r.gamma * s.rho.ee,
    }
}

/// Integrate the Lindblad equation from the ground state with fixed-step RK4.
///
/// The emitted-photon integral `Γ∫ρ_ee dt` is carried as an extra state
/// component; excitation left at the end of the window is counted as one
/// more emission.
pub fn bloch_integrate(d: &DriveProfile, e: &EmitterParams) -> Result<BlochResult> {
    d.check_resolution(e)?;
    let r = e.rates_per_ps();
    let h = d.dt;
    let mut s = State {
        rho: Rho::GROUND,
        emitted: 0.0,
    };
    let mut trace = Vec::with_capacity(d.len());
    trace.push(0.0);
    let mut max_trace_error: f64 = 0.0;
    for k in 0..d.len() - 1 {
        let w0 = d.rabi[k];
        let wm = d.at(k as f64 + 0.5);
        let w1 = d.rabi[k + 1];
        let k1 = rhs(&s, w0, &r);
        let k2 = rhs(&(s + k1 * (0.5 * h)), wm, &r);
        let k3 = rhs(&(s + k2 * (0.5 * h)), wm, &r);
        let k4 = rhs(&(s + k3 * h), w1, &r);
        s = s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        trace.push(s.rho.ee);
        max_trace_error = max_trace_error.max((s.rho.ee + s.rho.gg - 1.0).abs());
    }
    Ok(BlochResult {
        mean_photons: s.emitted + s.rho.ee,
        excited_pop_trace: trace,
        max_trace_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{gaussian_pulse, GridSpec};

    fn drive(fwhm_ghz: f64, area: f64, grid: GridSpec) -> DriveProfile {
        DriveProfile::from_pulse(&gaussian_pulse(fwhm_ghz, area, grid).unwrap(), 1.0)
    }

    #[test]
    fn zero_drive_emits_nothing() {
        let d = DriveProfile::new(0.0, 0.1, vec![Complex64::new(0.0, 0.0); 256]).unwrap();
        let out = bloch_integrate(&d, &EmitterParams::default()).unwrap();
        assert_eq!(out.mean_photons, 0.0);
    }

    #[test]
    fn short_pi_pulse_emits_one_photon() {
        // 2 THz pulse: ~0.22 ps long, gamma*T ~ 4e-6
        let d = drive(2000.0, std::f64::consts::PI, GridSpec::new(1024, 0.002).unwrap());
        let out = bloch_integrate(&d, &EmitterParams::default()).unwrap();
        assert!((out.mean_photons - 1.0).abs() < 1e-3, "{}", out.mean_photons);
        assert!(out.max_trace_error < 1e-9);
        assert!(out.excited_pop_trace.iter().all(|p| (-1e-12..=1.0 + 1e-12).contains(p)));
    }

    #[test]
    fn short_two_pi_pulse_returns_to_ground() {
        let d = drive(2000.0, 2.0 * std::f64::consts::PI, GridSpec::new(2048, 0.001).unwrap());
        let out = bloch_integrate(&d, &EmitterParams::default()).unwrap();
        assert!(out.mean_photons <= 0.05, "{}", out.mean_photons);
    }

    #[test]
    fn lossless_rabi_solution() {
        // gamma → tiny: population after a resonant pulse of area A is sin²(A/2)
        let e = EmitterParams::with_gamma(1e-6);
        for area in [0.3, 1.0, 2.0, 2.5] {
            let d = drive(200.0, area, GridSpec::new(2048, 0.02).unwrap());
            let out = bloch_integrate(&d, &e).unwrap();
            let pe = *out.excited_pop_trace.last().unwrap();
            assert!((pe - (area / 2.0).sin().powi(2)).abs() < 1e-6, "{area}: {pe}");
        }
    }

    #[test]
    fn detuned_cw_matches_steady_state() {
        // constant drive for many lifetimes approaches the Lorentzian steady state
        let e = EmitterParams {
            gamma: 50.0,
            detuning: 5.0,
            ..Default::default()
        };
        let omega = 0.02;
        let d = DriveProfile::new(0.0, 0.2, vec![Complex64::new(omega, 0.0); 2000]).unwrap();
        let out = bloch_integrate(&d, &e).unwrap();
        let r = e.rates_per_ps();
        let t2 = 0.5 * r.gamma;
        let s = 0.5 * omega * omega * t2 / r.gamma;
        let pe_ss = s / (r.delta * r.delta + t2 * t2 + 2.0 * s);
        let pe = *out.excited_pop_trace.last().unwrap();
        assert!((pe - pe_ss).abs() / pe_ss < 1e-4, "{pe} vs {pe_ss}");
    }

    mod props {
        use super::*;
        use crate::optics::{gaussian_pulse, GridSpec};
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(16))]

            #[test]
            fn population_stays_physical(w in 30.0..200.0f64, area in 0.0..12.0f64, dephase in 0.0..5.0f64) {
                let p = gaussian_pulse(w, area, GridSpec::new(16384, 0.008).unwrap()).unwrap();
                let d = DriveProfile::from_pulse(&p, 1.0).cropped(1e-8);
                let e = EmitterParams { gamma_dephase: dephase, ..EmitterParams::default() };
                let out = bloch_integrate(&d, &e).unwrap();
                prop_assert!(out.max_trace_error <= 1e-9);
                prop_assert!(out.excited_pop_trace.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
            }
        }
    }
}
