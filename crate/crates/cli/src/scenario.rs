//! Figure-analog pipelines. Each scenario is checked in full by `prepare`
//! before `execute` does any heavy work, so `validate` and `run` agree on
//! which configurations are acceptable.
//!
//! Randomness: stage `k` of a scenario draws from the core generators with
//! seed `seed + k` (wrapping).

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use qdsps_core::analysis::{
    bernoulli_runs, bin_counts, coincidence_histogram, correct_indistinguishability, g2_zero, hom_simulate_with,
    hom_visibility, implied_efficiency, noise_probability, predicted_run_rate, squeezing_report, Histogram, HomSetup,
    MIN_SIDE_PEAKS,
};
use qdsps_core::budget::{
    chain, dbr_reflectivity, materials, system_efficiency, threshold_check, DbrStack, EfficiencyBudget, Measured,
};
use qdsps_core::emitter::{
    fit_indistinguishability, indistinguishability, mcwf_simulate, purity_vs_width, rabi_sweep, DriveProfile,
    EmitterParams, ShapingChain,
};
use qdsps_core::optics::{CavityMode, GridSpec, Polarization};
use qdsps_core::photonstream::{
    apply_loss, beamsplit, detect, emit_stream, BernoulliSampler, DetectorModel, PhotonNumberSampler, PulseTrain,
};
use qdsps_core::Error as CoreError;
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::{CliError, Violation};
use crate::output::{Report, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Rabi,
    PuritySweep,
    Squeezing,
    Consecutive,
    Hbt,
    Hom,
    DelayHom,
    Budget,
    Dbr,
    Threshold,
}

impl Scenario {
    pub const ALL: [Scenario; 10] = [
        Scenario::Rabi,
        Scenario::PuritySweep,
        Scenario::Squeezing,
        Scenario::Consecutive,
        Scenario::Hbt,
        Scenario::Hom,
        Scenario::DelayHom,
        Scenario::Budget,
        Scenario::Dbr,
        Scenario::Threshold,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Rabi => "rabi",
            Scenario::PuritySweep => "purity-sweep",
            Scenario::Squeezing => "squeezing",
            Scenario::Consecutive => "consecutive",
            Scenario::Hbt => "hbt",
            Scenario::Hom => "hom",
            Scenario::DelayHom => "delay-hom",
            Scenario::Budget => "budget",
            Scenario::Dbr => "dbr",
            Scenario::Threshold => "threshold",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| CliError::UnknownScenario(s.to_string()))
    }
}

/// Collects violations while building kernel inputs.
#[derive(Default)]
struct Checks(Vec<Violation>);

impl Checks {
    fn core<T>(&mut self, section: &str, r: Result<T, CoreError>) -> Option<T> {
        r.map_err(|e| self.0.push(Violation::from_core(section, &e))).ok()
    }

    fn require(&mut self, ok: bool, key: &str, message: impl Into<String>) -> bool {
        if !ok {
            self.0.push(Violation::new(key, message));
        }
        ok
    }

    fn unit_interval(&mut self, v: f64, key: &str) -> bool {
        self.require((0.0..=1.0).contains(&v), key, format!("{v} not in [0, 1]"))
    }

    fn positive(&mut self, v: f64, key: &str) -> bool {
        self.require(v > 0.0 && v.is_finite(), key, format!("{v} must be positive"))
    }

    fn finish<T>(self, value: Option<T>) -> Result<T, Vec<Violation>> {
        match value {
            Some(v) if self.0.is_empty() => Ok(v),
            _ => Err(self.0),
        }
    }
}

fn seed_for(seed: u64, stage: u64) -> u64 {
    seed.wrapping_add(stage)
}

fn emitter(c: &Config, ck: &mut Checks) -> Option<EmitterParams> {
    let e = EmitterParams {
        gamma: c.emitter.gamma,
        gamma_dephase: c.emitter.gamma_dephase,
        gamma_sd: c.emitter.gamma_sd,
        tau_c: c.emitter.tau_c,
        detuning: c.emitter.detuning,
    };
    ck.core("emitter", e.validate()).map(|_| e)
}

fn shaping_chain(c: &Config, ck: &mut Checks) -> Option<ShapingChain> {
    let p = &c.pulse;
    let cav = &c.cavity;
    let grid = ck.core("pulse", GridSpec::new(p.grid_n, p.grid_dt_ps));
    let cavity = if cav.enabled {
        let pol = match cav.polarization.as_str() {
            "H" => Some(Polarization::H),
            "V" => Some(Polarization::V),
            other => {
                ck.require(false, "cavity.polarization", format!("`{other}` is not H or V"));
                None
            }
        };
        let mode = pol.and_then(|pol| {
            ck.core("cavity", CavityMode::new(pol, cav.q_factor, cav.center_offset_ghz, cav.eta_top))
        });
        Some(mode?)
    } else {
        None
    };
    let chain = ShapingChain {
        source_fwhm: p.source_fwhm_ghz,
        slit_center: p.slit_center_ghz,
        cavity,
        wavelength: cav.wavelength_nm,
        grid: grid?,
        kappa_drive: p.kappa_drive,
        crop_rel: p.crop_rel,
    };
    ck.core("pulse", chain.validate()).map(|_| chain)
}

/// Drive at unit source area for every configured width.
fn drives(c: &Config, chain: &ShapingChain, ck: &mut Checks) -> Vec<(f64, DriveProfile)> {
    ck.require(!c.pulse.widths_ghz.is_empty(), "pulse.widths_ghz", "needs at least one width");
    let mut out = Vec::new();
    for &w in &c.pulse.widths_ghz {
        if !ck.positive(w, "pulse.widths_ghz") {
            continue;
        }
        if let Some(d) = ck.core("pulse", chain.drive(w)) {
            if ck.require(d.area() > 0.0, "pulse.widths_ghz", format!("{w} GHz leaves no drive after shaping")) {
                out.push((w, d));
            }
        }
    }
    out
}

/// Step-size check at the strongest drive a sweep will use.
fn check_scaled(d: &DriveProfile, scale: f64, e: &EmitterParams, ck: &mut Checks) {
    ck.core("emitter", d.scaled(scale).check_resolution(e));
}

fn side_peaks(bin_ps: f64, window_ns: f64, period_ns: f64, hw_ns: f64) -> Result<usize, CoreError> {
    let h = Histogram::symmetric(bin_ps, window_ns * 1e3)?;
    let period = period_ns * 1e3;
    let k_max = (h.end().max(-h.origin) / period).ceil() as i64;
    Ok((-k_max..=k_max)
        .filter(|k| k.abs() > 1)
        .filter(|&k| h.contains_peak(k as f64 * period, hw_ns * 1e3))
        .count())
}

fn check_histogram(section: &str, bin_ps: f64, window_ns: f64, period_ns: f64, hw_ns: f64, ck: &mut Checks) {
    let hw_key = format!("{section}.peak_halfwidth_ns");
    if !ck.require(
        hw_ns > 0.0 && 2.0 * hw_ns < period_ns,
        &hw_key,
        format!("{hw_ns} must be positive and below half the {period_ns:.3} ns period"),
    ) {
        return;
    }
    ck.require(bin_ps > 0.0 && bin_ps.is_finite(), &format!("{section}.bin_ps"), "must be positive");
    ck.require(window_ns > 0.0 && window_ns.is_finite(), &format!("{section}.window_ns"), "must be positive");
    if let Ok(n) = side_peaks(bin_ps, window_ns, period_ns, hw_ns) {
        ck.require(
            n >= MIN_SIDE_PEAKS,
            &format!("{section}.window_ns"),
            format!("{window_ns} ns holds {n} complete side peaks, need {MIN_SIDE_PEAKS}"),
        );
    }
}

enum Prepared {
    Rabi {
        e: EmitterParams,
        curves: Vec<(f64, DriveProfile, Vec<f64>)>,
    },
    Purity {
        e: EmitterParams,
        chain: ShapingChain,
    },
    Squeezing {
        train: PulseTrain,
        sampler: BernoulliSampler,
        bin_us: f64,
    },
    Consecutive,
    Hbt {
        sampler: PhotonNumberSampler,
        train: PulseTrain,
        detector: DetectorModel,
    },
    Hom {
        setup: HomSetup,
    },
    DelayHom {
        e: EmitterParams,
        points: Vec<(f64, f64)>,
    },
    Budget {
        budget: EfficiencyBudget,
    },
    Dbr {
        stacks: Vec<(String, DbrStack)>,
    },
    Threshold,
}

fn prepare(c: &Config, s: Scenario) -> Result<Prepared, Vec<Violation>> {
    let mut ck = Checks::default();
    let prepared = match s {
        Scenario::Rabi => {
            let e = emitter(c, &mut ck);
            let chain = shaping_chain(c, &mut ck);
            ck.require(c.pulse.rabi_points >= 3, "pulse.rabi_points", "need at least 3 points");
            ck.positive(c.pulse.rabi_max_area_pi, "pulse.rabi_max_area_pi");
            match (e, chain) {
                (Some(e), Some(chain)) if ck.0.is_empty() => {
                    let n = c.pulse.rabi_points;
                    let curves: Vec<_> = drives(c, &chain, &mut ck)
                        .into_iter()
                        .map(|(w, d)| {
                            let top = c.pulse.rabi_max_area_pi * PI / d.area();
                            check_scaled(&d, top, &e, &mut ck);
                            let scales = (0..n).map(|i| top * i as f64 / (n - 1) as f64).collect();
                            (w, d, scales)
                        })
                        .collect();
                    Some(Prepared::Rabi { e, curves })
                }
                _ => None,
            }
        }
        Scenario::PuritySweep => {
            let e = emitter(c, &mut ck);
            let chain = shaping_chain(c, &mut ck);
            for &w in &c.pulse.widths_ghz {
                ck.require((20.0..=200.0).contains(&w), "pulse.widths_ghz", format!("{w} GHz outside [20, 200]"));
            }
            match (e, chain) {
                (Some(e), Some(chain)) if ck.0.is_empty() => {
                    for (_, d) in drives(c, &chain, &mut ck) {
                        // the π search scans up to 3π of the smaller of net and absolute area
                        let net: Complex64 = d.rabi.iter().sum::<Complex64>() * d.dt;
                        let reference = net.norm().min(d.area());
                        if ck.require(reference > 0.0, "pulse.widths_ghz", "drive has zero net area") {
                            check_scaled(&d, 3.0 * PI / reference, &e, &mut ck);
                        }
                    }
                    Some(Prepared::Purity { e, chain })
                }
                _ => None,
            }
        }
        Scenario::Squeezing => {
            let q = &c.squeezing;
            ck.require(q.pulses_per_bin >= 1, "squeezing.pulses_per_bin", "must be at least 1");
            ck.require(q.n_bins >= 2, "squeezing.n_bins", "need at least 2 bins");
            ck.positive(c.emitter.gamma, "emitter.gamma");
            ck.require(q.implied_db.is_finite(), "squeezing.implied_db", "must be finite");
            let sampler = ck.core("squeezing", BernoulliSampler::new(q.rho));
            let train = ck.core(
                "squeezing",
                PulseTrain::new(q.rep_rate_mhz, q.n_bins * q.pulses_per_bin as usize, 1),
            );
            match (sampler, train) {
                (Some(sampler), Some(train)) => Some(Prepared::Squeezing {
                    bin_us: q.pulses_per_bin as f64 / q.rep_rate_mhz,
                    train,
                    sampler,
                }),
                _ => None,
            }
        }
        Scenario::Consecutive => {
            let q = &c.consecutive;
            ck.unit_interval(q.rho, "consecutive.rho");
            ck.require(q.n_pulses > 0, "consecutive.n_pulses", "must be positive");
            ck.positive(q.rate_hz, "consecutive.rate_hz");
            ck.require(q.run_length >= 1, "consecutive.run_length", "must be at least 1");
            Some(Prepared::Consecutive)
        }
        Scenario::Hbt => {
            let h = &c.hbt;
            let x = ck.core("hbt", noise_probability(h.g2));
            let sampler = x.and_then(|x| ck.core("hbt", PhotonNumberSampler::new(&[0.0, 1.0 - x, x])));
            ck.unit_interval(h.transmission, "hbt.transmission");
            ck.require(h.n_pulses > 0, "hbt.n_pulses", "must be positive");
            ck.positive(c.emitter.gamma, "emitter.gamma");
            let train = ck.core("hbt", PulseTrain::new(h.rep_rate_mhz, h.n_pulses, 1));
            let detector = DetectorModel {
                efficiency: c.detector.efficiency,
                dead_time: c.detector.dead_time_ns,
                jitter_sigma: c.detector.jitter_ps,
            };
            ck.core("detector", detector.validate());
            if let Some(t) = &train {
                check_histogram("hbt", h.bin_ps, h.window_ns, t.period_ps() / 1e3, h.peak_halfwidth_ns, &mut ck);
            }
            match (sampler, train) {
                (Some(sampler), Some(train)) => Some(Prepared::Hbt {
                    sampler,
                    train,
                    detector,
                }),
                _ => None,
            }
        }
        Scenario::Hom => {
            let h = &c.hom;
            ck.require(!h.indistinguishability.is_empty(), "hom.indistinguishability", "needs at least one value");
            for &m in &h.indistinguishability {
                ck.unit_interval(m, "hom.indistinguishability");
            }
            ck.core("hom", noise_probability(h.g2));
            ck.require(
                h.reflectance > 0.0 && h.reflectance < 1.0,
                "hom.reflectance",
                format!("{} not in (0, 1)", h.reflectance),
            );
            ck.require(h.n_pulses > 0, "hom.n_pulses", "must be positive");
            ck.positive(h.period_ns, "hom.period_ns");
            ck.positive(c.emitter.gamma, "emitter.gamma");
            ck.unit_interval(c.detector.efficiency, "detector.efficiency");
            if h.period_ns > 0.0 {
                check_histogram("hom", h.bin_ps, h.window_ns, h.period_ns, h.peak_halfwidth_ns, &mut ck);
            }
            Some(Prepared::Hom {
                setup: HomSetup {
                    period_ps: h.period_ns * 1e3,
                    gamma: c.emitter.gamma,
                    efficiency: c.detector.efficiency,
                },
            })
        }
        Scenario::DelayHom => {
            let d = &c.delay_hom;
            let e = emitter(c, &mut ck);
            ck.require(
                d.delays_us.len() == d.visibilities.len(),
                "delay_hom.visibilities",
                format!("{} values for {} delays", d.visibilities.len(), d.delays_us.len()),
            );
            ck.require(d.delays_us.len() >= 3, "delay_hom.delays_us", "need at least 3 points for 3 parameters");
            for &t in &d.delays_us {
                ck.require(t >= 0.0 && t.is_finite(), "delay_hom.delays_us", format!("{t} must be non-negative"));
            }
            for &m in &d.visibilities {
                ck.require(m > 0.0 && m <= 1.0, "delay_hom.visibilities", format!("{m} not in (0, 1]"));
            }
            ck.require(d.curve_points >= 2, "delay_hom.curve_points", "need at least 2 points");
            e.map(|e| Prepared::DelayHom {
                e,
                points: d.delays_us.iter().copied().zip(d.visibilities.iter().copied()).collect(),
            })
        }
        Scenario::Budget => {
            let b = &c.budget;
            let mut budget = EfficiencyBudget::default();
            for s in &b.stage {
                budget.push(s.name.clone(), s.value, s.uncertainty);
            }
            ck.core("budget", budget.validate());
            ck.core(
                "budget",
                system_efficiency(
                    Measured::new(b.counts_per_s, b.counts_sigma),
                    Measured::exact(b.rep_rate_hz),
                    Measured::new(b.detector_efficiency, b.detector_sigma),
                ),
            );
            Some(Prepared::Budget { budget })
        }
        Scenario::Dbr => {
            let d = &c.dbr;
            ck.positive(d.wavelength_min_nm, "dbr.wavelength_min_nm");
            ck.require(
                d.wavelength_max_nm > d.wavelength_min_nm && d.wavelength_max_nm.is_finite(),
                "dbr.wavelength_max_nm",
                "must exceed dbr.wavelength_min_nm",
            );
            ck.require(d.points >= 2, "dbr.points", "need at least 2 points");
            ck.require(!d.stack.is_empty(), "dbr.stack", "needs at least one stack");
            let mut stacks = Vec::new();
            for (i, s) in d.stack.iter().enumerate() {
                let mut index = |field: &str, name: &str| {
                    let v = materials::index(name);
                    ck.require(v.is_some(), &format!("dbr.stack[{i}].{field}"), format!("unknown material `{name}`"));
                    v.unwrap_or(f64::NAN)
                };
                let stack = DbrStack {
                    n_high: index("high", &s.high),
                    n_low: index("low", &s.low),
                    pairs: s.pairs,
                    n_ambient: index("ambient", &s.ambient),
                    n_substrate: index("substrate", &s.substrate),
                    design_wavelength: s.design_wavelength_nm,
                };
                if stack.n_high.is_finite() && stack.n_low.is_finite() && stack.n_ambient.is_finite() && stack.n_substrate.is_finite() {
                    ck.core(&format!("dbr.stack[{i}]"), stack.validate());
                }
                stacks.push((s.name.clone(), stack));
            }
            Some(Prepared::Dbr { stacks })
        }
        Scenario::Threshold => {
            let t = &c.threshold;
            ck.core("threshold", threshold_check(t.eta_source, t.eta_detector));
            Some(Prepared::Threshold)
        }
    };
    ck.finish(prepared)
}

/// Violations that would stop `run` before any computation.
pub fn validate(c: &Config, s: Scenario) -> Vec<Violation> {
    prepare(c, s).err().unwrap_or_default()
}

pub fn run(c: &Config, s: Scenario) -> Result<Report, CliError> {
    let prepared = prepare(c, s).map_err(CliError::Precondition)?;
    execute(c, prepared).map_err(|e| CliError::from_core(s.name(), e))
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialise")
}

fn histogram_table(name: &'static str, h: &Histogram) -> Table {
    let mut t = Table::new(name, &["delay_ps", "count"]);
    for (i, &n) in h.counts.iter().enumerate() {
        t.push(vec![num(h.center(i)), json!(n)]);
    }
    t
}

fn execute(c: &Config, p: Prepared) -> Result<Report, CoreError> {
    let seed = c.seed;
    Ok(match p {
        Prepared::Rabi { e, curves } => {
            let mut t = Table::new("", &["width_ghz", "sqrt_power", "area_rad", "mean_photons"]);
            let mut firsts = Vec::new();
            for (w, d, scales) in curves {
                let area = d.area();
                let curve = rabi_sweep(&d, &scales, &e)?;
                for pt in &curve {
                    t.push(vec![num(w), num(pt.sqrt_power), num(pt.sqrt_power * area), num(pt.mean_photons)]);
                }
                let first = qdsps_core::emitter::first_maximum(&curve);
                firsts.push(json!({
                    "width_ghz": w,
                    "first_maximum": first.map(|m| json!({
                        "sqrt_power": m.sqrt_power,
                        "area_pi": m.sqrt_power * area / PI,
                        "mean_photons": m.mean_photons,
                    })),
                }));
            }
            Report {
                summary: json!({ "emitter": to_json(&e), "curves": firsts }),
                tables: vec![t],
            }
        }
        Prepared::Purity { e, chain } => {
            let rows = purity_vs_width(&c.pulse.widths_ghz, &e, &chain)?;
            let mut t = Table::new(
                "",
                &[
                    "width_ghz",
                    "measured_fwhm_ghz",
                    "pi_scale",
                    "pi_area_rad",
                    "pi_mean_photons",
                    "g2",
                    "mcwf_mean",
                    "mcwf_mean_se",
                    "mcwf_g2",
                ],
            );
            for (i, r) in rows.iter().enumerate() {
                let mut row = vec![
                    num(r.width),
                    num(r.measured_fwhm),
                    num(r.pi_scale),
                    num(r.pi_area),
                    num(r.pi_pulse_mean),
                    num(r.g2),
                ];
                if c.emitter.trajectories > 0 {
                    let d = chain.drive(r.width)?.scaled(r.pi_scale);
                    let mc = mcwf_simulate(&d, &e, c.emitter.trajectories, seed_for(seed, i as u64))?;
                    row.extend([num(mc.mean_photons()), num(mc.mean_std_error()), mc.g2().map_or(Value::Null, num)]);
                } else {
                    row.extend([Value::Null, Value::Null, Value::Null]);
                }
                t.push(row);
            }
            Report {
                summary: json!({ "emitter": to_json(&e), "rows": to_json(&rows) }),
                tables: vec![t],
            }
        }
        Prepared::Squeezing { train, sampler, bin_us } => {
            let q = &c.squeezing;
            let stream = emit_stream(&sampler, &train, c.emitter.gamma, seed_for(seed, 0))?;
            let counts = bin_counts(&stream, bin_us, Some(q.n_bins))?;
            let rep = squeezing_report(&counts, q.pulses_per_bin)?;
            let mut t = Table::new("counts", &["bin", "count"]);
            for (i, &n) in counts.iter().enumerate() {
                t.push(vec![json!(i), json!(n)]);
            }
            Report {
                summary: json!({
                    "rho": q.rho,
                    "bin_us": bin_us,
                    "expected_ratio": (1.0 - q.rho).sqrt(),
                    "report": to_json(&rep),
                    "implied_efficiency": to_json(&implied_efficiency(q.implied_db)),
                }),
                tables: vec![t],
            }
        }
        Prepared::Consecutive => {
            let q = &c.consecutive;
            let rep = bernoulli_runs(q.rho, q.n_pulses, seed_for(seed, 0))?;
            let mut t = Table::new("runs", &["n", "count", "at_least_n", "predicted_rate_hz"]);
            for n in 1..rep.counts_per_n.len() {
                t.push(vec![
                    json!(n),
                    json!(rep.counts_per_n[n]),
                    json!(rep.at_least_n.get(n).copied().unwrap_or(0)),
                    num(predicted_run_rate(q.rho, q.rate_hz, n as u32)),
                ]);
            }
            let fitted = rep.fit.as_ref().map(|f| predicted_run_rate(f.fitted_rho, q.rate_hz, q.run_length));
            Report {
                summary: json!({
                    "rho": q.rho,
                    "n_pulses": rep.n_pulses,
                    "fit": to_json(&rep.fit),
                    "fit_refused": rep.fit_refused,
                    "run_length": q.run_length,
                    "predicted_rate_hz": predicted_run_rate(q.rho, q.rate_hz, q.run_length),
                    "predicted_rate_from_fit_hz": fitted,
                }),
                tables: vec![t],
            }
        }
        Prepared::Hbt {
            sampler,
            train,
            detector,
        } => {
            let h = &c.hbt;
            let stream = emit_stream(&sampler, &train, c.emitter.gamma, seed_for(seed, 0))?;
            let stream = apply_loss(&stream, h.transmission, seed_for(seed, 1))?;
            let (a, b) = beamsplit(&stream, 0.5, seed_for(seed, 2))?;
            let a = detect(&a, &detector, seed_for(seed, 3))?;
            let b = detect(&b, &detector, seed_for(seed, 4))?;
            let hist = coincidence_histogram(&a, &b, h.bin_ps, h.window_ns)?;
            let g = g2_zero(&hist, train.period_ps() / 1e3, h.peak_halfwidth_ns)?;
            Report {
                summary: json!({
                    "g2_source": h.g2,
                    "clicks": [a.len(), b.len()],
                    "g2_zero": to_json(&g),
                }),
                tables: vec![histogram_table("histogram", &hist)],
            }
        }
        Prepared::Hom { setup } => {
            let h = &c.hom;
            let mut t = Table::new("", &["m", "v_raw", "v_raw_se", "m_corrected", "consistent"]);
            let mut hists = Table::new("histograms", &["m", "delay_ps", "parallel", "cross"]);
            let mut results = Vec::new();
            for (i, &m) in h.indistinguishability.iter().enumerate() {
                let streams = hom_simulate_with(&setup, m, h.g2, h.reflectance, h.n_pulses, seed_for(seed, i as u64))?;
                let hp = coincidence_histogram(&streams.parallel.0, &streams.parallel.1, h.bin_ps, h.window_ns)?;
                let hx = coincidence_histogram(&streams.cross.0, &streams.cross.1, h.bin_ps, h.window_ns)?;
                let v = hom_visibility(&hp, &hx, h.period_ns, h.peak_halfwidth_ns)?;
                let rep = correct_indistinguishability(v.v_raw, h.g2, h.reflectance)?;
                t.push(vec![num(m), num(v.v_raw), num(v.std_error), num(rep.m_corrected), json!(rep.consistent)]);
                for (k, (&np, &nx)) in hp.counts.iter().zip(&hx.counts).enumerate() {
                    hists.push(vec![num(m), num(hp.center(k)), json!(np), json!(nx)]);
                }
                results.push(json!({ "m": m, "visibility": to_json(&v), "corrected": to_json(&rep) }));
            }
            Report {
                summary: json!({ "g2": h.g2, "reflectance": h.reflectance, "results": results }),
                tables: vec![t, hists],
            }
        }
        Prepared::DelayHom { e, points } => {
            let fit = fit_indistinguishability(&points, &e)?;
            let mut pts = Table::new("points", &["delay_us", "measured", "model", "residual"]);
            for (&(t, m), r) in points.iter().zip(&fit.residuals) {
                pts.push(vec![num(t), num(m), num(m + r), num(*r)]);
            }
            let n = c.delay_hom.curve_points;
            let t_max = 1.2 * points.iter().map(|p| p.0).fold(0.0, f64::max);
            let mut curve = Table::new("curve", &["delay_us", "indistinguishability"]);
            for i in 0..n {
                let t = t_max * i as f64 / (n - 1) as f64;
                curve.push(vec![num(t), num(indistinguishability(&fit.params, t)?)]);
            }
            Report {
                summary: to_json(&fit),
                tables: vec![pts, curve],
            }
        }
        Prepared::Budget { budget } => {
            let b = &c.budget;
            let report = chain(&budget)?;
            let sys = system_efficiency(
                Measured::new(b.counts_per_s, b.counts_sigma),
                Measured::exact(b.rep_rate_hz),
                Measured::new(b.detector_efficiency, b.detector_sigma),
            )?;
            let th = threshold_check(sys.eta.value.min(1.0), b.detector_efficiency)?;
            let mut t = Table::new("", &["stage", "value", "uncertainty", "cumulative"]);
            for r in &report.rows {
                t.push(vec![json!(r.name), num(r.value), num(r.uncertainty), num(r.cumulative)]);
            }
            Report {
                summary: json!({
                    "chain": to_json(&report),
                    "system_efficiency": to_json(&sys),
                    "threshold": to_json(&th),
                }),
                tables: vec![t],
            }
        }
        Prepared::Dbr { stacks } => {
            let d = &c.dbr;
            let mut t = Table::new("", &["stack", "wavelength_nm", "reflectance"]);
            let mut at_design = Vec::new();
            for (name, stack) in &stacks {
                for i in 0..d.points {
                    let wl = d.wavelength_min_nm + (d.wavelength_max_nm - d.wavelength_min_nm) * i as f64 / (d.points - 1) as f64;
                    t.push(vec![json!(name), num(wl), num(dbr_reflectivity(stack, wl)?)]);
                }
                at_design.push(json!({
                    "stack": name,
                    "design_wavelength_nm": stack.design_wavelength,
                    "reflectance": dbr_reflectivity(stack, stack.design_wavelength)?,
                }));
            }
            Report {
                summary: json!({ "at_design": at_design }),
                tables: vec![t],
            }
        }
        Prepared::Threshold => {
            let th = threshold_check(c.threshold.eta_source, c.threshold.eta_detector)?;
            Report {
                summary: to_json(&th),
                tables: Vec::new(),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
        }
        assert!(matches!("nope".parse::<Scenario>(), Err(CliError::UnknownScenario(_))));
    }

    #[test]
    fn defaults_validate_for_every_scenario() {
        let c = Config::default();
        for s in Scenario::ALL {
            assert!(validate(&c, s).is_empty(), "{s}: {:?}", validate(&c, s));
        }
    }

    #[test]
    fn negative_efficiency_is_one_violation() {
        let mut c = Config::default();
        c.detector.efficiency = -0.1;
        let v = validate(&c, Scenario::Hbt);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].key, "detector.efficiency");
    }

    #[test]
    fn coarse_grid_cites_step_rule() {
        let mut c = Config::default();
        c.pulse.grid_n = 4096;
        c.pulse.grid_dt_ps = 0.1;
        let v = validate(&c, Scenario::Rabi);
        assert!(!v.is_empty());
        assert!(v.iter().all(|x| x.key == "pulse.grid_dt_ps"), "{v:?}");
        assert!(v[0].message.contains("0.05/Ω_max"), "{v:?}");
        assert!(matches!(run(&c, Scenario::Rabi), Err(CliError::Precondition(_))));
    }

    #[test]
    fn narrow_histogram_window_rejected() {
        let mut c = Config::default();
        c.hbt.window_ns = 30.0;
        let v = validate(&c, Scenario::Hbt);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].key, "hbt.window_ns");
    }

    #[test]
    fn unknown_material_named() {
        let mut c = Config::default();
        c.dbr.stack[1].low = "unobtainium".into();
        let v = validate(&c, Scenario::Dbr);
        assert_eq!(v[0].key, "dbr.stack[1].low");
    }

    #[test]
    fn threshold_report() {
        let r = run(&Config::default(), Scenario::Threshold).unwrap();
        assert!((r.summary["source_margin"].as_f64().unwrap() - 0.0453).abs() < 1e-4);
        assert_eq!(r.summary["product_meets_threshold"], json!(false));
    }
}
