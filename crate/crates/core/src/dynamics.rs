//! Radial time propagation of `i∂ₜψ + Δψ + μ|ψ|^{q-2}ψ + |ψ|^{2*-2}ψ = 0`.
//!
//! Strang splitting on the finite-element space: Crank–Nicolson half-steps
//! for the linear part, a pointwise phase rotation for the nonlinear part.
//! Both pieces preserve `Σ mᵢ|ψᵢ|²` exactly, so the discrete mass is
//! conserved up to rounding. The step is `dt / 2ᵏ` with the smallest `k`
//! that keeps the nonlinear phase per step below a cap, which lets the
//! factorizations be cached per level.

use crate::constants::{ProblemParams, Regime};
use crate::error::{Error, Result};
use crate::fem::{Factored, FeSpace};
use crate::fiber::{energy_from_norms, fiber_report, pohozaev_from_norms};
use crate::radial::{ProfileNorms, RadialProfile};
use num_complex::Complex64;
use serde::Serialize;
use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

/// Diagnostics of one time level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Diagnostics {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    /// `|∇ψ|₂`.
    pub grad_norm: f64,
    /// `∫|x|²|ψ|²`.
    pub virial: f64,
    pub pohozaev: f64,
    /// `max |ψ|`.
    pub peak: f64,
    /// Step that produced this state; 0 for the initial one.
    pub dt: f64,
}

#[derive(Debug, Clone)]
pub struct WaveState {
    pub psi: Vec<Complex64>,
    pub diagnostics: Diagnostics,
}

impl WaveState {
    /// A real initial datum on the nodes of `fe`, zero at the wall.
    pub fn from_profile(fe: &FeSpace, u: &RadialProfile, params: &ProblemParams) -> Result<Self> {
        let values = fe.project(u)?;
        let psi: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        Self::at(fe, psi, 0.0, params)
    }

    pub fn at(fe: &FeSpace, psi: Vec<Complex64>, t: f64, params: &ProblemParams) -> Result<Self> {
        if psi.len() != fe.len() {
            return Err(Error::domain("state length does not match the space"));
        }
        if psi.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::numeric("non-finite wave function", f64::NAN));
        }
        let diagnostics = diagnose(fe, &psi, t, params);
        Ok(WaveState { psi, diagnostics })
    }

    pub fn modulus(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm()).collect()
    }
}

fn wave_norms(fe: &FeSpace, psi: &[Complex64], q: f64) -> ProfileNorms {
    let modulus: Vec<f64> = psi.iter().map(|z| z.norm()).collect();
    let ku = fe.stiffness_apply(psi);
    let grad_sq: f64 = psi.iter().zip(&ku).map(|(a, b)| (a.conj() * b).re).sum();
    let mut n = fe.norms(&modulus, q);
    n.grad_sq = grad_sq;
    n
}

fn diagnose(fe: &FeSpace, psi: &[Complex64], t: f64, params: &ProblemParams) -> Diagnostics {
    let n = wave_norms(fe, psi, params.q);
    let r = fe.grid().nodes();
    let virial = fe
        .mass_weights()
        .iter()
        .zip(psi)
        .zip(r)
        .map(|((m, z), r)| m * r * r * z.norm_sqr())
        .sum();
    Diagnostics {
        t,
        mass: n.mass_sq,
        energy: energy_from_norms(&n, params),
        grad_norm: n.grad_sq.sqrt(),
        virial,
        pohozaev: pohozaev_from_norms(&n, params),
        peak: psi.iter().map(|z| z.norm()).fold(0.0, f64::max),
        dt: 0.0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PropagateOptions {
    /// Largest step; refinements are `dt / 2ᵏ`.
    pub dt: f64,
    pub t_end: f64,
    /// Bound on `dt · max(μ|ψ|^{q-2} + |ψ|^{2*-2})`.
    pub phase_cap: f64,
    /// Refinement below this step counts as a stall. Time is only
    /// bookkeeping here, so this can sit far below the spacing of `t`.
    pub dt_min: f64,
    /// Halt once `|∇ψ|₂` exceeds this.
    pub grad_ceiling: f64,
    /// `false` propagates the free equation.
    pub nonlinear: bool,
    /// Keep every `record_every`-th step in the trajectory.
    pub record_every: usize,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        PropagateOptions {
            dt: 1e-3,
            t_end: 1.0,
            phase_cap: 0.05,
            dt_min: 1e-30,
            grad_ceiling: f64::INFINITY,
            nonlinear: true,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Halt {
    Completed,
    GradCeiling,
    StepStall,
    /// The core length `(max V)^{-1/2}` shrank below the resolution of
    /// the grid at the origin.
    Unresolved,
    /// Mass drift or non-finite values; the trajectory ends at the last
    /// stable state.
    Instability,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<Diagnostics>,
    pub final_state: WaveState,
    pub halt: Halt,
    pub steps: usize,
    pub smallest_dt: f64,
}

impl Trajectory {
    /// `max |m(t) - m(0)| / m(0)` divided by the elapsed time.
    pub fn mass_drift_rate(&self) -> f64 {
        self.drift_rate(|d| d.mass)
    }

    pub fn energy_drift_rate(&self) -> f64 {
        self.drift_rate(|d| d.energy)
    }

    fn drift_rate(&self, f: impl Fn(&Diagnostics) -> f64) -> f64 {
        let first = &self.samples[0];
        let f0 = f(first);
        let span = self.samples.last().map_or(0.0, |d| d.t - first.t);
        let worst = self
            .samples
            .iter()
            .map(|d| (f(d) - f0).abs())
            .fold(0.0, f64::max);
        worst / f0.abs().max(f64::MIN_POSITIVE) / span.max(1.0)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,mass,energy,grad_norm,virial,pohozaev")?;
        for d in &self.samples {
            writeln!(
                w,
                "{:.12e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                d.t, d.mass, d.energy, d.grad_norm, d.virial, d.pohozaev
            )?;
        }
        Ok(())
    }
}

/// Relative mass drift treated as instability.
const MASS_ALARM: f64 = 1e-6;
/// Cells at the origin the core length must span.
const RESOLUTION_CELLS: f64 = 2.0;

struct Stepper<'a> {
    fe: &'a FeSpace,
    params: ProblemParams,
    base_dt: f64,
    factors: HashMap<u32, Factored<Complex64>>,
}

impl<'a> Stepper<'a> {
    fn factor(&mut self, level: u32) -> Result<&Factored<Complex64>> {
        if !self.factors.contains_key(&level) {
            let half = self.base_dt / 2f64.powi(level as i32) / 2.0;
            let k = Complex64::new(0.0, 0.5 * half);
            let f = self.fe.operator(|_| Complex64::new(1.0, 0.0), k).factor()?;
            self.factors.insert(level, f);
        }
        Ok(&self.factors[&level])
    }

    /// `exp(-i h K)` in Crank–Nicolson form over a half-step `h`.
    fn linear_half(&mut self, psi: &[Complex64], level: u32) -> Result<Vec<Complex64>> {
        let half = self.base_dt / 2f64.powi(level as i32) / 2.0;
        let ku = self.fe.stiffness_apply(psi);
        let m = self.fe.mass_weights();
        let k = Complex64::new(0.0, 0.5 * half);
        let mut rhs: Vec<Complex64> = (0..psi.len()).map(|i| psi[i] * m[i] - k * ku[i]).collect();
        *rhs.last_mut().expect("nonempty") = Complex64::new(0.0, 0.0);
        Ok(self.factor(level)?.solve(&rhs))
    }

    fn potential(&self, z: Complex64) -> f64 {
        let a = z.norm();
        let p = &self.params;
        a.powf(p.two_star() - 2.0) + p.mu * a.powf(p.q - 2.0)
    }
}

/// Propagates `psi0` to `opts.t_end`, calling `observe` after every step.
pub fn propagate_with(
    fe: &FeSpace,
    psi0: &WaveState,
    params: &ProblemParams,
    opts: &PropagateOptions,
    mut observe: impl FnMut(&WaveState),
) -> Result<Trajectory> {
    if !(opts.dt > 0.0 && opts.t_end >= 0.0 && opts.phase_cap > 0.0) {
        return Err(Error::domain("propagation needs dt > 0, t_end >= 0, phase_cap > 0"));
    }
    let mut stepper = Stepper {
        fe,
        params: *params,
        base_dt: opts.dt,
        factors: HashMap::new(),
    };
    let every = opts.record_every.max(1);
    let mass0 = psi0.diagnostics.mass;
    let mut state = psi0.clone();
    let mut samples = vec![state.diagnostics];
    let mut steps = 0;
    let mut smallest_dt = opts.dt;
    let mut halt = Halt::Completed;
    let t0 = state.diagnostics.t;
    let t_end = t0 + opts.t_end;
    let r = fe.grid().nodes();
    let first_cell = r[1] - r[0];
    while t_end - state.diagnostics.t > 1e-9 * opts.dt {
        if state.diagnostics.grad_norm > opts.grad_ceiling {
            halt = Halt::GradCeiling;
            break;
        }
        let vmax = if opts.nonlinear {
            state.psi.iter().map(|&z| stepper.potential(z)).fold(0.0, f64::max)
        } else {
            0.0
        };
        if vmax > 0.0 && vmax.powf(-0.5) < RESOLUTION_CELLS * first_cell {
            halt = Halt::Unresolved;
            break;
        }
        let mut level = 0u32;
        while opts.dt / 2f64.powi(level as i32) * vmax > opts.phase_cap && level < 200 {
            level += 1;
        }
        let mut dt = opts.dt / 2f64.powi(level as i32);
        if dt < opts.dt_min {
            halt = Halt::StepStall;
            break;
        }
        let remaining = t_end - state.diagnostics.t;
        if dt > remaining {
            // a final short step gets its own factorization
            stepper.base_dt = remaining;
            level = 0;
            dt = remaining;
            stepper.factors.clear();
        }
        smallest_dt = smallest_dt.min(dt);
        let mut psi = stepper.linear_half(&state.psi, level)?;
        if opts.nonlinear {
            for z in psi.iter_mut() {
                let phase = dt * stepper.potential(*z);
                *z *= Complex64::from_polar(1.0, phase);
            }
        }
        let psi = stepper.linear_half(&psi, level)?;
        let next = match WaveState::at(fe, psi, state.diagnostics.t + dt, params) {
            Ok(mut s) => {
                s.diagnostics.dt = dt;
                s
            }
            Err(_) => {
                halt = Halt::Instability;
                break;
            }
        };
        if ((next.diagnostics.mass - mass0) / mass0).abs() > MASS_ALARM {
            halt = Halt::Instability;
            break;
        }
        state = next;
        steps += 1;
        observe(&state);
        if steps % every == 0 {
            samples.push(state.diagnostics);
        }
    }
    if samples.last().map(|d| d.t) != Some(state.diagnostics.t) {
        samples.push(state.diagnostics);
    }
    Ok(Trajectory {
        samples,
        final_state: state,
        halt,
        steps,
        smallest_dt,
    })
}

pub fn propagate(
    fe: &FeSpace,
    psi0: &WaveState,
    params: &ProblemParams,
    opts: &PropagateOptions,
) -> Result<Trajectory> {
    propagate_with(fe, psi0, params, opts, |_| {})
}

/// Largest pointwise change of `|ψ|` along a run started from `u`.
#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub max_modulus_change: f64,
    pub mass_drift_rate: f64,
    pub energy_drift_rate: f64,
    pub steps: usize,
    pub halt: Halt,
}

pub fn stationarity(
    u: &RadialProfile,
    params: &ProblemParams,
    opts: &PropagateOptions,
) -> Result<StationarityReport> {
    let fe = FeSpace::new(u.grid().clone());
    let psi0 = WaveState::from_profile(&fe, u, params)?;
    let m0 = psi0.modulus();
    let mut worst = 0.0f64;
    let traj = propagate_with(&fe, &psi0, params, opts, |s| {
        for (z, a) in s.psi.iter().zip(&m0) {
            worst = worst.max((z.norm() - a).abs());
        }
    })?;
    Ok(StationarityReport {
        max_modulus_change: worst,
        mass_drift_rate: traj.mass_drift_rate(),
        energy_drift_rate: traj.energy_drift_rate(),
        steps: traj.steps,
        halt: traj.halt,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ProbeMode {
    /// Dilate by `s` (increasing it if needed) until the fiber maximum of
    /// the datum lies at negative `s`.
    Scaled { s: f64 },
    /// Use the datum as is; requires `E(u) < level` and, from the
    /// `L²`-critical exponent on, `P(u) < 0`.
    BelowLevel { level: f64 },
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeSample {
    pub t: f64,
    /// Sum of the remaining steps up to the halt; stays accurate when
    /// the steps fall below the spacing of `t`.
    pub time_to_halt: f64,
    pub grad_norm: f64,
    pub virial: f64,
    /// Non-uniform second difference of `V`, absent at the ends.
    pub virial_second_diff: Option<f64>,
    pub pohozaev: f64,
    pub peak: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub mode: ProbeMode,
    /// Dilation applied to the input.
    pub dilation: f64,
    /// Fiber maximum location of the propagated datum.
    pub fiber_max: f64,
    pub initial_energy: f64,
    pub initial_pohozaev: f64,
    pub samples: Vec<ProbeSample>,
    pub halt: Halt,
    pub halt_time: f64,
    /// Final over initial `|∇ψ|₂`.
    pub growth: f64,
    /// Times between successive doublings of `|∇ψ|₂` shrink.
    pub accelerating: bool,
    pub pohozaev_negative: bool,
    /// Every interior second difference of `V` is negative.
    pub virial_concave: bool,
    /// Fraction of interior samples where `V''` and `P` share a sign.
    pub virial_sign_agreement: f64,
    /// Growth by at least 10 with an accelerating trend. A trend, not a
    /// proof of a singularity.
    pub blowup: bool,
}

/// Fraction of the mass allowed in the outer tenth of the grid.
const TAIL_MASS: f64 = 1e-10;
const GROWTH_FACTOR: f64 = 10.0;
/// Relative rounding level of the discrete virial sum.
const V_ROUNDING: f64 = 1e-13;

fn tail_fraction(fe: &FeSpace, u: &[f64]) -> f64 {
    let r = fe.grid().nodes();
    let cut = 0.9 * fe.grid().r_max();
    let m = fe.mass_weights();
    let tail: f64 = (0..u.len()).filter(|&i| r[i] > cut).map(|i| m[i] * u[i] * u[i]).sum();
    tail / fe.mass_sq(u)
}

fn doubling_times(samples: &[ProbeSample]) -> Vec<f64> {
    let g0 = samples[0].grad_norm;
    let mut next = 2.0 * g0;
    let mut out = vec![-samples[0].time_to_halt];
    for s in samples {
        while s.grad_norm >= next {
            out.push(-s.time_to_halt);
            next *= 2.0;
        }
    }
    out
}

fn accelerating(samples: &[ProbeSample]) -> bool {
    let times = doubling_times(samples);
    let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.len() >= 3 && gaps.windows(2).all(|w| w[1] < w[0])
}

/// Second differences of `V` on a thinned subsequence whose spacing keeps
/// rounding in `V` below a tenth of the expected `|V''| ≈ 8|P|`.
fn second_differences(samples: &mut [ProbeSample]) {
    let mut keep: Vec<usize> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        let h_min = (4.0 * V_ROUNDING * s.virial.abs() / (0.8 * s.pohozaev.abs().max(1e-300))).sqrt();
        match keep.last() {
            Some(&j) if samples[j].time_to_halt - s.time_to_halt < h_min => {}
            _ => keep.push(i),
        }
    }
    for w in keep.windows(3) {
        let (a, b, c) = (samples[w[0]], samples[w[1]], samples[w[2]]);
        let (h0, h1) = (a.time_to_halt - b.time_to_halt, b.time_to_halt - c.time_to_halt);
        let d = 2.0 * (h0 * (c.virial - b.virial) - h1 * (b.virial - a.virial)) / (h0 * h1 * (h0 + h1));
        samples[w[1]].virial_second_diff = Some(d);
    }
}

/// Propagates a datum chosen by `mode` and reports the blow-up trend.
pub fn blowup_probe(
    u: &RadialProfile,
    params: &ProblemParams,
    mode: ProbeMode,
    opts: &PropagateOptions,
) -> Result<ProbeReport> {
    let fe = FeSpace::new(u.grid().clone());
    let mass_err = (u.norms(params.q)?.mass_sq.sqrt() / params.a - 1.0).abs();
    if mass_err > 1e-4 {
        return Err(Error::domain(format!("datum is not on the mass sphere (relative error {mass_err:e})")));
    }
    let prepare = |s: f64| -> Result<Vec<f64>> {
        let mut v = fe.project(&u.dilate(s))?;
        fe.normalize(&mut v, params.a)?;
        Ok(v)
    };
    let fiber_max_of = |v: &[f64]| -> Result<f64> {
        let r = fiber_report(&fe.norms(v, params.q), params)?;
        Ok(r.maximum().expect("a fiber report always has a maximum").s)
    };
    let (dilation, datum) = match mode {
        ProbeMode::Scaled { s } => {
            let mut s = s;
            let mut v = prepare(s)?;
            let mut tries = 0;
            while fiber_max_of(&v)? >= 0.0 {
                tries += 1;
                if tries > 40 {
                    return Err(Error::domain("no dilation moved the fiber maximum below zero"));
                }
                s += 0.25;
                v = prepare(s)?;
            }
            (s, v)
        }
        ProbeMode::BelowLevel { level } => {
            let v = prepare(0.0)?;
            let n = fe.norms(&v, params.q);
            let e = energy_from_norms(&n, params);
            if !(e < level) {
                return Err(Error::domain(format!("E(u) = {e} is not below the level {level}")));
            }
            let p = pohozaev_from_norms(&n, params);
            if params.regime != Regime::Subcritical && !(p < 0.0) {
                return Err(Error::domain(format!("P(u) = {p} is not negative")));
            }
            (0.0, v)
        }
    };
    let tail = tail_fraction(&fe, &datum);
    if tail > TAIL_MASS {
        return Err(Error::domain(format!(
            "datum is not localized on the grid (outer mass fraction {tail:e}); the virial would be truncated"
        )));
    }
    let fiber_max = fiber_max_of(&datum)?;
    let profile = RadialProfile::new(Arc::clone(fe.grid()), datum)?;
    let psi0 = WaveState::from_profile(&fe, &profile, params)?;
    let opts = PropagateOptions {
        record_every: 1,
        ..*opts
    };
    let traj = propagate(&fe, &psi0, params, &opts)?;
    let mut samples: Vec<ProbeSample> = traj
        .samples
        .iter()
        .map(|d| ProbeSample {
            t: d.t,
            time_to_halt: 0.0,
            grad_norm: d.grad_norm,
            virial: d.virial,
            virial_second_diff: None,
            pohozaev: d.pohozaev,
            peak: d.peak,
        })
        .collect();
    let mut tau = 0.0;
    for i in (0..samples.len()).rev() {
        samples[i].time_to_halt = tau;
        tau += traj.samples[i].dt;
    }
    second_differences(&mut samples);
    let growth = samples.last().expect("nonempty").grad_norm / samples[0].grad_norm;
    let accelerating = accelerating(&samples);
    let interior: Vec<&ProbeSample> = samples.iter().filter(|s| s.virial_second_diff.is_some()).collect();
    let agree = interior
        .iter()
        .filter(|s| s.virial_second_diff.expect("filtered").signum() == s.pohozaev.signum())
        .count();
    Ok(ProbeReport {
        mode,
        dilation,
        fiber_max,
        initial_energy: psi0.diagnostics.energy,
        initial_pohozaev: psi0.diagnostics.pohozaev,
        halt: traj.halt,
        halt_time: traj.final_state.diagnostics.t,
        growth,
        accelerating,
        pohozaev_negative: samples.iter().all(|s| s.pohozaev < 0.0),
        virial_concave: interior.iter().all(|s| s.virial_second_diff.expect("filtered") < 0.0),
        virial_sign_agreement: if interior.is_empty() {
            0.0
        } else {
            agree as f64 / interior.len() as f64
        },
        blowup: growth >= GROWTH_FACTOR && accelerating,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::RadialGrid;

    #[test]
    fn free_gaussian_follows_the_width_law() {
        let p = ProblemParams::new(3, 4.0, 1.0, 0.0).unwrap();
        let fe = FeSpace::new(Arc::new(RadialGrid::graded(3, 20.0, 4001, 3.0).unwrap()));
        let u = RadialProfile::from_fn(fe.grid().clone(), |r| (-0.5 * r * r).exp()).unwrap();
        let psi0 = WaveState::from_profile(&fe, &u, &p).unwrap();
        let opts = PropagateOptions {
            nonlinear: false,
            dt: 1e-3,
            ..Default::default()
        };
        let traj = propagate(&fe, &psi0, &p, &opts).unwrap();
        let v0 = traj.samples[0].virial;
        let worst = traj
            .samples
            .iter()
            .map(|d| (d.virial / (v0 * (1.0 + 4.0 * d.t * d.t)) - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-4, "{worst}");
        assert!(traj.mass_drift_rate() < 1e-12);
    }

    #[test]
    fn doubling_gaps_detect_acceleration() {
        let mk = |t: f64, g: f64| ProbeSample {
            t,
            time_to_halt: 100.0 - t,
            grad_norm: g,
            virial: 0.0,
            virial_second_diff: None,
            pohozaev: -1.0,
            peak: 1.0,
        };
        let fast: Vec<ProbeSample> = (0..100).map(|i| i as f64 * 0.0099).map(|t| mk(t, 1.0 / (1.0 - t))).collect();
        assert!(accelerating(&fast));
        let slow: Vec<ProbeSample> = (0..100).map(|i| mk(i as f64, 1.0 + i as f64)).collect();
        assert!(!accelerating(&slow));
    }

    #[test]
    fn second_difference_of_a_parabola() {
        let mut s: Vec<ProbeSample> = [0.0, 0.1, 0.25, 0.3]
            .iter()
            .map(|&t| ProbeSample {
                t,
                time_to_halt: 0.3 - t,
                grad_norm: 1.0,
                virial: 1.0 - 3.0 * t * t,
                virial_second_diff: None,
                pohozaev: -1.0,
                peak: 1.0,
            })
            .collect();
        second_differences(&mut s);
        assert!((s[1].virial_second_diff.unwrap() + 6.0).abs() < 1e-10);
        assert!(s[0].virial_second_diff.is_none());
    }
}
