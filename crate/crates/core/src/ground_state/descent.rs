//! Normalized gradient flows on the finite-element space.
//!
//! Each step is semi-implicit: the potential `V = |u|^{2*-2} + μ|u|^{q-2}` is
//! frozen, the stiffness is implicit, and a shift `σ` above the current
//! Rayleigh quotient keeps the linear system positive. The iterate is then
//! renormalized to mass `a`.
//!
//! Above the `L²`-critical exponent the flow minimizes `J(u) = max_s Ψ_u(s)`,
//! which is invariant under dilations; the neutral dilation direction is
//! removed by re-centering whenever the fiber maximum drifts from `s = 0`.
//! Below it the flow minimizes the energy itself inside `A_{R₀}`.

use super::{GroundStateResult, Method};
use crate::constants::{ProblemParams, Regime};
use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::fiber::{fiber_report, h_geometry, Fiber};
use crate::radial::{RadialGrid, RadialProfile};
use serde::Serialize;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DescentOptions {
    pub nodes: usize,
    /// `None` picks `40/κ` from the GN-based multiplier guess.
    pub r_max: Option<f64>,
    pub stretch: f64,
    /// Pseudo-time step of the semi-implicit flow.
    pub tau: f64,
    /// Margin added to the Rayleigh shift.
    pub shift: f64,
    pub max_iter: usize,
    /// Target for the constrained-gradient norm.
    pub tol: f64,
    /// Re-center (or re-project) once the fiber point is this far from 0.
    pub gauge_reset: f64,
    /// Stop when the level varies by less than `stagnation_tol` (relative)
    /// over this many iterations.
    pub stagnation_window: usize,
    pub stagnation_tol: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            nodes: 4097,
            r_max: None,
            stretch: 7.0,
            tau: 1000.0,
            shift: 0.05,
            max_iter: 6000,
            tol: 1e-8,
            gauge_reset: 1e-3,
            stagnation_window: 100,
            stagnation_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DescentStop {
    /// Constrained gradient below tolerance.
    Residual,
    /// Level stationary over the stagnation window.
    Stagnation,
}

#[derive(Debug, Clone, Serialize)]
pub struct DescentTrace {
    pub levels: Vec<f64>,
    pub grad_norms: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub stop: DescentStop,
    pub backtracks: usize,
    /// `R₀` of the subcritical run.
    pub r0_bound: Option<f64>,
    /// Newton steps spent polishing the final iterate.
    pub polish_steps: usize,
    /// Discrete residual after polishing.
    pub polished_residual: f64,
}

/// Quantities of one iterate under the dilation `t`.
struct Linearization {
    lambda: f64,
    potential: Vec<f64>,
    stiff_coef: f64,
    residual: f64,
    shift: f64,
}

fn linearize(fe: &FeSpace, u: &[f64], params: &ProblemParams, t: f64, margin: f64) -> Linearization {
    let ts = params.two_star();
    let gq = params.gamma_q() * params.q;
    let (e2, ec, eq) = ((2.0 * t).exp(), (ts * t).exp(), (gq * t).exp());
    let m = fe.mass_weights();
    let potential: Vec<f64> = u
        .iter()
        .map(|v| ec * v.abs().powf(ts - 2.0) + params.mu * eq * v.abs().powf(params.q - 2.0))
        .collect();
    let ku = fe.stiffness_apply(u);
    let mass: f64 = fe.mass_sq(u);
    let g: Vec<f64> = (0..u.len())
        .map(|i| e2 * ku[i] - m[i] * potential[i] * u[i])
        .collect();
    let gu: f64 = g.iter().zip(u).map(|(a, b)| a * b).sum();
    let lam = -gu / mass;
    let last = u.len() - 1;
    let res_sq: f64 = (0..last)
        .filter(|&i| m[i] > 0.0)
        .map(|i| (g[i] + lam * m[i] * u[i]).powi(2) / m[i])
        .sum();
    // Rayleigh quotient of the frozen operator is -λ
    Linearization {
        lambda: -lam,
        potential,
        stiff_coef: e2,
        residual: (res_sq / mass).sqrt(),
        shift: lam.max(0.0) + margin,
    }
}

fn step(fe: &FeSpace, u: &[f64], lin: &Linearization, tau: f64, a: f64) -> Result<Vec<f64>> {
    let s = lin.shift;
    let op = fe.operator(|i| 1.0 + tau * s - tau * lin.potential[i], tau * lin.stiff_coef);
    let m = fe.mass_weights();
    let mut rhs: Vec<f64> = (0..u.len()).map(|i| m[i] * u[i] * (1.0 + tau * s)).collect();
    *rhs.last_mut().expect("nonempty") = 0.0;
    let mut un = op.solve(&rhs)?;
    // the frozen operator may be indefinite and flip the sign; keep u > 0
    let first: f64 = m.iter().zip(&un).map(|(w, v)| w * v).sum();
    if first < 0.0 {
        un.iter_mut().for_each(|v| *v = -*v);
    }
    fe.normalize(&mut un, a)?;
    Ok(un)
}

fn dilate_nodes(fe: &FeSpace, u: &[f64], s: f64, a: f64) -> Result<Vec<f64>> {
    let p = RadialProfile::new(fe.grid().clone(), u.to_vec())?;
    let mut v = p.dilate(s).values();
    *v.last_mut().expect("nonempty") = 0.0;
    fe.normalize(&mut v, a)?;
    Ok(v)
}

fn default_radius(params: &ProblemParams, opts: &DescentOptions) -> Result<f64> {
    if let Some(r) = opts.r_max {
        return Ok(r);
    }
    let kappa = (-super::lambda_guess(params)?).sqrt();
    Ok(40.0 / kappa)
}

fn gaussian(fe: &FeSpace, width: f64, a: f64) -> Result<Vec<f64>> {
    let mut u: Vec<f64> = fe
        .grid()
        .nodes()
        .iter()
        .map(|r| (-0.5 * (r / width).powi(2)).exp())
        .collect();
    *u.last_mut().expect("nonempty") = 0.0;
    fe.normalize(&mut u, a)?;
    Ok(u)
}

/// Polishing stops once the discrete residual is this small.
const POLISH_TOL: f64 = 1e-11;
const POLISH_MAX: usize = 30;

/// Newton's method on `K u - M V(u) u = λ M u` with `Σ mᵢuᵢ² = a²`.
///
/// Descent reaches the level long before the profile itself is accurate,
/// so the last iterate is refined here into a stationary state of the
/// discrete equations. Returns the best iterate seen.
fn newton_polish(fe: &FeSpace, u0: Vec<f64>, params: &ProblemParams) -> Result<(Vec<f64>, usize, f64)> {
    let ts = params.two_star();
    let a2 = params.a * params.a;
    let m = fe.mass_weights();
    let last = u0.len() - 1;
    let mut best_res = linearize(fe, &u0, params, 0.0, 0.0).residual;
    let mut best = u0.clone();
    let mut u = u0;
    let mut steps = 0;
    for k in 1..=POLISH_MAX {
        let lin = linearize(fe, &u, params, 0.0, 0.0);
        let lam = lin.lambda;
        let ku = fe.stiffness_apply(&u);
        let mut f: Vec<f64> = (0..u.len())
            .map(|i| -(ku[i] - m[i] * (lin.potential[i] + lam) * u[i]))
            .collect();
        f[last] = 0.0;
        let jac = fe.operator(
            |i| {
                let v = u[i].abs();
                -((ts - 1.0) * v.powf(ts - 2.0) + params.mu * (params.q - 1.0) * v.powf(params.q - 2.0)) - lam
            },
            1.0,
        );
        let lu = jac.factor()?;
        let x1 = lu.solve(&f);
        let mut mu_vec: Vec<f64> = (0..u.len()).map(|i| m[i] * u[i]).collect();
        mu_vec[last] = 0.0;
        let x2 = lu.solve(&mu_vec);
        let dot = |x: &[f64]| -> f64 { mu_vec.iter().zip(x).map(|(a, b)| a * b).sum() };
        let c = fe.mass_sq(&u) - a2;
        let dlam = (-c - 2.0 * dot(&x1)) / (2.0 * dot(&x2));
        for i in 0..u.len() {
            u[i] += x1[i] + dlam * x2[i];
        }
        fe.normalize(&mut u, params.a)?;
        let res = linearize(fe, &u, params, 0.0, 0.0).residual;
        if !res.is_finite() || res > 2.0 * best_res {
            break;
        }
        if res < best_res {
            best_res = res;
            best = u.clone();
            steps = k;
        }
        if res < POLISH_TOL {
            break;
        }
    }
    Ok((best, steps, best_res))
}

fn finish(
    fe: &FeSpace,
    u: Vec<f64>,
    params: &ProblemParams,
    t: f64,
    trace: &mut DescentTrace,
) -> Result<GroundStateResult> {
    let u = if t != 0.0 { dilate_nodes(fe, &u, t, params.a)? } else { u };
    let (u, steps, res) = newton_polish(fe, u, params)?;
    trace.polish_steps = steps;
    trace.polished_residual = res;
    let norms = fe.norms(&u, params.q);
    let lambda = (norms.grad_sq - norms.crit - params.mu * norms.lq) / (params.a * params.a);
    let profile = RadialProfile::new(fe.grid().clone(), u)?;
    let el = super::el_residual(&profile, params, lambda)?;
    GroundStateResult::assemble(params, Method::Descent, profile, lambda, norms, el, 1)
}

fn fiber_max(fe: &FeSpace, u: &[f64], params: &ProblemParams) -> Result<f64> {
    let r = fiber_report(&fe.norms(u, params.q), params)?;
    Ok(r.maximum().expect("a fiber report always has a maximum").s)
}

/// The level spread over the last window is below tolerance.
fn stagnated(levels: &[f64], opts: &DescentOptions) -> bool {
    let n = levels.len();
    if n <= opts.stagnation_window {
        return false;
    }
    let w = &levels[n - opts.stagnation_window..];
    let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
    hi - lo <= opts.stagnation_tol * hi.abs()
}

/// Minimizes the fiber maximum `J(u) = max_s Ψ_u(s)` over the mass sphere;
/// its infimum is the ground-state level for critical and supercritical
/// exponents. The returned profile is `t_u ⋆ u` on the Pohozaev set.
pub fn fiber_projected_descent(
    params: &ProblemParams,
    opts: &DescentOptions,
) -> Result<(GroundStateResult, DescentTrace)> {
    if params.regime == Regime::Subcritical {
        return Err(Error::domain("fiber-projected descent needs q >= 2 + 4/N"));
    }
    if params.mu < 0.0 {
        return Err(Error::domain("fiber-projected descent needs mu >= 0"));
    }
    let r_max = default_radius(params, opts)?;
    let grid = Arc::new(RadialGrid::graded(params.dim, r_max, opts.nodes, opts.stretch)?);
    let fe = FeSpace::new(grid);
    let mut u = gaussian(&fe, 0.1 * r_max, params.a)?;
    let t0 = fiber_max(&fe, &u, params)?;
    u = dilate_nodes(&fe, &u, t0, params.a)?;
    let mut trace = DescentTrace {
        levels: vec![],
        grad_norms: vec![],
        residuals: vec![],
        iterations: 0,
        stop: DescentStop::Stagnation,
        backtracks: 0,
        r0_bound: None,
        polish_steps: 0,
        polished_residual: f64::NAN,
    };
    let mut t = fiber_max(&fe, &u, params)?;
    for it in 0..opts.max_iter {
        let n = fe.norms(&u, params.q);
        let level = Fiber::new(&n, params).value(t)?;
        let lin = linearize(&fe, &u, params, t, opts.shift);
        trace.levels.push(level);
        trace.grad_norms.push(((2.0 * t).exp() * n.grad_sq).sqrt());
        trace.residuals.push(lin.residual);
        trace.iterations = it;
        if lin.residual < opts.tol {
            trace.stop = DescentStop::Residual;
            return Ok((finish(&fe, u, params, t, &mut trace)?, trace));
        }
        if stagnated(&trace.levels, opts) {
            trace.stop = DescentStop::Stagnation;
            return Ok((finish(&fe, u, params, t, &mut trace)?, trace));
        }
        let mut un = step(&fe, &u, &lin, opts.tau, params.a)?;
        let mut tn = fiber_max(&fe, &un, params)?;
        if tn.abs() > opts.gauge_reset {
            un = dilate_nodes(&fe, &un, tn, params.a)?;
            tn = fiber_max(&fe, &un, params)?;
        }
        u = un;
        t = tn;
    }
    Err(Error::solver(format!(
        "fiber-projected descent did not settle in {} iterations (residual {:e})",
        opts.max_iter,
        trace.residuals.last().copied().unwrap_or(f64::NAN)
    )))
}

/// Energy descent on the mass sphere for the subcritical local minimizer,
/// started from a wide Gaussian inside `A_{R₀}` and periodically moved to
/// the local minimum point `s_u` of its fiber. Leaving `A_{R₀}` is a
/// structural error.
pub fn local_minimize_subcritical(
    params: &ProblemParams,
    opts: &DescentOptions,
) -> Result<(GroundStateResult, DescentTrace)> {
    if params.regime != Regime::Subcritical {
        return Err(Error::domain("the local minimizer exists for q < 2 + 4/N"));
    }
    let geo = h_geometry(params)?;
    let r0 = geo.r0;
    let n = params.dim as f64;
    // |∇u|₂ = a √(N/2) / w for a Gaussian of width w
    let width = 2.0 * params.a * (0.5 * n).sqrt() / r0;
    let r_max = default_radius(params, opts)?.max(10.0 * width);
    let grid = Arc::new(RadialGrid::graded(params.dim, r_max, opts.nodes, opts.stretch)?);
    let fe = FeSpace::new(grid);
    let project = |u: Vec<f64>| -> Result<Vec<f64>> {
        let r = fiber_report(&fe.norms(&u, params.q), params)?;
        let s = r.local_minimum().expect("subcritical report has a minimum").s;
        if s.abs() > opts.gauge_reset {
            dilate_nodes(&fe, &u, s, params.a)
        } else {
            Ok(u)
        }
    };
    let energy = |u: &[f64]| crate::fiber::energy_from_norms(&fe.norms(u, params.q), params);
    let mut u = project(gaussian(&fe, width, params.a)?)?;
    let mut trace = DescentTrace {
        levels: vec![],
        grad_norms: vec![],
        residuals: vec![],
        iterations: 0,
        stop: DescentStop::Residual,
        backtracks: 0,
        r0_bound: Some(r0),
        polish_steps: 0,
        polished_residual: f64::NAN,
    };
    let mut tau = opts.tau;
    let mut level = energy(&u);
    for it in 0..opts.max_iter {
        let g = fe.grad_sq(&u).sqrt();
        if g >= r0 {
            return Err(Error::structural(format!(
                "descent iterate left A_R0: |∇u|₂ = {g} >= R0 = {r0}"
            )));
        }
        let lin = linearize(&fe, &u, params, 0.0, opts.shift);
        trace.levels.push(level);
        trace.grad_norms.push(g);
        trace.residuals.push(lin.residual);
        trace.iterations = it;
        if lin.residual < opts.tol {
            return Ok((finish(&fe, u, params, 0.0, &mut trace)?, trace));
        }
        loop {
            let un = project(step(&fe, &u, &lin, tau, params.a)?)?;
            let e = energy(&un);
            if e <= level {
                u = un;
                level = e;
                tau = (2.0 * tau).min(opts.tau);
                break;
            }
            trace.backtracks += 1;
            tau *= 0.5;
            if tau < 1e-12 * opts.tau {
                // no decrease at any step size: the level is at rounding
                trace.stop = DescentStop::Stagnation;
                return Ok((finish(&fe, u, params, 0.0, &mut trace)?, trace));
            }
        }
    }
    Err(Error::solver(format!(
        "subcritical descent did not converge in {} iterations (residual {:e})",
        opts.max_iter,
        trace.residuals.last().copied().unwrap_or(f64::NAN)
    )))
}
