//! Normalized ground states: shooting with mass matching, the homogeneous
//! bubble route, fiber-projected descent, μ-sweeps and the defocusing scan.
//!
//! Every solver returns a [`GroundStateResult`] whose certification flags
//! are recomputed from the final norms, never copied from the solver.

mod descent;
mod sweep;

pub use descent::{
    fiber_projected_descent, local_minimize_subcritical, DescentOptions, DescentStop, DescentTrace,
};
pub use sweep::{defocusing_check, mu_sweep, DefocusingOptions, DefocusingReport, ScanCandidate, SweepResult, SweepRow};

use crate::bubbles::bubble_value;
use crate::constants::{
    admissible, bubble_moment, gn_constant, sobolev_constant, BubbleMoment, ProblemParams, Regime,
    SOBOLEV_QUAD_TOL,
};
use crate::error::{Error, Result};
use crate::fiber::{classify_norms, energy_from_norms, h_geometry, pohozaev_from_norms, PohozaevClass};
use crate::ode::Tolerances;
use crate::radial::{ProfileNorms, RadialGrid, RadialProfile, DEFAULT_NODES, DEFAULT_STRETCH};
use crate::radial_ode::{RadialOde, Shot, ShotOutcome};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// `|P(u)| < POHOZAEV_TOL·|∇u|₂²` certifies membership in the Pohozaev set.
pub const POHOZAEV_TOL: f64 = 1e-5;
/// Relative mass error allowed on a returned solution.
pub const MASS_TOL: f64 = 1e-6;
/// Relative tolerance on the tail log-derivative against `-κ - (N-1)/(2r)`.
pub const DECAY_BAND: f64 = 0.05;
/// Fractions of the cut radius over which the tail law is tested.
pub const DECAY_WINDOW: (f64, f64) = (0.4, 0.7);
pub const SHOOT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Method {
    Shooting,
    Descent,
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Certification {
    pub lambda_negative: bool,
    pub pohozaev_zero: bool,
    pub level_window: bool,
    pub positive_decreasing: bool,
}

impl Certification {
    pub fn all(&self) -> bool {
        self.lambda_negative && self.pohozaev_zero && self.level_window && self.positive_decreasing
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundStateResult {
    pub params: ProblemParams,
    pub method: Method,
    #[serde(skip)]
    pub profile: RadialProfile,
    pub lambda: f64,
    pub energy_level: f64,
    pub norms: ProfileNorms,
    /// `P(u)`; certified against `POHOZAEV_TOL·|∇u|₂²`.
    pub pohozaev_residual: f64,
    /// `|λa² - μ(γ_q-1)|u|_q^q| / (|λ| a²)`.
    pub multiplier_residual: f64,
    /// Relative `L²` residual of the stationary equation on the sampling grid.
    pub el_residual: f64,
    pub fiber_class: PohozaevClass,
    pub mass_error: f64,
    pub certified: Certification,
    pub u0: f64,
    /// Mass-matching brackets found; more than one means a selection was made.
    pub brackets: usize,
}

impl GroundStateResult {
    /// Builds a result from final norms and recomputes every check.
    pub(crate) fn assemble(
        params: &ProblemParams,
        method: Method,
        profile: RadialProfile,
        lambda: f64,
        norms: ProfileNorms,
        el_residual: f64,
        brackets: usize,
    ) -> Result<Self> {
        let energy = energy_from_norms(&norms, params);
        let p = pohozaev_from_norms(&norms, params);
        let gamma = params.gamma_q();
        let a2 = params.a * params.a;
        let identity = lambda * a2 - params.mu * (gamma - 1.0) * norms.lq;
        let multiplier_residual = if lambda == 0.0 {
            identity.abs()
        } else {
            identity.abs() / (lambda.abs() * a2)
        };
        let level = params.homogeneous_level()?;
        let level_window = match params.regime {
            Regime::Subcritical => energy < 0.0,
            _ => energy > 0.0 && energy < level,
        };
        let u0 = profile.values()[0];
        let certified = Certification {
            lambda_negative: lambda < 0.0,
            pohozaev_zero: p.abs() < POHOZAEV_TOL * norms.grad_sq,
            level_window,
            positive_decreasing: positive_decreasing(&profile),
        };
        Ok(GroundStateResult {
            params: *params,
            method,
            lambda,
            energy_level: energy,
            norms,
            pohozaev_residual: p,
            multiplier_residual,
            el_residual,
            fiber_class: classify_norms(&norms, params)?,
            mass_error: (norms.mass_sq.sqrt() - params.a).abs(),
            certified,
            u0,
            brackets,
            profile,
        })
    }

    /// The structural predictions for this regime; violations are errors.
    pub fn check_predictions(&self) -> Result<()> {
        let c = &self.certified;
        let mut failed = Vec::new();
        if self.params.mu > 0.0 && !c.lambda_negative {
            failed.push(format!("lambda = {} is not negative", self.lambda));
        }
        if !c.pohozaev_zero {
            failed.push(format!("Pohozaev residual {:e}", self.pohozaev_residual));
        }
        if !c.level_window {
            failed.push(format!("level {} outside the window", self.energy_level));
        }
        if !c.positive_decreasing {
            failed.push("profile is not positive and decreasing".into());
        }
        let expected = match self.params.regime {
            Regime::Subcritical => PohozaevClass::Pplus,
            _ => PohozaevClass::Pminus,
        };
        if self.params.mu > 0.0 && self.fiber_class != expected {
            failed.push(format!("fiber class {:?}, expected {expected:?}", self.fiber_class));
        }
        if failed.is_empty() {
            Ok(())
        } else {
            Err(Error::structural(failed.join("; ")))
        }
    }
}

/// Dilation does not change the shape, so the base samples are checked.
fn positive_decreasing(u: &RadialProfile) -> bool {
    let v = u.base_values();
    let top = v.iter().cloned().fold(0.0, f64::max);
    let slack = 1e-10 * top;
    let last = v.len() - 1;
    v[..last].iter().all(|&x| x > 0.0) && v.windows(2).all(|w| w[1] <= w[0] + slack)
}

/// Sampling grid for returned profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridOptions {
    pub nodes: usize,
    /// `None` lets the solver choose from the decay length.
    pub r_max: Option<f64>,
    pub stretch: f64,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            nodes: DEFAULT_NODES,
            r_max: None,
            stretch: DEFAULT_STRETCH,
        }
    }
}

/// The radial ODE `u'' + (N-1)/r u' + λu + μ|u|^{q-2}u + |u|^{2*-2}u = 0`.
pub fn stationary_ode(params: &ProblemParams, lambda: f64) -> Result<RadialOde> {
    RadialOde::new(
        params.dim,
        lambda,
        vec![(params.mu, params.q), (1.0, params.two_star())],
    )
}

fn shot_tolerances() -> Tolerances {
    Tolerances {
        rtol: SHOOT_RTOL,
        atol: 1e-15,
        ..Default::default()
    }
}

/// Integration radius for a decay rate `κ = √(-λ)`.
fn shot_radius(lambda: f64) -> f64 {
    if lambda < 0.0 {
        80.0 / (-lambda).sqrt()
    } else {
        200.0
    }
}

/// Whether a shot follows a positive decaying solution: an exponential tail
/// within `DECAY_BAND` over `DECAY_WINDOW` for `λ < 0`, a shot that stays
/// positive and decreasing to a small value otherwise.
pub fn looks_decaying(shot: &Shot, dim: usize) -> bool {
    let u_end = shot.knots().last().map_or(shot.u0, |k| k[1]);
    if shot.lambda < 0.0 {
        let kappa = (-shot.lambda).sqrt();
        u_end < 1e-6 * shot.u0
            && shot
                .tail_log_derivative_error(kappa, dim, DECAY_WINDOW)
                .is_some_and(|e| e < DECAY_BAND)
    } else {
        shot.outcome == ShotOutcome::Decaying && u_end < 1e-3 * shot.u0
    }
}

/// Threshold between an undershooting and a crossing shot.
pub(crate) fn ground_shot_in(ode: &RadialOde, lo: Shot, hi: Shot, r_max: f64) -> Result<Shot> {
    ode.bisect_threshold(lo, hi, r_max, &shot_tolerances())
}

/// One shot of the stationary equation from `u(0) = u0`.
pub fn shoot(params: &ProblemParams, lambda: f64, u0: f64, r_max: f64) -> Result<Shot> {
    stationary_ode(params, lambda)?.shoot(u0, r_max, &shot_tolerances())
}

/// Height where the nonlinearity starts to balance `|λ| u`.
fn balance_height(params: &ProblemParams, lambda: f64) -> f64 {
    let l = lambda.abs().max(1e-12);
    let crit = l.powf(1.0 / (params.two_star() - 2.0));
    if params.mu > 0.0 {
        crit.min((l / params.mu).powf(1.0 / (params.q - 2.0)))
    } else {
        crit
    }
}

/// First undershoot/crossing threshold above the linear regime, located to
/// machine precision; `hint` is a nearby threshold from a previous solve.
/// A threshold whose shot has no exponential tail (a concentrating
/// spurious transition) counts as none.
pub fn ground_shot(params: &ProblemParams, lambda: f64, hint: Option<f64>) -> Result<Option<Shot>> {
    Ok(threshold_shot(params, lambda, hint)?.filter(|s| looks_decaying(s, params.dim)))
}

fn threshold_shot(params: &ProblemParams, lambda: f64, hint: Option<f64>) -> Result<Option<Shot>> {
    let ode = stationary_ode(params, lambda)?;
    let tol = shot_tolerances();
    let r_max = shot_radius(lambda);
    if let Some(h) = hint {
        let lo = ode.shoot(0.9 * h, r_max, &tol)?;
        if lo.outcome != ShotOutcome::Crossing {
            let hi = ode.shoot(1.1 * h, r_max, &tol)?;
            if hi.outcome == ShotOutcome::Crossing {
                return ode.bisect_threshold(lo, hi, r_max, &tol).map(Some);
            }
        }
    }
    let start = 1e-2 * balance_height(params, lambda);
    ode.threshold(start, 1.25, 1e8, r_max, &tol)
}

/// GN-based guess `|λ| ≈ μ(1-γ_q)|u|_q^q/a²` with the `L^q` norm at
/// equality in the Gagliardo–Nirenberg inequality.
fn lambda_guess(params: &ProblemParams) -> Result<f64> {
    let g = match params.regime {
        Regime::Subcritical => h_geometry(params)?.t_local_min.powi(2),
        _ => sobolev_constant(params.dim)?.powf(params.dim as f64 / 2.0),
    };
    let gamma = params.gamma_q();
    let cq = gn_constant(params.dim, params.q)?.powf(params.q);
    let lq = cq * g.powf(0.5 * gamma * params.q) * params.a.powf(params.mass_exponent());
    Ok(-(params.mu.abs() * (1.0 - gamma) * lq / (params.a * params.a)).max(1e-10))
}

/// One point of the mass curve `λ ↦ |u_λ|₂²`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MassSample {
    pub lambda: f64,
    pub u0: Option<f64>,
    pub mass_sq: Option<f64>,
}

fn sample_masses(params: &ProblemParams, lambdas: &[f64]) -> Result<Vec<MassSample>> {
    lambdas
        .par_iter()
        .map(|&l| {
            let s = ground_shot(params, l, None)?;
            Ok(MassSample {
                lambda: l,
                u0: s.as_ref().map(|s| s.u0),
                mass_sq: s.map(|s| s.integrals.mass_sq),
            })
        })
        .collect()
}

/// Refines a mass bracket in `ln|λ|` by the Illinois variant of regula falsi.
fn refine_lambda(params: &ProblemParams, lo: MassSample, hi: MassSample) -> Result<Shot> {
    let a2 = params.a * params.a;
    let f = |m: f64| m - a2;
    let mut x0 = (-lo.lambda).ln();
    let mut x1 = (-hi.lambda).ln();
    let mut f0 = f(lo.mass_sq.unwrap_or(f64::NAN));
    let mut f1 = f(hi.mass_sq.unwrap_or(f64::NAN));
    let mut hint = lo.u0;
    let mut best: Option<Shot> = None;
    let mut side = 0i8;
    for _ in 0..120 {
        let mut x = (x0 * f1 - x1 * f0) / (f1 - f0);
        if !x.is_finite() || x <= x0.min(x1) || x >= x0.max(x1) {
            x = 0.5 * (x0 + x1);
        }
        let shot = match ground_shot(params, -x.exp(), hint)? {
            Some(s) => s,
            None => {
                return Err(Error::solver(format!(
                    "threshold lost inside the mass bracket at lambda = {}",
                    -x.exp()
                )))
            }
        };
        hint = Some(shot.u0);
        let fx = f(shot.integrals.mass_sq);
        let done = fx.abs() <= 1e-12 * a2 || (x1 - x0).abs() <= 1e-14 * x.abs().max(1.0);
        best = Some(shot);
        if done {
            break;
        }
        if (fx > 0.0) == (f1 > 0.0) {
            x1 = x;
            f1 = fx;
            if side == 1 {
                f0 *= 0.5;
            }
            side = 1;
        } else {
            x0 = x;
            f0 = fx;
            if side == -1 {
                f1 *= 0.5;
            }
            side = -1;
        }
    }
    let shot = best.expect("at least one iteration ran");
    let err = (shot.integrals.mass_sq.sqrt() - params.a).abs();
    if err > MASS_TOL * params.a {
        return Err(Error::numeric("mass matching did not converge", err / params.a));
    }
    Ok(shot)
}

/// Default λ scan: `λ₀ 2^k` around the GN-based guess.
fn lambda_scan(params: &ProblemParams, widen: usize) -> Result<Vec<f64>> {
    let l0 = lambda_guess(params)?;
    let k = 8 * (widen as i32 + 1);
    Ok((-k..=k).rev().map(|j| l0 * 2f64.powi(j)).collect())
}

/// The mass curve can end (no decaying threshold beyond some λ) before it
/// crosses `a²` on the grid. Bisects toward the end of the curve until a
/// sample on the other side of `a²` appears.
fn probe_edge(params: &ProblemParams, known: MassSample, missing: MassSample) -> Result<Option<MassSample>> {
    let a2 = params.a * params.a;
    let side = known.mass_sq.expect("known sample has a mass") > a2;
    let (mut good, mut bad) = ((-known.lambda).ln(), (-missing.lambda).ln());
    let mut hint = known.u0;
    for _ in 0..48 {
        let x = 0.5 * (good + bad);
        match ground_shot(params, -x.exp(), hint)? {
            None => bad = x,
            Some(s) => {
                let m = s.integrals.mass_sq;
                if (m > a2) != side {
                    return Ok(Some(MassSample {
                        lambda: -x.exp(),
                        u0: Some(s.u0),
                        mass_sq: Some(m),
                    }));
                }
                hint = Some(s.u0);
                good = x;
            }
        }
    }
    Ok(None)
}

fn brackets_in(samples: &[MassSample], a2: f64) -> Vec<(MassSample, MassSample)> {
    samples
        .windows(2)
        .filter_map(|w| match (w[0].mass_sq, w[1].mass_sq) {
            (Some(m0), Some(m1)) if (m0 > a2) != (m1 > a2) => Some((w[0], w[1])),
            _ => None,
        })
        .collect()
}

/// Mass curve used to diagnose bracket failures.
fn describe_curve(samples: &[MassSample]) -> String {
    samples
        .iter()
        .map(|s| match s.mass_sq {
            Some(m) => format!("({:.3e}, {:.4e})", s.lambda, m),
            None => format!("({:.3e}, none)", s.lambda),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Samples a shot on a graded grid reaching `r_max`.
fn sample_shot(params: &ProblemParams, shot: &Shot, grid: &GridOptions) -> Result<RadialProfile> {
    let r_max = grid.r_max.unwrap_or(shot.r_end);
    let g = Arc::new(RadialGrid::graded(params.dim, r_max, grid.nodes, grid.stretch)?);
    RadialProfile::from_fn(g, |r| shot.value_at(r))
}

/// Relative `L²` residual of `Δu + λu + μu^{q-1} + u^{2*-1}` over the part
/// of the grid where `u` is resolved (`r ≤ 0.8 r_max`).
pub fn el_residual(u: &RadialProfile, params: &ProblemParams, lambda: f64) -> Result<f64> {
    let m = u.materialize();
    let grid = m.grid();
    let v = m.base_values();
    let lap = grid.laplacian(v);
    let cut = 0.8 * grid.r_max();
    let ts = params.two_star();
    let mut res = Vec::with_capacity(v.len());
    let mut reference = Vec::with_capacity(v.len());
    for ((&r, &x), &l) in grid.nodes().iter().zip(v).zip(&lap) {
        if r > cut {
            res.push(0.0);
            reference.push(0.0);
            continue;
        }
        let f = lambda * x + params.mu * x.abs().powf(params.q - 2.0) * x + x.abs().powf(ts - 2.0) * x;
        res.push((l + f).powi(2));
        reference.push(l * l);
    }
    Ok((grid.integrate(&res)? / grid.integrate(&reference)?).sqrt())
}

/// Mass matching: finds `λ < 0` whose decaying shooting solution has
/// `|u|₂ = a`. Every bracket in the scan is refined; the lowest-energy
/// solution is returned and `brackets` records how many were found.
pub fn match_mass(
    params: &ProblemParams,
    lambda_bracket: Option<(f64, f64)>,
    grid: &GridOptions,
) -> Result<GroundStateResult> {
    if params.mu == 0.0 {
        return homogeneous_ground_state(params, grid);
    }
    if params.mu > 0.0 && !admissible(params)? {
        return Err(Error::domain(format!(
            "mu a^{{(1-γ)q}} = {} is not below alpha",
            params.mu * params.a.powf(params.mass_exponent())
        )));
    }
    if params.mu < 0.0 {
        return Err(Error::domain(
            "mass matching follows the focusing branch; use the defocusing scan for mu < 0",
        ));
    }
    let a2 = params.a * params.a;
    let mut samples = Vec::new();
    let mut found = Vec::new();
    for widen in 0..3 {
        let lambdas = match lambda_bracket {
            Some((lo, hi)) => {
                if !(lo < hi && hi < 0.0) {
                    return Err(Error::domain("lambda bracket must satisfy lo < hi < 0"));
                }
                let n = 24;
                (0..=n)
                    .map(|k| -((-lo).ln() + ((-hi).ln() - (-lo).ln()) * k as f64 / n as f64).exp())
                    .collect()
            }
            None => lambda_scan(params, widen)?,
        };
        samples = sample_masses(params, &lambdas)?;
        let edges: Vec<(MassSample, MassSample)> = samples
            .windows(2)
            .filter_map(|w| match (w[0].mass_sq, w[1].mass_sq) {
                (Some(_), None) => Some((w[0], w[1])),
                (None, Some(_)) => Some((w[1], w[0])),
                _ => None,
            })
            .collect();
        for (known, missing) in edges {
            if let Some(extra) = probe_edge(params, known, missing)? {
                samples.push(extra);
            }
        }
        samples.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        found = brackets_in(&samples, a2);
        if !found.is_empty() || lambda_bracket.is_some() {
            break;
        }
    }
    if found.is_empty() {
        return Err(Error::solver(format!(
            "no mass bracket found; mass curve (lambda, |u|²): {}",
            describe_curve(&samples)
        )));
    }
    let shots: Vec<Shot> = found
        .par_iter()
        .map(|&(lo, hi)| refine_lambda(params, lo, hi))
        .collect::<Result<_>>()?;
    let mut results = shots
        .iter()
        .map(|s| from_shot(params, s, grid, found.len()))
        .collect::<Result<Vec<_>>>()?;
    results.sort_by(|a, b| a.energy_level.total_cmp(&b.energy_level));
    Ok(results.swap_remove(0))
}

fn from_shot(params: &ProblemParams, shot: &Shot, grid: &GridOptions, brackets: usize) -> Result<GroundStateResult> {
    let lambda = shot.lambda;
    let it = &shot.integrals;
    let norms = ProfileNorms {
        grad_sq: it.grad_sq,
        mass_sq: it.mass_sq,
        lq: it.powers[0],
        crit: it.powers[1],
    };
    let profile = sample_shot(params, shot, grid)?;
    let el = el_residual(&profile, params, lambda)?;
    let mut r = GroundStateResult::assemble(params, Method::Shooting, profile, lambda, norms, el, brackets)?;
    r.u0 = shot.u0;
    Ok(r)
}

/// The `μ = 0` problem: for `N ≥ 5` the mass-`a` normalized bubble with
/// `λ = 0` and level `S^{N/2}/N`; for `N = 3, 4` there is no positive
/// solution in `L²`, reported as a domain error.
pub fn homogeneous_ground_state(params: &ProblemParams, grid: &GridOptions) -> Result<GroundStateResult> {
    if params.mu != 0.0 {
        return Err(Error::domain("the homogeneous route needs mu = 0"));
    }
    let dim = params.dim;
    if dim < 5 {
        return Err(Error::domain(format!(
            "for mu = 0 and N = {dim} the bubbles are not in L², so there is no positive solution with prescribed mass"
        )));
    }
    let n = dim as f64;
    let c = (n * (n - 2.0)).powf(0.25 * (n - 2.0));
    let m1 = bubble_moment(dim, 1.0, BubbleMoment::Mass, SOBOLEV_QUAD_TOL)?;
    let eps = params.a / (c * m1.sqrt());
    let g1 = bubble_moment(dim, 1.0, BubbleMoment::Gradient, SOBOLEV_QUAD_TOL)?;
    let c1 = bubble_moment(dim, 1.0, BubbleMoment::Critical, SOBOLEV_QUAD_TOL)?;
    let q1 = bubble_moment(dim, 1.0, BubbleMoment::Power(params.q), SOBOLEV_QUAD_TOL)?;
    // |U_ε|_p^p = ε^{N - p(N-2)/2} |U_1|_p^p
    let scale = |p: f64| eps.powf(n - 0.5 * p * (n - 2.0));
    let ts = params.two_star();
    let norms = ProfileNorms {
        grad_sq: c * c * g1,
        mass_sq: c * c * eps * eps * m1,
        lq: c.powf(params.q) * scale(params.q) * q1,
        crit: c.powf(ts) * c1,
    };
    let r_max = grid.r_max.unwrap_or(200.0 * eps);
    let g = Arc::new(RadialGrid::graded(dim, r_max, grid.nodes, grid.stretch)?);
    let profile = RadialProfile::from_fn(g, |r| c * bubble_value(dim, eps, r))?;
    let el = el_residual(&profile, params, 0.0)?;
    GroundStateResult::assemble(params, Method::Homogeneous, profile, 0.0, norms, el, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p341() -> ProblemParams {
        ProblemParams::new(3, 4.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn bubble_is_reproduced_by_shooting() {
        let p = ProblemParams::new(3, 4.0, 1.0, 0.0).unwrap();
        let eps: f64 = 0.5;
        let u0 = 3f64.powf(0.25) * eps.powf(-0.5);
        let s = shoot(&p, 0.0, u0, 30.0).unwrap();
        assert_eq!(s.outcome, ShotOutcome::Decaying);
        for r in [0.0, 0.1, 0.5, 1.0, 3.0, 10.0, 25.0] {
            let exact = 3f64.powf(0.25) * bubble_value(3, eps, r);
            assert!((s.value_at(r) / exact - 1.0).abs() < 1e-8, "r = {r}");
        }
    }

    #[test]
    fn small_heights_follow_the_linear_regime() {
        let s = shoot(&p341(), -0.265, 1e-8, shot_radius(-0.265)).unwrap();
        // the linear solution grows like sinh(κr)/r and turns up
        assert_eq!(s.outcome, ShotOutcome::Blowing);
    }

    #[test]
    fn ground_state_threshold_is_bracketed() {
        let s = ground_shot(&p341(), -0.265, None).unwrap().unwrap();
        let above = shoot(&p341(), -0.265, s.u0 * (1.0 + 1e-10), shot_radius(-0.265)).unwrap();
        assert_ne!(s.outcome, ShotOutcome::Crossing);
        assert_eq!(above.outcome, ShotOutcome::Crossing);
    }

    #[test]
    fn concentrating_threshold_is_rejected() {
        // a transition exists near u0 ~ 1e7, but its shot has no decaying tail
        assert!(threshold_shot(&p341(), -1.0, None).unwrap().is_some());
        assert!(ground_shot(&p341(), -1.0, None).unwrap().is_none());
    }

    #[test]
    fn matched_ground_state_is_certified() {
        let r = match_mass(&p341(), None, &GridOptions::default()).unwrap();
        assert!(r.certified.all(), "{:?}", r.certified);
        assert!(r.mass_error < MASS_TOL);
        assert!(r.multiplier_residual < 1e-5);
        assert_eq!(r.fiber_class, PohozaevClass::Pminus);
        assert!(r.el_residual < 1e-4, "{}", r.el_residual);
        r.check_predictions().unwrap();
    }

    #[test]
    fn homogeneous_route_in_dimension_five() {
        let p = ProblemParams::new(5, 3.0, 0.7, 0.0).unwrap();
        let r = homogeneous_ground_state(&p, &GridOptions::default()).unwrap();
        let level = p.homogeneous_level().unwrap();
        assert!((r.energy_level / level - 1.0).abs() < 1e-10);
        assert!(r.mass_error < 1e-12);
        let truncated = crate::fiber::energy(&r.profile, &p).unwrap();
        assert!((truncated / level - 1.0).abs() < 1e-3, "{truncated} {level}");
    }

    #[test]
    fn homogeneous_route_rejects_low_dimensions() {
        let p = ProblemParams::new(4, 2.5, 1.0, 0.0).unwrap();
        assert!(matches!(
            homogeneous_ground_state(&p, &GridOptions::default()),
            Err(Error::Domain(_))
        ));
    }
}
