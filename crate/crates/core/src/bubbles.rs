//! Aubin–Talenti bubbles, their smooth truncations `u_ε = φU_ε`, the
//! mass-normalized test functions `v_ε`, and the small-ε asymptotics of
//! their norms.

use crate::constants::{
    bubble_moment, bubble_moment_on, sobolev_constant, sphere_area, two_star, admissible,
    BubbleMoment, ProblemParams, Regime,
};
use crate::error::{Error, Result};
use crate::fiber::fiber_report;
use crate::quadrature::tanh_sinh;
use crate::radial::{ProfileNorms, RadialGrid, RadialProfile};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::FRAC_PI_2;
use std::sync::Arc;

pub const DEFAULT_EPS_LIST: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];
const QUAD_TOL: f64 = 1e-13;

fn g(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

fn g_deriv(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp() / (t * t)
    } else {
        0.0
    }
}

/// Smooth radial cutoff: 1 on `[0, 1]`, 0 on `[2, ∞)`, decreasing between.
pub fn cutoff(r: f64) -> f64 {
    let r = r.abs();
    if r <= 1.0 {
        return 1.0;
    }
    if r >= 2.0 {
        return 0.0;
    }
    let a = g(2.0 - r);
    a / (a + g(r - 1.0))
}

pub fn cutoff_deriv(r: f64) -> f64 {
    let r = r.abs();
    if r <= 1.0 || r >= 2.0 {
        return 0.0;
    }
    let a = g(2.0 - r);
    let b = g(r - 1.0);
    -(g_deriv(2.0 - r) * b + a * g_deriv(r - 1.0)) / ((a + b) * (a + b))
}

/// `U_ε(r) = (ε/(ε²+r²))^{(N-2)/2}`.
pub fn bubble_value(dim: usize, eps: f64, r: f64) -> f64 {
    (eps / (eps * eps + r * r)).powf(0.5 * (dim as f64 - 2.0))
}

pub fn bubble(grid: Arc<RadialGrid>, eps: f64) -> Result<RadialProfile> {
    if !(eps > 0.0) {
        return Err(Error::domain("bubble scale must be positive"));
    }
    let dim = grid.dim();
    RadialProfile::from_fn(grid, |r| bubble_value(dim, eps, r))
}

/// `[N(N-2)]^{(N-2)/4} U_ε`, which solves `-Δw = w^{2*-1}`.
pub fn normalized_bubble(grid: Arc<RadialGrid>, eps: f64) -> Result<RadialProfile> {
    let n = grid.dim() as f64;
    let c = (n * (n - 2.0)).powf(0.25 * (n - 2.0));
    Ok(bubble(grid, eps)?.scale(c))
}

/// Graded grid on `[0, 2]` resolving the core of `U_eps`.
pub fn bubble_grid(dim: usize, eps: f64) -> Result<RadialGrid> {
    RadialGrid::with_first_cell(dim, 2.0, 4096, eps / 64.0)
}

/// `(u_ε, v_ε)` sampled on `grid`; `v_ε` has `L²` norm `a`.
pub fn test_function(
    grid: Arc<RadialGrid>,
    eps: f64,
    a: f64,
) -> Result<(RadialProfile, RadialProfile)> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::domain("eps must lie in (0, 1]"));
    }
    let dim = grid.dim();
    let u = RadialProfile::from_fn(grid, |r| cutoff(r) * bubble_value(dim, eps, r))?;
    let v = u.normalize_mass(a)?;
    Ok((u, v))
}

/// Norms of `u_ε = φU_ε` by quadrature of the closed-form integrands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedNorms {
    pub eps: f64,
    pub grad_sq: f64,
    /// `|∇u_ε|₂² - K₁`, computed without cancellation.
    pub grad_deviation: f64,
    /// `∫ u_ε^{2*}`
    pub crit: f64,
    /// `|u_ε|_{2*}² - K₂`
    pub l2star_deviation: f64,
    pub mass_sq: f64,
    pub lq: f64,
}

impl TruncatedNorms {
    /// `|u_ε|_{2*}²`
    pub fn l2star(&self, dim: usize) -> f64 {
        self.crit.powf(2.0 / two_star(dim))
    }

    /// Norms of `v_ε = a u_ε/|u_ε|₂`.
    pub fn normalized(&self, dim: usize, q: f64, a: f64) -> ProfileNorms {
        let c = a / self.mass_sq.sqrt();
        ProfileNorms {
            grad_sq: c * c * self.grad_sq,
            mass_sq: a * a,
            lq: c.powf(q) * self.lq,
            crit: c.powf(two_star(dim)) * self.crit,
        }
    }
}

pub fn truncated_norms(dim: usize, q: f64, eps: f64) -> Result<TruncatedNorms> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::domain("eps must lie in (0, 1]"));
    }
    let n = dim as f64;
    let ts = two_star(dim);
    let omega = sphere_area(dim);
    let th1 = (1.0 / eps).atan();
    // r ≥ 1 in the angle variable
    let tail = |m: BubbleMoment| bubble_moment_on(dim, eps, m, th1, FRAC_PI_2, QUAD_TOL);
    // r ∈ [1, 2], the cutoff shell
    let shell = |k: usize| -> Result<f64> {
        let f = |r: f64| {
            let d = eps * eps + r * r;
            let u = (eps / d).powf(0.5 * (n - 2.0));
            let du = -(n - 2.0) * r * eps.powf(0.5 * (n - 2.0)) * d.powf(-0.5 * n);
            let phi = cutoff(r);
            let v = phi * u;
            let dv = cutoff_deriv(r) * u + phi * du;
            let w = r.powf(n - 1.0);
            match k {
                0 => dv * dv * w,
                1 => v.powf(ts) * w,
                2 => v * v * w,
                _ => v.powf(q) * w,
            }
        };
        Ok(omega * tanh_sinh(f, 1.0, 2.0, QUAD_TOL)?.value)
    };
    let k1 = bubble_moment(dim, eps, BubbleMoment::Gradient, QUAD_TOL)?;
    let kc = bubble_moment(dim, eps, BubbleMoment::Critical, QUAD_TOL)?;
    let grad_deviation = shell(0)? - tail(BubbleMoment::Gradient)?;
    let crit_deviation = shell(1)? - tail(BubbleMoment::Critical)?;
    let crit = kc + crit_deviation;
    let k2 = kc.powf(2.0 / ts);
    // (kc + δ)^{2/2*} - kc^{2/2*} without cancellation
    let l2star_deviation = k2 * ((2.0 / ts) * (crit_deviation / kc).ln_1p()).exp_m1();
    let mass_sq = power_inner(dim, eps, 2.0, th1)? + shell(2)?;
    let lq = power_inner(dim, eps, q, th1)? + shell(3)?;
    Ok(TruncatedNorms {
        eps,
        grad_sq: k1 + grad_deviation,
        grad_deviation,
        crit,
        l2star_deviation,
        mass_sq,
        lq,
    })
}

/// `ω ∫_0^1 U_ε^p r^{N-1} dr` in the angle variable, valid for every `p`.
fn power_inner(dim: usize, eps: f64, p: f64, th1: f64) -> Result<f64> {
    let n = dim as f64;
    let f = |th: f64| {
        let (s, c) = th.sin_cos();
        let r = eps * s / c;
        let jac = eps / (c * c);
        (eps / (eps * eps + r * r)).powf(0.5 * (n - 2.0) * p) * r.powf(n - 1.0) * jac
    };
    Ok(sphere_area(dim) * tanh_sinh(f, 0.0, th1, QUAD_TOL)?.value)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in lx.iter().zip(&ly) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

#[derive(Debug, Clone, Serialize)]
pub struct BubbleRow {
    pub eps: f64,
    pub grad_sq: f64,
    pub grad_deviation: f64,
    pub mass_sq: f64,
    pub lq: f64,
    pub l2star: f64,
    pub l2star_deviation: f64,
    /// `sup_s Ψ_{v_ε}` when fiber parameters were supplied.
    pub fiber_max: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BubbleReport {
    pub dim: usize,
    pub q: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: Option<f64>,
    pub k4: Option<f64>,
    pub sobolev_ratio: f64,
    pub rows: Vec<BubbleRow>,
    /// Fitted exponent of `|∇u_ε|₂² - K₁` (expected `N - 2`).
    pub grad_exponent: f64,
    /// Fitted exponent of `|u_ε|_q^q` (expected `N - (N-2)q/2` when `K₄`
    /// exists).
    pub lq_exponent: f64,
    pub lq_exponent_expected: Option<f64>,
    /// `|u_ε|₂²` divided by its leading-order law: `ε` for `N = 3`,
    /// `ε²|log ε|` for `N = 4`, `ε²K₃` for `N ≥ 5`.
    pub mass_ratios: Vec<f64>,
    /// Limit of `mass_ratios`: `ω ∫₀² φ²` for `N = 3`, `ω` for `N = 4`,
    /// `1` for `N ≥ 5`.
    pub mass_ratio_limit: f64,
    /// `max/min - 1` of `mass_ratios`.
    pub mass_ratio_spread: f64,
    pub mp_bound: Option<f64>,
    pub bound_certified: Option<bool>,
}

pub fn truncation_asymptotics(dim: usize, q: f64, eps_list: &[f64]) -> Result<BubbleReport> {
    build_report(dim, q, eps_list, None)
}

/// [`truncation_asymptotics`] plus the fiber maxima of `v_ε` and the
/// mountain-pass bound when the regime allows it.
pub fn bubble_report(params: &ProblemParams, eps_list: &[f64]) -> Result<BubbleReport> {
    build_report(params.dim, params.q, eps_list, Some(params))
}

fn check_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.len() < 4 {
        return Err(Error::domain(format!(
            "slope fits need at least 4 values of eps, got {}",
            eps_list.len()
        )));
    }
    if eps_list.iter().any(|&e| !(e > 0.0 && e <= 0.5))
        || eps_list.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(Error::domain("eps list must be decreasing within (0, 0.5]"));
    }
    Ok(())
}

fn build_report(
    dim: usize,
    q: f64,
    eps_list: &[f64],
    params: Option<&ProblemParams>,
) -> Result<BubbleReport> {
    check_eps_list(eps_list)?;
    let n = dim as f64;
    let ts = two_star(dim);
    let k1 = bubble_moment(dim, 1.0, BubbleMoment::Gradient, QUAD_TOL)?;
    let k2 = bubble_moment(dim, 1.0, BubbleMoment::Critical, QUAD_TOL)?.powf(2.0 / ts);
    let k3 = if dim >= 5 {
        Some(bubble_moment(dim, 1.0, BubbleMoment::Mass, QUAD_TOL)?)
    } else {
        None
    };
    let k4 = if q > n / (n - 2.0) {
        Some(bubble_moment(dim, 1.0, BubbleMoment::Power(q), QUAD_TOL)?)
    } else {
        None
    };
    let norms: Vec<TruncatedNorms> = eps_list
        .par_iter()
        .map(|&e| truncated_norms(dim, q, e))
        .collect::<Result<_>>()?;
    let fiber_max: Vec<Option<f64>> = match params {
        Some(p) => norms
            .iter()
            .map(|t| {
                fiber_report(&t.normalized(dim, q, p.a), p)
                    .ok()
                    .and_then(|r| r.maximum().map(|m| m.level))
            })
            .collect(),
        None => vec![None; norms.len()],
    };
    let rows: Vec<BubbleRow> = norms
        .iter()
        .zip(&fiber_max)
        .map(|(t, fm)| BubbleRow {
            eps: t.eps,
            grad_sq: t.grad_sq,
            grad_deviation: t.grad_deviation,
            mass_sq: t.mass_sq,
            lq: t.lq,
            l2star: t.l2star(dim),
            l2star_deviation: t.l2star_deviation,
            fiber_max: *fm,
        })
        .collect();
    // drop the largest eps from every fit
    let fit = &rows[1..];
    let eps: Vec<f64> = fit.iter().map(|r| r.eps).collect();
    let grad_exponent =
        log_log_slope(&eps, &fit.iter().map(|r| r.grad_deviation).collect::<Vec<_>>());
    let lq_exponent = log_log_slope(&eps, &fit.iter().map(|r| r.lq).collect::<Vec<_>>());
    let omega = sphere_area(dim);
    let (mass_ratios, mass_ratio_limit): (Vec<f64>, f64) = match dim {
        3 => {
            let phi_sq = tanh_sinh(|r| cutoff(r).powi(2), 0.0, 2.0, QUAD_TOL)?.value;
            (
                rows.iter().map(|r| r.mass_sq / r.eps).collect(),
                omega * phi_sq,
            )
        }
        4 => (
            rows.iter()
                .map(|r| r.mass_sq / (r.eps * r.eps * r.eps.ln().abs()))
                .collect(),
            omega,
        ),
        _ => {
            let k3 = k3.expect("K3 exists for N >= 5");
            (
                rows.iter().map(|r| r.mass_sq / (r.eps * r.eps * k3)).collect(),
                1.0,
            )
        }
    };
    let hi = mass_ratios.iter().cloned().fold(f64::MIN, f64::max);
    let lo = mass_ratios.iter().cloned().fold(f64::MAX, f64::min);
    let (mp_bound, bound_certified) = match params {
        Some(p) if p.regime != Regime::Subcritical && p.mu >= 0.0 => {
            let b = mountain_pass_bound(p, eps_list)?;
            (Some(b.bound), Some(b.certified))
        }
        _ => (None, None),
    };
    Ok(BubbleReport {
        dim,
        q,
        k1,
        k2,
        k3,
        k4,
        sobolev_ratio: k1 / k2,
        rows,
        grad_exponent,
        lq_exponent,
        lq_exponent_expected: k4.map(|_| n - 0.5 * (n - 2.0) * q),
        mass_ratios,
        mass_ratio_limit,
        mass_ratio_spread: hi / lo - 1.0,
        mp_bound,
        bound_certified,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MountainPassBound {
    pub eps: Vec<f64>,
    /// `sup_s Ψ_{v_ε}(s)` per ε.
    pub fiber_max: Vec<f64>,
    pub bound: f64,
    pub argmin_eps: f64,
    /// `S^{N/2}/N`
    pub homogeneous_level: f64,
    /// `S^{N/2}/N - bound`
    pub margin: f64,
    pub certified: bool,
}

/// `min_ε sup_s Ψ_{v_ε}(s)`, an upper bound for the ground-state level.
pub fn mountain_pass_bound(params: &ProblemParams, eps_list: &[f64]) -> Result<MountainPassBound> {
    if params.regime == Regime::Subcritical {
        return Err(Error::domain(
            "the mountain-pass bound applies to the critical and supercritical regimes",
        ));
    }
    if params.mu != 0.0 && !admissible(params)? {
        return Err(Error::domain("parameters violate the admissibility condition"));
    }
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::domain("eps values must lie in (0, 1]"));
    }
    let fiber_max: Vec<f64> = eps_list
        .par_iter()
        .map(|&e| {
            let t = truncated_norms(params.dim, params.q, e)?;
            let rep = fiber_report(&t.normalized(params.dim, params.q, params.a), params)?;
            Ok(rep.maximum().expect("single-point fiber").level)
        })
        .collect::<Result<_>>()?;
    let (k, &bound) = fiber_max
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let s = sobolev_constant(params.dim)?;
    let level = s.powf(params.dim as f64 / 2.0) / params.dim as f64;
    Ok(MountainPassBound {
        eps: eps_list.to_vec(),
        fiber_max,
        bound,
        argmin_eps: eps_list[k],
        homogeneous_level: level,
        margin: level - bound,
        certified: bound < level,
    })
}
