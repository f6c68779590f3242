//! Energy, Pohozaev functional and the fiber maps
//! `Ψ_u(s) = E(s⋆u) = e^{2s}G/2 - e^{2* s}C/2* - μ e^{γ_q q s}L/q`,
//! where `G = |∇u|₂²`, `C = |u|_{2*}^{2*}`, `L = |u|_q^q`.

use crate::constants::{admissible, gn_constant, sobolev_constant, ProblemParams, Regime};
use crate::error::{Error, Result};
use crate::radial::{ProfileNorms, RadialProfile};
use serde::Serialize;

/// Relative tolerance on `|P(u)|/|∇u|₂²` for membership in the Pohozaev set.
pub const MEMBERSHIP_TOL: f64 = 1e-6;
/// Band `|Ψ''(0)| < PZERO_BAND·|∇u|₂²` classified as degenerate.
pub const PZERO_BAND: f64 = 1e-8;
/// Root-finding target for fiber critical points and zeros.
pub const ROOT_TOL: f64 = 1e-10;
/// Half-width of the sign-scan window around the homogeneous critical point.
pub const SCAN_HALF_WIDTH: f64 = 40.0;
pub const SCAN_SAMPLES: usize = 2048;
/// Beyond this `|s|` the exponentials are no longer trusted.
pub const S_LIMIT: f64 = 500.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PohozaevClass {
    Pplus,
    Pzero,
    Pminus,
    NotOnP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CriticalKind {
    LocalMin,
    GlobalMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub s: f64,
    pub kind: CriticalKind,
    pub level: f64,
    pub class: PohozaevClass,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FiberReport {
    pub regime: Regime,
    pub critical_points: Vec<CriticalPoint>,
    /// `c_u < d_u`, the zeros of `Ψ_u` (subcritical only).
    pub zeros: Vec<f64>,
}

impl FiberReport {
    /// The global maximum point `t_u` and its level.
    pub fn maximum(&self) -> Option<&CriticalPoint> {
        self.critical_points
            .iter()
            .find(|c| c.kind == CriticalKind::GlobalMax)
    }

    pub fn local_minimum(&self) -> Option<&CriticalPoint> {
        self.critical_points
            .iter()
            .find(|c| c.kind == CriticalKind::LocalMin)
    }
}

/// The fiber map of a fixed function, built from its three norms.
#[derive(Debug, Clone, Copy)]
pub struct Fiber {
    g: f64,
    c: f64,
    l: f64,
    mu: f64,
    q: f64,
    gq: f64,
    ts: f64,
}

impl Fiber {
    pub fn new(norms: &ProfileNorms, params: &ProblemParams) -> Self {
        Fiber {
            g: norms.grad_sq,
            c: norms.crit,
            l: norms.lq,
            mu: params.mu,
            q: params.q,
            gq: params.gamma_q() * params.q,
            ts: params.two_star(),
        }
    }

    pub fn from_profile(u: &RadialProfile, params: &ProblemParams) -> Result<Self> {
        Ok(Self::new(&u.norms(params.q)?, params))
    }

    fn check(s: f64) -> Result<()> {
        if s.abs() > S_LIMIT {
            return Err(Error::numeric(
                format!("fiber argument s = {s} beyond the exponent limit"),
                s.abs(),
            ));
        }
        Ok(())
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        Self::check(s)?;
        Ok(0.5 * (2.0 * s).exp() * self.g
            - (self.ts * s).exp() * self.c / self.ts
            - self.mu * (self.gq * s).exp() * self.l / self.q)
    }

    /// `Ψ'(s)`, which equals `P(s⋆u)`.
    pub fn deriv(&self, s: f64) -> Result<f64> {
        Self::check(s)?;
        let gamma = self.gq / self.q;
        Ok((2.0 * s).exp() * self.g
            - (self.ts * s).exp() * self.c
            - self.mu * gamma * (self.gq * s).exp() * self.l)
    }

    pub fn second(&self, s: f64) -> Result<f64> {
        Self::check(s)?;
        let gamma = self.gq / self.q;
        Ok(2.0 * (2.0 * s).exp() * self.g
            - self.ts * (self.ts * s).exp() * self.c
            - self.mu * self.q * gamma * gamma * (self.gq * s).exp() * self.l)
    }

    /// `e^{-2s} Ψ'(s)`: no overflow and, for `γ_q q < 2`, concave in `s`.
    fn scaled_deriv(&self, s: f64) -> f64 {
        let gamma = self.gq / self.q;
        self.g
            - self.c * ((self.ts - 2.0) * s).exp()
            - self.mu * gamma * self.l * ((self.gq - 2.0) * s).exp()
    }

    /// `e^{-2s} Ψ(s)`.
    fn scaled_value(&self, s: f64) -> f64 {
        0.5 * self.g
            - self.c * ((self.ts - 2.0) * s).exp() / self.ts
            - self.mu * self.l * ((self.gq - 2.0) * s).exp() / self.q
    }

    /// Critical point of the homogeneous (`μ = 0`) fiber.
    pub fn homogeneous_max(&self) -> f64 {
        (self.g / self.c).ln() / (self.ts - 2.0)
    }

    fn class_at(&self, s: f64) -> Result<PohozaevClass> {
        let d2 = self.second(s)?;
        let g = (2.0 * s).exp() * self.g;
        Ok(if d2.abs() < PZERO_BAND * g {
            PohozaevClass::Pzero
        } else if d2 > 0.0 {
            PohozaevClass::Pplus
        } else {
            PohozaevClass::Pminus
        })
    }
}

pub fn energy_from_norms(n: &ProfileNorms, params: &ProblemParams) -> f64 {
    let ts = params.two_star();
    0.5 * n.grad_sq - n.crit / ts - params.mu * n.lq / params.q
}

pub fn pohozaev_from_norms(n: &ProfileNorms, params: &ProblemParams) -> f64 {
    n.grad_sq - n.crit - params.mu * params.gamma_q() * n.lq
}

/// `E_μ(u) = ½|∇u|₂² - |u|_{2*}^{2*}/2* - μ|u|_q^q/q`.
pub fn energy(u: &RadialProfile, params: &ProblemParams) -> Result<f64> {
    Ok(energy_from_norms(&u.norms(params.q)?, params))
}

/// `P_μ(u) = |∇u|₂² - |u|_{2*}^{2*} - μγ_q|u|_q^q`.
pub fn pohozaev(u: &RadialProfile, params: &ProblemParams) -> Result<f64> {
    Ok(pohozaev_from_norms(&u.norms(params.q)?, params))
}

pub fn fiber_value(u: &RadialProfile, s: f64, params: &ProblemParams) -> Result<f64> {
    Fiber::from_profile(u, params)?.value(s)
}

pub fn fiber_deriv(u: &RadialProfile, s: f64, params: &ProblemParams) -> Result<f64> {
    Fiber::from_profile(u, params)?.deriv(s)
}

pub fn fiber_second(u: &RadialProfile, s: f64, params: &ProblemParams) -> Result<f64> {
    Fiber::from_profile(u, params)?.second(s)
}

pub fn classify_norms(n: &ProfileNorms, params: &ProblemParams) -> Result<PohozaevClass> {
    let p = pohozaev_from_norms(n, params);
    if p.abs() > MEMBERSHIP_TOL * n.grad_sq {
        return Ok(PohozaevClass::NotOnP);
    }
    Fiber::new(n, params).class_at(0.0)
}

pub fn classify_pohozaev(u: &RadialProfile, params: &ProblemParams) -> Result<PohozaevClass> {
    classify_norms(&u.norms(params.q)?, params)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-3 * ROOT_TOL * mid.abs().max(1.0) || mid == lo || mid == hi {
            break;
        }
        if (f(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Root of a strictly monotone function, bracketed by expanding from `s0`.
fn monotone_root(f: impl Fn(f64) -> f64, s0: f64) -> Result<f64> {
    let f0 = f(s0);
    if f0 == 0.0 {
        return Ok(s0);
    }
    let increasing = f(s0 + 1e-3) > f0;
    // move toward the root
    let dir = if (f0 < 0.0) == increasing { 1.0 } else { -1.0 };
    let mut step = 1.0;
    let mut a = s0;
    loop {
        let b = s0 + dir * step;
        if b.abs() > S_LIMIT {
            return Err(Error::structural(
                "no sign change of the fiber derivative within the exponent limit",
            ));
        }
        if (f(b) > 0.0) != (f0 > 0.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            return Ok(bisect(&f, lo, hi));
        }
        a = b;
        step *= 2.0;
    }
}

/// Solves the fiber structure of `u` (through its norms).
pub fn fiber_report(n: &ProfileNorms, params: &ProblemParams) -> Result<FiberReport> {
    if !(n.grad_sq > 0.0 && n.crit > 0.0) {
        return Err(Error::domain("fiber analysis needs a nonzero profile"));
    }
    let fib = Fiber::new(n, params);
    let t0 = fib.homogeneous_max();
    let point = |s: f64, kind: CriticalKind| -> Result<CriticalPoint> {
        Ok(CriticalPoint {
            s,
            kind,
            level: fib.value(s)?,
            class: fib.class_at(s)?,
        })
    };
    let single = params.mu == 0.0 || params.regime != Regime::Subcritical;
    if single {
        let t = if params.mu >= 0.0 {
            // μγL e^{(γq-2)s} + C e^{(2*-2)s} - G, increasing in s
            monotone_root(|s| -fib.scaled_deriv(s), t0)?
        } else {
            // G e^{(2-2*)s} + |μ|γL e^{(γq-2*)s} - C, decreasing in s
            let ts = fib.ts;
            let gamma = fib.gq / fib.q;
            monotone_root(
                |s| {
                    fib.g * ((2.0 - ts) * s).exp() - fib.mu * gamma * fib.l * ((fib.gq - ts) * s).exp()
                        - fib.c
                },
                t0,
            )?
        };
        let p = point(t, CriticalKind::GlobalMax)?;
        if p.class != PohozaevClass::Pminus {
            return Err(Error::structural(format!(
                "fiber maximum at s = {t} has class {:?}",
                p.class
            )));
        }
        return Ok(FiberReport {
            regime: params.regime,
            critical_points: vec![p],
            zeros: vec![],
        });
    }

    if params.mu < 0.0 || !admissible(params)? {
        return Err(Error::domain(format!(
            "subcritical fiber analysis needs admissible mu > 0 (mu = {})",
            params.mu
        )));
    }
    // e^{-2s}Ψ' and e^{-2s}Ψ are concave; their peak is added to the scan
    let gamma = fib.gq / fib.q;
    let peak = ((params.mu * gamma * fib.l * (2.0 - fib.gq)) / (fib.c * (fib.ts - 2.0))).ln()
        / (fib.ts - fib.gq);
    let mut grid: Vec<f64> = (0..SCAN_SAMPLES)
        .map(|k| t0 - SCAN_HALF_WIDTH + 2.0 * SCAN_HALF_WIDTH * k as f64 / (SCAN_SAMPLES - 1) as f64)
        .collect();
    if peak.is_finite() && (peak - t0).abs() < SCAN_HALF_WIDTH {
        grid.push(peak);
        grid.sort_by(f64::total_cmp);
    }
    let roots = |f: &dyn Fn(f64) -> f64| -> Vec<f64> {
        let mut out = Vec::new();
        for w in grid.windows(2) {
            let (fa, fb) = (f(w[0]), f(w[1]));
            if fa == 0.0 {
                out.push(w[0]);
            } else if (fa > 0.0) != (fb > 0.0) && fb != 0.0 {
                out.push(bisect(f, w[0], w[1]));
            }
        }
        out
    };
    let crit = roots(&|s| fib.scaled_deriv(s));
    let zeros = roots(&|s| fib.scaled_value(s));
    if crit.len() != 2 || zeros.len() != 2 {
        return Err(Error::structural(format!(
            "subcritical fiber has {} critical points and {} zeros, expected 2 and 2",
            crit.len(),
            zeros.len()
        )));
    }
    let (su, tu) = (crit[0], crit[1]);
    let (cu, du) = (zeros[0], zeros[1]);
    if !(su < cu && cu < tu && tu < du) {
        return Err(Error::structural(format!(
            "fiber points out of order: s_u={su}, c_u={cu}, t_u={tu}, d_u={du}"
        )));
    }
    let pmin = point(su, CriticalKind::LocalMin)?;
    let pmax = point(tu, CriticalKind::GlobalMax)?;
    if !(pmin.level < 0.0 && pmax.level > 0.0) {
        return Err(Error::structural(format!(
            "fiber levels have wrong signs: Ψ(s_u)={}, Ψ(t_u)={}",
            pmin.level, pmax.level
        )));
    }
    if pmin.class != PohozaevClass::Pplus || pmax.class != PohozaevClass::Pminus {
        return Err(Error::structural(format!(
            "fiber critical points classified {:?} and {:?}",
            pmin.class, pmax.class
        )));
    }
    Ok(FiberReport {
        regime: params.regime,
        critical_points: vec![pmin, pmax],
        zeros: vec![cu, du],
    })
}

pub fn fiber_critical_points(u: &RadialProfile, params: &ProblemParams) -> Result<FiberReport> {
    fiber_report(&u.norms(params.q)?, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometryReport {
    pub r0: f64,
    pub r1: f64,
    pub t_local_min: f64,
    pub t_global_max: f64,
    pub h_min_level: f64,
    pub h_max_level: f64,
}

/// The comparison function
/// `h(t) = t²/2 - μ (C_{N,q}^q/q) a^{(1-γ_q)q} t^{γ_q q} - t^{2*}/(2* S^{2*/2})`.
#[derive(Debug, Clone, Copy)]
pub struct HFunction {
    coef_q: f64,
    coef_crit: f64,
    gq: f64,
    ts: f64,
}

impl HFunction {
    pub fn new(params: &ProblemParams) -> Result<Self> {
        let ts = params.two_star();
        let cq = gn_constant(params.dim, params.q)?.powf(params.q);
        let s = sobolev_constant(params.dim)?;
        Ok(HFunction {
            coef_q: params.mu * cq / params.q * params.a.powf(params.mass_exponent()),
            coef_crit: 1.0 / (ts * s.powf(ts / 2.0)),
            gq: params.gamma_q() * params.q,
            ts,
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        0.5 * t * t - self.coef_q * t.powf(self.gq) - self.coef_crit * t.powf(self.ts)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        t - self.coef_q * self.gq * t.powf(self.gq - 1.0)
            - self.coef_crit * self.ts * t.powf(self.ts - 1.0)
    }
}

fn log_bisect(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<f64> {
    let (fa, fb) = (f(lo), f(hi));
    if (fa > 0.0) == (fb > 0.0) {
        return Err(Error::structural(format!(
            "no sign change of h on [{lo:e}, {hi:e}]"
        )));
    }
    Ok(bisect(|x| f(x.exp()), lo.ln(), hi.ln()).exp())
}

pub fn h_geometry(params: &ProblemParams) -> Result<GeometryReport> {
    if params.regime != Regime::Subcritical {
        return Err(Error::domain("h geometry is defined in the subcritical regime"));
    }
    if !admissible(params)? {
        return Err(Error::domain("parameters violate the admissibility condition"));
    }
    let h = HFunction::new(params)?;
    let (a, b, gq, ts) = (h.coef_q, h.coef_crit, h.gq, h.ts);
    // h(t)/t² peaks where its derivative vanishes
    let tk = (a * (2.0 - gq) / (b * (ts - 2.0))).powf(1.0 / (ts - gq));
    // h'(t)/t = 1 - g(t) with g convex; g is smallest at tg
    let tg = (a * gq * (2.0 - gq) / (b * ts * (ts - 2.0))).powf(1.0 / (ts - gq));
    let k = |t: f64| 0.5 - a * t.powf(gq - 2.0) - b * t.powf(ts - 2.0);
    let g = |t: f64| 1.0 - a * gq * t.powf(gq - 2.0) - b * ts * t.powf(ts - 2.0);
    if !(k(tk) > 0.0) {
        return Err(Error::structural("h has no positive values"));
    }
    let far_lo = |f: &dyn Fn(f64) -> f64, t: f64| {
        let mut x = t;
        while f(x) > 0.0 && x > 1e-300 {
            x *= 0.5;
        }
        x
    };
    let far_hi = |f: &dyn Fn(f64) -> f64, t: f64| {
        let mut x = t;
        while f(x) > 0.0 && x < 1e300 {
            x *= 2.0;
        }
        x
    };
    let r0 = log_bisect(k, far_lo(&k, tk), tk)?;
    let r1 = log_bisect(k, tk, far_hi(&k, tk))?;
    let t_min = log_bisect(g, far_lo(&g, tg), tg)?;
    let t_max = log_bisect(g, tg, far_hi(&g, tg))?;
    Ok(GeometryReport {
        r0,
        r1,
        t_local_min: t_min,
        t_global_max: t_max,
        h_min_level: h.value(t_min),
        h_max_level: h.value(t_max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::RadialGrid;
    use std::sync::Arc;

    fn gaussian(a: f64) -> RadialProfile {
        let g = Arc::new(RadialGrid::default_for(3));
        RadialProfile::from_fn(g, |r| (-r * r).exp())
            .unwrap()
            .normalize_mass(a)
            .unwrap()
    }

    #[test]
    fn fiber_at_zero_is_energy() {
        let p = ProblemParams::new(3, 4.0, 1.0, 1.0).unwrap();
        let u = gaussian(1.0);
        assert_eq!(fiber_value(&u, 0.0, &p).unwrap(), energy(&u, &p).unwrap());
    }

    #[test]
    fn derivative_is_pohozaev_of_dilation() {
        let p = ProblemParams::new(3, 4.0, 1.0, 0.7).unwrap();
        let u = gaussian(1.0);
        for s in [-1.3, 0.0, 0.4, 2.0] {
            let d = fiber_deriv(&u, s, &p).unwrap();
            let pv = pohozaev(&u.dilate(s), &p).unwrap();
            assert!((d - pv).abs() <= 1e-12 * (1.0 + pv.abs()));
            let h = 1e-5;
            let fd = (fiber_value(&u, s + h, &p).unwrap() - fiber_value(&u, s - h, &p).unwrap())
                / (2.0 * h);
            assert!((fd - d).abs() <= 1e-6 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn overflow_guard() {
        let p = ProblemParams::new(3, 4.0, 1.0, 1.0).unwrap();
        let u = gaussian(1.0);
        assert!(fiber_value(&u, 501.0, &p).is_err());
    }

    #[test]
    fn homogeneous_fiber_closed_form() {
        let p = ProblemParams::new(3, 4.0, 1.0, 0.0).unwrap();
        let u = gaussian(1.0);
        let n = u.norms(4.0).unwrap();
        let rep = fiber_report(&n, &p).unwrap();
        let t = rep.critical_points[0].s;
        let closed = (n.grad_sq / n.crit).powf(1.0 / 4.0).ln();
        assert!((t - closed).abs() < 1e-8);
        let l2s = n.crit.powf(2.0 / 6.0);
        let level = (n.grad_sq / l2s).powf(1.5) / 3.0;
        assert!((rep.critical_points[0].level / level - 1.0).abs() < 1e-8);
        assert_eq!(rep.critical_points[0].class, PohozaevClass::Pminus);
    }

    #[test]
    fn generic_gaussian_is_off_manifold() {
        let p = ProblemParams::new(3, 4.0, 1.0, 1.0).unwrap();
        assert_eq!(classify_pohozaev(&gaussian(1.0), &p).unwrap(), PohozaevClass::NotOnP);
    }

    #[test]
    fn dilation_equivariance_of_maximum() {
        let p = ProblemParams::new(3, 4.0, 1.0, 1.0).unwrap();
        let u = gaussian(1.0);
        let t = fiber_critical_points(&u, &p).unwrap().maximum().unwrap().s;
        let ts = fiber_critical_points(&u.dilate(0.8), &p).unwrap().maximum().unwrap().s;
        assert!((ts - (t - 0.8)).abs() < 1e-8);
    }

    #[test]
    fn subcritical_two_point_structure() {
        let p = ProblemParams::new(3, 2.5, 1.0, 0.5).unwrap();
        let u = gaussian(1.0);
        let rep = fiber_critical_points(&u, &p).unwrap();
        let su = rep.local_minimum().unwrap();
        let tu = rep.maximum().unwrap();
        assert!(su.level < 0.0 && tu.level > 0.0);
        assert_eq!(su.class, PohozaevClass::Pplus);
        assert_eq!(
            classify_pohozaev(&u.dilate(su.s), &p).unwrap(),
            PohozaevClass::Pplus
        );
        // dense oracle: sign pattern of Ψ' on a fine grid
        let fib = Fiber::from_profile(&u, &p).unwrap();
        let mut changes = 0;
        let mut prev = fib.deriv(-30.0).unwrap() > 0.0;
        for k in 1..=200_000 {
            let s = -30.0 + 60.0 * k as f64 / 200_000.0;
            let cur = fib.deriv(s).unwrap() > 0.0;
            if cur != prev {
                changes += 1;
            }
            prev = cur;
        }
        assert_eq!(changes, 2);
    }

    #[test]
    fn subcritical_rejects_inadmissible() {
        let p = ProblemParams::new(3, 2.5, 1.0, 1e6).unwrap();
        assert!(matches!(
            fiber_critical_points(&gaussian(1.0), &p),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn h_structure() {
        let p = ProblemParams::new(3, 2.5, 1.0, 0.1).unwrap();
        let geo = h_geometry(&p).unwrap();
        let h = HFunction::new(&p).unwrap();
        assert!(0.0 < geo.r0 && geo.r0 < geo.r1);
        assert!(h.value(geo.r0).abs() < 1e-10 && h.value(geo.r1).abs() < 1e-10);
        assert!(h.value(0.5 * (geo.r0 + geo.r1)) > 0.0);
        assert!(geo.h_min_level < 0.0 && geo.h_max_level > 0.0);
        assert!(geo.t_local_min < geo.r0 && geo.r0 < geo.t_global_max && geo.t_global_max < geo.r1);
    }

    #[test]
    fn h_requires_subcritical() {
        let p = ProblemParams::new(3, 4.0, 1.0, 0.1).unwrap();
        assert!(matches!(h_geometry(&p), Err(Error::Domain(_))));
    }
}
