//! Problem parameters, exponents, the Sobolev and Gagliardo–Nirenberg
//! constants, and the admissibility threshold `α(N, q)`.

use crate::bubbles::{cutoff, cutoff_deriv};
use crate::error::{Error, Result};
use crate::ode::Tolerances;
use crate::quadrature::tanh_sinh;
use crate::radial_ode::RadialOde;
use serde::{Deserialize, Serialize, Serializer};
use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::sync::{Mutex, OnceLock};

/// Relative tolerance for the bubble-moment quadratures behind `S`.
pub const SOBOLEV_QUAD_TOL: f64 = 1e-14;
/// Integrator tolerances for the Gagliardo–Nirenberg extremal.
pub const GN_SHOOT_RTOL: f64 = 1e-12;
/// Slack allowed when a validation profile is compared with `C_{N,q}`.
pub const GN_VALIDATION_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    Subcritical,
    Critical,
    Supercritical,
}

/// `2N/(N-2)`.
pub fn two_star(dim: usize) -> f64 {
    2.0 * dim as f64 / (dim as f64 - 2.0)
}

/// `2 + 4/N`.
pub fn bar_p(dim: usize) -> f64 {
    2.0 + 4.0 / dim as f64
}

/// Surface area of the unit sphere in `ℝ^N`.
pub fn sphere_area(dim: usize) -> f64 {
    // ω_1 = 2, ω_2 = 2π, ω_N = 2π ω_{N-2} / (N-2)
    let mut w = if dim % 2 == 1 { 2.0 } else { 2.0 * PI };
    let mut k = if dim % 2 == 1 { 1 } else { 2 };
    while k < dim {
        w *= 2.0 * PI / k as f64;
        k += 2;
    }
    w
}

/// `γ_p = N(p-2)/(2p)` for `2 < p ≤ 2*`.
pub fn gamma(dim: usize, p: f64) -> Result<f64> {
    if dim < 3 {
        return Err(Error::domain(format!("N = {dim} is below 3")));
    }
    let ts = two_star(dim);
    if !(p > 2.0 && p <= ts * (1.0 + 1e-14)) {
        return Err(Error::domain(format!(
            "exponent p = {p} outside (2, {ts}]"
        )));
    }
    Ok(dim as f64 * (p - 2.0) / (2.0 * p))
}

fn classify_regime(dim: usize, q: f64) -> Regime {
    let pb = bar_p(dim);
    if (q - pb).abs() <= 1e-12 * pb {
        Regime::Critical
    } else if q < pb {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct ProblemParams {
    pub dim: usize,
    pub q: f64,
    pub a: f64,
    pub mu: f64,
    pub regime: Regime,
}

#[derive(Deserialize)]
struct RawParams {
    dim: usize,
    q: f64,
    a: f64,
    mu: f64,
}

impl TryFrom<RawParams> for ProblemParams {
    type Error = Error;
    fn try_from(r: RawParams) -> Result<Self> {
        ProblemParams::new(r.dim, r.q, r.a, r.mu)
    }
}

impl ProblemParams {
    pub fn new(dim: usize, q: f64, a: f64, mu: f64) -> Result<Self> {
        if dim < 3 {
            return Err(Error::domain(format!("N = {dim} is below 3")));
        }
        let ts = two_star(dim);
        if !(q > 2.0 && q < ts) {
            return Err(Error::domain(format!("q = {q} outside (2, {ts})")));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::domain(format!("mass a = {a} must be positive")));
        }
        if !mu.is_finite() {
            return Err(Error::domain("coupling mu must be finite"));
        }
        Ok(ProblemParams {
            dim,
            q,
            a,
            mu,
            regime: classify_regime(dim, q),
        })
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        ProblemParams::new(self.dim, self.q, self.a, mu)
    }

    pub fn with_a(&self, a: f64) -> Result<Self> {
        ProblemParams::new(self.dim, self.q, a, self.mu)
    }

    pub fn two_star(&self) -> f64 {
        two_star(self.dim)
    }

    pub fn gamma_q(&self) -> f64 {
        self.dim as f64 * (self.q - 2.0) / (2.0 * self.q)
    }

    /// The exponent `(1-γ_q) q` appearing in the admissibility condition.
    pub fn mass_exponent(&self) -> f64 {
        (1.0 - self.gamma_q()) * self.q
    }

    /// `S^{N/2}/N`, the ground-state level of the homogeneous problem.
    pub fn homogeneous_level(&self) -> Result<f64> {
        Ok(sobolev_constant(self.dim)?.powf(self.dim as f64 / 2.0) / self.dim as f64)
    }
}

/// A positive threshold that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Finite(f64),
    Infinite,
}

impl Threshold {
    pub fn exceeds(&self, x: f64) -> bool {
        match *self {
            Threshold::Finite(v) => x < v,
            Threshold::Infinite => true,
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Threshold::Finite(v) => v,
            Threshold::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Threshold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Threshold::Finite(v) => s.serialize_f64(v),
            Threshold::Infinite => s.serialize_str("+inf"),
        }
    }
}

/// Integrals of the bubble `U_ε(r) = (ε/(ε²+r²))^{(N-2)/2}` over `ℝ^N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BubbleMoment {
    /// `|∇U_ε|²`
    Gradient,
    /// `∫ U_ε^{2*}`
    Critical,
    /// `∫ U_ε²`, finite only for `N ≥ 5`
    Mass,
    /// `∫ U_ε^q`, finite only for `q > N/(N-2)`
    Power(f64),
}

/// Evaluates a bubble moment with the substitution `r = ε tan θ`, which
/// turns every integrand into a smooth function on `(0, π/2)`. The
/// integrand is evaluated in `r`, so the ε-independence of scale-invariant
/// combinations is a genuine numerical check.
pub fn bubble_moment(dim: usize, eps: f64, moment: BubbleMoment, rel_tol: f64) -> Result<f64> {
    bubble_moment_on(dim, eps, moment, 0.0, FRAC_PI_2, rel_tol)
}

/// Same as [`bubble_moment`] restricted to `θ ∈ [θ0, θ1]`.
pub(crate) fn bubble_moment_on(
    dim: usize,
    eps: f64,
    moment: BubbleMoment,
    th0: f64,
    th1: f64,
    rel_tol: f64,
) -> Result<f64> {
    let n = dim as f64;
    match moment {
        BubbleMoment::Mass if dim < 5 => {
            return Err(Error::domain("bubble is not in L² for N < 5"))
        }
        BubbleMoment::Power(q) if q <= n / (n - 2.0) => {
            return Err(Error::domain(format!(
                "bubble is not in L^{q} for N = {dim}"
            )))
        }
        _ => {}
    }
    let ts = two_star(dim);
    // (sin θ, cos θ) in, so the upper half can be fed the complement angle
    let integrand = |s: f64, c: f64| -> f64 {
        let r = eps * s / c;
        let jac = eps / (c * c);
        let d = eps * eps + r * r;
        let u = (eps / d).powf(0.5 * (n - 2.0));
        let w = r.powf(n - 1.0) * jac;
        match moment {
            BubbleMoment::Gradient => {
                let du = -(n - 2.0) * r * eps.powf(0.5 * (n - 2.0)) * d.powf(-0.5 * n);
                du * du * w
            }
            BubbleMoment::Critical => u.powf(ts) * w,
            BubbleMoment::Mass => u * u * w,
            BubbleMoment::Power(q) => u.powf(q) * w,
        }
    };
    // Above π/4 integrate in φ = π/2 - θ: slowly decaying moments are
    // singular at θ = π/2, where cos θ has no relative accuracy.
    let mid = th1.min(FRAC_PI_4).max(th0);
    let lower = tanh_sinh(
        |th| {
            let (s, c) = th.sin_cos();
            integrand(s, c)
        },
        th0,
        mid,
        rel_tol,
    )?;
    let upper = tanh_sinh(
        |ph| {
            let (s, c) = ph.sin_cos();
            integrand(c, s)
        },
        FRAC_PI_2 - th1,
        FRAC_PI_2 - mid,
        rel_tol,
    )?;
    Ok(sphere_area(dim) * (lower.value + upper.value))
}

fn sobolev_cache() -> &'static Mutex<HashMap<usize, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `K₁/K₂` at bubble scale `eps`; equal to `S` for every `eps`.
pub fn sobolev_ratio_at_scale(dim: usize, eps: f64) -> Result<f64> {
    if dim < 3 {
        return Err(Error::domain(format!("N = {dim} is below 3")));
    }
    let k1 = bubble_moment(dim, eps, BubbleMoment::Gradient, SOBOLEV_QUAD_TOL)?;
    let crit = bubble_moment(dim, eps, BubbleMoment::Critical, SOBOLEV_QUAD_TOL)?;
    let k2 = crit.powf(2.0 / two_star(dim));
    Ok(k1 / k2)
}

/// The best Sobolev constant `S`, cached per dimension.
pub fn sobolev_constant(dim: usize) -> Result<f64> {
    if let Some(&s) = sobolev_cache().lock().unwrap().get(&dim) {
        return Ok(s);
    }
    let s = sobolev_ratio_at_scale(dim, 1.0)?;
    sobolev_cache().lock().unwrap().entry(dim).or_insert(s);
    Ok(s)
}

/// The positive radial extremal `w` of `-Δw + w = w^{q-1}` and its norms.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GnExtremal {
    pub w0: f64,
    pub mass_sq: f64,
    pub grad_sq: f64,
    pub lq: f64,
    pub r_cut: f64,
}

/// Shoots the extremal of the Gagliardo–Nirenberg quotient.
pub fn gn_extremal(dim: usize, q: f64) -> Result<GnExtremal> {
    let ts = two_star(dim);
    if dim < 3 || !(q > 2.0 && q < ts) {
        return Err(Error::domain(format!(
            "q = {q} outside (2, {ts}) for N = {dim}"
        )));
    }
    let ode = RadialOde::new(dim, -1.0, vec![(1.0, q)])?;
    let tol = Tolerances {
        rtol: GN_SHOOT_RTOL,
        atol: 1e-15,
        ..Default::default()
    };
    // below (q/2)^{1/(q-2)} the potential energy is negative and the
    // trajectory cannot reach zero
    let start = (q / 2.0).powf(1.0 / (q - 2.0));
    let shot = ode
        .threshold(start, 1.05, 1e8, 80.0, &tol)?
        .ok_or_else(|| Error::solver("no crossing found for the extremal"))?;
    Ok(GnExtremal {
        w0: shot.u0,
        mass_sq: shot.integrals.mass_sq,
        grad_sq: shot.integrals.grad_sq,
        lq: shot.integrals.powers[0],
        r_cut: shot.r_end,
    })
}

/// `|w|_q / (|∇w|₂^γ |w|₂^{1-γ})` from the three squared/powered norms.
pub fn gn_quotient(dim: usize, q: f64, mass_sq: f64, grad_sq: f64, lq: f64) -> f64 {
    let g = dim as f64 * (q - 2.0) / (2.0 * q);
    lq.powf(1.0 / q) / (grad_sq.powf(0.5 * g) * mass_sq.powf(0.5 * (1.0 - g)))
}

fn gn_cache() -> &'static Mutex<HashMap<(usize, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// The validation family checked against every computed `C_{N,q}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ValidationProfile {
    Gaussian,
    /// `sech(r)^p`
    Sech(f64),
    /// `φ(r/R) U₁(r)` with the smooth cutoff `φ`
    TruncatedBubble(f64),
}

pub const VALIDATION_FAMILY: [ValidationProfile; 7] = [
    ValidationProfile::Gaussian,
    ValidationProfile::Sech(0.5),
    ValidationProfile::Sech(1.0),
    ValidationProfile::Sech(2.0),
    ValidationProfile::TruncatedBubble(2.0),
    ValidationProfile::TruncatedBubble(8.0),
    ValidationProfile::TruncatedBubble(32.0),
];

/// GN quotient of an analytic validation profile.
pub fn validation_quotient(dim: usize, q: f64, profile: ValidationProfile) -> Result<f64> {
    let n = dim as f64;
    let f = |r: f64| -> (f64, f64) {
        match profile {
            ValidationProfile::Gaussian => {
                let e = (-r * r).exp();
                (e, -2.0 * r * e)
            }
            ValidationProfile::Sech(p) => {
                if r > 700.0 {
                    return (0.0, 0.0);
                }
                let s = 1.0 / r.cosh();
                let v = s.powf(p);
                (v, -p * v * r.tanh())
            }
            ValidationProfile::TruncatedBubble(big_r) => {
                let d = 1.0 + r * r;
                let u = d.powf(-0.5 * (n - 2.0));
                let du = -(n - 2.0) * r * d.powf(-0.5 * n);
                let phi = cutoff(r / big_r);
                let dphi = cutoff_deriv(r / big_r) / big_r;
                (phi * u, dphi * u + phi * du)
            }
        }
    };
    let (lo, hi) = match profile {
        ValidationProfile::TruncatedBubble(big_r) => (0.0, 2.0 * big_r),
        _ => (0.0, 1.0),
    };
    // unbounded profiles use r = t/(1-t)
    let map = |t: f64| -> (f64, f64) {
        match profile {
            ValidationProfile::TruncatedBubble(_) => (t, 1.0),
            _ => (t / (1.0 - t), 1.0 / ((1.0 - t) * (1.0 - t))),
        }
    };
    let omega = sphere_area(dim);
    let integral = |k: usize| -> Result<f64> {
        let g = |t: f64| {
            let (r, jac) = map(t);
            let (v, dv) = f(r);
            let w = r.powf(n - 1.0) * jac;
            if w == 0.0 || !w.is_finite() {
                return 0.0;
            }
            match k {
                0 => v * v * w,
                1 => dv * dv * w,
                _ => v.abs().powf(q) * w,
            }
        };
        Ok(omega * tanh_sinh(g, lo, hi, 1e-13)?.value)
    };
    Ok(gn_quotient(dim, q, integral(0)?, integral(1)?, integral(2)?))
}

/// The optimal Gagliardo–Nirenberg constant `C_{N,q}`, cached per `(N, q)`.
///
/// Computed as the quotient at the shooting extremal and cross-checked
/// against [`VALIDATION_FAMILY`]; a validation profile beating the extremal
/// is reported as a numeric error.
pub fn gn_constant(dim: usize, q: f64) -> Result<f64> {
    let key = (dim, q.to_bits());
    if let Some(&c) = gn_cache().lock().unwrap().get(&key) {
        return Ok(c);
    }
    let ext = gn_extremal(dim, q)?;
    let c = gn_quotient(dim, q, ext.mass_sq, ext.grad_sq, ext.lq);
    for p in VALIDATION_FAMILY {
        let v = validation_quotient(dim, q, p)?;
        if v > c * (1.0 + GN_VALIDATION_SLACK) {
            return Err(Error::numeric(
                format!("validation profile {p:?} exceeds the extremal quotient"),
                v / c - 1.0,
            ));
        }
    }
    gn_cache().lock().unwrap().entry(key).or_insert(c);
    Ok(c)
}

/// `(C', C'')` of the subcritical threshold.
pub fn subcritical_constants(dim: usize, q: f64) -> Result<(f64, f64)> {
    if classify_regime(dim, q) != Regime::Subcritical {
        return Err(Error::domain("C' and C'' are defined for q < 2 + 4/N only"));
    }
    let n = dim as f64;
    let ts = two_star(dim);
    let g = gamma(dim, q)?;
    let gq = g * q;
    let s = sobolev_constant(dim)?;
    let cq = gn_constant(dim, q)?.powf(q);
    let c1 = (ts * s.powf(ts / 2.0) * (2.0 - gq) / (2.0 * (ts - gq))).powf((2.0 - gq) / (ts - 2.0))
        * (q * (ts - 2.0) / (2.0 * cq * (ts - gq)));
    let c2 = 2.0 * ts / (n * g * cq * (ts - gq)) * (gq * s.powf(n / 2.0) / (2.0 - gq)).powf((2.0 - gq) / 2.0);
    Ok((c1, c2))
}

/// `α(N, q)` for the regime of `params`.
pub fn alpha_threshold(params: &ProblemParams) -> Result<Threshold> {
    let dim = params.dim;
    match params.regime {
        Regime::Subcritical => {
            let (c1, c2) = subcritical_constants(dim, params.q)?;
            Ok(Threshold::Finite(c1.min(c2)))
        }
        Regime::Critical => {
            let pb = bar_p(dim);
            Ok(Threshold::Finite(pb / (2.0 * gn_constant(dim, pb)?.powf(pb))))
        }
        Regime::Supercritical => {
            if dim <= 4 {
                Ok(Threshold::Infinite)
            } else {
                let g = params.gamma_q();
                let s = sobolev_constant(dim)?;
                Ok(Threshold::Finite(
                    s.powf(dim as f64 / 4.0 * (1.0 - g) * params.q) / g,
                ))
            }
        }
    }
}

/// Whether `μ a^{(1-γ_q) q} < α(N, q)`; only defined for `μ > 0`.
pub fn admissible(params: &ProblemParams) -> Result<bool> {
    if params.mu <= 0.0 {
        return Err(Error::domain(format!(
            "admissibility is defined for mu > 0, got {}",
            params.mu
        )));
    }
    let lhs = params.mu * params.a.powf(params.mass_exponent());
    Ok(alpha_threshold(params)?.exceeds(lhs))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConstantsTolerances {
    pub sobolev_quadrature: f64,
    pub gn_shooting_rtol: f64,
    pub gn_validation_slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConstantsTable {
    pub dim: usize,
    pub q: f64,
    pub regime: Regime,
    pub gamma_q: f64,
    pub two_star: f64,
    pub bar_p: f64,
    pub sobolev_s: f64,
    pub gn_c: f64,
    pub alpha: Threshold,
    pub c_prime: Option<f64>,
    pub c_double_prime: Option<f64>,
    pub gn_extremal: GnExtremal,
    pub tolerances: ConstantsTolerances,
}

pub fn constants_table(dim: usize, q: f64) -> Result<ConstantsTable> {
    let params = ProblemParams::new(dim, q, 1.0, 1.0)?;
    let (c_prime, c_double_prime) = match params.regime {
        Regime::Subcritical => {
            let (a, b) = subcritical_constants(dim, q)?;
            (Some(a), Some(b))
        }
        _ => (None, None),
    };
    Ok(ConstantsTable {
        dim,
        q,
        regime: params.regime,
        gamma_q: gamma(dim, q)?,
        two_star: two_star(dim),
        bar_p: bar_p(dim),
        sobolev_s: sobolev_constant(dim)?,
        gn_c: gn_constant(dim, q)?,
        alpha: alpha_threshold(&params)?,
        c_prime,
        c_double_prime,
        gn_extremal: gn_extremal(dim, q)?,
        tolerances: ConstantsTolerances {
            sobolev_quadrature: SOBOLEV_QUAD_TOL,
            gn_shooting_rtol: GN_SHOOT_RTOL,
            gn_validation_slack: GN_VALIDATION_SLACK,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_endpoints() {
        for n in 3..=8 {
            assert!((gamma(n, two_star(n)).unwrap() - 1.0).abs() < 1e-14);
            let pb = bar_p(n);
            assert!((gamma(n, pb).unwrap() * pb - 2.0).abs() < 1e-14);
        }
        assert_eq!(gamma(3, 4.0).unwrap(), 0.75);
        assert!(gamma(3, 2.0).is_err());
        assert!(gamma(3, 6.5).is_err());
        assert!(gamma(2, 3.0).is_err());
    }

    #[test]
    fn gamma_sign_law_on_dense_grid() {
        for n in 3..=8 {
            let ts = two_star(n);
            let pb = bar_p(n);
            for k in 1..=400 {
                let p = 2.0 + (ts - 2.0) * k as f64 / 400.0;
                let d = gamma(n, p).unwrap() * p - 2.0;
                if (p - pb).abs() > 1e-12 {
                    assert_eq!(d > 0.0, p > pb, "N={n} p={p}");
                }
            }
        }
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-15);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-13);
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(2, 3.0, 1.0, 1.0).is_err());
        assert!(ProblemParams::new(3, 6.0, 1.0, 1.0).is_err());
        assert!(ProblemParams::new(3, 4.0, 0.0, 1.0).is_err());
        let p = ProblemParams::new(3, 10.0 / 3.0, 1.0, 1.0).unwrap();
        assert_eq!(p.regime, Regime::Critical);
        assert_eq!(ProblemParams::new(3, 3.0, 1.0, 1.0).unwrap().regime, Regime::Subcritical);
        assert_eq!(ProblemParams::new(3, 4.0, 1.0, 1.0).unwrap().regime, Regime::Supercritical);
    }

    #[test]
    fn sobolev_ratio_is_scale_free() {
        for n in [3, 5] {
            let s1 = sobolev_ratio_at_scale(n, 1.0).unwrap();
            for eps in [0.25, 0.5, 2.0, 4.0] {
                let s = sobolev_ratio_at_scale(n, eps).unwrap();
                assert!((s / s1 - 1.0).abs() < 1e-10, "N={n} eps={eps}");
            }
        }
    }

    #[test]
    fn alpha_is_infinite_for_low_dimension_supercritical() {
        let p = ProblemParams::new(3, 4.0, 1.0, 1.0).unwrap();
        assert_eq!(alpha_threshold(&p).unwrap(), Threshold::Infinite);
        assert!(admissible(&p).unwrap());
        assert!(admissible(&p.with_mu(1e-12).unwrap()).unwrap());
        assert!(admissible(&p.with_mu(0.0).unwrap()).is_err());
        assert!(admissible(&p.with_mu(-1.0).unwrap()).is_err());
    }

    #[test]
    fn boundary_is_not_admissible() {
        let p = ProblemParams::new(5, 3.2, 1.0, 1.0).unwrap();
        let alpha = alpha_threshold(&p).unwrap().value();
        assert!(!admissible(&p.with_mu(alpha).unwrap()).unwrap());
        assert!(admissible(&p.with_mu(alpha * (1.0 - 1e-12)).unwrap()).unwrap());
    }

    #[test]
    fn gn_constant_beats_gaussian() {
        let c = gn_constant(3, 4.0).unwrap();
        let g = validation_quotient(3, 4.0, ValidationProfile::Gaussian).unwrap();
        assert!(g <= c * (1.0 + 1e-9));
        assert!(g > 0.9 * c);
    }

    #[test]
    fn threshold_serializes_infinity_as_string() {
        assert_eq!(serde_json::to_string(&Threshold::Infinite).unwrap(), "\"+inf\"");
        assert_eq!(serde_json::to_string(&Threshold::Finite(2.5)).unwrap(), "2.5");
    }
}
