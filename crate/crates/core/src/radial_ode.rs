//! Radial shooting for `u'' + (N-1)/r u' + λu + Σ c_k |u|^{p_k-2} u = 0`,
//! `u(0) = u0`, `u'(0) = 0`.
//!
//! The state carries the running integrals `∫ r^{N-1} (u², u'², |u|^{p_k})`
//! so that norms of a shot come out at integrator accuracy instead of
//! being re-quadratured afterwards.

use crate::constants::sphere_area;
use crate::error::{Error, Result};
use crate::ode::{self, Control, Tolerances};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ShotOutcome {
    /// Stays positive and decreasing up to the end of the interval.
    Decaying,
    /// Reaches zero: the initial height was too large.
    Crossing,
    /// Turns upward while still positive: the initial height was too small.
    Blowing,
}

#[derive(Debug, Clone)]
pub struct RadialOde {
    pub dim: usize,
    pub lambda: f64,
    /// `(c_k, p_k)` pairs of the nonlinearity; at most two are tracked.
    pub terms: Vec<(f64, f64)>,
}

/// Norms accumulated along a shot, already multiplied by `ω_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShotIntegrals {
    pub mass_sq: f64,
    pub grad_sq: f64,
    /// `|u|_{p_k}^{p_k}` for each nonlinear term, in order.
    pub powers: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Shot {
    pub u0: f64,
    pub lambda: f64,
    pub outcome: ShotOutcome,
    /// Radius where the trajectory was cut (first zero, turning point, or
    /// end of interval).
    pub r_end: f64,
    pub integrals: ShotIntegrals,
    knots: Vec<[f64; 3]>,
}

impl Shot {
    /// Hermite interpolation of `u` on the stored trajectory; zero outside.
    pub fn value_at(&self, r: f64) -> f64 {
        let k = &self.knots;
        if r <= k[0][0] {
            return self.u0 + (k[0][1] - self.u0) * (r / k[0][0]).powi(2);
        }
        if r >= k[k.len() - 1][0] {
            return 0.0;
        }
        let i = k.partition_point(|x| x[0] <= r) - 1;
        let (r0, u0, v0) = (k[i][0], k[i][1], k[i][2]);
        let (r1, u1, v1) = (k[i + 1][0], k[i + 1][1], k[i + 1][2]);
        let h = r1 - r0;
        let t = (r - r0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * u0
            + (t3 - 2.0 * t2 + t) * h * v0
            + (-2.0 * t3 + 3.0 * t2) * u1
            + (t3 - t2) * h * v1
    }

    /// Stored `(r, u, u')` knots of the accepted steps.
    pub fn knots(&self) -> &[[f64; 3]] {
        &self.knots
    }

    /// Largest relative deviation of the log-derivative from the exponential
    /// tail law `-κ - (N-1)/(2r)` over `window·r_end`. `None` when the
    /// window holds no knots.
    pub fn tail_log_derivative_error(&self, kappa: f64, dim: usize, window: (f64, f64)) -> Option<f64> {
        let lo = window.0 * self.r_end;
        let hi = window.1 * self.r_end;
        let mut worst: Option<f64> = None;
        for k in &self.knots {
            if k[0] < lo || k[0] > hi || k[1] <= 0.0 {
                continue;
            }
            let expected = -kappa - (dim as f64 - 1.0) / (2.0 * k[0]);
            let rel = ((k[2] / k[1]) - expected).abs() / expected.abs();
            worst = Some(worst.map_or(rel, |w: f64| w.max(rel)));
        }
        worst
    }
}

impl RadialOde {
    pub fn new(dim: usize, lambda: f64, terms: Vec<(f64, f64)>) -> Result<Self> {
        if dim < 1 {
            return Err(Error::domain("dimension must be positive"));
        }
        if terms.len() > 2 {
            return Err(Error::domain("at most two nonlinear terms are supported"));
        }
        Ok(RadialOde { dim, lambda, terms })
    }

    fn forcing(&self, u: f64) -> f64 {
        let mut g = self.lambda * u;
        for &(c, p) in &self.terms {
            g += c * u.abs().powf(p - 2.0) * u;
        }
        g
    }

    /// Integrates from the origin up to `r_max` and classifies the shot.
    pub fn shoot(&self, u0: f64, r_max: f64, tol: &Tolerances) -> Result<Shot> {
        if !(u0 > 0.0 && u0.is_finite()) {
            return Err(Error::domain("initial height must be positive"));
        }
        let n = self.dim as f64;
        let g0 = self.forcing(u0);
        let core = (u0 / g0.abs().max(1e-300)).sqrt().min(1.0);
        let r0 = 1e-5 * core;
        let u_start = u0 - g0 * r0 * r0 / (2.0 * n);
        let v_start = -g0 * r0 / n;
        let pw = |u: f64, k: usize| -> f64 {
            self.terms.get(k).map_or(0.0, |&(_, p)| u.abs().powf(p))
        };
        let rn = r0.powf(n) / n;
        let y0 = [
            u_start,
            v_start,
            u0 * u0 * rn,
            0.0,
            pw(u0, 0) * rn,
            pw(u0, 1) * rn,
        ];
        let tol = Tolerances {
            atol: tol.atol * u0.max(1e-300),
            ..*tol
        };
        let nm1 = n - 1.0;
        let rhs = |r: f64, y: &[f64; 6]| -> [f64; 6] {
            let u = y[0];
            let v = y[1];
            let w = r.powf(nm1);
            [
                v,
                -nm1 / r * v - self.forcing(u),
                w * u * u,
                w * v * v,
                w * pw(u, 0),
                w * pw(u, 1),
            ]
        };
        let mut knots = vec![[r0, u_start, v_start]];
        let mut outcome = ShotOutcome::Decaying;
        let fin = ode::integrate(rhs, r0, y0, r_max, r0, &tol, |s| {
            let (u, v) = (s.y1[0], s.y1[1]);
            if u <= 0.0 {
                outcome = ShotOutcome::Crossing;
                return Control::Stop;
            }
            knots.push([s.t1, u, v]);
            if v > 0.0 {
                outcome = ShotOutcome::Blowing;
                return Control::Stop;
            }
            Control::Continue
        })?;
        let omega = sphere_area(self.dim);
        Ok(Shot {
            u0,
            lambda: self.lambda,
            outcome,
            r_end: fin.t,
            integrals: ShotIntegrals {
                mass_sq: omega * fin.y[2],
                grad_sq: omega * fin.y[3],
                powers: [omega * fin.y[4], omega * fin.y[5]],
            },
            knots,
        })
    }

    /// Locates the threshold height separating undershoot (Blowing) from
    /// overshoot (Crossing), scanning upward from `u_start` by the factor
    /// `growth` until the first crossing and then bisecting.
    ///
    /// Returns the final undershooting shot, which tracks the decaying
    /// solution up to its departure point, or `None` if no crossing occurs
    /// below `u_cap`.
    pub fn threshold(
        &self,
        u_start: f64,
        growth: f64,
        u_cap: f64,
        r_max: f64,
        tol: &Tolerances,
    ) -> Result<Option<Shot>> {
        let mut lo = self.shoot(u_start, r_max, tol)?;
        if lo.outcome == ShotOutcome::Crossing {
            return Err(Error::solver(format!(
                "shot from the lower scan end u0 = {u_start:e} already crosses"
            )));
        }
        let mut hi_u0 = u_start;
        let hi = loop {
            let u = hi_u0 * growth;
            if u > u_cap {
                return Ok(None);
            }
            let s = self.shoot(u, r_max, tol)?;
            hi_u0 = u;
            if s.outcome == ShotOutcome::Crossing {
                break s;
            }
            lo = s;
        };
        self.bisect_threshold(lo, hi, r_max, tol).map(Some)
    }

    /// Bisects between an undershooting shot `lo` and a crossing shot `hi`.
    pub fn bisect_threshold(&self, mut lo: Shot, hi: Shot, r_max: f64, tol: &Tolerances) -> Result<Shot> {
        if lo.outcome == ShotOutcome::Crossing || hi.outcome != ShotOutcome::Crossing {
            return Err(Error::solver("threshold bisection needs an undershoot and a crossing"));
        }
        // the two heights may come in either order
        let mut hi_u0 = hi.u0;
        for _ in 0..200 {
            let mid = 0.5 * (lo.u0 + hi_u0);
            let (a, b) = (lo.u0.min(hi_u0), lo.u0.max(hi_u0));
            if mid <= a || mid >= b || (b - a) <= 4.0 * f64::EPSILON * b {
                break;
            }
            let s = self.shoot(mid, r_max, tol)?;
            match s.outcome {
                ShotOutcome::Crossing => hi_u0 = mid,
                _ => lo = s,
            }
        }
        Ok(lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_regime_turns_up() {
        let ode = RadialOde::new(3, -1.0, vec![(1.0, 4.0)]).unwrap();
        let s = ode.shoot(1e-6, 40.0, &Tolerances::default()).unwrap();
        assert_eq!(s.outcome, ShotOutcome::Blowing);
    }

    #[test]
    fn large_height_crosses() {
        let ode = RadialOde::new(3, -1.0, vec![(1.0, 4.0)]).unwrap();
        let s = ode.shoot(20.0, 40.0, &Tolerances::default()).unwrap();
        assert_eq!(s.outcome, ShotOutcome::Crossing);
    }

    #[test]
    fn free_laplace_solution_stays_constant() {
        let ode = RadialOde::new(3, 0.0, vec![]).unwrap();
        let s = ode.shoot(2.0, 5.0, &Tolerances::default()).unwrap();
        assert_eq!(s.outcome, ShotOutcome::Decaying);
        let vol = 4.0 / 3.0 * std::f64::consts::PI * 125.0;
        assert!((s.integrals.mass_sq - 4.0 * vol).abs() < 1e-8 * vol);
        assert!((s.value_at(2.5) - 2.0).abs() < 1e-12);
    }
}
