//! Embedded Runge–Kutta 5(4) integrator of Dormand and Prince with
//! step-size control, specialised to small fixed-size systems.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-11,
            atol: 1e-14,
            max_steps: 2_000_000,
        }
    }
}

/// One accepted step, handed to the observer.
#[derive(Debug, Clone, Copy)]
pub struct Step<const D: usize> {
    pub t0: f64,
    pub y0: [f64; D],
    pub t1: f64,
    pub y1: [f64; D],
    pub dy1: [f64; D],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct Finish<const D: usize> {
    pub t: f64,
    pub y: [f64; D],
    pub steps: usize,
    pub stopped: bool,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end` (forward only).
///
/// The observer sees each accepted step and may stop the integration early.
/// A step size that collapses below `1e-14 * max(|t|, |t0|)` is a numeric error.
pub fn integrate<const D: usize, F, O>(
    mut f: F,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    h0: f64,
    tol: &Tolerances,
    mut observer: O,
) -> Result<Finish<D>>
where
    F: FnMut(f64, &[f64; D]) -> [f64; D],
    O: FnMut(&Step<D>) -> Control,
{
    if t_end <= t0 {
        return Err(Error::domain("integration interval is empty"));
    }
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut h = h0.min(t_end - t0);
    let mut steps = 0usize;
    let mut last_err = 0.0;
    loop {
        if steps >= tol.max_steps {
            return Err(Error::numeric("step budget exhausted", last_err));
        }
        if h < 1e-14 * t.abs().max(t0.abs()) {
            return Err(Error::numeric(
                format!("step size collapsed at t = {t:e}"),
                last_err,
            ));
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let k2 = f(t + C2 * h, &axpy(&y, h, &[(A21, &k1)]));
        let k3 = f(t + C3 * h, &axpy(&y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(
            t + C4 * h,
            &axpy(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
        );
        let k5 = f(
            t + C5 * h,
            &axpy(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &axpy(
                &y,
                h,
                &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            ),
        );
        let y1 = axpy(
            &y,
            h,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        let k7 = f(t + h, &y1);

        let mut err = 0.0;
        for i in 0..D {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = tol.atol + tol.rtol * y[i].abs().max(y1[i].abs());
            err += (e / sc).powi(2);
        }
        let err = (err / D as f64).sqrt();
        if !err.is_finite() {
            h *= 0.1;
            last_err = f64::INFINITY;
            continue;
        }
        last_err = err;
        if err <= 1.0 {
            let step = Step {
                t0: t,
                y0: y,
                t1: t + h,
                y1,
                dy1: k7,
            };
            t = if last { t_end } else { t + h };
            y = y1;
            k1 = k7;
            steps += 1;
            if observer(&step) == Control::Stop {
                return Ok(Finish {
                    t,
                    y,
                    steps,
                    stopped: true,
                });
            }
            if last {
                return Ok(Finish {
                    t,
                    y,
                    steps,
                    stopped: false,
                });
            }
            let fac = if err == 0.0 { 5.0 } else { 0.9 * err.powf(-0.2) };
            h *= fac.clamp(0.2, 5.0);
        } else {
            h *= (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_period() {
        let tol = Tolerances {
            rtol: 1e-12,
            atol: 1e-14,
            ..Default::default()
        };
        let two_pi = 2.0 * std::f64::consts::PI;
        let fin = integrate(
            |_, y: &[f64; 2]| [y[1], -y[0]],
            0.0,
            [1.0, 0.0],
            two_pi,
            1e-3,
            &tol,
            |_| Control::Continue,
        )
        .unwrap();
        assert!((fin.y[0] - 1.0).abs() < 1e-10);
        assert!(fin.y[1].abs() < 1e-10);
        assert!(!fin.stopped);
    }

    #[test]
    fn observer_can_stop() {
        let fin = integrate(
            |_, y: &[f64; 1]| [-y[0]],
            0.0,
            [1.0],
            10.0,
            1e-3,
            &Tolerances::default(),
            |s| {
                if s.y1[0] < 0.5 {
                    Control::Stop
                } else {
                    Control::Continue
                }
            },
        )
        .unwrap();
        assert!(fin.stopped);
        assert!(fin.t > 2f64.ln() && fin.t < 1.0);
    }

    #[test]
    fn blow_up_collapses_step() {
        let r = integrate(
            |_, y: &[f64; 1]| [y[0] * y[0]],
            0.0,
            [1.0],
            2.0,
            1e-3,
            &Tolerances::default(),
            |_| Control::Continue,
        );
        assert!(matches!(r, Err(Error::Numeric { .. })));
    }
}
