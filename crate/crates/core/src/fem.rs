//! Piecewise-linear finite elements on a radial grid, with a lumped mass
//! matrix and a homogeneous Dirichlet condition at `r_max`.
//!
//! The descent solvers and the time propagator share this discretization,
//! so a profile polished by descent is a discrete stationary state of the
//! discrete flow.

use crate::constants::{sphere_area, two_star};
use crate::error::{Error, Result};
use crate::radial::{ProfileNorms, RadialGrid, RadialProfile};
use num_complex::Complex64;
use std::ops::{Mul, Sub};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct FeSpace {
    grid: Arc<RadialGrid>,
    /// Lumped node masses `ω ∫ r^{N-1}` over the dual cells.
    mass: Vec<f64>,
    /// Cell stiffness `ω ∫ r^{N-1} dr / h²`, one per cell.
    stiff: Vec<f64>,
}

impl FeSpace {
    pub fn new(grid: Arc<RadialGrid>) -> Self {
        let n = grid.dim() as f64;
        let omega = sphere_area(grid.dim());
        let r = grid.nodes();
        let mut mass = vec![0.0; r.len()];
        let mut stiff = Vec::with_capacity(r.len() - 1);
        let vol = |a: f64, b: f64| omega * (b.powf(n) - a.powf(n)) / n;
        for i in 0..r.len() - 1 {
            let (a, b) = (r[i], r[i + 1]);
            let mid = 0.5 * (a + b);
            mass[i] += vol(a, mid);
            mass[i + 1] += vol(mid, b);
            stiff.push(vol(a, b) / ((b - a) * (b - a)));
        }
        FeSpace { grid, mass, stiff }
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass_weights(&self) -> &[f64] {
        &self.mass
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// `Σ m_i |u_i|^p`.
    pub fn power(&self, u: &[f64], p: f64) -> f64 {
        self.mass.iter().zip(u).map(|(m, v)| m * v.abs().powf(p)).sum()
    }

    pub fn mass_sq(&self, u: &[f64]) -> f64 {
        self.mass.iter().zip(u).map(|(m, v)| m * v * v).sum()
    }

    pub fn grad_sq(&self, u: &[f64]) -> f64 {
        self.stiff
            .iter()
            .zip(u.windows(2))
            .map(|(w, e)| w * (e[1] - e[0]) * (e[1] - e[0]))
            .sum()
    }

    pub fn norms(&self, u: &[f64], q: f64) -> ProfileNorms {
        ProfileNorms {
            grad_sq: self.grad_sq(u),
            mass_sq: self.mass_sq(u),
            lq: self.power(u, q),
            crit: self.power(u, two_star(self.dim())),
        }
    }

    /// `K u` for the stiffness matrix `K`.
    pub fn stiffness_apply<T>(&self, u: &[T]) -> Vec<T>
    where
        T: Copy + Default + Sub<Output = T> + Mul<f64, Output = T> + std::ops::AddAssign + std::ops::SubAssign,
    {
        let mut out = vec![T::default(); u.len()];
        for (i, &w) in self.stiff.iter().enumerate() {
            let flux = (u[i + 1] - u[i]) * w;
            out[i] -= flux;
            out[i + 1] += flux;
        }
        out
    }

    /// The tridiagonal `diag_shift·M + k·K` with the last row replaced by the
    /// Dirichlet condition. `diag_shift` is per node.
    pub fn operator<T>(&self, diag_shift: impl Fn(usize) -> T, k: T) -> Tridiagonal<T>
    where
        T: Scalar,
    {
        let n = self.len();
        let mut lower = vec![T::zero(); n];
        let mut diag: Vec<T> = (0..n).map(|i| diag_shift(i) * self.mass[i]).collect();
        let mut upper = vec![T::zero(); n];
        for (i, &w) in self.stiff.iter().enumerate() {
            let kw = k * w;
            diag[i] = diag[i] + kw;
            diag[i + 1] = diag[i + 1] + kw;
            upper[i] = T::zero() - kw;
            lower[i + 1] = T::zero() - kw;
        }
        diag[n - 1] = T::one();
        lower[n - 1] = T::zero();
        Tridiagonal { lower, diag, upper }
    }

    /// Samples a profile onto the nodes, with the Dirichlet value forced.
    pub fn project(&self, u: &RadialProfile) -> Result<Vec<f64>> {
        let mut v = u.resample(self.grid.clone())?.base_values().to_vec();
        *v.last_mut().expect("grid is never empty") = 0.0;
        Ok(v)
    }

    /// Rescales `u` to `Σ m u² = a²`.
    pub fn normalize(&self, u: &mut [f64], a: f64) -> Result<()> {
        let m = self.mass_sq(u).sqrt();
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::numeric("cannot normalize a degenerate iterate", m));
        }
        let c = a / m;
        u.iter_mut().for_each(|v| *v *= c);
        Ok(())
    }
}

/// Field operations needed by the tridiagonal solver.
pub trait Scalar:
    Copy
    + std::ops::Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Mul<f64, Output = Self>
    + std::ops::Div<Output = Self>
{
    fn zero() -> Self;
    fn one() -> Self;
    fn magnitude(self) -> f64;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone)]
pub struct Tridiagonal<T> {
    pub lower: Vec<T>,
    pub diag: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> Tridiagonal<T> {
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y = y + self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    y = y + self.upper[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Thomas algorithm without pivoting; a pivot that vanishes relative to
    /// its row is an error.
    pub fn solve(&self, rhs: &[T]) -> Result<Vec<T>> {
        Ok(self.factor()?.solve(rhs))
    }

    /// Forward-elimination factors, reusable across right-hand sides.
    pub fn factor(&self) -> Result<Factored<T>> {
        let n = self.diag.len();
        let mut c = vec![T::zero(); n];
        let mut inv_piv = vec![T::zero(); n];
        for i in 0..n {
            let scale = self.diag[i].magnitude() + self.lower[i].magnitude() + self.upper[i].magnitude();
            let piv = if i == 0 {
                self.diag[0]
            } else {
                self.diag[i] - self.lower[i] * c[i - 1]
            };
            if !(piv.magnitude() > 1e-14 * scale) {
                return Err(Error::numeric(
                    format!("tridiagonal pivot vanished at row {i}"),
                    piv.magnitude() / scale,
                ));
            }
            inv_piv[i] = T::one() / piv;
            c[i] = self.upper[i] * inv_piv[i];
        }
        Ok(Factored {
            lower: self.lower.clone(),
            c,
            inv_piv,
        })
    }
}

/// A factored tridiagonal system.
#[derive(Debug, Clone)]
pub struct Factored<T> {
    lower: Vec<T>,
    c: Vec<T>,
    inv_piv: Vec<T>,
}

impl<T: Scalar> Factored<T> {
    pub fn solve(&self, rhs: &[T]) -> Vec<T> {
        let n = self.c.len();
        let mut d = vec![T::zero(); n];
        d[0] = rhs[0] * self.inv_piv[0];
        for i in 1..n {
            d[i] = (rhs[i] - self.lower[i] * d[i - 1]) * self.inv_piv[i];
        }
        for i in (0..n - 1).rev() {
            d[i] = d[i] - self.c[i] * d[i + 1];
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(dim: usize) -> FeSpace {
        FeSpace::new(Arc::new(RadialGrid::graded(dim, 12.0, 2001, 4.0).unwrap()))
    }

    #[test]
    fn masses_sum_to_ball_volume() {
        let s = space(3);
        let total: f64 = s.mass_weights().iter().sum();
        let ball = 4.0 / 3.0 * std::f64::consts::PI * 12f64.powi(3);
        assert!((total / ball - 1.0).abs() < 1e-13);
    }

    #[test]
    fn gaussian_norms_converge() {
        let s = space(3);
        let u: Vec<f64> = s.grid().nodes().iter().map(|r| (-0.5 * r * r).exp()).collect();
        let pi = std::f64::consts::PI;
        assert!((s.mass_sq(&u) / pi.powf(1.5) - 1.0).abs() < 1e-4);
        assert!((s.grad_sq(&u) / (1.5 * pi.powf(1.5)) - 1.0).abs() < 1e-4);
    }

    #[test]
    fn stiffness_is_the_gradient_form() {
        let s = space(4);
        let u: Vec<f64> = s.grid().nodes().iter().map(|r| 1.0 / (1.0 + r * r)).collect();
        let ku = s.stiffness_apply(&u);
        let quad: f64 = u.iter().zip(&ku).map(|(a, b)| a * b).sum();
        assert!((quad / s.grad_sq(&u) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn thomas_solves_complex_systems() {
        let s = space(3);
        let op = s.operator(|_| Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.3));
        let x: Vec<Complex64> = (0..s.len())
            .map(|i| Complex64::new((i as f64 * 0.01).sin(), (i as f64 * 0.02).cos()))
            .collect();
        let b = op.apply(&x);
        let y = op.solve(&b).unwrap();
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }
}
