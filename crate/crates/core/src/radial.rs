//! Radial functions on `ℝ^N` sampled on a mapped grid.
//!
//! Nodes are `r_i = R(ξ_i)` for equispaced `ξ_i ∈ [0, 1]`, with `R` either
//! linear or a sinh stretch that crowds nodes near the origin. Quadrature
//! and differences are done in `ξ`, where the samples are smooth and
//! equispaced; the map is odd, so the even extension of `u` across `r = 0`
//! supplies the ghost values that enforce `u'(0) = 0`.

use crate::constants::sphere_area;
use crate::error::{Error, Result};
use serde::Serialize;
use std::io::{BufRead, Write};
use std::sync::Arc;

pub const DEFAULT_R_MAX: f64 = 50.0;
pub const DEFAULT_NODES: usize = 4096;
pub const DEFAULT_STRETCH: f64 = 8.0;
pub const MIN_NODES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Spacing {
    Uniform,
    /// `r = r_max sinh(βξ) / sinh(β)`
    Graded { stretch: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    dim: usize,
    spacing: Spacing,
    r_max: f64,
    nodes: Vec<f64>,
    /// `dr/dξ` at the nodes
    jac: Vec<f64>,
    /// `d²r/dξ²` at the nodes
    jac_deriv: Vec<f64>,
    dxi: f64,
    simpson: Vec<f64>,
}

fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    let intervals = n - 1;
    // composite Simpson on an even number of intervals, 3/8 rule on the
    // trailing three when the count is odd
    let simpson_end = if intervals % 2 == 0 { intervals } else { intervals - 3 };
    for k in (0..simpson_end).step_by(2) {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
    }
    if simpson_end < intervals {
        let k = simpson_end;
        w[k] += 3.0 * h / 8.0;
        w[k + 1] += 9.0 * h / 8.0;
        w[k + 2] += 9.0 * h / 8.0;
        w[k + 3] += 3.0 * h / 8.0;
    }
    w
}

impl RadialGrid {
    pub fn new(dim: usize, r_max: f64, nodes: usize, spacing: Spacing) -> Result<Self> {
        if dim < 1 {
            return Err(Error::domain("dimension must be positive"));
        }
        if nodes < MIN_NODES {
            return Err(Error::domain(format!(
                "a grid needs at least {MIN_NODES} nodes, got {nodes}"
            )));
        }
        if !(r_max > 0.0 && r_max.is_finite()) {
            return Err(Error::domain("r_max must be positive"));
        }
        if let Spacing::Graded { stretch } = spacing {
            if !(stretch > 0.0 && stretch < 300.0) {
                return Err(Error::domain("stretch must lie in (0, 300)"));
            }
        }
        let dxi = 1.0 / (nodes - 1) as f64;
        let mut r = Vec::with_capacity(nodes);
        let mut jac = Vec::with_capacity(nodes);
        let mut jac_deriv = Vec::with_capacity(nodes);
        for i in 0..nodes {
            let xi = i as f64 * dxi;
            match spacing {
                Spacing::Uniform => {
                    r.push(r_max * xi);
                    jac.push(r_max);
                    jac_deriv.push(0.0);
                }
                Spacing::Graded { stretch: b } => {
                    let sb = b.sinh();
                    r.push(r_max * (b * xi).sinh() / sb);
                    jac.push(r_max * b * (b * xi).cosh() / sb);
                    jac_deriv.push(r_max * b * b * (b * xi).sinh() / sb);
                }
            }
        }
        r[nodes - 1] = r_max;
        Ok(RadialGrid {
            dim,
            spacing,
            r_max,
            nodes: r,
            jac,
            jac_deriv,
            dxi,
            simpson: simpson_weights(nodes, dxi),
        })
    }

    pub fn uniform(dim: usize, r_max: f64, nodes: usize) -> Result<Self> {
        Self::new(dim, r_max, nodes, Spacing::Uniform)
    }

    pub fn graded(dim: usize, r_max: f64, nodes: usize, stretch: f64) -> Result<Self> {
        Self::new(dim, r_max, nodes, Spacing::Graded { stretch })
    }

    /// Graded grid whose first cell is about `first_cell` wide.
    pub fn with_first_cell(dim: usize, r_max: f64, nodes: usize, first_cell: f64) -> Result<Self> {
        let uniform_cell = r_max / (nodes - 1).max(1) as f64;
        if first_cell >= uniform_cell {
            return Self::uniform(dim, r_max, nodes);
        }
        // r_max β / (sinh β (n-1)) is decreasing in β
        let target = first_cell / uniform_cell;
        let (mut lo, mut hi) = (1e-6_f64, 290.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid / mid.sinh() > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Self::graded(dim, r_max, nodes, 0.5 * (lo + hi))
    }

    pub fn default_for(dim: usize) -> Self {
        Self::graded(dim, DEFAULT_R_MAX, DEFAULT_NODES, DEFAULT_STRETCH)
            .expect("default grid parameters are valid")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Quadrature weights for `ω_N ∫ f r^{N-1} dr` against nodal samples.
    pub fn volume_weights(&self) -> Vec<f64> {
        let omega = sphere_area(self.dim);
        let nm1 = self.dim as i32 - 1;
        (0..self.len())
            .map(|i| omega * self.simpson[i] * self.jac[i] * self.nodes[i].powi(nm1))
            .collect()
    }

    /// `ω_N ∫ f(r) r^{N-1} dr` by composite Simpson in the grid variable.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.len() {
            return Err(Error::domain("sample count does not match the grid"));
        }
        let omega = sphere_area(self.dim);
        let nm1 = self.dim as i32 - 1;
        let mut acc = 0.0;
        for (i, &v) in f.iter().enumerate() {
            if v.is_nan() {
                return Err(Error::numeric(
                    format!("NaN sample at r = {}", self.nodes[i]),
                    f64::NAN,
                ));
            }
            acc += self.simpson[i] * v * self.jac[i] * self.nodes[i].powi(nm1);
        }
        Ok(omega * acc)
    }

    /// Fourth-order centered differences in `ξ`, with the even reflection
    /// at the origin and one-sided stencils at `r_max`.
    fn d_xi(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let at = |i: isize| -> f64 {
            if i < 0 {
                u[(-i) as usize]
            } else {
                u[i as usize]
            }
        };
        let h = self.dxi;
        let mut d = vec![0.0; n];
        for (i, di) in d.iter_mut().enumerate().take(n - 2) {
            let i = i as isize;
            *di = (-at(i + 2) + 8.0 * at(i + 1) - 8.0 * at(i - 1) + at(i - 2)) / (12.0 * h);
        }
        for i in [n - 2, n - 1] {
            // fourth-order backward stencil
            let k = i as isize - (n as isize - 5);
            let s: [f64; 5] = match k {
                3 => [-1.0, 6.0, -18.0, 10.0, 3.0],
                4 => [3.0, -16.0, 36.0, -48.0, 25.0],
                _ => unreachable!(),
            };
            let mut v = 0.0;
            for (j, c) in s.iter().enumerate() {
                v += c * u[n - 5 + j];
            }
            d[i] = v / (12.0 * h);
        }
        d
    }

    fn d2_xi(&self, u: &[f64]) -> Vec<f64> {
        let n = u.len();
        let at = |i: isize| -> f64 {
            if i < 0 {
                u[(-i) as usize]
            } else {
                u[i as usize]
            }
        };
        let h2 = self.dxi * self.dxi;
        let mut d = vec![0.0; n];
        for (i, di) in d.iter_mut().enumerate().take(n - 2) {
            let i = i as isize;
            *di = (-at(i + 2) + 16.0 * at(i + 1) - 30.0 * at(i) + 16.0 * at(i - 1) - at(i - 2))
                / (12.0 * h2);
        }
        for i in [n - 2, n - 1] {
            let k = i as isize - (n as isize - 6);
            let s: [f64; 6] = match k {
                4 => [1.0, -6.0, 14.0, -4.0, -15.0, 10.0],
                5 => [-10.0, 61.0, -156.0, 214.0, -154.0, 45.0],
                _ => unreachable!(),
            };
            let mut v = 0.0;
            for (j, c) in s.iter().enumerate() {
                v += c * u[n - 6 + j];
            }
            d[i] = v / (12.0 * h2);
        }
        d
    }

    /// `du/dr` at the nodes.
    pub fn derivative(&self, u: &[f64]) -> Vec<f64> {
        self.d_xi(u)
            .iter()
            .zip(&self.jac)
            .map(|(d, j)| d / j)
            .collect()
    }

    /// Radial Laplacian `u'' + (N-1)/r u'`, with `N u''(0)` at the origin.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let d1 = self.d_xi(u);
        let d2 = self.d2_xi(u);
        let nm1 = self.dim as f64 - 1.0;
        (0..u.len())
            .map(|i| {
                let j = self.jac[i];
                let urr = (d2[i] - self.jac_deriv[i] * d1[i] / j) / (j * j);
                if i == 0 {
                    self.dim as f64 * urr
                } else {
                    urr + nm1 / self.nodes[i] * d1[i] / j
                }
            })
            .collect()
    }

    /// Index of the last node not exceeding `r`.
    fn locate(&self, r: f64) -> usize {
        self.nodes.partition_point(|&x| x <= r).saturating_sub(1)
    }
}

/// A radial function with a lazily applied dilation
/// `(s⋆u)(r) = e^{Ns/2} u(e^s r)`.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    grid: Arc<RadialGrid>,
    values: Vec<f64>,
    dilation_log: f64,
}

/// `|∇u|₂²`, `|u|₂²`, `|u|_q^q` and `|u|_{2*}^{2*}` of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileNorms {
    pub grad_sq: f64,
    pub mass_sq: f64,
    pub lq: f64,
    pub crit: f64,
}

impl RadialProfile {
    pub fn new(grid: Arc<RadialGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::domain("sample count does not match the grid"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::numeric(
                format!("non-finite profile value at r = {}", grid.nodes[i]),
                f64::NAN,
            ));
        }
        Ok(RadialProfile {
            grid,
            values,
            dilation_log: 0.0,
        })
    }

    pub fn from_fn(grid: Arc<RadialGrid>, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.nodes.iter().map(|&r| f(r)).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<RadialGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// Samples of the undilated base function.
    pub fn base_values(&self) -> &[f64] {
        &self.values
    }

    pub fn dilation_log(&self) -> f64 {
        self.dilation_log
    }

    fn base_power(&self, p: f64) -> Result<f64> {
        let f: Vec<f64> = self.values.iter().map(|v| v.abs().powf(p)).collect();
        self.grid.integrate(&f)
    }

    /// `|u|_p^p`, using `|s⋆u|_p^p = e^{N(p-2)s/2} |u|_p^p`.
    pub fn power_integral(&self, p: f64) -> Result<f64> {
        if p < 1.0 {
            return Err(Error::domain(format!("L^p needs p >= 1, got {p}")));
        }
        let n = self.dim() as f64;
        Ok((0.5 * n * (p - 2.0) * self.dilation_log).exp() * self.base_power(p)?)
    }

    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        Ok(self.power_integral(p)?.powf(1.0 / p))
    }

    pub fn mass_sq(&self) -> Result<f64> {
        self.base_power(2.0)
    }

    /// `|∇u|₂²`, using `|∇(s⋆u)|₂² = e^{2s} |∇u|₂²`.
    pub fn grad_norm_sq(&self) -> Result<f64> {
        if self.values.len() < 3 {
            return Err(Error::domain("gradient needs at least three nodes"));
        }
        let d = self.grid.derivative(&self.values);
        let f: Vec<f64> = d.iter().map(|x| x * x).collect();
        Ok((2.0 * self.dilation_log).exp() * self.grid.integrate(&f)?)
    }

    pub fn norms(&self, q: f64) -> Result<ProfileNorms> {
        let ts = crate::constants::two_star(self.dim());
        Ok(ProfileNorms {
            grad_sq: self.grad_norm_sq()?,
            mass_sq: self.mass_sq()?,
            lq: self.power_integral(q)?,
            crit: self.power_integral(ts)?,
        })
    }

    pub fn dilate(&self, s: f64) -> RadialProfile {
        RadialProfile {
            grid: self.grid.clone(),
            values: self.values.clone(),
            dilation_log: self.dilation_log + s,
        }
    }

    /// Cubic Hermite interpolation of the base function, zero beyond `r_max`.
    pub fn base_value_at(&self, r: f64) -> f64 {
        self.interpolate(&self.grid.derivative(&self.values), r)
    }

    fn interpolate(&self, du: &[f64], r: f64) -> f64 {
        let g = &self.grid;
        let r = r.abs();
        if r >= g.r_max {
            return if r == g.r_max { self.values[g.len() - 1] } else { 0.0 };
        }
        let i = g.locate(r).min(g.len() - 2);
        let (r0, r1) = (g.nodes[i], g.nodes[i + 1]);
        let h = r1 - r0;
        let t = (r - r0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.values[i]
            + (t3 - 2.0 * t2 + t) * h * du[i]
            + (-2.0 * t3 + 3.0 * t2) * self.values[i + 1]
            + (t3 - t2) * h * du[i + 1]
    }

    /// Point values of the dilated function on the base grid, with the
    /// dilation folded into the samples (`dilation_log` becomes 0).
    pub fn materialize(&self) -> RadialProfile {
        if self.dilation_log == 0.0 {
            return self.clone();
        }
        let s = self.dilation_log;
        let amp = (0.5 * self.dim() as f64 * s).exp();
        let es = s.exp();
        let du = self.grid.derivative(&self.values);
        let values = self
            .grid
            .nodes
            .iter()
            .map(|&r| amp * self.interpolate(&du, es * r))
            .collect();
        RadialProfile {
            grid: self.grid.clone(),
            values,
            dilation_log: 0.0,
        }
    }

    /// Point values of the dilated function on the grid.
    pub fn values(&self) -> Vec<f64> {
        self.materialize().values
    }

    /// Moves the samples onto another grid by interpolation.
    pub fn resample(&self, grid: Arc<RadialGrid>) -> Result<RadialProfile> {
        let m = self.materialize();
        let du = m.grid.derivative(&m.values);
        let values = grid.nodes.iter().map(|&r| m.interpolate(&du, r)).collect();
        RadialProfile::new(grid, values)
    }

    pub fn scale(&self, c: f64) -> RadialProfile {
        RadialProfile {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
            dilation_log: self.dilation_log,
        }
    }

    /// `a u / |u|₂`.
    pub fn normalize_mass(&self, a: f64) -> Result<RadialProfile> {
        if !(a > 0.0) {
            return Err(Error::domain("target mass must be positive"));
        }
        let m = self.mass_sq()?.sqrt();
        if !(m > 0.0) {
            return Err(Error::domain("cannot normalize the zero profile"));
        }
        let out = self.scale(a / m);
        // one corrective pass absorbs the rounding in the first scaling
        let m2 = out.mass_sq()?.sqrt();
        Ok(out.scale(a / m2))
    }

    /// Symmetric decreasing rearrangement of a nonnegative profile.
    ///
    /// The piecewise-linear interpolant is cut into sub-cells whose measure
    /// is known exactly; sub-cells are sorted by value and laid out as
    /// concentric shells of the same measure.
    pub fn rearrange_decreasing(&self) -> Result<RadialProfile> {
        if let Some(v) = self.values.iter().find(|&&v| v < 0.0) {
            return Err(Error::domain(format!(
                "rearrangement needs a nonnegative profile, found {v}"
            )));
        }
        if self.values.windows(2).all(|w| w[1] <= w[0]) {
            return Ok(self.clone());
        }
        const SUB: usize = 8;
        let g = &self.grid;
        let n = g.dim as f64;
        let omega = sphere_area(g.dim);
        let ball = |r: f64| omega * r.powf(n) / n;
        let mut cells: Vec<(f64, f64)> = Vec::with_capacity(g.len() * SUB);
        for i in 0..g.len() - 1 {
            let (r0, r1) = (g.nodes[i], g.nodes[i + 1]);
            let (u0, u1) = (self.values[i], self.values[i + 1]);
            for j in 0..SUB {
                let ta = j as f64 / SUB as f64;
                let tb = (j + 1) as f64 / SUB as f64;
                let tm = 0.5 * (ta + tb);
                let vol = ball(r0 + tb * (r1 - r0)) - ball(r0 + ta * (r1 - r0));
                cells.push((u0 + tm * (u1 - u0), vol));
            }
        }
        cells.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut centers = Vec::with_capacity(cells.len());
        let mut acc = 0.0;
        for &(v, vol) in &cells {
            centers.push(((n * (acc + 0.5 * vol) / omega).powf(1.0 / n), v));
            acc += vol;
        }
        let top = self.values.iter().cloned().fold(0.0, f64::max);
        let mut out = Vec::with_capacity(g.len());
        let mut k = 0;
        for &r in &g.nodes {
            while k < centers.len() && centers[k].0 < r {
                k += 1;
            }
            let v = if k == 0 {
                let (rc, vc) = centers[0];
                top + (vc - top) * (r / rc)
            } else if k == centers.len() {
                centers[k - 1].1
            } else {
                let (ra, va) = centers[k - 1];
                let (rb, vb) = centers[k];
                va + (vb - va) * (r - ra) / (rb - ra)
            };
            out.push(v);
        }
        let mut p = RadialProfile::new(self.grid.clone(), out)?;
        p.dilation_log = self.dilation_log;
        Ok(p)
    }

    /// Writes `r,value` rows for the dilated function, preceded by a
    /// comment line recording the grid.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let g = &self.grid;
        let spacing = match g.spacing {
            Spacing::Uniform => "uniform".to_string(),
            Spacing::Graded { stretch } => format!("graded stretch={stretch:?}"),
        };
        writeln!(
            w,
            "# N={} dilation_log={:?} r_max={:?} nodes={} spacing={}",
            g.dim,
            self.dilation_log,
            g.r_max,
            g.len(),
            spacing
        )?;
        writeln!(w, "r,value")?;
        for (r, v) in g.nodes.iter().zip(&self.values) {
            writeln!(w, "{r:?},{v:?}")?;
        }
        Ok(())
    }

    /// Reads a profile written by [`RadialProfile::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<RadialProfile> {
        let bad = |m: &str| Error::domain(format!("malformed profile CSV: {m}"));
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| bad("empty input"))?
            .map_err(|e| bad(&e.to_string()))?;
        let mut dim = None;
        let mut s = 0.0;
        let mut r_max = None;
        let mut nodes = None;
        let mut stretch = None;
        for tok in header.trim_start_matches('#').split_whitespace() {
            if let Some((k, v)) = tok.split_once('=') {
                let parse = |v: &str| v.parse::<f64>().map_err(|_| bad(tok));
                match k {
                    "N" => dim = Some(v.parse::<usize>().map_err(|_| bad(tok))?),
                    "dilation_log" => s = parse(v)?,
                    "r_max" => r_max = Some(parse(v)?),
                    "nodes" => nodes = Some(v.parse::<usize>().map_err(|_| bad(tok))?),
                    "stretch" => stretch = Some(parse(v)?),
                    _ => {}
                }
            }
        }
        let dim = dim.ok_or_else(|| bad("missing N"))?;
        let r_max = r_max.ok_or_else(|| bad("missing r_max"))?;
        let nodes = nodes.ok_or_else(|| bad("missing nodes"))?;
        let spacing = match stretch {
            Some(b) => Spacing::Graded { stretch: b },
            None => Spacing::Uniform,
        };
        let grid = RadialGrid::new(dim, r_max, nodes, spacing)?;
        let mut values = Vec::with_capacity(nodes);
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(&e.to_string()))?;
            if i == 0 && line.trim() == "r,value" {
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let (rs, vs) = line.split_once(',').ok_or_else(|| bad(&line))?;
            let rv: f64 = rs.trim().parse().map_err(|_| bad(&line))?;
            let v: f64 = vs.trim().parse().map_err(|_| bad(&line))?;
            let k = values.len();
            if k >= nodes || (rv - grid.nodes[k]).abs() > 1e-9 * r_max {
                return Err(bad("node positions do not match the header"));
            }
            values.push(v);
        }
        let mut p = RadialProfile::new(Arc::new(grid), values)?;
        p.dilation_log = s;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid3() -> Arc<RadialGrid> {
        Arc::new(RadialGrid::default_for(3))
    }

    #[test]
    fn zero_integrand() {
        let g = grid3();
        assert_eq!(g.integrate(&vec![0.0; g.len()]).unwrap(), 0.0);
    }

    #[test]
    fn unit_ball_volume() {
        for g in [
            RadialGrid::graded(3, 1.0, 1001, 3.0).unwrap(),
            RadialGrid::uniform(3, 1.0, 1000).unwrap(),
        ] {
            let v = g.integrate(&vec![1.0; g.len()]).unwrap();
            assert!((v / (4.0 * PI / 3.0) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn gaussian_integral() {
        for n in 3..=6 {
            let g = RadialGrid::default_for(n);
            let f: Vec<f64> = g.nodes().iter().map(|r| (-r * r).exp()).collect();
            let exact = PI.powf(n as f64 / 2.0);
            assert!((g.integrate(&f).unwrap() / exact - 1.0).abs() < 1e-8, "N={n}");
        }
    }

    #[test]
    fn nan_sample_rejected() {
        let g = grid3();
        let mut f = vec![1.0; g.len()];
        f[10] = f64::NAN;
        assert!(matches!(g.integrate(&f), Err(Error::Numeric { .. })));
    }

    #[test]
    fn simpson_order() {
        let err = |n: usize| {
            let g = RadialGrid::uniform(3, 40.0, n).unwrap();
            let f: Vec<f64> = g.nodes().iter().map(|r| (-r * r).exp()).collect();
            (g.integrate(&f).unwrap() - PI.powf(1.5)).abs()
        };
        let (e1, e2) = (err(65), err(129));
        assert!(e1 / e2 >= 8.0, "{e1} {e2}");
    }

    #[test]
    fn gaussian_gradient() {
        let p = RadialProfile::from_fn(grid3(), |r| (-0.5 * r * r).exp()).unwrap();
        // |∇u|² = ∫ r² e^{-r²} = (3/2) π^{3/2}
        let exact = 1.5 * PI.powf(1.5);
        assert!((p.grad_norm_sq().unwrap() / exact - 1.0).abs() < 1e-6);
        let c = RadialProfile::from_fn(grid3(), |_| 2.0).unwrap();
        assert!(c.grad_norm_sq().unwrap().abs() < 1e-10);
    }

    #[test]
    fn dilation_laws() {
        let p = RadialProfile::from_fn(grid3(), |r| (-r * r).exp() * (1.0 + r)).unwrap();
        let g0 = p.grad_norm_sq().unwrap();
        assert!((p.dilate(1.0).grad_norm_sq().unwrap() / (2f64.exp() * g0) - 1.0).abs() < 1e-12);
        let m = p.mass_sq().unwrap();
        for s in [-1.0, 0.0, 2.0] {
            assert_eq!(p.dilate(s).mass_sq().unwrap(), m);
        }
        let c = p.power_integral(6.0).unwrap();
        let cs = p.dilate(0.7).power_integral(6.0).unwrap();
        assert!((cs / ((6.0 * 0.7f64).exp() * c) - 1.0).abs() < 1e-12);
        let back = p.dilate(0.37).dilate(-0.37);
        assert_eq!(back.dilation_log(), 0.0);
        assert_eq!(back.norms(4.0).unwrap(), p.norms(4.0).unwrap());
    }

    #[test]
    fn materialize_matches_closed_form() {
        let p = RadialProfile::from_fn(grid3(), |r| (-r * r).exp()).unwrap();
        let s = 0.4;
        let m = p.dilate(s).materialize();
        for (&r, &v) in m.grid().nodes().iter().zip(m.base_values()).step_by(37) {
            let exact = (1.5 * s).exp() * (-(s.exp() * r).powi(2)).exp();
            assert!((v - exact).abs() < 1e-7, "r={r}");
        }
    }

    #[test]
    fn materialize_is_continuous_in_s() {
        let p = RadialProfile::from_fn(grid3(), |r| 1.0 / (1.0 + r * r).powi(2)).unwrap();
        let mut prev = f64::INFINITY;
        for s in [1e-1, 1e-2, 1e-3, 1e-4] {
            let m = p.dilate(s).materialize();
            let diff: Vec<f64> = m
                .base_values()
                .iter()
                .zip(p.base_values())
                .map(|(a, b)| (a - b).powi(2))
                .collect();
            let d = p.grid().integrate(&diff).unwrap().sqrt();
            assert!(d < prev);
            prev = d;
        }
        assert!(prev < 1e-3);
    }

    #[test]
    fn normalization() {
        let p = RadialProfile::from_fn(grid3(), |r| (-r).exp()).unwrap();
        let n = p.normalize_mass(1.5).unwrap();
        assert!((n.mass_sq().unwrap().sqrt() / 1.5 - 1.0).abs() < 1e-12);
        let again = n.normalize_mass(1.5).unwrap();
        for (a, b) in again.base_values().iter().zip(n.base_values()) {
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1e-300));
        }
        let seven = p.scale(7.0).normalize_mass(1.5).unwrap();
        for (a, b) in seven.base_values().iter().zip(n.base_values()) {
            assert!((a - b).abs() <= 1e-13 * b.abs().max(1e-300));
        }
        let z = RadialProfile::from_fn(grid3(), |_| 0.0).unwrap();
        assert!(z.normalize_mass(1.0).is_err());
    }

    #[test]
    fn rearrangement_of_decreasing_profile_is_identity() {
        let p = RadialProfile::from_fn(grid3(), |r| (-r).exp()).unwrap();
        let r = p.rearrange_decreasing().unwrap();
        assert_eq!(r.base_values(), p.base_values());
    }

    #[test]
    fn rearrangement_of_two_bumps() {
        let g = Arc::new(RadialGrid::graded(3, 20.0, 4096, 3.0).unwrap());
        let p = RadialProfile::from_fn(g, |r| {
            (-(r - 3.0).powi(2)).exp() + 0.5 * (-(r * r)).exp()
        })
        .unwrap();
        let star = p.rearrange_decreasing().unwrap();
        assert!(star.base_values().windows(2).all(|w| w[1] <= w[0] + 1e-15));
        for q in [2.0, 4.0, 6.0] {
            let a = p.lp_norm(q).unwrap();
            let b = star.lp_norm(q).unwrap();
            assert!((a / b - 1.0).abs() < 1e-4, "p={q}: {a} vs {b}");
        }
        assert!(star.grad_norm_sq().unwrap() <= p.grad_norm_sq().unwrap());
        let neg = p.scale(-1.0);
        assert!(neg.rearrange_decreasing().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let p = RadialProfile::from_fn(grid3(), |r| (-r).exp())
            .unwrap()
            .dilate(0.25);
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let q = RadialProfile::read_csv(&buf[..]).unwrap();
        assert_eq!(q.dilation_log(), 0.25);
        assert_eq!(q.base_values(), p.base_values());
    }

    #[test]
    fn laplacian_of_gaussian() {
        let p = RadialProfile::from_fn(grid3(), |r| (-r * r).exp()).unwrap();
        let lap = p.grid().laplacian(p.base_values());
        for (&r, &l) in p.grid().nodes().iter().zip(&lap).step_by(53) {
            let exact = (4.0 * r * r - 6.0) * (-r * r).exp();
            assert!((l - exact).abs() < 1e-5, "r={r}: {l} vs {exact}");
        }
    }
}
