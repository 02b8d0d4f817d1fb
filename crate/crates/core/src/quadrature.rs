//! Tensor-product quadrature on cylinder regions `R^k x C`.
//!
//! A cylinder point is parametrized by its axial part `x in R^k`, the cone
//! radius `r` and link angles `theta in T^{m-1}`. The `(|x - c|, r)` quarter
//! plane is handled in polar form `|x - c| = R cos(psi)`, `r = R sin(psi)`, so
//! that the parameter measure becomes
//!
//! ```text
//! dx dr dtheta = R^k cos(psi)^{k-1} dR dpsi dsigma dtheta
//! ```
//!
//! with `sigma` on the unit sphere `S^{k-1}`. Torus integrals use the
//! trapezoidal rule, everything else Gauss-Legendre. Reductions go through
//! [`pairwise_sum`] over an ordered partition, so results do not depend on the
//! thread count.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Torus rules are capped at this many nodes in total.
pub const MAX_TORUS_NODES: usize = 1 << 14;

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        dp = if d != 0.0 { d } else { dp };
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss_on(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(n);
    let h = 0.5 * (b - a);
    x.iter().zip(&w).map(|(xi, wi)| (a + h * (xi + 1.0), h * wi)).collect()
}

/// Sum with `O(log n)` error growth and a fixed association order.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Node counts of the tensor-product rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureGrid {
    /// Trapezoid nodes per torus circle (reduced for large `m`).
    pub n_theta: usize,
    pub n_radial: usize,
    pub n_polar: usize,
    /// Nodes per sphere coordinate for `k >= 2`.
    pub n_sphere: usize,
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        Self { n_theta: 16, n_radial: 20, n_polar: 20, n_sphere: 12 }
    }
}

impl QuadratureGrid {
    /// The companion rule used for error estimates.
    pub fn coarse(&self) -> Self {
        let shrink = |n: usize| (n * 3 / 4).max(2);
        Self {
            n_theta: shrink(self.n_theta),
            n_radial: shrink(self.n_radial),
            n_polar: shrink(self.n_polar),
            n_sphere: shrink(self.n_sphere),
        }
    }

    pub fn torus_per_circle(&self, m: usize) -> usize {
        let dims = (m - 1) as u32;
        let mut n = self.n_theta.max(1);
        while n > 2 && n.checked_pow(dims).is_none_or(|t| t > MAX_TORUS_NODES) {
            n -= 1;
        }
        n
    }
}

/// Uniform product rule on `T^{dims}` with total weight `(2 pi)^dims`.
#[derive(Debug, Clone)]
pub struct TorusRule {
    dims: usize,
    per_circle: usize,
}

impl TorusRule {
    pub fn new(dims: usize, per_circle: usize) -> Self {
        Self { dims, per_circle }
    }

    pub fn len(&self) -> usize {
        self.per_circle.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weight(&self) -> f64 {
        (2.0 * PI / self.per_circle as f64).powi(self.dims as i32)
    }

    pub fn node(&self, mut idx: usize) -> Vec<f64> {
        let h = 2.0 * PI / self.per_circle as f64;
        let mut theta = vec![0.0; self.dims];
        for t in theta.iter_mut() {
            *t = (idx % self.per_circle) as f64 * h;
            idx /= self.per_circle;
        }
        theta
    }

    /// Parallel integral of `f` over the torus.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        let parts: Vec<f64> = (0..self.len()).into_par_iter().map(|i| f(&self.node(i))).collect();
        pairwise_sum(&parts) * self.weight()
    }
}

/// Quadrature on the unit sphere `S^{k-1}` for `k <= 3`.
pub fn sphere_rule(k: usize, n: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    match k {
        0 => Ok(vec![(Vec::new(), 1.0)]),
        1 => Ok(vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)]),
        2 => {
            let n = n.max(3);
            let h = 2.0 * PI / n as f64;
            Ok((0..n).map(|i| (vec![(i as f64 * h).cos(), (i as f64 * h).sin()], h)).collect())
        }
        3 => {
            let n = n.max(3);
            let h = 2.0 * PI / (2 * n) as f64;
            let mut out = Vec::with_capacity(2 * n * n);
            for (c, wc) in gauss_on(n, -1.0, 1.0) {
                let s = (1.0 - c * c).sqrt();
                for j in 0..2 * n {
                    let a = j as f64 * h;
                    out.push((vec![s * a.cos(), s * a.sin(), c], wc * h));
                }
            }
            Ok(out)
        }
        _ => Err(Error::UnsupportedDimension(format!(
            "axial dimension k = {k}; quadrature supports k <= 3"
        ))),
    }
}

/// `|S^{k-1}|`, with `|S^{-1}| = 1` so that `k = 0` needs no special case.
pub fn sphere_area(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => {
            // 2 pi^{k/2} / Gamma(k/2) via the recursion |S^{k+1}| = 2 pi |S^{k-1}| / k.
            2.0 * PI * sphere_area(k - 2) / (k - 2) as f64
        }
    }
}

/// A point of the cylinder in parameter form.
#[derive(Debug, Clone)]
pub struct CylinderNode<'a> {
    pub x: &'a [f64],
    pub r: f64,
    pub theta: &'a [f64],
}

/// A ray direction `(psi, sigma, theta)` of the polar parametrization.
#[derive(Debug, Clone)]
pub struct Direction {
    pub cos_psi: f64,
    pub sin_psi: f64,
    pub sigma: Vec<f64>,
    pub theta: Vec<f64>,
    /// Product of torus, sphere and `psi` weights (no Jacobian).
    pub weight: f64,
}

impl Direction {
    /// Axial part and cone radius of the point at distance `big_r` along the ray.
    pub fn point(&self, center: &[f64], big_r: f64) -> (Vec<f64>, f64) {
        let s = big_r * self.cos_psi;
        let x = center.iter().zip(&self.sigma).map(|(c, g)| c + s * g).collect();
        (x, big_r * self.sin_psi)
    }

    /// Parameter-measure Jacobian `R^k cos(psi)^{k-1}` at radius `big_r`.
    pub fn polar_jacobian(&self, k: usize, big_r: f64) -> f64 {
        if k == 0 {
            1.0
        } else {
            big_r.powi(k as i32) * self.cos_psi.powi(k as i32 - 1)
        }
    }
}

/// Ray directions covering the full quarter plane (`psi in [0, pi/2]`).
#[derive(Debug, Clone)]
pub struct DirectionRule {
    k: usize,
    torus: TorusRule,
    psi: Vec<(f64, f64)>,
    sphere: Vec<(Vec<f64>, f64)>,
}

impl DirectionRule {
    pub fn new(k: usize, m: usize, grid: &QuadratureGrid) -> Result<Self> {
        let torus = TorusRule::new(m - 1, grid.torus_per_circle(m));
        let psi = if k == 0 { vec![(FRAC_PI_2, 1.0)] } else { gauss_on(grid.n_polar, 0.0, FRAC_PI_2) };
        let sphere = sphere_rule(k, grid.n_sphere)?;
        Ok(Self { k, torus, psi, sphere })
    }

    pub fn len(&self) -> usize {
        self.torus.len() * self.psi.len() * self.sphere.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axial_dim(&self) -> usize {
        self.k
    }

    /// Parallel sum of `f(direction)` over all directions, deterministic.
    pub fn sum<F>(&self, f: F) -> f64
    where
        F: Fn(&Direction) -> f64 + Sync,
    {
        let tw = self.torus.weight();
        let parts: Vec<f64> = (0..self.torus.len())
            .into_par_iter()
            .map(|ti| {
                let theta = self.torus.node(ti);
                let mut inner = Vec::with_capacity(self.psi.len() * self.sphere.len());
                for &(psi, wp) in &self.psi {
                    for (sigma, ws) in &self.sphere {
                        let d = Direction {
                            cos_psi: if self.k == 0 { 0.0 } else { psi.cos() },
                            sin_psi: if self.k == 0 { 1.0 } else { psi.sin() },
                            sigma: sigma.clone(),
                            theta: theta.clone(),
                            weight: tw * wp * ws,
                        };
                        inner.push(f(&d));
                    }
                }
                pairwise_sum(&inner)
            })
            .collect();
        pairwise_sum(&parts)
    }

    /// Like [`sum`](Self::sum) for several integrands sharing per-ray work.
    pub fn sum_array<const N: usize, F>(&self, f: F) -> [f64; N]
    where
        F: Fn(&Direction) -> [f64; N] + Sync,
    {
        let tw = self.torus.weight();
        let parts: Vec<[f64; N]> = (0..self.torus.len())
            .into_par_iter()
            .map(|ti| {
                let theta = self.torus.node(ti);
                let mut cols = vec![Vec::with_capacity(self.psi.len() * self.sphere.len()); N];
                for &(psi, wp) in &self.psi {
                    for (sigma, ws) in &self.sphere {
                        let d = Direction {
                            cos_psi: if self.k == 0 { 0.0 } else { psi.cos() },
                            sin_psi: if self.k == 0 { 1.0 } else { psi.sin() },
                            sigma: sigma.clone(),
                            theta: theta.clone(),
                            weight: tw * wp * ws,
                        };
                        for (c, v) in cols.iter_mut().zip(f(&d)) {
                            c.push(v);
                        }
                    }
                }
                std::array::from_fn(|i| pairwise_sum(&cols[i]))
            })
            .collect();
        std::array::from_fn(|i| pairwise_sum(&parts.iter().map(|p| p[i]).collect::<Vec<_>>()))
    }

    /// Maximum of `f(direction)` over all directions.
    pub fn max<F>(&self, f: F) -> f64
    where
        F: Fn(&Direction) -> f64 + Sync,
    {
        let tw = self.torus.weight();
        (0..self.torus.len())
            .into_par_iter()
            .map(|ti| {
                let theta = self.torus.node(ti);
                let mut best = f64::NEG_INFINITY;
                for &(psi, wp) in &self.psi {
                    for (sigma, ws) in &self.sphere {
                        let d = Direction {
                            cos_psi: if self.k == 0 { 0.0 } else { psi.cos() },
                            sin_psi: if self.k == 0 { 1.0 } else { psi.sin() },
                            sigma: sigma.clone(),
                            theta: theta.clone(),
                            weight: tw * wp * ws,
                        };
                        best = best.max(f(&d));
                    }
                }
                best
            })
            .reduce(|| f64::NEG_INFINITY, f64::max)
    }
}

/// Integral over `C_cyl ∩ B_rho(c) ∩ {r > tau rho}` in the *parameter* measure
/// `dx dr dtheta`; the integrand is responsible for any area factor.
///
/// The cutoff makes the polar range depend on `R`; the substitution
/// `R = tau rho + (1 - tau) rho t^2` keeps the outer integrand smooth.
pub fn integrate_cut_region<F>(
    k: usize,
    m: usize,
    grid: &QuadratureGrid,
    rho: f64,
    tau: f64,
    center: &[f64],
    f: F,
) -> Result<f64>
where
    F: Fn(&CylinderNode) -> f64 + Sync,
{
    if !(rho > 0.0) || !(0.0..1.0).contains(&tau) {
        return Err(Error::Region(format!("need rho > 0 and 0 <= tau < 1 (rho = {rho}, tau = {tau})")));
    }
    if center.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: center.len() });
    }
    if tau == 0.0 {
        let rule = DirectionRule::new(k, m, grid)?;
        let radial = gauss_on(grid.n_radial, 0.0, rho);
        return Ok(rule.sum(|d| {
            let terms: Vec<f64> = radial
                .iter()
                .map(|&(rr, wr)| {
                    let (x, r) = d.point(center, rr);
                    wr * d.polar_jacobian(k, rr) * f(&CylinderNode { x: &x, r, theta: &d.theta })
                })
                .collect();
            d.weight * pairwise_sum(&terms)
        }));
    }
    let torus = TorusRule::new(m - 1, grid.torus_per_circle(m));
    let sphere = sphere_rule(k, grid.n_sphere)?;
    let outer = gauss_on(grid.n_radial, 0.0, 1.0);
    let cut = tau * rho;
    let parts: Vec<f64> = (0..torus.len())
        .into_par_iter()
        .map(|ti| {
            let theta = torus.node(ti);
            let mut acc = Vec::with_capacity(outer.len());
            for &(t, wt) in &outer {
                let big_r = cut + (rho - cut) * t * t;
                let dr = 2.0 * (rho - cut) * t * wt;
                if k == 0 {
                    acc.push(dr * f(&CylinderNode { x: &[], r: big_r, theta: &theta }));
                    continue;
                }
                let psi0 = (cut / big_r).min(1.0).asin();
                let mut inner = Vec::new();
                for (psi, wp) in gauss_on(grid.n_polar, psi0, FRAC_PI_2) {
                    let (c, s) = (psi.cos(), psi.sin());
                    let jac = big_r.powi(k as i32) * c.powi(k as i32 - 1);
                    for (sigma, ws) in &sphere {
                        let x: Vec<f64> =
                            center.iter().zip(sigma).map(|(ci, g)| ci + big_r * c * g).collect();
                        inner.push(wp * ws * jac * f(&CylinderNode { x: &x, r: big_r * s, theta: &theta }));
                    }
                }
                acc.push(dr * pairwise_sum(&inner));
            }
            pairwise_sum(&acc)
        })
        .collect();
    Ok(pairwise_sum(&parts) * torus.weight())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials() {
        for n in 1..12 {
            let rule = gauss_on(n, -0.5, 2.0);
            for deg in 0..(2 * n) {
                let q: f64 = rule.iter().map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = (2f64.powi(deg as i32 + 1) - (-0.5f64).powi(deg as i32 + 1)) / (deg + 1) as f64;
                assert!((q - exact).abs() < 1e-12 * exact.abs().max(1.0), "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn torus_rule_exact_on_trig() {
        let t = TorusRule::new(2, 8);
        let v = t.integrate(|th| (3.0 * th[0] - 2.0 * th[1]).cos().powi(2));
        assert!((v - 2.0 * PI * PI).abs() < 1e-12);
        let z = t.integrate(|th| (th[0] + th[1]).sin());
        assert!(z.abs() < 1e-13);
    }

    #[test]
    fn sphere_rules_have_correct_area() {
        for k in 0..=3 {
            let s: f64 = sphere_rule(k, 6).unwrap().iter().map(|(_, w)| w).sum();
            assert!((s - sphere_area(k)).abs() < 1e-12);
        }
        assert!(sphere_rule(4, 6).is_err());
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
    }

    #[test]
    fn pairwise_matches_naive() {
        let v: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        assert!((pairwise_sum(&v) - v.iter().sum::<f64>()).abs() < 1e-12);
    }
}
