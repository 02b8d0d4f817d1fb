//! Measured quantities on graphs over cylinder models: scale-invariant norms,
//! the volume excess in density and monotonicity form, Hausdorff distances
//! and the pointwise identities of exact special Lagrangians.
//!
//! A graph `N` is the image of the first-order map
//! `Phi(p) = U (P(p) - J W(p))` with `W = grad f` (see [`crate::geometry`]).
//! Because `P` is tangent to the model and `J W` normal to it,
//! `|Phi - c|^2 = |P - c|^2 + |W|^2` exactly for any axial center `c`, so
//! `N ∩ B_rho(c)` is star-shaped in the polar parametrization and every ray is
//! cut off at the root of `R^2 + |W(R)|^2 = rho^2`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    apply, gradient_norm, graph_sample, inverse_link_metric, link_metric_sqrt_det, norm, real_dot, CylinderModel,
    GraphSample, C64,
};
use crate::harmonics::{link_volume, scale_norm_with, HarmonicExpansion};
use crate::quadrature::{gauss_on, pairwise_sum, sphere_area, sphere_rule, DirectionRule, QuadratureGrid, TorusRule};

/// Knobs shared by the graph integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExcessOptions {
    pub grid: QuadratureGrid,
    /// Cutoff `tau` of the region on which the graph regime is checked when
    /// the caller has no cutoff of its own.
    pub regime_tau: f64,
    /// Upper bound for `max r^{-1} |df|`.
    pub regime_limit: f64,
    /// Also evaluate on the coarse companion grid to report an error estimate.
    pub error_estimate: bool,
}

impl Default for ExcessOptions {
    fn default() -> Self {
        Self { grid: QuadratureGrid::default(), regime_tau: 0.1, regime_limit: 0.1, error_estimate: true }
    }
}

/// A ball `B_rho(c)`, optionally cut to `{r > tau rho}`, with `c` on the axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub rho: f64,
    pub tau: f64,
    /// Restrict to `{r > tau rho}`.
    pub cut: bool,
    /// Axial center in model coordinates; empty means the origin.
    #[serde(default)]
    pub center: Vec<f64>,
}

impl RegionSpec {
    pub fn ball(rho: f64) -> Result<Self> {
        Self::new(rho, 0.1, false, Vec::new())
    }

    pub fn cut(rho: f64, tau: f64) -> Result<Self> {
        Self::new(rho, tau, true, Vec::new())
    }

    pub fn new(rho: f64, tau: f64, cut: bool, center: Vec<f64>) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::Region(format!("radius must be positive, got {rho}")));
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Region(format!("tau must lie in (0, 1), got {tau}")));
        }
        Ok(Self { rho, tau, cut, center })
    }

    pub fn center_for(&self, k: usize) -> Result<Vec<f64>> {
        if self.center.is_empty() {
            return Ok(vec![0.0; k]);
        }
        if self.center.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: self.center.len() });
        }
        Ok(self.center.clone())
    }

    /// Ambient membership test, with the axis and cutoff taken from `frame`.
    pub fn contains(&self, frame: &CylinderModel, q: &[C64]) -> Result<bool> {
        let c = self.center_for(frame.axial_dim())?;
        let mut z = frame.to_model_frame(q);
        for (zi, ci) in z.iter_mut().zip(&c) {
            *zi -= ci;
        }
        if norm(&z) > self.rho {
            return Ok(false);
        }
        Ok(!self.cut || frame.cone_radius(q) > self.tau * self.rho)
    }
}

fn check_pair(model: &CylinderModel, f: &HarmonicExpansion) -> Result<()> {
    if f.axial_dim() != model.axial_dim() || f.m() != model.m() {
        return Err(Error::Input(format!(
            "expansion lives on R^{} x C^{}, model on R^{} x C^{}",
            f.axial_dim(),
            f.m(),
            model.axial_dim(),
            model.m()
        )));
    }
    Ok(())
}

/// `max r^{-1} |df|` over `C ∩ B_rho(c) ∩ {r > tau rho}` at quadrature nodes.
pub fn regime_max(f: &HarmonicExpansion, rho: f64, tau: f64, center: &[f64], grid: &QuadratureGrid) -> Result<f64> {
    let (k, m) = (f.axial_dim(), f.m());
    if f.is_zero() {
        return Ok(0.0);
    }
    let rule = DirectionRule::new(k, m, grid)?;
    let radial = gauss_on(grid.n_radial, 0.0, rho);
    let mut ends = radial.iter().map(|&(r, _)| r).collect::<Vec<_>>();
    ends.push(rho);
    let v = rule.max(|d| {
        let mut best = f64::NEG_INFINITY;
        for &big_r in &ends {
            let (x, r) = d.point(center, big_r);
            if r <= tau * rho {
                continue;
            }
            if let Ok(j) = f.jet(&x, r, &d.theta) {
                best = best.max(gradient_norm(&j, k, m, r) / r);
            }
        }
        best
    });
    Ok(v.max(0.0))
}

/// Fails with a regime error if `max r^{-1}|df| >= limit` on the cut region.
pub fn check_regime(f: &HarmonicExpansion, rho: f64, tau: f64, center: &[f64], opts: &ExcessOptions) -> Result<f64> {
    let v = regime_max(f, rho, tau, center, &opts.grid)?;
    if v >= opts.regime_limit {
        return Err(Error::Regime { max: v, limit: opts.regime_limit });
    }
    Ok(v)
}

/// Per-ray radius where the graph leaves `B_rho(c)`.
fn ray_exit(f: &HarmonicExpansion, d: &crate::quadrature::Direction, center: &[f64], rho: f64) -> Result<f64> {
    let (k, m) = (f.axial_dim(), f.m());
    if f.is_zero() {
        return Ok(rho);
    }
    let mut big_r = rho;
    for _ in 0..200 {
        let (x, r) = d.point(center, big_r);
        let w = gradient_norm(&f.jet(&x, r.max(1e-300), &d.theta)?, k, m, r.max(1e-300));
        let s = rho * rho - w * w;
        if s <= 0.0 {
            return Err(Error::Regime { max: w / rho, limit: 1.0 });
        }
        let next = s.sqrt();
        if (next - big_r).abs() <= 1e-15 * rho {
            return Ok(next);
        }
        big_r = next;
    }
    Err(Error::Regime { max: f64::NAN, limit: 1.0 })
}

/// Parameters and quadrature factor of one node of a graph-ball rule.
pub struct GraphNode<'a> {
    pub x: &'a [f64],
    pub r: f64,
    pub theta: &'a [f64],
    pub sample: &'a GraphSample,
    /// Position relative to the ambient center.
    pub position: &'a [C64],
}

/// `int_{N ∩ B_rho(c)} g` with the graph area element.
pub fn graph_ball_integral<G>(
    model: &CylinderModel,
    f: &HarmonicExpansion,
    rho: f64,
    center: &[f64],
    grid: &QuadratureGrid,
    g: G,
) -> Result<f64>
where
    G: Fn(&GraphNode) -> f64 + Sync,
{
    let [v] = graph_ball_integrals(model, f, rho, center, grid, |nd| [g(nd)])?;
    Ok(v)
}

/// Several integrals over `N ∩ B_rho(c)` sharing the graph samples.
pub fn graph_ball_integrals<const K: usize, G>(
    model: &CylinderModel,
    f: &HarmonicExpansion,
    rho: f64,
    center: &[f64],
    grid: &QuadratureGrid,
    g: G,
) -> Result<[f64; K]>
where
    G: Fn(&GraphNode) -> [f64; K] + Sync,
{
    check_pair(model, f)?;
    let k = model.axial_dim();
    let rule = DirectionRule::new(k, model.m(), grid)?;
    let c_amb = ambient_center(model, center);
    let failure = std::sync::Mutex::new(None);
    let total = rule.sum_array(|d| {
        let run = || -> Result<[f64; K]> {
            let r_max = ray_exit(f, d, center, rho)?;
            let mut terms = vec![Vec::with_capacity(grid.n_radial); K];
            for (big_r, w) in gauss_on(grid.n_radial, 0.0, r_max) {
                let (x, r) = d.point(center, big_r);
                let s = graph_sample(model, f, &x, r, &d.theta)?;
                let pos: Vec<C64> = s.point.iter().zip(&c_amb).map(|(a, b)| a - b).collect();
                let node = GraphNode { x: &x, r, theta: &d.theta, sample: &s, position: &pos };
                let jw = w * d.polar_jacobian(k, big_r) * s.area_element();
                for (t, v) in terms.iter_mut().zip(g(&node)) {
                    t.push(jw * v);
                }
            }
            Ok(std::array::from_fn(|i| d.weight * pairwise_sum(&terms[i])))
        };
        run().unwrap_or_else(|e| {
            failure.lock().expect("poisoned").get_or_insert(e);
            [0.0; K]
        })
    });
    match failure.into_inner().expect("poisoned") {
        Some(e) => Err(e),
        None => Ok(total),
    }
}

fn ambient_center(model: &CylinderModel, center: &[f64]) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); model.ambient_dim()];
    for (ci, v) in c.iter_mut().zip(center) {
        *ci = C64::new(*v, 0.0);
    }
    apply(model.rotation(), &c)
}

/// Normalized volume excess at one radius, computed two ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcessReport {
    pub r: f64,
    /// `r^{-n} [H^n(N ∩ B_r) - H^n(C ∩ B_r)]`.
    pub density_form: f64,
    /// `int_{N ∩ B_r} |x^perp|^2 / |x|^{n+2}`.
    pub monotone_form: f64,
    pub discrepancy: f64,
    pub density_error: f64,
    pub monotone_error: f64,
}

impl ExcessReport {
    pub const CSV_HEADER: &'static str = "r,density_form,monotone_form,discrepancy";

    pub fn csv_row(&self) -> String {
        format!("{:.16e},{:.16e},{:.16e},{:.16e}", self.r, self.density_form, self.monotone_form, self.discrepancy)
    }
}

/// CSV table `(r, density_form, monotone_form, discrepancy)`.
pub fn excess_csv(reports: &[ExcessReport]) -> String {
    let mut s = String::from(ExcessReport::CSV_HEADER);
    s.push('\n');
    for r in reports {
        let _ = writeln!(s, "{}", r.csv_row());
    }
    s
}

pub fn volume_excess(model: &CylinderModel, f: &HarmonicExpansion, r: f64) -> Result<ExcessReport> {
    volume_excess_with(model, f, r, &[], &ExcessOptions::default())
}

/// [`volume_excess`] around an axial center with explicit options.
pub fn volume_excess_with(
    model: &CylinderModel,
    f: &HarmonicExpansion,
    r: f64,
    center: &[f64],
    opts: &ExcessOptions,
) -> Result<ExcessReport> {
    check_pair(model, f)?;
    let center = RegionSpec::new(r, opts.regime_tau, false, center.to_vec())?.center_for(model.axial_dim())?;
    check_regime(f, r, opts.regime_tau, &center, opts)?;
    let (d, mono) = excess_pair(model, f, r, &center, &opts.grid)?;
    let (de, me) = if opts.error_estimate {
        let (dc, mc) = excess_pair(model, f, r, &center, &opts.grid.coarse())?;
        ((d - dc).abs(), (mono - mc).abs())
    } else {
        (0.0, 0.0)
    };
    Ok(ExcessReport {
        r,
        density_form: d,
        monotone_form: mono,
        discrepancy: d - mono,
        density_error: de,
        monotone_error: me,
    })
}

fn excess_pair(
    model: &CylinderModel,
    f: &HarmonicExpansion,
    rho: f64,
    center: &[f64],
    grid: &QuadratureGrid,
) -> Result<(f64, f64)> {
    let k = model.axial_dim();
    let m = model.m();
    let n = k + m;
    let rule = DirectionRule::new(k, m, grid)?;
    let c_amb = ambient_center(model, center);
    let sqrt_det = link_metric_sqrt_det(m);
    let failure = std::sync::Mutex::new(None);
    // Density: per ray, int_0^{R_max} (J_graph - J_cone) dR minus the cone
    // area between R_max and rho, taken in closed form. Monotone: the
    // weighted normal part on the same nodes.
    let [density, monotone] = rule.sum_array(|d| {
        let run = || -> Result<[f64; 2]> {
            let r_max = ray_exit(f, d, center, rho)?;
            let a = d.polar_jacobian(k, 1.0) * d.sin_psi.powi(m as i32 - 1) * sqrt_det;
            let mut dens = Vec::with_capacity(grid.n_radial);
            let mut mono = Vec::with_capacity(grid.n_radial);
            for (big_r, w) in gauss_on(grid.n_radial, 0.0, r_max) {
                let (x, r) = d.point(center, big_r);
                let s = graph_sample(model, f, &x, r, &d.theta)?;
                let jg = d.polar_jacobian(k, big_r) * s.area_element();
                dens.push(w * (jg - a * big_r.powi(n as i32 - 1)));
                let pos: Vec<C64> = s.point.iter().zip(&c_amb).map(|(a, b)| a - b).collect();
                let perp = s.frame()?.normal_part(&pos)?;
                let p2 = real_dot(&pos, &pos);
                mono.push(w * jg * real_dot(&perp, &perp) / p2.powf((n + 2) as f64 / 2.0));
            }
            let (x, r) = d.point(center, r_max);
            let wn = gradient_norm(&f.jet(&x, r, &d.theta)?, k, m, r);
            let gap = wn * wn / (rho + r_max);
            let geo: f64 = (0..n).map(|j| rho.powi(j as i32) * r_max.powi((n - 1 - j) as i32)).sum();
            Ok([d.weight * (pairwise_sum(&dens) - a * gap * geo / n as f64), d.weight * pairwise_sum(&mono)])
        };
        run().unwrap_or_else(|e| {
            failure.lock().expect("poisoned").get_or_insert(e);
            [0.0; 2]
        })
    });
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok((density * rho.powi(-(n as i32)), monotone))
}

/// `H^n(C ∩ B_rho)` in closed form: `|Sigma| |S^{k-1}| rho^n B(k/2, m/2) / 2`
/// (for `k = 0`, `|Sigma| rho^m / m`).
pub fn cone_ball_volume(k: usize, m: usize, rho: f64) -> f64 {
    let n = k + m;
    let v = link_volume(m);
    if k == 0 {
        return v * rho.powi(m as i32) / m as f64;
    }
    // B(a, b) via log-gamma of half integers.
    let lg = |x: f64| ln_gamma_half(x);
    let beta = (lg(k as f64 / 2.0) + lg(m as f64 / 2.0) - lg(n as f64 / 2.0)).exp();
    v * sphere_area(k) * rho.powi(n as i32) / n as f64 * beta / 2.0
}

/// `ln Gamma(x)` for positive half-integers `x`.
fn ln_gamma_half(x: f64) -> f64 {
    let twice = (2.0 * x).round() as i64;
    let mut acc = if twice % 2 == 0 { 0.0 } else { 0.5 * std::f64::consts::PI.ln() };
    let mut t = if twice % 2 == 0 { 1.0 } else { 0.5 };
    while t < x - 1e-9 {
        acc += t.ln();
        t += 1.0;
    }
    acc
}

/// Volume of the unit `n`-ball.
pub fn unit_ball_volume(n: usize) -> f64 {
    sphere_area(n) / n as f64
}

/// Scale-invariant norms at scale `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleNorms {
    /// `(rho^{-n-4} int_{N ∩ B_rho} beta^2)^{1/2}`.
    pub beta_norm: f64,
    /// `(rho^{-n-2} sum_i int_{N ∩ B_rho} y_i^2)^{1/2}`.
    pub y_norm: f64,
    /// `(rho^{-n-4} int_{C ∩ B_rho ∩ {r > tau rho}} f^2)^{1/2}`.
    pub f_norm: f64,
}

pub fn scale_invariant_norms(model: &CylinderModel, f: &HarmonicExpansion, rho: f64, tau: f64) -> Result<ScaleNorms> {
    scale_invariant_norms_with(model, f, rho, tau, 0.0, &ExcessOptions::default())
}

/// Norms with `beta` replaced by `beta - beta_offset`.
pub fn scale_invariant_norms_with(
    model: &CylinderModel,
    f: &HarmonicExpansion,
    rho: f64,
    tau: f64,
    beta_offset: f64,
    opts: &ExcessOptions,
) -> Result<ScaleNorms> {
    check_pair(model, f)?;
    RegionSpec::cut(rho, tau)?;
    let k = model.axial_dim();
    let center = vec![0.0; k];
    check_regime(f, rho, tau, &center, opts)?;
    let (b2, y2) = beta_y_integrals(model, f, rho, beta_offset, &opts.grid)?;
    let n = (k + model.m()) as i32;
    let f2 = if f.is_zero() { 0.0 } else { scale_norm_with(f, rho, tau, &opts.grid, 1e-3)?.0 };
    Ok(ScaleNorms {
        beta_norm: (b2 * rho.powi(-n - 4)).max(0.0).sqrt(),
        y_norm: (y2 * rho.powi(-n - 2)).max(0.0).sqrt(),
        f_norm: f2.max(0.0).sqrt(),
    })
}

/// Raw `int beta_s^2` and `sum_i int y_i^2` over `N ∩ B_rho`.
pub fn beta_y_integrals(
    model: &CylinderModel,
    f: &HarmonicExpansion,
    rho: f64,
    beta_offset: f64,
    grid: &QuadratureGrid,
) -> Result<(f64, f64)> {
    let k = model.axial_dim();
    let beta = f.beta_of();
    let ys: Vec<HarmonicExpansion> = (0..k).map(|i| f.y_of(i)).collect::<Result<_>>()?;
    let center = vec![0.0; k];
    let [b2, y2] = graph_ball_integrals(model, f, rho, &center, grid, |nd| {
        let b = beta.evaluate(nd.x, nd.r, nd.theta).unwrap_or(f64::NAN) - beta_offset;
        let y: f64 = ys.iter().map(|y| y.evaluate(nd.x, nd.r, nd.theta).unwrap_or(f64::NAN).powi(2)).sum();
        [b * b, y]
    })?;
    Ok((b2, y2))
}

/// `Av_N(beta, rho)` and `Vol(N ∩ B_rho)`.
pub fn beta_average(model: &CylinderModel, f: &HarmonicExpansion, rho: f64, grid: &QuadratureGrid) -> Result<(f64, f64)> {
    let beta = f.beta_of();
    let center = vec![0.0; model.axial_dim()];
    let [vol, int] = graph_ball_integrals(model, f, rho, &center, grid, |nd| {
        [1.0, beta.evaluate(nd.x, nd.r, nd.theta).unwrap_or(f64::NAN)]
    })?;
    Ok((int / vol, vol))
}

/// Something a Hausdorff distance can be measured against.
pub trait SetTarget: Sync {
    /// Euclidean distance from `q` to the whole set.
    fn distance(&self, q: &[C64]) -> f64;
    /// Finite samples of the set inside `region` (membership judged by `frame`).
    fn samples(&self, region: &RegionSpec, frame: &CylinderModel, spec: &SampleSpec) -> Result<Vec<Vec<C64>>>;
}

/// Resolution of the sample sets used for Hausdorff distances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSpec {
    pub n_radial: usize,
    pub n_polar: usize,
    pub n_theta: usize,
    pub n_sphere: usize,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self { n_radial: 8, n_polar: 6, n_theta: 10, n_sphere: 6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec<C64>>,
}

impl SetTarget for PointCloud {
    fn distance(&self, q: &[C64]) -> f64 {
        self.points
            .iter()
            .map(|p| p.iter().zip(q).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    fn samples(&self, region: &RegionSpec, frame: &CylinderModel, _: &SampleSpec) -> Result<Vec<Vec<C64>>> {
        let mut out = Vec::new();
        for p in &self.points {
            if region.contains(frame, p)? {
                out.push(p.clone());
            }
        }
        Ok(out)
    }
}

impl SetTarget for CylinderModel {
    fn distance(&self, q: &[C64]) -> f64 {
        CylinderModel::distance(self, q)
    }

    fn samples(&self, region: &RegionSpec, frame: &CylinderModel, spec: &SampleSpec) -> Result<Vec<Vec<C64>>> {
        let zero = HarmonicExpansion::new(self.axial_dim(), self.m())?;
        GraphTarget { model: self, f: &zero }.samples(region, frame, spec)
    }
}

/// The graph of `f` over `model`.
pub struct GraphTarget<'a> {
    pub model: &'a CylinderModel,
    pub f: &'a HarmonicExpansion,
}

impl SetTarget for GraphTarget<'_> {
    /// Gauss-Newton on `min_p |q - Phi(p)|`, started at the nearest model point.
    fn distance(&self, q: &[C64]) -> f64 {
        let k = self.model.axial_dim();
        let ((x0, r0, th0), d0) = self.model.nearest(q);
        if self.f.is_zero() {
            return d0;
        }
        let mut p: Vec<f64> = x0.into_iter().chain([r0.max(1e-3)]).chain(th0).collect();
        let n = p.len();
        let mut best = f64::INFINITY;
        for _ in 0..40 {
            let Ok(s) = graph_sample(self.model, self.f, &p[..k], p[k], &p[k + 1..]) else { break };
            let e: Vec<C64> = q.iter().zip(&s.point).map(|(a, b)| a - b).collect();
            let dist = norm(&e);
            best = best.min(dist);
            let jtj = DMatrix::from_fn(n, n, |i, j| real_dot(&s.tangents[i], &s.tangents[j]));
            let jte = DVector::from_fn(n, |i, _| real_dot(&s.tangents[i], &e));
            let Some(ch) = jtj.cholesky() else { break };
            let step = ch.solve(&jte);
            if step.norm() < 1e-15 * (1.0 + p.iter().map(|v| v.abs()).sum::<f64>()) {
                break;
            }
            for (pi, si) in p.iter_mut().zip(step.iter()) {
                *pi += si;
            }
            if p[k] <= 0.0 {
                p[k] = 1e-6;
            }
        }
        best
    }

    fn samples(&self, region: &RegionSpec, frame: &CylinderModel, spec: &SampleSpec) -> Result<Vec<Vec<C64>>> {
        let k = self.model.axial_dim();
        let m = self.model.m();
        let center = region.center_for(k)?;
        let torus = TorusRule::new(m - 1, spec.n_theta.max(2));
        let sphere = sphere_rule(k, spec.n_sphere)?;
        let polar: Vec<f64> = if k == 0 {
            vec![std::f64::consts::FRAC_PI_2]
        } else {
            (0..spec.n_polar).map(|j| (j as f64 + 0.5) / spec.n_polar as f64 * std::f64::consts::FRAC_PI_2).collect()
        };
        let mut out = Vec::new();
        for ti in 0..torus.len() {
            let theta = torus.node(ti);
            for &psi in &polar {
                for (sigma, _) in &sphere {
                    for i in 1..=spec.n_radial {
                        let big_r = region.rho * i as f64 / spec.n_radial as f64;
                        let x: Vec<f64> =
                            center.iter().zip(sigma).map(|(c, g)| c + big_r * psi.cos() * g).collect();
                        let r = big_r * psi.sin();
                        let q = graph_sample(self.model, self.f, &x, r, &theta)?.point;
                        if region.contains(frame, &q)? {
                            out.push(q);
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Symmetric Hausdorff distance of `a` and `b` inside `region`:
/// `max(sup_{a ∩ region} dist(., b), sup_{b ∩ region} dist(., a))`.
pub fn hausdorff_distance(
    a: &dyn SetTarget,
    b: &dyn SetTarget,
    region: &RegionSpec,
    frame: &CylinderModel,
    spec: &SampleSpec,
) -> Result<f64> {
    let sa = a.samples(region, frame, spec)?;
    let sb = b.samples(region, frame, spec)?;
    if sa.is_empty() || sb.is_empty() {
        return Err(Error::Region("a set has no samples inside the region".into()));
    }
    use rayon::prelude::*;
    let one = sa.par_iter().map(|q| b.distance(q)).reduce(|| 0.0, f64::max);
    let two = sb.par_iter().map(|q| a.distance(q)).reduce(|| 0.0, f64::max);
    Ok(one.max(two))
}

/// `d^H(N, C; region)` for the graph of `f` over `model` and the model itself.
pub fn graph_model_distance(model: &CylinderModel, f: &HarmonicExpansion, region: &RegionSpec, spec: &SampleSpec) -> Result<f64> {
    hausdorff_distance(&GraphTarget { model, f }, model, region, model, spec)
}

/// Outcome of the Hausdorff-bound check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum HausdorffBound {
    Checked {
        lhs: f64,
        rhs: f64,
        pass: bool,
        /// Smallest constant for which the inequality holds.
        min_constant: f64,
        volume_excess: f64,
    },
    /// One of the lemma's two hypotheses fails for the given `(epsilon, delta, tau)`.
    HypothesisFailure { hypothesis: String, value: f64, bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundParams {
    pub rho: f64,
    pub tau: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub constant: f64,
}

pub fn hausdorff_bound_check(
    model: &CylinderModel,
    f: &HarmonicExpansion,
    params: &BoundParams,
    opts: &ExcessOptions,
    spec: &SampleSpec,
) -> Result<HausdorffBound> {
    let BoundParams { rho, tau, epsilon, delta, constant } = *params;
    let k = model.axial_dim();
    let n = k + model.m();
    let cut = RegionSpec::cut(rho, tau)?;
    let area = cut_area_difference(model, f, rho, tau, &opts.grid)?.abs();
    if area > delta {
        return Ok(HausdorffBound::HypothesisFailure { hypothesis: "area".into(), value: area, bound: delta });
    }
    let d_cut = graph_model_distance(model, f, &cut, spec)?;
    if d_cut > rho * epsilon {
        return Ok(HausdorffBound::HypothesisFailure {
            hypothesis: "distance".into(),
            value: d_cut,
            bound: rho * epsilon,
        });
    }
    let lhs = graph_model_distance(model, f, &RegionSpec::ball(rho)?, spec)?;
    let volex = volume_excess_with(model, f, rho, &[], opts)?.density_form;
    let base = (volex.max(0.0) + tau.powi((n - k) as i32) + delta).powf(1.0 / n as f64);
    let rhs = rho * epsilon + rho * constant * base;
    let min_constant = if base > 0.0 { ((lhs - rho * epsilon).max(0.0)) / (rho * base) } else { f64::INFINITY };
    Ok(HausdorffBound::Checked { lhs, rhs, pass: lhs <= rhs, min_constant, volume_excess: volex })
}

/// `rho^{-n} [H^n(N ∩ B_rho ∩ {r > tau rho}) - H^n(C ∩ B_rho ∩ {r > tau rho})]`,
/// with the cut applied to the parameter `r`.
pub fn cut_area_difference(model: &CylinderModel, f: &HarmonicExpansion, rho: f64, tau: f64, grid: &QuadratureGrid) -> Result<f64> {
    check_pair(model, f)?;
    let k = model.axial_dim();
    let m = model.m();
    let n = k + m;
    let rule = DirectionRule::new(k, m, grid)?;
    let center = vec![0.0; k];
    let sqrt_det = link_metric_sqrt_det(m);
    let failure = std::sync::Mutex::new(None);
    let total = rule.sum(|d| {
        let run = || -> Result<f64> {
            let a = d.polar_jacobian(k, 1.0) * d.sin_psi.powi(m as i32 - 1) * sqrt_det;
            let lo = tau * rho / d.sin_psi;
            let cone = if lo < rho { a * (rho.powi(n as i32) - lo.powi(n as i32)) / n as f64 } else { 0.0 };
            let r_max = ray_exit(f, d, &center, rho)?;
            if lo >= r_max {
                return Ok(-d.weight * cone);
            }
            let mut terms = Vec::new();
            for (big_r, w) in gauss_on(grid.n_radial, lo, r_max) {
                let (x, r) = d.point(&center, big_r);
                let s = graph_sample(model, f, &x, r, &d.theta)?;
                terms.push(w * d.polar_jacobian(k, big_r) * s.area_element());
            }
            Ok(d.weight * (pairwise_sum(&terms) - cone))
        };
        run().unwrap_or_else(|e| {
            failure.lock().expect("poisoned").get_or_insert(e);
            0.0
        })
    });
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(total * rho.powi(-(n as i32)))
}

/// Function whose square is tested for subharmonicity on the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "index")]
pub enum SquaredQuantity {
    Beta,
    /// `y_i`, 0-based.
    Y(usize),
    /// `x_i`, 0-based.
    X(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubharmonicReport {
    pub min_laplacian: f64,
    pub tol: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Discrete Laplace-Beltrami of `u^2` on the graph at seeded random points of
/// `B_1 ∩ {r > 0.2}`; passes iff every value is `>= -tol`.
pub fn subharmonicity_check(
    model: &CylinderModel,
    f: &HarmonicExpansion,
    which: SquaredQuantity,
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<SubharmonicReport> {
    check_pair(model, f)?;
    let k = model.axial_dim();
    let m = model.m();
    match which {
        SquaredQuantity::Y(i) | SquaredQuantity::X(i) if i >= k => {
            return Err(Error::Input(format!("axial index {i} out of range for k = {k}")));
        }
        _ => {}
    }
    check_regime(f, 1.0, 0.2, &vec![0.0; k], &ExcessOptions::default())?;
    let source = match which {
        SquaredQuantity::Beta => Some(f.beta_of()),
        SquaredQuantity::Y(i) => Some(f.y_of(i)?),
        SquaredQuantity::X(_) => None,
    };
    // Gradient of u in parameters.
    let u_grad = |p: &[f64]| -> Result<(f64, Vec<f64>)> {
        let n = p.len();
        match (&source, which) {
            (Some(e), _) => {
                let j = e.jet(&p[..k], p[k], &p[k + 1..])?;
                Ok((j.value, j.grad))
            }
            (None, SquaredQuantity::X(i)) => {
                let mut g = vec![0.0; n];
                g[i] = 1.0;
                Ok((p[i], g))
            }
            _ => unreachable!(),
        }
    };
    // V^i = sqrt(g) g^{ij} d_j (u^2).
    let flux = |p: &[f64]| -> Result<Vec<f64>> {
        let s = graph_sample(model, f, &p[..k], p[k], &p[k + 1..])?;
        let n = p.len();
        let g = DMatrix::from_fn(n, n, |i, j| real_dot(&s.tangents[i], &s.tangents[j]));
        let sq = g.determinant().sqrt();
        let (u, du) = u_grad(p)?;
        let du2 = DVector::from_iterator(n, du.iter().map(|d| 2.0 * u * d));
        let ginv = g.try_inverse().ok_or_else(|| Error::Frame("singular graph metric".into()))?;
        Ok((ginv * du2).iter().map(|v| v * sq).collect())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_lap = f64::INFINITY;
    for _ in 0..samples {
        let (x, r, th) = loop {
            let (x, r, th) = crate::geometry::random_params(&mut rng, k, m);
            let big = (x.iter().map(|v| v * v).sum::<f64>() + r * r).sqrt();
            if big < 1.0 && r > 0.2 {
                break (x, r, th);
            }
        };
        let p: Vec<f64> = x.iter().copied().chain([r]).chain(th).collect();
        let n = p.len();
        let s = graph_sample(model, f, &p[..k], p[k], &p[k + 1..])?;
        let sq = s.area_element();
        let h = 1e-4;
        let mut div = 0.0;
        for i in 0..n {
            let mut pp = p.clone();
            pp[i] += h;
            let mut pm = p.clone();
            pm[i] -= h;
            div += (flux(&pp)?[i] - flux(&pm)?[i]) / (2.0 * h);
        }
        min_lap = min_lap.min(div / sq);
        let _ = rng.random::<u8>();
    }
    Ok(SubharmonicReport { min_laplacian: min_lap, tol, samples, pass: min_lap >= -tol })
}

/// Largest `|grad^N beta - (1/2) (J x)^T|` over seeded sample points.
///
/// On an exact Lagrangian with `d beta = (1/2) lambda|_N` the identity is exact;
/// on the first-order graph the residual is quadratic in `f`.
pub fn gradient_identity_defect(model: &CylinderModel, f: &HarmonicExpansion, samples: usize, seed: u64) -> Result<f64> {
    check_pair(model, f)?;
    let k = model.axial_dim();
    let m = model.m();
    let beta = f.beta_of();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let (x, r, th) = crate::geometry::random_params(&mut rng, k, m);
        let s = graph_sample(model, f, &x, r, &th)?;
        let frame = s.frame()?;
        let n = k + m;
        let g = frame.gram();
        let jb = beta.jet(&x, r, &th)?;
        let coef = g.cholesky().ok_or_else(|| Error::Frame("singular graph metric".into()))?.solve(&DVector::from_vec(jb.grad));
        let mut grad = vec![C64::new(0.0, 0.0); n];
        for (c, v) in coef.iter().zip(&frame.vectors) {
            for (gi, vi) in grad.iter_mut().zip(v) {
                *gi += vi * *c;
            }
        }
        let jx: Vec<C64> = s.point.iter().map(|c| C64::new(0.0, 1.0) * c).collect();
        let normal = frame.normal_part(&jx)?;
        let diff: Vec<C64> = grad
            .iter()
            .zip(jx.iter().zip(&normal))
            .map(|(gb, (a, b))| gb - (a - b) * 0.5)
            .collect();
        worst = worst.max(norm(&diff));
    }
    Ok(worst)
}

/// Covariant `|D^2 f|` on the cylinder from a parameter jet.
pub fn hessian_norm(f: &HarmonicExpansion, x: &[f64], r: f64, theta: &[f64]) -> Result<f64> {
    let k = f.axial_dim();
    let m = f.m();
    let n = k + m;
    let j = f.jet(x, r, theta)?;
    let ginv_link = inverse_link_metric(m);
    let g_link = ginv_link.clone().try_inverse().expect("link metric is invertible");
    // Christoffel symbols of dr^2 + r^2 G: Gamma^r_ab = -r G_ab, Gamma^a_rb = delta/r.
    let mut h = DMatrix::from_fn(n, n, |a, b| j.hess[a * n + b]);
    let fr = j.grad[k];
    for a in 0..m - 1 {
        for b in 0..m - 1 {
            h[(k + 1 + a, k + 1 + b)] += r * g_link[(a, b)] * fr;
        }
        let ft = j.grad[k + 1 + a];
        h[(k, k + 1 + a)] -= ft / r;
        h[(k + 1 + a, k)] -= ft / r;
    }
    let mut ginv = DMatrix::<f64>::zeros(n, n);
    for i in 0..=k {
        ginv[(i, i)] = 1.0;
    }
    for a in 0..m - 1 {
        for b in 0..m - 1 {
            ginv[(k + 1 + a, k + 1 + b)] = ginv_link[(a, b)] / (r * r);
        }
    }
    let t = &ginv * &h;
    Ok((&t * &t).trace().max(0.0).sqrt())
}

/// Small graph property `P_1(eta, tau, delta)` at scale `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallGraph {
    pub c1_max: f64,
    pub f_norm: f64,
    pub holds: bool,
}

pub fn small_graph_property(
    f: &HarmonicExpansion,
    rho: f64,
    eta: f64,
    tau: f64,
    delta: f64,
    grid: &QuadratureGrid,
) -> Result<SmallGraph> {
    let k = f.axial_dim();
    let m = f.m();
    // Rescaling by rho turns r^{-1}|df| + |D^2 f| into rho^0 quantities of f_rho = rho^{-2} f(rho .),
    // which equal the original ones evaluated at scale rho.
    let big = 2.0 * rho;
    let rule = DirectionRule::new(k, m, grid)?;
    let radial = gauss_on(grid.n_radial, 0.0, big);
    let center = vec![0.0; k];
    let c1 = rule.max(|d| {
        let mut best = 0.0f64;
        for &(rr, _) in &radial {
            let (x, r) = d.point(&center, rr);
            if r <= tau * big {
                continue;
            }
            if let (Ok(j), Ok(h)) = (f.jet(&x, r, &d.theta), hessian_norm(f, &x, r, &d.theta)) {
                best = best.max(gradient_norm(&j, k, m, r) / r + h);
            }
        }
        best
    });
    let f_norm = if f.is_zero() { 0.0 } else { scale_norm_with(f, big, tau, grid, 1e-3)?.0.sqrt() };
    Ok(SmallGraph { c1_max: c1, f_norm, holds: c1 <= eta && f_norm <= delta })
}

/// Volume property `P_2(gamma)` at scale `rho`, sampled on an axial grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeProperty {
    /// Largest `(2 rho)^{-n} [H^n(N ∩ B_{2 rho}(p)) - H^n(C ∩ B_{2 rho}(p))]` seen.
    pub max_excess: f64,
    pub allowance: f64,
    pub centers: usize,
    pub holds: bool,
}

pub fn volume_property(
    model: &CylinderModel,
    f: &HarmonicExpansion,
    rho: f64,
    gamma: f64,
    pitch: f64,
    opts: &ExcessOptions,
) -> Result<VolumeProperty> {
    if !(0.1..1.0).contains(&gamma) {
        return Err(Error::Input(format!("gamma must lie in [1/10, 1), got {gamma}")));
    }
    let k = model.axial_dim();
    let n = k + model.m();
    let steps = (2.0 / pitch).floor() as i64;
    let mut centers: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for c in &centers {
            for s in -steps..=steps {
                let mut c2 = c.clone();
                c2.push(s as f64 * pitch * rho);
                next.push(c2);
            }
        }
        centers = next;
    }
    centers.retain(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt() < 2.0 * rho);
    let allowance = unit_ball_volume(n) * (1.0 - gamma).powi(n as i32) / 2f64.powi(n as i32);
    let mut max_excess = f64::NEG_INFINITY;
    for c in &centers {
        let rep = volume_excess_with(model, f, 2.0 * rho, c, &ExcessOptions { error_estimate: false, ..*opts })?;
        max_excess = max_excess.max(rep.density_form);
    }
    Ok(VolumeProperty { max_excess, allowance, centers: centers.len(), holds: max_excess <= allowance })
}

/// Harmonic property `P_3(delta)` at scale `rho`: `||beta, y||_{L^2(N ∩ B_{4 rho})} <= delta`.
pub fn harmonic_property(model: &CylinderModel, f: &HarmonicExpansion, rho: f64, delta: f64, grid: &QuadratureGrid) -> Result<(f64, bool)> {
    let big = 4.0 * rho;
    let (b2, y2) = beta_y_integrals(model, f, big, 0.0, grid)?;
    let n = (model.axial_dim() + model.m()) as i32;
    let v = (b2 * big.powi(-n - 4)).sqrt() + (y2 * big.powi(-n - 2)).sqrt();
    Ok((v, v <= delta))
}
