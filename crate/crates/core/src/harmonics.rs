//! Harmonic functions on the cylinder `R^k x C^m_HL` built from separated
//! modes.
//!
//! A term of an expansion is
//!
//! ```text
//! coeff * h(x) * r^(2p + gamma) * trig(nu . theta)
//! ```
//!
//! where `h` is a homogeneous polynomial on `R^k`, `gamma` is the growth
//! exponent of the link eigenvalue `q(nu)` and `trig` is `cos` or `sin`. A
//! harmonic axial polynomial with `p = 0` gives an exactly harmonic term. For
//! non-harmonic `h` the harmonic extension adds `p > 0` corrections from
//!
//! ```text
//! Delta(P r^(2p+gamma) phi) = (Delta P) r^(2p+gamma) phi
//!                            + 2p (2p + 2 gamma + m - 2) P r^(2p+gamma-2) phi
//! ```
//!
//! so `P_{p+1} = -Delta P_p / (2 (p+1) (2p + 2 gamma + m))`, which terminates
//! because each step lowers the axial degree by two.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{eigenvalue_of, enumerate_modes, FormSpec};
use crate::poly::AxialPoly;
use crate::quadrature::{integrate_cut_region, QuadratureGrid};

/// Degrees closer than this to an integer are treated as that integer.
pub const DEGREE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Cos,
    Sin,
}

/// Nonnegative root of `gamma (gamma + dim_cone - 2) = lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthExponent {
    pub lambda: f64,
    pub dim_cone: usize,
    pub gamma: f64,
}

pub fn growth_exponent(lambda: f64, dim_cone: usize) -> Result<GrowthExponent> {
    if dim_cone < 3 {
        return Err(Error::UnsupportedDimension(format!("cone dimension {dim_cone} < 3")));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::Input(format!("eigenvalue must be finite and >= 0, got {lambda}")));
    }
    let a = (dim_cone - 2) as f64;
    let disc = a * a + 4.0 * lambda;
    let gamma = if lambda == 0.0 {
        0.0
    } else {
        // Rationalized root avoids cancellation for small lambda.
        2.0 * lambda / (a + disc.sqrt())
    };
    Ok(GrowthExponent { lambda, dim_cone, gamma })
}

/// One separated term of an expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CylinderMode {
    pub nu: Vec<i64>,
    pub parity: Parity,
    pub h: AxialPoly,
    #[serde(default)]
    pub p: u32,
    pub coeff: f64,
}

impl CylinderMode {
    pub fn eigenvalue(&self, m: usize) -> Result<u64> {
        eigenvalue_of(m, &self.nu)
    }

    pub fn gamma(&self, m: usize) -> Result<f64> {
        Ok(growth_exponent(self.eigenvalue(m)? as f64, m)?.gamma)
    }

    pub fn radial_exponent(&self, m: usize) -> Result<f64> {
        Ok(2.0 * self.p as f64 + self.gamma(m)?)
    }
}

/// Homogeneity degree `deg h + 2p + gamma` of a mode on the cylinder.
pub fn mode_degree(mode: &CylinderMode, link: &FormSpec) -> Result<f64> {
    let dh = mode.h.degree().unwrap_or(0) as f64;
    Ok(dh + mode.radial_exponent(link.m())?)
}

/// Value, parameter gradient and Hessian at a cylinder point.
///
/// Parameters are ordered `(x_1..x_k, r, theta_1..theta_{m-1})`; the Hessian
/// is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<f64>,
}

/// A finite sum of cylinder modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExpansion", into = "RawExpansion")]
pub struct HarmonicExpansion {
    axial_dim: usize,
    link: FormSpec,
    modes: Vec<CylinderMode>,
    /// Cached radial exponents, parallel to `modes`.
    exponents: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawExpansion {
    axial_dim: usize,
    m: usize,
    modes: Vec<CylinderMode>,
}

impl TryFrom<RawExpansion> for HarmonicExpansion {
    type Error = Error;
    fn try_from(raw: RawExpansion) -> Result<Self> {
        let mut out = HarmonicExpansion::new(raw.axial_dim, raw.m)?;
        for mode in raw.modes {
            out.push(mode)?;
        }
        Ok(out)
    }
}

impl From<HarmonicExpansion> for RawExpansion {
    fn from(e: HarmonicExpansion) -> Self {
        RawExpansion { axial_dim: e.axial_dim, m: e.link.m(), modes: e.modes }
    }
}

/// Pieces of an expansion grouped by degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSplit {
    pub constant: f64,
    /// Degrees in `(0, 2)`.
    pub low: HarmonicExpansion,
    pub quad: HarmonicExpansion,
    /// Degrees `> 2`.
    pub high: HarmonicExpansion,
}

impl DegreeSplit {
    pub fn recompose(&self) -> HarmonicExpansion {
        let mut out = self.low.add(&self.quad).add(&self.high);
        if self.constant != 0.0 {
            out.push_constant(self.constant);
        }
        out
    }
}

/// `(2 pi)^{m-1} sqrt(det G)`, the volume of the link torus.
pub fn link_volume(m: usize) -> f64 {
    (2.0 * std::f64::consts::PI).powi(m as i32 - 1) * (m as f64).powf((2.0 - m as f64) / 2.0)
}

/// Factor making `trig(nu . theta)` unit-norm in `L^2` of the link.
pub fn link_normalization(m: usize, nu: &[i64]) -> f64 {
    let v = link_volume(m);
    if nu.iter().all(|&a| a == 0) {
        1.0 / v.sqrt()
    } else {
        (2.0 / v).sqrt()
    }
}

fn canonical(nu: &[i64]) -> (Vec<i64>, f64) {
    match nu.iter().find(|&&a| a != 0) {
        Some(&a) if a < 0 => (nu.iter().map(|v| -v).collect(), -1.0),
        _ => (nu.to_vec(), 1.0),
    }
}

impl HarmonicExpansion {
    pub fn new(axial_dim: usize, m: usize) -> Result<Self> {
        Ok(Self { axial_dim, link: FormSpec::new(m)?, modes: Vec::new(), exponents: Vec::new() })
    }

    pub fn zero_like(&self) -> Self {
        Self { axial_dim: self.axial_dim, link: self.link, modes: Vec::new(), exponents: Vec::new() }
    }

    pub fn axial_dim(&self) -> usize {
        self.axial_dim
    }

    pub fn m(&self) -> usize {
        self.link.m()
    }

    pub fn link(&self) -> &FormSpec {
        &self.link
    }

    /// Real dimension `n = k + m` of the cylinder.
    pub fn dim(&self) -> usize {
        self.axial_dim + self.link.m()
    }

    pub fn modes(&self) -> &[CylinderMode] {
        &self.modes
    }

    pub fn is_zero(&self) -> bool {
        self.modes.iter().all(|md| md.coeff == 0.0 || md.h.is_zero())
    }

    /// Adds a raw term after validating and canonicalizing its frequency.
    ///
    /// Frequencies are stored with their first nonzero entry positive; a
    /// `sin` term picks up a sign when `nu` is flipped.
    pub fn push(&mut self, mut mode: CylinderMode) -> Result<()> {
        let m = self.link.m();
        if mode.nu.len() != m - 1 {
            return Err(Error::DimensionMismatch { expected: m - 1, got: mode.nu.len() });
        }
        if mode.h.is_zero() {
            mode.h = AxialPoly::zero(self.axial_dim);
        }
        if mode.h.vars() != self.axial_dim {
            return Err(Error::DimensionMismatch { expected: self.axial_dim, got: mode.h.vars() });
        }
        if !mode.h.is_zero() && mode.h.homogeneous_degree().is_none() {
            return Err(Error::Input("axial polynomial of a mode must be homogeneous".into()));
        }
        if !mode.coeff.is_finite() {
            return Err(Error::Input("mode coefficient is not finite".into()));
        }
        let (nu, sign) = canonical(&mode.nu);
        if nu.iter().all(|&a| a == 0) && mode.parity == Parity::Sin {
            return Err(Error::Input("sin parity needs a nonzero frequency".into()));
        }
        if mode.parity == Parity::Sin {
            mode.coeff *= sign;
        }
        mode.nu = nu;
        let exponent = mode.radial_exponent(m)?;
        self.modes.push(mode);
        self.exponents.push(exponent);
        Ok(())
    }

    pub fn push_constant(&mut self, c: f64) {
        let mode = CylinderMode {
            nu: vec![0; self.link.m() - 1],
            parity: Parity::Cos,
            h: AxialPoly::constant(self.axial_dim, 1.0),
            p: 0,
            coeff: c,
        };
        self.push(mode).expect("constant mode is always valid");
    }

    /// Adds the harmonic extension of `coeff * h(x) r^gamma trig(nu . theta)`.
    pub fn push_harmonic(&mut self, h: AxialPoly, nu: Vec<i64>, parity: Parity, coeff: f64) -> Result<()> {
        if h.is_zero() || coeff == 0.0 {
            return Ok(());
        }
        let m = self.link.m();
        let gamma = growth_exponent(eigenvalue_of(m, &nu)? as f64, m)?.gamma;
        let mut pcur = h;
        let mut p = 0u32;
        loop {
            let lap = pcur.laplacian();
            self.push(CylinderMode { nu: nu.clone(), parity, h: pcur, p, coeff })?;
            if lap.is_zero() {
                return Ok(());
            }
            let denom = 2.0 * (p as f64 + 1.0) * (2.0 * p as f64 + 2.0 * gamma + m as f64);
            pcur = lap.scale(-1.0 / denom);
            p += 1;
        }
    }

    /// Adds `Re(d * exp(i nu . theta)) * h(x) * r^(2p + gamma)`.
    pub fn push_phase(&mut self, h: AxialPoly, p: u32, nu: Vec<i64>, d: Complex64) -> Result<()> {
        if h.is_zero() {
            return Ok(());
        }
        if nu.iter().all(|&a| a == 0) {
            return self.push(CylinderMode { nu, parity: Parity::Cos, h, p, coeff: d.re });
        }
        self.push(CylinderMode { nu: nu.clone(), parity: Parity::Cos, h: h.clone(), p, coeff: d.re })?;
        self.push(CylinderMode { nu, parity: Parity::Sin, h, p, coeff: -d.im })
    }

    /// Like [`push_harmonic`](Self::push_harmonic) but with the trig factor
    /// scaled to unit `L^2` norm on the link.
    pub fn push_normalized(&mut self, h: AxialPoly, nu: Vec<i64>, parity: Parity, coeff: f64) -> Result<()> {
        let c = coeff * link_normalization(self.link.m(), &nu);
        self.push_harmonic(h, nu, parity, c)
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.axial_dim, self.link), (other.axial_dim, other.link), "incompatible expansions");
        let mut out = self.clone();
        out.modes.extend(other.modes.iter().cloned());
        out.exponents.extend(other.exponents.iter().copied());
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for md in &mut out.modes {
            md.coeff *= s;
        }
        out
    }

    fn map_modes(&self, f: impl Fn(&CylinderMode, f64) -> Option<CylinderMode>) -> Self {
        let mut out = self.zero_like();
        for (md, &e) in self.modes.iter().zip(&self.exponents) {
            if let Some(new) = f(md, e) {
                out.modes.push(new);
                out.exponents.push(e);
            }
        }
        out
    }

    pub fn mode_degrees(&self) -> Vec<f64> {
        self.modes
            .iter()
            .zip(&self.exponents)
            .map(|(md, e)| md.h.degree().unwrap_or(0) as f64 + e)
            .collect()
    }

    /// Coefficient of every monomial term, summed over duplicates.
    pub fn canonical_terms(&self) -> BTreeMap<(Vec<i64>, Parity, u32, Vec<u32>), f64> {
        let mut out = BTreeMap::new();
        for md in &self.modes {
            for (e, c) in md.h.terms() {
                *out.entry((md.nu.clone(), md.parity, md.p, e.clone())).or_insert(0.0) += md.coeff * c;
            }
        }
        out.retain(|_, v| *v != 0.0);
        out
    }

    /// Merges duplicate terms and drops those at most `rel_tol` times
    /// `reference` in size.
    pub fn simplified(&self, rel_tol: f64, reference: f64) -> Self {
        let cut = rel_tol * reference;
        let mut grouped: BTreeMap<(Vec<i64>, Parity, u32, u32), Vec<(Vec<u32>, f64)>> = BTreeMap::new();
        for ((nu, parity, p, e), c) in self.canonical_terms() {
            if c.abs() > cut {
                let deg = e.iter().sum();
                grouped.entry((nu, parity, p, deg)).or_default().push((e, c));
            }
        }
        let mut out = self.zero_like();
        for ((nu, parity, p, _), terms) in grouped {
            let h = AxialPoly::from_terms(self.axial_dim, terms).expect("terms come from this expansion");
            out.push(CylinderMode { nu, parity, h, p, coeff: 1.0 }).expect("modes come from this expansion");
        }
        out
    }

    /// Largest absolute monomial coefficient.
    pub fn coefficient_scale(&self) -> f64 {
        self.canonical_terms().values().fold(0.0, |a, c| a.max(c.abs()))
    }

    fn check_point(&self, x: &[f64], r: f64, theta: &[f64]) -> Result<()> {
        if x.len() != self.axial_dim {
            return Err(Error::DimensionMismatch { expected: self.axial_dim, got: x.len() });
        }
        if theta.len() != self.link.m() - 1 {
            return Err(Error::DimensionMismatch { expected: self.link.m() - 1, got: theta.len() });
        }
        if !(r > 0.0) {
            return Err(Error::Domain(format!("cone radius must be positive, got {r}")));
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64], r: f64, theta: &[f64]) -> Result<f64> {
        self.check_point(x, r, theta)?;
        Ok(self
            .modes
            .iter()
            .zip(&self.exponents)
            .map(|(md, &e)| {
                let s: f64 = md.nu.iter().zip(theta).map(|(&a, t)| a as f64 * t).sum();
                let trig = match md.parity {
                    Parity::Cos => s.cos(),
                    Parity::Sin => s.sin(),
                };
                md.coeff * md.h.eval(x) * r.powf(e) * trig
            })
            .sum())
    }

    pub fn jet(&self, x: &[f64], r: f64, theta: &[f64]) -> Result<Jet> {
        self.check_point(x, r, theta)?;
        let k = self.axial_dim;
        let n = self.dim();
        let mut value = 0.0;
        let mut grad = vec![0.0; n];
        let mut hess = vec![0.0; n * n];
        for (md, &e) in self.modes.iter().zip(&self.exponents) {
            let (a, ag, ah) = md.h.jet(x);
            let b = r.powf(e);
            let b1 = e * b / r;
            let b2 = (e - 1.0) * b1 / r;
            let s: f64 = md.nu.iter().zip(theta).map(|(&v, t)| v as f64 * t).sum();
            let (sn, cs) = s.sin_cos();
            let (c, dc) = match md.parity {
                Parity::Cos => (cs, -sn),
                Parity::Sin => (sn, cs),
            };
            let w = md.coeff;
            value += w * a * b * c;
            // Block derivatives of A(x) B(r) C(theta).
            for i in 0..k {
                grad[i] += w * ag[i] * b * c;
            }
            grad[k] += w * a * b1 * c;
            for (j, &v) in md.nu.iter().enumerate() {
                grad[k + 1 + j] += w * a * b * dc * v as f64;
            }
            for i in 0..k {
                for j in 0..k {
                    hess[i * n + j] += w * ah[i * k + j] * b * c;
                }
                let xr = w * ag[i] * b1 * c;
                hess[i * n + k] += xr;
                hess[k * n + i] += xr;
                for (j, &v) in md.nu.iter().enumerate() {
                    let xt = w * ag[i] * b * dc * v as f64;
                    hess[i * n + k + 1 + j] += xt;
                    hess[(k + 1 + j) * n + i] += xt;
                }
            }
            hess[k * n + k] += w * a * b2 * c;
            for (j, &v) in md.nu.iter().enumerate() {
                let rt = w * a * b1 * dc * v as f64;
                hess[k * n + k + 1 + j] += rt;
                hess[(k + 1 + j) * n + k] += rt;
                for (l, &u) in md.nu.iter().enumerate() {
                    hess[(k + 1 + j) * n + k + 1 + l] -= w * a * b * c * (v * u) as f64;
                }
            }
        }
        Ok(Jet { value, grad, hess })
    }

    /// `beta = -(1/2) R^3 d/dR (f / R^2)`, i.e. `-(d - 2)/2` times each degree-`d` term.
    pub fn beta_of(&self) -> Self {
        self.map_modes(|md, e| {
            let d = md.h.degree().unwrap_or(0) as f64 + e;
            let factor = -(d - 2.0) / 2.0;
            if factor == 0.0 {
                return None;
            }
            Some(CylinderMode { coeff: md.coeff * factor, ..md.clone() })
        })
    }

    /// `y_i = -df/dx_i` (0-based axial index).
    pub fn y_of(&self, i: usize) -> Result<Self> {
        if i >= self.axial_dim {
            return Err(Error::Input(format!("axial index {i} out of range for k = {}", self.axial_dim)));
        }
        Ok(self.map_modes(|md, _| {
            let h = md.h.derivative(i).scale(-1.0);
            (!h.is_zero()).then(|| CylinderMode { h, ..md.clone() })
        }))
    }

    pub fn degree_split(&self) -> DegreeSplit {
        let mut split = DegreeSplit {
            constant: 0.0,
            low: self.zero_like(),
            quad: self.zero_like(),
            high: self.zero_like(),
        };
        for ((md, &e), d) in self.modes.iter().zip(&self.exponents).zip(self.mode_degrees()) {
            let target = if d.abs() <= DEGREE_TOL {
                split.constant += md.coeff * md.h.eval(&vec![0.0; self.axial_dim]);
                continue;
            } else if (d - 2.0).abs() <= DEGREE_TOL {
                &mut split.quad
            } else if d < 2.0 {
                &mut split.low
            } else {
                &mut split.high
            };
            target.modes.push(md.clone());
            target.exponents.push(e);
        }
        split
    }

    /// Largest monomial coefficient of the exact Laplacian on the cylinder.
    ///
    /// Zero (up to rounding) iff the expansion is harmonic.
    pub fn laplace_defect(&self) -> f64 {
        let m = self.link.m() as f64;
        let mut groups: BTreeMap<(Vec<i64>, Parity, u32), AxialPoly> = BTreeMap::new();
        for (md, &e) in self.modes.iter().zip(&self.exponents) {
            let gamma = e - 2.0 * md.p as f64;
            let key = (md.nu.clone(), md.parity, md.p);
            let entry = groups.entry(key).or_insert_with(|| AxialPoly::zero(self.axial_dim));
            *entry = entry.add(&md.h.laplacian().scale(md.coeff));
            if md.p > 0 {
                let c = 2.0 * md.p as f64 * (2.0 * md.p as f64 + 2.0 * gamma + m - 2.0);
                let key = (md.nu.clone(), md.parity, md.p - 1);
                let entry = groups.entry(key).or_insert_with(|| AxialPoly::zero(self.axial_dim));
                *entry = entry.add(&md.h.scale(md.coeff * c));
            }
        }
        groups.values().fold(0.0, |a, p| a.max(p.max_abs_coeff()))
    }

    pub fn is_harmonic(&self, rel_tol: f64) -> bool {
        self.laplace_defect() <= rel_tol * self.coefficient_scale().max(f64::MIN_POSITIVE)
    }
}

/// `rho^{-n-4} * int f^2` over `C_cyl ∩ B_rho ∩ {r > tau rho}` with the cone
/// area element; this is the *square* of the scale-invariant norm.
pub fn scale_norm(f: &HarmonicExpansion, rho: f64, tau: f64) -> Result<f64> {
    scale_norm_with(f, rho, tau, &QuadratureGrid::default(), 1e-6).map(|(v, _)| v)
}

/// [`scale_norm`] on an explicit grid; returns `(value, error estimate)` and
/// fails when the estimate exceeds `rel_tol * value`.
pub fn scale_norm_with(
    f: &HarmonicExpansion,
    rho: f64,
    tau: f64,
    grid: &QuadratureGrid,
    rel_tol: f64,
) -> Result<(f64, f64)> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::Region(format!("tau must lie in (0, 1), got {tau}")));
    }
    let fine = cone_integral(f, rho, tau, grid, |v| v * v)?;
    let coarse = cone_integral(f, rho, tau, &grid.coarse(), |v| v * v)?;
    let scale = rho.powi(-(f.dim() as i32) - 4);
    let (value, err) = (fine * scale, (fine - coarse).abs() * scale);
    if err > rel_tol * value.abs() && err > 1e-300 {
        return Err(Error::Accuracy { estimate: err, requested: rel_tol * value.abs() });
    }
    Ok((value, err))
}

/// `int g(f)` over the cut cone region with the cone area element
/// `r^{m-1} sqrt(det G)`, centered at the axial origin.
pub fn cone_integral<G>(f: &HarmonicExpansion, rho: f64, tau: f64, grid: &QuadratureGrid, g: G) -> Result<f64>
where
    G: Fn(f64) -> f64 + Sync,
{
    let m = f.m();
    let sqrt_det = (m as f64).powf((2.0 - m as f64) / 2.0);
    let center = vec![0.0; f.axial_dim()];
    integrate_cut_region(f.axial_dim(), m, grid, rho, tau, &center, |node| {
        let v = f.evaluate(node.x, node.r, node.theta).unwrap_or(f64::NAN);
        g(v) * node.r.powi(m as i32 - 1) * sqrt_det
    })
}

/// Basis of linear-growth harmonics: the axial coordinates and the `2m`
/// link modes with eigenvalue `m - 1`.
pub fn linear_growth_basis(k: usize, m: usize) -> Result<Vec<HarmonicExpansion>> {
    let mut out = Vec::new();
    for i in 0..k {
        let mut e = HarmonicExpansion::new(k, m)?;
        e.push_harmonic(AxialPoly::coordinate(k, i)?, vec![0; m - 1], Parity::Cos, 1.0)?;
        out.push(e);
    }
    for mode in enumerate_modes(m, m as u64 - 1)? {
        if canonical(&mode.nu).1 < 0.0 {
            continue;
        }
        for parity in [Parity::Cos, Parity::Sin] {
            let mut e = HarmonicExpansion::new(k, m)?;
            e.push_harmonic(AxialPoly::constant(k, 1.0), mode.nu.clone(), parity, 1.0)?;
            out.push(e);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(k: usize, m: usize, h: AxialPoly, nu: Vec<i64>) -> HarmonicExpansion {
        let mut e = HarmonicExpansion::new(k, m).unwrap();
        e.push_harmonic(h, nu, Parity::Cos, 1.0).unwrap();
        e
    }

    #[test]
    fn growth_exponent_examples() {
        assert_eq!(growth_exponent(0.0, 5).unwrap().gamma, 0.0);
        for m in 3..10 {
            assert!((growth_exponent((m - 1) as f64, m).unwrap().gamma - 1.0).abs() < 1e-14);
            assert!((growth_exponent((2 * m) as f64, m).unwrap().gamma - 2.0).abs() < 1e-14);
        }
        assert!(matches!(growth_exponent(1.0, 2), Err(Error::UnsupportedDimension(_))));
    }

    #[test]
    fn mode_degree_examples() {
        let link = FormSpec::new(3).unwrap();
        let md = |h: AxialPoly, nu: Vec<i64>| CylinderMode { nu, parity: Parity::Cos, h, p: 0, coeff: 1.0 };
        let quad = md(AxialPoly::constant(2, 1.0), vec![1, -1]);
        assert!((mode_degree(&quad, &link).unwrap() - 2.0).abs() < 1e-14);
        let lin = md(AxialPoly::coordinate(2, 0).unwrap(), vec![1, 0]);
        assert!((mode_degree(&lin, &link).unwrap() - 2.0).abs() < 1e-14);
        let xy = md(AxialPoly::monomial(vec![1, 1], 1.0), vec![0, 0]);
        assert_eq!(mode_degree(&xy, &link).unwrap(), 2.0);
    }

    #[test]
    fn evaluate_examples() {
        let c = single(1, 3, AxialPoly::constant(1, 1.0), vec![0, 0]);
        assert_eq!(c.evaluate(&[0.3], 0.7, &[0.1, 0.2]).unwrap(), 1.0);
        let q = single(0, 3, AxialPoly::constant(0, 1.0), vec![1, -1]);
        assert!((q.evaluate(&[], 2.0, &[0.0, 0.0]).unwrap() - 4.0).abs() < 1e-14);
        let l = single(2, 3, AxialPoly::coordinate(2, 0).unwrap(), vec![1, 0]);
        assert!((l.evaluate(&[1.0, 0.0], 1.0, &[0.0, 0.0]).unwrap() - 1.0).abs() < 1e-14);
        assert!(matches!(l.evaluate(&[1.0, 0.0], 0.0, &[0.0, 0.0]), Err(Error::Domain(_))));
    }

    #[test]
    fn sin_sign_follows_canonical_frequency() {
        let mut e = HarmonicExpansion::new(0, 3).unwrap();
        e.push_harmonic(AxialPoly::constant(0, 1.0), vec![-1, 0], Parity::Sin, 1.0).unwrap();
        assert_eq!(e.modes()[0].nu, vec![1, 0]);
        let th = [0.4, -0.2];
        assert!((e.evaluate(&[], 1.3, &th).unwrap() - 1.3 * (-0.4f64).sin()).abs() < 1e-14);
    }

    #[test]
    fn harmonic_extension_of_square() {
        // x^2 on R x C^3_HL extends to x^2 - r^2/3.
        let e = single(1, 3, AxialPoly::monomial(vec![2], 1.0), vec![0, 0]);
        assert_eq!(e.modes().len(), 2);
        assert!((e.evaluate(&[0.5], 0.9, &[0.0, 0.0]).unwrap() - (0.25 - 0.81 / 3.0)).abs() < 1e-15);
        assert!(e.is_harmonic(1e-14));
        let mut bad = HarmonicExpansion::new(1, 3).unwrap();
        bad.push(CylinderMode {
            nu: vec![0, 0],
            parity: Parity::Cos,
            h: AxialPoly::monomial(vec![2], 1.0),
            p: 0,
            coeff: 1.0,
        })
        .unwrap();
        assert!(!bad.is_harmonic(1e-12));
    }

    #[test]
    fn beta_and_y_examples() {
        let q = single(1, 3, AxialPoly::constant(1, 1.0), vec![1, -1]);
        assert!(q.beta_of().is_zero());
        let mut c = HarmonicExpansion::new(1, 3).unwrap();
        c.push_constant(2.5);
        assert_eq!(c.beta_of().evaluate(&[0.1], 0.5, &[0.0, 0.0]).unwrap(), 2.5);
        assert!(q.y_of(0).unwrap().is_zero());
        let xr = single(2, 3, AxialPoly::coordinate(2, 0).unwrap(), vec![1, 0]);
        let y = xr.y_of(0).unwrap();
        let th = [0.3, 0.1];
        assert!((y.evaluate(&[0.2, 0.4], 0.8, &th).unwrap() + 0.8 * 0.3f64.cos()).abs() < 1e-15);
        let xy = single(2, 3, AxialPoly::monomial(vec![1, 1], 1.0), vec![0, 0]);
        assert!((xy.y_of(0).unwrap().evaluate(&[0.2, 0.4], 0.8, &th).unwrap() + 0.4).abs() < 1e-15);
        assert!(xy.y_of(2).is_err());
    }

    #[test]
    fn degree_split_examples() {
        let mut f = single(1, 3, AxialPoly::coordinate(1, 0).unwrap(), vec![1, 0]);
        f.push_constant(0.7);
        let s = f.degree_split();
        assert_eq!(s.constant, 0.7);
        assert_eq!(s.quad.modes().len(), 1);
        assert!(s.low.is_zero() && s.high.is_zero());
        let lin = single(1, 3, AxialPoly::constant(1, 1.0), vec![1, 0]);
        assert_eq!(lin.degree_split().low, lin);
        assert_eq!(s.recompose().canonical_terms(), f.canonical_terms());
    }

    #[test]
    fn linear_basis_dimension() {
        for (k, m) in [(0, 3), (1, 3), (2, 4), (3, 5)] {
            let basis = linear_growth_basis(k, m).unwrap();
            assert_eq!(basis.len(), k + 2 * m);
            for b in &basis {
                let deg = b.mode_degrees();
                assert!(deg.iter().all(|d| (d - 1.0).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let mut f = single(2, 4, AxialPoly::monomial(vec![2, 0], 1.0), vec![1, 0, 0]);
        f.push_harmonic(AxialPoly::coordinate(2, 1).unwrap(), vec![1, -1, 0], Parity::Sin, 0.25).unwrap();
        let s = serde_json::to_string(&f).unwrap();
        let back: HarmonicExpansion = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
        assert!(s.contains("\"axial_dim\":2") && s.contains("\"m\":4"));
    }
}
