//! The Harvey-Lawson link, cylinder models `U (R^k x C^m_HL)` and graphs over
//! them.
//!
//! Conventions:
//!
//! * hermitian product `<v, w> = sum v_j conj(w_j)`, real inner product its real part;
//! * `omega(u, v) = Im(sum conj(u_j) v_j)`, so that `omega(X, JY) = <X, Y>` with `J = i`;
//! * Liouville form `lambda(v) = omega(z, v)` at the point `z`;
//! * the moment hamiltonian of `a in su(n)` is `h_a(z) = Re((i/2) z^* a z)`,
//!   which satisfies `dh_a = omega(a z, .)` and `h_a(0) = 0`; a translation
//!   `v` has `h_v(z) = Im(v^* z)`.
//!
//! Graphs use the first-order map `p -> U (P(p) - J grad f(p))`. The minus sign
//! is the one compatible with `y_j = -df/dx_j` on the axial factor.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harmonics::{HarmonicExpansion, Jet, Parity};
use crate::lattice::FormSpec;
use crate::poly::AxialPoly;

pub type C64 = Complex64;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Real inner product on `C^n = R^{2n}`.
pub fn real_dot(u: &[C64], v: &[C64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

pub fn norm(u: &[C64]) -> f64 {
    real_dot(u, u).sqrt()
}

/// `omega(u, v) = Im(sum conj(u_j) v_j)`.
pub fn omega(u: &[C64], v: &[C64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| (a.conj() * b).im).sum()
}

/// The special Legendrian torus `T^{m-1} ⊂ S^{2m-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HLLink {
    m: usize,
    phase: f64,
}

impl HLLink {
    pub fn new(m: usize) -> Result<Self> {
        FormSpec::new(m)?;
        let phase = (-((m + 1) as f64) * PI / 2.0).rem_euclid(2.0 * PI);
        Ok(Self { m, phase })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The value of `sum_j theta_j` on the link.
    pub fn phase(&self) -> f64 {
        self.phase
    }

    /// All `m` angles, the last one eliminated by the phase condition.
    pub fn angles(&self, theta: &[f64]) -> Vec<f64> {
        let mut a = theta.to_vec();
        a.push(self.phase - theta.iter().sum::<f64>());
        a
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.m - 1 {
            return Err(Error::DimensionMismatch { expected: self.m - 1, got: theta.len() });
        }
        Ok(())
    }

    pub fn point(&self, theta: &[f64]) -> Result<Vec<C64>> {
        self.check(theta)?;
        let s = 1.0 / (self.m as f64).sqrt();
        Ok(self.angles(theta).into_iter().map(|t| C64::from_polar(s, t)).collect())
    }

    /// Coordinate tangent vectors `t_a = dL/dtheta_a = i L_a e_a - i L_m e_m`.
    pub fn tangents(&self, theta: &[f64]) -> Result<Vec<Vec<C64>>> {
        let l = self.point(theta)?;
        let m = self.m;
        Ok((0..m - 1)
            .map(|a| {
                let mut t = vec![C64::new(0.0, 0.0); m];
                t[a] = I * l[a];
                t[m - 1] = -I * l[m - 1];
                t
            })
            .collect())
    }
}

/// `z_j = exp(i theta_j) / sqrt(m)` with `theta_m = phase - sum theta_j`.
pub fn link_point(link: &HLLink, theta: &[f64]) -> Result<Vec<C64>> {
    link.point(theta)
}

/// Pullback of the euclidean metric to the link in the `theta` chart.
pub fn induced_metric(link: &HLLink) -> DMatrix<f64> {
    let t = link.tangents(&vec![0.0; link.m - 1]).expect("valid chart point");
    let d = link.m - 1;
    DMatrix::from_fn(d, d, |a, b| real_dot(&t[a], &t[b]))
}

/// `G^{-1} = m I - 1 1^T`, exact.
pub fn inverse_link_metric(m: usize) -> DMatrix<f64> {
    let d = m - 1;
    DMatrix::from_fn(d, d, |a, b| if a == b { m as f64 - 1.0 } else { -1.0 })
}

/// `sqrt(det G) = m^{(2-m)/2}`.
pub fn link_metric_sqrt_det(m: usize) -> f64 {
    (m as f64).powf((2.0 - m as f64) / 2.0)
}

/// Maximum of the contact form `eta = lambda / (2 |z|^2)` over a set of tangent vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendrianReport {
    pub max_defect: f64,
    pub samples: usize,
    pub pass: bool,
}

/// `max_v |eta(v)| / |v|` at `z`.
pub fn legendrian_defect(z: &[C64], tangents: &[Vec<C64>]) -> f64 {
    let r2 = real_dot(z, z);
    tangents
        .iter()
        .map(|v| (omega(z, v) / (2.0 * r2)).abs() / norm(v).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

pub fn check_legendrian(link: &HLLink, theta: &[f64], tol: f64) -> Result<LegendrianReport> {
    let u = DMatrix::<C64>::identity(link.m, link.m);
    check_legendrian_rotated(link, &u, theta, tol)
}

/// Legendrian check for the rotated link `U Sigma`.
pub fn check_legendrian_rotated(link: &HLLink, u: &DMatrix<C64>, theta: &[f64], tol: f64) -> Result<LegendrianReport> {
    if u.nrows() != link.m || u.ncols() != link.m {
        return Err(Error::DimensionMismatch { expected: link.m, got: u.nrows() });
    }
    let z = apply(u, &link.point(theta)?);
    let ts: Vec<_> = link.tangents(theta)?.iter().map(|t| apply(u, t)).collect();
    let max_defect = legendrian_defect(&z, &ts);
    Ok(LegendrianReport { max_defect, samples: ts.len(), pass: max_defect <= tol })
}

pub(crate) fn apply(u: &DMatrix<C64>, v: &[C64]) -> Vec<C64> {
    let n = v.len();
    (0..n).map(|i| (0..n).map(|j| u[(i, j)] * v[j]).sum()).collect()
}

/// Row-major real and imaginary parts, the JSON form of complex matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrixJson {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

impl From<&DMatrix<C64>> for ComplexMatrixJson {
    fn from(a: &DMatrix<C64>) -> Self {
        let rows = |f: fn(&C64) -> f64| (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| f(&a[(i, j)])).collect()).collect();
        Self { re: rows(|c| c.re), im: rows(|c| c.im) }
    }
}

impl TryFrom<ComplexMatrixJson> for DMatrix<C64> {
    type Error = Error;
    fn try_from(j: ComplexMatrixJson) -> Result<Self> {
        let n = j.re.len();
        let ok = j.im.len() == n && j.re.iter().chain(&j.im).all(|row| row.len() == n);
        if !ok {
            return Err(Error::Input("complex matrix must be square with matching re/im parts".into()));
        }
        Ok(DMatrix::from_fn(n, n, |a, b| C64::new(j.re[a][b], j.im[a][b])))
    }
}

/// An element of `su(n)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrixJson", into = "ComplexMatrixJson")]
pub struct RotationGenerator {
    a: DMatrix<C64>,
}

impl TryFrom<ComplexMatrixJson> for RotationGenerator {
    type Error = Error;
    fn try_from(j: ComplexMatrixJson) -> Result<Self> {
        RotationGenerator::new(DMatrix::try_from(j)?)
    }
}

impl From<RotationGenerator> for ComplexMatrixJson {
    fn from(g: RotationGenerator) -> Self {
        ComplexMatrixJson::from(&g.a)
    }
}

impl RotationGenerator {
    /// Validates `a + a^* = 0` and `tr a = 0` to `1e-12` relative.
    pub fn new(a: DMatrix<C64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Input("generator must be square".into()));
        }
        let scale = a.norm().max(1.0);
        let skew = (&a + a.adjoint()).norm();
        if skew > 1e-12 * scale {
            return Err(Error::Input(format!("generator is not skew-hermitian (|a + a^*| = {skew:.3e})")));
        }
        if a.trace().norm() > 1e-12 * scale {
            return Err(Error::Input("generator is not traceless".into()));
        }
        Ok(Self { a })
    }

    pub fn zero(n: usize) -> Self {
        Self { a: DMatrix::zeros(n, n) }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.a.norm()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { a: self.a.map(|c| c * s) }
    }

    /// Conjugate `u^* a u`, the same generator seen in the frame `u`.
    pub fn conjugated(&self, u: &DMatrix<C64>) -> Self {
        Self { a: u.adjoint() * &self.a * u }
    }

    /// Extends an `su(m)` generator acting on the last `m` coordinates of `C^{k+m}`.
    pub fn embed_cone(&self, k: usize) -> Self {
        let m = self.dim();
        let mut a = DMatrix::zeros(k + m, k + m);
        a.view_mut((k, k), (m, m)).copy_from(&self.a);
        Self { a }
    }

    pub fn exp(&self, t: f64) -> DMatrix<C64> {
        self.a.map(|c| c * t).exp()
    }
}

/// The standard real basis of `su(n)`: `E_jl - E_lj`, `i(E_jl + E_lj)` and
/// `i(E_jj - E_{j+1,j+1})`.
pub fn su_basis(n: usize) -> Vec<RotationGenerator> {
    let mut out = Vec::with_capacity(n * n - 1);
    for j in 0..n {
        for l in j + 1..n {
            let mut a = DMatrix::zeros(n, n);
            a[(j, l)] = C64::new(1.0, 0.0);
            a[(l, j)] = C64::new(-1.0, 0.0);
            out.push(RotationGenerator { a });
            let mut b = DMatrix::zeros(n, n);
            b[(j, l)] = I;
            b[(l, j)] = I;
            out.push(RotationGenerator { a: b });
        }
    }
    for j in 0..n.saturating_sub(1) {
        let mut a = DMatrix::zeros(n, n);
        a[(j, j)] = I;
        a[(j + 1, j + 1)] = -I;
        out.push(RotationGenerator { a });
    }
    out
}

/// Generators of the symmetries whose hamiltonians are tested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryGenerator {
    Rotation(RotationGenerator),
    Translation(Vec<C64>),
}

impl SymmetryGenerator {
    pub fn dim(&self) -> usize {
        match self {
            Self::Rotation(a) => a.dim(),
            Self::Translation(v) => v.len(),
        }
    }

    /// The generating vector field at `z`.
    pub fn field(&self, z: &[C64]) -> Vec<C64> {
        match self {
            Self::Rotation(a) => apply(&a.a, z),
            Self::Translation(v) => v.clone(),
        }
    }
}

/// Hamiltonian `h` with `dh = omega(X, .)` and `h(0) = 0`.
pub fn moment_hamiltonian(g: &SymmetryGenerator, z: &[C64]) -> Result<f64> {
    if g.dim() != z.len() {
        return Err(Error::DimensionMismatch { expected: g.dim(), got: z.len() });
    }
    Ok(match g {
        SymmetryGenerator::Rotation(a) => {
            let az = apply(&a.a, z);
            // (i/2) z^* a z, real because a is skew-hermitian.
            let zaz: C64 = z.iter().zip(&az).map(|(p, q)| p.conj() * q).sum();
            (I * zaz * 0.5).re
        }
        SymmetryGenerator::Translation(v) => v.iter().zip(z).map(|(p, q)| (p.conj() * q).im).sum(),
    })
}

/// The model `U (R^k x C^m_HL)` with `U` special unitary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct CylinderModel {
    axial_dim: usize,
    link: HLLink,
    rotation: DMatrix<C64>,
}

#[derive(Serialize, Deserialize)]
struct RawModel {
    axial_dim: usize,
    m: usize,
    rotation: ComplexMatrixJson,
}

impl TryFrom<RawModel> for CylinderModel {
    type Error = Error;
    fn try_from(raw: RawModel) -> Result<Self> {
        let model = CylinderModel::new(raw.axial_dim, raw.m)?;
        let u = DMatrix::try_from(raw.rotation)?;
        model.with_rotation(u)
    }
}

impl From<CylinderModel> for RawModel {
    fn from(m: CylinderModel) -> Self {
        RawModel { axial_dim: m.axial_dim, m: m.link.m, rotation: ComplexMatrixJson::from(&m.rotation) }
    }
}

impl CylinderModel {
    pub fn new(axial_dim: usize, m: usize) -> Result<Self> {
        let link = HLLink::new(m)?;
        let n = axial_dim + m;
        Ok(Self { axial_dim, link, rotation: DMatrix::identity(n, n) })
    }

    /// Replaces the rotation; `u` must be special unitary to `1e-10`.
    pub fn with_rotation(&self, u: DMatrix<C64>) -> Result<Self> {
        let n = self.ambient_dim();
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: u.nrows() });
        }
        let drift = unitary_drift(&u);
        if drift > 1e-10 || (u.determinant() - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::Input(format!("rotation is not special unitary (drift {drift:.3e})")));
        }
        Ok(Self { rotation: u, ..self.clone() })
    }

    pub fn axial_dim(&self) -> usize {
        self.axial_dim
    }

    pub fn link(&self) -> &HLLink {
        &self.link
    }

    pub fn m(&self) -> usize {
        self.link.m
    }

    pub fn ambient_dim(&self) -> usize {
        self.axial_dim + self.link.m
    }

    pub fn rotation(&self) -> &DMatrix<C64> {
        &self.rotation
    }

    /// The model without its rotation.
    pub fn unrotated(&self) -> Self {
        let n = self.ambient_dim();
        Self { rotation: DMatrix::identity(n, n), ..self.clone() }
    }

    fn check_params(&self, x: &[f64], r: f64, theta: &[f64]) -> Result<()> {
        if x.len() != self.axial_dim {
            return Err(Error::DimensionMismatch { expected: self.axial_dim, got: x.len() });
        }
        if theta.len() != self.link.m - 1 {
            return Err(Error::DimensionMismatch { expected: self.link.m - 1, got: theta.len() });
        }
        if !(r > 0.0) {
            return Err(Error::Domain(format!("cone radius must be positive, got {r}")));
        }
        Ok(())
    }

    /// `(x, r L(theta))` before rotation.
    pub fn unrotated_point(&self, x: &[f64], r: f64, theta: &[f64]) -> Result<Vec<C64>> {
        if x.len() != self.axial_dim {
            return Err(Error::DimensionMismatch { expected: self.axial_dim, got: x.len() });
        }
        let l = self.link.point(theta)?;
        let mut z: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
        z.extend(l.into_iter().map(|c| c * r));
        Ok(z)
    }

    pub fn point(&self, x: &[f64], r: f64, theta: &[f64]) -> Result<Vec<C64>> {
        Ok(apply(&self.rotation, &self.unrotated_point(x, r, theta)?))
    }

    /// Ambient coordinates expressed in the unrotated frame, `U^* q`.
    pub fn to_model_frame(&self, q: &[C64]) -> Vec<C64> {
        apply(&self.rotation.adjoint(), q)
    }

    /// Distance of `q` from the axis `R^k x {0}` of the (rotated) model.
    pub fn cone_radius(&self, q: &[C64]) -> f64 {
        norm(&self.to_model_frame(q)[self.axial_dim..])
    }

    /// Coordinate frame `(e_i, L, r t_a)` at a model point.
    pub fn frame(&self, x: &[f64], r: f64, theta: &[f64]) -> Result<TangentFrame> {
        self.check_params(x, r, theta)?;
        let n = self.ambient_dim();
        let k = self.axial_dim;
        let l = self.link.point(theta)?;
        let mut vectors = Vec::with_capacity(n);
        for i in 0..k {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[i] = C64::new(1.0, 0.0);
            vectors.push(e);
        }
        let mut radial = vec![C64::new(0.0, 0.0); k];
        radial.extend(l.iter().copied());
        vectors.push(radial);
        for t in self.link.tangents(theta)? {
            let mut v = vec![C64::new(0.0, 0.0); k];
            v.extend(t.into_iter().map(|c| c * r));
            vectors.push(v);
        }
        let vectors = vectors.iter().map(|v| apply(&self.rotation, v)).collect();
        TangentFrame::new(self.point(x, r, theta)?, vectors)
    }

    /// Euclidean distance from `q` to the model.
    pub fn distance(&self, q: &[C64]) -> f64 {
        self.nearest(q).1
    }

    /// Nearest model point in parameters `(x, r, theta)` and the distance.
    /// Points on the axis get `r = 0`.
    pub fn nearest(&self, q: &[C64]) -> ((Vec<f64>, f64, Vec<f64>), f64) {
        let z = self.to_model_frame(q);
        let k = self.axial_dim;
        let x: Vec<f64> = z[..k].iter().map(|c| c.re).collect();
        let y2: f64 = z[..k].iter().map(|c| c.im * c.im).sum();
        let (theta, g) = best_link_alignment(&self.link, &z[k..]);
        let cone2 = real_dot(&z[k..], &z[k..]);
        let proj = g.max(0.0);
        let d2 = (y2 + cone2 - proj * proj).max(0.0);
        ((x, proj, theta), d2.sqrt())
    }
}

/// Maximizes `g(theta) = Re <w, L(theta)>` over the torus; returns the argmax
/// and the maximum.
///
/// With `w_j = |w_j| e^{i alpha_j}` and `phi_j = alpha_j - theta_j`, the
/// problem is `max sum |w_j| cos(phi_j) / sqrt(m)` under
/// `sum phi_j = sum alpha_j - phase (mod 2 pi)`. Newton iterations start from
/// every equal-split branch and from every single-angle concentration.
pub fn best_link_alignment(link: &HLLink, w: &[C64]) -> (Vec<f64>, f64) {
    let m = link.m;
    let amp: Vec<f64> = w.iter().map(|c| c.norm()).collect();
    let alpha: Vec<f64> = w.iter().map(|c| if c.norm() > 0.0 { c.arg() } else { 0.0 }).collect();
    let total = alpha.iter().sum::<f64>() - link.phase;
    let scale = 1.0 / (m as f64).sqrt();
    let objective = |phi: &[f64]| -> f64 {
        let last = total - phi.iter().sum::<f64>();
        scale * (phi.iter().zip(&amp).map(|(p, a)| a * p.cos()).sum::<f64>() + amp[m - 1] * last.cos())
    };
    let mut starts: Vec<Vec<f64>> = Vec::new();
    for l in 0..m {
        let d = (total - 2.0 * PI * l as f64) / m as f64;
        starts.push(vec![d; m - 1]);
    }
    for j in 0..m {
        let mut s = vec![0.0; m - 1];
        if j < m - 1 {
            s[j] = total;
        }
        starts.push(s);
    }
    let mut best = (vec![0.0; m - 1], f64::NEG_INFINITY);
    for start in starts {
        let phi = newton_maximize(&amp, total, start);
        let v = objective(&phi);
        if v > best.1 {
            best = (phi, v);
        }
    }
    let theta = best.0.iter().zip(&alpha).map(|(p, a)| a - p).collect();
    (theta, best.1)
}

fn newton_maximize(amp: &[f64], total: f64, mut phi: Vec<f64>) -> Vec<f64> {
    let m = amp.len();
    let f = |phi: &[f64]| {
        let last = total - phi.iter().sum::<f64>();
        phi.iter().zip(amp).map(|(p, a)| a * p.cos()).sum::<f64>() + amp[m - 1] * last.cos()
    };
    for _ in 0..60 {
        let last = total - phi.iter().sum::<f64>();
        let (sl, cl) = last.sin_cos();
        let grad: Vec<f64> = (0..m - 1).map(|a| -amp[a] * phi[a].sin() + amp[m - 1] * sl).collect();
        let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if gnorm < 1e-15 * amp.iter().cloned().fold(1e-300, f64::max) {
            break;
        }
        let hess = DMatrix::from_fn(m - 1, m - 1, |a, b| {
            let d = if a == b { -amp[a] * phi[a].cos() } else { 0.0 };
            d - amp[m - 1] * cl
        });
        let g = DVector::from_vec(grad.clone());
        // Newton step when the Hessian is negative definite, gradient ascent otherwise.
        let step = match (-&hess).cholesky() {
            Some(ch) => ch.solve(&g),
            None => g.clone(),
        };
        let f0 = f(&phi);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = phi.iter().zip(step.iter()).map(|(p, s)| p + t * s).collect();
            if f(&trial) >= f0 {
                phi = trial;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    phi
}

/// `|U^* U - I|_F`.
pub fn unitary_drift(u: &DMatrix<C64>) -> f64 {
    (u.adjoint() * u - DMatrix::identity(u.nrows(), u.ncols())).norm()
}

/// Nearest special unitary matrix in the polar sense.
pub fn reproject_special_unitary(u: &DMatrix<C64>) -> DMatrix<C64> {
    let svd = u.clone().svd(true, true);
    let w = svd.u.expect("requested U") * svd.v_t.expect("requested V^T");
    let n = w.nrows() as f64;
    let det = w.determinant();
    let fix = C64::from_polar(1.0, -det.arg() / n);
    w.map(|c| c * fix)
}

/// Ambient rotation `model -> exp(t a) model`.
pub fn rotate_model(model: &CylinderModel, a: &RotationGenerator, t: f64) -> Result<CylinderModel> {
    let n = model.ambient_dim();
    if a.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.dim() });
    }
    if t == 0.0 {
        return Ok(model.clone());
    }
    let mut u = a.exp(t) * &model.rotation;
    if unitary_drift(&u) > 1e-12 {
        u = reproject_special_unitary(&u);
    }
    Ok(CylinderModel { rotation: u, ..model.clone() })
}

/// Real frame of `n` tangent vectors at a base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentFrame {
    pub base: Vec<C64>,
    pub vectors: Vec<Vec<C64>>,
}

impl TangentFrame {
    /// Fails with a frame error when the real Gram matrix is numerically singular.
    pub fn new(base: Vec<C64>, vectors: Vec<Vec<C64>>) -> Result<Self> {
        let n = base.len();
        if vectors.len() != n || vectors.iter().any(|v| v.len() != n) {
            return Err(Error::Frame(format!("need {n} vectors of length {n}")));
        }
        let frame = Self { base, vectors };
        let gram = frame.gram();
        // Judge the angles between the vectors, not their lengths: pivots of
        // the Cholesky factor of the unit-diagonal Gram matrix bound its
        // smallest eigenvalue from above.
        let d = gram.diagonal();
        if d.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Frame("zero tangent vector".into()));
        }
        let unit = DMatrix::from_fn(n, n, |i, j| gram[(i, j)] / (d[i] * d[j]).sqrt());
        let lo = unit.cholesky().map(|c| c.l().diagonal().map(|p| p * p).min()).unwrap_or(0.0);
        if lo <= 1e-12 {
            return Err(Error::Frame(format!("Gram matrix is singular (condition {:.3e})", 1.0 / lo.max(1e-300))));
        }
        Ok(frame)
    }

    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.vectors.len();
        DMatrix::from_fn(n, n, |i, j| real_dot(&self.vectors[i], &self.vectors[j]))
    }

    /// `n`-volume spanned by the frame.
    pub fn volume(&self) -> f64 {
        self.gram().determinant().max(0.0).sqrt()
    }

    /// `Omega(v_1, ..., v_n) = det[v_1 | ... | v_n]`.
    pub fn holomorphic_volume(&self) -> C64 {
        let n = self.vectors.len();
        DMatrix::from_fn(n, n, |i, j| self.vectors[j][i]).determinant()
    }

    /// Orthogonal projection of `v` onto the normal space.
    pub fn normal_part(&self, v: &[C64]) -> Result<Vec<C64>> {
        let n = self.vectors.len();
        let rhs = DVector::from_fn(n, |i, _| real_dot(&self.vectors[i], v));
        let c = self
            .gram()
            .cholesky()
            .ok_or_else(|| Error::Frame("Gram matrix not positive definite".into()))?
            .solve(&rhs);
        let mut out = v.to_vec();
        for (ci, vi) in c.iter().zip(&self.vectors) {
            for (o, w) in out.iter_mut().zip(vi) {
                *o -= w * *ci;
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialLagrangianReport {
    pub max_omega_defect: f64,
    #[serde(rename = "max_imOmega_defect")]
    pub max_im_omega_defect: f64,
    pub samples: usize,
    pub pass: bool,
}

impl SpecialLagrangianReport {
    fn merge(reports: &[Self], tol: f64) -> Self {
        let om = reports.iter().map(|r| r.max_omega_defect).fold(0.0, f64::max);
        let im = reports.iter().map(|r| r.max_im_omega_defect).fold(0.0, f64::max);
        Self {
            max_omega_defect: om,
            max_im_omega_defect: im,
            samples: reports.iter().map(|r| r.samples).sum(),
            pass: om <= tol && im <= tol,
        }
    }
}

/// Phase `e^{i phi}` making `e^{i phi} Omega` real on the unrotated model.
///
/// Found numerically at one chart point; `Omega` has constant phase on a
/// special Lagrangian, which the check itself then verifies elsewhere.
pub fn calibration_phase(k: usize, m: usize) -> Result<C64> {
    let model = CylinderModel::new(k, m)?;
    let frame = model.frame(&vec![0.0; k], 1.0, &vec![0.0; m - 1])?;
    let om = frame.holomorphic_volume();
    Ok(C64::from_polar(1.0, -om.arg()))
}

/// Normalized `omega` and `Im Omega` defects of a frame tangent to the model.
pub fn check_special_lagrangian(model: &CylinderModel, frame: &TangentFrame, tol: f64) -> Result<SpecialLagrangianReport> {
    let n = model.ambient_dim();
    if frame.vectors.len() != n {
        return Err(Error::Frame(format!("expected {n} vectors")));
    }
    let mut om: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&frame.vectors[i], &frame.vectors[j]);
            om = om.max(omega(a, b).abs() / (norm(a) * norm(b)));
        }
    }
    let phase = calibration_phase(model.axial_dim, model.m())?;
    let vol = frame.volume();
    if !(vol > 0.0) {
        return Err(Error::Frame("frame spans zero volume".into()));
    }
    let im = (phase * frame.holomorphic_volume()).im.abs() / vol;
    Ok(SpecialLagrangianReport { max_omega_defect: om, max_im_omega_defect: im, samples: 1, pass: om <= tol && im <= tol })
}

/// [`check_special_lagrangian`] over `samples` seeded random model points.
pub fn audit_special_lagrangian(model: &CylinderModel, samples: usize, seed: u64, tol: f64) -> Result<SpecialLagrangianReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::with_capacity(samples);
    for _ in 0..samples {
        let (x, r, theta) = random_params(&mut rng, model.axial_dim, model.m());
        reports.push(check_special_lagrangian(model, &model.frame(&x, r, &theta)?, tol)?);
    }
    Ok(SpecialLagrangianReport::merge(&reports, tol))
}

pub(crate) fn random_params(rng: &mut ChaCha8Rng, k: usize, m: usize) -> (Vec<f64>, f64, Vec<f64>) {
    let x = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let r = rng.random_range(0.2..1.5);
    let theta = (0..m - 1).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    (x, r, theta)
}

/// Restriction of a moment hamiltonian to the model, as an expansion in the
/// model's own coordinates.
///
/// For `h = (1/2) z^* H z` with `H = i a` and `z = (x, r L)`:
/// the axial block gives `(1/2) x^T Re(H_xx) x`, the mixed block
/// `x_i r Re(H_ij L_j)` and the cone block `(r^2/2m) sum H_jl e^{i(theta_l - theta_j)}`.
/// The diagonal parts combine into the harmonic `(1/2) sum H_ii (x_i^2 - r^2/m)`
/// because `tr H = 0`.
pub fn hamiltonian_expansion(model: &CylinderModel, g: &SymmetryGenerator) -> Result<HarmonicExpansion> {
    let k = model.axial_dim;
    let m = model.m();
    let n = k + m;
    if g.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: g.dim() });
    }
    let u = &model.rotation;
    let mut out = HarmonicExpansion::new(k, m)?;
    let link = model.link;
    // theta_j = nu_j . theta + c_j for j = 1..m.
    let angle = |j: usize| -> (Vec<i64>, f64) {
        if j < m - 1 {
            let mut nu = vec![0; m - 1];
            nu[j] = 1;
            (nu, 0.0)
        } else {
            (vec![-1; m - 1], link.phase)
        }
    };
    let sm = 1.0 / (m as f64).sqrt();
    let one = AxialPoly::constant(k, 1.0);
    match g {
        SymmetryGenerator::Translation(v) => {
            // h = Im(v^* z) = Re(-i conj(v) . z).
            let v = apply(&u.adjoint(), v);
            for i in 0..k {
                let c = (-I * v[i].conj()).re;
                out.push_harmonic(AxialPoly::coordinate(k, i)?, vec![0; m - 1], Parity::Cos, c)?;
            }
            for j in 0..m {
                let (nu, c) = angle(j);
                let d = -I * v[k + j].conj() * C64::from_polar(sm, c);
                out.push_phase(one.clone(), 0, nu, d)?;
            }
        }
        SymmetryGenerator::Rotation(a) => {
            let h = a.conjugated(u).a.map(|c| c * I);
            for i in 0..k {
                for j in i + 1..k {
                    let e = AxialPoly::monomial(unit2(k, i, j), h[(i, j)].re);
                    out.push_harmonic(e, vec![0; m - 1], Parity::Cos, 1.0)?;
                }
                let sq = AxialPoly::monomial(unit2(k, i, i), 1.0);
                out.push_harmonic(sq, vec![0; m - 1], Parity::Cos, 0.5 * h[(i, i)].re)?;
                for j in 0..m {
                    let (nu, c) = angle(j);
                    let d = h[(i, k + j)] * C64::from_polar(sm, c);
                    out.push_phase(AxialPoly::coordinate(k, i)?, 0, nu, d)?;
                }
            }
            // Cone block: diagonal terms are constant on the link and pair up
            // with the axial diagonal above via tr H = 0.
            let diag_axial: f64 = (0..k).map(|i| h[(i, i)].re).sum();
            let diag_cone: f64 = (0..m).map(|j| h[(k + j, k + j)].re).sum();
            let resid = diag_axial + diag_cone;
            if resid.abs() > 1e-12 * h.norm().max(1.0) {
                return Err(Error::Input("generator is not traceless".into()));
            }
            for j in 0..m {
                for l in j + 1..m {
                    let (nj, cj) = angle(j);
                    let (nl, cl) = angle(l);
                    let nu: Vec<i64> = nl.iter().zip(&nj).map(|(a, b)| a - b).collect();
                    let d = h[(k + j, k + l)] * C64::from_polar(1.0 / m as f64, cl - cj);
                    out.push_phase(one.clone(), 0, nu, d)?;
                }
            }
        }
    }
    Ok(out)
}

fn unit2(k: usize, i: usize, j: usize) -> Vec<u32> {
    let mut e = vec![0; k];
    e[i] += 1;
    e[j] += 1;
    e
}

/// Numerical rank of `{h_a |_C : a in su(m)}` sampled on the unit link.
pub fn su_harmonics_rank(model: &CylinderModel, sample_count: usize) -> Result<usize> {
    let m = model.m();
    let basis = su_basis(m);
    if sample_count < basis.len() {
        return Err(Error::Input(format!("need at least {} samples, got {sample_count}", basis.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let pts: Vec<Vec<C64>> = (0..sample_count)
        .map(|_| {
            let theta: Vec<f64> = (0..m - 1).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            model.link.point(&theta).expect("valid theta")
        })
        .collect();
    rank_of_family(&basis, &pts)
}

/// Numerical rank of `{h_a |_cylinder : a in su(n)}`; equals
/// `n^2 - 1 - k(k-1)/2 - (m-1)` for the stabilizer `so(k) + t^{m-1}`.
pub fn su_n_harmonics_rank(model: &CylinderModel, sample_count: usize) -> Result<usize> {
    let basis = su_basis(model.ambient_dim());
    if sample_count < basis.len() {
        return Err(Error::Input(format!("need at least {} samples, got {sample_count}", basis.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let pts: Vec<Vec<C64>> = (0..sample_count)
        .map(|_| {
            let (x, r, theta) = random_params(&mut rng, model.axial_dim, model.m());
            model.point(&x, r, &theta).expect("valid params")
        })
        .collect();
    rank_of_family(&basis, &pts)
}

fn rank_of_family(basis: &[RotationGenerator], pts: &[Vec<C64>]) -> Result<usize> {
    let mut mat = DMatrix::<f64>::zeros(pts.len(), basis.len());
    for (j, a) in basis.iter().enumerate() {
        let g = SymmetryGenerator::Rotation(a.clone());
        for (i, z) in pts.iter().enumerate() {
            mat[(i, j)] = moment_hamiltonian(&g, z)?;
        }
    }
    let sv = mat.svd(false, false).singular_values;
    let max = sv.max();
    Ok(sv.iter().filter(|&&s| s > 1e-8 * max).count())
}

/// Graph point, tangent frame and displacement at one parameter point.
#[derive(Debug, Clone)]
pub struct GraphSample {
    /// `U (P - J W)`.
    pub point: Vec<C64>,
    /// `U P`, the base point on the model.
    pub base: Vec<C64>,
    /// `U W`, the pushed-forward gradient.
    pub gradient: Vec<C64>,
    /// Columns of `D Phi` in parameter order `(x, r, theta)`.
    pub tangents: Vec<Vec<C64>>,
    pub jet: Jet,
}

impl GraphSample {
    pub fn frame(&self) -> Result<TangentFrame> {
        TangentFrame::new(self.point.clone(), self.tangents.clone())
    }

    /// Area element `sqrt(det(D Phi^T D Phi))` in parameter coordinates.
    pub fn area_element(&self) -> f64 {
        let n = self.tangents.len();
        let g = DMatrix::from_fn(n, n, |i, j| real_dot(&self.tangents[i], &self.tangents[j]));
        g.determinant().max(0.0).sqrt()
    }
}

/// First-order graph point `U (P - J grad f)`.
pub fn graph_point(model: &CylinderModel, f: &HarmonicExpansion, x: &[f64], r: f64, theta: &[f64]) -> Result<Vec<C64>> {
    Ok(graph_sample(model, f, x, r, theta)?.point)
}

/// Graph point together with its derivatives.
pub fn graph_sample(model: &CylinderModel, f: &HarmonicExpansion, x: &[f64], r: f64, theta: &[f64]) -> Result<GraphSample> {
    let k = model.axial_dim;
    let m = model.m();
    if f.axial_dim() != k || f.m() != m {
        return Err(Error::Input(format!(
            "expansion lives on R^{} x C^{}, model on R^{k} x C^{m}",
            f.axial_dim(),
            f.m()
        )));
    }
    model.check_params(x, r, theta)?;
    let n = k + m;
    let jet = f.jet(x, r, theta)?;
    let l = model.link.point(theta)?;
    let ts = model.link.tangents(theta)?;
    let zero = C64::new(0.0, 0.0);
    let th = k + 1;
    let mf = m as f64;
    // G^{-1} = m I - 1 1^T on angle covectors.
    let raise = |v: &[f64]| -> Vec<f64> {
        let s: f64 = v.iter().sum();
        v.iter().map(|a| mf * a - s).collect()
    };

    // Ambient image of a parameter covector: sum dx_i e_i + dr L + r^{-1} (G^{-1} dth)_a t_a.
    // Only the entries a and m-1 of t_a are nonzero.
    let push = |row: &[f64]| -> Vec<C64> {
        let mut v = vec![zero; n];
        for i in 0..k {
            v[i] = C64::new(row[i], 0.0);
        }
        let g = raise(&row[th..]);
        for j in 0..m {
            v[k + j] = l[j] * row[k];
        }
        for a in 0..m - 1 {
            v[k + a] += ts[a][a] * (g[a] / r);
            v[k + m - 1] += ts[a][m - 1] * (g[a] / r);
        }
        v
    };
    let w = push(&jet.grad);
    let g = raise(&jet.grad[th..]);
    let gsum: f64 = g.iter().sum();
    let f_r = jet.grad[k];

    let p = model.unrotated_point(x, r, theta)?;
    let mut dp = Vec::with_capacity(n);
    for i in 0..k {
        let mut e = vec![zero; n];
        e[i] = C64::new(1.0, 0.0);
        dp.push(e);
    }
    let mut radial = vec![zero; k];
    radial.extend(l.iter().copied());
    dp.push(radial);
    for t in &ts {
        let mut v = vec![zero; k];
        v.extend(t.iter().map(|c| c * r));
        dp.push(v);
    }

    let mut tangents = Vec::with_capacity(n);
    for col in 0..n {
        let mut dw = push(&jet.hess[col * n..(col + 1) * n]);
        if col == k {
            for a in 0..m - 1 {
                dw[k + a] -= ts[a][a] * (g[a] / (r * r));
                dw[k + m - 1] -= ts[a][m - 1] * (g[a] / (r * r));
            }
        } else if col >= th {
            let c = col - th;
            dw[k + c] += ts[c][c] * f_r;
            dw[k + m - 1] += ts[c][m - 1] * f_r;
            // r^{-1} sum_a g_a d_c t_a with d_c t_a = -delta_ac L_a e_a - L_m e_m.
            dw[k + c] -= l[c] * (g[c] / r);
            dw[k + m - 1] -= l[m - 1] * (gsum / r);
        }
        let v: Vec<C64> = dp[col].iter().zip(&dw).map(|(a, b)| a - I * b).collect();
        tangents.push(apply(&model.rotation, &v));
    }
    let phi: Vec<C64> = p.iter().zip(&w).map(|(a, b)| a - I * b).collect();
    Ok(GraphSample {
        point: apply(&model.rotation, &phi),
        base: apply(&model.rotation, &p),
        gradient: apply(&model.rotation, &w),
        tangents,
        jet,
    })
}

/// Cylinder-metric norm `|df|` from a parameter jet.
pub fn gradient_norm(jet: &Jet, k: usize, m: usize, r: f64) -> f64 {
    let ginv = inverse_link_metric(m);
    let ft = DVector::from_column_slice(&jet.grad[k + 1..]);
    let ang = ft.dot(&(&ginv * &ft)) / (r * r);
    let flat: f64 = jet.grad[..=k].iter().map(|v| v * v).sum();
    (flat + ang).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_point_examples() {
        let link = HLLink::new(3).unwrap();
        let z = link_point(&link, &[0.0, 0.0]).unwrap();
        for c in &z {
            assert!((c - C64::new(1.0 / 3f64.sqrt(), 0.0)).norm() < 1e-15);
        }
        for m in 3..8 {
            let link = HLLink::new(m).unwrap();
            let theta: Vec<f64> = (0..m - 1).map(|j| 0.37 * j as f64 + 0.1).collect();
            let z = link.point(&theta).unwrap();
            let prod: C64 = z.iter().product();
            let arg = (I.powu(m as u32 + 1) * prod).arg();
            assert!(arg.abs() < 1e-12, "m={m} arg={arg}");
            for c in &z {
                assert!((c.norm() - 1.0 / (m as f64).sqrt()).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn induced_metric_examples() {
        let g = induced_metric(&HLLink::new(3).unwrap());
        let want = [[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
        for a in 0..2 {
            for b in 0..2 {
                assert!((g[(a, b)] - want[a][b]).abs() < 1e-15);
            }
        }
        for m in 3..9 {
            let g = induced_metric(&HLLink::new(m).unwrap());
            assert!((g.determinant() - (m as f64).powi(2 - m as i32)).abs() < 1e-12);
            let prod = &g * inverse_link_metric(m);
            assert!((prod - DMatrix::identity(m - 1, m - 1)).norm() < 1e-13);
        }
    }

    #[test]
    fn legendrian_counterexample() {
        let link = HLLink::new(3).unwrap();
        assert!(check_legendrian(&link, &[0.3, 1.1], 1e-12).unwrap().pass);
        let z = link.point(&[0.3, 1.1]).unwrap();
        // Scale coordinates unevenly: the torus direction is no longer horizontal.
        let s = [1.0, 2.0, 0.5];
        let zs: Vec<C64> = z.iter().zip(&s).map(|(c, f)| c * f).collect();
        let ts: Vec<Vec<C64>> = link
            .tangents(&[0.3, 1.1])
            .unwrap()
            .into_iter()
            .map(|t| t.iter().zip(&s).map(|(c, f)| c * f).collect())
            .collect();
        assert!(legendrian_defect(&zs, &ts) > 1e-3);
    }

    #[test]
    fn generator_validation() {
        let mut a = DMatrix::<C64>::zeros(2, 2);
        a[(0, 1)] = C64::new(1.0, 0.0);
        assert!(RotationGenerator::new(a.clone()).is_err());
        a[(1, 0)] = C64::new(-1.0, 0.0);
        assert!(RotationGenerator::new(a).is_ok());
        let mut d = DMatrix::<C64>::zeros(2, 2);
        d[(0, 0)] = I;
        assert!(RotationGenerator::new(d).is_err());
        assert_eq!(su_basis(4).len(), 15);
    }

    #[test]
    fn alignment_matches_grid_search() {
        let link = HLLink::new(3).unwrap();
        let w = [C64::new(0.3, -0.2), C64::new(-0.5, 0.1), C64::new(0.05, 0.4)];
        let (_, g) = best_link_alignment(&link, &w);
        let mut best = f64::NEG_INFINITY;
        let n = 400;
        for i in 0..n {
            for j in 0..n {
                let th = [2.0 * PI * i as f64 / n as f64, 2.0 * PI * j as f64 / n as f64];
                let l = link.point(&th).unwrap();
                best = best.max(real_dot(&w, &l));
            }
        }
        assert!(g >= best - 1e-12 && g - best < 1e-3, "{g} vs {best}");
    }

    #[test]
    fn rotate_and_back() {
        let model = CylinderModel::new(1, 3).unwrap();
        let a = su_basis(4)[3].scaled(0.3);
        let r = rotate_model(&model, &a, 1.0).unwrap();
        let back = rotate_model(&r, &a, -1.0).unwrap();
        assert!((back.rotation() - model.rotation()).norm() < 1e-12);
        assert_eq!(rotate_model(&model, &a, 0.0).unwrap(), model);
        assert!(unitary_drift(r.rotation()) < 1e-12);
    }
}
