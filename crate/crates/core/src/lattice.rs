//! Laplace spectrum of the flat torus link of the Harvey-Lawson cone.
//!
//! Eigenfunctions of the link `T^{m-1}` are indexed by integer frequency
//! vectors `nu` in `Z^{m-1}`; the eigenvalue of `exp(i nu . theta)` is the
//! integral quadratic form
//!
//! ```text
//! q(nu) = m |nu|^2 - (sum_i nu_i)^2
//! ```
//!
//! Eigenvalues follow the `-div grad` convention and are non-negative. All
//! counting is done in exact integer arithmetic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported ambient complex dimension.
pub const MAX_M: usize = 64;

/// The quadratic form attached to `C^m_HL`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FormSpec {
    m: usize,
}

impl FormSpec {
    pub fn new(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::UnsupportedDimension(format!("m = {m} (need m >= 3)")));
        }
        if m > MAX_M {
            return Err(Error::UnsupportedDimension(format!("m = {m} exceeds the cap {MAX_M}")));
        }
        Ok(Self { m })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Dimension of the link torus, `m - 1`.
    pub fn rank(&self) -> usize {
        self.m - 1
    }

    pub fn eigenvalue(&self, nu: &[i64]) -> Result<u64> {
        eigenvalue_of(self.m, nu)
    }

    /// `m - 1`, the eigenvalue of linear-growth harmonics.
    pub fn linear_eigenvalue(&self) -> u64 {
        self.m as u64 - 1
    }

    /// `2m`, the eigenvalue of quadratic-growth harmonics.
    pub fn quadratic_eigenvalue(&self) -> u64 {
        2 * self.m as u64
    }
}

/// A torus eigenfunction index together with its eigenvalue.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FrequencyMode {
    pub nu: Vec<i64>,
    pub eigenvalue: u64,
}

impl FrequencyMode {
    pub fn new(m: usize, nu: Vec<i64>) -> Result<Self> {
        let eigenvalue = eigenvalue_of(m, &nu)?;
        Ok(Self { nu, eigenvalue })
    }

    pub fn is_zero(&self) -> bool {
        self.nu.iter().all(|&v| v == 0)
    }
}

/// `q(nu) = m |nu|^2 - (sum nu)^2`.
pub fn eigenvalue_of(m: usize, nu: &[i64]) -> Result<u64> {
    FormSpec::new(m)?;
    if nu.len() != m - 1 {
        return Err(Error::DimensionMismatch { expected: m - 1, got: nu.len() });
    }
    let mut sq: i128 = 0;
    let mut sum: i128 = 0;
    for &v in nu {
        let v = v as i128;
        sq = sq.checked_add(v * v).ok_or(Error::Overflow("eigenvalue_of"))?;
        sum += v;
    }
    let q = (m as i128)
        .checked_mul(sq)
        .and_then(|a| a.checked_sub(sum.checked_mul(sum)?))
        .ok_or(Error::Overflow("eigenvalue_of"))?;
    u64::try_from(q).map_err(|_| Error::Overflow("eigenvalue_of"))
}

/// All `nu` with `q(nu) == lambda`, sorted lexicographically.
///
/// The search box `|nu_i| <= floor(sqrt(lambda))` is complete because
/// `q(nu) >= |nu|^2`.
pub fn enumerate_modes(m: usize, lambda: u64) -> Result<Vec<FrequencyMode>> {
    enumerate_modes_in_box(m, lambda, isqrt(lambda) as i64)
}

/// Same as [`enumerate_modes`] but searching the box `|nu_i| <= bound`.
pub fn enumerate_modes_in_box(m: usize, lambda: u64, bound: i64) -> Result<Vec<FrequencyMode>> {
    FormSpec::new(m)?;
    if bound < 0 {
        return Err(Error::Input(format!("negative search bound {bound}")));
    }
    let dim = m - 1;
    let lambda = lambda as i128;
    let mut found: Vec<Vec<i64>> = (-bound..=bound)
        .into_par_iter()
        .flat_map_iter(|first| {
            let mut out = Vec::new();
            let mut nu = vec![0i64; dim];
            nu[0] = first;
            let q = (first as i128) * (first as i128);
            let s = first as i128;
            search(m, lambda, bound, &mut nu, 1, q, s, &mut out);
            out
        })
        .collect();
    found.sort();
    Ok(found
        .into_iter()
        .map(|nu| FrequencyMode { nu, eigenvalue: lambda as u64 })
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn search(
    m: usize,
    lambda: i128,
    bound: i64,
    nu: &mut [i64],
    depth: usize,
    sq: i128,
    sum: i128,
    out: &mut Vec<Vec<i64>>,
) {
    let m_i = m as i128;
    let remaining = (nu.len() - depth) as i128;
    // Minimum of q over real completions of the remaining coordinates:
    // m*sq - m*sum^2/(m - remaining).
    if m_i * sq * (m_i - remaining) - m_i * sum * sum > lambda * (m_i - remaining) {
        return;
    }
    if depth == nu.len() {
        if m_i * sq - sum * sum == lambda {
            out.push(nu.to_vec());
        }
        return;
    }
    for v in -bound..=bound {
        nu[depth] = v;
        let v = v as i128;
        search(m, lambda, bound, nu, depth + 1, sq + v * v, sum + v, out);
    }
    nu[depth] = 0;
}

/// Number of real eigenfunctions with eigenvalue `lambda` (`lambda = 0` counts
/// the constants once).
pub fn multiplicity(m: usize, lambda: u64) -> Result<usize> {
    Ok(enumerate_modes(m, lambda)?.len())
}

/// Spectral rigidity data for `C^m_HL`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RigidityReport {
    pub m: usize,
    /// Multiplicity of the eigenvalue `m - 1`.
    pub linear_mult: usize,
    /// Multiplicity of the eigenvalue `2m`.
    pub quadratic_mult: usize,
    /// `dim SU(m) - dim U(1)^{m-1} = m^2 - m`.
    pub su_orbit_dim: usize,
    pub excess: i64,
    pub rigid: bool,
}

pub fn rigidity_report(m: usize) -> Result<RigidityReport> {
    let form = FormSpec::new(m)?;
    let linear_mult = multiplicity(m, form.linear_eigenvalue())?;
    let quadratic_mult = multiplicity(m, form.quadratic_eigenvalue())?;
    let su_orbit_dim = m * m - m;
    let excess = quadratic_mult as i64 - su_orbit_dim as i64;
    Ok(RigidityReport {
        m,
        linear_mult,
        quadratic_mult,
        su_orbit_dim,
        excess,
        rigid: linear_mult == 2 * m && excess == 0,
    })
}

pub(crate) fn isqrt(n: u64) -> u64 {
    let mut x = (n as f64).sqrt() as u64;
    while x * x > n {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= n {
        x += 1;
    }
    x
}
