//! Real polynomials on the axial factor `R^k`.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A polynomial in `k` real variables stored as exponent vector -> coefficient.
///
/// Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AxialPoly {
    vars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl AxialPoly {
    pub fn zero(vars: usize) -> Self {
        Self { vars, terms: BTreeMap::new() }
    }

    pub fn constant(vars: usize, c: f64) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(vec![0; vars], c);
        p
    }

    /// The coordinate function `x_i` (0-based index).
    pub fn coordinate(vars: usize, i: usize) -> Result<Self> {
        if i >= vars {
            return Err(Error::Input(format!("axial index {i} out of range for k = {vars}")));
        }
        let mut e = vec![0; vars];
        e[i] = 1;
        Ok(Self::monomial(e, 1.0))
    }

    pub fn monomial(exponents: Vec<u32>, c: f64) -> Self {
        let mut p = Self::zero(exponents.len());
        p.add_term(exponents, c);
        p
    }

    pub fn from_terms(vars: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        let mut p = Self::zero(vars);
        for (e, c) in terms {
            if e.len() != vars {
                return Err(Error::DimensionMismatch { expected: vars, got: e.len() });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, exponents: Vec<u32>, c: f64) {
        debug_assert_eq!(exponents.len(), self.vars);
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(exponents.clone()).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.remove(&exponents);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = Self::zero(self.vars);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    /// Total degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    /// Common degree of all terms, if the polynomial is homogeneous and nonzero.
    pub fn homogeneous_degree(&self) -> Option<u32> {
        let mut degs = self.terms.keys().map(|e| e.iter().sum::<u32>());
        let d = degs.next()?;
        degs.all(|x| x == d).then_some(d)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero(self.vars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut d = e.clone();
                d[i] -= 1;
                out.add_term(d, c * e[i] as f64);
            }
        }
        out
    }

    pub fn laplacian(&self) -> Self {
        let mut out = Self::zero(self.vars);
        for i in 0..self.vars {
            out = out.add(&self.derivative(i).derivative(i));
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(e, c)| c * monomial_value(e, x)).sum()
    }

    /// Value, gradient and Hessian (row-major `k x k`) at `x`.
    pub fn jet(&self, x: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let k = self.vars;
        let mut v = 0.0;
        let mut g = vec![0.0; k];
        let mut h = vec![0.0; k * k];
        for (e, c) in &self.terms {
            v += c * monomial_value(e, x);
            for i in 0..k {
                if e[i] == 0 {
                    continue;
                }
                let ci = c * e[i] as f64;
                g[i] += ci * shifted_value(e, x, i, None);
                for j in 0..k {
                    let dj = if j == i { e[j] - 1 } else { e[j] };
                    if dj == 0 {
                        continue;
                    }
                    h[i * k + j] += ci * dj as f64 * shifted_value(e, x, i, Some(j));
                }
            }
        }
        (v, g, h)
    }
}

fn monomial_value(e: &[u32], x: &[f64]) -> f64 {
    e.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product()
}

/// Value of the monomial with exponent `i` (and then `j`) lowered by one.
fn shifted_value(e: &[u32], x: &[f64], i: usize, j: Option<usize>) -> f64 {
    e.iter()
        .zip(x)
        .enumerate()
        .map(|(l, (&p, &xl))| {
            let p = p - u32::from(l == i) - u32::from(Some(l) == j);
            xl.powi(p as i32)
        })
        .product()
}

fn key_string(e: &[u32]) -> String {
    e.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_key(s: &str) -> std::result::Result<Vec<u32>, String> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|t| t.trim().parse::<u32>().map_err(|e| format!("bad exponent '{t}': {e}")))
        .collect()
}

/// Serialized as a map from comma-separated exponent lists to coefficients,
/// e.g. `{"1,0": 2.0}` for `2 x_1` in two variables.
impl Serialize for AxialPoly {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.terms.len()))?;
        for (e, c) in &self.terms {
            map.serialize_entry(&key_string(e), c)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for AxialPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct PolyVisitor;
        impl<'de> Visitor<'de> for PolyVisitor {
            type Value = AxialPoly;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from exponent lists to coefficients")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<AxialPoly, A::Error> {
                let mut terms = Vec::new();
                while let Some((k, v)) = access.next_entry::<String, f64>()? {
                    terms.push((parse_key(&k).map_err(de::Error::custom)?, v));
                }
                let vars = terms.first().map(|(e, _)| e.len()).unwrap_or(0);
                AxialPoly::from_terms(vars, terms).map_err(de::Error::custom)
            }
        }
        d.deserialize_map(PolyVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn laplacian_of_harmonic_quadratic_vanishes() {
        let p = AxialPoly::from_terms(2, [(vec![2, 0], 1.0), (vec![0, 2], -1.0)]).unwrap();
        assert!(p.laplacian().is_zero());
        let q = AxialPoly::from_terms(2, [(vec![1, 1], 3.0)]).unwrap();
        assert!(q.laplacian().is_zero());
        let c = AxialPoly::monomial(vec![3], 1.0);
        assert_eq!(c.laplacian(), AxialPoly::monomial(vec![1], 6.0));
    }

    #[test]
    fn jet_matches_derivatives() {
        let p = AxialPoly::from_terms(2, [(vec![2, 1], 1.5), (vec![0, 3], -2.0), (vec![1, 0], 0.5)])
            .unwrap();
        let x = [0.3, -0.7];
        let (v, g, h) = p.jet(&x);
        assert!((v - p.eval(&x)).abs() < 1e-15);
        for i in 0..2 {
            assert!((g[i] - p.derivative(i).eval(&x)).abs() < 1e-14);
            for j in 0..2 {
                assert!((h[i * 2 + j] - p.derivative(i).derivative(j).eval(&x)).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cancellation_removes_terms() {
        let mut p = AxialPoly::monomial(vec![1, 0], 1.0);
        p.add_term(vec![1, 0], -1.0);
        assert!(p.is_zero());
        assert_eq!(p.degree(), None);
    }

    #[test]
    fn json_keys() {
        let p = AxialPoly::from_terms(2, [(vec![1, 1], 2.0)]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"1,1":2.0}"#);
        let back: AxialPoly = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
