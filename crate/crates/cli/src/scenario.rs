//! Scenario files: a model `R^k x C^m_HL` and an initial potential.

use std::path::Path;

use hlcone_core::geometry::{hamiltonian_expansion, ComplexMatrixJson, CylinderModel, RotationGenerator, SymmetryGenerator};
use hlcone_core::harmonics::{HarmonicExpansion, Parity};
use hlcone_core::poly::AxialPoly;
use hlcone_core::{Error, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub k: usize,
    pub m: usize,
    /// Multiplies every mode coefficient.
    #[serde(default = "one")]
    pub epsilon: f64,
    #[serde(default)]
    pub modes: Vec<ModeSpec>,
    /// Adds `scale * h_a` for an `su(k+m)` generator `a`.
    #[serde(default)]
    pub rotation: Option<RotationSpec>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    /// Axial polynomial; empty means the constant 1.
    #[serde(default)]
    pub axial: Vec<TermSpec>,
    pub nu: Vec<i64>,
    #[serde(default = "cos")]
    pub parity: Parity,
    pub coeff: f64,
    /// Scale the trig factor to unit L2 norm on the link.
    #[serde(default)]
    pub normalized: bool,
}

fn cos() -> Parity {
    Parity::Cos
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotationSpec {
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
    pub scale: f64,
}

impl Scenario {
    /// Zero potential on `R^k x C^m_HL`.
    pub fn zero(k: usize, m: usize) -> Self {
        Self { name: "zero".into(), k, m, epsilon: 1.0, modes: vec![], rotation: None }
    }

    pub fn model(&self) -> Result<CylinderModel> {
        CylinderModel::new(self.k, self.m)
    }

    pub fn potential(&self) -> Result<HarmonicExpansion> {
        let model = self.model()?;
        let mut f = HarmonicExpansion::new(self.k, self.m)?;
        for (i, mode) in self.modes.iter().enumerate() {
            let h = if mode.axial.is_empty() {
                AxialPoly::constant(self.k, 1.0)
            } else {
                AxialPoly::from_terms(self.k, mode.axial.iter().map(|t| (t.exponents.clone(), t.coeff)))?
            };
            let c = self.epsilon * mode.coeff;
            let pushed = if mode.normalized {
                f.push_normalized(h, mode.nu.clone(), mode.parity, c)
            } else {
                f.push_harmonic(h, mode.nu.clone(), mode.parity, c)
            };
            pushed.map_err(|e| Error::Input(format!("mode {i}: {e}")))?;
        }
        if let Some(rot) = &self.rotation {
            let a = RotationGenerator::try_from(ComplexMatrixJson { re: rot.re.clone(), im: rot.im.clone() })?;
            let h = hamiltonian_expansion(&model, &SymmetryGenerator::Rotation(a.scaled(rot.scale)))?;
            f = f.add(&h);
        }
        Ok(f)
    }
}

/// Reads TOML, or JSON when the extension is `.json`.
pub fn read_file<T: DeserializeOwned>(path: &Path) -> std::result::Result<(T, Vec<u8>), String> {
    let bytes = std::fs::read(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let text = std::str::from_utf8(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(text).map_err(|e| format!("{}: {e}", path.display()))?
    } else {
        toml::from_str(text).map_err(|e| format!("{}: {e}", path.display()))?
    };
    Ok((parsed, bytes))
}
