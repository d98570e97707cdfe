//! JSON file formats: curves as {dim, modes, coeffs} or {dim, samples}
//! (auto-fit), links as {gamma1, gamma2}. Conformal maps serialize through
//! their own serde representation.

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal::ConformalMap;
use crate::curve::{Curve, Link};
use crate::error::{MobiusError, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveFile {
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    /// per coordinate: [[re, im], ...] for modes 0..=M
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coeffs: Option<Vec<Vec<[f64; 2]>>>,
    /// alternative input: uniform samples, fitted on load
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<Vec<f64>>>,
}

impl CurveFile {
    pub fn from_curve(c: &Curve) -> CurveFile {
        CurveFile {
            dim: c.dim(),
            modes: Some(c.modes()),
            coeffs: Some(
                c.coeffs()
                    .iter()
                    .map(|cs| cs.iter().map(|z| [z.re, z.im]).collect())
                    .collect(),
            ),
            samples: None,
        }
    }

    pub fn into_curve(self) -> Result<Curve> {
        match (self.coeffs, self.samples) {
            (Some(coeffs), None) => {
                let parsed: Vec<Vec<Complex64>> = coeffs
                    .into_iter()
                    .map(|cs| cs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
                    .collect();
                if let Some(m) = self.modes {
                    if parsed.iter().any(|cs| cs.len() != m + 1) {
                        return Err(MobiusError::Config(format!(
                            "coefficient rows disagree with modes = {m}"
                        )));
                    }
                }
                Curve::new(self.dim, parsed)
            }
            (None, Some(samples)) => {
                let dim = self.dim;
                let pts: Vec<crate::vec4::Vec4> = samples
                    .iter()
                    .map(|row| {
                        if row.len() != dim {
                            return Err(MobiusError::Config(format!(
                                "sample of length {} in a dim-{dim} curve",
                                row.len()
                            )));
                        }
                        let mut p = [0.0; 4];
                        p[..dim].copy_from_slice(row);
                        Ok(p)
                    })
                    .collect::<Result<_>>()?;
                // default mode count: as many as the samples support, capped
                let modes = self.modes.unwrap_or_else(|| (pts.len() / 2 - 1).min(32));
                Curve::fit(dim, &pts, modes)
            }
            _ => Err(MobiusError::Config(
                "curve needs exactly one of `coeffs` or `samples`".into(),
            )),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkFile {
    pub gamma1: CurveFile,
    pub gamma2: CurveFile,
}

impl LinkFile {
    pub fn from_link(l: &Link) -> LinkFile {
        LinkFile {
            gamma1: CurveFile::from_curve(&l.gamma1),
            gamma2: CurveFile::from_curve(&l.gamma2),
        }
    }

    pub fn into_link(self) -> Result<Link> {
        Link::new(self.gamma1.into_curve()?, self.gamma2.into_curve()?)
    }
}

fn parse_error(path: &Path, e: impl std::fmt::Display) -> MobiusError {
    MobiusError::Config(format!("{}: {e}", path.display()))
}

pub fn read_link(path: &Path) -> Result<Link> {
    let text = fs::read_to_string(path).map_err(|e| parse_error(path, e))?;
    let file: LinkFile = serde_json::from_str(&text).map_err(|e| parse_error(path, e))?;
    file.into_link()
}

pub fn write_link(path: &Path, link: &Link) -> Result<()> {
    let text = serde_json::to_string_pretty(&LinkFile::from_link(link))
        .map_err(|e| parse_error(path, e))?;
    fs::write(path, text).map_err(|e| parse_error(path, e))
}

pub fn read_conformal_map(path: &Path) -> Result<ConformalMap> {
    let text = fs::read_to_string(path).map_err(|e| parse_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| parse_error(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::hopf_link;
    use crate::energy::{mobius_energy, QuadratureSpec};

    #[test]
    fn link_json_round_trip() {
        let dir = std::env::temp_dir().join("mobius-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("hopf.json");
        let hopf = hopf_link();
        write_link(&path, &hopf).unwrap();
        let back = read_link(&path).unwrap();
        let quad = QuadratureSpec { n: 48 };
        assert!((mobius_energy(&back, &quad) - mobius_energy(&hopf, &quad)).abs() < 1e-12);
    }

    #[test]
    fn samples_are_fitted() {
        let src = hopf_link();
        let pts: Vec<Vec<f64>> = (0..64)
            .map(|j| {
                let x = src.gamma1.eval(crate::curve::TAU * j as f64 / 64.0);
                x.to_vec()
            })
            .collect();
        let file = CurveFile { dim: 4, modes: Some(4), coeffs: None, samples: Some(pts) };
        let curve = file.into_curve().unwrap();
        for j in 0..97 {
            let s = crate::curve::TAU * j as f64 / 97.0;
            assert!(crate::vec4::dist(&curve.eval(s), &src.gamma1.eval(s)) < 1e-10);
        }
    }

    #[test]
    fn malformed_inputs_rejected() {
        let file = CurveFile { dim: 3, modes: None, coeffs: None, samples: None };
        assert!(matches!(file.into_curve(), Err(MobiusError::Config(_))));
        let bad: std::result::Result<LinkFile, _> =
            serde_json::from_str("{\"gamma1\": 3, \"gamma2\": []}");
        assert!(bad.is_err());
        let unknown: std::result::Result<CurveFile, _> =
            serde_json::from_str("{\"dim\": 3, \"coefs\": []}");
        assert!(unknown.is_err(), "unknown keys must be rejected");
    }
}
