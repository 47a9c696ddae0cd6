//! JSON descriptions of closed-form G-functions.
//!
//! ```json
//! {"dim": 2, "form": {"kind": "power_sum", "blocks": [{"p": 3, "size": 1}, {"p": 1.5, "size": 1}]}}
//! ```
//!
//! Matrices are row-major flat arrays. Custom forms cannot be serialised.

use super::{GForm, GFunction, PowerBlock};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GFunctionSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    pub form: FormSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub p: f64,
    /// Defaults to `1/p`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default = "one")]
    pub size: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FormSpec {
    PowerSum { blocks: Vec<BlockSpec> },
    /// `|u₁|^p/p + |u₂|^q/q` on `R^{2n}`.
    SymplecticPower { p: f64, n: usize },
    Quadratic { matrix: Vec<f64>, #[serde(default = "unit")] scale: f64 },
    LinearImage { inner: Box<GFunctionSpec>, matrix: Vec<f64> },
    Sum { components: Vec<GFunctionSpec> },
}

fn unit() -> f64 {
    1.0
}

fn square(flat: &[f64]) -> Result<DMatrix<f64>> {
    let n = (flat.len() as f64).sqrt().round() as usize;
    if n * n != flat.len() || n == 0 {
        return Err(Error::Parse(format!("matrix with {} entries is not square", flat.len())));
    }
    Ok(DMatrix::from_row_slice(n, n, flat))
}

fn flatten(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

impl GFunctionSpec {
    pub fn build(&self) -> Result<GFunction> {
        let g = match &self.form {
            FormSpec::PowerSum { blocks } => GFunction::power_sum(
                blocks
                    .iter()
                    .map(|b| PowerBlock::new(b.p, b.a.unwrap_or(1.0 / b.p), b.size))
                    .collect::<Result<Vec<_>>>()?,
            )?,
            FormSpec::SymplecticPower { p, n } => GFunction::symplectic_power(*p, *n)?,
            FormSpec::Quadratic { matrix, scale } => GFunction::quadratic(square(matrix)?, *scale)?,
            FormSpec::LinearImage { inner, matrix } => {
                GFunction::linear_image(inner.build()?, square(matrix)?)?
            }
            FormSpec::Sum { components } => GFunction::sum(
                components.iter().map(|c| c.build()).collect::<Result<Vec<_>>>()?,
            )?,
        };
        if let Some(d) = self.dim {
            Error::check_dim(d, g.dim())?;
        }
        Ok(g)
    }

    pub fn from_json(text: &str) -> Result<GFunction> {
        let spec: GFunctionSpec = serde_json::from_str(text)?;
        spec.build()
    }
}

impl GFunction {
    /// Serialisable description, or `None` for custom forms.
    pub fn to_spec(&self) -> Option<GFunctionSpec> {
        let form = match self.form() {
            GForm::PowerSum(blocks) => FormSpec::PowerSum {
                blocks: blocks
                    .iter()
                    .map(|b| BlockSpec { p: b.p, a: Some(b.a), size: b.size })
                    .collect(),
            },
            GForm::Quadratic { matrix, scale } => {
                FormSpec::Quadratic { matrix: flatten(matrix), scale: *scale }
            }
            GForm::LinearImage { inner, matrix } => {
                FormSpec::LinearImage { inner: Box::new(inner.to_spec()?), matrix: flatten(matrix) }
            }
            GForm::Sum(c) => FormSpec::Sum {
                components: c.iter().map(|g| g.to_spec()).collect::<Option<Vec<_>>>()?,
            },
            GForm::Custom(_) => return None,
        };
        Some(GFunctionSpec { dim: Some(self.dim()), form })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_power_sum_with_default_weights() {
        let g = GFunctionSpec::from_json(
            r#"{"dim": 2, "form": {"kind": "power_sum", "blocks": [{"p": 3}, {"p": 1.5}]}}"#,
        )
        .unwrap();
        assert!((g.evaluate(&[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn round_trips() {
        let g = GFunction::linear_image(
            GFunction::symplectic_power(4.0, 1).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 2.0]),
        )
        .unwrap();
        let text = serde_json::to_string(&g.to_spec().unwrap()).unwrap();
        let back = GFunctionSpec::from_json(&text).unwrap();
        let u = [0.3, -1.7];
        assert_eq!(g.evaluate(&u).unwrap(), back.evaluate(&u).unwrap());
    }

    #[test]
    fn rejects_wrong_dim_and_shape() {
        assert!(GFunctionSpec::from_json(
            r#"{"dim": 3, "form": {"kind": "symplectic_power", "p": 2, "n": 1}}"#
        )
        .is_err());
        assert!(GFunctionSpec::from_json(
            r#"{"form": {"kind": "quadratic", "matrix": [1, 0, 0]}}"#
        )
        .is_err());
    }
}
