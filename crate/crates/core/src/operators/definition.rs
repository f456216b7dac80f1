use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::DifferentialOperator;
use crate::error::{Error, Result};
use crate::linalg::MultiIndex;
use crate::scalar::Real;

/// JSON form of an operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorDef {
    pub name: String,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub l: usize,
    pub m: u32,
    pub coefficients: Vec<CoefficientDef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientDef {
    pub alpha: Vec<u32>,
    /// `l` rows of `N` entries.
    pub matrix: Vec<Vec<f64>>,
}

impl<T: Real> TryFrom<&OperatorDef> for DifferentialOperator<T> {
    type Error = Error;

    fn try_from(def: &OperatorDef) -> Result<Self> {
        let mut coeffs = Vec::with_capacity(def.coefficients.len());
        for c in &def.coefficients {
            if c.matrix.len() != def.l {
                return Err(Error::DimensionMismatch {
                    context: "rows of coefficient matrix",
                    expected: def.l,
                    found: c.matrix.len(),
                });
            }
            for row in &c.matrix {
                if row.len() != def.big_n {
                    return Err(Error::DimensionMismatch {
                        context: "columns of coefficient matrix",
                        expected: def.big_n,
                        found: row.len(),
                    });
                }
            }
            let mat = DMatrix::from_fn(def.l, def.big_n, |r, k| T::lit(c.matrix[r][k]));
            coeffs.push((MultiIndex(c.alpha.clone()), mat));
        }
        DifferentialOperator::new(Some(def.name.clone()), def.n, def.big_n, def.l, def.m, coeffs)
    }
}

impl<T: Real> From<&DifferentialOperator<T>> for OperatorDef {
    fn from(op: &DifferentialOperator<T>) -> Self {
        OperatorDef {
            name: op.label(),
            n: op.n(),
            big_n: op.dim_v(),
            l: op.dim_w(),
            m: op.order(),
            coefficients: op
                .coefficients()
                .map(|(alpha, mat)| CoefficientDef {
                    alpha: alpha.0.clone(),
                    matrix: (0..mat.nrows())
                        .map(|r| (0..mat.ncols()).map(|c| mat[(r, c)].as_f64()).collect())
                        .collect(),
                })
                .collect(),
        }
    }
}

impl<T: Real> DifferentialOperator<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let def: OperatorDef = serde_json::from_str(text)?;
        Self::try_from(&def)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&OperatorDef::from(self)).expect("operator serializes")
    }
}

impl<T: Real> Serialize for DifferentialOperator<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        OperatorDef::from(self).serialize(s)
    }
}
